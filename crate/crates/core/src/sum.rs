//! Fixed-order compensated (Neumaier) summation.

use num_complex::Complex;

use crate::real::Real;

#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Neumaier<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CNeumaier<T> {
    re: Neumaier<T>,
    im: Neumaier<T>,
}

impl<T: Real> CNeumaier<T> {
    pub fn new() -> Self {
        Self { re: Neumaier::new(), im: Neumaier::new() }
    }

    pub fn add(&mut self, z: Complex<T>) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex<T> {
        Complex::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of a sequence in the order given.
pub fn csum<T: Real, I: IntoIterator<Item = Complex<T>>>(items: I) -> Complex<T> {
    let mut acc = CNeumaier::new();
    for z in items {
        acc.add(z);
    }
    acc.value()
}

pub fn rsum<T: Real, I: IntoIterator<Item = T>>(items: I) -> T {
    let mut acc = Neumaier::new();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

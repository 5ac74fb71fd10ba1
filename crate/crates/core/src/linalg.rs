//! Dense complex matrices stored row-major in plain vectors.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::real::{cone, czero, Real};

fn mag1<T: Real>(z: &Complex<T>) -> f64 {
    z.re.val().abs() + z.im.val().abs()
}

/// Determinant by LU with partial pivoting; `a` is overwritten.
pub fn det_in_place<T: Real>(a: &mut [Complex<T>], n: usize) -> Complex<T> {
    debug_assert_eq!(a.len(), n * n);
    let mut det = cone::<T>();
    for k in 0..n {
        let mut piv = k;
        let mut best = mag1(&a[k * n + k]);
        for i in k + 1..n {
            let m = mag1(&a[i * n + k]);
            if m > best {
                best = m;
                piv = i;
            }
        }
        if best == 0.0 {
            return czero();
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det = det * pivot;
        let inv = cone::<T>() / pivot;
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f.re == T::zero() && f.im == T::zero() {
                continue;
            }
            let (top, bottom) = a.split_at_mut(i * n);
            let src = &top[k * n + k + 1..k * n + n];
            let dst = &mut bottom[k + 1..n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = *d - f * *s;
            }
        }
    }
    det
}

pub fn det<T: Real>(a: &[Complex<T>], n: usize) -> Complex<T> {
    let mut w = a.to_vec();
    det_in_place(&mut w, n)
}

pub fn matmul<T: Real>(a: &[Complex<T>], b: &[Complex<T>], n: usize) -> Vec<Complex<T>> {
    let mut c = vec![czero::<T>(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik.re == T::zero() && aik.im == T::zero() {
                continue;
            }
            let row = &b[k * n..k * n + n];
            let out = &mut c[i * n..i * n + n];
            for (o, bk) in out.iter_mut().zip(row) {
                *o = *o + aik * *bk;
            }
        }
    }
    c
}

pub fn trace<T: Real>(a: &[Complex<T>], n: usize) -> Complex<T> {
    crate::sum::csum((0..n).map(|i| a[i * n + i]))
}

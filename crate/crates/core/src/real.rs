//! Scalar abstraction shared by every evaluator: plain `f64` and a
//! double-double type for the cancellation-heavy paths.

use core::cmp::Ordering;
use core::fmt::{self, Debug};
use core::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign,
};

use num_complex::Complex;
use num_traits::{Float, Num, One, Zero};

/// Real scalar used by the generic evaluators.
pub trait Real:
    Num
    + Copy
    + Debug
    + Default
    + PartialOrd
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Unit roundoff of the type.
    const EPS: f64;

    fn of(x: f64) -> Self;

    fn val(self) -> f64;

    fn abs(self) -> Self;

    fn sqrt(self) -> Self;

    fn exp_r(self) -> Self;

    fn sin_cos_r(self) -> (Self, Self);

    fn pi() -> Self;

    fn of_int(n: i64) -> Self {
        Self::of(n as f64)
    }

    fn is_finite(self) -> bool {
        self.val().is_finite()
    }
}

impl Real for f64 {
    const EPS: f64 = f64::EPSILON / 2.0;

    fn of(x: f64) -> Self {
        x
    }

    fn val(self) -> f64 {
        self
    }

    fn abs(self) -> Self {
        Float::abs(self)
    }

    fn sqrt(self) -> Self {
        Float::sqrt(self)
    }

    fn exp_r(self) -> Self {
        Float::exp(self)
    }

    fn sin_cos_r(self) -> (Self, Self) {
        Float::sin_cos(self)
    }

    fn pi() -> Self {
        core::f64::consts::PI
    }
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi)/2`, about 32
/// significant digits. Products use Dekker splitting, so no fused
/// multiply-add is required.
#[derive(Clone, Copy, Default)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

const SPLITTER: f64 = 134_217_729.0;

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline(always)]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline(always)]
fn split(a: f64) -> (f64, f64) {
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// `pi`.
    pub fn pi_const() -> Self {
        Self::new(f64::from_bits(0x400921FB54442D18), f64::from_bits(0x3CA1A62633145C07))
    }

    /// `pi / 2`.
    pub fn half_pi() -> Self {
        Self::new(f64::from_bits(0x3FF921FB54442D18), f64::from_bits(0x3C91A62633145C07))
    }

    /// `ln 2`.
    pub fn ln2() -> Self {
        Self::new(f64::from_bits(0x3FE62E42FEFA39EF), f64::from_bits(0x3C7ABC9E3B39803F))
    }

    #[inline(always)]
    fn mul_f64(self, b: f64) -> Self {
        let (ch, cl1) = two_prod(self.hi, b);
        let (h, l) = fast_two_sum(ch, self.lo * b + cl1);
        Self::new(h, l)
    }

    fn scale_pow2(self, k: i64) -> Self {
        let mut x = self;
        let mut k = k;
        while k > 1000 {
            x = x.mul_f64(pow2(1000));
            k -= 1000;
        }
        while k < -1000 {
            x = x.mul_f64(pow2(-1000));
            k += 1000;
        }
        x.mul_f64(pow2(k as i32))
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Self::new(x, 0.0)
    }
}

impl Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl PartialEq for Dd {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline(always)]
    fn neg(self) -> Dd {
        Dd::new(-self.hi, -self.lo)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline(always)]
    fn add(self, y: Dd) -> Dd {
        let (sh, sl) = two_sum(self.hi, y.hi);
        let (th, tl) = two_sum(self.lo, y.lo);
        let (vh, vl) = fast_two_sum(sh, sl + th);
        let (h, l) = fast_two_sum(vh, tl + vl);
        Dd::new(h, l)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline(always)]
    fn sub(self, y: Dd) -> Dd {
        self + (-y)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline(always)]
    fn mul(self, y: Dd) -> Dd {
        let (ch, cl1) = two_prod(self.hi, y.hi);
        let tl = self.hi * y.lo + self.lo * y.hi;
        let (h, l) = fast_two_sum(ch, cl1 + tl);
        Dd::new(h, l)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, y: Dd) -> Dd {
        let q1 = self.hi / y.hi;
        let r = self - y.mul_f64(q1);
        let q2 = r.hi / y.hi;
        let r = r - y.mul_f64(q2);
        let q3 = r.hi / y.hi;
        let (h, l) = fast_two_sum(q1, q2);
        Dd::new(h, l) + Dd::from(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, y: Dd) -> Dd {
        let q = Float::trunc((self / y).val());
        self - y.mul_f64(q)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, y: f64) -> Dd {
        self + Dd::from(y)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, y: f64) -> Dd {
        self - Dd::from(y)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, y: f64) -> Dd {
        self.mul_f64(y)
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, y: f64) -> Dd {
        self / Dd::from(y)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, y: Dd) {
        *self = *self + y;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, y: Dd) {
        *self = *self - y;
    }
}

impl MulAssign for Dd {
    fn mul_assign(&mut self, y: Dd) {
        *self = *self * y;
    }
}

impl DivAssign for Dd {
    fn div_assign(&mut self, y: Dd) {
        *self = *self / y;
    }
}

impl Zero for Dd {
    fn zero() -> Self {
        Dd::new(0.0, 0.0)
    }

    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Dd {
    fn one() -> Self {
        Dd::new(1.0, 0.0)
    }
}

impl Num for Dd {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;

    fn from_str_radix(s: &str, radix: u32) -> core::result::Result<Self, Self::FromStrRadixErr> {
        <f64 as Num>::from_str_radix(s, radix).map(Dd::from)
    }
}

impl Real for Dd {
    const EPS: f64 = 6.0e-33;

    fn of(x: f64) -> Self {
        Dd::from(x)
    }

    fn val(self) -> f64 {
        self.hi + self.lo
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from(Float::sqrt(self.hi));
        }
        let s = Float::sqrt(self.hi);
        let (ph, pl) = two_prod(s, s);
        let r = self - Dd::new(ph, pl);
        let (h, l) = fast_two_sum(s, r.hi / (2.0 * s));
        Dd::new(h, l)
    }

    fn exp_r(self) -> Self {
        dd_exp(self)
    }

    fn sin_cos_r(self) -> (Self, Self) {
        dd_sin_cos(self)
    }

    fn pi() -> Self {
        Dd::pi_const()
    }
}

fn pow2(k: i32) -> f64 {
    f64::from_bits(((k + 1023) as u64) << 52)
}

fn dd_exp(x: Dd) -> Dd {
    let h = x.hi;
    if h.is_nan() {
        return x;
    }
    if h < -745.2 {
        return Dd::zero();
    }
    if h > 709.8 {
        return Dd::from(f64::INFINITY);
    }
    let k = Float::round(h / core::f64::consts::LN_2);
    let r = (x - Dd::ln2().mul_f64(k)).mul_f64(pow2(-10));
    // expm1 by Taylor on |r| < 4e-4, then undo the scaling with
    // e^{2y} - 1 = s (s + 2).
    let mut term = r;
    let mut s = r;
    let mut n = 1.0;
    while Float::abs(term.hi) > 1e-36 {
        n += 1.0;
        term = term * r / n;
        s += term;
    }
    for _ in 0..10 {
        s = s * (s + 2.0);
    }
    (s + 1.0).scale_pow2(k as i64)
}

fn dd_sin_cos(x: Dd) -> (Dd, Dd) {
    if !x.hi.is_finite() {
        let nan = Dd::from(f64::NAN);
        return (nan, nan);
    }
    let k = Float::round(x.hi / core::f64::consts::FRAC_PI_2);
    let r = x - Dd::half_pi().mul_f64(k);
    let r2 = r * r;
    let mut s = r;
    let mut term = r;
    let mut n = 1.0;
    while Float::abs(term.hi) > 1e-36 {
        term = -term * r2 / ((n + 1.0) * (n + 2.0));
        s += term;
        n += 2.0;
    }
    let mut c = Dd::one();
    let mut term = Dd::one();
    let mut n = 0.0;
    while Float::abs(term.hi) > 1e-36 {
        term = -term * r2 / ((n + 1.0) * (n + 2.0));
        c += term;
        n += 2.0;
    }
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    let m = z.re.exp_r();
    let (s, c) = z.im.sin_cos_r();
    Complex::new(m * c, m * s)
}

/// `e^{i theta}`.
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos_r();
    Complex::new(c, s)
}

/// `e^{2 pi i j / m}` evaluated at full precision of `T`.
pub fn root_of_unity<T: Real>(j: i64, m: usize) -> Complex<T> {
    let m = m as i64;
    let j = j.rem_euclid(m);
    let theta = T::pi() * T::of_int(2 * j) / T::of_int(m);
    cis(theta)
}

/// Integer power by repeated squaring; negative exponents invert first.
pub fn cpowi<T: Real>(z: Complex<T>, n: i64) -> Complex<T> {
    let (mut base, mut e) = if n < 0 {
        (Complex::new(T::one(), T::zero()) / z, n.unsigned_abs())
    } else {
        (z, n as u64)
    };
    let mut acc = Complex::new(T::one(), T::zero());
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base;
        }
        e >>= 1;
        if e > 0 {
            base = base * base;
        }
    }
    acc
}

pub fn powi<T: Real>(x: T, n: i64) -> T {
    let (mut base, mut e) = if n < 0 {
        (T::one() / x, n.unsigned_abs())
    } else {
        (x, n as u64)
    };
    let mut acc = T::one();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base;
        }
        e >>= 1;
        if e > 0 {
            base = base * base;
        }
    }
    acc
}

/// Modulus as `f64`, for thresholds and diagnostics.
pub fn cabs<T: Real>(z: Complex<T>) -> f64 {
    Float::hypot(z.re.val(), z.im.val())
}

pub fn to_c64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(z.re.val(), z.im.val())
}

pub fn lift<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::of(z.re), T::of(z.im))
}

pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

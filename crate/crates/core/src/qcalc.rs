//! Rate parameters and tau-deformed combinatorics.

use alloc::format;

use crate::error::{config, domain, Result};
use crate::real::{powi, Real};
use crate::sum::Neumaier;

/// Jump rates: `p` to the right, `q = 1 - p` to the left, with `p < q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateParams {
    p: f64,
    q: f64,
    tau: f64,
}

impl RateParams {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(config(format!("p must be finite, got {p}")));
        }
        if p < 0.0 {
            return Err(config(format!("0 <= p violated: p = {p}")));
        }
        if p >= 0.5 {
            return Err(config(format!("p < q (that is p < 0.5) violated: p = {p}")));
        }
        let q = 1.0 - p;
        Ok(Self { p, q, tau: p / q })
    }

    /// The totally asymmetric point `p = 0`.
    pub fn tasep() -> Self {
        Self { p: 0.0, q: 1.0, tau: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `p` in the working precision.
    pub fn p_in<T: Real>(&self) -> T {
        T::of(self.p)
    }

    /// `q = 1 - p` formed in the working precision, so `p + q = 1` there too.
    pub fn q_in<T: Real>(&self) -> T {
        T::one() - T::of(self.p)
    }

    pub fn tau_in<T: Real>(&self) -> T {
        self.p_in::<T>() / self.q_in::<T>()
    }
}

/// `[n] = 1 + tau + ... + tau^{n-1}`.
pub fn q_bracket<T: Real>(n: i64, tau: T) -> Result<T> {
    if n < 0 {
        return Err(domain(format!("q_bracket needs n >= 0, got {n}")));
    }
    let mut acc = T::zero();
    for _ in 0..n {
        acc = acc * tau + T::one();
    }
    Ok(acc)
}

/// `[n]! = [1][2]...[n]`, with `[0]! = 1`.
pub fn q_factorial<T: Real>(n: i64, tau: T) -> Result<T> {
    if n < 0 {
        return Err(domain(format!("q_factorial needs n >= 0, got {n}")));
    }
    let mut acc = T::one();
    for j in 1..=n {
        acc = acc * q_bracket(j, tau)?;
    }
    Ok(acc)
}

/// Tau-binomial coefficient; zero outside `0 <= k <= n`.
pub fn q_binomial<T: Real>(n: i64, k: i64, tau: T) -> T {
    if n < 0 || k < 0 || k > n {
        return T::zero();
    }
    let num = q_factorial(n, tau).unwrap_or_else(|_| T::zero());
    let a = q_factorial(k, tau).unwrap_or_else(|_| T::one());
    let b = q_factorial(n - k, tau).unwrap_or_else(|_| T::one());
    num / (a * b)
}

/// `prod_{j=1}^{k-1} (1 - tau^j)`.
pub fn q_pochhammer<T: Real>(k: i64, tau: T) -> Result<T> {
    if k < 1 {
        return Err(domain(format!("q_pochhammer needs k >= 1, got {k}")));
    }
    let mut acc = T::one();
    let mut tj = T::one();
    for _ in 1..k {
        tj = tj * tau;
        acc = acc * (T::one() - tj);
    }
    Ok(acc)
}

/// Closed form of `sum_{m=1}^k (-1)^{m+1} tau^{m(m-1)/2 - km} [k-1 over k-m]`.
pub fn collapsed_m_sum<T: Real>(k: i64, tau: T) -> Result<T> {
    if k < 1 {
        return Err(domain(format!("collapsed_m_sum needs k >= 1, got {k}")));
    }
    if tau == T::zero() {
        return Err(domain("collapsed_m_sum has a pole at tau = 0; use the tau -> 0 path"));
    }
    let sign = if k % 2 == 1 { T::one() } else { -T::one() };
    Ok(sign * powi(tau, -(k * (k + 1) / 2)) * q_pochhammer(k, tau)?)
}

/// The explicit m-sum, kept for identity checks.
pub fn collapsed_m_sum_direct<T: Real>(k: i64, tau: T) -> Result<T> {
    if k < 1 {
        return Err(domain(format!("collapsed_m_sum needs k >= 1, got {k}")));
    }
    if tau == T::zero() {
        return Err(domain("collapsed_m_sum has a pole at tau = 0; use the tau -> 0 path"));
    }
    let mut acc = Neumaier::new();
    for m in 1..=k {
        let sign = if m % 2 == 1 { T::one() } else { -T::one() };
        let e = m * (m - 1) / 2 - k * m;
        acc.add(sign * powi(tau, e) * q_binomial(k - 1, k - m, tau));
    }
    Ok(acc.value())
}

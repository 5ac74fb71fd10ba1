//! Identity and quadrature suites behind `asep check`.

use asep_core::contour::{default_radius, QuadNodes};
use asep_core::finite::{assembled_leading_coefficient, leading_coefficient, weighted_c_mk, CoefficientFn};
use asep_core::fredholm::tw2_identity_residual;
use asep_core::qcalc::{collapsed_m_sum, collapsed_m_sum_direct, q_binomial};
use asep_core::real::{cpowi, lift};
use asep_core::{Dd, RateParams};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of one family of checks.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    /// Up to five failing cases.
    pub failures: Vec<String>,
}

impl Check {
    fn new(name: &str, tol: f64) -> Self {
        Self { name: name.into(), cases: 0, max_residual: 0.0, tol, pass: true, failures: Vec::new() }
    }

    fn record(&mut self, residual: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        if residual.is_nan() || residual > self.max_residual {
            self.max_residual = if residual.is_nan() { f64::INFINITY } else { residual };
        }
        if !(residual < self.tol) {
            self.pass = false;
            if self.failures.len() < 5 {
                self.failures.push(format!("{}: residual {residual:e}", case()));
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { suite: suite.into(), checks, pass }
    }
}

/// Coefficient function with its sign flipped, for testing the suite itself.
pub fn sign_flipped_c_mk(m: i64, k: i64, sigma: i64, params: &RateParams) -> asep_core::Result<f64> {
    weighted_c_mk(m, k, sigma, params).map(|v| -v)
}

/// Gaussian polynomial `[n over k]` as integer coefficients in `tau`.
pub fn gaussian_polynomial(n: usize, k: usize) -> Vec<u64> {
    let mut prev: Vec<Vec<u64>> = vec![vec![1]];
    for m in 1..=n {
        let mut row = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let mut c = vec![0u64; j * (m - j) + 1];
            if j >= 1 {
                for (d, v) in prev[j - 1].iter().enumerate() {
                    c[d] += v;
                }
            }
            if j < m {
                for (d, v) in prev[j].iter().enumerate() {
                    c[d + j] += v;
                }
            }
            row.push(c);
        }
        prev = row;
    }
    prev.swap_remove(k)
}

fn horner(c: &[u64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v as f64)
}

const RATES: [f64; 3] = [0.1, 0.3, 0.45];

/// `sum_j [n over j] (-z)^j tau^{j(j-1)/2} = prod_j (1 - z tau^j)`; the
/// residual is relative to the larger of the product and the summed
/// magnitudes of the left-hand terms.
pub fn tau_binomial_theorem() -> Vec<Check> {
    let mut coef = Check::new("tau-binomial coefficients vs Gaussian polynomials", 1e-13);
    let mut thm = Check::new("tau-binomial theorem, n <= 12", 1e-10);
    for n in 0..=12usize {
        for &tau in &[0.0, 0.1, 0.5, 0.9] {
            for j in 0..=n {
                let c = q_binomial(n as i64, j as i64, tau);
                let o = horner(&gaussian_polynomial(n, j), tau);
                coef.record((c - o).abs() / o.abs(), || format!("n={n} j={j} tau={tau}"));
            }
            for &z in &[-2.0, -1.0, 0.5, 1.0, 3.0f64] {
                let mut lhs = 0.0;
                let mut mag = 0.0;
                for j in 0..=n {
                    let term = q_binomial(n as i64, j as i64, tau) * (-z).powi(j as i32) * tau.powi((j * j.saturating_sub(1) / 2) as i32);
                    lhs += term;
                    mag += term.abs();
                }
                let rhs: f64 = (0..n).map(|j| 1.0 - z * tau.powi(j as i32)).product();
                let scale = rhs.abs().max(mag);
                thm.record((lhs - rhs).abs() / scale, || format!("n={n} z={z} tau={tau}"));
            }
        }
    }
    vec![coef, thm]
}

/// Binomial symmetry, checked for exact equality.
pub fn binomial_symmetry() -> Check {
    let mut c = Check::new("tau-binomial symmetry (exact)", f64::MIN_POSITIVE);
    for n in 0..=12i64 {
        for k in 0..=n {
            for &tau in &[0.0, 0.1, 0.5, 0.9] {
                let d = (q_binomial(n, k, tau) - q_binomial(n, n - k, tau)).abs();
                c.record(d, || format!("n={n} k={k} tau={tau}"));
            }
        }
    }
    c
}

/// Both sides of the collapsed m-sum in double-double.
pub fn collapsed_sum() -> Check {
    let mut c = Check::new("collapsed m-sum, k <= 10", 1e-10);
    for k in 1..=10i64 {
        for &tau in &[0.1, 0.5, 0.9] {
            let a = collapsed_m_sum(k, Dd::from(tau)).map(|v| v.hi());
            let b = collapsed_m_sum_direct(k, Dd::from(tau)).map(|v| v.hi());
            let r = match (a, b) {
                (Ok(a), Ok(b)) => (a - b).abs() / a.abs().max(b.abs()),
                _ => f64::INFINITY,
            };
            c.record(r, || format!("k={k} tau={tau}"));
        }
    }
    c
}

/// The determinant identity on random node tuples of the default contour.
pub fn tw2_identity(tuples: usize, seed: u64) -> Check {
    let mut c = Check::new("TW2 determinant identity, k <= 5", 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &p in &RATES {
        let params = RateParams::new(p).expect("valid rate");
        let r = default_radius(&params);
        for n in 0..tuples {
            let k = 1 + n % 5;
            let xi: Vec<Complex<Dd>> = (0..k)
                .map(|_| lift(Complex::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU)))
                .collect();
            let res = tw2_identity_residual(&xi, &params).unwrap_or(f64::INFINITY);
            c.record(res, || format!("p={p} k={k} tuple #{n}"));
        }
    }
    c
}

/// Assembled `S = Y` prefactor against the closed form, `N <= 6`.
pub fn leading_coefficients(coef: CoefficientFn) -> Check {
    let mut c = Check::new("leading coefficient, N <= 6", 1e-12);
    for &p in &RATES {
        let params = RateParams::new(p).expect("valid rate");
        for n in 1..=6 {
            let r = assembled_leading_coefficient(n, &params, coef)
                .map(|a| (a - leading_coefficient(n, &params)).abs())
                .unwrap_or(f64::INFINITY);
            c.record(r, || format!("p={p} N={n}"));
        }
    }
    c
}

pub fn identities(coef: CoefficientFn) -> SuiteReport {
    let mut checks = tau_binomial_theorem();
    checks.push(binomial_symmetry());
    checks.push(collapsed_sum());
    checks.push(tw2_identity(100, 0x5eed));
    checks.push(leading_coefficients(coef));
    SuiteReport::new("identities", checks)
}

/// `sum_j w_j xi_j^m = R^{m+1}` when `M | m + 1` and 0 otherwise, for
/// `|m| < 2M`; residuals relative to `R^{m+1}`.
pub fn residues() -> Check {
    let mut c = Check::new("discrete residues, |m| < 2M", 1e-13);
    for &r in &[2.0, 2.65, 3.0] {
        for &m in &[8usize, 48, 64] {
            let nodes: QuadNodes<f64> = QuadNodes::circle(r, m).expect("valid circle");
            let mi = m as i64;
            for e in (1 - 2 * mi)..(2 * mi) {
                let s = nodes.integrate(|z| cpowi(z, e));
                let scale = r.powi((e + 1) as i32);
                let want = if (e + 1) % mi == 0 { scale } else { 0.0 };
                c.record((s - Complex::new(want, 0.0)).norm() / scale, || format!("R={r} M={m} m={e}"));
            }
        }
    }
    c
}

pub fn quadrature() -> SuiteReport {
    SuiteReport::new("quadrature", vec![residues()])
}

pub fn coefficient_fn(inject_sign_flip: bool) -> CoefficientFn {
    if inject_sign_flip {
        sign_flipped_c_mk
    } else {
        weighted_c_mk
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_polynomials() {
        assert_eq!(gaussian_polynomial(4, 2), vec![1, 1, 2, 1, 1]);
        assert_eq!(gaussian_polynomial(5, 0), vec![1]);
        assert_eq!(horner(&gaussian_polynomial(6, 3), 1.0), 20.0);
    }

    #[test]
    fn suites_pass_and_detect_a_flip() {
        assert!(identities(coefficient_fn(false)).pass);
        let flipped = identities(coefficient_fn(true));
        assert!(!flipped.pass);
        let bad: Vec<&str> = flipped.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        assert_eq!(bad, ["leading coefficient, N <= 6"]);
        assert!(quadrature().pass);
    }
}

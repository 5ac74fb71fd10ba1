//! The kernel `K_{x,t}(xi, xi') = q xi'^x e^{eps(xi') t} / (p + q xi xi' - xi)`,
//! its Nyström matrix and the Taylor coefficients of `det(I - lambda A)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::contour::{epsilon, pair_denominator, pair_factor, QuadNodes};
use crate::error::{domain, Error, Result};
use crate::linalg::{det, matmul, trace};
use crate::qcalc::{q_pochhammer, RateParams};
use crate::real::{cabs, cexp, cpowi, czero, powi, Real};
use crate::step::{Engine, SeriesSpec, SeriesValue, StepKind, StepSeries};

pub fn kernel_eval<T: Real>(
    xi: Complex<T>,
    xi_prime: Complex<T>,
    x: i64,
    t: f64,
    params: &RateParams,
) -> Result<Complex<T>> {
    let zero = xi_prime.re == T::zero() && xi_prime.im == T::zero();
    if zero && (x < 0 || t > 0.0) {
        return Err(domain("kernel needs xi' != 0 when x < 0 or t > 0"));
    }
    let den = pair_denominator(xi, xi_prime, params)?;
    let growth = if t == 0.0 {
        Complex::new(T::one(), T::zero())
    } else {
        cexp(epsilon(xi_prime, params)? * T::of(t))
    };
    Ok(cpowi(xi_prime, x) * growth * params.q_in::<T>() / den)
}

/// `A[i][j] = K(xi_i, xi_j) w_j`, row-major.
#[derive(Clone, Debug)]
pub struct KernelMatrix<T> {
    pub entries: Vec<Complex<T>>,
    pub m: usize,
    pub x: i64,
    pub t: f64,
}

pub fn build_matrix<T: Real>(x: i64, t: f64, params: &RateParams, nodes: &QuadNodes<T>) -> Result<KernelMatrix<T>> {
    let m = nodes.len();
    let q = params.q_in::<T>();
    let mut col = Vec::with_capacity(m);
    for (&z, &w) in nodes.nodes.iter().zip(&nodes.weights) {
        let g = if t == 0.0 { Complex::new(T::one(), T::zero()) } else { cexp(epsilon(z, params)? * T::of(t)) };
        col.push(cpowi(z, x) * g * w * q);
    }
    let mut entries = vec![czero::<T>(); m * m];
    for i in 0..m {
        for j in 0..m {
            let den = pair_denominator(nodes.nodes[i], nodes.nodes[j], params)?;
            entries[i * m + j] = col[j] / den;
        }
    }
    Ok(KernelMatrix { entries, m, x, t })
}

/// Coefficients of `det(I - lambda A) = sum_k c_k lambda^k`.
#[derive(Clone, Debug)]
pub struct DetCoefficients<T> {
    pub c: Vec<Complex<T>>,
    /// `tr(A^r)`, `r = 1..=k_max`.
    pub traces: Vec<Complex<T>>,
}

/// Newton's identities on traces of powers: `c_k = (-1)^k e_k`.
pub fn det_coefficients<T: Real>(a: &KernelMatrix<T>, k_max: usize) -> Result<DetCoefficients<T>> {
    coefficients_of(&a.entries, a.m, k_max)
}

pub fn coefficients_of<T: Real>(a: &[Complex<T>], m: usize, k_max: usize) -> Result<DetCoefficients<T>> {
    if k_max > m {
        return Err(domain("k_max <= M violated"));
    }
    let mut traces = Vec::with_capacity(k_max);
    let mut pow = a.to_vec();
    for r in 1..=k_max {
        if r > 1 {
            pow = matmul(&pow, a, m);
        }
        traces.push(trace(&pow, m));
    }
    let mut e = vec![Complex::new(T::one(), T::zero())];
    for k in 1..=k_max {
        let mut s = czero::<T>();
        for r in 1..=k {
            let term = e[k - r] * traces[r - 1];
            s = if r % 2 == 1 { s + term } else { s - term };
        }
        e.push(s / T::of_int(k as i64));
    }
    let c = e.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -*v }).collect();
    Ok(DetCoefficients { c, traces })
}

/// `tau^{-k(k-1)/2} prod_{j<k} (1 - tau^j)`.
pub fn coefficient_prefactor<T: Real>(k: usize, params: &RateParams) -> Result<T> {
    if params.tau() == 0.0 {
        return Err(domain("negative powers of tau: tau = 0 is not allowed here"));
    }
    let ki = k as i64;
    let tau = params.tau_in::<T>();
    Ok(powi(tau, -(ki * (ki - 1) / 2)) * q_pochhammer(ki, tau)?)
}

/// Raw k-th CDF term `tau^{-k(k-1)/2} prod(1 - tau^j) [c_k(x+1) - c_k(x)]`
/// on the given nodes.
pub fn cdf_term_fredholm<T: Real>(x: i64, k: usize, t: f64, params: &RateParams, nodes: &QuadNodes<T>) -> Result<Complex<T>> {
    let c1 = det_coefficients(&build_matrix(x + 1, t, params, nodes)?, k)?;
    let c0 = det_coefficients(&build_matrix(x, t, params, nodes)?, k)?;
    Ok((c1.c[k] - c0.c[k]) * coefficient_prefactor::<T>(k, params)?)
}

/// CDF from the Fredholm coefficients of the Nyström matrices.
pub fn cdf_via_fredholm(x: i64, t: f64, params: &RateParams, series: &SeriesSpec) -> Result<SeriesValue> {
    if params.tau() == 0.0 {
        return Err(domain("cdf_via_fredholm needs tau > 0"));
    }
    let mut s = *series;
    s.engine = Engine::Nystrom;
    StepSeries::new(*params, s)?.eval(StepKind::Cdf, x, t)
}

/// Relative residual of
/// `det(1/(p + q xi_i xi_j - xi_i)) = (-1)^k (pq)^{k(k-1)/2} prod_{i!=j} pair(xi_i, xi_j) prod_i 1/((1-xi_i)(q xi_i - p))`.
pub fn tw2_identity_residual<T: Real>(xi: &[Complex<T>], params: &RateParams) -> Result<f64> {
    let k = xi.len();
    if k == 0 {
        return Err(domain("tw2 identity needs k >= 1"));
    }
    let one = Complex::new(T::one(), T::zero());
    let mut m = Vec::with_capacity(k * k);
    for &a in xi {
        for &b in xi {
            m.push(one / pair_denominator(a, b, params)?);
        }
    }
    let lhs = det(&m, k);
    let ki = k as i64;
    let pq = params.p_in::<T>() * params.q_in::<T>();
    let mut rhs = Complex::new(powi(pq, ki * (ki - 1) / 2), T::zero());
    if k % 2 == 1 {
        rhs = -rhs;
    }
    for (i, &a) in xi.iter().enumerate() {
        for (j, &b) in xi.iter().enumerate() {
            if i != j {
                rhs = rhs * pair_factor(a, b, params)?;
            }
        }
        rhs = rhs * crate::contour::linear_factor(a, params)?;
    }
    let scale = cabs(lhs).max(cabs(rhs));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let r = cabs(lhs - rhs) / scale;
    if !r.is_finite() {
        return Err(Error::Overflow("tw2 residual is not finite".into()));
    }
    Ok(r)
}

//! Trapezoidal quadrature on the circle `|xi| = R` and the scalar pieces
//! shared by all integrands.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex;
use num_traits::Float;

use crate::error::{config, domain, Error, Result};
use crate::qcalc::RateParams;
use crate::real::{cabs, cexp, root_of_unity, Real};

/// Denominators below this magnitude are treated as a pole hit.
pub const POLE_GUARD: f64 = 1e-13;
pub const DEFAULT_NODES: usize = 48;
pub const MAX_NODES: usize = 512;

/// Radius and node count of the discretized contour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    radius: f64,
    nodes: usize,
}

impl ContourSpec {
    pub fn new(radius: f64, nodes: usize, params: &RateParams) -> Result<Self> {
        if !radius.is_finite() || radius <= 1.0 {
            return Err(config(format!("R > 1 violated: R = {radius}")));
        }
        let (p, q) = (params.p(), params.q());
        let margin = q * radius * radius - radius - p;
        if margin <= 0.0 {
            return Err(config(format!(
                "q*R^2 - R - p > 0 violated: R = {radius}, p = {p} gives {margin:e}"
            )));
        }
        if nodes < 8 {
            return Err(config(format!("M >= 8 violated: M = {nodes}")));
        }
        if nodes % 2 != 0 {
            return Err(config(format!("M even violated: M = {nodes}")));
        }
        Ok(Self { radius, nodes })
    }

    /// Default radius for these rates with `DEFAULT_NODES` nodes.
    pub fn default_for(params: &RateParams) -> Self {
        Self { radius: default_radius(params), nodes: DEFAULT_NODES }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn with_nodes(&self, nodes: usize, params: &RateParams) -> Result<Self> {
        Self::new(self.radius, nodes, params)
    }

    pub fn make_nodes<T: Real>(&self) -> QuadNodes<T> {
        QuadNodes::circle_unchecked(self.radius, self.nodes)
    }
}

/// `R = max(2, r)` where `r` solves `0.6 q r^2 = r + p`; equals 2 for small
/// `p` and grows so that `q R^2 - R - p` keeps a margin as `p -> 1/2`.
pub fn default_radius(params: &RateParams) -> f64 {
    let (p, q) = (params.p(), params.q());
    let r = (1.0 + Float::sqrt(1.0 + 2.4 * p * q)) / (1.2 * q);
    if r > 2.0 {
        r
    } else {
        2.0
    }
}

/// Validate and discretize in one step.
pub fn make_nodes<T: Real>(radius: f64, nodes: usize, params: &RateParams) -> Result<QuadNodes<T>> {
    Ok(ContourSpec::new(radius, nodes, params)?.make_nodes())
}

/// Equispaced nodes `xi_j = R e^{2 pi i j/M}` with weights `xi_j / M`, so
/// that `sum_j w_j f(xi_j)` approximates `(1/2 pi i) \oint f`.
#[derive(Clone, Debug)]
pub struct QuadNodes<T> {
    radius: f64,
    pub nodes: Vec<Complex<T>>,
    pub weights: Vec<Complex<T>>,
}

impl<T: Real> QuadNodes<T> {
    /// Raw discretization without the admissibility policy of
    /// [`ContourSpec`]; only `R > 0` and `M >= 1` are required.
    pub fn circle(radius: f64, m: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(config(format!("R > 0 violated: R = {radius}")));
        }
        if m == 0 {
            return Err(config("M >= 1 violated: M = 0"));
        }
        Ok(Self::circle_unchecked(radius, m))
    }

    fn circle_unchecked(radius: f64, m: usize) -> Self {
        let r = T::of(radius);
        let inv_m = T::one() / T::of_int(m as i64);
        let nodes: Vec<Complex<T>> =
            (0..m).map(|j| root_of_unity::<T>(j as i64, m) * r).collect();
        let weights = nodes.iter().map(|z| *z * inv_m).collect();
        Self { radius, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `sum_j w_j f(xi_j)`.
    pub fn integrate<F: Fn(Complex<T>) -> Complex<T>>(&self, f: F) -> Complex<T> {
        crate::sum::csum(self.nodes.iter().zip(&self.weights).map(|(z, w)| f(*z) * *w))
    }
}

/// `eps(xi) = p/xi + q xi - 1`.
pub fn epsilon<T: Real>(xi: Complex<T>, params: &RateParams) -> Result<Complex<T>> {
    if xi.re == T::zero() && xi.im == T::zero() {
        return Err(domain("epsilon is undefined at xi = 0"));
    }
    Ok(eps_unchecked(xi, params))
}

pub(crate) fn eps_unchecked<T: Real>(xi: Complex<T>, params: &RateParams) -> Complex<T> {
    let p = params.p_in::<T>();
    let q = params.q_in::<T>();
    let one = Complex::new(T::one(), T::zero());
    (one * p) / xi + xi * q - one
}

/// `p + q xi_i xi_j - xi_i`, guarded against pole hits.
pub fn pair_denominator<T: Real>(
    xi_i: Complex<T>,
    xi_j: Complex<T>,
    params: &RateParams,
) -> Result<Complex<T>> {
    let p = params.p_in::<T>();
    let q = params.q_in::<T>();
    let d = xi_i * xi_j * q - xi_i + p;
    let mag = cabs(d);
    if !(mag >= POLE_GUARD) {
        return Err(Error::Singular { what: "pairwise p + q xi xi' - xi", magnitude: mag });
    }
    Ok(d)
}

/// `(xi_j - xi_i) / (p + q xi_i xi_j - xi_i)`.
pub fn pair_factor<T: Real>(
    xi_i: Complex<T>,
    xi_j: Complex<T>,
    params: &RateParams,
) -> Result<Complex<T>> {
    Ok((xi_j - xi_i) / pair_denominator(xi_i, xi_j, params)?)
}

/// `1 / ((1 - xi)(q xi - p))`.
pub fn linear_factor<T: Real>(xi: Complex<T>, params: &RateParams) -> Result<Complex<T>> {
    let p = params.p_in::<T>();
    let q = params.q_in::<T>();
    let one = Complex::new(T::one(), T::zero());
    let d = (one - xi) * (xi * q - p);
    let mag = cabs(d);
    if !(mag >= POLE_GUARD) {
        return Err(Error::Singular { what: "(1 - xi)(q xi - p)", magnitude: mag });
    }
    Ok(one / d)
}

/// Per-node quantities for fixed rates and time, shared by the integrands.
#[derive(Clone, Debug)]
pub struct NodeTable<T> {
    pub xi: Vec<Complex<T>>,
    pub w: Vec<Complex<T>>,
    /// `e^{eps(xi) t}`.
    pub growth: Vec<Complex<T>>,
    /// `1 / ((1 - xi)(q xi - p))`.
    pub linear: Vec<Complex<T>>,
    /// `inv_den[a * m + b] = 1 / (p + q xi_a xi_b - xi_a)`.
    pub inv_den: Vec<Complex<T>>,
}

impl<T: Real> NodeTable<T> {
    pub fn new(nodes: &QuadNodes<T>, params: &RateParams, t: f64) -> Result<Self> {
        let m = nodes.len();
        let tt = T::of(t);
        let mut growth = Vec::with_capacity(m);
        let mut linear = Vec::with_capacity(m);
        for &z in &nodes.nodes {
            growth.push(cexp(epsilon(z, params)? * tt));
            linear.push(linear_factor(z, params)?);
        }
        let one = Complex::new(T::one(), T::zero());
        let mut inv_den = Vec::with_capacity(m * m);
        for &a in &nodes.nodes {
            for &b in &nodes.nodes {
                inv_den.push(one / pair_denominator(a, b, params)?);
            }
        }
        Ok(Self { xi: nodes.nodes.clone(), w: nodes.weights.clone(), growth, linear, inv_den })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Pair factor between node `a` (earlier variable) and node `b`.
    pub fn pair(&self, a: usize, b: usize) -> Complex<T> {
        (self.xi[b] - self.xi[a]) * self.inv_den[a * self.xi.len() + b]
    }
}

/// Outcome of automatic node doubling.
#[derive(Clone, Debug)]
pub struct Refined<V> {
    pub value: V,
    pub nodes: usize,
    pub change: f64,
    pub converged: bool,
}

/// Evaluate at `M, 2M, ...` until two successive values are within `tol`
/// (measured by `dist`) or `MAX_NODES` is reached. The finer value is kept.
pub fn refine_nodes<V, F, D>(
    spec: &ContourSpec,
    params: &RateParams,
    tol: f64,
    mut eval: F,
    dist: D,
) -> Result<Refined<V>>
where
    F: FnMut(&ContourSpec) -> Result<V>,
    D: Fn(&V, &V) -> f64,
{
    let mut cur = *spec;
    let mut value = eval(&cur)?;
    let mut change = f64::INFINITY;
    while cur.nodes() * 2 <= MAX_NODES {
        let next = cur.with_nodes(cur.nodes() * 2, params)?;
        let v2 = eval(&next)?;
        change = dist(&value, &v2);
        value = v2;
        cur = next;
        if change <= tol {
            return Ok(Refined { value, nodes: cur.nodes(), change, converged: true });
        }
    }
    Ok(Refined { value, nodes: cur.nodes(), change, converged: false })
}

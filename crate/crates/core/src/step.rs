//! Step initial condition: all sites `1, 2, ...` hold first-class particles
//! and the second-class particle starts at 0.
//!
//! Three engines evaluate the k-series. `Graded` (default) reads every term
//! from determinants of a finite matrix in double-double; `Nested` integrates
//! each k-fold term on the contour directly; `Nystrom` extracts terms from the
//! discretized kernel. Each k-th term is summed with an extra `(-1)^k`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::contour::{ContourSpec, NodeTable, QuadNodes};
use crate::error::{config, domain, Error, Result};
use crate::exec::{Executor, Serial};
use crate::fredholm;
use crate::graded::{GradedOptions, GradedTable, HSource};
use crate::qcalc::{q_pochhammer, RateParams};
use crate::real::{cabs, cpowi, powi, Dd, Real};
use crate::sum::{CNeumaier, Neumaier};

/// Largest order accepted by the nested engine.
pub const NESTED_K_MAX: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Graded,
    Nested,
    Nystrom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F64,
    Dd,
}

/// Which integrand family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// `P(eta_t(x) = 1)`.
    Occupation,
    /// `P(X(t) = x)`.
    Pmf,
    /// `P(X(t) <= x)`.
    Cdf,
    /// `P(X(t) <= x)` at `p = 0`.
    Tasep,
}

/// Truncation and discretization of the k-series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesSpec {
    pub k_max: usize,
    pub term_tol: f64,
    pub contour: ContourSpec,
    pub engine: Engine,
    pub precision: Precision,
    /// Graded engine only: take the matrix entries from quadrature on
    /// `contour` instead of from Laurent coefficients.
    pub contour_entries: bool,
}

impl SeriesSpec {
    pub fn graded(params: &RateParams) -> Self {
        Self {
            k_max: 200,
            term_tol: 1e-15,
            contour: ContourSpec::default_for(params),
            engine: Engine::Graded,
            precision: Precision::Dd,
            contour_entries: false,
        }
    }

    pub fn nested(params: &RateParams, k_max: usize) -> Self {
        Self {
            k_max,
            term_tol: 1e-12,
            contour: ContourSpec::default_for(params),
            engine: Engine::Nested,
            precision: Precision::F64,
            contour_entries: false,
        }
    }

    pub fn nystrom(params: &RateParams) -> Self {
        Self {
            k_max: 8,
            term_tol: 1e-12,
            contour: ContourSpec::default_for(params),
            engine: Engine::Nystrom,
            precision: Precision::Dd,
            contour_entries: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(config("k_max >= 1 violated"));
        }
        if !(self.term_tol > 0.0) {
            return Err(config(format!("term_tol > 0 violated: {}", self.term_tol)));
        }
        if self.engine == Engine::Nested && self.k_max > NESTED_K_MAX {
            return Err(config(format!(
                "k_max <= {NESTED_K_MAX} violated for the nested engine: k_max = {}",
                self.k_max
            )));
        }
        if self.engine == Engine::Nystrom && self.k_max > self.contour.nodes() {
            return Err(config("k_max <= M violated for the Nystrom engine"));
        }
        Ok(())
    }
}

/// A truncated series value.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Signed contribution of each order `k = 1, 2, ...`.
    pub terms: Vec<f64>,
    pub converged: bool,
    /// `2 |last term|`.
    pub tail: f64,
    /// Quadrature nodes (contour engines) or matrix size (graded).
    pub resolution: usize,
}

/// Running truncation: stop once two consecutive terms are below `tol`,
/// after the largest term and not before `min_k`.
#[derive(Clone, Debug)]
struct Truncation {
    tol: f64,
    min_k: usize,
    peak: (usize, f64),
    small_run: usize,
}

impl Truncation {
    fn new(tol: f64, min_k: usize) -> Self {
        Self { tol, min_k, peak: (0, 0.0), small_run: 0 }
    }

    fn push(&mut self, k: usize, term: f64) -> bool {
        let a = term.abs();
        if a > self.peak.1 {
            self.peak = (k, a);
        }
        if a < self.tol {
            self.small_run += 1;
        } else {
            self.small_run = 0;
        }
        self.small_run >= 2 && k > self.peak.0 && k >= self.min_k
    }
}

fn ordered_pairs<T: Real>(xi: &[Complex<T>], params: &RateParams) -> Result<Complex<T>> {
    let mut acc = Complex::new(T::one(), T::zero());
    for (i, &a) in xi.iter().enumerate() {
        for (j, &b) in xi.iter().enumerate() {
            if i != j {
                acc = acc * crate::contour::pair_factor(a, b, params)?;
            }
        }
    }
    Ok(acc)
}

fn single_factors<T: Real>(
    shift: i64,
    xi: &[Complex<T>],
    growth: &[Complex<T>],
    params: &RateParams,
) -> Result<Complex<T>> {
    let mut acc = Complex::new(T::one(), T::zero());
    for (&z, &g) in xi.iter().zip(growth) {
        acc = acc * cpowi(z, shift) * g * crate::contour::linear_factor(z, params)?;
    }
    Ok(acc)
}

fn product<T: Real>(xi: &[Complex<T>]) -> Complex<T> {
    xi.iter().fold(Complex::new(T::one(), T::zero()), |a, &z| a * z)
}

fn check_lengths<T>(xi: &[Complex<T>], growth: &[Complex<T>]) -> Result<()> {
    if xi.len() != growth.len() || xi.is_empty() {
        return Err(domain("xi and growth must have the same nonzero length"));
    }
    Ok(())
}

/// `J~_k(x, xi)`; `growth[i] = e^{eps(xi_i) t}`.
pub fn integrand_jtilde<T: Real>(
    x: i64,
    xi: &[Complex<T>],
    growth: &[Complex<T>],
    params: &RateParams,
) -> Result<Complex<T>> {
    check_lengths(xi, growth)?;
    let one = Complex::new(T::one(), T::zero());
    Ok(ordered_pairs(xi, params)? * (one - product(xi)) * single_factors(x - 1, xi, growth, params)?)
}

/// `J=_k(x, xi)`, carrying `(1 - prod xi)^2`.
pub fn integrand_j2<T: Real>(
    x: i64,
    xi: &[Complex<T>],
    growth: &[Complex<T>],
    params: &RateParams,
) -> Result<Complex<T>> {
    check_lengths(xi, growth)?;
    let one = Complex::new(T::one(), T::zero());
    let d = one - product(xi);
    Ok(ordered_pairs(xi, params)? * d * d * single_factors(x - 1, xi, growth, params)?)
}

/// `J_k(x, xi)`, carrying `(prod xi - 1)` and `xi^x`.
pub fn integrand_j<T: Real>(
    x: i64,
    xi: &[Complex<T>],
    growth: &[Complex<T>],
    params: &RateParams,
) -> Result<Complex<T>> {
    check_lengths(xi, growth)?;
    let one = Complex::new(T::one(), T::zero());
    Ok(ordered_pairs(xi, params)? * (product(xi) - one) * single_factors(x, xi, growth, params)?)
}

/// `J_k` at `p = 0`; `growth[i] = e^{(xi_i - 1) t}`.
pub fn integrand_tasep<T: Real>(x: i64, xi: &[Complex<T>], growth: &[Complex<T>]) -> Result<Complex<T>> {
    check_lengths(xi, growth)?;
    let k = xi.len() as i64;
    let one = Complex::new(T::one(), T::zero());
    let mut acc = product(xi) - one;
    for (i, &a) in xi.iter().enumerate() {
        for (j, &b) in xi.iter().enumerate() {
            if i != j {
                acc = acc * (b - a);
            }
        }
    }
    for (&z, &g) in xi.iter().zip(growth) {
        let d = z * (one - z);
        let mag = cabs(d);
        if !(mag >= crate::contour::POLE_GUARD) {
            return Err(Error::Singular { what: "xi (1 - xi)", magnitude: mag });
        }
        acc = acc * cpowi(z, x) * g / cpowi(d, k);
    }
    Ok(acc)
}

/// How `kfold_integral` may use permutation symmetry of the integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// Sum every node tuple.
    None,
    /// Sum non-decreasing tuples with their multinomial multiplicity.
    Symmetric,
}

/// `sum over node tuples of f(xi) prod w`.
pub fn kfold_integral<T: Real, F>(f: F, k: usize, nodes: &QuadNodes<T>, symmetry: Symmetry) -> Result<Complex<T>>
where
    F: Fn(&[Complex<T>]) -> Result<Complex<T>>,
{
    if k == 0 {
        return Err(domain("kfold_integral needs k >= 1"));
    }
    let m = nodes.len();
    let mut idx = vec![0usize; k];
    let mut xi = vec![nodes.nodes[0]; k];
    let mut acc = CNeumaier::new();
    let fact: Vec<f64> = (0..=k).scan(1.0, |s, i| {
        if i > 0 {
            *s *= i as f64;
        }
        Some(*s)
    }).collect();
    loop {
        let mut w = Complex::new(T::one(), T::zero());
        for (d, &a) in idx.iter().enumerate() {
            xi[d] = nodes.nodes[a];
            w = w * nodes.weights[a];
        }
        let mut v = f(&xi)? * w;
        if symmetry == Symmetry::Symmetric {
            let mut mult = fact[k];
            let mut run = 1;
            for d in 1..=k {
                if d < k && idx[d] == idx[d - 1] {
                    run += 1;
                } else {
                    mult /= fact[run];
                    run = 1;
                }
            }
            v = v * T::of(mult);
        }
        acc.add(v);
        // next tuple
        let mut d = k;
        loop {
            if d == 0 {
                let s = acc.value();
                if !(s.re.is_finite() && s.im.is_finite()) {
                    return Err(Error::Overflow("k-fold sum is not finite".into()));
                }
                return Ok(s);
            }
            d -= 1;
            if idx[d] + 1 < m {
                idx[d] += 1;
                let start = if symmetry == Symmetry::Symmetric { idx[d] } else { 0 };
                for e in d + 1..k {
                    idx[e] = start;
                }
                break;
            }
        }
    }
}

/// `sum over all node tuples of J(kind)_k(x, xi) prod w`, evaluated over
/// strictly increasing tuples (ties vanish) with multiplicity `k!`. Node
/// factors are divided by `R^x` and the scale restored in log form at the end.
pub fn nested_integral<T: Real, E: Executor>(
    kind: StepKind,
    x: i64,
    k: usize,
    table: &NodeTable<T>,
    exec: &E,
) -> Result<Complex<T>> {
    if k == 0 {
        return Err(domain("k >= 1 required"));
    }
    let m = table.len();
    let one = Complex::new(T::one(), T::zero());
    let shift = match kind {
        StepKind::Occupation | StepKind::Pmf => x - 1,
        StepKind::Cdf | StepKind::Tasep => x,
    };
    let r = T::of(cabs(table.xi[0]));
    let log_scale = (k as f64) * (shift as f64) * num_traits::Float::ln(cabs(table.xi[0]));
    let norm = powi(r, -shift);
    let base: Vec<Complex<T>> = (0..m)
        .map(|a| {
            let z = table.xi[a];
            let lin = match kind {
                StepKind::Tasep => one / cpowi(z * (one - z), k as i64),
                _ => table.linear[a],
            };
            table.w[a] * cpowi(z, shift) * table.growth[a] * lin * norm
        })
        .collect();
    let pair = |a: usize, b: usize| -> Complex<T> {
        match kind {
            StepKind::Tasep => {
                let d = table.xi[b] - table.xi[a];
                -(d * d)
            }
            _ => table.pair(a, b) * table.pair(b, a),
        }
    };
    let finish = |prod: Complex<T>| -> Complex<T> {
        match kind {
            StepKind::Occupation => one - prod,
            StepKind::Pmf => (one - prod) * (one - prod),
            StepKind::Cdf | StepKind::Tasep => prod - one,
        }
    };
    let parts = exec.map(m, |a0| {
        let mut idx = vec![0usize; k];
        idx[0] = a0;
        let mut acc = CNeumaier::new();
        walk(&base, &pair, &finish, table, &mut idx, 1, base[a0], table.xi[a0], &mut acc);
        acc.value()
    });
    let mut total = CNeumaier::new();
    for v in parts {
        total.add(v);
    }
    let kfact: f64 = (1..=k).map(|i| i as f64).product();
    let scale = num_traits::Float::exp(log_scale);
    if !scale.is_finite() {
        return Err(Error::Overflow(format!("scale e^{log_scale:.1} of the k-fold integral overflows")));
    }
    let v = total.value() * T::of(kfact) * T::of(scale);
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Overflow("k-fold integral is not finite".into()));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn walk<T: Real, P, F>(
    base: &[Complex<T>],
    pair: &P,
    finish: &F,
    table: &NodeTable<T>,
    idx: &mut [usize],
    depth: usize,
    val: Complex<T>,
    prod: Complex<T>,
    acc: &mut CNeumaier<T>,
) where
    P: Fn(usize, usize) -> Complex<T>,
    F: Fn(Complex<T>) -> Complex<T>,
{
    let k = idx.len();
    if depth == k {
        acc.add(val * finish(prod));
        return;
    }
    for b in idx[depth - 1] + 1..base.len() {
        let mut v = val * base[b];
        for &a in &idx[..depth] {
            v = v * pair(a, b);
        }
        idx[depth] = b;
        walk(base, pair, finish, table, idx, depth + 1, v, prod * table.xi[b], acc);
    }
}

/// `q^{k^2}/k! prod_{j<k}(1 - tau^j)`, or `1/k!` at `p = 0`.
pub fn term_prefactor(k: usize, params: &RateParams) -> Result<f64> {
    let kf: f64 = (1..=k).map(|i| i as f64).product();
    let ki = k as i64;
    Ok(powi(params.q(), ki * ki) / kf * q_pochhammer(ki, params.tau())?)
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Evaluator for the step-initial series.
pub struct StepSeries<E = Serial> {
    params: RateParams,
    spec: SeriesSpec,
    exec: E,
}

impl StepSeries<Serial> {
    pub fn new(params: RateParams, spec: SeriesSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { params, spec, exec: Serial })
    }
}

impl<E: Executor> StepSeries<E> {
    pub fn with_executor<F: Executor>(self, exec: F) -> StepSeries<F> {
        StepSeries { params: self.params, spec: self.spec, exec }
    }

    pub fn params(&self) -> &RateParams {
        &self.params
    }

    pub fn spec(&self) -> &SeriesSpec {
        &self.spec
    }

    fn graded_options(&self) -> GradedOptions {
        GradedOptions {
            source: if self.spec.contour_entries {
                HSource::Contour(self.spec.contour)
            } else {
                HSource::Series
            },
            extra_size: 0,
            k_max: self.spec.k_max,
            term_tol: self.spec.term_tol,
        }
    }

    fn effective_params(&self, kind: StepKind) -> RateParams {
        if kind == StepKind::Tasep {
            RateParams::tasep()
        } else {
            self.params
        }
    }

    /// One value of the chosen series.
    pub fn eval(&self, kind: StepKind, x: i64, t: f64) -> Result<SeriesValue> {
        check_time(t)?;
        match self.spec.engine {
            Engine::Graded => {
                let mut tab = self.graded_table(kind, t, x)?;
                graded_value(&mut tab, kind, x)
            }
            Engine::Nested => match self.spec.precision {
                Precision::F64 => self.nested_series::<f64>(kind, x, t),
                Precision::Dd => self.nested_series::<Dd>(kind, x, t),
            },
            Engine::Nystrom => {
                if kind == StepKind::Occupation {
                    return Err(config("the Nystrom engine covers the CDF and PMF only"));
                }
                match self.spec.precision {
                    Precision::F64 => self.nystrom_series::<f64>(kind, x, t),
                    Precision::Dd => self.nystrom_series::<Dd>(kind, x, t),
                }
            }
        }
    }

    fn graded_table(&self, kind: StepKind, t: f64, xmax: i64) -> Result<GradedTable<'_, E>> {
        if kind == StepKind::Occupation {
            return Err(config("the graded engine covers the CDF and PMF only"));
        }
        GradedTable::new(self.effective_params(kind), t, xmax, self.graded_options(), &self.exec)
    }

    fn nested_series<T: Real>(&self, kind: StepKind, x: i64, t: f64) -> Result<SeriesValue> {
        let params = self.effective_params(kind);
        let nodes: QuadNodes<T> = self.spec.contour.make_nodes();
        let table = NodeTable::new(&nodes, &params, t)?;
        let mut trunc = Truncation::new(self.spec.term_tol, min_order(x));
        let mut terms = Vec::new();
        let mut sum = Neumaier::new();
        let mut converged = false;
        for k in 1..=self.spec.k_max {
            let raw = nested_integral(kind, x, k, &table, &self.exec)?;
            let term = sign(k) * term_prefactor(k, &params)? * raw.re.val();
            terms.push(term);
            sum.add(term);
            if trunc.push(k, term) {
                converged = true;
                break;
            }
        }
        Ok(finish_value(sum.value(), terms, converged, self.spec.contour.nodes()))
    }

    fn nystrom_series<T: Real>(&self, kind: StepKind, x: i64, t: f64) -> Result<SeriesValue> {
        if self.params.tau() == 0.0 || kind == StepKind::Tasep {
            return Err(domain("the Nystrom engine needs tau > 0"));
        }
        let nodes: QuadNodes<T> = self.spec.contour.make_nodes();
        let kmax = self.spec.k_max;
        let coeffs = |y: i64| -> Result<Vec<Complex<T>>> {
            let a = fredholm::build_matrix(y, t, &self.params, &nodes)?;
            Ok(fredholm::det_coefficients(&a, kmax)?.c)
        };
        let c1 = coeffs(x + 1)?;
        let c0 = coeffs(x)?;
        let cm = if kind == StepKind::Pmf { Some(coeffs(x - 1)?) } else { None };
        let mut trunc = Truncation::new(self.spec.term_tol, min_order(x));
        let mut terms = Vec::new();
        let mut sum = Neumaier::new();
        let mut converged = false;
        for k in 1..=kmax {
            let diff = match &cm {
                Some(cm) => c1[k] - c0[k] * T::of(2.0) + cm[k],
                None => c1[k] - c0[k],
            };
            let term = sign(k) * fredholm::coefficient_prefactor::<T>(k, &self.params)?.val() * diff.re.val();
            terms.push(term);
            sum.add(term);
            if trunc.push(k, term) {
                converged = true;
                break;
            }
        }
        Ok(finish_value(sum.value(), terms, converged, self.spec.contour.nodes()))
    }

    /// Values on `xmin..=xmax`.
    pub fn table(&self, kind: StepKind, xmin: i64, xmax: i64, t: f64) -> Result<DistTable> {
        check_time(t)?;
        if xmin > xmax {
            return Err(domain("empty x-window"));
        }
        let mut entries = Vec::new();
        let mut extra = None;
        let cdf_like = matches!(kind, StepKind::Cdf | StepKind::Tasep);
        match self.spec.engine {
            Engine::Graded => {
                let mut tab = self.graded_table(kind, t, xmax)?;
                for x in xmin..=xmax {
                    entries.push((x, graded_value(&mut tab, kind, x)?));
                }
                if cdf_like {
                    extra = Some(graded_value(&mut tab, kind, xmin - 1)?.value);
                }
            }
            _ => {
                for x in xmin..=xmax {
                    entries.push((x, self.eval(kind, x, t)?));
                }
                if cdf_like {
                    extra = Some(self.eval(kind, xmin - 1, t)?.value);
                }
            }
        }
        Ok(DistTable::new(kind, t, self.effective_params(kind), entries, extra, &self.spec))
    }
}

fn graded_value<E: Executor>(tab: &mut GradedTable<'_, E>, kind: StepKind, x: i64) -> Result<SeriesValue> {
    let v = tab.eval(x, kind == StepKind::Pmf)?;
    Ok(SeriesValue { value: v.value, terms: v.terms, converged: v.converged, tail: v.tail, resolution: v.size })
}

/// Terms peak near `k = x + 1`, so truncation is not trusted before `x + 3`.
fn min_order(x: i64) -> usize {
    (x + 3).max(2) as usize
}

fn finish_value(value: f64, terms: Vec<f64>, converged: bool, resolution: usize) -> SeriesValue {
    let tail = 2.0 * terms.last().map(|v| v.abs()).unwrap_or(0.0);
    SeriesValue { value, terms, converged, tail, resolution }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Probabilities on a window of sites with convergence diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DistTable {
    pub kind: StepKind,
    pub t: f64,
    pub params: RateParams,
    pub engine: Engine,
    pub entries: Vec<(i64, SeriesValue)>,
    /// Largest tail estimate over the window.
    pub tail: f64,
    /// PMF: `|1 - sum|`. CDF: `|1 - F(x_max)| + |F(x_min - 1)|`.
    pub mass_defect: f64,
    /// `term_tol` plus the largest tail estimate.
    pub tol: f64,
    pub converged: bool,
}

impl DistTable {
    fn new(
        kind: StepKind,
        t: f64,
        params: RateParams,
        entries: Vec<(i64, SeriesValue)>,
        before: Option<f64>,
        spec: &SeriesSpec,
    ) -> Self {
        let tail = entries.iter().map(|(_, v)| v.tail).fold(0.0, f64::max);
        let converged = entries.iter().all(|(_, v)| v.converged);
        let mass_defect = match kind {
            StepKind::Cdf | StepKind::Tasep => {
                let last = entries.last().map(|(_, v)| v.value).unwrap_or(0.0);
                (1.0 - last).abs() + before.unwrap_or(0.0).abs()
            }
            _ => {
                let mut s = Neumaier::new();
                for (_, v) in &entries {
                    s.add(v.value);
                }
                (1.0 - s.value()).abs()
            }
        };
        Self { kind, t, params, engine: spec.engine, entries, tail, mass_defect, tol: spec.term_tol + tail, converged }
    }

    pub fn xs(&self) -> Vec<i64> {
        self.entries.iter().map(|(x, _)| *x).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| v.value).collect()
    }

    pub fn get(&self, x: i64) -> Option<f64> {
        self.entries.iter().find(|(y, _)| *y == x).map(|(_, v)| v.value)
    }

    /// Largest decrease between neighbouring CDF values (0 when monotone).
    pub fn monotonicity_violation(&self) -> f64 {
        self.entries.windows(2).map(|w| (w[0].1.value - w[1].1.value).max(0.0)).fold(0.0, f64::max)
    }
}

pub fn pmf_step(x: i64, t: f64, params: &RateParams, series: &SeriesSpec) -> Result<SeriesValue> {
    StepSeries::new(*params, *series)?.eval(StepKind::Pmf, x, t)
}

pub fn cdf_step(x: i64, t: f64, params: &RateParams, series: &SeriesSpec) -> Result<SeriesValue> {
    StepSeries::new(*params, *series)?.eval(StepKind::Cdf, x, t)
}

pub fn occupation_step(x: i64, t: f64, params: &RateParams, series: &SeriesSpec) -> Result<SeriesValue> {
    StepSeries::new(*params, *series)?.eval(StepKind::Occupation, x, t)
}

/// The `p = 0` CDF; the rates in `series.contour` are ignored beyond the
/// radius and node count.
pub fn cdf_tasep(x: i64, t: f64, series: &SeriesSpec) -> Result<SeriesValue> {
    StepSeries::new(RateParams::tasep(), *series)?.eval(StepKind::Tasep, x, t)
}

/// Raw k-th term of the CDF series before the `(-1)^k`:
/// `q^{k^2}/k! prod(1 - tau^j) sum J_k prod w`.
pub fn cdf_term_nested<T: Real>(x: i64, k: usize, t: f64, params: &RateParams, nodes: &QuadNodes<T>) -> Result<Complex<T>> {
    let table = NodeTable::new(nodes, params, t)?;
    let raw = nested_integral(StepKind::Cdf, x, k, &table, &Serial)?;
    let kf = T::of((1..=k).map(|i| i as f64).product());
    let ki = k as i64;
    let pre = powi(params.q_in::<T>(), ki * ki) / kf * q_pochhammer(ki, params.tau_in::<T>())?;
    Ok(raw * pre)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn p03() -> RateParams {
        RateParams::new(0.3).unwrap()
    }

    fn growth(xi: &[Complex<f64>], params: &RateParams, t: f64) -> Vec<Complex<f64>> {
        xi.iter().map(|&z| (crate::contour::epsilon(z, params).unwrap() * t).exp()).collect()
    }

    #[test]
    fn k1_reductions() {
        let p = p03();
        let z = [c(1.7, 0.9)];
        let g = growth(&z, &p, 0.6);
        let v = integrand_jtilde(2, &z, &g, &p).unwrap();
        let want = z[0].powi(1) * g[0] / (z[0] * p.q() - p.p());
        assert!((v - want).norm() < 1e-13 * want.norm());
        let z2 = [c(1.7, 0.9), c(1.7, 0.9)];
        let g2 = growth(&z2, &p, 0.6);
        assert_eq!(integrand_jtilde(2, &z2, &g2, &p).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn j2_is_jtilde_times_one_minus_product() {
        let p = p03();
        let z = [c(2.1, 0.3), c(-1.4, 1.9), c(0.2, -2.5)];
        let g = growth(&z, &p, 0.4);
        let prod = z[0] * z[1] * z[2];
        let a = integrand_j2(1, &z, &g, &p).unwrap();
        let b = integrand_jtilde(1, &z, &g, &p).unwrap() * (c(1.0, 0.0) - prod);
        assert!((a - b).norm() < 1e-14 * a.norm());
    }

    #[test]
    fn k1_x0_t0_integral() {
        let p = p03();
        let nodes: QuadNodes<f64> = ContourSpec::default_for(&p).make_nodes();
        let v = kfold_integral(
            |z| integrand_j(0, z, &[c(1.0, 0.0)], &p),
            1,
            &nodes,
            Symmetry::None,
        )
        .unwrap();
        assert!((v - c(-1.0 / p.q(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn kfold_examples() {
        let p = p03();
        let nodes: QuadNodes<f64> = ContourSpec::new(2.0, 16, &p).unwrap().make_nodes();
        let one = kfold_integral(|z| Ok(z[0].inv()), 1, &nodes, Symmetry::None).unwrap();
        assert!((one - c(1.0, 0.0)).norm() < 1e-15);
        for sym in [Symmetry::None, Symmetry::Symmetric] {
            let two = kfold_integral(|z| Ok((z[0] * z[1]).inv()), 2, &nodes, sym).unwrap();
            assert!((two - c(1.0, 0.0)).norm() < 1e-14);
        }
        let anti = kfold_integral(|z| Ok((z[0] - z[1]) * z[0].powi(-3)), 2, &nodes, Symmetry::None).unwrap();
        assert!(anti.norm() < 1e-14);
    }

    #[test]
    fn nested_matches_generic_kfold() {
        let p = p03();
        let spec = ContourSpec::new(2.5, 12, &p).unwrap();
        let nodes: QuadNodes<f64> = spec.make_nodes();
        let t = 0.3;
        let table = NodeTable::new(&nodes, &p, t).unwrap();
        for kind in [StepKind::Occupation, StepKind::Pmf, StepKind::Cdf] {
            for k in 1..=3 {
                let fast = nested_integral(kind, 1, k, &table, &Serial).unwrap();
                let slow = kfold_integral(
                    |z| {
                        let g = growth(z, &p, t);
                        match kind {
                            StepKind::Occupation => integrand_jtilde(1, z, &g, &p),
                            StepKind::Pmf => integrand_j2(1, z, &g, &p),
                            _ => integrand_j(1, z, &g, &p),
                        }
                    },
                    k,
                    &nodes,
                    Symmetry::Symmetric,
                )
                .unwrap();
                assert!((fast - slow).norm() <= 1e-11 * slow.norm().max(1e-3), "{kind:?} k={k}");
            }
        }
        let tasep = RateParams::tasep();
        let table = NodeTable::new(&nodes, &tasep, t).unwrap();
        for k in 1..=3 {
            let fast = nested_integral(StepKind::Tasep, 0, k, &table, &Serial).unwrap();
            let slow = kfold_integral(
                |z| integrand_tasep(0, z, &growth(z, &tasep, t)),
                k,
                &nodes,
                Symmetry::None,
            )
            .unwrap();
            assert!((fast - slow).norm() <= 1e-11 * slow.norm().max(1e-3), "tasep k={k}");
        }
    }

    #[test]
    fn spec_validation() {
        let p = p03();
        assert!(SeriesSpec::nested(&p, 7).validate().is_err());
        let mut s = SeriesSpec::graded(&p);
        s.term_tol = 0.0;
        assert!(s.validate().is_err());
    }
}

//! Finite initial configurations: per-particle position laws, occupation
//! probabilities and the second-class law obtained from their difference.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::contour::{ContourSpec, NodeTable, QuadNodes, MAX_NODES};
use crate::error::{domain, Result};
use crate::exec::{Executor, Serial};
use crate::qcalc::{q_binomial, q_pochhammer, RateParams};
use crate::real::{cpowi, powi};
use crate::sum::{CNeumaier, Neumaier};

pub const MAX_SITES: usize = 12;
/// Largest imaginary residual accepted before the node count is doubled.
pub const IMAG_TOL: f64 = 1e-9;

/// Initial positions `y_1 < y_2 < ...` of the first-class particles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitialConfig {
    sites: Vec<i64>,
}

impl InitialConfig {
    pub fn new(sites: Vec<i64>) -> Result<Self> {
        if sites.is_empty() {
            return Err(domain("Y must contain at least one site"));
        }
        if sites.len() > MAX_SITES {
            return Err(domain(format!("|Y| <= {MAX_SITES} violated: |Y| = {}", sites.len())));
        }
        if sites[0] < 1 {
            return Err(domain(format!("sites must be >= 1, got {}", sites[0])));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("sites must be strictly increasing"));
        }
        Ok(Self { sites })
    }

    /// `{1, ..., n}`.
    pub fn step(n: usize) -> Result<Self> {
        Self::new((1..=n as i64).collect())
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `{0} ∪ Y`. The result may hold one more site than `MAX_SITES`.
    pub fn with_zero(&self) -> Self {
        let mut sites = Vec::with_capacity(self.sites.len() + 1);
        sites.push(0);
        sites.extend_from_slice(&self.sites);
        Self { sites }
    }
}

/// A subset `S` of `Y` with its rank sum and `tau^sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetTerm {
    pub s: Vec<i64>,
    pub sigma: i64,
    pub weight: f64,
}

/// Number of pairs `(s, y)` with `s` in `S`, `y` in `Y` and `y <= s`.
pub fn sigma(s: &[i64], y: &InitialConfig) -> Result<i64> {
    let mut total = 0;
    for &v in s {
        match y.sites.binary_search(&v) {
            Ok(i) => total += i as i64 + 1,
            Err(_) => return Err(domain(format!("site {v} of S is not in Y"))),
        }
    }
    Ok(total)
}

/// All `k`-subsets of `Y` in lexicographic order.
pub fn subsets(y: &InitialConfig, k: usize, params: &RateParams) -> Vec<SubsetTerm> {
    let n = y.len();
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let s: Vec<i64> = idx.iter().map(|&i| y.sites[i]).collect();
        let sig: i64 = idx.iter().map(|&i| i as i64 + 1).sum();
        out.push(SubsetTerm { s, sigma: sig, weight: powi(params.tau(), sig) });
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `c_{m,k}`; zero when `m > k`.
pub fn c_mk(m: i64, k: i64, params: &RateParams) -> Result<f64> {
    if m < 1 || k < 1 {
        return Err(domain(format!("c_mk needs m, k >= 1, got m = {m}, k = {k}")));
    }
    if params.tau() == 0.0 {
        return Err(domain("c_mk has negative powers of tau; tau = 0 is not allowed"));
    }
    weighted_c_mk(m, k, 0, params)
}

/// `c_{m,k} tau^sigma` with the tau powers merged, which keeps it finite at
/// `tau = 0` whenever the merged exponent is non-negative.
pub fn weighted_c_mk(m: i64, k: i64, sigma: i64, params: &RateParams) -> Result<f64> {
    if m > k {
        return Ok(0.0);
    }
    let tau = params.tau();
    let e = m * (m - 1) / 2 - k * m + sigma;
    if tau == 0.0 && e < 0 {
        return Err(domain("tau = 0 with a negative tau exponent"));
    }
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    Ok(powi(params.q(), k * (k - 1) / 2) * sign * powi(tau, e) * q_binomial(k - 1, k - m, tau))
}

/// Scalar weight of an `S`-integral in the position law of particle `m`.
pub type CoefficientFn = fn(i64, i64, i64, &RateParams) -> Result<f64>;

/// `(-1)^{N+1} prod_{j=1}^{N-1} (q^j - p^j)`.
pub fn leading_coefficient(n: i64, params: &RateParams) -> f64 {
    let mut acc = if n % 2 == 1 { 1.0 } else { -1.0 };
    for j in 1..n {
        acc *= powi(params.q(), j) - powi(params.p(), j);
    }
    acc
}

/// Weight of an `S`-integral in the occupation probability, that is the
/// `m`-sum of the position weights in closed form.
pub fn occupation_prefactor(k: i64, sigma: i64, params: &RateParams) -> Result<f64> {
    let tau = params.tau();
    let e = sigma - k * (k + 1) / 2;
    if e < 0 {
        return Err(domain(format!("sigma = {sigma} is too small for |S| = {k}")));
    }
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    Ok(sign * powi(params.q(), k * (k - 1) / 2) * powi(tau, e) * q_pochhammer(k, tau)?)
}

/// `sum_m coef(m, N, N(N+1)/2)`: the weight of the `S = Y` integral once the
/// position laws are summed over `m`.
pub fn assembled_leading_coefficient(n: i64, params: &RateParams, coef: CoefficientFn) -> Result<f64> {
    let mut acc = Neumaier::new();
    for m in 1..=n {
        acc.add(coef(m, n, n * (n + 1) / 2, params)?);
    }
    Ok(acc.value())
}

/// A real value assembled from subset integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteValue {
    pub value: f64,
    /// Discarded imaginary part.
    pub imag: f64,
    /// `|sum over |S| = k|` for `k = 1, 2, ...`.
    pub per_k: Vec<f64>,
    pub nodes: usize,
}

/// The `|S|`-fold contour integral of every nonempty subset of a
/// configuration, for one `x` and `t`.
#[derive(Clone, Debug)]
pub struct SubsetIntegrals {
    pub terms: Vec<(SubsetTerm, Complex<f64>)>,
    pub nodes: usize,
}

/// Evaluator for finite configurations.
#[derive(Clone, Debug)]
pub struct FiniteSeries<E = Serial> {
    params: RateParams,
    spec: ContourSpec,
    coef: CoefficientFn,
    exec: E,
}

impl FiniteSeries<Serial> {
    pub fn new(params: RateParams, spec: ContourSpec) -> Self {
        Self { params, spec, coef: weighted_c_mk, exec: Serial }
    }
}

impl<E: Executor> FiniteSeries<E> {
    pub fn with_executor<F: Executor>(self, exec: F) -> FiniteSeries<F> {
        FiniteSeries { params: self.params, spec: self.spec, coef: self.coef, exec }
    }

    /// Replace the position weights (used to test the identity checks).
    pub fn with_coefficient(mut self, coef: CoefficientFn) -> Self {
        self.coef = coef;
        self
    }

    pub fn params(&self) -> &RateParams {
        &self.params
    }

    pub fn spec(&self) -> &ContourSpec {
        &self.spec
    }

    pub fn coefficient(&self) -> CoefficientFn {
        self.coef
    }

    /// Subset integrals on an explicit contour.
    pub fn integrals_on(
        &self,
        y: &InitialConfig,
        x: i64,
        t: f64,
        spec: &ContourSpec,
    ) -> Result<SubsetIntegrals> {
        check_time(t)?;
        let nodes: QuadNodes<f64> = spec.make_nodes();
        let table = NodeTable::new(&nodes, &self.params, t)?;
        let m = table.len();
        let one = Complex::new(1.0, 0.0);
        // base[a] = w_a xi_a^{x-1} e^{eps t} / (1 - xi_a)
        let base: Vec<Complex<f64>> = (0..m)
            .map(|a| {
                table.w[a] * cpowi(table.xi[a], x - 1) * table.growth[a] / (one - table.xi[a])
            })
            .collect();
        let inv_xi: Vec<Complex<f64>> = table.xi.iter().map(|z| z.inv()).collect();
        let pair: Vec<Complex<f64>> = (0..m * m).map(|i| table.pair(i / m, i % m)).collect();
        let mut terms = Vec::new();
        for k in 1..=y.len() {
            for sub in subsets(y, k, &self.params) {
                let factors: Vec<Vec<Complex<f64>>> = sub
                    .s
                    .iter()
                    .map(|&s| (0..m).map(|a| base[a] * cpowi(inv_xi[a], s)).collect())
                    .collect();
                let parts = self.exec.map(m, |a0| {
                    if k == 1 {
                        return factors[0][a0] * (one - table.xi[a0]);
                    }
                    let mut prods = vec![Complex::new(0.0, 0.0); k * m];
                    prods[m..2 * m].copy_from_slice(&pair[a0 * m..(a0 + 1) * m]);
                    let mut acc = CNeumaier::new();
                    dfs(&pair, &table.xi, &factors, &mut prods, 1, factors[0][a0], table.xi[a0], &mut acc);
                    acc.value()
                });
                let mut total = CNeumaier::new();
                for v in parts {
                    total.add(v);
                }
                terms.push((sub, total.value()));
            }
        }
        Ok(SubsetIntegrals { terms, nodes: m })
    }

    fn assemble<F>(&self, ints: &SubsetIntegrals, kmax: usize, weight: F) -> Result<FiniteValue>
    where
        F: Fn(&SubsetTerm) -> Result<f64>,
    {
        let mut per_k = vec![CNeumaier::new(); kmax];
        for (sub, v) in &ints.terms {
            let w = weight(sub)?;
            if w != 0.0 {
                per_k[sub.s.len() - 1].add(*v * w);
            }
        }
        let mut total = CNeumaier::new();
        let mut mags = Vec::with_capacity(kmax);
        for s in &per_k {
            let v = s.value();
            mags.push(v.norm());
            total.add(v);
        }
        let z = total.value();
        Ok(FiniteValue { value: z.re, imag: z.im, per_k: mags, nodes: ints.nodes })
    }

    /// Evaluate, doubling the node count while the imaginary residual
    /// exceeds `IMAG_TOL`.
    fn evaluate<F>(&self, y: &InitialConfig, x: i64, t: f64, f: F) -> Result<FiniteValue>
    where
        F: Fn(&SubsetIntegrals) -> Result<FiniteValue>,
    {
        let mut spec = self.spec;
        loop {
            let v = f(&self.integrals_on(y, x, t, &spec)?)?;
            if v.imag.abs() <= IMAG_TOL || spec.nodes() * 2 > MAX_NODES {
                return Ok(v);
            }
            spec = spec.with_nodes(spec.nodes() * 2, &self.params)?;
        }
    }

    /// `P_Y(x_m(t) = x)`.
    pub fn position_pmf(&self, y: &InitialConfig, m: usize, x: i64, t: f64) -> Result<FiniteValue> {
        if m < 1 || m > y.len() {
            return Err(domain(format!("particle index m = {m} outside 1..={}", y.len())));
        }
        self.evaluate(y, x, t, |ints| self.position_from(ints, y.len(), m))
    }

    /// Position laws of all particles from one set of integrals.
    pub fn position_pmfs(&self, y: &InitialConfig, x: i64, t: f64) -> Result<Vec<FiniteValue>> {
        let ints = self.integrals_on(y, x, t, &self.spec)?;
        (1..=y.len()).map(|m| self.position_from(&ints, y.len(), m)).collect()
    }

    fn position_from(&self, ints: &SubsetIntegrals, n: usize, m: usize) -> Result<FiniteValue> {
        self.assemble(ints, n, |sub| {
            (self.coef)(m as i64, sub.s.len() as i64, sub.sigma, &self.params)
        })
    }

    /// `P_Y(eta_t(x) = 1)`.
    pub fn occupation(&self, y: &InitialConfig, x: i64, t: f64) -> Result<FiniteValue> {
        self.evaluate(y, x, t, |ints| self.occupation_from(ints, y.len()))
    }

    fn occupation_from(&self, ints: &SubsetIntegrals, n: usize) -> Result<FiniteValue> {
        self.assemble(ints, n, |sub| {
            occupation_prefactor(sub.s.len() as i64, sub.sigma, &self.params)
        })
    }

    /// `P_Y(X(t) = x)` for a second-class particle started at 0.
    pub fn second_class_pmf(&self, y: &InitialConfig, x: i64, t: f64) -> Result<FiniteValue> {
        let with = self.occupation(&y.with_zero(), x, t)?;
        let without = self.occupation(y, x, t)?;
        let n = with.per_k.len();
        let mut per_k = with.per_k;
        for (k, v) in without.per_k.iter().enumerate() {
            if k < n {
                per_k[k] += v;
            }
        }
        Ok(FiniteValue {
            value: with.value - without.value,
            imag: with.imag - without.imag,
            per_k,
            nodes: with.nodes.max(without.nodes),
        })
    }

    /// `|occupation - sum_m position|` on a shared quadrature.
    pub fn density_identity_residual(&self, y: &InitialConfig, x: i64, t: f64) -> Result<f64> {
        let ints = self.integrals_on(y, x, t, &self.spec)?;
        let occ = self.occupation_from(&ints, y.len())?.value;
        let mut acc = Neumaier::new();
        for m in 1..=y.len() {
            acc.add(self.position_from(&ints, y.len(), m)?.value);
        }
        Ok((occ - acc.value()).abs())
    }

    /// `|sum_m coef(m, N, N(N+1)/2) - leading_coefficient(N)|`.
    pub fn leading_coefficient_residual(&self, n: i64) -> Result<f64> {
        let a = assembled_leading_coefficient(n, &self.params, self.coef)?;
        Ok((a - leading_coefficient(n, &self.params)).abs())
    }
}

// Ordered sum over node tuples (a_0, ..., a_{k-1}). Row `d` of `prods`
// holds, for every node `b`, the product of the pair factors between the
// nodes already chosen and `b`; it vanishes on repeated nodes.
#[allow(clippy::too_many_arguments)]
fn dfs(
    pair: &[Complex<f64>],
    xi: &[Complex<f64>],
    factors: &[Vec<Complex<f64>>],
    prods: &mut [Complex<f64>],
    depth: usize,
    val: Complex<f64>,
    prod: Complex<f64>,
    acc: &mut CNeumaier<f64>,
) {
    let k = factors.len();
    let m = xi.len();
    let f = &factors[depth];
    if depth + 1 == k {
        let here = &prods[depth * m..(depth + 1) * m];
        let mut s0 = Complex::new(0.0, 0.0);
        let mut s1 = Complex::new(0.0, 0.0);
        for b in 0..m {
            let v = f[b] * here[b];
            s0 += v;
            s1 += v * xi[b];
        }
        acc.add(val * (s0 - prod * s1));
        return;
    }
    for b in 0..m {
        let hb = prods[depth * m + b];
        if hb.re == 0.0 && hb.im == 0.0 {
            continue;
        }
        {
            let (lo, hi) = prods.split_at_mut((depth + 1) * m);
            let here = &lo[depth * m..];
            let row = &pair[b * m..(b + 1) * m];
            for c in 0..m {
                hi[c] = here[c] * row[c];
            }
        }
        dfs(pair, xi, factors, prods, depth + 1, val * f[b] * hb, prod * xi[b], acc);
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

pub fn position_pmf_finite(
    y: &InitialConfig,
    m: usize,
    x: i64,
    t: f64,
    params: &RateParams,
    spec: &ContourSpec,
) -> Result<FiniteValue> {
    FiniteSeries::new(*params, *spec).position_pmf(y, m, x, t)
}

pub fn occupation_prob_finite(
    y: &InitialConfig,
    x: i64,
    t: f64,
    params: &RateParams,
    spec: &ContourSpec,
) -> Result<FiniteValue> {
    FiniteSeries::new(*params, *spec).occupation(y, x, t)
}

pub fn second_class_pmf_finite(
    y: &InitialConfig,
    x: i64,
    t: f64,
    params: &RateParams,
    spec: &ContourSpec,
) -> Result<FiniteValue> {
    FiniteSeries::new(*params, *spec).second_class_pmf(y, x, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p03() -> RateParams {
        RateParams::new(0.3).unwrap()
    }

    fn cfg(s: &[i64]) -> InitialConfig {
        InitialConfig::new(s.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(InitialConfig::new(vec![]).is_err());
        assert!(InitialConfig::new(vec![0, 1]).is_err());
        assert!(InitialConfig::new(vec![2, 2]).is_err());
        assert!(InitialConfig::new((1..=13).collect()).is_err());
        assert_eq!(cfg(&[1, 4]).with_zero().sites(), &[0, 1, 4]);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(&[], &cfg(&[1, 2, 3])).unwrap(), 0);
        assert_eq!(sigma(&[1, 3], &cfg(&[1, 2, 3, 4])).unwrap(), 4);
        let y = cfg(&[2, 5, 7, 11]);
        assert_eq!(sigma(y.sites(), &y).unwrap(), 10);
        assert!(sigma(&[3], &y).is_err());
    }

    #[test]
    fn subsets_are_lexicographic() {
        let y = cfg(&[1, 2, 3, 4]);
        let s: Vec<Vec<i64>> = subsets(&y, 2, &p03()).into_iter().map(|t| t.s).collect();
        assert_eq!(s, vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]);
        for t in subsets(&y, 3, &p03()) {
            assert_eq!(t.sigma, sigma(&t.s, &y).unwrap());
        }
    }

    #[test]
    fn c_mk_examples() {
        let p = p03();
        assert_eq!(c_mk(3, 2, &p).unwrap(), 0.0);
        assert!((c_mk(1, 1, &p).unwrap() - 7.0 / 3.0).abs() < 1e-14);
        let p3 = RateParams::new(1.0 / 3.0).unwrap();
        let q = p3.q();
        let want = q * q * q * 0.5f64.powi(-6);
        assert!((c_mk(3, 3, &p3).unwrap() / want - 1.0).abs() < 1e-13);
        assert!(c_mk(1, 1, &RateParams::tasep()).is_err());
    }

    #[test]
    fn leading_coefficient_examples() {
        let p = p03();
        assert_eq!(leading_coefficient(1, &p), 1.0);
        assert!((leading_coefficient(2, &p) + 0.4).abs() < 1e-15);
        assert!((leading_coefficient(3, &p) - 0.16).abs() < 1e-15);
        for n in 1..=8 {
            let a = assembled_leading_coefficient(n, &p, weighted_c_mk).unwrap();
            assert!((a - leading_coefficient(n, &p)).abs() < 1e-12);
            let b = occupation_prefactor(n, n * (n + 1) / 2, &p).unwrap();
            assert!((b - leading_coefficient(n, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_time_zero_values() {
        let p = p03();
        let spec = ContourSpec::default_for(&p).with_nodes(96, &p).unwrap();
        let y1 = cfg(&[1]);
        assert!((position_pmf_finite(&y1, 1, 1, 0.0, &p, &spec).unwrap().value - 1.0).abs() < 1e-10);
        let y = cfg(&[1, 2]);
        assert!(occupation_prob_finite(&y, 5, 0.0, &p, &spec).unwrap().value.abs() < 1e-10);
        assert!((occupation_prob_finite(&y, 1, 0.0, &p, &spec).unwrap().value - 1.0).abs() < 1e-10);
        assert!((second_class_pmf_finite(&y, 0, 0.0, &p, &spec).unwrap().value - 1.0).abs() < 1e-10);
        assert!(second_class_pmf_finite(&y, 3, 0.0, &p, &spec).unwrap().value.abs() < 1e-10);
    }

    #[test]
    fn single_particle_matches_free_walk() {
        // One particle: a continuous-time walk, P(x) = e^{-t} (p/q)^{d/2} I_d(2 t sqrt(pq)).
        let p = p03();
        let spec = ContourSpec::default_for(&p);
        let y = cfg(&[1]);
        let t = 1.0;
        let mut total = 0.0;
        for x in -12..=14 {
            let v = position_pmf_finite(&y, 1, x, t, &p, &spec).unwrap().value;
            let d = x - 1;
            let z = 2.0 * t * (p.p() * p.q()).sqrt();
            let mut bessel = 0.0;
            let a = d.unsigned_abs() as i32;
            let mut term = (z / 2.0).powi(a) / (1..=a).map(|i| i as f64).product::<f64>();
            for j in 0..40 {
                bessel += term;
                term *= (z / 2.0).powi(2) / ((j + 1) as f64 * (j + 1 + a) as f64);
            }
            let want = (-t).exp() * (p.p() / p.q()).powf(d as f64 / 2.0) * bessel;
            assert!((v - want).abs() < 1e-10, "x = {x}: {v} vs {want}");
            total += v;
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_identity_small() {
        let p = p03();
        let fs = FiniteSeries::new(p, ContourSpec::default_for(&p));
        let y = cfg(&[1, 2, 4]);
        for x in [-2, 0, 3] {
            assert!(fs.density_identity_residual(&y, x, 0.6).unwrap() < 1e-10);
        }
    }
}

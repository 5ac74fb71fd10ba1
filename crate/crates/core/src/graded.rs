//! Step-initial CDF through a finite-rank factorization of the kernel.
//!
//! With `|xi| = R` large enough, `1 / (p + q xi xi' - xi)` expands in powers of
//! `1/xi`, so the nonzero spectrum of the kernel operator equals that of the
//! matrix `D H` with `D = diag(tau^n)` and
//! `H[n][m] = (-1)^{n+m} (1/2 pi i) \oint xi^{x-m-1} (xi-1)^{m-n-1} e^{eps(xi) t} dxi`.
//! The series terms are `f_k = tau^{-k(k-1)/2} e_k(D H)`; these are read off
//! as Fourier coefficients of `det(I + z D H)` on circles `|z| = tau^{-(k0-1/2)}`,
//! after rescaling rows so the determinant stays well conditioned. Arithmetic
//! is double-double throughout.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;
use num_traits::{Float, One, Zero};

use crate::contour::{ContourSpec, QuadNodes};
use crate::error::{config, domain, Error, Result};
use crate::exec::Executor;
use crate::linalg::det_in_place;
use crate::qcalc::{q_pochhammer, RateParams};
use crate::real::{cexp, cis, cpowi, powi, Dd, Real};
use crate::sum::Neumaier;

/// Where the entries of `H` come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HSource {
    /// Laurent coefficients of `e^{(p/xi + q xi) t}` (exact up to rounding).
    Series,
    /// Trapezoidal rule on the given circle.
    Contour(ContourSpec),
}

/// `c_d`, the coefficient of `xi^d` in `e^{(p/xi + q xi) t}`, for `d` in
/// `dmin..=dmax`.
pub fn laurent_coefficients(params: &RateParams, t: f64, dmin: i64, dmax: i64) -> Vec<Dd> {
    let pt = params.p_in::<Dd>() * Dd::of(t);
    let qt = params.q_in::<Dd>() * Dd::of(t);
    let cap = 1e-34;
    let one_side = |lead_rate: Dd, other: Dd, e: i64| -> Dd {
        // sum_a lead^{a+e} other^a / ((a+e)! a!)
        let mut lead = Dd::one();
        for j in 1..=e {
            lead = lead * lead_rate / Dd::of_int(j);
        }
        if lead == Dd::zero() {
            return Dd::zero();
        }
        let prod = lead_rate * other;
        let mut term = lead;
        let mut s = Dd::zero();
        let mut a = 0i64;
        loop {
            s += term;
            term = term * prod / Dd::of_int((a + 1) * (a + e + 1));
            a += 1;
            if term.val().abs() <= cap * s.val().abs() || term == Dd::zero() {
                return s;
            }
        }
    };
    (dmin..=dmax)
        .map(|d| if d >= 0 { one_side(qt, pt, d) } else { one_side(pt, qt, -d) })
        .collect()
}

/// Dense real `n x n` matrix `H` from the Laurent coefficients.
pub fn h_series(x: i64, t: f64, params: &RateParams, n: usize) -> Vec<Dd> {
    let ni = n as i64;
    let dmin = (1 - x).min(0);
    let dmax = (ni - x).max(0) + 400;
    let c = laurent_coefficients(params, t, dmin, dmax);
    let cd = |d: i64| -> Dd {
        if d < dmin || d > dmax {
            Dd::zero()
        } else {
            c[(d - dmin) as usize]
        }
    };
    let et = Dd::of(-t).exp_r();
    let mut h = vec![Dd::zero(); n * n];
    for row in 0..ni {
        for col in 0..ni {
            let s = if col <= row {
                // sum_r C(L + r, r) c_{r + row + 1 - x}
                let l = row - col;
                let mut s = Dd::zero();
                let mut binom = Dd::one();
                let mut r = 0i64;
                loop {
                    let d = r + row + 1 - x;
                    let term = binom * cd(d);
                    s += term;
                    if d > dmax
                        || (d > 0 && r > 0 && term.val().abs() <= 1e-34 * s.val().abs())
                        || (d > 0 && s == Dd::zero() && term == Dd::zero())
                    {
                        break;
                    }
                    r += 1;
                    binom = binom * Dd::of_int(l + r) / Dd::of_int(r);
                }
                s
            } else {
                // j-th difference: sum_s C(j, s) (-1)^{j-s} c_{col - x - s}
                let j = col - row - 1;
                let mut acc = Neumaier::new();
                let mut binom = Dd::one();
                for s in 0..=j {
                    let term = binom * cd(col - x - s);
                    acc.add(if (j - s) % 2 == 0 { term } else { -term });
                    binom = binom * Dd::of_int(j - s) / Dd::of_int(s + 1);
                }
                acc.value()
            };
            let v = et * s;
            h[(row * ni + col) as usize] = if (row + col) % 2 == 0 { v } else { -v };
        }
    }
    h
}

/// `H` by the trapezoidal rule; complex only through rounding.
pub fn h_contour(x: i64, t: f64, params: &RateParams, n: usize, spec: &ContourSpec) -> Result<Vec<Complex<Dd>>> {
    let nodes: QuadNodes<Dd> = spec.make_nodes();
    let one = Complex::new(Dd::one(), Dd::zero());
    let p = params.p_in::<Dd>();
    let q = params.q_in::<Dd>();
    let tt = Dd::of(t);
    let mut h = vec![Complex::new(Dd::zero(), Dd::zero()); n * n];
    let mut upow = vec![one; n];
    let mut vpow = vec![one; n];
    for (&z, &w) in nodes.nodes.iter().zip(&nodes.weights) {
        let zm1 = z - one;
        if crate::real::cabs(zm1) < crate::contour::POLE_GUARD {
            return Err(Error::Singular { what: "node at xi = 1", magnitude: 0.0 });
        }
        let eps = one * p / z + z * q - one;
        let g = w * cpowi(z, x - 1) * cexp(eps * tt) / zm1;
        let u = zm1 / z;
        let v = one / zm1;
        for k in 1..n {
            upow[k] = upow[k - 1] * u;
            vpow[k] = vpow[k - 1] * v;
        }
        for row in 0..n {
            let gv = g * vpow[row];
            let out = &mut h[row * n..row * n + n];
            for (col, o) in out.iter_mut().enumerate() {
                *o = *o + gv * upow[col];
            }
        }
    }
    for row in 0..n {
        for col in 0..n {
            if (row + col) % 2 == 1 {
                h[row * n + col] = -h[row * n + col];
            }
        }
    }
    Ok(h)
}

/// Block layout for the coefficient extraction at a given `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    /// Half-width of each block of extracted coefficients.
    pub half: usize,
    /// Number of sample points on each circle.
    pub samples: usize,
}

impl Layout {
    pub fn for_tau(tau: f64, n: usize) -> Self {
        let lg = -Float::log10(tau);
        let half = (Float::floor(Float::sqrt(12.0 / lg)) as usize).max(1);
        let mut samples = 1usize;
        loop {
            let ok_width = samples > 2 * half;
            let gap = samples as f64 - half as f64;
            let ok_alias = gap > 0.0 && gap * gap * lg / 2.0 >= 40.0;
            if ok_width && (ok_alias || samples > n) {
                return Self { half, samples };
            }
            samples *= 2;
        }
    }
}

/// Lazily extracted `f_k`, `k = 0, 1, ...`, for one matrix `H`.
pub struct Coefficients {
    h: Vec<Complex<Dd>>,
    n: usize,
    tau: Dd,
    real: bool,
    layout: Option<Layout>,
    f: Vec<Dd>,
}

impl Coefficients {
    pub fn from_real(h: &[Dd], n: usize, params: &RateParams) -> Self {
        let h = h.iter().map(|&v| Complex::new(v, Dd::zero())).collect();
        Self::build(h, n, params, true)
    }

    pub fn from_complex(h: Vec<Complex<Dd>>, n: usize, params: &RateParams) -> Self {
        Self::build(h, n, params, false)
    }

    fn build(h: Vec<Complex<Dd>>, n: usize, params: &RateParams, real: bool) -> Self {
        let tau = params.tau_in::<Dd>();
        let layout = if params.tau() > 0.0 { Some(Layout::for_tau(params.tau(), n)) } else { None };
        Self { h, n, tau, real, layout, f: vec![Dd::one()] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Number of `f_k` available without further work, including `f_0`.
    pub fn computed(&self) -> usize {
        self.f.len()
    }

    /// `f_k`; zero beyond the matrix size.
    pub fn get<E: Executor>(&mut self, k: usize, exec: &E) -> Dd {
        if k > self.n {
            return Dd::zero();
        }
        while self.f.len() <= k {
            self.extend(exec);
        }
        self.f[k]
    }

    fn extend<E: Executor>(&mut self, exec: &E) {
        let first = self.f.len();
        match self.layout {
            None => {
                // tau = 0: leading principal minors.
                let k = first;
                let mut a = Vec::with_capacity(k * k);
                for r in 0..k {
                    a.extend_from_slice(&self.h[r * self.n..r * self.n + k]);
                }
                self.f.push(det_in_place(&mut a, k).re);
            }
            Some(lay) => {
                let w = lay.half;
                let k0 = (first + w).min(self.n);
                let last = (first + 2 * w).min(self.n);
                let vals = self.samples(k0, lay.samples, exec);
                let l = lay.samples;
                let sq = self.tau.sqrt();
                for j in first..=last {
                    let idx = j % l;
                    let mut s = Complex::new(Dd::zero(), Dd::zero());
                    for (li, v) in vals.iter().enumerate() {
                        let ang = -(((li * idx) % l) as i64);
                        s = s + *v * crate::real::root_of_unity::<Dd>(ang, l);
                    }
                    let d = j as i64 - k0 as i64;
                    let c = s.re / Dd::of_int(l as i64);
                    self.f.push(c * powi(sq, -(d * d)));
                }
            }
        }
    }

    // det(M''(theta_l)) for l = 0..L.
    fn samples<E: Executor>(&self, k0: usize, l: usize, exec: &E) -> Vec<Complex<Dd>> {
        let n = self.n;
        let sq = self.tau.sqrt();
        // Row scales: tau^{k0 - 1/2 - r} on the identity for r < k0, and
        // tau^{r - k0 + 1/2} on H for r >= k0.
        let scale: Vec<Dd> = (0..n)
            .map(|r| {
                let e = 2 * (k0 as i64) - 1 - 2 * (r as i64);
                powi(sq, e.abs())
            })
            .collect();
        let count = if self.real { l / 2 + 1 } else { l };
        let mut out = exec.map(count, |li| {
            let z = cis(Dd::of_int(li as i64) * Dd::pi() * Dd::of(2.0) / Dd::of_int(l as i64));
            let mut a = Vec::with_capacity(n * n);
            for r in 0..n {
                let row = &self.h[r * n..r * n + n];
                if r < k0 {
                    for (c, v) in row.iter().enumerate() {
                        let mut e = z * *v;
                        if c == r {
                            e.re += scale[r];
                        }
                        a.push(e);
                    }
                } else {
                    for (c, v) in row.iter().enumerate() {
                        let mut e = z * *v * scale[r];
                        if c == r {
                            e.re += Dd::one();
                        }
                        a.push(e);
                    }
                }
            }
            det_in_place(&mut a, n)
        });
        if self.real {
            for li in (l / 2 + 1)..l {
                let c = out[l - li].conj();
                out.push(c);
            }
        }
        out
    }
}

/// Matrix size used for site `x` at time `t`.
pub fn default_size(x: i64, t: f64) -> usize {
    (x.max(0) + Float::ceil(4.0 * t) as i64 + 24) as usize
}

/// Options for the graded evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradedOptions {
    pub source: HSource,
    /// Extra rows/columns added to `default_size`.
    pub extra_size: usize,
    pub k_max: usize,
    pub term_tol: f64,
}

impl Default for GradedOptions {
    fn default() -> Self {
        Self { source: HSource::Series, extra_size: 0, k_max: 200, term_tol: 1e-15 }
    }
}

/// Truncated series with its per-k terms.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedValue {
    pub value: f64,
    pub terms: Vec<f64>,
    pub converged: bool,
    pub tail: f64,
    pub size: usize,
}

/// All `f_k` for the sites of a window, built on demand.
pub struct GradedTable<'a, E: Executor> {
    params: RateParams,
    t: f64,
    opts: GradedOptions,
    exec: &'a E,
    cache: Vec<(i64, Coefficients)>,
    size: usize,
}

impl<'a, E: Executor> GradedTable<'a, E> {
    /// `xmax` fixes a common matrix size for all sites.
    pub fn new(params: RateParams, t: f64, xmax: i64, opts: GradedOptions, exec: &'a E) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(domain("t must be finite and >= 0"));
        }
        if opts.term_tol <= 0.0 {
            return Err(config("term_tol > 0 violated"));
        }
        let size = default_size(xmax + 1, t) + opts.extra_size;
        Ok(Self { params, t, opts, exec, cache: Vec::new(), size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn slot(&mut self, x: i64) -> Result<usize> {
        if let Some(i) = self.cache.iter().position(|(y, _)| *y == x) {
            return Ok(i);
        }
        let n = self.size;
        let coeffs = match self.opts.source {
            HSource::Series => Coefficients::from_real(&h_series(x, self.t, &self.params, n), n, &self.params),
            HSource::Contour(spec) => {
                Coefficients::from_complex(h_contour(x, self.t, &self.params, n, &spec)?, n, &self.params)
            }
        };
        self.cache.push((x, coeffs));
        Ok(self.cache.len() - 1)
    }

    fn f(&mut self, x: i64, k: usize) -> Result<Dd> {
        let i = self.slot(x)?;
        let exec = self.exec;
        Ok(self.cache[i].1.get(k, exec))
    }

    /// Series for `P(X(t) <= x)`, or for `P(X(t) = x)` when `pmf` is set.
    pub fn eval(&mut self, x: i64, pmf: bool) -> Result<GradedValue> {
        let tau = self.params.tau_in::<Dd>();
        let mut terms = Vec::new();
        let mut sum = Dd::zero();
        let mut peak = (0usize, 0.0f64);
        let mut small_run = 0;
        let kmax = self.opts.k_max.min(self.size);
        let min_k = (x + 3).max(2) as usize; // terms peak near k = x + 1
        let mut converged = false;
        for k in 1..=kmax {
            let pre = q_pochhammer(k as i64, tau)?;
            let d = if pmf {
                self.f(x + 1, k)? - self.f(x, k)? * Dd::of(2.0) + self.f(x - 1, k)?
            } else {
                self.f(x + 1, k)? - self.f(x, k)?
            };
            let term = pre * d;
            sum += term;
            let a = term.val().abs();
            terms.push(term.val());
            if a > peak.1 {
                peak = (k, a);
            }
            if a < self.opts.term_tol {
                small_run += 1;
            } else {
                small_run = 0;
            }
            if small_run >= 2 && k > peak.0 && k >= min_k {
                converged = true;
                break;
            }
        }
        let tail = 2.0 * terms.last().map(|v| v.abs()).unwrap_or(0.0);
        if !sum.is_finite() {
            return Err(Error::Overflow("graded series produced a non-finite sum".into()));
        }
        Ok(GradedValue { value: sum.val(), terms, converged, tail, size: self.size })
    }
}

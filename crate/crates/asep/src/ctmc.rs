//! Exact transient law of the truncated-lattice chain by uniformization.

use std::collections::HashMap;

use asep_core::RateParams;

use crate::lattice::{apply, attempt, Cell, Initial, Move, Window};

pub const MAX_STATES: u64 = 5_000_000;
/// Bound on the discarded Poisson tail.
pub const POISSON_TAIL: f64 = 1e-12;

/// A configuration: first-class occupancy bits plus the second-class cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct State {
    first: u128,
    second: u8,
}

const NO_SECOND: u8 = u8::MAX;

/// Enumerated state space and sparse generator.
#[derive(Clone, Debug)]
pub struct CtmcSystem {
    pub params: RateParams,
    pub initial: Initial,
    states: Vec<State>,
    index: HashMap<State, u32>,
    /// Off-diagonal rates in CSR form.
    offsets: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
    /// Uniformization constant.
    pub lambda: f64,
    start: usize,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Number of states for `b` first-class particles on `n` cells, with or
/// without a second-class particle.
pub fn state_count(n: u64, b: u64, second: bool) -> u64 {
    if second {
        n.saturating_mul(binomial(n.saturating_sub(1), b))
    } else {
        binomial(n, b)
    }
}

fn cells_of(s: State, n: usize) -> Vec<Cell> {
    (0..n)
        .map(|i| {
            if s.second as usize == i {
                Cell::Second
            } else if s.first >> i & 1 == 1 {
                Cell::First
            } else {
                Cell::Empty
            }
        })
        .collect()
}

fn state_of(occ: &[Cell]) -> State {
    let mut s = State { first: 0, second: NO_SECOND };
    for (i, c) in occ.iter().enumerate() {
        match c {
            Cell::First => s.first |= 1 << i,
            Cell::Second => s.second = i as u8,
            Cell::Empty => {}
        }
    }
    s
}

fn combinations(n: usize, b: usize, skip: Option<usize>, out: &mut Vec<u128>) {
    fn rec(start: usize, left: usize, n: usize, skip: Option<usize>, acc: u128, out: &mut Vec<u128>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for i in start..n {
            if Some(i) == skip {
                continue;
            }
            rec(i + 1, left - 1, n, skip, acc | 1 << i, out);
        }
    }
    rec(0, b, n, skip, 0, out);
}

impl CtmcSystem {
    /// Step data on `window`: first-class particles on `1..=right`, the
    /// second-class particle at 0.
    pub fn step(params: RateParams, window: Window) -> Result<Self, String> {
        if window.left > -1 || window.right < 1 {
            return Err(format!("window [-a, b] needs a, b >= 1, got {window}"));
        }
        Self::build(params, Initial::step(window)?)
    }

    pub fn build(params: RateParams, initial: Initial) -> Result<Self, String> {
        let n = initial.window.len();
        if n > 128 {
            return Err(format!("window of {n} cells exceeds 128"));
        }
        let b = initial.first.len();
        let second = initial.second.is_some();
        if second && n > NO_SECOND as usize {
            return Err(format!("window of {n} cells is too wide for a second-class particle"));
        }
        let count = state_count(n as u64, b as u64, second);
        if count > MAX_STATES {
            return Err(format!("state count {count} > {MAX_STATES}"));
        }
        let mut states = Vec::with_capacity(count as usize);
        let mut masks = Vec::new();
        if second {
            for s in 0..n {
                masks.clear();
                combinations(n, b, Some(s), &mut masks);
                states.extend(masks.iter().map(|&m| State { first: m, second: s as u8 }));
            }
        } else {
            combinations(n, b, None, &mut masks);
            states.extend(masks.iter().map(|&m| State { first: m, second: NO_SECOND }));
        }
        let index: HashMap<State, u32> = states.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let (p, q) = (params.p(), params.q());
        let mut offsets = Vec::with_capacity(states.len() + 1);
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        let mut exit = Vec::with_capacity(states.len());
        offsets.push(0);
        for s in &states {
            let occ = cells_of(*s, n);
            let mut out = 0.0;
            for i in 0..n {
                if occ[i] == Cell::Empty {
                    continue;
                }
                for (right, rate) in [(true, p), (false, q)] {
                    let mv = attempt(&occ, i, right);
                    if matches!(mv, Move::Blocked | Move::OffWindow) || rate == 0.0 {
                        continue;
                    }
                    let mut next = occ.clone();
                    apply(&mut next, mv);
                    targets.push(index[&state_of(&next)]);
                    rates.push(rate);
                    out += rate;
                }
            }
            exit.push(out);
            offsets.push(targets.len());
        }
        let start = index[&state_of(&initial.cells())] as usize;
        let lambda = initial.particles() as f64 * (p + q);
        Ok(Self { params, initial, states, index, offsets, targets, rates, exit, lambda, start })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Generator row of state `i` as `(column, rate)` pairs, diagonal last.
    pub fn generator_row(&self, i: usize) -> Vec<(usize, f64)> {
        let mut row: Vec<(usize, f64)> = (self.offsets[i]..self.offsets[i + 1])
            .map(|e| (self.targets[e] as usize, self.rates[e]))
            .collect();
        row.push((i, -self.exit[i]));
        row
    }

    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn cells(&self, i: usize) -> Vec<Cell> {
        cells_of(self.states[i], self.initial.window.len())
    }

    pub fn index_of(&self, occ: &[Cell]) -> Option<usize> {
        self.index.get(&state_of(occ)).map(|&i| i as usize)
    }

    fn step_vector(&self, v: &[f64], out: &mut [f64]) {
        let inv = 1.0 / self.lambda;
        for (o, (&vi, &e)) in out.iter_mut().zip(v.iter().zip(&self.exit)) {
            *o = vi * (1.0 - e * inv);
        }
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for e in self.offsets[i]..self.offsets[i + 1] {
                out[self.targets[e] as usize] += vi * self.rates[e] * inv;
            }
        }
    }

    /// State distributions at each time in `times`.
    pub fn distributions(&self, times: &[f64]) -> Result<Vec<(Vec<f64>, usize)>, String> {
        for &t in times {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(format!("t >= 0 violated: t = {t}"));
            }
        }
        let n = self.len();
        let mut v = vec![0.0; n];
        v[self.start] = 1.0;
        let mut acc: Vec<Vec<f64>> = times.iter().map(|_| vec![0.0; n]).collect();
        let mut done: Vec<Option<usize>> = vec![None; times.len()];
        let mut log_fact = 0.0;
        let mut next = vec![0.0; n];
        let mut m = 0usize;
        loop {
            if m > 0 {
                log_fact += (m as f64).ln();
            }
            for (j, &t) in times.iter().enumerate() {
                if done[j].is_some() {
                    continue;
                }
                let lt = self.lambda * t;
                if lt == 0.0 {
                    acc[j].copy_from_slice(&v);
                    done[j] = Some(0);
                    continue;
                }
                let w = (-lt + m as f64 * lt.ln() - log_fact).exp();
                for (a, &x) in acc[j].iter_mut().zip(&v) {
                    *a += w * x;
                }
                let ratio = lt / (m as f64 + 2.0);
                if (m as f64) + 1.0 > lt && ratio < 1.0 {
                    let w_next = w * lt / (m as f64 + 1.0);
                    if w_next / (1.0 - ratio) < POISSON_TAIL {
                        done[j] = Some(m + 1);
                    }
                }
            }
            if done.iter().all(Option::is_some) {
                break;
            }
            self.step_vector(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
            m += 1;
        }
        Ok(acc.into_iter().zip(done).map(|(a, d)| (a, d.unwrap_or(0))).collect())
    }

    /// Marginals at each time in `times`.
    pub fn solve(&self, times: &[f64]) -> Result<Vec<CtmcResult>, String> {
        let w = self.initial.window;
        let n = w.len();
        let dists = self.distributions(times)?;
        Ok(dists
            .into_iter()
            .zip(times)
            .map(|((dist, terms), &t)| {
                let mut pmf = vec![0.0; n];
                let mut first = vec![0.0; n];
                let mut total = vec![0.0; n];
                let mut boundary = 0.0;
                for (i, &pr) in dist.iter().enumerate() {
                    if pr == 0.0 {
                        continue;
                    }
                    let s = self.states[i];
                    if s.second != NO_SECOND {
                        pmf[s.second as usize] += pr;
                        total[s.second as usize] += pr;
                    }
                    for c in 0..n {
                        if s.first >> c & 1 == 1 {
                            first[c] += pr;
                            total[c] += pr;
                        }
                    }
                    if self.initial.edge_disturbed(&cells_of(s, n)) {
                        boundary += pr;
                    }
                }
                let pmf = self.initial.second.map(|_| w.sites().zip(pmf).collect());
                CtmcResult {
                    t,
                    pmf,
                    first_occupation: w.sites().zip(first).collect(),
                    total_occupation: w.sites().zip(total).collect(),
                    boundary_mass: boundary,
                    mass: dist.iter().sum(),
                    poisson_terms: terms,
                }
            })
            .collect())
    }
}

/// Marginals of the chain at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CtmcResult {
    pub t: f64,
    /// Law of the second-class particle, when there is one.
    pub pmf: Option<Vec<(i64, f64)>>,
    /// `P(first-class particle at x)`.
    pub first_occupation: Vec<(i64, f64)>,
    /// `P(any particle at x)`.
    pub total_occupation: Vec<(i64, f64)>,
    /// Probability that an edge cell shows the truncation.
    pub boundary_mass: f64,
    /// Total probability retained after the Poisson cut.
    pub mass: f64,
    pub poisson_terms: usize,
}

/// Step data on `window` at time `t`.
pub fn ctmc_pmf(params: RateParams, window: Window, t: f64) -> Result<CtmcResult, String> {
    let sys = CtmcSystem::step(params, window)?;
    Ok(sys.solve(&[t])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p03() -> RateParams {
        RateParams::new(0.3).unwrap()
    }

    #[test]
    fn state_counts() {
        let s = CtmcSystem::step(p03(), Window::new(-1, 1).unwrap()).unwrap();
        assert_eq!(s.len(), 6);
        let s = CtmcSystem::step(p03(), Window::new(-5, 5).unwrap()).unwrap();
        assert_eq!(s.len(), 2772);
        assert_eq!(state_count(13, 6, true), 12_012);
        let err = CtmcSystem::step(p03(), Window::new(-20, 20).unwrap()).unwrap_err();
        assert!(err.contains("state count"), "{err}");
    }

    #[test]
    fn generator_rows() {
        let s = CtmcSystem::step(p03(), Window::new(-2, 3).unwrap()).unwrap();
        for i in 0..s.len() {
            let row = s.generator_row(i);
            let sum: f64 = row.iter().map(|(_, r)| r).sum();
            assert!(sum.abs() < 1e-15);
            assert!(row[..row.len() - 1].iter().all(|&(j, r)| r > 0.0 && j != i));
            assert!(s.exit[i] <= s.lambda);
        }
    }

    #[test]
    fn six_state_transitions() {
        use Cell::*;
        let p = p03();
        let s = CtmcSystem::step(p, Window::new(-1, 1).unwrap()).unwrap();
        let row = s.generator_row(s.start_index());
        // From [_, S, F]: S -> -1 at rate q; F swaps with S at rate q; F right is off-window; S right blocked.
        let left = s.index_of(&[Second, Empty, First]).unwrap();
        let swap = s.index_of(&[Empty, First, Second]).unwrap();
        let mut got: Vec<(usize, f64)> = row[..row.len() - 1].to_vec();
        got.sort_by_key(|e| e.0);
        let mut want = vec![(left, p.q()), (swap, p.q())];
        want.sort_by_key(|e| e.0);
        assert_eq!(got, want);
        assert_eq!(row.last().unwrap().1, -2.0 * p.q());
    }

    #[test]
    fn time_zero_and_conservation() {
        let r = ctmc_pmf(p03(), Window::new(-4, 4).unwrap(), 0.0).unwrap();
        let pmf = r.pmf.unwrap();
        assert_eq!(pmf.iter().find(|e| e.0 == 0).unwrap().1, 1.0);
        let r = ctmc_pmf(p03(), Window::new(-4, 4).unwrap(), 0.7).unwrap();
        let total: f64 = r.pmf.unwrap().iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_slopes() {
        let p = p03();
        let h = 1e-4;
        let r = ctmc_pmf(p, Window::new(-4, 4).unwrap(), h).unwrap();
        let pmf = r.pmf.unwrap();
        let at = |x: i64| pmf.iter().find(|e| e.0 == x).unwrap().1;
        assert!((at(-1) / h - p.q()).abs() < 1e-3);
        assert!((at(1) / h - p.q()).abs() < 1e-3);
    }

    #[test]
    fn free_particle_bessel_law() {
        // P(one particle moved by d) = e^{-t} (p/q)^{d/2} I_d(2 t sqrt(pq)).
        fn bessel_i(d: u32, z: f64) -> f64 {
            let mut term = (z / 2.0).powi(d as i32) / (1..=d).map(f64::from).product::<f64>();
            let mut sum = term;
            for k in 1..60 {
                term *= (z / 2.0).powi(2) / (k as f64 * (k + d) as f64);
                sum += term;
            }
            sum
        }
        let p = p03();
        let t = 0.4;
        let w = Window::new(-14, 16).unwrap();
        let sys = CtmcSystem::build(p, Initial::finite(w, &[1], None).unwrap()).unwrap();
        let r = sys.solve(&[t]).unwrap().remove(0);
        let z = 2.0 * t * (p.p() * p.q()).sqrt();
        for (x, v) in r.first_occupation.iter().filter(|e| (e.0 - 1).abs() <= 6) {
            let d = x - 1;
            let want = (-t).exp() * (p.p() / p.q()).powf(d as f64 / 2.0) * bessel_i(d.unsigned_abs() as u32, z);
            assert!((v - want).abs() < 1e-12, "x={x}: {v} vs {want}");
        }
    }

    #[test]
    fn several_times_in_one_pass() {
        let sys = CtmcSystem::step(p03(), Window::new(-4, 4).unwrap()).unwrap();
        let both = sys.solve(&[0.2, 0.6]).unwrap();
        let single = sys.solve(&[0.6]).unwrap();
        assert_eq!(both[1].pmf, single[0].pmf);
    }
}

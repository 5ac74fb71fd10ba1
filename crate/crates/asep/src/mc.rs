//! Event-driven Monte Carlo of the exclusion dynamics on a window.
//!
//! Every path draws from its own ChaCha8 stream (`seed`, stream = path
//! index), and per-path tallies are integers, so the totals do not depend on
//! how paths are spread over threads.

use std::collections::BTreeMap;

use asep_core::RateParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::lattice::{apply, attempt, check_state, Cell, Initial, Move, Window};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

#[derive(Clone, Debug, Default, PartialEq)]
struct Tally {
    /// Final position of the second-class particle, by cell.
    second: Vec<u64>,
    /// Final first-class occupancy, by cell.
    first: Vec<u64>,
    /// Final occupancy by any particle, by cell.
    total: Vec<u64>,
    touched: u64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self { second: vec![0; n], first: vec![0; n], total: vec![0; n], touched: 0 }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in [(&mut self.second, &other.second), (&mut self.first, &other.first), (&mut self.total, &other.total)] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.touched += other.touched;
        self
    }
}

struct Path {
    occ: Vec<Cell>,
    /// Cell of every particle.
    pos: Vec<usize>,
    /// Particle in every cell, `usize::MAX` when empty.
    who: Vec<usize>,
    second: Option<usize>,
    touched: bool,
}

impl Path {
    fn new(init: &Initial) -> Self {
        let occ = init.cells();
        let mut pos = Vec::with_capacity(init.particles());
        let mut who = vec![usize::MAX; occ.len()];
        let mut second = None;
        for (i, c) in occ.iter().enumerate() {
            if *c != Cell::Empty {
                who[i] = pos.len();
                pos.push(i);
            }
            if *c == Cell::Second {
                second = Some(i);
            }
        }
        Self { occ, pos, who, second, touched: false }
    }

    fn run(&mut self, init: &Initial, params: &RateParams, t: f64, rng: &mut ChaCha8Rng) {
        let n = self.pos.len();
        if n == 0 || t == 0.0 {
            return;
        }
        let clock = Exp::new(n as f64 * (params.p() + params.q())).expect("positive rate");
        let last = self.occ.len() - 1;
        let mut time = 0.0;
        loop {
            time += clock.sample(rng);
            if time > t {
                break;
            }
            let k = rng.random_range(0..n);
            let right = rng.random::<f64>() < params.p();
            let i = self.pos[k];
            match attempt(&self.occ, i, right) {
                Move::OffWindow => {
                    if !right || !init.right_reservoir {
                        self.touched = true;
                    }
                }
                Move::Blocked => {}
                mv @ Move::Step { from, to } => {
                    apply(&mut self.occ, mv);
                    self.pos[k] = to;
                    self.who[to] = k;
                    self.who[from] = usize::MAX;
                    if self.second == Some(from) {
                        self.second = Some(to);
                    }
                    if init.right_reservoir && from == last {
                        self.touched = true;
                    }
                }
                mv @ Move::Swap { first, second } => {
                    apply(&mut self.occ, mv);
                    let other = self.who[second];
                    self.pos[k] = second;
                    self.pos[other] = first;
                    self.who[second] = k;
                    self.who[first] = other;
                    self.second = Some(first);
                }
            }
            #[cfg(debug_assertions)]
            if let Err(e) = check_state(&self.occ, self.second, n) {
                panic!("state invariant broken: {e}");
            }
        }
    }
}

fn simulate(params: &RateParams, t: f64, init: &Initial, n_paths: u64, seed: u64) -> Result<Tally, String> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(format!("t >= 0 violated: t = {t}"));
    }
    if n_paths < 1 {
        return Err("n_paths >= 1 violated".into());
    }
    let n = init.window.len();
    let tally = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path);
            let mut state = Path::new(init);
            state.run(init, params, t, &mut rng);
            check_state(&state.occ, state.second, state.pos.len())?;
            let mut one = Tally::new(n);
            if let Some(s) = state.second {
                one.second[s] += 1;
            }
            for (i, c) in state.occ.iter().enumerate() {
                match c {
                    Cell::First => {
                        one.first[i] += 1;
                        one.total[i] += 1;
                    }
                    Cell::Second => one.total[i] += 1,
                    Cell::Empty => {}
                }
            }
            one.touched = u64::from(state.touched);
            Ok::<Tally, String>(one)
        })
        .try_reduce(|| Tally::new(n), |a, b| Ok(a.merge(b)))?;
    Ok(tally)
}

/// Empirical law of the second-class particle.
#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    /// Frequencies of the observed sites.
    pub pmf_hat: BTreeMap<i64, f64>,
    pub counts: BTreeMap<i64, u64>,
    pub n_paths: u64,
    pub seed: u64,
    /// 99% normal-approximation half-widths.
    pub ci_halfwidth: BTreeMap<i64, f64>,
    /// Fraction of paths that felt the window edges.
    pub boundary_touch_rate: f64,
}

impl McResult {
    /// Frequency at `x`, zero when unobserved.
    pub fn freq(&self, x: i64) -> f64 {
        self.pmf_hat.get(&x).copied().unwrap_or(0.0)
    }

    pub fn halfwidth(&self, x: i64) -> f64 {
        self.ci_halfwidth.get(&x).copied().unwrap_or(0.0)
    }
}

pub fn halfwidth(freq: f64, n: u64) -> f64 {
    Z99 * (freq * (1.0 - freq) / n as f64).sqrt()
}

fn frequencies(counts: &[u64], window: Window, n: u64) -> (BTreeMap<i64, u64>, BTreeMap<i64, f64>, BTreeMap<i64, f64>) {
    let mut c = BTreeMap::new();
    let mut f = BTreeMap::new();
    let mut h = BTreeMap::new();
    for (i, &k) in counts.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let x = window.site(i);
        let fr = k as f64 / n as f64;
        c.insert(x, k);
        f.insert(x, fr);
        h.insert(x, halfwidth(fr, n));
    }
    (c, f, h)
}

/// Step data: second-class particle at 0, first-class particles on
/// `1..=window.right`.
pub fn mc_run(params: &RateParams, t: f64, window: Window, n_paths: u64, seed: u64) -> Result<McResult, String> {
    let init = Initial::step(window)?;
    mc_two_class(params, t, &init, n_paths, seed).map(|r| r.law)
}

/// Occupation frequencies of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupation {
    pub freq: Vec<(i64, f64)>,
    pub ci_halfwidth: Vec<(i64, f64)>,
}

fn occupation(counts: &[u64], window: Window, n: u64) -> Occupation {
    let freq: Vec<(i64, f64)> = counts.iter().enumerate().map(|(i, &k)| (window.site(i), k as f64 / n as f64)).collect();
    let ci_halfwidth = freq.iter().map(|&(x, f)| (x, halfwidth(f, n))).collect();
    Occupation { freq, ci_halfwidth }
}

/// A two-class run with its occupation marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoClassRun {
    pub law: McResult,
    /// First-class occupation (the eta process).
    pub first: Occupation,
    /// First- or second-class occupation (the zeta process).
    pub total: Occupation,
}

pub fn mc_two_class(params: &RateParams, t: f64, init: &Initial, n_paths: u64, seed: u64) -> Result<TwoClassRun, String> {
    if init.second.is_none() {
        return Err("a two-class run needs a second-class particle".into());
    }
    let tally = simulate(params, t, init, n_paths, seed)?;
    let w = init.window;
    let (counts, pmf_hat, ci_halfwidth) = frequencies(&tally.second, w, n_paths);
    Ok(TwoClassRun {
        law: McResult {
            pmf_hat,
            counts,
            n_paths,
            seed,
            ci_halfwidth,
            boundary_touch_rate: tally.touched as f64 / n_paths as f64,
        },
        first: occupation(&tally.first, w, n_paths),
        total: occupation(&tally.total, w, n_paths),
    })
}

/// Single-class run from first-class particles on `y`.
pub fn mc_occupation(
    params: &RateParams,
    t: f64,
    y: &[i64],
    window: Window,
    n_paths: u64,
    seed: u64,
) -> Result<(Occupation, f64), String> {
    let init = Initial::finite(window, y, None)?;
    let tally = simulate(params, t, &init, n_paths, seed)?;
    Ok((occupation(&tally.first, window, n_paths), tally.touched as f64 / n_paths as f64))
}

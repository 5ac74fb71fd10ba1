//! Finite windows of the lattice and the single jump rule shared by the
//! Markov-chain and Monte Carlo oracles.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    First,
    Second,
}

/// Integer interval `[left, right]` of sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub left: i64,
    pub right: i64,
}

impl Window {
    pub fn new(left: i64, right: i64) -> Result<Self, String> {
        if left > right {
            return Err(format!("window left <= right violated: {left} > {right}"));
        }
        Ok(Self { left, right })
    }

    /// `[-L, L]` with `L = ceil(t + 8 sqrt(t + 1) + 8)`.
    pub fn default_for(t: f64) -> Self {
        let l = default_half_width(t);
        Self { left: -l, right: l }
    }

    /// Parses `a:b`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("window must look like a:b, got {s:?}"))?;
        let a = a.trim().parse::<i64>().map_err(|e| format!("window start {a:?}: {e}"))?;
        let b = b.trim().parse::<i64>().map_err(|e| format!("window end {b:?}: {e}"))?;
        Self::new(a, b)
    }

    pub fn len(&self) -> usize {
        (self.right - self.left + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: i64) -> bool {
        self.left <= x && x <= self.right
    }

    pub fn index(&self, x: i64) -> usize {
        (x - self.left) as usize
    }

    pub fn site(&self, i: usize) -> i64 {
        self.left + i as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.left..=self.right
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.left, self.right)
    }
}

pub fn default_half_width(t: f64) -> i64 {
    (t + 8.0 * (t + 1.0).sqrt() + 8.0).ceil() as i64
}

/// Starting configuration inside a window.
#[derive(Clone, Debug, PartialEq)]
pub struct Initial {
    pub window: Window,
    pub first: Vec<i64>,
    pub second: Option<i64>,
    /// The sites right of the window count as occupied (step data); an
    /// emptied right edge cell then signals truncation.
    pub right_reservoir: bool,
}

impl Initial {
    /// First-class particles on `1..=right`, second-class particle at 0.
    pub fn step(window: Window) -> Result<Self, String> {
        if !(window.left <= 0) {
            return Err(format!("window must contain 0: left = {} > 0", window.left));
        }
        if !(window.right >= 1) {
            return Err(format!("window must contain 1: right = {} < 1", window.right));
        }
        Ok(Self { window, first: (1..=window.right).collect(), second: Some(0), right_reservoir: true })
    }

    /// Finitely many first-class particles on `y`, optionally a second-class
    /// particle; empty outside the window.
    pub fn finite(window: Window, y: &[i64], second: Option<i64>) -> Result<Self, String> {
        let mut all: Vec<i64> = y.to_vec();
        all.extend(second);
        for &s in &all {
            if !window.contains(s) {
                return Err(format!("site {s} outside window {window}"));
            }
        }
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err("initial sites must be distinct".into());
        }
        Ok(Self { window, first: y.to_vec(), second, right_reservoir: false })
    }

    pub fn particles(&self) -> usize {
        self.first.len() + usize::from(self.second.is_some())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut occ = vec![Cell::Empty; self.window.len()];
        for &s in &self.first {
            occ[self.window.index(s)] = Cell::First;
        }
        if let Some(s) = self.second {
            occ[self.window.index(s)] = Cell::Second;
        }
        occ
    }

    /// Whether the edge cells show that the truncation has been felt: a
    /// particle on the left edge, or on the right edge unless the right side
    /// is a reservoir, in which case an empty right edge.
    pub fn edge_disturbed(&self, occ: &[Cell]) -> bool {
        let n = occ.len();
        let start = self.cells();
        let left = occ[0] != Cell::Empty && start[0] == Cell::Empty;
        let right = if self.right_reservoir {
            occ[n - 1] == Cell::Empty
        } else {
            occ[n - 1] != Cell::Empty && start[n - 1] == Cell::Empty
        };
        left || right
    }
}

/// Result of one jump attempt from cell `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    /// The particle moves into an empty cell.
    Step { from: usize, to: usize },
    /// A first-class particle trades places with the second-class one.
    Swap { first: usize, second: usize },
    Blocked,
    /// The target lies outside the window (treated as blocked).
    OffWindow,
}

pub fn attempt(occ: &[Cell], i: usize, right: bool) -> Move {
    let j = if right {
        if i + 1 >= occ.len() {
            return Move::OffWindow;
        }
        i + 1
    } else {
        if i == 0 {
            return Move::OffWindow;
        }
        i - 1
    };
    match (occ[i], occ[j]) {
        (Cell::Empty, _) => Move::Blocked,
        (_, Cell::Empty) => Move::Step { from: i, to: j },
        (Cell::First, Cell::Second) => Move::Swap { first: i, second: j },
        _ => Move::Blocked,
    }
}

/// Applies a non-blocked move in place.
pub fn apply(occ: &mut [Cell], mv: Move) {
    match mv {
        Move::Step { from, to } => {
            occ[to] = occ[from];
            occ[from] = Cell::Empty;
        }
        Move::Swap { first, second } => {
            occ[first] = Cell::Second;
            occ[second] = Cell::First;
        }
        Move::Blocked | Move::OffWindow => {}
    }
}

/// Checks the representation invariants of a two-class state: a single
/// second-class particle at `x_second`, the particle count, and the counting
/// identity `J_zeta(x) - J_eta(x) = 1{X <= x}` with `J(x)` the number of
/// particles at sites `<= x`.
pub fn check_state(occ: &[Cell], x_second: Option<usize>, particles: usize) -> Result<(), String> {
    let mut seconds = 0;
    let mut count = 0;
    let mut zeta = 0i64;
    let mut eta = 0i64;
    for (i, c) in occ.iter().enumerate() {
        match c {
            Cell::First => {
                eta += 1;
                zeta += 1;
                count += 1;
            }
            Cell::Second => {
                seconds += 1;
                zeta += 1;
                count += 1;
                if x_second != Some(i) {
                    return Err(format!("second-class particle at {i}, expected {x_second:?}"));
                }
            }
            Cell::Empty => {}
        }
        if let Some(xs) = x_second {
            if zeta - eta != i64::from(xs <= i) {
                return Err(format!("counting identity fails at cell {i}"));
            }
        }
    }
    if seconds != usize::from(x_second.is_some()) {
        return Err(format!("{seconds} second-class particles present"));
    }
    if count != particles {
        return Err(format!("particle count {count}, expected {particles}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Cell::*;

    #[test]
    fn jump_rules() {
        let occ = [Empty, Second, First, First, Empty];
        assert_eq!(attempt(&occ, 1, false), Move::Step { from: 1, to: 0 });
        assert_eq!(attempt(&occ, 1, true), Move::Blocked);
        assert_eq!(attempt(&occ, 2, false), Move::Swap { first: 2, second: 1 });
        assert_eq!(attempt(&occ, 2, true), Move::Blocked);
        assert_eq!(attempt(&occ, 3, true), Move::Step { from: 3, to: 4 });
        assert_eq!(attempt(&occ, 0, false), Move::OffWindow);
        assert_eq!(attempt(&occ, 0, true), Move::Blocked);
        let mut o = occ;
        apply(&mut o, Move::Swap { first: 2, second: 1 });
        assert_eq!(o, [Empty, First, Second, First, Empty]);
    }

    #[test]
    fn windows() {
        let w = Window::parse("-5:5").unwrap();
        assert_eq!((w.len(), w.index(0), w.site(10)), (11, 5, 5));
        assert!(Window::parse("3:1").is_err());
        assert!(Window::parse("3").is_err());
        assert_eq!(Window::default_for(0.0), Window { left: -16, right: 16 });
        assert!(Initial::step(Window::new(1, 4).unwrap()).is_err());
        assert!(Initial::step(Window::new(-3, 0).unwrap()).is_err());
    }

    #[test]
    fn state_checks() {
        let occ = [Empty, Second, First, First, Empty];
        assert!(check_state(&occ, Some(1), 3).is_ok());
        assert!(check_state(&occ, Some(2), 3).is_err());
        assert!(check_state(&occ, Some(1), 4).is_err());
        let init = Initial::step(Window::new(-1, 2).unwrap()).unwrap();
        assert_eq!(init.cells(), vec![Empty, Second, First, First]);
        assert!(!init.edge_disturbed(&init.cells()));
        assert!(init.edge_disturbed(&[Second, Empty, First, First]));
        assert!(init.edge_disturbed(&[Empty, Second, First, Empty]));
    }
}

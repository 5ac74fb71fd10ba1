//! Command-line options, the TOML config file and their merge.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::table::Format;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EngineSel {
    /// Determinant series (default series engine).
    #[value(alias = "step", alias = "step-series")]
    Graded,
    /// Direct k-fold contour quadrature.
    Nested,
    /// Fredholm coefficients of the Nystrom matrix.
    #[value(alias = "nystrom")]
    Fredholm,
    /// The p = 0 series.
    Tasep,
    /// Exact truncated-lattice chain.
    Ctmc,
    /// Monte Carlo.
    Simulate,
}

impl EngineSel {
    pub fn name(self) -> &'static str {
        match self {
            EngineSel::Graded => "graded",
            EngineSel::Nested => "nested",
            EngineSel::Fredholm => "fredholm",
            EngineSel::Tasep => "tasep",
            EngineSel::Ctmc => "ctmc",
            EngineSel::Simulate => "simulate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionSel {
    F64,
    Dd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Pmf,
    Cdf,
    /// Position law of the m-th particle (finite data).
    Position,
    /// Occupation probability (finite data).
    Occupation,
    /// Second-class law as an occupation difference (finite data).
    Second,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Pmf => "pmf",
            Quantity::Cdf => "cdf",
            Quantity::Position => "position",
            Quantity::Occupation => "occupation",
            Quantity::Second => "second",
        }
    }
}

/// Options shared by all subcommands. Every field is optional so that flags,
/// the config file and defaults can be layered.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Opts {
    /// Right jump rate, 0 < p < 1/2 (left rate q = 1 - p).
    #[arg(long)]
    pub p: Option<f64>,
    /// Time t >= 0.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<i64>,
    /// Largest series order.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Contour radius.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    /// Quadrature nodes on the contour.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub nodes: Option<usize>,
    /// Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lattice window a:b for the oracles.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (stdout when absent).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Series truncation tolerance, or the pass tolerance for `compare`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// TOML file with any of these options (flags win).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Series engine.
    #[arg(long, value_enum)]
    pub engine: Option<EngineSel>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionSel>,
    /// Graded engine: matrix entries by quadrature on the (R, M) contour.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub contour_entries: Option<bool>,
    /// Finite initial sites, comma separated.
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long, value_enum)]
    pub quantity: Option<Quantity>,
    /// Particle index for `--quantity position`.
    #[arg(long)]
    pub m: Option<usize>,
    /// First engine for `compare`.
    #[arg(long, value_enum)]
    pub a: Option<EngineSel>,
    /// Second engine for `compare`.
    #[arg(long, value_enum)]
    pub b: Option<EngineSel>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Opts { $($f: $hi.$f.clone().or_else(|| $lo.$f.clone()),)* }
    };
}

impl Opts {
    /// Fields of `self` win over `other`.
    pub fn over(&self, other: &Opts) -> Opts {
        layer!(
            self, other, p, t, x_min, x_max, kmax, radius, nodes, paths, seed, window, format, out, tol,
            threads, config, engine, precision, contour_entries, y, quantity, m, a, b
        )
    }

    pub fn from_toml(text: &str) -> Result<Opts, String> {
        toml::from_str(text).map_err(|e| format!("config file: {e}"))
    }

    pub fn load(path: &Path) -> Result<Opts, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config file {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Flags layered over the config file named by `--config`, if any.
    pub fn effective(&self) -> Result<Opts, String> {
        match &self.config {
            Some(path) => Ok(self.over(&Self::load(path)?)),
            None => Ok(self.clone()),
        }
    }
}

/// Parses `1,2,3`.
pub fn parse_sites(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<i64>().map_err(|e| format!("site {v:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = Opts::from_toml("p = 0.2\nt = 1.5\nR = 3.0\nx-min = -4\nengine = \"nested\"\n").unwrap();
        let flags = Opts { p: Some(0.3), ..Default::default() };
        let eff = flags.over(&file);
        assert_eq!(eff.p, Some(0.3));
        assert_eq!(eff.t, Some(1.5));
        assert_eq!(eff.radius, Some(3.0));
        assert_eq!(eff.x_min, Some(-4));
        assert_eq!(eff.engine, Some(EngineSel::Nested));
        assert!(Opts::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn sites() {
        assert_eq!(parse_sites("1, 2,4").unwrap(), vec![1, 2, 4]);
        assert!(parse_sites("1,x").is_err());
    }
}

//! The `asep` command line. [`run_from`] does everything except touching the
//! process (printing and exiting), so tests can drive it in-process.

use std::ffi::OsString;

use asep_core::contour::{default_radius, ContourSpec, MAX_NODES};
use asep_core::finite::{FiniteSeries, InitialConfig};
use asep_core::step::{DistTable, Precision, SeriesSpec, StepKind, StepSeries};
use asep_core::RateParams;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{parse_sites, EngineSel, Opts, PrecisionSel, Quantity};
use crate::ctmc::CtmcSystem;
use crate::exec::Rayon;
use crate::lattice::{default_half_width, Window};
use crate::mc::{halfwidth, mc_run, McResult};
use crate::suites;
use crate::table::{num, Format, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Parser, Debug, Clone)]
#[command(name = "asep", version, about = "Second-class particle laws in ASEP: series engines and exact and Monte Carlo oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// P(X(t) = x) for step data.
    Pmf(Opts),
    /// P(X(t) <= x) for step data.
    Cdf(Opts),
    /// The p = 0 distribution function (`--quantity pmf` for point masses).
    Tasep(Opts),
    /// Finite initial data: position laws, occupations, second-class law.
    Finite(Opts),
    /// Monte Carlo law of the second-class particle.
    Simulate(Opts),
    /// Exact law of the chain on a finite window.
    Ctmc(Opts),
    /// Compare two engines on a window of sites.
    Compare(Opts),
    /// Run an identity suite and print a JSON summary.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Quadrature,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[arg(value_enum, default_value = "all")]
    pub suite: Suite,
    /// Flip the sign of the finite-data coefficients (the suite must fail).
    #[arg(long)]
    pub inject_sign_flip: bool,
    #[command(flatten)]
    pub opts: Opts,
}

impl Command {
    pub fn opts(&self) -> &Opts {
        match self {
            Command::Pmf(o)
            | Command::Cdf(o)
            | Command::Tasep(o)
            | Command::Finite(o)
            | Command::Simulate(o)
            | Command::Ctmc(o)
            | Command::Compare(o) => o,
            Command::Check(c) => &c.opts,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Pmf(_) => "pmf",
            Command::Cdf(_) => "cdf",
            Command::Tasep(_) => "tasep",
            Command::Finite(_) => "finite",
            Command::Simulate(_) => "simulate",
            Command::Ctmc(_) => "ctmc",
            Command::Compare(_) => "compare",
            Command::Check(_) => "check",
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// Rendered table or report (already written when `--out` was given).
    pub output: String,
    /// Diagnostic for stderr.
    pub message: Option<String>,
}

impl Outcome {
    fn config(message: String) -> Self {
        Self { code: EXIT_CONFIG, output: String::new(), message: Some(message) }
    }
}

struct Report {
    code: i32,
    text: String,
    message: Option<String>,
}

type Res<T> = Result<T, String>;

fn s<E: ToString>(e: E) -> String {
    e.to_string()
}

pub fn run_from<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            Outcome { code, output: String::new(), message: Some(e.to_string()) }
        }
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    let opts = match cli.command.opts().effective() {
        Ok(o) => o,
        Err(m) => return Outcome::config(m),
    };
    if opts.threads == Some(0) {
        return Outcome::config("threads >= 1 violated".into());
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(opts.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return Outcome::config(format!("thread pool: {e}")),
    };
    let report = pool.install(|| match &cli.command {
        Command::Pmf(_) => cmd_series(StepKind::Pmf, &opts),
        Command::Cdf(_) => cmd_series(StepKind::Cdf, &opts),
        Command::Tasep(_) => cmd_tasep(&opts),
        Command::Finite(_) => cmd_finite(&opts),
        Command::Simulate(_) => cmd_simulate(&opts),
        Command::Ctmc(_) => cmd_ctmc(&opts),
        Command::Compare(_) => cmd_compare(&opts),
        Command::Check(c) => cmd_check(c.suite, c.inject_sign_flip),
    });
    let report = match report {
        Ok(r) => r,
        Err(m) => return Outcome::config(format!("{}: {m}", cli.command.name())),
    };
    if let Some(path) = &opts.out {
        if let Err(e) = std::fs::write(path, &report.text) {
            return Outcome::config(format!("writing {}: {e}", path.display()));
        }
    }
    Outcome { code: report.code, output: report.text, message: report.message }
}

/// Resolved parameters echoed into the header; `rerun` rebuilds the command.
struct Header {
    command: &'static str,
    args: Vec<(&'static str, String)>,
    diagnostics: Vec<(String, String)>,
    /// Ignore further `arg` calls.
    frozen: bool,
}

impl Header {
    fn new(command: &'static str) -> Self {
        Self { command, args: Vec::new(), diagnostics: Vec::new(), frozen: false }
    }

    fn arg(&mut self, flag: &'static str, value: impl ToString) {
        if !self.frozen {
            self.args.push((flag, value.to_string()));
        }
    }

    fn diag(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.push((key.to_string(), value.to_string()));
    }

    fn into_table(self, columns: &[&str]) -> Table {
        let mut t = Table::new(columns);
        t.meta("command", self.command);
        let mut rerun = format!("asep {}", self.command);
        for (f, v) in &self.args {
            rerun.push_str(&format!(" --{f} {v}"));
        }
        t.meta("rerun", rerun);
        for (f, v) in self.args {
            t.meta(f, v);
        }
        for (k, v) in self.diagnostics {
            t.meta(&k, v);
        }
        t
    }
}

fn format_of(o: &Opts, h: &mut Header) -> Format {
    let f = o.format.unwrap_or_default();
    h.arg("format", if f == Format::Json { "json" } else { "csv" });
    f
}

fn rates(o: &Opts, h: &mut Header) -> Res<RateParams> {
    let p = o.p.unwrap_or(0.3);
    if !(p > 0.0 && p < 0.5) {
        return Err(format!("0 < p < 0.5 violated: p = {p}"));
    }
    h.arg("p", num(p));
    RateParams::new(p).map_err(s)
}

fn time(o: &Opts, h: &mut Header) -> Res<f64> {
    let t = o.t.unwrap_or(1.0);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(format!("t >= 0 violated: t = {t}"));
    }
    h.arg("t", num(t));
    Ok(t)
}

fn x_range(o: &Opts, default: (i64, i64), h: &mut Header) -> Res<(i64, i64)> {
    let a = o.x_min.unwrap_or(default.0);
    let b = o.x_max.unwrap_or(default.1);
    if a > b {
        return Err(format!("x-min <= x-max violated: {a} > {b}"));
    }
    h.arg("x-min", a);
    h.arg("x-max", b);
    Ok((a, b))
}

fn contour(o: &Opts, params: &RateParams, h: &mut Header) -> Res<ContourSpec> {
    let r = o.radius.unwrap_or_else(|| default_radius(params));
    let m = o.nodes.unwrap_or(asep_core::contour::DEFAULT_NODES);
    if m > MAX_NODES {
        return Err(format!("M <= {MAX_NODES} violated: M = {m}"));
    }
    let spec = ContourSpec::new(r, m, params).map_err(s)?;
    h.arg("R", num(r));
    h.arg("M", m);
    Ok(spec)
}

fn window(o: &Opts, default: Window, h: &mut Header) -> Res<Window> {
    let w = match &o.window {
        Some(text) => Window::parse(text)?,
        None => default,
    };
    h.arg("window", w);
    Ok(w)
}

fn series_spec(o: &Opts, params: &RateParams, engine: EngineSel, h: &mut Header) -> Res<SeriesSpec> {
    let mut spec = match engine {
        EngineSel::Graded => SeriesSpec::graded(params),
        EngineSel::Nested => SeriesSpec::nested(params, 4),
        EngineSel::Fredholm => SeriesSpec::nystrom(params),
        other => return Err(format!("engine {} does not evaluate the series", other.name())),
    };
    if let Some(k) = o.kmax {
        spec.k_max = k;
    }
    if let Some(tol) = o.tol {
        spec.term_tol = tol;
    }
    spec.contour = contour(o, params, h)?;
    if let Some(pr) = o.precision {
        spec.precision = match pr {
            PrecisionSel::F64 => Precision::F64,
            PrecisionSel::Dd => Precision::Dd,
        };
    }
    if let Some(c) = o.contour_entries {
        spec.contour_entries = c;
    }
    spec.validate().map_err(s)?;
    h.arg("engine", engine.name());
    h.arg("kmax", spec.k_max);
    h.arg("tol", num(spec.term_tol));
    h.arg("precision", precision_name(spec.precision));
    h.arg("contour-entries", spec.contour_entries);
    Ok(spec)
}

fn precision_name(p: Precision) -> &'static str {
    if p == Precision::Dd {
        "dd"
    } else {
        "f64"
    }
}

fn describe(engine: EngineSel, spec: &SeriesSpec) -> String {
    format!(
        "engine={} kmax={} tol={} precision={} R={} M={} contour-entries={}",
        engine.name(),
        spec.k_max,
        num(spec.term_tol),
        precision_name(spec.precision),
        num(spec.contour.radius()),
        spec.contour.nodes(),
        spec.contour_entries
    )
}

fn series_diagnostics(tab: &DistTable, h: &mut Header) {
    h.diag("converged", tab.converged);
    h.diag("mass_defect", num(tab.mass_defect));
    h.diag("tail", num(tab.tail));
    let res = tab.entries.iter().map(|(_, v)| v.resolution).max().unwrap_or(0);
    h.diag("resolution", res);
    let orders = tab.entries.iter().map(|(_, v)| v.terms.len()).max().unwrap_or(0);
    let per_k: Vec<String> = (0..orders)
        .map(|k| {
            let m = tab.entries.iter().filter_map(|(_, v)| v.terms.get(k)).fold(0.0f64, |a, b| a.max(b.abs()));
            num(m)
        })
        .collect();
    h.diag("max_abs_term_by_order", per_k.join(","));
}

fn cmd_series(kind: StepKind, o: &Opts) -> Res<Report> {
    let mut h = Header::new(if kind == StepKind::Pmf { "pmf" } else { "cdf" });
    let params = rates(o, &mut h)?;
    let t = time(o, &mut h)?;
    let l = default_half_width(t);
    let (a, b) = x_range(o, (-l, l), &mut h)?;
    let spec = series_spec(o, &params, o.engine.unwrap_or(EngineSel::Graded), &mut h)?;
    let format = format_of(o, &mut h);
    let series = StepSeries::new(params, spec).map_err(s)?.with_executor(Rayon);
    let tab = series.table(kind, a, b, t).map_err(s)?;
    series_diagnostics(&tab, &mut h);
    let mut out = h.into_table(&["x", "value"]);
    for (x, v) in &tab.entries {
        out.row(*x, vec![v.value]);
    }
    let code = if tab.converged { EXIT_OK } else { EXIT_UNCONVERGED };
    let message = (!tab.converged).then(|| "series truncated before convergence; see header".to_string());
    Ok(Report { code, text: out.render(format), message })
}

/// CDF on `a-1..=b`, returned on `a..=b` as CDF or as first differences.
fn tasep_values(o: &Opts, quantity: Quantity, a: i64, b: i64, t: f64, h: &mut Header) -> Res<(Vec<f64>, DistTable)> {
    let params = RateParams::tasep();
    let engine = o.engine.unwrap_or(EngineSel::Graded);
    let spec = series_spec(o, &params, engine, h)?;
    let series = StepSeries::new(params, spec).map_err(s)?.with_executor(Rayon);
    let tab = series.table(StepKind::Tasep, a - 1, b, t).map_err(s)?;
    let v = tab.values();
    let vals = match quantity {
        Quantity::Cdf => v[1..].to_vec(),
        Quantity::Pmf => v.windows(2).map(|w| w[1] - w[0]).collect(),
        other => return Err(format!("tasep gives pmf or cdf, not {}", other.name())),
    };
    Ok((vals, tab))
}

fn cmd_tasep(o: &Opts) -> Res<Report> {
    let mut h = Header::new("tasep");
    let t = time(o, &mut h)?;
    let l = default_half_width(t);
    let (a, b) = x_range(o, (-l, l), &mut h)?;
    let quantity = o.quantity.unwrap_or(Quantity::Cdf);
    h.arg("quantity", quantity.name());
    let (vals, tab) = tasep_values(o, quantity, a, b, t, &mut h)?;
    let format = format_of(o, &mut h);
    h.diag("p", 0);
    series_diagnostics(&tab, &mut h);
    let mut out = h.into_table(&["x", "value"]);
    for (x, v) in (a..=b).zip(vals) {
        out.row(x, vec![v]);
    }
    let code = if tab.converged { EXIT_OK } else { EXIT_UNCONVERGED };
    Ok(Report { code, text: out.render(format), message: None })
}

fn cmd_finite(o: &Opts) -> Res<Report> {
    let mut h = Header::new("finite");
    let params = rates(o, &mut h)?;
    let t = time(o, &mut h)?;
    let sites = parse_sites(o.y.as_deref().unwrap_or("1,2,3,4"))?;
    let y = InitialConfig::new(sites.clone()).map_err(s)?;
    h.arg("y", sites.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    let quantity = o.quantity.unwrap_or(Quantity::Second);
    h.arg("quantity", quantity.name());
    let m = match quantity {
        Quantity::Position => {
            let m = o.m.ok_or("--quantity position needs --m")?;
            if !(1 <= m && m <= y.len()) {
                return Err(format!("1 <= m <= |Y| violated: m = {m}, |Y| = {}", y.len()));
            }
            h.arg("m", m);
            m
        }
        Quantity::Occupation | Quantity::Second => 0,
        other => return Err(format!("finite gives position, occupation or second, not {}", other.name())),
    };
    let l = default_half_width(t);
    let lo = sites[0].min(0) - l;
    let hi = sites[sites.len() - 1] + l;
    let (a, b) = x_range(o, (lo, hi), &mut h)?;
    let spec = contour(o, &params, &mut h)?;
    let format = format_of(o, &mut h);
    let series = FiniteSeries::new(params, spec).with_executor(Rayon);
    let mut rows = Vec::new();
    let mut nodes = 0;
    let mut imag = 0.0f64;
    for x in a..=b {
        let v = match quantity {
            Quantity::Position => series.position_pmf(&y, m, x, t),
            Quantity::Occupation => series.occupation(&y, x, t),
            _ => series.second_class_pmf(&y, x, t),
        }
        .map_err(s)?;
        nodes = nodes.max(v.nodes);
        imag = imag.max(v.imag.abs());
        rows.push((x, v.value));
    }
    h.diag("nodes_used", nodes);
    h.diag("max_abs_imag", num(imag));
    let mut out = h.into_table(&["x", "value"]);
    for (x, v) in rows {
        out.row(x, vec![v]);
    }
    Ok(Report { code: EXIT_OK, text: out.render(format), message: None })
}

fn simulate(o: &Opts, params: &RateParams, t: f64, h: &mut Header) -> Res<McResult> {
    let w = window(o, Window::default_for(t), h)?;
    let paths = o.paths.unwrap_or(10_000);
    let seed = o.seed.unwrap_or(0);
    h.arg("paths", paths);
    h.arg("seed", seed);
    mc_run(params, t, w, paths, seed)
}

fn cmd_simulate(o: &Opts) -> Res<Report> {
    let mut h = Header::new("simulate");
    let params = rates(o, &mut h)?;
    let t = time(o, &mut h)?;
    let r = simulate(o, &params, t, &mut h)?;
    let format = format_of(o, &mut h);
    h.diag("boundary_touch_rate", num(r.boundary_touch_rate));
    let mut out = h.into_table(&["x", "pmf", "ci99_halfwidth"]);
    for (x, f) in &r.pmf_hat {
        out.row(*x, vec![*f, r.halfwidth(*x)]);
    }
    Ok(Report { code: EXIT_OK, text: out.render(format), message: None })
}

struct ChainRun {
    window: Window,
    pmf: Vec<(i64, f64)>,
    boundary_mass: f64,
    states: usize,
}

fn chain(o: &Opts, params: RateParams, t: f64, h: &mut Header) -> Res<ChainRun> {
    let w = window(o, Window::new(-6, 6)?, h)?;
    let sys = CtmcSystem::step(params, w)?;
    let r = sys.solve(&[t])?.remove(0);
    h.diag("states", sys.len());
    h.diag("poisson_terms", r.poisson_terms);
    h.diag("retained_mass", num(r.mass));
    h.diag("boundary_mass", num(r.boundary_mass));
    Ok(ChainRun { window: w, pmf: r.pmf.unwrap_or_default(), boundary_mass: r.boundary_mass, states: sys.len() })
}

fn cmd_ctmc(o: &Opts) -> Res<Report> {
    let mut h = Header::new("ctmc");
    let params = rates(o, &mut h)?;
    let t = time(o, &mut h)?;
    let run = chain(o, params, t, &mut h)?;
    let format = format_of(o, &mut h);
    let mut out = h.into_table(&["x", "pmf"]);
    for (x, v) in &run.pmf {
        out.row(*x, vec![*v]);
    }
    Ok(Report { code: EXIT_OK, text: out.render(format), message: None })
}

/// Values of one engine on the compared sites.
struct Side {
    values: Vec<f64>,
    halfwidth: Option<Vec<f64>>,
    converged: bool,
}

fn cumulative(pmf: &[(i64, f64)], x: i64) -> f64 {
    pmf.iter().filter(|e| e.0 <= x).map(|e| e.1).sum()
}

#[allow(clippy::too_many_arguments)]
fn side(
    label: &str,
    engine: EngineSel,
    o: &Opts,
    quantity: Quantity,
    xs: &[i64],
    params: RateParams,
    t: f64,
    h: &mut Header,
) -> Res<Side> {
    let (a, b) = (xs[0], xs[xs.len() - 1]);
    match engine {
        EngineSel::Graded | EngineSel::Nested | EngineSel::Fredholm => {
            let kind = if quantity == Quantity::Pmf { StepKind::Pmf } else { StepKind::Cdf };
            let spec = series_spec(o, &params, engine, h)?;
            h.diag(&format!("{label}_spec"), describe(engine, &spec));
            let tab = StepSeries::new(params, spec).map_err(s)?.with_executor(Rayon).table(kind, a, b, t).map_err(s)?;
            Ok(Side { values: tab.values(), halfwidth: None, converged: tab.converged })
        }
        EngineSel::Tasep => {
            let (values, tab) = tasep_values(o, quantity, a, b, t, h)?;
            h.diag(&format!("{label}_spec"), format!("engine=tasep kmax={} resolution={}", o.kmax.unwrap_or(200), tab.entries.iter().map(|e| e.1.resolution).max().unwrap_or(0)));
            Ok(Side { values, halfwidth: None, converged: tab.converged })
        }
        EngineSel::Ctmc => {
            let run = chain(o, params, t, h)?;
            h.diag(&format!("{label}_spec"), format!("engine=ctmc window={} states={}", run.window, run.states));
            let _ = run.boundary_mass;
            let values = xs
                .iter()
                .map(|&x| match quantity {
                    Quantity::Pmf => run.pmf.iter().find(|e| e.0 == x).map_or(0.0, |e| e.1),
                    _ => cumulative(&run.pmf, x),
                })
                .collect();
            Ok(Side { values, halfwidth: None, converged: true })
        }
        EngineSel::Simulate => {
            let r = simulate(o, &params, t, h)?;
            h.diag(&format!("{label}_spec"), format!("engine=simulate paths={} seed={}", r.n_paths, r.seed));
            h.diag("boundary_touch_rate", num(r.boundary_touch_rate));
            let (values, hw): (Vec<f64>, Vec<f64>) = xs
                .iter()
                .map(|&x| match quantity {
                    Quantity::Pmf => (r.freq(x), r.halfwidth(x)),
                    _ => {
                        let f: f64 = r.pmf_hat.range(..=x).map(|e| e.1).sum();
                        (f, halfwidth(f, r.n_paths))
                    }
                })
                .unzip();
            Ok(Side { values, halfwidth: Some(hw), converged: true })
        }
    }
}

fn cmd_compare(o: &Opts) -> Res<Report> {
    let mut h = Header::new("compare");
    let ea = o.a.unwrap_or(EngineSel::Graded);
    let eb = o.b.unwrap_or(EngineSel::Ctmc);
    h.arg("a", ea.name());
    h.arg("b", eb.name());
    let quantity = o.quantity.unwrap_or(Quantity::Pmf);
    if !matches!(quantity, Quantity::Pmf | Quantity::Cdf) {
        return Err(format!("compare works on pmf or cdf, not {}", quantity.name()));
    }
    h.arg("quantity", quantity.name());
    let tasep_only = ea == EngineSel::Tasep && eb == EngineSel::Tasep;
    let params = if tasep_only { RateParams::tasep() } else { rates(o, &mut h)? };
    let t = time(o, &mut h)?;
    let mc = ea == EngineSel::Simulate || eb == EngineSel::Simulate;
    let exact = ea == EngineSel::Ctmc || eb == EngineSel::Ctmc;
    let default_range = if mc {
        (-5, 5)
    } else if exact {
        let w = match &o.window {
            Some(text) => Window::parse(text)?,
            None => Window::new(-6, 6)?,
        };
        (w.left, w.right)
    } else {
        let l = default_half_width(t);
        (-l, l)
    };
    let (a, b) = x_range(o, default_range, &mut h)?;
    let xs: Vec<i64> = (a..=b).collect();
    let (metric, default_tol) = if mc {
        ("max_halfwidths", 4.0)
    } else if exact && quantity == Quantity::Pmf {
        ("total_variation", 1e-3)
    } else {
        ("max_abs_diff", 1e-8)
    };
    let tol = o.tol.unwrap_or(default_tol);
    h.arg("tol", num(tol));
    let format = format_of(o, &mut h);
    // Engine settings are echoed only when given, since their defaults differ
    // between engines; the resolved settings go to the diagnostics.
    let explicit = [
        ("kmax", o.kmax.map(|v| v.to_string())),
        ("R", o.radius.map(num)),
        ("M", o.nodes.map(|v| v.to_string())),
        ("precision", o.precision.map(|v| if v == PrecisionSel::Dd { "dd" } else { "f64" }.to_string())),
        ("contour-entries", o.contour_entries.map(|v| v.to_string())),
        ("window", o.window.clone()),
        ("paths", o.paths.map(|v| v.to_string())),
        ("seed", o.seed.map(|v| v.to_string())),
    ];
    for (flag, v) in explicit {
        if let Some(v) = v {
            h.arg(flag, v);
        }
    }
    h.frozen = true;
    let mut sub = o.clone();
    sub.tol = None;
    let sa = side("a", ea, &sub, quantity, &xs, params, t, &mut h)?;
    let sb = side("b", eb, &sub, quantity, &xs, params, t, &mut h)?;
    let diffs: Vec<f64> = sa.values.iter().zip(&sb.values).map(|(u, v)| (u - v).abs()).collect();
    let max_diff = diffs.iter().copied().fold(0.0, f64::max);
    let tv = 0.5 * diffs.iter().sum::<f64>();
    let hw: Option<Vec<f64>> = match (&sa.halfwidth, &sb.halfwidth) {
        (Some(u), Some(v)) => Some(u.iter().zip(v).map(|(x, y)| x.hypot(*y)).collect()),
        (Some(u), None) | (None, Some(u)) => Some(u.clone()),
        (None, None) => None,
    };
    let deviations: Option<Vec<f64>> = hw.as_ref().map(|hw| {
        diffs
            .iter()
            .zip(hw)
            .map(|(d, w)| if *d == 0.0 { 0.0 } else if *w == 0.0 { f64::INFINITY } else { d / w })
            .collect()
    });
    let value = match metric {
        "max_halfwidths" => deviations.as_ref().map_or(0.0, |d| d.iter().copied().fold(0.0, f64::max)),
        "total_variation" => tv,
        _ => max_diff,
    };
    let pass = value <= tol;
    h.diag("metric", metric);
    h.diag("metric_value", num(value));
    h.diag("max_abs_diff", num(max_diff));
    if quantity == Quantity::Pmf {
        h.diag("total_variation", num(tv));
    }
    if let Some(d) = &deviations {
        let inside = d.iter().filter(|v| **v <= 1.0).count();
        h.diag("ci99_coverage", format!("{inside}/{}", d.len()));
    }
    h.diag("converged_a", sa.converged);
    h.diag("converged_b", sb.converged);
    h.diag("pass", pass);
    let mut cols = vec!["x", ea.name(), eb.name(), "abs_diff"];
    if hw.is_some() {
        cols.push("ci99_halfwidth");
        cols.push("halfwidths");
    }
    // Identical engine names would give ambiguous column labels.
    let (na, nb) = (format!("a_{}", ea.name()), format!("b_{}", eb.name()));
    if ea == eb {
        cols[1] = &na;
        cols[2] = &nb;
    }
    let mut out = h.into_table(&cols);
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![sa.values[i], sb.values[i], diffs[i]];
        if let (Some(hw), Some(d)) = (&hw, &deviations) {
            row.push(hw[i]);
            row.push(d[i]);
        }
        out.row(x, row);
    }
    let code = if pass { EXIT_OK } else { EXIT_FAILED };
    let message = (!pass).then(|| format!("{metric} = {} exceeds {}", num(value), num(tol)));
    Ok(Report { code, text: out.render(format), message })
}

fn cmd_check(suite: Suite, inject_sign_flip: bool) -> Res<Report> {
    let coef = suites::coefficient_fn(inject_sign_flip);
    let mut reports = Vec::new();
    if matches!(suite, Suite::Identities | Suite::All) {
        reports.push(suites::identities(coef));
    }
    if matches!(suite, Suite::Quadrature | Suite::All) {
        reports.push(suites::quadrature());
    }
    let pass = reports.iter().all(|r| r.pass);
    let summary = json!({ "pass": pass, "inject_sign_flip": inject_sign_flip, "suites": reports });
    let mut text = serde_json::to_string_pretty(&summary).map_err(s)?;
    text.push('\n');
    let code = if pass { EXIT_OK } else { EXIT_FAILED };
    Ok(Report { code, text, message: (!pass).then(|| "identity suite failed".to_string()) })
}

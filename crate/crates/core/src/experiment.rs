//! Config-driven experiment runner.
//!
//! A config is a list of `key=value` lines; `#` starts a comment. Every key is
//! optional. The run evaluates one row per grid point (in parallel, assembled
//! in grid order) and writes `<output>` as CSV, optionally with an SVG plot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dtmc::{self, AssocDtmc};
use crate::error::{Error, Result};
use crate::geometry::{FalseAssocSet, ScanConfig};
use crate::mc::{self, LambdaLaw, TrialPlan};
use crate::multi_fa::{self, MomentVariant};
use crate::single_fa::{self, IndicatorApprox, RandomLambda};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SweepLambda,
    SweepN,
    FirstOrder,
    RandomLambda,
    MultiFa,
    Dtmc,
    OracleCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::SweepLambda,
        Self::SweepN,
        Self::FirstOrder,
        Self::RandomLambda,
        Self::MultiFa,
        Self::Dtmc,
        Self::OracleCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SweepLambda => "sweep-lambda",
            Self::SweepN => "sweep-n",
            Self::FirstOrder => "first-order",
            Self::RandomLambda => "random-lambda",
            Self::MultiFa => "multi-fa",
            Self::Dtmc => "dtmc",
            Self::OracleCompare => "oracle-compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn default_methods(self) -> Vec<Method> {
        use Method::*;
        match self {
            Self::SweepLambda | Self::SweepN | Self::RandomLambda => vec![Exact, Prop2, Mc],
            Self::FirstOrder => vec![Exact, Prop2, FirstOrder, SecondOrder],
            Self::MultiFa => vec![Chi2, Normal, Exponential, Mc],
            Self::Dtmc => vec![Mc],
            Self::OracleCompare => vec![Exact, Prop2, FirstOrder, SecondOrder, Chi2, Normal, Mc],
        }
    }

    fn allowed(self, m: Method) -> bool {
        use Method::*;
        match self {
            Self::SweepLambda | Self::SweepN | Self::FirstOrder | Self::RandomLambda => {
                matches!(m, Exact | Prop2 | FirstOrder | SecondOrder | Mc)
            }
            Self::MultiFa => matches!(m, Chi2 | Normal | Exponential | Mc),
            Self::Dtmc => m == Mc,
            Self::OracleCompare => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Prop2,
    FirstOrder,
    SecondOrder,
    Chi2,
    Normal,
    Exponential,
    Mc,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Self::Exact,
        Self::Prop2,
        Self::FirstOrder,
        Self::SecondOrder,
        Self::Chi2,
        Self::Normal,
        Self::Exponential,
        Self::Mc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Prop2 => "prop2",
            Self::FirstOrder => "first-order",
            Self::SecondOrder => "second-order",
            Self::Chi2 => "chi2",
            Self::Normal => "normal",
            Self::Exponential => "exponential",
            Self::Mc => "mc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Inclusive arithmetic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn single(v: f64) -> Self {
        Self { start: v, stop: v, step: 1.0 }
    }

    /// Points `start + i·step` up to `stop` (with a 1e-9 relative slack),
    /// rounded to 12 decimals so that 1 + 7·0.1 prints as 1.7.
    pub fn points(&self) -> Vec<f64> {
        if self.start == self.stop {
            return vec![self.start];
        }
        let n = ((self.stop - self.start) / self.step * (1.0 + 1e-9)).floor() as usize;
        (0..=n).map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub methods: Vec<Method>,
    pub n_scans: usize,
    pub dt: f64,
    /// Scan carrying the false measurement; defaults to the last scan.
    pub fa_scan: Option<usize>,
    pub lambda: Grid,
    pub n_grid: Grid,
    pub k: usize,
    pub p_fa: Grid,
    pub horizon: u32,
    pub n_steps: usize,
    pub support_k: f64,
    pub sigma0: f64,
    pub rate: f64,
    pub series_terms: usize,
    pub variant: MomentVariant,
    pub trials: u64,
    pub seed: u64,
    pub output: Option<String>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

pub const KEYS: [&str; 26] = [
    "experiment",
    "methods",
    "n_scans",
    "dt",
    "fa_scan",
    "lambda",
    "lambda_min",
    "lambda_max",
    "lambda_step",
    "n_min",
    "n_max",
    "n_step",
    "k",
    "p_fa",
    "p_fa_min",
    "p_fa_max",
    "p_fa_step",
    "horizon",
    "n_steps",
    "support_k",
    "sigma0",
    "rate",
    "series_terms",
    "variant",
    "trials",
    "seed",
];

/// `(line, key, value)` triples; comments and blank lines dropped.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected key=value, got `{body}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) && k != "output" {
            return Err(Error::Parse { line, message: format!("unknown key `{k}`") });
        }
        if v.is_empty() {
            return Err(Error::Parse { line, message: format!("empty value for `{k}`") });
        }
        if out.iter().any(|(_, seen, _)| seen == k) {
            return Err(Error::Parse { line, message: format!("duplicate key `{k}`") });
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, message: format!("`{key}`: cannot parse `{v}`") })
}

fn range_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::SweepLambda,
            methods: ExperimentKind::SweepLambda.default_methods(),
            n_scans: 40,
            dt: 1.0,
            fa_scan: None,
            lambda: Grid { start: 1.0, stop: 4.0, step: 0.1 },
            n_grid: Grid { start: 10.0, stop: 80.0, step: 5.0 },
            k: 2,
            p_fa: Grid { start: 0.01, stop: 0.3, step: 0.01 },
            horizon: 20,
            n_steps: 10,
            support_k: 3.0,
            sigma0: 1.0,
            rate: 0.5,
            series_terms: 10,
            variant: MomentVariant::Exact,
            trials: 100_000,
            seed: 42,
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_str_with(text: &str, ov: &Overrides) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut s = Self::default();
        let mut methods: Option<Vec<Method>> = None;
        let mut lam_single: Option<f64> = None;
        let mut lam_range = (None, None, None);
        let mut p_single: Option<f64> = None;
        let mut p_range = (None, None, None);
        let mut exp_name: Option<(usize, String)> = None;
        for (line, k, v) in &pairs {
            let line = *line;
            match k.as_str() {
                "experiment" => exp_name = Some((line, v.clone())),
                "methods" => {
                    let mut ms = Vec::new();
                    for name in v.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                        let m = Method::parse(name)
                            .ok_or_else(|| Error::Parse { line, message: format!("unknown method `{name}`") })?;
                        if !ms.contains(&m) {
                            ms.push(m);
                        }
                    }
                    methods = Some(ms);
                }
                "n_scans" => s.n_scans = num(line, k, v)?,
                "dt" => s.dt = num(line, k, v)?,
                "fa_scan" => s.fa_scan = Some(num(line, k, v)?),
                "lambda" => lam_single = Some(num(line, k, v)?),
                "lambda_min" => lam_range.0 = Some(num(line, k, v)?),
                "lambda_max" => lam_range.1 = Some(num(line, k, v)?),
                "lambda_step" => lam_range.2 = Some(num(line, k, v)?),
                "n_min" => s.n_grid.start = num::<usize>(line, k, v)? as f64,
                "n_max" => s.n_grid.stop = num::<usize>(line, k, v)? as f64,
                "n_step" => s.n_grid.step = num::<usize>(line, k, v)? as f64,
                "k" => s.k = num(line, k, v)?,
                "p_fa" => p_single = Some(num(line, k, v)?),
                "p_fa_min" => p_range.0 = Some(num(line, k, v)?),
                "p_fa_max" => p_range.1 = Some(num(line, k, v)?),
                "p_fa_step" => p_range.2 = Some(num(line, k, v)?),
                "horizon" => s.horizon = num(line, k, v)?,
                "n_steps" => s.n_steps = num(line, k, v)?,
                "support_k" => s.support_k = num(line, k, v)?,
                "sigma0" => s.sigma0 = num(line, k, v)?,
                "rate" => s.rate = num(line, k, v)?,
                "series_terms" => s.series_terms = num(line, k, v)?,
                "variant" => {
                    s.variant = match v.as_str() {
                        "exact" => MomentVariant::Exact,
                        "squared-sum" => MomentVariant::SquaredSum,
                        "diagonal-only" => MomentVariant::DiagonalOnly,
                        _ => return Err(Error::Parse { line, message: format!("unknown variant `{v}`") }),
                    }
                }
                "trials" => s.trials = num::<f64>(line, k, v).and_then(|t| as_count(line, k, t))?,
                "seed" => s.seed = num(line, k, v)?,
                "output" => s.output = Some(v.clone()),
                _ => unreachable!("keys are checked in parse_pairs"),
            }
        }
        let name = ov.experiment.clone().or(exp_name.as_ref().map(|e| e.1.clone()));
        if let Some(name) = name {
            s.experiment = ExperimentKind::parse(&name).ok_or_else(|| match (&ov.experiment, &exp_name) {
                (None, Some((line, _))) => Error::Parse { line: *line, message: format!("unknown experiment `{name}`") },
                _ => range_err("experiment", format!("unknown experiment `{name}`")),
            })?;
        }
        if s.experiment == ExperimentKind::SweepN && lam_range == (None, None, None) && lam_single.is_none() {
            lam_single = Some(2.0);
        }
        if let Some(l) = lam_single {
            if lam_range != (None, None, None) {
                return Err(range_err("lambda", "give either `lambda` or a lambda_min/max/step range"));
            }
            s.lambda = Grid::single(l);
        } else {
            s.lambda = Grid {
                start: lam_range.0.unwrap_or(s.lambda.start),
                stop: lam_range.1.unwrap_or(s.lambda.stop),
                step: lam_range.2.unwrap_or(s.lambda.step),
            };
        }
        if let Some(p) = p_single {
            if p_range != (None, None, None) {
                return Err(range_err("p_fa", "give either `p_fa` or a p_fa_min/max/step range"));
            }
            s.p_fa = Grid::single(p);
        } else {
            s.p_fa = Grid {
                start: p_range.0.unwrap_or(s.p_fa.start),
                stop: p_range.1.unwrap_or(s.p_fa.stop),
                step: p_range.2.unwrap_or(s.p_fa.step),
            };
        }
        s.methods = methods.unwrap_or_else(|| s.experiment.default_methods());
        if let Some(seed) = ov.seed {
            s.seed = seed;
        }
        if let Some(t) = ov.trials {
            s.trials = t;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |key: &str, v: f64, lo: f64, hi: f64| {
            if v.is_finite() && (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(range_err(key, format!("{v} outside [{lo}, {hi}]")))
            }
        };
        let check_grid = |key: &str, g: &Grid, lo: f64, hi: f64| -> Result<()> {
            in_range(&format!("{key}_min"), g.start, lo, hi)?;
            in_range(&format!("{key}_max"), g.stop, lo, hi)?;
            if g.stop < g.start {
                return Err(range_err(key, "empty grid (max < min)"));
            }
            if g.start != g.stop && !(g.step > 0.0 && g.step.is_finite()) {
                return Err(range_err(&format!("{key}_step"), "step must be positive"));
            }
            Ok(())
        };
        in_range("n_scans", self.n_scans as f64, 5.0, 200.0)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(range_err("dt", "must be positive"));
        }
        if let Some(l) = self.fa_scan {
            in_range("fa_scan", l as f64, 0.0, self.n_scans as f64)?;
        }
        check_grid("lambda", &self.lambda, 0.0, 10.0)?;
        check_grid("n", &self.n_grid, 5.0, 200.0)?;
        check_grid("p_fa", &self.p_fa, 0.0, 1.0)?;
        if self.experiment == ExperimentKind::Dtmc && !(self.p_fa.start > 0.0 && self.p_fa.stop < 1.0) {
            return Err(range_err("p_fa", "the chain analysis needs 0 < p_fa < 1"));
        }
        if self.k == 0 || self.k >= self.n_scans {
            return Err(range_err("k", format!("{} outside [1, n_scans)", self.k)));
        }
        if !(1..=64).contains(&self.n_steps) {
            return Err(range_err("n_steps", "must be in 1..=64"));
        }
        in_range("support_k", self.support_k, 0.5, 10.0)?;
        in_range("sigma0", self.sigma0, 0.0, 10.0)?;
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(range_err("rate", "must be positive"));
        }
        if self.series_terms == 0 {
            return Err(range_err("series_terms", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(range_err("trials", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(range_err("methods", "no methods selected"));
        }
        for m in &self.methods {
            if !self.experiment.allowed(*m) {
                return Err(range_err("methods", format!("`{}` is not available for {}", m.name(), self.experiment.name())));
            }
        }
        Ok(())
    }

    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}.csv", self.experiment.name()))
    }

    /// Grid abscissae in output order.
    pub fn xs(&self) -> Vec<f64> {
        match self.experiment {
            ExperimentKind::SweepN => self.n_grid.points(),
            ExperimentKind::Dtmc => self.p_fa.points(),
            _ => self.lambda.points(),
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let x = match self.experiment {
            ExperimentKind::SweepN => "n_scans",
            ExperimentKind::Dtmc => "p_fa",
            ExperimentKind::RandomLambda => "lambda0",
            _ => "lambda",
        };
        let mut cols = vec![x.to_string()];
        if self.experiment == ExperimentKind::Dtmc {
            cols.extend(DTMC_COLUMNS.iter().map(|c| c.to_string()));
        } else {
            cols.extend(self.methods.iter().filter(|m| **m != Method::Mc).map(|m| m.name().to_string()));
        }
        if self.methods.contains(&Method::Mc) {
            cols.push("mc_p".into());
            cols.push("mc_stderr".into());
        }
        cols
    }
}

fn as_count(line: usize, key: &str, t: f64) -> Result<u64> {
    if t >= 1.0 && t.fract() == 0.0 && t <= u64::MAX as f64 {
        Ok(t as u64)
    } else {
        Err(Error::Parse { line, message: format!("`{key}` must be a positive integer") })
    }
}

pub const DTMC_COLUMNS: [&str; 9] = [
    "pi4_product",
    "pi4_balance",
    "mean_intervisit4",
    "reach_spectral",
    "reach_power",
    "reach_stated",
    "reach_expansion_stated",
    "visits_closed",
    "visits_solve",
];

/// Parses a config file; unknown keys and out-of-range values are errors.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    parse_config_with(path, &Overrides::default())
}

pub fn parse_config_with(path: &Path, ov: &Overrides) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ExperimentSpec::from_str_with(&text, ov)
}

/// Evaluated table. Rows after a numerical failure are not computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Grid abscissa and error of the first failing row.
    pub failure: Option<(f64, Error)>,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        if let Some((x, e)) = &self.failure {
            let msg = e.to_string().replace([',', '\n'], ";");
            let _ = writeln!(s, "#ERROR,{x},{msg}");
        }
        s
    }
}

/// Evaluates every grid point. Rows are computed in parallel and kept in grid order.
pub fn evaluate(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let approx = single_fa::fit_gammas(spec.n_steps, spec.support_k)?;
    let xs = spec.xs();
    let results: Vec<Result<Vec<f64>>> = xs.par_iter().map(|&x| row(spec, &approx, x)).collect();
    let mut rows = Vec::with_capacity(xs.len());
    let mut failure = None;
    for (x, r) in xs.iter().zip(results) {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                failure = Some((*x, e));
                break;
            }
        }
    }
    Ok(ResultTable { columns: spec.columns(), rows, failure })
}

fn row(spec: &ExperimentSpec, approx: &IndicatorApprox, x: f64) -> Result<Vec<f64>> {
    let mut out = vec![x];
    match spec.experiment {
        ExperimentKind::Dtmc => {
            let d = AssocDtmc::new(x)?;
            let start = nalgebra::Vector3::new(1.0, 0.0, 0.0);
            let pi = dtmc::stationary(&d)?;
            let bal = dtmc::stationary_balance(&d)?;
            let reach = dtmc::reach_probability(&d, spec.horizon)?;
            out.extend([
                pi[3],
                bal[3],
                dtmc::mean_intervisit(&d, 3)?,
                reach.spectral,
                reach.power,
                reach.stated,
                reach.expansion_stated,
                dtmc::expected_transient_visits(&d, &start)?,
                dtmc::expected_transient_visits_solve(&d, &start)?,
            ]);
            if spec.methods.contains(&Method::Mc) {
                let sim = mc::simulate_absorption(2, x, 0, spec.trials, spec.horizon as u64, spec.seed)?;
                let e = sim.reach_within(spec.horizon as u64);
                out.extend([e.p_hat, e.stderr]);
            }
            return Ok(out);
        }
        ExperimentKind::SweepN => {
            let n = x as usize;
            let cfg = ScanConfig::new(n, spec.dt, spec.lambda.start)?;
            single_fa_row(spec, approx, &cfg, spec.fa_scan.unwrap_or(n).min(n), &mut out)?;
        }
        ExperimentKind::SweepLambda | ExperimentKind::FirstOrder | ExperimentKind::OracleCompare => {
            let cfg = ScanConfig::new(spec.n_scans, spec.dt, x)?;
            single_fa_row(spec, approx, &cfg, spec.fa_scan.unwrap_or(spec.n_scans), &mut out)?;
        }
        ExperimentKind::RandomLambda => {
            let cfg = ScanConfig::new(spec.n_scans, spec.dt, x)?;
            let l = spec.fa_scan.unwrap_or(spec.n_scans);
            let rl = RandomLambda::new(x, spec.sigma0)?;
            for m in &spec.methods {
                let v = match m {
                    Method::Exact => single_fa::random_lambda_exact(&rl, l, &cfg)?,
                    Method::Prop2 => single_fa::random_lambda_probability(&rl, l, &cfg, approx)?.value,
                    Method::FirstOrder => single_fa::first_order_coeffs(l, &cfg, approx)?.expectation(&rl),
                    Method::SecondOrder => single_fa::second_order_coeffs(l, &cfg, approx)?.expectation(&rl).clamp(0.0, 1.0),
                    _ => continue,
                };
                out.push(v);
            }
            if spec.methods.contains(&Method::Mc) {
                let plan = TrialPlan::single(cfg, l, spec.trials, spec.seed)?
                    .with_lambda_law(LambdaLaw::Normal { mean: x, sd: spec.sigma0 })?;
                let e = mc::simulate_single_fa(&plan)?;
                out.extend([e.p_hat, e.stderr]);
            }
        }
        ExperimentKind::MultiFa => {
            let cfg = ScanConfig::new(spec.n_scans, spec.dt, x)?;
            let fa = FalseAssocSet::last_scans(spec.k, x, &cfg)?;
            let mp = multi_fa::moment_params(&fa, &cfg, spec.variant)?;
            for m in &spec.methods {
                let v = match m {
                    Method::Chi2 => multi_fa::prob_chi2(spec.k, &mp)?,
                    Method::Normal => multi_fa::prob_normal(&mp)?.value,
                    Method::Exponential => multi_fa::prob_exponential(&mp, spec.rate, spec.series_terms)?.value,
                    _ => continue,
                };
                out.push(v);
            }
            if spec.methods.contains(&Method::Mc) {
                let plan = TrialPlan::multi(cfg, fa, spec.trials, spec.seed)?;
                let e = mc::simulate_multi_fa(&plan)?.estimate;
                out.extend([e.p_hat, e.stderr]);
            }
        }
    }
    Ok(out)
}

fn single_fa_row(spec: &ExperimentSpec, approx: &IndicatorApprox, cfg: &ScanConfig, l: usize, out: &mut Vec<f64>) -> Result<()> {
    let single_mp = || {
        let fa = FalseAssocSet::new(vec![l], vec![cfg.lambda()])?;
        multi_fa::moment_params(&fa, cfg, spec.variant)
    };
    for m in &spec.methods {
        let v = match m {
            Method::Exact => single_fa::exact_probability(l, cfg)?,
            Method::Prop2 => single_fa::closed_form_probability(l, cfg, approx)?.value,
            Method::FirstOrder => single_fa::first_order_probability(l, cfg, approx)?,
            Method::SecondOrder => single_fa::second_order_probability(l, cfg, approx)?.value,
            Method::Chi2 => multi_fa::prob_chi2(1, &single_mp()?)?,
            Method::Normal => multi_fa::prob_normal(&single_mp()?)?.value,
            Method::Exponential => multi_fa::prob_exponential(&single_mp()?, spec.rate, spec.series_terms)?.value,
            Method::Mc => continue,
        };
        out.push(v);
    }
    if spec.methods.contains(&Method::Mc) {
        let e = mc::simulate_single_fa(&TrialPlan::single(*cfg, l, spec.trials, spec.seed)?)?;
        out.extend([e.p_hat, e.stderr]);
    }
    Ok(())
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub table: ResultTable,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

impl RunReport {
    /// 0 on success, 2 when a row failed numerically.
    pub fn exit_code(&self) -> i32 {
        if self.table.failure.is_some() {
            2
        } else {
            0
        }
    }
}

/// Evaluates the experiment and writes the CSV (and SVG when `plot`) into `out_dir`.
pub fn run(spec: &ExperimentSpec, out_dir: &Path, plot: bool) -> Result<RunReport> {
    let table = evaluate(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join(spec.output_name());
    std::fs::write(&csv, table.to_csv())?;
    let svg = if plot {
        let p = csv.with_extension("svg");
        std::fs::write(&p, render_svg(&table, spec.experiment.name()))?;
        Some(p)
    } else {
        None
    };
    Ok(RunReport { table, csv, svg })
}

/// Exit code for an error that stopped the run before any output.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config { .. } | Error::Io(_) | Error::InvalidParameter { .. } | Error::IndexOutOfRange { .. } | Error::IndexNotInSet(_) | Error::InvalidSet(_) => 1,
        _ => 2,
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Line chart of every column against the first; `mc_p` is drawn as points
/// with ±2·stderr bars.
pub fn render_svg(table: &ResultTable, title: &str) -> String {
    let (w, h, pad) = (720.0, 440.0, 56.0);
    let series: Vec<usize> = (1..table.columns.len()).filter(|&i| table.columns[i] != "mc_stderr").collect();
    let xs: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let finite = |v: f64| v.is_finite();
    let ys: Vec<f64> = table.rows.iter().flat_map(|r| series.iter().map(move |&i| r[i])).filter(|v| finite(*v)).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * pad, h - 2.0 * pad);
    for t in 0..=4 {
        let fx = x0 + (x1 - x0) * t as f64 / 4.0;
        let fy = y0 + (y1 - y0) * t as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(fx), h - pad + 16.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, pad - 6.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, table.columns[0]);
    let stderr_col = table.columns.iter().position(|c| c == "mc_stderr");
    for (n, &i) in series.iter().enumerate() {
        let colour = PALETTE[n % PALETTE.len()];
        let name = &table.columns[i];
        if name == "mc_p" {
            for r in &table.rows {
                let (cx, cy) = (sx(r[0]), sy(r[i]));
                if let Some(j) = stderr_col {
                    let e = 2.0 * r[j];
                    let _ = writeln!(s, r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="{colour}"/>"#, sy(r[i] - e), sy(r[i] + e));
                }
                let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="2.5" fill="{colour}"/>"#);
            }
        } else {
            let pts: Vec<String> = table
                .rows
                .iter()
                .filter(|r| r[i].is_finite())
                .map(|r| format!("{:.1},{:.1}", sx(r[0]), sy(r[i])))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = pad + 14.0 + 16.0 * n as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{colour}">{name}</text>"#, w - pad - 110.0);
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> Result<ExperimentSpec> {
        ExperimentSpec::from_str_with(text, &Overrides::default())
    }

    #[test]
    fn empty_config_gives_defaults() {
        let s = spec("").unwrap();
        assert_eq!(s, ExperimentSpec::default());
        assert_eq!(s.xs().len(), 31);
        assert_eq!(s.columns(), ["lambda", "exact", "prop2", "mc_p", "mc_stderr"]);
    }

    #[test]
    fn range_and_parse_errors() {
        assert!(matches!(spec("n_scans=3"), Err(Error::Config { key, .. }) if key == "n_scans"));
        assert!(matches!(spec("# c\n\nbogus=1"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(spec("n_scans"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(spec("experiment=dtmc\nmethods=exact"), Err(Error::Config { .. })));
        assert!(matches!(spec("k=40"), Err(Error::Config { .. })));
        assert!(spec("lambda=2\nlambda_min=1").is_err());
    }

    #[test]
    fn dtmc_spec() {
        let s = spec("experiment=dtmc\np_fa=0.1").unwrap();
        assert_eq!(s.experiment, ExperimentKind::Dtmc);
        assert_eq!(s.xs(), vec![0.1]);
        assert_eq!(s.methods, vec![Method::Mc]);
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides { experiment: Some("sweep-n".into()), seed: Some(7), trials: Some(10) };
        let s = ExperimentSpec::from_str_with("experiment=dtmc\nseed=1", &ov).unwrap();
        assert_eq!((s.experiment, s.seed, s.trials), (ExperimentKind::SweepN, 7, 10));
        assert_eq!(s.lambda, Grid::single(2.0));
        assert_eq!(s.n_grid.points().len(), 15);
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(Grid { start: 1.0, stop: 4.0, step: 0.25 }.points().len(), 13);
        assert_eq!(Grid { start: 0.01, stop: 0.3, step: 0.01 }.points().len(), 30);
    }

    #[test]
    fn error_row_marker() {
        let t = ResultTable {
            columns: vec!["x".into(), "a".into()],
            rows: vec![vec![1.0, 0.5]],
            failure: Some((2.0, Error::NonConvergence { estimate: 0.1, error: 1.0 })),
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("x,a\n1,0.5\n#ERROR,2,"));
        assert_eq!(csv.lines().last().unwrap().split(',').count(), 3);
    }
}

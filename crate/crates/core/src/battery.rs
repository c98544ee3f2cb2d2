//! Batteries of bound checks over signals x windows x matrices.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::params::ParamMatrix;
use crate::signal::{gaussian, rect, Grid, SampledSignal};
use crate::uncertainty::{
    stern_check, theorem1_check, theorem2_check, theorem3_subgrid, Bound, BoundReport, Thm3Report,
    THM3_SUBGRID,
};

/// Features narrower than this many samples count as unresolved.
pub const MIN_SAMPLES_PER_WIDTH: f64 = 4.0;

/// Gaussian envelope radius (in widths) beyond which the amplitude is
/// below `1e-8` of the peak.
const SUPPORT_WIDTHS: f64 = 6.1;

/// A test signal or window, as written in configs and on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        chirp_rate: f64,
        #[serde(default)]
        carrier: f64,
    },
    Rect {
        #[serde(default)]
        center: f64,
        half_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl SignalSpec {
    pub fn gaussian(center: f64, width: f64, chirp_rate: f64, carrier: f64) -> Self {
        SignalSpec::Gaussian { center, width, chirp_rate, carrier }
    }

    pub fn build(&self, grid: Grid) -> Result<SampledSignal> {
        match *self {
            SignalSpec::Gaussian { center, width, chirp_rate, carrier } => {
                let s = gaussian(grid, center, width, chirp_rate, carrier)?;
                let step = self.max_phase_step(&grid);
                if step > std::f64::consts::PI {
                    return Err(Error::Undersampled(step));
                }
                Ok(s)
            }
            SignalSpec::Rect { center, half_width } => rect(grid, center, half_width),
        }
    }

    /// Largest phase advance per sample over the significant support.
    pub fn max_phase_step(&self, grid: &Grid) -> f64 {
        match *self {
            SignalSpec::Gaussian { center, width, chirp_rate, carrier } => {
                let lo = (center - SUPPORT_WIDTHS * width).max(grid.t0()) - center;
                let hi = (center + SUPPORT_WIDTHS * width).min(grid.last()) - center;
                let freq = (chirp_rate * lo + carrier).abs().max((chirp_rate * hi + carrier).abs());
                freq * grid.dt()
            }
            SignalSpec::Rect { .. } => 0.0,
        }
    }

    /// Reasons the grid cannot resolve this signal, if any.
    pub fn resolution_issue(&self, grid: &Grid) -> Option<String> {
        let scale = match *self {
            SignalSpec::Gaussian { width, .. } => width,
            SignalSpec::Rect { half_width, .. } => 2.0 * half_width,
        };
        if scale < MIN_SAMPLES_PER_WIDTH * grid.dt() {
            return Some(format!("{self}: width {scale} spans fewer than {MIN_SAMPLES_PER_WIDTH} samples"));
        }
        if self.max_phase_step(grid) > std::f64::consts::FRAC_PI_2 {
            return Some(format!("{self}: phase advances more than pi/2 per sample"));
        }
        match self.build(*grid) {
            Ok(s) => s.truncation_warning().map(|w| format!("{self}: {w}")),
            Err(e) => Some(format!("{self}: {e}")),
        }
    }
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalSpec::Gaussian { center, width, chirp_rate, carrier } => write!(
                f,
                "gaussian:center={center},width={width},chirp={chirp_rate},carrier={carrier}"
            ),
            SignalSpec::Rect { center, half_width } => {
                write!(f, "rect:center={center},half_width={half_width}")
            }
        }
    }
}

/// `gaussian[:center=..,width=..,chirp=..,carrier=..]` or
/// `rect:center=..,half_width=..`.
impl FromStr for SignalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{part}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{v}' for '{k}'")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            kv.push((k.trim(), v));
        }
        let get = |names: &[&str], default: Option<f64>| -> Result<f64> {
            kv.iter()
                .find(|(k, _)| names.contains(k))
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::Parse(format!("'{kind}' needs '{}'", names[0])))
        };
        let check = |allowed: &[&str]| -> Result<()> {
            match kv.iter().find(|(k, _)| !allowed.contains(k)) {
                Some((k, _)) => Err(Error::Parse(format!("unknown parameter '{k}' for '{kind}'"))),
                None => Ok(()),
            }
        };
        match kind {
            "gaussian" | "gauss" => {
                check(&["center", "width", "chirp", "chirp_rate", "carrier"])?;
                Ok(SignalSpec::Gaussian {
                    center: get(&["center"], Some(0.0))?,
                    width: get(&["width"], Some(1.0))?,
                    chirp_rate: get(&["chirp", "chirp_rate"], Some(0.0))?,
                    carrier: get(&["carrier"], Some(0.0))?,
                })
            }
            "rect" => {
                check(&["center", "half_width"])?;
                Ok(SignalSpec::Rect {
                    center: get(&["center"], Some(0.0))?,
                    half_width: get(&["half_width"], None)?,
                })
            }
            other => Err(Error::Parse(format!("unknown signal preset '{other}'"))),
        }
    }
}

/// A matrix written as a preset name, `"a,b,c,d"`, or a 4-element array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixSpec(pub ParamMatrix);

impl Serialize for MatrixSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Entries([f64; 4]),
        }
        let m = match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse(),
            Raw::Entries(v) => ParamMatrix::try_from(v),
        };
        m.map(MatrixSpec).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremSel {
    Stern,
    #[serde(alias = "1")]
    Theorem1,
    #[serde(alias = "2")]
    Theorem2,
    #[serde(alias = "3")]
    Theorem3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub t0: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.t0, self.dt)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: 1024, t0: -8.0, dt: 16.0 / 1024.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    #[serde(default)]
    pub grid: GridSpec,
    pub signals: Vec<SignalSpec>,
    pub windows: Vec<SignalSpec>,
    pub matrices: Vec<MatrixSpec>,
    pub theorems: Vec<TheoremSel>,
    #[serde(default)]
    pub d_prime: f64,
}

impl BatteryConfig {
    /// Three signals, three windows, four matrices, Theorems 1 and 2.
    pub fn default_battery() -> Self {
        let frft = ParamMatrix::fractional(std::f64::consts::PI / 6.0);
        Self {
            grid: GridSpec::default(),
            signals: vec![
                SignalSpec::gaussian(0.0, 1.0, 0.0, 0.0),
                SignalSpec::gaussian(0.0, 1.0, 2.0, 0.0),
                SignalSpec::gaussian(1.5, 0.8, 0.0, 3.0),
            ],
            windows: vec![
                SignalSpec::gaussian(0.0, 1.0, 0.0, 0.0),
                SignalSpec::gaussian(0.0, 0.5, 0.0, 0.0),
                SignalSpec::gaussian(0.5, 1.0, 0.0, 0.0),
            ],
            matrices: [
                ParamMatrix::fourier(),
                frft,
                ParamMatrix::new(1.0, 2.0, 0.5, 2.0).expect("unimodular"),
                ParamMatrix::new(2.0, 1.0, 1.0, 1.0).expect("unimodular"),
            ]
            .into_iter()
            .map(MatrixSpec)
            .collect(),
            theorems: vec![TheoremSel::Theorem1, TheoremSel::Theorem2],
            d_prime: 0.0,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Signals or windows the grid does not resolve (too narrow, phase
    /// aliased, or not decayed at the edges).
    pub fn resolution_issues(&self) -> Vec<String> {
        let grid = match self.grid.grid() {
            Ok(g) => g,
            Err(e) => return vec![e.to_string()],
        };
        let mut issues = Vec::new();
        for issue in self.signals.iter().chain(&self.windows).filter_map(|s| s.resolution_issue(&grid)) {
            if !issues.contains(&issue) {
                issues.push(issue);
            }
        }
        issues
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Bound(BoundReport),
    Theorem3 {
        reports: Vec<Thm3Report>,
        all_hold_commutator_consistent: bool,
        all_hold_unit_kappa: bool,
    },
    Errored {
        message: String,
        /// Configuration problem rather than a numerical one.
        usage: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryEntry {
    pub theorem: TheoremSel,
    pub signal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    pub matrix: ParamMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix2: Option<ParamMatrix>,
    pub outcome: Outcome,
}

impl BatteryEntry {
    pub fn passed(&self) -> Option<bool> {
        match &self.outcome {
            Outcome::Bound(r) => Some(r.passed),
            Outcome::Theorem3 { all_hold_commutator_consistent, .. } => {
                Some(*all_hold_commutator_consistent)
            }
            Outcome::Errored { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TheoremSummary {
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    /// Smallest `relative_slack` among completed bound reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_slack: Option<f64>,
    /// Theorem 3 only: cells where each constant held / was evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Thm3Tally>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Thm3Tally {
    pub evaluated: usize,
    pub hold_commutator_consistent: usize,
    pub hold_unit_kappa: usize,
    pub hold_normalized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatterySummary {
    pub total: usize,
    pub stern: TheoremSummary,
    pub theorem1: TheoremSummary,
    pub theorem2: TheoremSummary,
    pub theorem3: TheoremSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub entries: Vec<BatteryEntry>,
    pub summary: BatterySummary,
    /// Non-empty when the grid does not resolve every signal and window;
    /// bound failures are then not conclusive.
    pub resolution_issues: Vec<String>,
}

impl BatteryReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed() == Some(true))
    }

    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(|e| e.passed() == Some(false))
    }

    pub fn any_errored(&self) -> bool {
        self.entries.iter().any(|e| e.passed().is_none())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Human-readable per-theorem table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>7} {:>7} {:>8} {:>14}", "theorem", "passed", "failed", "errored", "min slack");
        let s = &self.summary;
        for (name, t) in [("stern", &s.stern), ("theorem1", &s.theorem1), ("theorem2", &s.theorem2), ("theorem3", &s.theorem3)] {
            if t.passed + t.failed + t.errored == 0 {
                continue;
            }
            let slack = t.min_slack.map_or_else(|| "-".to_owned(), |x| format!("{x:.6e}"));
            let _ = writeln!(out, "{name:<10} {:>7} {:>7} {:>8} {slack:>14}", t.passed, t.failed, t.errored);
            if let Some(c) = t.cells {
                let _ = writeln!(
                    out,
                    "  theorem3 cells: {} evaluated; lhs >= rhs with kappa = b in {}, with kappa = 1 in {}, \
                     unit-energy local signal (kappa = b) in {}",
                    c.evaluated, c.hold_commutator_consistent, c.hold_unit_kappa, c.hold_normalized
                );
            }
        }
        for issue in &self.resolution_issues {
            let _ = writeln!(out, "unresolved: {issue}");
        }
        out
    }
}

struct Job {
    theorem: TheoremSel,
    signal: usize,
    window: Option<usize>,
    matrix: usize,
    matrix2: Option<usize>,
}

fn jobs(config: &BatteryConfig) -> Vec<Job> {
    let nm = config.matrices.len();
    let mut out = Vec::new();
    for &theorem in &config.theorems {
        for signal in 0..config.signals.len() {
            if theorem == TheoremSel::Stern {
                for matrix in 0..nm {
                    out.push(Job { theorem, signal, window: None, matrix, matrix2: None });
                }
                continue;
            }
            for window in 0..config.windows.len() {
                for matrix in 0..nm {
                    // second domain: the next matrix in the list, cyclically
                    let matrix2 = (theorem == TheoremSel::Theorem2).then_some((matrix + 1) % nm);
                    out.push(Job { theorem, signal, window: Some(window), matrix, matrix2 });
                }
            }
        }
    }
    out
}

fn run_job(config: &BatteryConfig, grid: Grid, job: &Job) -> Outcome {
    let result = (|| -> Result<Outcome> {
        let f = config.signals[job.signal].build(grid)?;
        let g = job.window.map(|w| config.windows[w].build(grid)).transpose()?;
        let a = config.matrices[job.matrix].0;
        let sig_id = config.signals[job.signal].to_string();
        let win_id = job.window.map(|w| config.windows[w].to_string());
        let dp = config.d_prime;
        let report = match (job.theorem, g) {
            (TheoremSel::Stern, _) => stern_check(&f, &a)?,
            (TheoremSel::Theorem1, Some(g)) => theorem1_check(&f, &g, &a, dp)?,
            (TheoremSel::Theorem2, Some(g)) => {
                let b = config.matrices[job.matrix2.expect("theorem 2 job has a second matrix")].0;
                theorem2_check(&f, &g, &a, &b, dp)?
            }
            (TheoremSel::Theorem3, Some(g)) => {
                let reports = theorem3_subgrid(&f, &g, &a, THM3_SUBGRID)?;
                return Ok(Outcome::Theorem3 {
                    all_hold_commutator_consistent: reports.iter().all(|r| r.holds_commutator_consistent),
                    all_hold_unit_kappa: reports.iter().all(|r| r.holds_unit_kappa),
                    reports,
                });
            }
            (_, None) => unreachable!("windowed theorems always carry a window"),
        };
        let mut report = report;
        report.context = report.context.with_ids(&sig_id, win_id.as_deref());
        Ok(Outcome::Bound(report))
    })();
    result.unwrap_or_else(|e| Outcome::Errored { usage: e.is_usage(), message: e.to_string() })
}

/// Runs every entry of the battery; failures of one entry do not stop the
/// others and the order follows the config.
pub fn run_battery(config: &BatteryConfig) -> Result<BatteryReport> {
    let grid = config.grid.grid()?;
    let entries: Vec<BatteryEntry> = jobs(config)
        .par_iter()
        .map(|job| BatteryEntry {
            theorem: job.theorem,
            signal: config.signals[job.signal].to_string(),
            window: job.window.map(|w| config.windows[w].to_string()),
            matrix: config.matrices[job.matrix].0,
            matrix2: job.matrix2.map(|m| config.matrices[m].0),
            outcome: run_job(config, grid, job),
        })
        .collect();
    let summary = summarize(&entries);
    Ok(BatteryReport { entries, summary, resolution_issues: config.resolution_issues() })
}

fn summarize(entries: &[BatteryEntry]) -> BatterySummary {
    let mut s = BatterySummary {
        total: entries.len(),
        stern: TheoremSummary::default(),
        theorem1: TheoremSummary::default(),
        theorem2: TheoremSummary::default(),
        theorem3: TheoremSummary::default(),
    };
    for e in entries {
        let t = match e.theorem {
            TheoremSel::Stern => &mut s.stern,
            TheoremSel::Theorem1 => &mut s.theorem1,
            TheoremSel::Theorem2 => &mut s.theorem2,
            TheoremSel::Theorem3 => &mut s.theorem3,
        };
        match e.passed() {
            Some(true) => t.passed += 1,
            Some(false) => t.failed += 1,
            None => t.errored += 1,
        }
        match &e.outcome {
            Outcome::Bound(r) => {
                t.min_slack = Some(t.min_slack.map_or(r.relative_slack, |m: f64| m.min(r.relative_slack)));
            }
            Outcome::Theorem3 { reports, .. } => {
                let c = t.cells.get_or_insert_with(Thm3Tally::default);
                c.evaluated += reports.len();
                c.hold_commutator_consistent += reports.iter().filter(|r| r.holds_commutator_consistent).count();
                c.hold_unit_kappa += reports.iter().filter(|r| r.holds_unit_kappa).count();
                c.hold_normalized += reports.iter().filter(|r| r.holds_normalized).count();
                for r in reports {
                    let slack = r.lhs / r.rhs_commutator_consistent - 1.0;
                    t.min_slack = Some(t.min_slack.map_or(slack, |m: f64| m.min(slack)));
                }
            }
            Outcome::Errored { .. } => {}
        }
    }
    s
}

impl Bound {
    pub fn selector(&self) -> TheoremSel {
        match self {
            Bound::Stern => TheoremSel::Stern,
            Bound::Theorem1 => TheoremSel::Theorem1,
            Bound::Theorem2 => TheoremSel::Theorem2,
        }
    }
}

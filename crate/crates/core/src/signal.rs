//! Uniform grids, sampled complex signals, test-signal generators and the
//! Riemann-sum inner product every other module integrates with.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID_POINTS: usize = 8;

/// Edge samples above this fraction of the peak magnitude trigger a
/// truncation warning.
pub const EDGE_DECAY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    t0: f64,
    dt: f64,
}

impl Grid {
    pub fn new(n: usize, t0: f64, dt: f64) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(Error::BadGrid(format!("need at least {MIN_GRID_POINTS} points, got {n}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::BadGrid(format!("spacing must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::BadGrid("origin must be finite".into()));
        }
        Ok(Self { n, t0, dt })
    }

    /// Grid of `n` points centred on zero: `t_k = (k - n/2) dt`.
    pub fn centered(n: usize, dt: f64) -> Result<Self> {
        Self::new(n, -((n / 2) as f64) * dt, dt)
    }

    /// Symmetric grid covering `[-half_range, half_range)`.
    pub fn symmetric(n: usize, half_range: f64) -> Result<Self> {
        Self::new(n, -half_range, 2.0 * half_range / n as f64)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.point(k))
    }

    pub fn last(&self) -> f64 {
        self.point(self.n - 1)
    }

    /// Largest `|t|` on the grid.
    pub fn max_abs(&self) -> f64 {
        self.t0.abs().max(self.last().abs())
    }

    /// Equal up to floating noise in the origin and spacing.
    pub fn matches(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt.max(other.dt)
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
    }

    pub(crate) fn require_match(&self, other: &Grid) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Index of `x` on this grid, if it is a grid point (to 1e-6 of a step).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let r = (x - self.t0) / self.dt;
        let k = r.round();
        if (r - k).abs() > 1e-6 || k < 0.0 || k >= self.n as f64 {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// Number of whole steps `x / step`, or `OffGridShift` if `x` is not a
/// lattice multiple.
pub(crate) fn lattice_steps(x: f64, step: f64) -> Result<i64> {
    let r = x / step;
    let k = r.round();
    if (r - k).abs() > 1e-6 {
        Err(Error::OffGridShift(x))
    } else {
        Ok(k as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadGrid(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Pointwise `self * phase(t)`.
    pub fn modulate(&self, phase: impl Fn(f64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.grid.points())
            .map(|(v, t)| v * phase(t))
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.require_match(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.require_match(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    /// Zero-extends to `n` samples on the right.
    pub fn pad_to(&self, n: usize) -> Result<Self> {
        if n < self.len() {
            return Err(Error::BadGrid(format!("cannot pad {} samples down to {n}", self.len())));
        }
        let grid = Grid::new(n, self.grid.t0, self.grid.dt)?;
        let mut values = self.values.clone();
        values.resize(n, Complex64::new(0.0, 0.0));
        Ok(Self { grid, values })
    }

    /// Sample `k - shift`, zero outside the grid.
    #[inline]
    pub(crate) fn shifted(&self, k: usize, shift: i64) -> Complex64 {
        let j = k as i64 - shift;
        if j < 0 || j >= self.values.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[j as usize]
        }
    }

    pub fn peak_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// `Some(ratio)` when the first or last sample exceeds
    /// [`EDGE_DECAY_TOL`] of the peak magnitude.
    pub fn truncation_warning(&self) -> Option<TruncationWarning> {
        let peak = self.peak_abs();
        if peak == 0.0 {
            return None;
        }
        let edge = self.values[0].norm().max(self.values[self.len() - 1].norm());
        let ratio = edge / peak;
        (ratio >= EDGE_DECAY_TOL).then_some(TruncationWarning { edge_ratio: ratio })
    }

    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        write_columns(out, "t,re,im", self.grid.points().zip(&self.values).map(|(t, v)| [t, v.re, v.im]))
    }

    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() != 3 || cols[1] != "re" || cols[2] != "im" {
            return Err(Error::Parse(format!("expected header t,re,im (or u,re,im), got {cols:?}")));
        }
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::Parse(format!("bad number '{}'", &rec[i])))
            };
            ts.push(num(0)?);
            values.push(Complex64::new(num(1)?, num(2)?));
        }
        let grid = uniform_grid(&ts)?;
        Self::new(grid, values)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SignalJson {
            t0: self.grid.t0,
            dt: self.grid.dt,
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: SignalJson = serde_json::from_str(s)?;
        if doc.re.len() != doc.im.len() {
            return Err(Error::Parse("re and im arrays differ in length".into()));
        }
        let grid = Grid::new(doc.re.len(), doc.t0, doc.dt)?;
        let values = doc.re.iter().zip(&doc.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        Self::new(grid, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub edge_ratio: f64,
}

impl std::fmt::Display for TruncationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "signal not negligible at grid edges (edge/peak = {:.3e}); moments and transforms may be truncated",
            self.edge_ratio
        )
    }
}

#[derive(Serialize, Deserialize)]
struct SignalJson {
    t0: f64,
    dt: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

fn uniform_grid(ts: &[f64]) -> Result<Grid> {
    if ts.len() < 2 {
        return Err(Error::BadGrid(format!("need at least {MIN_GRID_POINTS} samples")));
    }
    let n = ts.len();
    let dt = (ts[n - 1] - ts[0]) / (n - 1) as f64;
    for (k, &t) in ts.iter().enumerate() {
        let expected = ts[0] + k as f64 * dt;
        if (t - expected).abs() > 1e-9 * dt.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::BadGrid(format!("non-uniform sample spacing at row {k}")));
        }
    }
    Grid::new(n, ts[0], dt)
}

/// Writes numeric rows with 17 significant digits and `\n` endings.
pub(crate) fn write_columns<W: Write, const N: usize>(
    mut out: W,
    header: &str,
    rows: impl Iterator<Item = [f64; N]>,
) -> Result<()> {
    let mut buf = String::with_capacity(64);
    writeln!(out, "{header}")?;
    for row in rows {
        buf.clear();
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                buf.push(',');
            }
            buf.push_str(&format_num(*x));
        }
        buf.push('\n');
        out.write_all(buf.as_bytes())?;
    }
    Ok(())
}

pub fn format_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Normalised Gaussian `(pi w^2)^{-1/4} exp(-(t-c)^2 / 2w^2)` carrying a
/// linear chirp `chirp_rate/2 (t-c)^2` and a carrier `carrier (t-c)`.
pub fn gaussian(grid: Grid, center: f64, width: f64, chirp_rate: f64, carrier: f64) -> Result<SampledSignal> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::BadWidth(width));
    }
    let norm = (PI * width * width).powf(-0.25);
    SampledSignal::from_fn(grid, |t| {
        let x = t - center;
        let env = norm * (-x * x / (2.0 * width * width)).exp();
        Complex64::from_polar(env, 0.5 * chirp_rate * x * x + carrier * x)
    })
}

/// Indicator of `[center - half_width, center + half_width]`.
pub fn rect(grid: Grid, center: f64, half_width: f64) -> Result<SampledSignal> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::BadWidth(half_width));
    }
    // half-step slack so the boundaries land on samples consistently
    let eps = 1e-9 * grid.dt();
    SampledSignal::from_fn(grid, |t| {
        if (t - center).abs() <= half_width + eps {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `sum |s_k|^2 dt`.
pub fn energy(s: &SampledSignal) -> f64 {
    s.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * s.grid.dt
}

/// `sum conj(s1_k) s2_k dt`.
pub fn inner_product(s1: &SampledSignal, s2: &SampledSignal) -> Result<Complex64> {
    s1.grid.require_match(&s2.grid)?;
    let sum: Complex64 = s1.values.iter().zip(&s2.values).map(|(a, b)| a.conj() * b).sum();
    Ok(sum * s1.grid.dt)
}

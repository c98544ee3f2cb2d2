//! Means and spreads: of a signal in time, of its transform in the `u`
//! domain, of a 2-D time-frequency map, and conditional on one axis of the
//! map.
//!
//! All moments are energy-normalised Riemann sums with weight `dt` (or
//! `du`) per sample.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lct::lct_fast;
use crate::params::ParamMatrix;
use crate::signal::{energy, write_columns, Grid, SampledSignal};
use crate::stlct::{default_grids, local_signal, stlct, TimeFreqMap, ZERO_WEIGHT};

/// Absolute tolerance used when deciding which sign convention a mean
/// matches.
pub const CONVENTION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: f64,
    pub spread: f64,
    pub energy: f64,
}

/// Weighted mean and central second moment over the points of `grid`.
fn weighted(grid: &Grid, weights: &[f64]) -> Result<MomentReport> {
    let step = grid.dt();
    let points = || grid.points();
    let e: f64 = weights.iter().sum::<f64>() * step;
    if !(e > ZERO_WEIGHT) {
        return Err(Error::ZeroEnergy);
    }
    let mean = points().zip(weights).map(|(x, w)| x * w).sum::<f64>() * step / e;
    let spread = points()
        .zip(weights)
        .map(|(x, w)| (x - mean) * (x - mean) * w)
        .sum::<f64>()
        * step
        / e;
    Ok(MomentReport { mean, spread, energy: e })
}

/// Mean time `t_f` and time spread `T_f^2`.
pub fn time_moments(s: &SampledSignal) -> Result<MomentReport> {
    let w: Vec<f64> = s.values().iter().map(|v| v.norm_sqr()).collect();
    weighted(s.grid(), &w)
}

/// Mean frequency `u_{A,f}` and frequency spread `F_{A,f}^2`, taken from the
/// fast transform on its centred induced grid.
pub fn freq_moments(a: &ParamMatrix, s: &SampledSignal) -> Result<MomentReport> {
    time_moments(&lct_fast(a, s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StlctMomentReport {
    pub mean_t: f64,
    pub spread_t: f64,
    pub mean_u: f64,
    pub spread_u: f64,
    #[serde(rename = "energy")]
    pub total_energy: f64,
}

impl StlctMomentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Moments of `|S|^2 dt du` along both axes.
pub fn stlct_moments(map: &TimeFreqMap) -> Result<StlctMomentReport> {
    let qt = map.time_marginal();
    let pu = map.freq_marginal();
    let t = weighted(map.t_grid(), &qt)?;
    let u = weighted(map.u_grid(), &pu)?;
    Ok(StlctMomentReport {
        mean_t: t.mean,
        spread_t: t.spread,
        mean_u: u.mean,
        spread_u: u.spread,
        total_energy: map.total_energy(),
    })
}

/// One side-by-side comparison of an identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
}

impl Comparison {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, deviation: (lhs - rhs).abs() }
    }
}

/// Which reading of the mean-time identity the map supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanTimeSign {
    /// `t_S = t_f - t_g`.
    Minus,
    /// `t_S = t_f + t_g`.
    Plus,
    /// `t_g ~ 0`: both readings agree.
    Indistinguishable,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdditivityReport {
    /// `t_S` against `t_f + t_g`.
    pub mean_t_plus: Comparison,
    /// `t_S` against `t_f - t_g`.
    pub mean_t_minus: Comparison,
    pub mean_t_sign: MeanTimeSign,
    /// `T_S^2` against `T_f^2 + T_g^2`.
    pub spread_t: Comparison,
    /// `u_S` against `u_{A,f} - u_{A1,g}`.
    pub mean_u: Comparison,
    /// `F_S^2` against `F_{A,f}^2 + F_{A1,g}^2`.
    pub spread_u: Comparison,
    /// `sum |S|^2 dt du` against `E_f E_g`.
    pub energy: Comparison,
    pub map: StlctMomentReport,
}

impl AdditivityReport {
    /// Largest deviation among the spread, frequency-mean and the matching
    /// time-mean identities.
    pub fn max_deviation(&self) -> f64 {
        let t = self.mean_t_plus.deviation.min(self.mean_t_minus.deviation);
        [t, self.spread_t.deviation, self.mean_u.deviation, self.spread_u.deviation]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Compares the map moments of the short-time transform with the
/// combinations of 1-D signal and window moments.
pub fn additivity_check(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    d_prime: f64,
) -> Result<AdditivityReport> {
    let (t_grid, u_grid) = default_grids(a, f)?;
    let map = stlct(f, g, a, &t_grid, &u_grid)?;
    additivity_from_map(&map, f, g, d_prime)
}

/// As [`additivity_check`] with a map already computed on the default grids.
pub fn additivity_from_map(
    map: &TimeFreqMap,
    f: &SampledSignal,
    g: &SampledSignal,
    d_prime: f64,
) -> Result<AdditivityReport> {
    let a = map.matrix();
    let a1 = a.window_matrix(d_prime)?;
    let m = stlct_moments(map)?;
    let tf = time_moments(f)?;
    let tg = time_moments(g)?;
    let uf = freq_moments(a, f)?;
    let ug = freq_moments(&a1, g)?;

    let plus = Comparison::new(m.mean_t, tf.mean + tg.mean);
    let minus = Comparison::new(m.mean_t, tf.mean - tg.mean);
    let sign = match (minus.deviation < CONVENTION_TOL, plus.deviation < CONVENTION_TOL) {
        (true, true) => MeanTimeSign::Indistinguishable,
        (true, false) => MeanTimeSign::Minus,
        (false, true) => MeanTimeSign::Plus,
        (false, false) => MeanTimeSign::Neither,
    };
    Ok(AdditivityReport {
        mean_t_plus: plus,
        mean_t_minus: minus,
        mean_t_sign: sign,
        spread_t: Comparison::new(m.spread_t, tf.spread + tg.spread),
        mean_u: Comparison::new(m.mean_u, uf.mean - ug.mean),
        spread_u: Comparison::new(m.spread_u, uf.spread + ug.spread),
        energy: Comparison::new(m.total_energy, tf.energy * tg.energy),
        map: m,
    })
}

/// Per-slice conditional means and variances; `None` where the slice
/// weight is below [`ZERO_WEIGHT`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub axis_values: Vec<f64>,
    pub means: Vec<Option<f64>>,
    pub variances: Vec<Option<f64>>,
    pub weights: Vec<f64>,
}

impl ConditionalMoments {
    /// CSV with the given header (e.g. `t,mean_u,var_u,Q`); undefined
    /// entries are written as `NaN`.
    pub fn to_csv<W: Write>(&self, out: W, header: &str) -> Result<()> {
        let nan = f64::NAN;
        let rows = (0..self.axis_values.len()).map(|i| {
            [
                self.axis_values[i],
                self.means[i].unwrap_or(nan),
                self.variances[i].unwrap_or(nan),
                self.weights[i],
            ]
        });
        write_columns(out, header, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Index of the slice at `x`, if it lies on the axis.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.axis_values
            .iter()
            .position(|&v| (v - x).abs() <= 1e-9 * (1.0 + x.abs()))
    }
}

fn slice_moments(axis: &[f64], density: &[f64], step: f64, weight: f64) -> (Option<f64>, Option<f64>) {
    if !(weight >= ZERO_WEIGHT) {
        return (None, None);
    }
    let mean = axis.iter().zip(density).map(|(x, p)| x * p).sum::<f64>() * step / weight;
    let var = axis
        .iter()
        .zip(density)
        .map(|(x, p)| (x - mean) * (x - mean) * p)
        .sum::<f64>()
        * step
        / weight;
    (Some(mean), Some(var.max(0.0)))
}

/// `<u>_t` and `sigma^2_{u|t}` for every row of `map`, normalised by the
/// local energies `q`.
pub fn conditional_freq_moments(map: &TimeFreqMap, q: &[f64]) -> Result<ConditionalMoments> {
    let nt = map.t_grid().len();
    if q.len() != nt {
        return Err(Error::GridMismatch(format!("{} weights for {nt} time slices", q.len())));
    }
    let u: Vec<f64> = map.u_grid().points().collect();
    let du = map.u_grid().dt();
    let (means, variances): (Vec<_>, Vec<_>) = (0..nt)
        .into_par_iter()
        .map(|i| {
            let p: Vec<f64> = map.row(i).iter().map(|v| v.norm_sqr()).collect();
            slice_moments(&u, &p, du, q[i])
        })
        .unzip();
    Ok(ConditionalMoments {
        axis_values: map.t_grid().points().collect(),
        means,
        variances,
        weights: q.to_vec(),
    })
}

/// `<t>_u` and `sigma^2_{t|u}` for every column of a short-frequency time
/// map, normalised by the local spectral energies `p`.
pub fn conditional_time_moments(map_sftt: &TimeFreqMap, p: &[f64]) -> Result<ConditionalMoments> {
    let nu = map_sftt.u_grid().len();
    if p.len() != nu {
        return Err(Error::GridMismatch(format!("{} weights for {nu} frequency slices", p.len())));
    }
    let t: Vec<f64> = map_sftt.t_grid().points().collect();
    let dt = map_sftt.t_grid().dt();
    let (means, variances): (Vec<_>, Vec<_>) = (0..nu)
        .into_par_iter()
        .map(|i| {
            let dens: Vec<f64> = map_sftt.column(i).iter().map(|v| v.norm_sqr()).collect();
            slice_moments(&t, &dens, dt, p[i])
        })
        .unzip();
    Ok(ConditionalMoments {
        axis_values: map_sftt.u_grid().points().collect(),
        means,
        variances,
        weights: p.to_vec(),
    })
}

/// Fourth-order central difference with zero padding.
pub fn derivative(s: &SampledSignal) -> SampledSignal {
    let v = s.values();
    let n = v.len();
    let at = |k: isize| -> Complex64 {
        if k < 0 || k as usize >= n {
            Complex64::new(0.0, 0.0)
        } else {
            v[k as usize]
        }
    };
    let h = 12.0 * s.grid().dt();
    let values = (0..n as isize)
        .map(|k| (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / h)
        .collect();
    SampledSignal::from_parts(*s.grid(), values)
}

/// Form of the frequency operator applied to the local signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyOperator {
    /// `a tau + (b/i) d/dtau`, whose spread equals the `u`-domain spread
    /// of the transform for every matrix.
    #[default]
    Canonical,
    /// `(b/i) d/dtau` alone; equivalent only when `a = 0`.
    DerivativeOnly,
}

/// `(op - shift) s` for the chosen frequency operator.
pub fn apply_frequency_operator(
    s: &SampledSignal,
    a: &ParamMatrix,
    op: FrequencyOperator,
    shift: f64,
) -> SampledSignal {
    let ds = derivative(s);
    // (b/i) = -i b
    let mib = Complex64::new(0.0, -a.b());
    let slope = match op {
        FrequencyOperator::Canonical => a.a(),
        FrequencyOperator::DerivativeOnly => 0.0,
    };
    let values = s
        .grid()
        .points()
        .zip(s.values().iter().zip(ds.values()))
        .map(|(tau, (v, dv))| mib * dv + (slope * tau - shift) * v)
        .collect();
    SampledSignal::from_parts(*s.grid(), values)
}

/// `sigma^2_{u|t} = (1/Q(t)) sum |(B - <u>_t) f_t|^2 dtau` with the
/// canonical frequency operator.
pub fn sigma_u_given_t_derivative_form(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    t: f64,
    mean_u_t: f64,
) -> Result<f64> {
    sigma_u_given_t_with(f, g, a, t, mean_u_t, FrequencyOperator::Canonical)
}

pub fn sigma_u_given_t_with(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    t: f64,
    mean_u_t: f64,
    op: FrequencyOperator,
) -> Result<f64> {
    let local = local_signal(f, g, t)?;
    let q = energy(&local);
    if !(q >= ZERO_WEIGHT) {
        return Err(Error::ZeroLocalEnergy(t));
    }
    Ok(energy(&apply_frequency_operator(&local, a, op, mean_u_t)) / q)
}

/// Map and time-conditional moments on the default grids, for callers that
/// want both.
pub fn conditional_freq_moments_of(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
) -> Result<(TimeFreqMap, ConditionalMoments)> {
    let (t_grid, u_grid): (Grid, Grid) = default_grids(a, f)?;
    let map = stlct(f, g, a, &t_grid, &u_grid)?;
    let q = crate::stlct::local_energies(f, g, &t_grid)?;
    let c = conditional_freq_moments(&map, &q)?;
    Ok((map, c))
}

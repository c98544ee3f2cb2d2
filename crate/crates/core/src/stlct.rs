//! Short-time linear canonical transform and its frequency-domain
//! counterparts.
//!
//! Three routes produce a `(t, u)` map:
//!
//! * [`stlct`]: the transform of the local signal `f(tau) g*(tau - t)` for
//!   every window position `t`.
//! * [`stlct_spectral`]: the same map assembled from the signal spectrum
//!   `L_A f(xi)` and the window spectrum under `A1 = (0, b, -1/b, d')`.
//! * [`sftt`]: the short-frequency time transform, which windows the signal
//!   spectrum with a frequency window and maps it back to time.
//!
//! Window positions are restricted to whole-sample shifts, and every
//! frequency axis lives on the lattice induced by the DFT
//! (`du = 2 pi |b| / (n dt)`), so no route interpolates.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lct::{induced_grid, induced_step, lct_lattice, ExpSum, KernelSpec};
use crate::params::ParamMatrix;
use crate::signal::{energy, lattice_steps, write_columns, Grid, SampledSignal};

/// Local energies below this are treated as zero.
pub const ZERO_WEIGHT: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqMap {
    t_grid: Grid,
    u_grid: Grid,
    /// Row-major in `t`.
    values: Vec<Complex64>,
    matrix: ParamMatrix,
}

impl TimeFreqMap {
    pub fn new(t_grid: Grid, u_grid: Grid, values: Vec<Complex64>, matrix: ParamMatrix) -> Result<Self> {
        if values.len() != t_grid.len() * u_grid.len() {
            return Err(Error::BadGrid(format!(
                "{} values for a {}x{} map",
                values.len(),
                t_grid.len(),
                u_grid.len()
            )));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { t_grid, u_grid, values, matrix })
    }

    pub fn t_grid(&self) -> &Grid {
        &self.t_grid
    }

    pub fn u_grid(&self) -> &Grid {
        &self.u_grid
    }

    pub fn matrix(&self) -> &ParamMatrix {
        &self.matrix
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i_t: usize, i_u: usize) -> Complex64 {
        self.values[i_t * self.u_grid.len() + i_u]
    }

    pub fn row(&self, i_t: usize) -> &[Complex64] {
        let nu = self.u_grid.len();
        &self.values[i_t * nu..(i_t + 1) * nu]
    }

    pub fn column(&self, i_u: usize) -> Vec<Complex64> {
        (0..self.t_grid.len()).map(|i| self.get(i, i_u)).collect()
    }

    /// `sum |S|^2 dt du`.
    pub fn total_energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.t_grid.dt() * self.u_grid.dt()
    }

    /// `sum_u |S(t, u)|^2 du` for every `t`.
    pub fn time_marginal(&self) -> Vec<f64> {
        let du = self.u_grid.dt();
        (0..self.t_grid.len())
            .map(|i| self.row(i).iter().map(|v| v.norm_sqr()).sum::<f64>() * du)
            .collect()
    }

    /// `sum_t |S(t, u)|^2 dt` for every `u`.
    pub fn freq_marginal(&self) -> Vec<f64> {
        let dt = self.t_grid.dt();
        let nu = self.u_grid.len();
        let mut acc = vec![0.0; nu];
        for (k, v) in self.values.iter().enumerate() {
            acc[k % nu] += v.norm_sqr();
        }
        acc.iter_mut().for_each(|x| *x *= dt);
        acc
    }

    /// CSV `t,u,re,im`, row-major in `t`.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self.cells().map(|(t, u, v)| [t, u, v.re, v.im]);
        write_columns(out, "t,u,re,im", rows)
    }

    /// CSV `t,u,magnitude_squared`.
    pub fn spectrogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self.cells().map(|(t, u, v)| [t, u, v.norm_sqr()]);
        write_columns(out, "t,u,magnitude_squared", rows)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct MapJson<'a> {
            t_grid: &'a Grid,
            u_grid: &'a Grid,
            matrix: ParamMatrix,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let doc = MapJson {
            t_grid: &self.t_grid,
            u_grid: &self.u_grid,
            matrix: self.matrix,
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, Complex64)> + '_ {
        let nu = self.u_grid.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (self.t_grid.point(k / nu), self.u_grid.point(k % nu), *v))
    }
}

/// Whole-sample shift corresponding to window position `t`.
fn shift_of(f: &SampledSignal, t: f64) -> Result<i64> {
    lattice_steps(t, f.grid().dt())
}

/// `f(tau) conj(g(tau - t))` on the signal grid.
pub fn local_signal(f: &SampledSignal, g: &SampledSignal, t: f64) -> Result<SampledSignal> {
    f.grid().require_match(g.grid())?;
    let shift = shift_of(f, t)?;
    Ok(local_signal_shifted(f, g, shift))
}

fn local_signal_shifted(f: &SampledSignal, g: &SampledSignal, shift: i64) -> SampledSignal {
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * g.shifted(k, shift).conj())
        .collect();
    SampledSignal::from_parts(*f.grid(), values)
}

/// `Q(t)`: energy of the local signal.
pub fn local_energy(f: &SampledSignal, g: &SampledSignal, t: f64) -> Result<f64> {
    f.grid().require_match(g.grid())?;
    let shift = shift_of(f, t)?;
    Ok(local_energy_shifted(f, g, shift))
}

fn local_energy_shifted(f: &SampledSignal, g: &SampledSignal, shift: i64) -> f64 {
    f.values()
        .iter()
        .enumerate()
        .map(|(k, v)| v.norm_sqr() * g.shifted(k, shift).norm_sqr())
        .sum::<f64>()
        * f.grid().dt()
}

/// `Q(t)` on every point of `t_grid`.
pub fn local_energies(f: &SampledSignal, g: &SampledSignal, t_grid: &Grid) -> Result<Vec<f64>> {
    f.grid().require_match(g.grid())?;
    let shifts = window_shifts(f, t_grid)?;
    Ok(shifts.par_iter().map(|&s| local_energy_shifted(f, g, s)).collect())
}

/// Local signal scaled to unit energy.
pub fn normalized_local_signal(f: &SampledSignal, g: &SampledSignal, t: f64) -> Result<SampledSignal> {
    let local = local_signal(f, g, t)?;
    let q = energy(&local);
    if q < ZERO_WEIGHT {
        return Err(Error::ZeroLocalEnergy(t));
    }
    Ok(local.scale(Complex64::new(q.sqrt().recip(), 0.0)))
}

fn window_shifts(f: &SampledSignal, t_grid: &Grid) -> Result<Vec<i64>> {
    let dt = f.grid().dt();
    let start = lattice_steps(t_grid.t0(), dt)?;
    let hop = lattice_steps(t_grid.dt(), dt)?;
    Ok((0..t_grid.len() as i64).map(|i| start + i * hop).collect())
}

/// Default axes: window positions on the signal grid and the centred
/// induced frequency lattice.
pub fn default_grids(a: &ParamMatrix, f: &SampledSignal) -> Result<(Grid, Grid)> {
    Ok((*f.grid(), induced_grid(a, f.grid())?))
}

fn on_induced_lattice(a: &ParamMatrix, f: &SampledSignal, u_grid: &Grid) -> bool {
    let du = induced_step(a, f.grid());
    (u_grid.dt() - du).abs() <= 1e-9 * du
}

fn require_induced_lattice(a: &ParamMatrix, f: &SampledSignal, u_grid: &Grid) -> Result<f64> {
    if on_induced_lattice(a, f, u_grid) {
        Ok(induced_step(a, f.grid()))
    } else {
        Err(Error::GridMismatch(format!(
            "frequency spacing {} differs from the induced step {}",
            u_grid.dt(),
            induced_step(a, f.grid())
        )))
    }
}

/// Short-time LCT `S(t, u) = sum_tau f(tau) conj(g(tau - t)) K_A(tau, u) dtau`.
///
/// Rows go through the fast path when `u_grid` has the induced spacing,
/// otherwise through direct quadrature.
pub fn stlct(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    t_grid: &Grid,
    u_grid: &Grid,
) -> Result<TimeFreqMap> {
    let spec = KernelSpec::new(*a)?;
    f.grid().require_match(g.grid())?;
    let shifts = window_shifts(f, t_grid)?;
    let fast = on_induced_lattice(a, f, u_grid);
    let engine = ExpSum::new(f.len());
    let nu = u_grid.len();
    let rows: Vec<Vec<Complex64>> = shifts
        .par_iter()
        .map(|&shift| {
            let local = local_signal_shifted(f, g, shift);
            if fast {
                lct_lattice(&engine, &spec, &local, u_grid.t0(), nu)
            } else {
                Ok(direct_row(&spec, &local, u_grid))
            }
        })
        .collect::<Result<_>>()?;
    let values = rows.into_iter().flatten().collect();
    TimeFreqMap::new(*t_grid, *u_grid, values, *a)
}

fn direct_row(spec: &KernelSpec, local: &SampledSignal, u_grid: &Grid) -> Vec<Complex64> {
    let grid = local.grid();
    let dt = grid.dt();
    u_grid
        .points()
        .map(|u| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in local.values().iter().enumerate() {
                if v.re != 0.0 || v.im != 0.0 {
                    acc += v * spec.eval(grid.point(k), u);
                }
            }
            acc * dt
        })
        .collect()
}

/// Lattice origin nearest the centred lattice that is aligned with
/// `u_grid`.
fn aligned_center(u_grid: &Grid, n: usize, du: f64) -> f64 {
    let centered = -((n / 2) as f64) * du;
    u_grid.t0() + ((centered - u_grid.t0()) / du).round() * du
}

/// Frequency-domain windowing shared by [`stlct_spectral`] and [`sftt`]:
///
/// ```text
/// s(t, u_i) = sum_j F(mu_j) W(i, j) conj(K_A(t, mu_j)) dmu
/// ```
///
/// `spectrum` holds `F` on `mu_j = mu0 + j du`, `j < n_mu <= n`. Returns
/// column-major values (one vector over `t` per `u`).
#[allow(clippy::too_many_arguments)]
fn windowed_inverse(
    engine: &ExpSum,
    spec: &KernelSpec,
    spectrum: &[Complex64],
    mu0: f64,
    du: f64,
    t_grid: &Grid,
    hop: usize,
    nu: usize,
    window: impl Fn(usize, usize) -> Complex64 + Sync,
) -> Vec<Vec<Complex64>> {
    let m = spec.matrix();
    let b = m.b();
    let n = engine.len();
    let beta = m.d() / (2.0 * b);
    let alpha = m.a() / (2.0 * b);
    let pre: Vec<Complex64> = spectrum
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let mu = mu0 + j as f64 * du;
            v * Complex64::cis(-beta * mu * mu)
        })
        .collect();
    let count = (t_grid.len() - 1) * hop + 1;
    let scale = spec.prefactor().conj() * du;
    let t_phase: Vec<Complex64> = t_grid
        .points()
        .map(|t| scale * Complex64::cis(-alpha * t * t))
        .collect();
    (0..nu)
        .into_par_iter()
        .map(|i| {
            let mut h = vec![Complex64::new(0.0, 0.0); n];
            for (j, p) in pre.iter().enumerate() {
                h[j] = p * window(i, j);
            }
            let sums = engine.sum(&h, mu0, du, t_grid.t0(), 1.0 / b, count);
            (0..t_grid.len()).map(|k| sums[k * hop] * t_phase[k]).collect()
        })
        .collect()
}

fn transpose(columns: Vec<Vec<Complex64>>, nt: usize) -> Vec<Complex64> {
    let nu = columns.len();
    let mut values = vec![Complex64::new(0.0, 0.0); nt * nu];
    for (i, col) in columns.into_iter().enumerate() {
        for (k, v) in col.into_iter().enumerate() {
            values[k * nu + i] = v;
        }
    }
    values
}

fn hop_of(f: &SampledSignal, t_grid: &Grid) -> Result<usize> {
    lattice_steps(t_grid.t0(), f.grid().dt())?;
    let hop = lattice_steps(t_grid.dt(), f.grid().dt())?;
    if hop < 1 {
        return Err(Error::OffGridShift(t_grid.dt()));
    }
    Ok(hop as usize)
}

/// Window spectrum under `A1 = (0, b, -1/b, d')` at the offsets
/// `nu_m = (m_lo + m) du`, `m < count`.
fn window_spectrum_a1(
    engine: &ExpSum,
    a: &ParamMatrix,
    g: &SampledSignal,
    d_prime: f64,
    m_lo: i64,
    count: usize,
    du: f64,
) -> Result<Vec<Complex64>> {
    let a1 = a.window_matrix(d_prime)?;
    let spec1 = KernelSpec::new(a1)?;
    lct_lattice(engine, &spec1, g, m_lo as f64 * du, count)
}

/// The short-time transform assembled in the frequency domain:
///
/// ```text
/// S(t, u) = sum_xi L_A f(xi) G*(xi | u, t) dxi,
/// G*(xi | u, t) = sqrt(-i 2 pi b) exp(i d' (xi - u)^2 / 2b) conj(L_A1 g(xi - u))
///                 K_A(t, u) conj(K_A(t, xi)).
/// ```
///
/// `u_grid` must have the induced spacing; `xi` runs over one full period
/// of the lattice.
pub fn stlct_spectral(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    d_prime: f64,
    t_grid: &Grid,
    u_grid: &Grid,
) -> Result<TimeFreqMap> {
    let spec = KernelSpec::new(*a)?;
    f.grid().require_match(g.grid())?;
    let du = require_induced_lattice(a, f, u_grid)?;
    let hop = hop_of(f, t_grid)?;
    let n = f.len();
    let nu = u_grid.len();
    let engine = ExpSum::new(n);
    let xi0 = aligned_center(u_grid, n, du);
    let spectrum = lct_lattice(&engine, &spec, f, xi0, n)?;

    // xi_j - u_i = (off + j - i) du
    let off = ((xi0 - u_grid.t0()) / du).round() as i64;
    let m_lo = off - (nu as i64 - 1);
    let w = window_spectrum_a1(&engine, a, g, d_prime, m_lo, n + nu - 1, du)?;
    let b = a.b();
    let gamma = d_prime / (2.0 * b);
    let window = |i: usize, j: usize| {
        let m = off + j as i64 - i as i64;
        let nu_ = m as f64 * du;
        Complex64::cis(gamma * nu_ * nu_) * w[(m - m_lo) as usize].conj()
    };
    let columns = windowed_inverse(&engine, &spec, &spectrum, xi0, du, t_grid, hop, nu, window);
    let root = Complex64::new(0.0, -2.0 * std::f64::consts::PI * b).sqrt();
    let mut values = transpose(columns, t_grid.len());
    let row_u: Vec<f64> = u_grid.points().collect();
    for (k, t) in t_grid.points().enumerate() {
        for (i, &u) in row_u.iter().enumerate() {
            values[k * nu + i] *= root * spec.eval(t, u);
        }
    }
    TimeFreqMap::new(*t_grid, *u_grid, values, *a)
}

/// Which window spectrum the short-frequency time transform uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum WindowSpectrum {
    /// `L_A g(u - mu)`, the transform of the window under the signal's
    /// own matrix.
    #[default]
    SameMatrix,
    /// `exp(i d' (mu - u)^2 / 2b) conj(L_A1 g(mu - u))`; with this choice
    /// `|s| = |S|` holds for every matrix.
    WindowMatrix,
}

/// Short-frequency time transform
/// `s(t, u) = sum_mu L_A f(mu) L_A g(u - mu) conj(K_A(t, mu)) dmu`.
///
/// `u_grid` and `mu_grid` must both sit on the induced lattice, and
/// `mu_grid` may not exceed one lattice period.
pub fn sftt(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    t_grid: &Grid,
    u_grid: &Grid,
    mu_grid: &Grid,
) -> Result<TimeFreqMap> {
    sftt_with(f, g, a, t_grid, u_grid, mu_grid, WindowSpectrum::SameMatrix)
}

pub fn sftt_with(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    t_grid: &Grid,
    u_grid: &Grid,
    mu_grid: &Grid,
    window_kind: WindowSpectrum,
) -> Result<TimeFreqMap> {
    let spec = KernelSpec::new(*a)?;
    f.grid().require_match(g.grid())?;
    let du = require_induced_lattice(a, f, u_grid)?;
    require_induced_lattice(a, f, mu_grid)?;
    let hop = hop_of(f, t_grid)?;
    let n = f.len();
    if mu_grid.len() > n {
        return Err(Error::GridMismatch(format!(
            "mu grid of {} points exceeds one lattice period ({n})",
            mu_grid.len()
        )));
    }
    let off = lattice_steps(u_grid.t0() - mu_grid.t0(), du)?;
    let engine = ExpSum::new(n);
    let nu = u_grid.len();
    let nmu = mu_grid.len();
    let spectrum = lct_lattice(&engine, &spec, f, mu_grid.t0(), nmu)?;

    let columns = match window_kind {
        WindowSpectrum::SameMatrix => {
            // u_i - mu_j = (off + i - j) du
            let m_lo = off - (nmu as i64 - 1);
            let w = lct_lattice(&engine, &spec, g, m_lo as f64 * du, nu + nmu - 1)?;
            let window = |i: usize, j: usize| w[(off + i as i64 - j as i64 - m_lo) as usize];
            windowed_inverse(&engine, &spec, &spectrum, mu_grid.t0(), du, t_grid, hop, nu, window)
        }
        WindowSpectrum::WindowMatrix => {
            // mu_j - u_i = (j - i - off) du
            let m_lo = -(nu as i64 - 1) - off;
            let w = window_spectrum_a1(&engine, a, g, 0.0, m_lo, nu + nmu - 1, du)?;
            let window = |i: usize, j: usize| w[(j as i64 - i as i64 - off - m_lo) as usize].conj();
            windowed_inverse(&engine, &spec, &spectrum, mu_grid.t0(), du, t_grid, hop, nu, window)
        }
    };
    let values = transpose(columns, t_grid.len());
    TimeFreqMap::new(*t_grid, *u_grid, values, *a)
}

/// Local spectrum `L_u(mu) = L_A f(mu) L_A g(u - mu)` on `mu_grid`.
pub fn local_spectrum(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    u: f64,
    mu_grid: &Grid,
) -> Result<SampledSignal> {
    let spec = KernelSpec::new(*a)?;
    f.grid().require_match(g.grid())?;
    let du = require_induced_lattice(a, f, mu_grid)?;
    let off = lattice_steps(u - mu_grid.t0(), du)?;
    let engine = ExpSum::new(f.len());
    let nmu = mu_grid.len();
    let lf = lct_lattice(&engine, &spec, f, mu_grid.t0(), nmu)?;
    // u - mu_j = (off - j) du, j = nmu-1 .. 0
    let m_lo = off - (nmu as i64 - 1);
    let lg = lct_lattice(&engine, &spec, g, m_lo as f64 * du, nmu)?;
    let values = lf
        .iter()
        .enumerate()
        .map(|(j, v)| v * lg[nmu - 1 - j])
        .collect();
    SampledSignal::new(*mu_grid, values)
}

/// `P(u)`: energy of the local spectrum.
pub fn local_spectral_energy(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    u: f64,
    mu_grid: &Grid,
) -> Result<f64> {
    Ok(energy(&local_spectrum(f, g, a, u, mu_grid)?))
}

/// `P(u)` on every point of `u_grid`, integrating over `mu_grid`.
pub fn local_spectral_energies(
    f: &SampledSignal,
    g: &SampledSignal,
    a: &ParamMatrix,
    u_grid: &Grid,
    mu_grid: &Grid,
) -> Result<Vec<f64>> {
    let spec = KernelSpec::new(*a)?;
    f.grid().require_match(g.grid())?;
    let du = require_induced_lattice(a, f, u_grid)?;
    require_induced_lattice(a, f, mu_grid)?;
    let off = lattice_steps(u_grid.t0() - mu_grid.t0(), du)?;
    let engine = ExpSum::new(f.len());
    let (nu, nmu) = (u_grid.len(), mu_grid.len());
    let lf: Vec<f64> = lct_lattice(&engine, &spec, f, mu_grid.t0(), nmu)?
        .iter()
        .map(|v| v.norm_sqr())
        .collect();
    let m_lo = off - (nmu as i64 - 1);
    let lg: Vec<f64> = lct_lattice(&engine, &spec, g, m_lo as f64 * du, nu + nmu - 1)?
        .iter()
        .map(|v| v.norm_sqr())
        .collect();
    Ok((0..nu)
        .into_par_iter()
        .map(|i| {
            lf.iter()
                .enumerate()
                .map(|(j, p)| p * lg[(off + i as i64 - j as i64 - m_lo) as usize])
                .sum::<f64>()
                * du
        })
        .collect())
}

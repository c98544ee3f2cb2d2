//! Linear canonical transform: kernel, brute-force quadrature and the
//! chirp / DFT / chirp fast path.
//!
//! For `b != 0` the transform of a sampled signal is the Riemann sum
//!
//! ```text
//! L(u) = dt * sum_k f(t_k) K_A(t_k, u),
//! K_A(t, u) = (i 2 pi b)^{-1/2} exp(i a t^2 / 2b - i t u / b + i d u^2 / 2b).
//! ```
//!
//! On the lattice `u_j = u0 + j du` with `du = 2 pi |b| / (n dt)` the cross
//! term `exp(-i t u / b)` factors into a length-`n` DFT, which is what
//! [`lct_fast`] evaluates. [`lct_direct`] evaluates the same sum term by term
//! on any output grid and is the reference the fast path is tested against.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::ParamMatrix;
use crate::signal::{Grid, SampledSignal};

/// Integrand samples whose wrapped phase step exceeds this are treated as
/// aliased.
pub const SAMPLING_PHASE_LIMIT: f64 = 0.9 * PI;

/// Samples below this fraction of the peak are ignored by the sampling
/// guard.
const SAMPLING_SIGNIFICANCE: f64 = 1e-6;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `1 / sqrt(i 2 pi b)` on the principal branch.
pub fn prefactor(b: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI * b).sqrt().inv()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    matrix: ParamMatrix,
    prefactor: Complex64,
}

impl KernelSpec {
    pub fn new(matrix: ParamMatrix) -> Result<Self> {
        matrix.require_b_nonzero()?;
        Ok(Self { matrix, prefactor: prefactor(matrix.b()) })
    }

    pub fn matrix(&self) -> &ParamMatrix {
        &self.matrix
    }

    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    #[inline]
    pub fn eval(&self, t: f64, u: f64) -> Complex64 {
        let m = &self.matrix;
        let b = m.b();
        let phase = (m.a() * t * t - 2.0 * t * u + m.d() * u * u) / (2.0 * b);
        self.prefactor * Complex64::cis(phase)
    }
}

pub fn kernel(a: &ParamMatrix, t: f64, u: f64) -> Result<Complex64> {
    Ok(KernelSpec::new(*a)?.eval(t, u))
}

/// Spacing of the output lattice the DFT induces for `matrix` on `grid`.
pub fn induced_step(matrix: &ParamMatrix, grid: &Grid) -> f64 {
    2.0 * PI * matrix.b().abs() / (grid.len() as f64 * grid.dt())
}

/// The centred output grid of [`lct_fast`].
pub fn induced_grid(matrix: &ParamMatrix, grid: &Grid) -> Result<Grid> {
    matrix.require_b_nonzero()?;
    Grid::centered(grid.len(), induced_step(matrix, grid))
}

/// Evaluates `sum_k v_k exp(i sigma x_k y_m)` for `x_k = x0 + k dx` and
/// `y_m = y0 + m dy`, `dy = 2 pi / (n dx |sigma|)`, with one length-`n` FFT.
///
/// The DFT core is periodic in `m`; the outer phases are evaluated at the
/// true `y_m`, so any `count` and `y0` give the exact sum.
#[derive(Clone)]
pub(crate) struct ExpSum {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ExpSum {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    pub(crate) fn dual_step(&self, dx: f64, sigma: f64) -> f64 {
        2.0 * PI / (self.n as f64 * dx * sigma.abs())
    }

    pub(crate) fn sum(
        &self,
        v: &[Complex64],
        x0: f64,
        dx: f64,
        y0: f64,
        sigma: f64,
        count: usize,
    ) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.n);
        let dy = self.dual_step(dx, sigma);
        let mut buf: Vec<Complex64> = v
            .iter()
            .enumerate()
            .map(|(k, vk)| vk * Complex64::cis(sigma * k as f64 * dx * y0))
            .collect();
        if sigma > 0.0 {
            self.inverse.process(&mut buf);
        } else {
            self.forward.process(&mut buf);
        }
        (0..count)
            .map(|m| {
                let y = y0 + m as f64 * dy;
                buf[m % self.n] * Complex64::cis(sigma * x0 * y)
            })
            .collect()
    }
}

/// Rejects integrands whose phase advances by nearly a full half-turn
/// between significant neighbouring samples.
///
/// Steps touching a local minimum of `|v|` are skipped: a zero crossing
/// (or near-cancellation) flips the phase by up to `pi` without aliasing,
/// whereas an aliased chirp keeps large steps across a smooth envelope.
pub(crate) fn check_sampled(v: &[Complex64]) -> Result<()> {
    let mag: Vec<f64> = v.iter().map(|x| x.norm()).collect();
    let peak = mag.iter().fold(0.0f64, |m, &x| m.max(x));
    if peak == 0.0 {
        return Ok(());
    }
    let floor = SAMPLING_SIGNIFICANCE * peak;
    let dip = |k: usize| {
        let left = if k > 0 { mag[k - 1] } else { f64::INFINITY };
        let right = mag.get(k + 1).copied().unwrap_or(f64::INFINITY);
        mag[k] < left && mag[k] < right
    };
    let worst = (0..v.len().saturating_sub(1))
        .filter(|&k| mag[k] > floor && mag[k + 1] > floor && !dip(k) && !dip(k + 1))
        .map(|k| (v[k + 1] * v[k].conj()).arg().abs())
        .fold(0.0f64, f64::max);
    if worst > SAMPLING_PHASE_LIMIT {
        Err(Error::Undersampled(worst))
    } else {
        Ok(())
    }
}

/// Input samples times the kernel's input chirp `exp(i a t^2 / 2b)`.
fn chirped_input(spec: &KernelSpec, f: &SampledSignal) -> Vec<Complex64> {
    let m = spec.matrix();
    let alpha = m.a() / (2.0 * m.b());
    f.grid()
        .points()
        .zip(f.values())
        .map(|(t, v)| v * Complex64::cis(alpha * t * t))
        .collect()
}

/// Transform values at `u_j = u0 + j du`, `j < count`, with `du` the
/// induced step. Identical to [`lct_direct`] on that lattice.
pub(crate) fn lct_lattice(
    engine: &ExpSum,
    spec: &KernelSpec,
    f: &SampledSignal,
    u0: f64,
    count: usize,
) -> Result<Vec<Complex64>> {
    let v = chirped_input(spec, f);
    check_sampled(&v)?;
    Ok(lct_lattice_unchecked(engine, spec, f.grid(), &v, u0, count))
}

fn lct_lattice_unchecked(
    engine: &ExpSum,
    spec: &KernelSpec,
    grid: &Grid,
    chirped: &[Complex64],
    u0: f64,
    count: usize,
) -> Vec<Complex64> {
    let m = spec.matrix();
    let b = m.b();
    let sums = engine.sum(chirped, grid.t0(), grid.dt(), u0, -1.0 / b, count);
    let du = engine.dual_step(grid.dt(), 1.0 / b);
    let scale = spec.prefactor() * grid.dt();
    let beta = m.d() / (2.0 * b);
    sums.into_iter()
        .enumerate()
        .map(|(j, s)| {
            let u = u0 + j as f64 * du;
            s * scale * Complex64::cis(beta * u * u)
        })
        .collect()
}

/// Fast transform onto the induced lattice starting at `u0`.
///
/// Signals whose length is not a power of two are zero-padded on the right
/// first.
pub fn lct_fast_from(a: &ParamMatrix, f: &SampledSignal, u0: f64) -> Result<SampledSignal> {
    let spec = KernelSpec::new(*a)?;
    let padded;
    let f = if f.len().is_power_of_two() {
        f
    } else {
        padded = f.pad_to(f.len().next_power_of_two())?;
        &padded
    };
    let engine = ExpSum::new(f.len());
    let values = lct_lattice(&engine, &spec, f, u0, f.len())?;
    let grid = Grid::new(f.len(), u0, induced_step(a, f.grid()))?;
    Ok(SampledSignal::from_parts(grid, values))
}

/// Fast transform onto the centred induced grid
/// `u_j = (j - n/2) 2 pi |b| / (n dt)`.
pub fn lct_fast(a: &ParamMatrix, f: &SampledSignal) -> Result<SampledSignal> {
    a.require_b_nonzero()?;
    let n = f.len().next_power_of_two();
    let du = 2.0 * PI * a.b().abs() / (n as f64 * f.grid().dt());
    lct_fast_from(a, f, -((n / 2) as f64) * du)
}

/// O(N^2) quadrature of the transform onto an arbitrary output grid.
///
/// Each output sample is a fixed-order sum, so results do not depend on
/// the rayon thread count.
pub fn lct_direct(a: &ParamMatrix, f: &SampledSignal, out_grid: &Grid) -> Result<SampledSignal> {
    let spec = KernelSpec::new(*a)?;
    let grid = *f.grid();
    let dt = grid.dt();
    let ts: Vec<f64> = grid.points().collect();
    let values: Vec<Complex64> = (0..out_grid.len())
        .into_par_iter()
        .map(|j| {
            let u = out_grid.point(j);
            let mut acc = ZERO;
            for (t, v) in ts.iter().zip(f.values()) {
                acc += v * spec.eval(*t, u);
            }
            acc * dt
        })
        .collect();
    Ok(SampledSignal::from_parts(*out_grid, values))
}

/// Inverse transform by quadrature: `f(t) = sum_j F(u_j) K_{A^-1}(u_j, t) du`.
pub fn ilct(a: &ParamMatrix, spectrum: &SampledSignal, out_grid: &Grid) -> Result<SampledSignal> {
    lct_direct(&a.inverse(), spectrum, out_grid)
}

/// The `b = 0` branch: `sqrt(d) exp(i c d u^2 / 2) f(d u)`.
///
/// The output grid is the input grid divided by `d` (reversed when
/// `d < 0`), so `f(d u)` lands on input samples; linear interpolation
/// covers rounding. `sqrt(d)` is the principal complex root.
pub fn lct_b_zero(a: &ParamMatrix, f: &SampledSignal) -> Result<SampledSignal> {
    if !a.is_b_zero() {
        return Err(Error::Parse("lct_b_zero needs |b| < 1e-8".into()));
    }
    let d = a.d();
    if d == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    let grid = *f.grid();
    let n = grid.len();
    let (u0, du) = if d > 0.0 {
        (grid.t0() / d, grid.dt() / d)
    } else {
        (grid.last() / d, grid.dt() / d.abs())
    };
    let out_grid = Grid::new(n, u0, du)?;
    let root = Complex64::new(d, 0.0).sqrt();
    let cd = a.c() * d;
    let values = out_grid
        .points()
        .map(|u| root * Complex64::cis(0.5 * cd * u * u) * interpolate(f, d * u))
        .collect();
    Ok(SampledSignal::from_parts(out_grid, values))
}

/// Linear interpolation, zero outside the grid.
fn interpolate(f: &SampledSignal, t: f64) -> Complex64 {
    let g = f.grid();
    let r = (t - g.t0()) / g.dt();
    let n = g.len();
    if r < -1e-9 || r > (n - 1) as f64 + 1e-9 {
        return ZERO;
    }
    let r = r.clamp(0.0, (n - 1) as f64);
    let k = (r.floor() as usize).min(n - 2);
    let w = r - k as f64;
    f.values()[k] * (1.0 - w) + f.values()[k + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{energy, gaussian};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn std_grid() -> Grid {
        Grid::new(1024, -8.0, 16.0 / 1024.0).unwrap()
    }

    fn rel_l2(x: &[Complex64], y: &[Complex64]) -> f64 {
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = y.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn kernel_fourier_origin() {
        // 1/sqrt(2 pi) e^{-i pi/4}
        let k = kernel(&ParamMatrix::fourier(), 0.0, 0.0).unwrap();
        let expected = 0.282_094_791_773_878_14;
        assert!((k.re - expected).abs() < 1e-15);
        assert!((k.im + expected).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_b_zero() {
        let shear = ParamMatrix::new(1.0, 0.0, 0.4, 1.0).unwrap();
        assert_eq!(kernel(&shear, 0.1, 0.2), Err(Error::BZero));
    }

    #[test]
    fn prefactor_branch() {
        for b in [0.3, 1.0, -0.7, -2.5] {
            let p = prefactor(b);
            let check = p * p * Complex64::new(0.0, 2.0 * PI * b);
            assert!((check - 1.0).norm() < 1e-12, "b = {b}");
        }
        // b > 0: e^{-i pi/4} / sqrt(2 pi b)
        let p = prefactor(2.0);
        assert!((p - Complex64::from_polar(1.0 / (4.0 * PI).sqrt(), -PI / 4.0)).norm() < 1e-15);
        // b < 0: arg of sqrt(i 2 pi b) is -pi/4, so the prefactor carries +pi/4
        let p = prefactor(-2.0);
        assert!((p - Complex64::from_polar(1.0 / (4.0 * PI).sqrt(), PI / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn kernel_conjugation_random() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let d: f64 = rng.gen_range(-3.0..3.0);
            let mut b: f64 = rng.gen_range(0.1..3.0);
            if rng.gen_bool(0.5) {
                b = -b;
            }
            let m = ParamMatrix::new(a, b, (a * d - 1.0) / b, d).unwrap();
            let (t, u) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let lhs = kernel(&m, t, u).unwrap().conj();
            let rhs = kernel(&m.inverse(), u, t).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn direct_fourier_of_gaussian_is_gaussian() {
        // |L(u)| = pi^{-1/4} e^{-u^2/2}, phase e^{-i pi/4}
        let f = gaussian(std_grid(), 0.0, 1.0, 0.0, 0.0).unwrap();
        let out = lct_direct(&ParamMatrix::fourier(), &f, &std_grid()).unwrap();
        for (u, v) in out.grid().points().zip(out.values()) {
            let exact = Complex64::from_polar(PI.powf(-0.25) * (-u * u / 2.0).exp(), -PI / 4.0);
            assert!((v - exact).norm() < 1e-6, "u = {u}");
        }
        assert!((energy(&out) / energy(&f) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn direct_of_zero_is_zero() {
        let z = SampledSignal::zeros(std_grid());
        let out = lct_direct(&ParamMatrix::fractional(0.4), &z, &std_grid()).unwrap();
        assert!(out.values().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn fast_matches_direct_on_induced_grid() {
        let a = ParamMatrix::new(1.0, 2.0, 0.5, 2.0).unwrap();
        let f = gaussian(std_grid(), 0.5, 1.0, 2.0, 1.0).unwrap();
        let fast = lct_fast(&a, &f).unwrap();
        let direct = lct_direct(&a, &f, fast.grid()).unwrap();
        assert!(rel_l2(fast.values(), direct.values()) < 1e-3);
    }

    #[test]
    fn fast_round_trip_and_energy() {
        let f = gaussian(std_grid(), -0.7, 0.8, 2.0, 3.0).unwrap();
        for a in [
            ParamMatrix::fourier(),
            ParamMatrix::fractional(PI / 6.0),
            ParamMatrix::new(1.0, 2.0, 0.5, 2.0).unwrap(),
            ParamMatrix::new(2.0, 1.0, 1.0, 1.0).unwrap(),
            ParamMatrix::new(-1.5, -0.5, 0.5, -0.5).unwrap(),
        ] {
            let fwd = lct_fast(&a, &f).unwrap();
            assert!((energy(&fwd) / energy(&f) - 1.0).abs() < 1e-6, "{a}");
            let back = lct_fast(&a.inverse(), &fwd).unwrap();
            assert!(back.grid().matches(f.grid()), "{a}");
            assert!(rel_l2(back.values(), f.values()) < 1e-6, "{a}");
        }
    }

    #[test]
    fn fast_pads_to_power_of_two() {
        let g = Grid::new(1000, -8.0, 0.016).unwrap();
        let f = gaussian(g, 0.0, 1.0, 0.0, 0.0).unwrap();
        let out = lct_fast(&ParamMatrix::fourier(), &f).unwrap();
        assert_eq!(out.len(), 1024);
        assert!((energy(&out) - energy(&f)).abs() < 1e-10);
    }

    #[test]
    fn fast_flags_undersampled_chirp() {
        let f = gaussian(std_grid(), 0.0, 1.0, 0.0, 0.0).unwrap();
        // a/b = 500: phase step ~ 500 * t * dt, aliased across the support
        let a = ParamMatrix::new(50.0, 0.1, (50.0 * 0.5 - 1.0) / 0.1, 0.5).unwrap();
        assert!(matches!(lct_fast(&a, &f), Err(Error::Undersampled(_))));
    }

    #[test]
    fn zero_crossing_is_not_aliasing() {
        // real signal changing sign between two samples: the phase flips by pi
        let f = SampledSignal::from_fn(std_grid(), |t| {
            let s = t - 0.004;
            Complex64::new(s * (-s * s / 2.0).exp(), 0.0)
        })
        .unwrap();
        let a = ParamMatrix::new(1.0, 2.0, 0.25, 1.5).unwrap();
        let fast = lct_fast(&a, &f).unwrap();
        let direct = lct_direct(&a, &f, fast.grid()).unwrap();
        assert!(rel_l2(fast.values(), direct.values()) < 1e-3);
    }

    #[test]
    fn fast_rejects_b_zero() {
        let f = gaussian(std_grid(), 0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(lct_fast(&ParamMatrix::identity(), &f), Err(Error::BZero));
    }

    #[test]
    fn lattice_sum_wraps_beyond_one_period() {
        // lattice values past n must equal direct quadrature at those points
        let g = Grid::new(64, -4.0, 0.125).unwrap();
        let f = gaussian(g, 0.0, 0.7, 1.0, 0.0).unwrap();
        let a = ParamMatrix::new(0.5, 1.5, -0.5, 0.5).unwrap();
        let spec = KernelSpec::new(a).unwrap();
        let engine = ExpSum::new(64);
        let du = induced_step(&a, &g);
        let u0 = -100.3 * du;
        let vals = lct_lattice(&engine, &spec, &f, u0, 200).unwrap();
        let out_grid = Grid::new(200, u0, du).unwrap();
        let direct = lct_direct(&a, &f, &out_grid).unwrap();
        for (x, y) in vals.iter().zip(direct.values()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn ilct_inverts_direct() {
        let f = gaussian(std_grid(), 0.0, 1.0, 0.0, 0.0).unwrap();
        let a = ParamMatrix::fractional(PI / 3.0);
        let spectrum = lct_direct(&a, &f, &std_grid()).unwrap();
        let back = ilct(&a, &spectrum, &std_grid()).unwrap();
        assert!(rel_l2(back.values(), f.values()) < 1e-3);
        let zero = ilct(&a, &SampledSignal::zeros(std_grid()), &std_grid()).unwrap();
        assert!(zero.values().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn ilct_fourier_matches_inverse_dft_oracle() {
        // oracle: plain inverse Fourier sum (2 pi i)^{-1/2}* sum F(u) e^{i u t} du
        let g = Grid::new(128, -8.0, 0.125).unwrap();
        let spectrum = gaussian(g, 0.5, 1.3, 0.5, -1.0).unwrap();
        let out = ilct(&ParamMatrix::fourier(), &spectrum, &g).unwrap();
        let c = Complex64::new(0.0, -2.0 * PI).sqrt().inv();
        for (k, t) in g.points().enumerate() {
            let mut acc = ZERO;
            for (u, v) in g.points().zip(spectrum.values()) {
                acc += v * Complex64::cis(u * t);
            }
            let expected = c * acc * g.dt();
            assert!((out.values()[k] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn b_zero_branch() {
        let g = Grid::new(256, -8.0, 1.0 / 16.0).unwrap();
        let f = gaussian(g, 0.3, 1.0, 1.0, 0.5).unwrap();
        let id = lct_b_zero(&ParamMatrix::identity(), &f).unwrap();
        assert!(id.grid().matches(f.grid()));
        for (x, y) in id.values().iter().zip(f.values()) {
            assert!((x - y).norm() < 1e-14);
        }
        let shear = ParamMatrix::new(1.0, 0.0, 0.8, 1.0).unwrap();
        let out = lct_b_zero(&shear, &f).unwrap();
        for (x, y) in out.values().iter().zip(f.values()) {
            assert!((x.norm() - y.norm()).abs() < 1e-14);
        }
        for d in [2.0, 0.5, -1.5] {
            let m = ParamMatrix::new(1.0 / d, 0.0, 0.3, d).unwrap();
            let out = lct_b_zero(&m, &f).unwrap();
            assert!((energy(&out) / energy(&f) - 1.0).abs() < 1e-6, "d = {d}");
        }
        assert!(lct_b_zero(&ParamMatrix::fourier(), &f).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linearity(
            ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, bi in -2.0..2.0f64,
            alpha in 0.2..3.0f64,
        ) {
            let g = Grid::new(256, -8.0, 1.0 / 16.0).unwrap();
            let f = gaussian(g, 0.5, 1.0, 1.0, 0.0).unwrap();
            let h = gaussian(g, -1.0, 0.6, -0.5, 2.0).unwrap();
            let (x, y) = (Complex64::new(ar, ai), Complex64::new(br, bi));
            let m = ParamMatrix::fractional(alpha);
            let combo = f.scale(x).add(&h.scale(y)).unwrap();
            let lhs = lct_fast(&m, &combo).unwrap();
            let rhs = lct_fast(&m, &f).unwrap().scale(x).add(&lct_fast(&m, &h).unwrap().scale(y)).unwrap();
            let err = rel_l2(lhs.values(), rhs.values());
            prop_assert!(err < 1e-10);
        }
    }
}

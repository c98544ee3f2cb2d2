//! Randomized checks of the structural properties, through the public API.

use canonical_tf::lct::lct_fast;
use canonical_tf::moments::{additivity_check, conditional_freq_moments_of, stlct_moments};
use canonical_tf::signal::{energy, gaussian};
use canonical_tf::stlct::{default_grids, local_energies, stlct};
use canonical_tf::uncertainty::{theorem1_check, theorem3_subgrid};
use canonical_tf::{Grid, ParamMatrix, SampledSignal};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(256, -8.0, 1.0 / 16.0).unwrap()
}

/// Gaussians that decay well inside the grid and stay well sampled.
fn signal() -> impl Strategy<Value = SampledSignal> {
    (-1.5..1.5f64, 0.6..1.2f64, -1.0..1.0f64, -2.0..2.0f64)
        .prop_map(|(c, w, k, m)| gaussian(grid(), c, w, k, m).unwrap())
}

fn window() -> impl Strategy<Value = SampledSignal> {
    (-0.5..0.5f64, 0.5..1.0f64).prop_map(|(c, w)| gaussian(grid(), c, w, 0.0, 0.0).unwrap())
}

/// Unimodular matrices with `|b| >= 0.5` and mild chirps.
fn matrix() -> impl Strategy<Value = ParamMatrix> {
    (-1.0..1.0f64, 0.5..2.0f64, any::<bool>(), -1.0..1.0f64).prop_map(|(a, b, neg, d)| {
        let b = if neg { -b } else { b };
        ParamMatrix::new(a, b, (a * d - 1.0) / b, d).unwrap()
    })
}

fn rel_l2(x: &[Complex64], y: &[Complex64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum();
    let den: f64 = y.iter().map(|q| q.norm_sqr()).sum();
    (num / den).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lct_is_unitary(f in signal(), a in matrix()) {
        let out = lct_fast(&a, &f).unwrap();
        prop_assert!((energy(&out) / energy(&f) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn inverse_matrix_undoes_the_transform(f in signal(), a in matrix()) {
        let back = lct_fast(&a.inverse(), &lct_fast(&a, &f).unwrap()).unwrap();
        prop_assert_eq!(back.len(), f.len());
        prop_assert!((back.grid().t0() - f.grid().t0()).abs() < 1e-9);
        prop_assert!(rel_l2(back.values(), f.values()) < 1e-6);
    }

    #[test]
    fn lct_is_linear(f in signal(), g in signal(), a in matrix(), al in -2.0..2.0f64, be in -2.0..2.0f64) {
        let (al, be) = (Complex64::new(al, 0.5), Complex64::new(0.3, be));
        let lhs = lct_fast(&a, &f.scale(al).add(&g.scale(be)).unwrap()).unwrap();
        let rhs = lct_fast(&a, &f).unwrap().scale(al).add(&lct_fast(&a, &g).unwrap().scale(be)).unwrap();
        prop_assert!(rel_l2(lhs.values(), rhs.values()) < 1e-10);
    }

    #[test]
    fn map_energy_factorizes_and_rows_match_local_energy(f in signal(), g in window(), a in matrix()) {
        let (tg, ug) = default_grids(&a, &f).unwrap();
        let map = stlct(&f, &g, &a, &tg, &ug).unwrap();
        let product = energy(&f) * energy(&g);
        prop_assert!((map.total_energy() / product - 1.0).abs() < 1e-3);

        let q = local_energies(&f, &g, &tg).unwrap();
        let qmax = q.iter().cloned().fold(0.0, f64::max);
        for (i, (&qi, mi)) in q.iter().zip(map.time_marginal()).enumerate() {
            if qi > 1e-6 * qmax {
                prop_assert!((mi / qi - 1.0).abs() < 1e-3, "row {}: {} vs {}", i, mi, qi);
            }
        }
    }

    #[test]
    fn conditional_variances_are_nonnegative(f in signal(), g in window(), a in matrix()) {
        let (_, c) = conditional_freq_moments_of(&f, &g, &a).unwrap();
        for v in c.variances.iter().flatten() {
            prop_assert!(*v >= 0.0);
        }
    }

    #[test]
    fn shifting_the_signal_shifts_the_mean_time(
        c in -1.0..1.0f64, w in 0.6..1.2f64, k in -16i32..16, g in window(), a in matrix(),
    ) {
        let dt = grid().dt();
        let f0 = gaussian(grid(), c, w, 0.0, 1.0).unwrap();
        let f1 = gaussian(grid(), c + k as f64 * dt, w, 0.0, 1.0).unwrap();
        let (tg, ug) = default_grids(&a, &f0).unwrap();
        let m0 = stlct_moments(&stlct(&f0, &g, &a, &tg, &ug).unwrap()).unwrap();
        let m1 = stlct_moments(&stlct(&f1, &g, &a, &tg, &ug).unwrap()).unwrap();
        prop_assert!((m1.mean_t - m0.mean_t - k as f64 * dt).abs() < 1e-6);
    }

    #[test]
    fn short_time_moments_are_additive(f in signal(), g in window(), a in matrix()) {
        let r = additivity_check(&f, &g, &a, 0.0).unwrap();
        prop_assert!(r.max_deviation() < 1e-3, "{:?}", r.max_deviation());
    }

    #[test]
    fn time_frequency_bound_holds_and_ignores_scale(f in signal(), g in window(), a in matrix()) {
        let r = theorem1_check(&f, &g, &a, 0.0).unwrap();
        prop_assert!(r.passed, "lhs {} rhs {}", r.lhs, r.rhs);
        let r2 = theorem1_check(&f.scale(Complex64::new(2.0, 0.0)), &g, &a, 0.0).unwrap();
        prop_assert_eq!(r.passed, r2.passed);
        prop_assert!((r2.lhs / r.lhs - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// The normalized conditional bound always holds; the weighted forms
    /// are reported, not asserted.
    #[test]
    fn conditional_bound_normalized_form_holds(f in signal(), g in window(), a in matrix()) {
        for r in theorem3_subgrid(&f, &g, &a, 3).unwrap() {
            prop_assert!(r.lhs >= 0.0 && r.rhs_unit_kappa >= 0.0 && r.rhs_commutator_consistent >= 0.0);
            prop_assert!(r.holds_normalized, "t {} u {}: lhs {} rhs {}", r.t, r.u, r.lhs, r.rhs_normalized);
        }
    }
}

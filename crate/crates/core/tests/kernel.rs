mod common;

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{ols, r2_normal_equations, r2_projector, random_instance, random_raw, rel_err};
use rai_core::kernel::{coefficients, gain, r_squared_of};
use rai_core::term::realize;
use rai_core::{FeatureTerm, ModelState};

#[test]
fn partial_correlation_matches_full_ols() {
    for seed in 0..20 {
        let ds = random_instance(seed, 40, 5, 0.6);
        let s = [0usize, 2];
        let mut state = ModelState::empty(&ds);
        for &j in &s {
            state.add_feature(&ds, j).unwrap();
        }
        for j in [1usize, 3, 4] {
            let rho = state.partial_correlation(&ds, j).unwrap();
            // ρ² = (R²(S∪j) − R²(S)) / (1 − R²(S))
            let r2s = r2_normal_equations(&ds, &s);
            let r2sj = r2_normal_equations(&ds, &[0, 2, j]);
            assert_abs_diff_eq!(rho * rho, (r2sj - r2s) / (1.0 - r2s), epsilon = 1e-10);
            // sign agrees with the OLS coefficient of x_j
            let cols: Vec<&[f64]> = [0, 2, j].iter().map(|&c| ds.raw_column(c)).collect();
            let fit = ols(&cols, ds.raw_response()).unwrap();
            assert_eq!(rho.signum(), fit.coef[3].signum());
        }
    }
}

#[test]
fn t_statistic_matches_ols_coefficient_t() {
    for seed in 0..30 {
        let n = 25 + (seed as usize % 20);
        let ds = random_instance(100 + seed, n, 6, 0.4);
        let mut state = ModelState::empty(&ds);
        let s = [5usize, 1, 3];
        for &j in &s[..(seed as usize % 4)] {
            state.add_feature(&ds, j).unwrap();
        }
        let sel = state.selected().to_vec();
        for j in (0..6).filter(|j| !sel.contains(j)) {
            let t = state.t_statistic(&ds, j).unwrap();
            let mut idx = sel.clone();
            idx.push(j);
            let cols: Vec<&[f64]> = idx.iter().map(|&c| ds.raw_column(c)).collect();
            let fit = ols(&cols, ds.raw_response()).unwrap();
            let t_ref = *fit.t.last().unwrap();
            assert!(rel_err(t, t_ref) < 1e-6, "seed {seed}: {t} vs {t_ref}");
        }
    }
}

#[test]
fn incremental_adds_match_batch_ols() {
    for seed in 0..20 {
        let ds = random_instance(200 + seed, 30, 6, 0.7);
        let mut state = ModelState::empty(&ds);
        for &j in &[4usize, 0, 2] {
            state.add_feature(&ds, j).unwrap();
        }
        let r2 = r2_normal_equations(&ds, &[4, 0, 2]);
        assert_abs_diff_eq!(state.r_squared(), r2, epsilon = 1e-10);
        // basis orthonormal, residual orthogonal to it
        let b = state.basis();
        for (i, u) in b.iter().enumerate() {
            for (k, v) in b.iter().enumerate() {
                let d: f64 = u.iter().zip(v).map(|(a, c)| a * c).sum();
                let want = if i == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(d, want, epsilon = 1e-10);
            }
            let d: f64 = u.iter().zip(state.residual()).map(|(a, c)| a * c).sum();
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-10);
        }
        let rr: f64 = state.residual().iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(state.r_squared(), 1.0 - rr, epsilon = 1e-12);
    }
}

#[test]
fn r_squared_matches_explicit_projector() {
    for seed in 0..20 {
        let ds = random_instance(300 + seed, 20, 7, 0.5);
        for subset in [&[][..], &[3], &[0, 6], &[1, 2, 5, 4]] {
            let got = r_squared_of(&ds, subset).unwrap();
            assert_abs_diff_eq!(got, r2_projector(&ds, subset), epsilon = 1e-10);
            assert!((0.0..=1.0).contains(&got));
        }
    }
}

#[test]
fn orthogonal_gains_add() {
    // columns made exactly orthogonal after adjusting for S by construction
    let ds = common::orthogonal_instance(7, 16, 6);
    let s = [0usize];
    let g_ab = gain(&ds, &s, &[2, 4]).unwrap();
    let g_a = gain(&ds, &s, &[2]).unwrap();
    let g_b = gain(&ds, &s, &[4]).unwrap();
    assert_abs_diff_eq!(g_ab, g_a + g_b, epsilon = 1e-12);
}

#[test]
fn raw_coefficients_match_normal_equations() {
    for seed in 0..20 {
        let ds = random_instance(400 + seed, 35, 5, 0.3);
        let subset = [1usize, 4, 2];
        let fit = coefficients(&ds, &subset).unwrap();
        let cols: Vec<&[f64]> = subset.iter().map(|&j| ds.raw_column(j)).collect();
        let reference = ols(&cols, ds.raw_response()).unwrap();
        let got = std::iter::once(&fit.intercept).chain(&fit.coefficients);
        for (a, b) in got.zip(&reference.coef) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        // predictions from raw data reproduce the standardized fit
        let pred = fit.predict(&cols).unwrap();
        let mut state = ModelState::empty(&ds);
        for &j in &subset {
            state.add_feature(&ds, j).unwrap();
        }
        let y = ds.standardized_response();
        let std_fit = y.to_raw(&state.fitted(&y.values));
        for (a, b) in pred.iter().zip(&std_fit) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }
}

#[test]
fn realized_product_matches_direct_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (cols, _) = random_raw(&mut rng, 50, 3, 0.2);
    let term = FeatureTerm::from_factors([(0, 1), (2, 2)]).unwrap();
    let got = realize(&term, &cols).unwrap();
    // independent route: build, center, normalize
    let prod: Vec<f64> = (0..50)
        .map(|i| cols[0][i] * cols[2][i] * cols[2][i])
        .collect();
    let m = prod.iter().sum::<f64>() / 50.0;
    let centered: Vec<f64> = prod.iter().map(|v| v - m).collect();
    let nrm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (a, b) in got.values.iter().zip(&centered) {
        assert_abs_diff_eq!(*a, b / nrm, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(got.mean, m, epsilon = 1e-9 * m.abs().max(1.0));
}

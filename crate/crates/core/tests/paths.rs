use proptest::prelude::*;
use rough_ldp::kernels::gram_matrix;
use rough_ldp::paths::{fbm_covariance, sample_fbm, sample_fou, PathConstruction};
use rough_ldp::{Hurst, KernelSpec, TimeGrid};

fn h(x: f64) -> Hurst {
    Hurst::new(x).unwrap()
}

#[test]
fn covariance_examples() {
    assert!((fbm_covariance(h(0.5), 0.3, 0.8) - 0.3).abs() < 1e-15);
    assert!((fbm_covariance(h(0.3), 0.5, 0.5) - 0.5f64.powf(0.6)).abs() < 1e-15);
    assert_eq!(fbm_covariance(h(0.7), 1.0, 0.0), 0.0);
    assert!(Hurst::new(1.0).is_err());
    assert!(Hurst::new(0.0).is_err());
}

#[test]
fn brownian_covariance_within_band() {
    let grid = TimeGrid::from_nodes(vec![0.05, 0.1, 0.3, 0.35, 0.6, 0.9, 0.95, 1.0]).unwrap();
    let batch = sample_fbm(h(0.5), &grid, 100_000, 1).unwrap();
    let (m, se) = batch.second_moments();
    for i in 0..8 {
        for j in 0..8 {
            let exact = grid.nodes()[i].min(grid.nodes()[j]);
            assert!((m.get(i, j) - exact).abs() < 3.0 * se.get(i, j), "({i},{j})");
        }
    }
}

#[test]
fn rough_variance_within_band() {
    let grid = TimeGrid::uniform(8).unwrap();
    let batch = sample_fbm(h(0.3), &grid, 100_000, 2).unwrap();
    let (m, se) = batch.second_moments();
    for i in 0..8 {
        let t = grid.nodes()[i];
        assert!((m.get(i, i) - t.powf(0.6)).abs() < 3.0 * se.get(i, i));
    }
}

#[test]
fn single_path_is_deterministic() {
    let grid = TimeGrid::uniform(16).unwrap();
    let a = sample_fbm(h(0.3), &grid, 1, 77).unwrap();
    let b = sample_fbm(h(0.3), &grid, 1, 77).unwrap();
    assert_eq!(a, b);
    let c = sample_fbm(h(0.3), &grid, 1, 78).unwrap();
    assert_ne!(a.values, c.values);
}

fn ou_covariance(beta: f64, t: f64, s: f64) -> f64 {
    (beta * (t + s)).exp() * ((-2.0 * beta * t.min(s)).exp() - 1.0) / (-2.0 * beta)
}

#[test]
fn ou_covariance_both_constructions() {
    let grid = TimeGrid::uniform(8).unwrap();
    for (c, seed) in [(PathConstruction::KernelDriven, 3), (PathConstruction::ProductRule, 4)] {
        let batch = sample_fou(h(0.5), -1.0, 1.0, &grid, 100_000, seed, c).unwrap();
        let (m, se) = batch.second_moments();
        for i in 0..8 {
            for j in 0..8 {
                let exact = ou_covariance(-1.0, grid.nodes()[i], grid.nodes()[j]);
                // 36 correlated entries: a 4 se band keeps the family-wise false alarm rate low
                assert!((m.get(i, j) - exact).abs() < 4.0 * se.get(i, j), "{c:?} ({i},{j})");
            }
        }
    }
}

#[test]
fn gram_matches_closed_form_ou() {
    let grid = TimeGrid::uniform(8).unwrap();
    let g = gram_matrix(&KernelSpec::FFou { hurst: h(0.5), beta: -1.0, xi: 1.0 }, &grid).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let exact = ou_covariance(-1.0, grid.nodes()[i], grid.nodes()[j]);
            assert!((g.get(i, j) - exact).abs() < 1e-9, "({i},{j})");
        }
    }
}

#[test]
fn zero_xi_gives_zero_paths() {
    let grid = TimeGrid::uniform(8).unwrap();
    for c in [PathConstruction::KernelDriven, PathConstruction::ProductRule, PathConstruction::CovFactor] {
        let b = sample_fou(h(0.3), -1.0, 0.0, &grid, 10, 1, c).unwrap();
        assert!(b.values.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn fbm_error_shrinks_like_root_n() {
    let grid = TimeGrid::uniform(8).unwrap();
    let err = |n: usize, seed: u64| {
        let (m, _) = sample_fbm(h(0.7), &grid, n, seed).unwrap().second_moments();
        let mut s = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                s += (m.get(i, j) - fbm_covariance(h(0.7), grid.nodes()[i], grid.nodes()[j])).powi(2);
            }
        }
        s.sqrt()
    };
    // averaging over seeds steadies both error estimates
    let small: f64 = (0..8).map(|s| err(1_000, 100 + s)).sum::<f64>() / 8.0;
    let large: f64 = (0..4).map(|s| err(100_000, 200 + s)).sum::<f64>() / 4.0;
    let ratio = small / large;
    assert!((5.0..=20.0).contains(&ratio), "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn batches_are_reproducible(seed in any::<u64>(), hv in 0.1..0.9f64, rule in 0usize..2) {
        let grid = TimeGrid::uniform(6).unwrap();
        let c = [PathConstruction::KernelDriven, PathConstruction::ProductRule][rule];
        let a = sample_fou(h(hv), -0.5, 1.0, &grid, 300, seed, c).unwrap();
        let b = sample_fou(h(hv), -0.5, 1.0, &grid, 300, seed, c).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sample_means_are_centred(seed in any::<u64>(), hv in 0.1..0.9f64) {
        let grid = TimeGrid::uniform(6).unwrap();
        let batch = sample_fou(h(hv), -1.0, 1.0, &grid, 20_000, seed, PathConstruction::KernelDriven).unwrap();
        let n = batch.n_paths as f64;
        for i in 0..6 {
            let col: Vec<f64> = (0..batch.n_paths).map(|p| batch.path(p)[i]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            // 4 sd keeps the family-wise false alarm rate small over random seeds
            prop_assert!(mean.abs() < 4.0 * sd / n.sqrt());
        }
    }
}

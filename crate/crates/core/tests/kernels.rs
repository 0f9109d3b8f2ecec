use proptest::prelude::*;
use rough_ldp::kernels::{apply_operator, eval_kernel, gram_matrix, kappa, Hurst, KernelSpec};
use rough_ldp::paths::fbm_covariance;
use rough_ldp::{Error, TimeGrid};

fn h(x: f64) -> Hurst {
    Hurst::new(x).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// high-precision values from an independent integration-by-parts formula
const KAPPA_03: f64 = 0.730_282_934_079_922_947_6;
const KAPPA_07: f64 = 1.091_809_130_883_912_597_6;

#[test]
fn kappa_matches_frozen_values() {
    assert!(rel(kappa(h(0.3)), KAPPA_03) < 1e-10);
    assert!(rel(kappa(h(0.7)), KAPPA_07) < 1e-10);
    assert!((kappa(h(0.5)) - 1.0).abs() < 1e-14);
}

#[test]
fn kernel_values_match_frozen_values() {
    let cases = [
        (0.3, 0.0, 1.0, 1.0, 0.5, 0.873_014_114_338_668_044_1),
        (0.7, 0.0, 1.0, 1.0, 0.5, 0.977_140_497_393_616_788_2),
        (0.3, -1.0, 1.5, 0.8, 0.1, 0.587_891_984_133_101_923_2),
        (0.7, -1.0, 1.5, 0.8, 0.1, 0.997_015_280_157_566_963_5),
        (0.1, 2.0, 1.0, 1.0, 0.99, 2.339_159_894_019_560_689_8),
        (0.9, 0.5, 2.0, 0.5, 0.01, 3.645_211_444_886_761_474_6),
    ];
    for (hh, beta, xi, t, s, want) in cases {
        let spec = KernelSpec::FFou { hurst: h(hh), beta, xi };
        let got = eval_kernel(&spec, t, s).unwrap();
        assert!(rel(got, want) < 1e-8, "H={hh} beta={beta}: {got} vs {want}");
    }
}

#[test]
fn half_reductions_are_exact() {
    let half = h(0.5);
    for (t, s) in [(1.0, 0.5), (0.3, 0.01), (0.9, 0.899)] {
        assert_eq!(eval_kernel(&KernelSpec::KFbm { hurst: half }, t, s).unwrap(), 1.0);
        let f = eval_kernel(&KernelSpec::FFou { hurst: half, beta: -0.7, xi: 1.3 }, t, s).unwrap();
        assert!((f - 1.3 * (-0.7 * (t - s)).exp()).abs() <= 1e-12);
    }
}

#[test]
fn g_eps_reduces_to_g_zero() {
    let g0 = KernelSpec::GZero { hurst: h(0.3), xi: 1.2 };
    let ge = KernelSpec::GEps { hurst: h(0.3), beta: -2.0, xi: 1.2, eps: 0.0 };
    let a = eval_kernel(&g0, 0.7, 0.2).unwrap();
    let b = eval_kernel(&ge, 0.7, 0.2).unwrap();
    assert!(rel(a, b) < 1e-12);
}

#[test]
fn domain_errors() {
    let spec = KernelSpec::KFbm { hurst: h(0.3) };
    assert!(matches!(eval_kernel(&spec, 0.5, 0.5), Err(Error::Domain(_))));
    assert!(matches!(eval_kernel(&spec, 0.5, 0.0), Err(Error::Domain(_))));
    assert!(Hurst::new(1.0).is_err());
    assert!(Hurst::new(0.0).is_err());
}

#[test]
fn gram_of_k_is_fbm_covariance() {
    let grid = TimeGrid::uniform(16).unwrap();
    for hh in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let g = gram_matrix(&KernelSpec::KFbm { hurst: h(hh) }, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                let want = fbm_covariance(h(hh), grid.nodes()[i], grid.nodes()[j]);
                worst = worst.max(rel(g.get(i, j), want));
            }
        }
        assert!(worst < 1e-4, "H={hh}: worst relative error {worst}");
    }
}

#[test]
fn operator_identity_integrates() {
    let grid = TimeGrid::uniform(10).unwrap();
    let ones = vec![1.0; 10];
    let y = apply_operator(&KernelSpec::Identity, &ones, &grid).unwrap();
    for (yi, t) in y.iter().zip(grid.nodes()) {
        assert!((yi - t).abs() < 1e-12);
    }
    let lin: Vec<f64> = grid.nodes().to_vec();
    let y = apply_operator(&KernelSpec::Identity, &lin, &grid).unwrap();
    for (yi, t) in y.iter().zip(grid.nodes()) {
        assert!((yi - t * t / 2.0).abs() < 1e-12);
    }
}

#[test]
fn operator_k07_on_constants() {
    // ∫_0^t K^H(t,s) ds = κ a B(3/2 - H, H - 1/2) t^{H+1/2} / (H + 1/2)
    let grid = TimeGrid::uniform(128).unwrap();
    let y = apply_operator(&KernelSpec::KFbm { hurst: h(0.7) }, &vec![1.0; 128], &grid).unwrap();
    let a = 0.2;
    let c = KAPPA_07 * a * std::f64::consts::PI / ((std::f64::consts::PI * a).sin() * 1.2);
    for (yi, t) in y.iter().zip(grid.nodes()) {
        let want = c * t.powf(1.2);
        assert!(rel(*yi, want) < 1e-5, "t={t}: {yi} vs {want}");
    }
}

#[test]
fn dimension_mismatch() {
    let grid = TimeGrid::uniform(4).unwrap();
    assert!(matches!(
        apply_operator(&KernelSpec::Identity, &[1.0; 3], &grid),
        Err(Error::DimensionMismatch { expected: 4, got: 3 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_positive(hh in 0.05f64..0.95, beta in -2.0f64..2.0, xi in 0.1f64..3.0,
                            t in 0.05f64..1.0, frac in 0.01f64..0.99) {
        let s = t * frac;
        for spec in [
            KernelSpec::KFbm { hurst: h(hh) },
            KernelSpec::FFou { hurst: h(hh), beta, xi },
            KernelSpec::GEps { hurst: h(hh), beta, xi, eps: 0.5 },
            KernelSpec::GZero { hurst: h(hh), xi },
        ] {
            let v = eval_kernel(&spec, t, s).unwrap();
            prop_assert!(v > 0.0 && v.is_finite(), "{spec:?} at ({t},{s}) = {v}");
        }
    }

    #[test]
    fn beta_to_zero_recovers_k(hh in 0.1f64..0.9, xi in 0.5f64..2.0,
                              t in 0.05f64..1.0, frac in 0.01f64..0.99) {
        let s = t * frac;
        let f = eval_kernel(&KernelSpec::FFou { hurst: h(hh), beta: 1e-7, xi }, t, s).unwrap();
        let k = eval_kernel(&KernelSpec::KFbm { hurst: h(hh) }, t, s).unwrap();
        prop_assert!(rel(f, xi * k) < 1e-5);
    }

    #[test]
    fn gram_is_symmetric(hh in 0.1f64..0.9, beta in -1.5f64..1.5) {
        let grid = TimeGrid::uniform(6).unwrap();
        let g = gram_matrix(&KernelSpec::FFou { hurst: h(hh), beta, xi: 1.0 }, &grid).unwrap();
        prop_assert!(g.max_asymmetry() <= 1e-12);
        prop_assert!(rough_ldp::linalg::cholesky(&g).is_ok());
    }
}

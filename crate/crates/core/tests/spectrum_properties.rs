use proptest::prelude::*;
use rabi_cf_core::model::{ModelParams, Parity, SectorLabel};
use rabi_cf_core::oracle::{build_sector_tridiagonal, eigs_tridiagonal};
use rabi_cf_core::spectrum::{compute_spectrum, crosscheck_oracle, SpectrumConfig, DEFAULT_CROSSCHECK_TOL};

fn oracle(params: &ModelParams, sector: &SectorLabel) -> Vec<f64> {
    let m = build_sector_tridiagonal(params, sector, 400).unwrap();
    let cut = m.eligibility_cutoff();
    eigs_tridiagonal(&m, 400).unwrap().into_iter().filter(|e| *e < cut).collect()
}

fn energies(params: &ModelParams, sector: &SectorLabel, lo: f64, hi: f64) -> Vec<f64> {
    compute_spectrum(params, sector, lo, hi, &SpectrumConfig::for_window(params, lo, hi))
        .unwrap()
        .energies()
}

#[test]
fn two_photon_window_matches_oracle() {
    let p = ModelParams::k_photon(2, 1.0, 0.3, 0.2).unwrap();
    for parity in [Parity::Plus, Parity::Minus] {
        let s = SectorLabel::k_photon(2, 0, parity);
        let cfg = SpectrumConfig {
            accept_ill_conditioned: true,
            ..SpectrumConfig::for_window(&p, -1.0, 10.0)
        };
        let mut spec = compute_spectrum(&p, &s, -1.0, 10.0, &cfg).unwrap();
        let report = crosscheck_oracle(&mut spec, &oracle(&p, &s), DEFAULT_CROSSCHECK_TOL);
        assert!(report.passed, "{report:?}");
        assert!(report.matched.len() >= 5);
    }
}

#[test]
fn parity_flip_equals_delta_flip() {
    let plus_neg = ModelParams::two_mode(1.0, -0.7, 0.5).unwrap();
    let minus_pos = ModelParams::two_mode(1.0, 0.7, 0.5).unwrap();
    let a = energies(&minus_pos, &SectorLabel::two_mode(2, Parity::Minus), -1.0, 8.0);
    let b = energies(&plus_neg, &SectorLabel::two_mode(2, Parity::Plus), -1.0, 8.0);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
    }
}

#[test]
fn grid_doubling_keeps_roots() {
    let p = ModelParams::two_mode(1.0, 0.7, 0.5).unwrap();
    let s = SectorLabel::two_mode(1, Parity::Minus);
    let base = SpectrumConfig::for_window(&p, -1.0, 8.0);
    let a = compute_spectrum(&p, &s, -1.0, 8.0, &base).unwrap().energies();
    let doubled = SpectrumConfig { grid_points: 2 * base.grid_points, ..base };
    let b = compute_spectrum(&p, &s, -1.0, 8.0, &doubled).unwrap().energies();
    for x in &a {
        assert!(b.iter().any(|y| (x - y).abs() <= 1e-9), "lost {x}");
    }
}

#[test]
fn spectra_strictly_increasing_inside_window() {
    let p = ModelParams::k_photon(2, 1.0, 0.3, 0.2).unwrap();
    let s = SectorLabel::k_photon(2, 1, Parity::Minus);
    let e = energies(&p, &s, -1.0, 10.0);
    assert!(e.windows(2).all(|w| w[0] < w[1]));
    assert!(e.iter().all(|x| (-1.0..=10.0).contains(x)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn joint_scaling_covariance(lambda in 0.25f64..4.0, delta in 0.0f64..1.0, g in 0.1f64..0.8) {
        let p = ModelParams::two_mode(1.0, delta, g).unwrap();
        let s = SectorLabel::two_mode(1, Parity::Plus);
        let a = energies(&p, &s, -2.0, 6.0);
        let q = p.scaled(lambda);
        let b = energies(&q, &s, -2.0 * lambda, 6.0 * lambda);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((lambda * x - y).abs() <= 1e-10 * (lambda * x).abs().max(lambda));
        }
    }

    #[test]
    fn confirmed_roots_satisfy_both_conditions(delta in -1.0f64..1.0, g in 0.05f64..0.45) {
        let p = ModelParams::k_photon(2, 1.0, delta, g).unwrap();
        let s = SectorLabel::k_photon(2, 0, Parity::Plus);
        let spec = compute_spectrum(&p, &s, -1.0, 6.0, &SpectrumConfig::for_window(&p, -1.0, 6.0)).unwrap();
        for e in &spec.eigenvalues {
            prop_assert!(e.f_residual.abs() <= 1e-8 && e.pincherle_residual.abs() <= 1e-8);
        }
    }
}

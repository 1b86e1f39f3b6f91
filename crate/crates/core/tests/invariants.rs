use num_complex::Complex64;
use proptest::prelude::*;
use rabi_cf_core::bargmann::{eval_wavefunction, norm_log_terms, WavefunctionSeries};
use rabi_cf_core::contfrac::spectral_function;
use rabi_cf_core::model::{characteristic_roots, classify_regime, ModelParams, Parity, RegimeVerdict, SectorLabel};
use rabi_cf_core::oracle::{build_full_block, build_sector_tridiagonal, eigs_dense_symmetric, eigs_tridiagonal};
use rabi_cf_core::recurrence::{backward_minimal, forward_sequence};

fn two_mode_or_two_photon(two_photon: bool, delta: f64, ratio: f64) -> ModelParams {
    if two_photon {
        ModelParams::k_photon(2, 1.0, delta, 0.5 * ratio).unwrap()
    } else {
        ModelParams::two_mode(1.0, delta, ratio).unwrap()
    }
}

fn sector(p: &ModelParams, parity: Parity) -> SectorLabel {
    match p.family {
        rabi_cf_core::Family::TwoMode => SectorLabel::two_mode(1, parity),
        rabi_cf_core::Family::KPhoton { k } => SectorLabel::k_photon(k, 0, parity),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn small_root_inside_unit_disk_when_normalizable(two_photon: bool, delta in -1.0f64..1.0, ratio in 0.01f64..0.99) {
        let p = two_mode_or_two_photon(two_photon, delta, ratio);
        prop_assert_eq!(classify_regime(&p).verdict, RegimeVerdict::Normalizable);
        let roots = characteristic_roots(&p).unwrap();
        let bound = if two_photon { 0.5 } else { 1.0 };
        prop_assert!(roots.t1.norm() < bound);
        prop_assert!(roots.t2.norm() > bound);
    }

    #[test]
    fn sector_spectra_union_to_full_block(two_photon: bool, delta in -1.0f64..1.0, ratio in 0.05f64..0.8) {
        let p = two_mode_or_two_photon(two_photon, delta, ratio);
        let n = 40;
        let mut union = Vec::new();
        for parity in [Parity::Plus, Parity::Minus] {
            let m = build_sector_tridiagonal(&p, &sector(&p, parity), n).unwrap();
            union.extend(eigs_tridiagonal(&m, n).unwrap());
        }
        union.sort_by(f64::total_cmp);
        let block = sector(&p, Parity::Plus).block;
        let dense = eigs_dense_symmetric(&build_full_block(&p, block, n).unwrap());
        prop_assert!(dense.converged);
        let scale = dense.values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (a, b) in union.iter().zip(&dense.values) {
            prop_assert!((a - b).abs() <= 1e-9 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn reversed_basis_keeps_eigenvalues(two_photon: bool, delta in -1.0f64..1.0, ratio in 0.05f64..0.9) {
        let p = two_mode_or_two_photon(two_photon, delta, ratio);
        let m = build_sector_tridiagonal(&p, &sector(&p, Parity::Minus), 60).unwrap();
        let a = eigs_tridiagonal(&m, 60).unwrap();
        let b = eigs_tridiagonal(&m.reversed(), 60).unwrap();
        let scale = m.norm_bound();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn zero_coupling_eigenvalues_are_the_diagonal(two_photon: bool, delta in -1.0f64..1.0) {
        let p = two_mode_or_two_photon(two_photon, delta, 0.0);
        let m = build_sector_tridiagonal(&p, &sector(&p, Parity::Plus), 30).unwrap();
        let mut diag = m.diag.clone();
        diag.sort_by(f64::total_cmp);
        prop_assert_eq!(eigs_tridiagonal(&m, 30).unwrap(), diag);
    }

    #[test]
    fn spectral_function_is_deterministic(two_photon: bool, delta in 0.0f64..1.0, ratio in 0.1f64..0.9, energy in -1.0f64..8.0) {
        let p = two_mode_or_two_photon(two_photon, delta, ratio);
        let s = sector(&p, Parity::Plus);
        let a = spectral_function(&p, &s, energy, 1e-14, 100_000).unwrap();
        let b = spectral_function(&p, &s, energy, 1e-14, 100_000).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn wavefunction_is_linear_in_coefficients(
        ratio in 0.1f64..0.9,
        energy in -1.0f64..4.0,
        alpha in -3.0f64..3.0,
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
    ) {
        let p = ModelParams::two_mode(1.0, 0.7, ratio).unwrap();
        let seq = backward_minimal(&p, &SectorLabel::two_mode(1, Parity::Plus), energy, 120, 200).unwrap();
        let z = Complex64::new(re, im);
        let base = WavefunctionSeries::from_sequence(&seq, z, 120);
        let scaled = WavefunctionSeries {
            coefficients: base.coefficients.iter().map(|c| alpha * c).collect(),
            ..base.clone()
        };
        let u = eval_wavefunction(&base).unwrap().value;
        let v = eval_wavefunction(&scaled).unwrap().value;
        let bound: f64 = base.coefficients.iter().enumerate().map(|(n, c)| c.abs() * z.norm().powi(n as i32)).sum();
        prop_assert!((v - u * alpha).norm() <= 1e-13 * alpha.abs().max(1.0) * bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn norm_terms_stay_finite_at_large_index(two_photon: bool, ratio in 0.1f64..1.5, energy in -1.0f64..6.0) {
        let p = two_mode_or_two_photon(two_photon, 0.7, ratio);
        let seq = forward_sequence(&p, &sector(&p, Parity::Plus), energy, 100_001).unwrap();
        let est = norm_log_terms(&seq).unwrap();
        prop_assert!(est.log_terms.iter().all(|t| t.is_finite()));
        prop_assert!(est.ratio_sequence.iter().all(|r| r.is_finite()));
    }
}

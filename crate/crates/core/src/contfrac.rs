//! Continued fractions and the spectral function.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_regime, ModelParams, RegimeVerdict, SectorLabel};
use crate::recurrence::SectorRecurrence;

/// Substitute for vanishing Lentz partials.
pub const TINY: f64 = 1.0e-30;
pub const DEFAULT_TOL: f64 = 1.0e-14;
pub const DEFAULT_MAX_TERMS: usize = 100_000;

/// Guards firing this many iterations (or fewer) before termination mark a
/// suspected pole.
const POLE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfResult {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub suspected_pole: bool,
}

/// Evaluates K_{n≥1}(a_n / b_n) = a_1/(b_1 + a_2/(b_2 + …)) by the modified
/// Lentz method.
pub fn evaluate_cf(
    numerators: impl FnMut(usize) -> f64,
    denominators: impl FnMut(usize) -> f64,
    tol: f64,
    max_terms: usize,
) -> Result<CfResult> {
    evaluate_cf_from(numerators, denominators, tol, max_terms, 1)
}

/// As [`evaluate_cf`], but the convergence test is only consulted from term
/// `min_terms` on. Coefficients that change sign in their early terms can
/// otherwise produce a spuriously converged factor.
pub fn evaluate_cf_from(
    mut numerators: impl FnMut(usize) -> f64,
    mut denominators: impl FnMut(usize) -> f64,
    tol: f64,
    max_terms: usize,
    min_terms: usize,
) -> Result<CfResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    if max_terms == 0 {
        return Err(Error::InvalidArgument("max_terms must be >= 1".into()));
    }
    let a1 = numerators(1);
    if a1 == 0.0 {
        return Ok(CfResult {
            value: 0.0,
            converged: true,
            iterations: 1,
            suspected_pole: false,
        });
    }
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    let mut last_guard: Option<usize> = None;
    for j in 1..=max_terms {
        let a = if j == 1 { a1 } else { numerators(j) };
        let b = denominators(j);
        d = b + a * d;
        if d.abs() < TINY {
            d = TINY;
            last_guard = Some(j);
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
            last_guard = Some(j);
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if j >= min_terms && (delta - 1.0).abs() < tol {
            return Ok(CfResult {
                value: f,
                converged: true,
                iterations: j,
                suspected_pole: last_guard.is_some_and(|g| j - g < POLE_WINDOW),
            });
        }
    }
    Ok(CfResult {
        value: f,
        converged: false,
        iterations: max_terms,
        suspected_pole: last_guard.is_some_and(|g| max_terms - g < POLE_WINDOW),
    })
}

pub(crate) fn require_normalizable(params: &ModelParams) -> Result<()> {
    match classify_regime(params).verdict {
        RegimeVerdict::Normalizable => Ok(()),
        RegimeVerdict::NonNormalizable => Err(Error::RegimeUnsupported {
            verdict: RegimeVerdict::NonNormalizable,
            reason: "the characteristic roots have equal modulus; no minimal solution and no normalizable eigenstates",
        }),
        RegimeVerdict::UndefinedKGe3 => Err(Error::RegimeUnsupported {
            verdict: RegimeVerdict::UndefinedKGe3,
            reason: "for k >= 3 the Hamiltonian cannot be completely diagonalized: no eigenstate is normalizable",
        }),
    }
}

/// F(E) = C_0(E) + K_{n≥1}(−D_n / C_n(E)); its zeros are the regular
/// energies of the sector.
pub fn spectral_function(
    params: &ModelParams,
    sector: &SectorLabel,
    energy: f64,
    tol: f64,
    max_terms: usize,
) -> Result<CfResult> {
    let rec = SectorRecurrence::new(params, sector)?;
    require_normalizable(params)?;
    spectral_function_with(&rec, energy, tol, max_terms)
}

pub(crate) fn spectral_function_with(
    rec: &SectorRecurrence,
    energy: f64,
    tol: f64,
    max_terms: usize,
) -> Result<CfResult> {
    let tail = evaluate_cf_from(
        |n| -rec.at(n, energy).d,
        |n| rec.at(n, energy).c,
        tol,
        max_terms,
        rec.turning_index(energy) + 2,
    )?;
    Ok(CfResult {
        value: rec.at(0, energy).c + tail.value,
        ..tail
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parity;
    use crate::recurrence::pincherle_residual;
    use approx::assert_relative_eq;

    #[test]
    fn empty_fraction() {
        let r = evaluate_cf(|_| 0.0, |_| 3.0, 1e-14, 100).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn periodic_fractions() {
        let r = evaluate_cf(|_| 1.0, |_| 2.0, 1e-14, 1000).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 2f64.sqrt() - 1.0, max_relative = 1e-14);
        let r = evaluate_cf(|_| 1.0, |_| 1.0, 1e-14, 1000).unwrap();
        assert_relative_eq!(r.value, (5f64.sqrt() - 1.0) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn tangent_fraction() {
        // tan x = x/(1 − x²/(3 − x²/(5 − …)))
        let x: f64 = 0.7;
        let r = evaluate_cf(
            |n| if n == 1 { x } else { -x * x },
            |n| (2 * n - 1) as f64,
            1e-15,
            1000,
        )
        .unwrap();
        assert_relative_eq!(r.value, x.tan(), max_relative = 1e-14);
    }

    #[test]
    fn exhausted_terms_reported() {
        let r = evaluate_cf(|_| 1.0, |_| 1.0, 1e-14, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(evaluate_cf(|_| 1.0, |_| 1.0, 0.0, 3).is_err());
        assert!(evaluate_cf(|_| 1.0, |_| 1.0, 1e-3, 0).is_err());
    }

    #[test]
    fn zero_denominator_sets_guard() {
        // 1/(0 + 1/(1 + 1/(1 + …))): the first partial denominator vanishes.
        let r = evaluate_cf(|_| 1.0, |n| if n == 1 { 0.0 } else { 1.0 }, 1e-14, 1000).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 1.0 / ((5f64.sqrt() - 1.0) / 2.0), max_relative = 1e-13);
        let r = evaluate_cf(|_| 1.0, |n| if n == 1 { 0.0 } else { 1.0 }, 1e-3, 1000).unwrap();
        assert!(r.iterations < 20);
    }

    #[test]
    fn spectral_zero_two_mode_closed_form() {
        let p = ModelParams::two_mode(1.0, 0.0, 0.5).unwrap();
        let s = SectorLabel::two_mode(1, Parity::Plus);
        let e0 = 2.0 * 0.75f64.sqrt() * 0.5 - 1.0;
        let f = spectral_function(&p, &s, e0, DEFAULT_TOL, DEFAULT_MAX_TERMS).unwrap();
        assert!(f.converged);
        assert!(f.value.abs() < 1e-10, "{}", f.value);
    }

    #[test]
    fn spectral_zero_two_photon_closed_form() {
        let p = ModelParams::k_photon(2, 1.0, 0.0, 0.25).unwrap();
        let s = SectorLabel::k_photon(2, 0, Parity::Plus);
        let e0 = 2.0 * (1.0f64 - 0.25).sqrt() * 0.25 - 0.5;
        assert_relative_eq!(e0, -0.0669872981077807, max_relative = 1e-12);
        let f = spectral_function(&p, &s, e0, DEFAULT_TOL, DEFAULT_MAX_TERMS).unwrap();
        assert!(f.value.abs() < 1e-10, "{}", f.value);
    }

    #[test]
    fn spectral_function_agrees_with_miller_residual() {
        let p = ModelParams::two_mode(1.0, 0.7, 0.5).unwrap();
        for s in [SectorLabel::two_mode(1, Parity::Plus), SectorLabel::two_mode(2, Parity::Minus)] {
            for i in 0..40 {
                let e = -1.0 + 0.3137 * i as f64;
                let f = spectral_function(&p, &s, e, DEFAULT_TOL, DEFAULT_MAX_TERMS).unwrap();
                let r = pincherle_residual(&p, &s, e).unwrap();
                assert!((f.value - r).abs() <= 1e-8 * (1.0 + r.abs()), "E = {e}: {} vs {r}", f.value);
            }
        }
    }

    #[test]
    fn deterministic() {
        let p = ModelParams::k_photon(2, 1.0, 0.3, 0.2).unwrap();
        let s = SectorLabel::k_photon(2, 1, Parity::Minus);
        let a = spectral_function(&p, &s, 3.3, DEFAULT_TOL, DEFAULT_MAX_TERMS).unwrap();
        let b = spectral_function(&p, &s, 3.3, DEFAULT_TOL, DEFAULT_MAX_TERMS).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn unsupported_regimes() {
        let s = SectorLabel::k_photon(3, 0, Parity::Plus);
        let p = ModelParams::k_photon(3, 1.0, 0.3, 0.1).unwrap();
        assert!(matches!(
            spectral_function(&p, &s, 0.0, DEFAULT_TOL, 10),
            Err(Error::RegimeUnsupported { verdict: RegimeVerdict::UndefinedKGe3, .. })
        ));
        let p = ModelParams::two_mode(1.0, 0.3, 1.0).unwrap();
        let s = SectorLabel::two_mode(1, Parity::Plus);
        assert!(matches!(
            spectral_function(&p, &s, 0.0, DEFAULT_TOL, 10),
            Err(Error::RegimeUnsupported { verdict: RegimeVerdict::NonNormalizable, .. })
        ));
    }
}

//! Normalizability diagnostics in the Bargmann representation.
//!
//! Norms are handled only through their coefficient series
//! Σ |c_n|² w_n, with w_n = n!(n+2κ−1)! for two-mode blocks and
//! w_n = (kn+r)! for k-photon blocks, all in log space.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{characteristic_roots, classify_regime, Family, ModelParams, RegimeVerdict, ResolvedBlock, SectorLabel};
use crate::recurrence::{forward_sequence, SolutionSequence};
use crate::special::ln_factorial;

pub const MIN_VERDICT_TERMS: usize = 64;
pub const DEFAULT_DIVERGENCE_N_MAX: usize = 2000;
pub const DEFAULT_TAIL_GROWTH: f64 = 1.0e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormVerdict {
    Converging,
    Diverging,
    Inconclusive,
}

impl std::fmt::Display for NormVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormVerdict::Converging => "converging",
            NormVerdict::Diverging => "diverging",
            NormVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    /// ln(|c_n|² w_n).
    pub log_terms: Vec<f64>,
    /// term_{n+1} / term_n.
    pub ratio_sequence: Vec<f64>,
    pub predicted_limit: Option<f64>,
    pub verdict: NormVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictSummary {
    pub verdict: NormVerdict,
    pub tail_mean: f64,
    pub tail_std: f64,
    pub tail_len: usize,
}

/// ln w_n for the block of `sector`.
pub fn ln_norm_weight(block: ResolvedBlock, n: usize) -> f64 {
    let n = n as f64;
    match block {
        ResolvedBlock::TwoMode { two_kappa } => ln_factorial(n) + ln_factorial(n + f64::from(two_kappa) - 1.0),
        ResolvedBlock::KPhoton { k, r } => ln_factorial(f64::from(k) * n + f64::from(r)),
    }
}

/// |t1|² for two-mode blocks, 4|t1|² for k = 2.
pub fn predicted_ratio_limit(params: &ModelParams) -> Option<f64> {
    let roots = characteristic_roots(params).ok()?;
    match params.family {
        Family::TwoMode => Some(roots.t1.norm_sqr()),
        Family::KPhoton { k: 2 } => Some(4.0 * roots.t1.norm_sqr()),
        Family::KPhoton { .. } => None,
    }
}

/// Log-space norm terms and their ratios. Trailing exact zeros are dropped;
/// a series that terminates is reported as converging.
pub fn norm_log_terms(coeffs: &SolutionSequence) -> Result<NormEstimate> {
    let block = coeffs.params.resolve(&coeffs.sector)?;
    let seq = &coeffs.values;
    let mut len = seq.len();
    while len > 1 && seq.signum(len - 1) == 0.0 {
        len -= 1;
    }
    let log_terms: Vec<f64> = (0..len)
        .map(|n| 2.0 * seq.ln_abs(n) + ln_norm_weight(block, n))
        .collect();
    let ratio_sequence: Vec<f64> = log_terms.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    let predicted_limit = predicted_ratio_limit(&coeffs.params);
    let verdict = if len < seq.len() && len < MIN_VERDICT_TERMS {
        NormVerdict::Converging
    } else {
        tail_statistic(&ratio_sequence).map_or(NormVerdict::Inconclusive, |s| s.verdict)
    };
    Ok(NormEstimate {
        log_terms,
        ratio_sequence,
        predicted_limit,
        verdict,
    })
}

fn tail_statistic(ratios: &[f64]) -> Option<VerdictSummary> {
    let tail: Vec<f64> = ratios[ratios.len() - ratios.len() / 4..]
        .iter()
        .copied()
        .filter(|r| r.is_finite())
        .collect();
    if tail.len() < 2 {
        return None;
    }
    let m = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / m;
    let std = (tail.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let verdict = if 1.0 - mean >= 3.0 * std && mean < 1.0 {
        NormVerdict::Converging
    } else if mean - 1.0 >= 3.0 * std && mean > 1.0 {
        NormVerdict::Diverging
    } else {
        NormVerdict::Inconclusive
    };
    Some(VerdictSummary {
        verdict,
        tail_mean: mean,
        tail_std: std,
        tail_len: tail.len(),
    })
}

/// Ratio test on the last quartile of term ratios.
pub fn ratio_verdict(est: &NormEstimate) -> Result<VerdictSummary> {
    if est.log_terms.len() < MIN_VERDICT_TERMS {
        return Err(Error::TooFewTerms {
            needed: MIN_VERDICT_TERMS,
            got: est.log_terms.len(),
        });
    }
    Ok(tail_statistic(&est.ratio_sequence).unwrap_or(VerdictSummary {
        verdict: NormVerdict::Inconclusive,
        tail_mean: f64::NAN,
        tail_std: f64::NAN,
        tail_len: 0,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionSeries {
    pub coefficients: Vec<f64>,
    pub z: Complex64,
    pub truncation: usize,
}

impl WavefunctionSeries {
    pub fn from_sequence(seq: &SolutionSequence, z: Complex64, truncation: usize) -> Self {
        Self {
            coefficients: seq.values.values(),
            z,
            truncation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavefunctionValue {
    pub value: Complex64,
    /// Geometric bound on the omitted tail; absent when the last term ratio
    /// is not below one.
    pub tail_bound: Option<f64>,
}

/// Σ_{n<N} c_n zⁿ by Horner's rule, N = truncation.
pub fn eval_wavefunction(w: &WavefunctionSeries) -> Result<WavefunctionValue> {
    let n = w.truncation;
    if n == 0 || n > w.coefficients.len() {
        return Err(Error::InvalidArgument(format!(
            "truncation {n} outside 1..={}",
            w.coefficients.len()
        )));
    }
    let c = &w.coefficients[..n];
    let value = c
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &cn| acc * w.z + cn);
    let tail_bound = if n < 2 {
        None
    } else {
        let zabs = w.z.norm();
        let last = c[n - 1].abs() * zabs.powi(n as i32 - 1);
        let rho = if c[n - 2] == 0.0 {
            if c[n - 1] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (c[n - 1] / c[n - 2]).abs() * zabs
        };
        (rho < 1.0).then(|| if last == 0.0 { 0.0 } else { last * rho / (1.0 - rho) })
    };
    Ok(WavefunctionValue { value, tail_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceCriteria {
    pub n_max: usize,
    /// Threshold on P(n_max)/P(n_max/2) − 1 for the partial norm sums P.
    pub tail_growth: f64,
}

impl Default for DivergenceCriteria {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_DIVERGENCE_N_MAX,
            tail_growth: DEFAULT_TAIL_GROWTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceSample {
    pub energy: f64,
    pub log_first_term: f64,
    pub log_half_sum: f64,
    pub log_partial_sum: f64,
    /// P(n_max) / first term.
    pub log_growth_factor: f64,
    /// P(n_max)/P(n_max/2) − 1.
    pub tail_growth: f64,
    pub diverging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub params: ModelParams,
    pub sector: SectorLabel,
    pub verdict: RegimeVerdict,
    pub criteria: DivergenceCriteria,
    pub samples: Vec<DivergenceSample>,
    pub all_diverging: bool,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Partial norm sums of a coefficient sequence: a sum still growing between
/// n_max/2 and n_max is the divergence signature.
pub fn divergence_signature(seq: &SolutionSequence, criteria: &DivergenceCriteria) -> Result<DivergenceSample> {
    if criteria.n_max < 4 || seq.len() <= criteria.n_max {
        return Err(Error::InvalidArgument(format!(
            "need n_max >= 4 and at least n_max + 1 coefficients (n_max = {}, have {})",
            criteria.n_max,
            seq.len()
        )));
    }
    let est = norm_log_terms(seq)?;
    let half = criteria.n_max / 2;
    let mut acc = f64::NEG_INFINITY;
    let mut log_half_sum = f64::NEG_INFINITY;
    for (n, t) in est.log_terms.iter().take(criteria.n_max + 1).enumerate() {
        acc = log_add(acc, *t);
        if n == half {
            log_half_sum = acc;
        }
    }
    if est.log_terms.len() <= half {
        log_half_sum = acc;
    }
    let log_first_term = est.log_terms[0];
    let tail_growth = (acc - log_half_sum).exp_m1();
    Ok(DivergenceSample {
        energy: seq.energy,
        log_first_term,
        log_half_sum,
        log_partial_sum: acc,
        log_growth_factor: acc - log_first_term,
        tail_growth,
        diverging: !(tail_growth <= criteria.tail_growth),
    })
}

/// Forward-generated norm partial sums at each sample energy, for
/// parameters outside the normalizable regime.
pub fn divergence_report(
    params: &ModelParams,
    sector: &SectorLabel,
    energies: &[f64],
    criteria: &DivergenceCriteria,
) -> Result<DivergenceReport> {
    params.validate()?;
    let verdict = classify_regime(params).verdict;
    if verdict == RegimeVerdict::Normalizable {
        return Err(Error::RegimeMismatch);
    }
    let samples = energies
        .iter()
        .map(|&e| {
            let seq = forward_sequence(params, sector, e, criteria.n_max + 1)?;
            divergence_signature(&seq, criteria)
        })
        .collect::<Result<Vec<_>>>()?;
    let all_diverging = samples.iter().all(|s| s.diverging);
    Ok(DivergenceReport {
        params: *params,
        sector: *sector,
        verdict,
        criteria: *criteria,
        samples,
        all_diverging,
    })
}

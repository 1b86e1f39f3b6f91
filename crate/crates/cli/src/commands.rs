//! Command implementations. Each returns a [`Report`]; nothing here writes
//! to disk.

use num_complex::Complex64;
use rabi_cf_core::bargmann::{divergence_report, eval_wavefunction, DivergenceCriteria, DivergenceReport, WavefunctionSeries};
use rabi_cf_core::contfrac::spectral_function;
use rabi_cf_core::model::{
    asymptotic_exponents, characteristic_roots, classify_regime, Family, ModelParams, PuiseuxShape, RegimeVerdict,
    SectorLabel,
};
use rabi_cf_core::oracle::{
    build_full_block, build_sector_tridiagonal, convergence_study, eigs_dense_symmetric, eigs_tridiagonal,
    ConvergenceTable,
};
use rabi_cf_core::recurrence::{backward_minimal, default_buffer};
use rabi_cf_core::spectrum::{compute_spectrum, crosscheck_oracle, CrosscheckReport, SpectrumResult};
use rabi_cf_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{OracleMethod, RunConfig};
use crate::output::{num, opt_num, Report, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Regime verdict, characteristic roots and asymptotic exponents.
    Regime,
    /// Sector labels selected by the configuration.
    Blocks,
    /// Continued-fraction eigenvalues per sector.
    Spectrum,
    /// Truncated-matrix eigenvalues per sector (or block, for dense).
    Oracle,
    /// Spectrum plus oracle with level-by-level gaps.
    Compare,
    /// Samples of the minimal-solution series on the real and imaginary axes.
    Wavefunction,
    /// Norm partial-sum growth at trial energies (unsupported regimes).
    Diverge,
    /// Oracle levels across increasing truncations.
    Convergence,
}

/// Failures that are findings rather than errors in the inputs.
#[derive(Debug, thiserror::Error)]
pub enum RunFailure {
    #[error("oracle cross-check failed in {failed} of {total} sector(s); output written")]
    CrosscheckFailed { failed: usize, total: usize },
}

pub struct Invocation<'a> {
    pub config: &'a RunConfig,
    pub trace: bool,
}

pub fn run(command: Command, inv: &Invocation) -> anyhow::Result<Report> {
    let params = inv.config.params()?;
    match command {
        Command::Regime => regime(&params),
        Command::Blocks => blocks(&params, inv.config),
        Command::Spectrum => spectrum(&params, inv),
        Command::Oracle => oracle(&params, inv.config),
        Command::Compare => compare(&params, inv.config),
        Command::Wavefunction => wavefunction(&params, inv.config),
        Command::Diverge => diverge(&params, inv.config),
        Command::Convergence => convergence(&params, inv.config),
    }
}

fn family_fields(params: &ModelParams) -> (&'static str, Option<u32>) {
    match params.family {
        Family::TwoMode => ("two-mode", None),
        Family::KPhoton { k } => ("k-photon", Some(k)),
    }
}

#[derive(Serialize)]
struct ExponentsDoc {
    a: f64,
    alpha: f64,
    b: f64,
    beta: f64,
    shape: PuiseuxShape,
}

#[derive(Serialize)]
struct RegimeDoc {
    family: &'static str,
    k: Option<u32>,
    omega: f64,
    delta: f64,
    g: f64,
    verdict: RegimeVerdict,
    ratio: Option<f64>,
    t1: Option<f64>,
    t1_im: Option<f64>,
    t2: Option<f64>,
    t2_im: Option<f64>,
    distinct_real: Option<bool>,
    exponents: Option<ExponentsDoc>,
}

fn regime(params: &ModelParams) -> anyhow::Result<Report> {
    let class = classify_regime(params);
    // Roots and exponents need g ≠ 0; the roots also need k ≤ 2 with k ≠ 1.
    let roots = match characteristic_roots(params) {
        Ok(r) => Some(r),
        Err(CoreError::NoCharacteristicEquation { .. } | CoreError::CouplingZero) => None,
        Err(e) => return Err(e.into()),
    };
    let exponents = match asymptotic_exponents(params) {
        Ok(x) => Some(x),
        Err(CoreError::CouplingZero) => None,
        Err(e) => return Err(e.into()),
    };
    let (family, k) = family_fields(params);
    let doc = RegimeDoc {
        family,
        k,
        omega: params.omega,
        delta: params.delta,
        g: params.g,
        verdict: class.verdict,
        ratio: class.ratio,
        t1: roots.map(|r| r.t1.re),
        t1_im: roots.map(|r| r.t1.im),
        t2: roots.map(|r| r.t2.re),
        t2_im: roots.map(|r| r.t2.im),
        distinct_real: roots.map(|r| r.distinct_real),
        exponents: exponents.map(|x| ExponentsDoc {
            a: x.a,
            alpha: x.alpha,
            b: x.b,
            beta: x.beta,
            shape: x.puiseux_shape(),
        }),
    };
    let mut table = Table::new(&[
        "family", "k", "omega", "delta", "g", "verdict", "ratio", "t1", "t1_im", "t2", "t2_im", "distinct_real", "a",
        "alpha", "b", "beta", "shape",
    ]);
    let shape = doc.exponents.as_ref().map(|x| match x.shape {
        PuiseuxShape::Above => "above",
        PuiseuxShape::Collinear => "collinear",
        PuiseuxShape::Below => "below",
    });
    table.push(vec![
        family.into(),
        k.map(|k| k.to_string()).unwrap_or_default(),
        num(params.omega),
        num(params.delta),
        num(params.g),
        class.verdict.to_string(),
        opt_num(doc.ratio),
        opt_num(doc.t1),
        opt_num(doc.t1_im),
        opt_num(doc.t2),
        opt_num(doc.t2_im),
        doc.distinct_real.map(|b| b.to_string()).unwrap_or_default(),
        opt_num(doc.exponents.as_ref().map(|x| x.a)),
        opt_num(doc.exponents.as_ref().map(|x| x.alpha)),
        opt_num(doc.exponents.as_ref().map(|x| x.b)),
        opt_num(doc.exponents.as_ref().map(|x| x.beta)),
        shape.unwrap_or_default().into(),
    ]);
    Report::new(table, &doc)
}

#[derive(Serialize)]
struct SectorEntry {
    block: String,
    block_value: f64,
    parity: String,
}

#[derive(Serialize)]
struct BlocksDoc {
    family: &'static str,
    k: Option<u32>,
    sectors: Vec<SectorEntry>,
}

fn blocks(params: &ModelParams, config: &RunConfig) -> anyhow::Result<Report> {
    let sectors = config.sectors(params)?;
    let mut table = Table::new(&["block", "block_value", "parity"]);
    let entries: Vec<SectorEntry> = sectors
        .iter()
        .map(|s| SectorEntry {
            block: s.block.to_string(),
            block_value: s.block.value(),
            parity: s.parity.to_string(),
        })
        .collect();
    for e in &entries {
        table.push(vec![e.block.clone(), num(e.block_value), e.parity.clone()]);
    }
    let (family, k) = family_fields(params);
    Report::new(table, &BlocksDoc { family, k, sectors: entries })
}

fn sector_spectrum(params: &ModelParams, config: &RunConfig, sector: &SectorLabel) -> rabi_cf_core::Result<SpectrumResult> {
    let window = config.window(params, sector);
    let sc = config.spectrum_config(params, window);
    compute_spectrum(params, sector, window.0, window.1, &sc)
}

#[derive(Serialize, Clone, Copy)]
struct TracePoint {
    energy: f64,
    f: f64,
    converged: bool,
    suspected_pole: bool,
}

fn sector_trace(params: &ModelParams, config: &RunConfig, sector: &SectorLabel) -> rabi_cf_core::Result<Vec<TracePoint>> {
    let window = config.window(params, sector);
    let sc = config.spectrum_config(params, window);
    let n = sc.grid_points.max(2);
    let step = (window.1 - window.0) / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let energy = if i == n - 1 { window.1 } else { window.0 + step * i as f64 };
            let r = spectral_function(params, sector, energy, sc.cf_tol, sc.max_terms)?;
            Ok(TracePoint {
                energy,
                f: r.value,
                converged: r.converged,
                suspected_pole: r.suspected_pole,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SpectrumSector {
    #[serde(flatten)]
    result: SpectrumResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<TracePoint>>,
}

#[derive(Serialize)]
struct SpectrumDoc {
    sectors: Vec<SpectrumSector>,
}

fn spectrum(params: &ModelParams, inv: &Invocation) -> anyhow::Result<Report> {
    let config = inv.config;
    let sectors = config.sectors(params)?;
    let results = sectors
        .par_iter()
        .map(|s| {
            let result = sector_spectrum(params, config, s)?;
            let trace = if inv.trace { Some(sector_trace(params, config, s)?) } else { None };
            Ok(SpectrumSector { result, trace })
        })
        .collect::<rabi_cf_core::Result<Vec<_>>>()?;

    let mut table = Table::new(&["block", "parity", "index", "energy", "f_residual", "pincherle_residual"]);
    let mut trace_table = Table::new(&["block", "parity", "energy", "f", "converged", "suspected_pole"]);
    for sec in &results {
        let s = sec.result.sector;
        for (i, ev) in sec.result.eigenvalues.iter().enumerate() {
            table.push(vec![
                s.block.to_string(),
                s.parity.to_string(),
                i.to_string(),
                num(ev.energy),
                num(ev.f_residual),
                num(ev.pincherle_residual),
            ]);
        }
        for p in sec.trace.iter().flatten() {
            trace_table.push(vec![
                s.block.to_string(),
                s.parity.to_string(),
                num(p.energy),
                num(p.f),
                p.converged.to_string(),
                p.suspected_pole.to_string(),
            ]);
        }
    }
    let mut report = Report::new(table, &SpectrumDoc { sectors: results })?;
    if inv.trace {
        report.side_tables.push(("trace", trace_table));
    }
    Ok(report)
}

#[derive(Serialize)]
struct OracleLevels {
    block: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    parity: Option<String>,
    truncation: usize,
    /// Levels above this energy are affected by the truncation edge.
    eligibility_cutoff: Option<f64>,
    energies: Vec<f64>,
}

#[derive(Serialize)]
struct OracleDoc {
    method: OracleMethod,
    levels: Vec<OracleLevels>,
}

fn oracle(params: &ModelParams, config: &RunConfig) -> anyhow::Result<Report> {
    let n = config.oracle.truncation;
    let count = config.window.levels;
    let levels = match config.oracle.method {
        OracleMethod::Tridiagonal => config
            .sectors(params)?
            .par_iter()
            .map(|s| {
                let m = build_sector_tridiagonal(params, s, n)?;
                Ok(OracleLevels {
                    block: s.block.to_string(),
                    parity: Some(s.parity.to_string()),
                    truncation: n,
                    eligibility_cutoff: Some(m.eligibility_cutoff()),
                    energies: eigs_tridiagonal(&m, count.min(m.order()))?,
                })
            })
            .collect::<rabi_cf_core::Result<Vec<_>>>()?,
        OracleMethod::Dense => config
            .blocks(params)?
            .par_iter()
            .map(|b| {
                let m = build_full_block(params, *b, n)?;
                let r = eigs_dense_symmetric(&m);
                if !r.converged {
                    return Err(CoreError::NoConvergence {
                        what: "dense Jacobi eigensolver",
                        iterations: r.sweeps,
                    });
                }
                let mut energies = r.values;
                energies.truncate(count);
                Ok(OracleLevels {
                    block: b.to_string(),
                    parity: None,
                    truncation: n,
                    eligibility_cutoff: None,
                    energies,
                })
            })
            .collect::<rabi_cf_core::Result<Vec<_>>>()?,
    };
    let mut table = Table::new(&["block", "parity", "index", "energy", "truncation"]);
    for l in &levels {
        for (i, e) in l.energies.iter().enumerate() {
            table.push(vec![
                l.block.clone(),
                l.parity.clone().unwrap_or_default(),
                i.to_string(),
                num(*e),
                n.to_string(),
            ]);
        }
    }
    Report::new(
        table,
        &OracleDoc {
            method: config.oracle.method,
            levels,
        },
    )
}

#[derive(Serialize)]
struct CompareSector {
    #[serde(flatten)]
    result: SpectrumResult,
    crosscheck: CrosscheckReport,
}

#[derive(Serialize)]
struct CompareDoc {
    truncation: usize,
    passed: bool,
    sectors: Vec<CompareSector>,
}

fn compare(params: &ModelParams, config: &RunConfig) -> anyhow::Result<Report> {
    let sectors = config.sectors(params)?;
    let n = config.oracle.truncation;
    let match_tol = config.numerics.crosscheck_tol * params.omega;
    let results = sectors
        .par_iter()
        .map(|s| {
            let mut result = sector_spectrum(params, config, s)?;
            let m = build_sector_tridiagonal(params, s, n)?;
            let cutoff = m.eligibility_cutoff();
            let mut oracle = eigs_tridiagonal(&m, m.order())?;
            oracle.retain(|e| *e <= cutoff);
            let crosscheck = crosscheck_oracle(&mut result, &oracle, match_tol);
            Ok(CompareSector { result, crosscheck })
        })
        .collect::<rabi_cf_core::Result<Vec<_>>>()?;

    let mut table = Table::new(&[
        "block",
        "parity",
        "index",
        "energy",
        "f_residual",
        "pincherle_residual",
        "oracle_energy",
        "gap",
    ]);
    for sec in &results {
        let s = sec.result.sector;
        let mut rows: Vec<(f64, Vec<String>)> = Vec::new();
        for (i, ev) in sec.result.eigenvalues.iter().enumerate() {
            let matched = sec.crosscheck.matched.iter().find(|m| m.cf_energy == ev.energy);
            rows.push((
                ev.energy,
                vec![
                    s.block.to_string(),
                    s.parity.to_string(),
                    i.to_string(),
                    num(ev.energy),
                    num(ev.f_residual),
                    num(ev.pincherle_residual),
                    opt_num(matched.map(|m| m.oracle_energy)),
                    opt_num(matched.map(|m| m.gap)),
                ],
            ));
        }
        // Ill-conditioned roots carry no index; their residuals show why.
        for ev in &sec.result.diagnostics.ill_conditioned {
            rows.push((
                ev.energy,
                vec![
                    s.block.to_string(),
                    s.parity.to_string(),
                    String::new(),
                    num(ev.energy),
                    num(ev.f_residual),
                    num(ev.pincherle_residual),
                    opt_num(ev.oracle_gap.map(|g| ev.energy - g)),
                    opt_num(ev.oracle_gap),
                ],
            ));
        }
        for &e in &sec.crosscheck.unmatched_oracle {
            let mut row = vec![String::new(); 8];
            row[0] = s.block.to_string();
            row[1] = s.parity.to_string();
            row[6] = num(e);
            rows.push((e, row));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, row) in rows {
            table.push(row);
        }
    }
    let failed = results.iter().filter(|r| !r.crosscheck.passed).count();
    let doc = CompareDoc {
        truncation: n,
        passed: failed == 0,
        sectors: results,
    };
    let total = doc.sectors.len();
    let report = Report::new(table, &doc)?;
    if failed > 0 {
        let failure = RunFailure::CrosscheckFailed { failed, total };
        return Err(PartialOutput { report, failure }.into());
    }
    Ok(report)
}

/// A report that must still be written before the command fails.
#[derive(Debug)]
pub struct PartialOutput {
    pub report: Report,
    pub failure: RunFailure,
}

impl std::fmt::Display for PartialOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.failure.fmt(f)
    }
}

impl std::error::Error for PartialOutput {}

#[derive(Serialize)]
struct WavefunctionSample {
    axis: &'static str,
    t: f64,
    re: f64,
    im: f64,
    abs: f64,
    tail_bound: Option<f64>,
}

#[derive(Serialize)]
struct WavefunctionDoc {
    sector: SectorLabel,
    energy: f64,
    terms: usize,
    samples: Vec<WavefunctionSample>,
}

fn wavefunction(params: &ModelParams, config: &RunConfig) -> anyhow::Result<Report> {
    let wf = &config.wavefunction;
    if wf.samples < 2 || wf.radius.is_nan() || wf.radius <= 0.0 {
        return Err(CoreError::InvalidArgument("wavefunction needs samples >= 2 and radius > 0".into()).into());
    }
    let sector = *config
        .sectors(params)?
        .first()
        .ok_or_else(|| anyhow::anyhow!("no sector selected"))?;
    let energy = match wf.energy {
        Some(e) => e,
        None => {
            let mut cfg = config.clone();
            cfg.window.levels = cfg.window.levels.max(wf.level + 1);
            let spec = sector_spectrum(params, &cfg, &sector)?;
            *spec.energies().get(wf.level).ok_or_else(|| {
                CoreError::InvalidArgument(format!(
                    "wavefunction.level {} not found: the window holds {} eigenvalue(s)",
                    wf.level,
                    spec.eigenvalues.len()
                ))
            })?
        }
    };
    let seq = backward_minimal(params, &sector, energy, wf.terms, default_buffer(wf.terms))?;
    let mut samples = Vec::with_capacity(2 * wf.samples);
    for axis in ["real", "imaginary"] {
        for i in 0..wf.samples {
            let t = wf.radius * (2.0 * i as f64 - (wf.samples - 1) as f64) / (wf.samples - 1) as f64;
            let z = if axis == "real" { Complex64::new(t, 0.0) } else { Complex64::new(0.0, t) };
            let v = eval_wavefunction(&WavefunctionSeries::from_sequence(&seq, z, wf.terms))?;
            samples.push(WavefunctionSample {
                axis,
                t,
                re: v.value.re,
                im: v.value.im,
                abs: v.value.norm(),
                tail_bound: v.tail_bound,
            });
        }
    }
    let mut table = Table::new(&["block", "parity", "energy", "axis", "t", "re", "im", "abs", "tail_bound"]);
    for s in &samples {
        table.push(vec![
            sector.block.to_string(),
            sector.parity.to_string(),
            num(energy),
            s.axis.into(),
            num(s.t),
            num(s.re),
            num(s.im),
            num(s.abs),
            opt_num(s.tail_bound),
        ]);
    }
    Report::new(
        table,
        &WavefunctionDoc {
            sector,
            energy,
            terms: wf.terms,
            samples,
        },
    )
}

#[derive(Serialize)]
struct DivergeDoc {
    reports: Vec<DivergenceReport>,
}

fn diverge(params: &ModelParams, config: &RunConfig) -> anyhow::Result<Report> {
    let criteria = DivergenceCriteria {
        n_max: config.diverge.n_max,
        tail_growth: config.diverge.tail_growth,
    };
    let reports = config
        .sectors(params)?
        .par_iter()
        .map(|s| divergence_report(params, s, &config.diverge.energies, &criteria))
        .collect::<rabi_cf_core::Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        "block",
        "parity",
        "energy",
        "log_partial_sum",
        "log_growth_factor",
        "tail_growth",
        "diverging",
    ]);
    for r in &reports {
        for s in &r.samples {
            table.push(vec![
                r.sector.block.to_string(),
                r.sector.parity.to_string(),
                num(s.energy),
                num(s.log_partial_sum),
                num(s.log_growth_factor),
                num(s.tail_growth),
                s.diverging.to_string(),
            ]);
        }
    }
    Report::new(table, &DivergeDoc { reports })
}

#[derive(Serialize)]
struct ConvergenceDoc {
    tables: Vec<ConvergenceTable>,
}

fn convergence(params: &ModelParams, config: &RunConfig) -> anyhow::Result<Report> {
    let c = &config.convergence;
    let tables = config
        .sectors(params)?
        .par_iter()
        .map(|s| convergence_study(params, s, &c.truncations, c.levels))
        .collect::<rabi_cf_core::Result<Vec<_>>>()?;
    let mut table = Table::new(&["block", "parity", "level", "truncation", "energy", "increment"]);
    for t in &tables {
        for (level, row) in t.levels.iter().enumerate() {
            for (j, (&n, &e)) in t.truncations.iter().zip(row).enumerate() {
                let inc = if j == 0 { None } else { Some(t.increments[level][j - 1]) };
                table.push(vec![
                    t.sector.block.to_string(),
                    t.sector.parity.to_string(),
                    level.to_string(),
                    n.to_string(),
                    num(e),
                    opt_num(inc),
                ]);
            }
        }
    }
    Report::new(table, &ConvergenceDoc { tables })
}

//! Root localization and refinement for the spectral function.
//!
//! Grid scans do not use the sign of F directly. High levels have small
//! weight on the first basis state, so each root of F sits next to a pole
//! with tiny residue and the pair is invisible on any practical grid.
//! Instead the scan follows w(E) = F(E)·sgn S_0(E), where S_0 comes from a
//! Miller run started at an index held fixed over the window. S_0 changes
//! sign exactly at the poles of F, so w has the zeros of F and no sign
//! change anywhere else.
//!
//! Every refined root is then confirmed with the Pincherle residual.

use rayon::prelude::*;
use serde::Serialize;

use crate::contfrac::{require_normalizable, spectral_function_with, CfResult, DEFAULT_MAX_TERMS, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::model::{ModelParams, SectorLabel};
use crate::recurrence::{eigen_backward_error, miller_boundary, pincherle_residual, stable_miller_top, SectorRecurrence};

pub const DEFAULT_REFINE_TOL: f64 = 1.0e-10;
pub const DEFAULT_CONFIRM_TOL: f64 = 1.0e-8;
pub const DEFAULT_CROSSCHECK_TOL: f64 = 1.0e-8;
pub const MIN_GRID_POINTS: usize = 16;
const MAX_REFINE_ITER: usize = 200;
const FINAL_ULP_SWEEP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub energy: f64,
    pub sector: SectorLabel,
    pub f_residual: f64,
    pub pincherle_residual: f64,
    /// Row-0 residual of the unit-normalized minimal solution.
    pub backward_error: f64,
    /// False when the root passed only the backward-error test.
    pub well_conditioned: bool,
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ScanDiagnostics {
    pub grid_points: usize,
    /// Grid cells containing a pole of F.
    pub pole_crossings: Vec<f64>,
    /// Sign changes excluded because an endpoint sat on a suspected pole.
    pub suspected_pole_brackets: Vec<f64>,
    /// Grid points whose continued fraction did not converge.
    pub unconverged_points: usize,
    /// Refined candidates rejected by the Pincherle confirmation.
    pub rejected_roots: Vec<f64>,
    /// Roots whose |F| and Pincherle residual cannot reach the confirmation
    /// tolerance in double precision (root and pole nearly coincide), but
    /// whose backward error does. Listed here unless accepted by config.
    pub ill_conditioned: Vec<Eigenvalue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    pub brackets: Vec<EnergyBracket>,
    pub diagnostics: ScanDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumConfig {
    pub grid_points: usize,
    pub refine_tol: f64,
    pub confirm_tol: f64,
    pub cf_tol: f64,
    pub max_terms: usize,
    /// Admit ill-conditioned roots into the spectrum.
    pub accept_ill_conditioned: bool,
}

impl SpectrumConfig {
    /// Grid step ω/20 over the window.
    pub fn for_window(params: &ModelParams, e_min: f64, e_max: f64) -> Self {
        let step = params.omega / 20.0;
        let points = ((e_max - e_min) / step).ceil() as usize + 1;
        Self {
            grid_points: points.max(MIN_GRID_POINTS),
            ..Self::default()
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            grid_points: 256,
            refine_tol: DEFAULT_REFINE_TOL,
            confirm_tol: DEFAULT_CONFIRM_TOL,
            cf_tol: DEFAULT_TOL,
            max_terms: DEFAULT_MAX_TERMS,
            accept_ill_conditioned: false,
        }
    }
}

/// [−2ω, 2ω(levels + 2·block)].
pub fn default_window(params: &ModelParams, sector: &SectorLabel, levels: usize) -> (f64, f64) {
    let w = params.omega;
    (-2.0 * w, 2.0 * w * (levels as f64 + 2.0 * sector.block.value()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub params: ModelParams,
    pub sector: SectorLabel,
    pub window: (f64, f64),
    pub eigenvalues: Vec<Eigenvalue>,
    pub diagnostics: ScanDiagnostics,
}

impl SpectrumResult {
    pub fn energies(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.energy).collect()
    }
}

struct Evaluator {
    rec: SectorRecurrence,
    cf_tol: f64,
    max_terms: usize,
    miller_top: usize,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    f: f64,
    s0_sign: f64,
    suspected_pole: bool,
    converged: bool,
}

impl Sample {
    /// The pole-free indicator w.
    fn w(&self) -> f64 {
        self.f * self.s0_sign
    }
}

impl Evaluator {
    /// `energies` span the range of interest; the Miller start index is the
    /// largest stable one over them, doubled.
    fn new(params: &ModelParams, sector: &SectorLabel, energies: &[f64], cf_tol: f64, max_terms: usize) -> Result<Self> {
        let rec = SectorRecurrence::new(params, sector)?;
        require_normalizable(params)?;
        let mut miller_top = 0;
        for &e in energies {
            miller_top = miller_top.max(stable_miller_top(&rec, e)?);
        }
        Ok(Self {
            rec,
            cf_tol,
            max_terms,
            miller_top: 2 * miller_top,
        })
    }

    fn f(&self, e: f64) -> Result<CfResult> {
        spectral_function_with(&self.rec, e, self.cf_tol, self.max_terms)
    }

    fn sample(&self, e: f64) -> Result<Sample> {
        let cf = self.f(e)?;
        let (_, s0_sign) = miller_boundary(&self.rec, e, self.miller_top);
        Ok(Sample {
            f: cf.value,
            s0_sign,
            suspected_pole: cf.suspected_pole,
            converged: cf.converged,
        })
    }
}

fn opposite(a: f64, b: f64) -> bool {
    a == 0.0 || b == 0.0 || (a > 0.0) != (b > 0.0)
}

/// Evaluates F on a uniform grid and returns the root brackets.
pub fn scan_brackets(
    params: &ModelParams,
    sector: &SectorLabel,
    e_min: f64,
    e_max: f64,
    config: &SpectrumConfig,
) -> Result<ScanOutcome> {
    if !(e_min < e_max) || !e_min.is_finite() || !e_max.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid window [{e_min}, {e_max}]")));
    }
    if config.grid_points < MIN_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "grid_points must be >= {MIN_GRID_POINTS}, got {}",
            config.grid_points
        )));
    }
    let ev = Evaluator::new(params, sector, &[e_min, e_max], config.cf_tol, config.max_terms)?;
    let n = config.grid_points;
    let step = (e_max - e_min) / (n - 1) as f64;
    let energies: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { e_max } else { e_min + step * i as f64 })
        .collect();
    let samples = energies
        .par_iter()
        .map(|&e| ev.sample(e))
        .collect::<Result<Vec<_>>>()?;
    let unconverged_points = samples.iter().filter(|s| !s.converged).count();

    let mut diagnostics = ScanDiagnostics {
        grid_points: n,
        unconverged_points,
        ..Default::default()
    };
    let mut brackets = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (&samples[i], &samples[i + 1]);
        let mid = 0.5 * (energies[i] + energies[i + 1]);
        if opposite(a.s0_sign, b.s0_sign) {
            diagnostics.pole_crossings.push(mid);
        }
        if !opposite(a.w(), b.w()) {
            continue;
        }
        if a.suspected_pole || b.suspected_pole {
            diagnostics.suspected_pole_brackets.push(mid);
            continue;
        }
        brackets.push(EnergyBracket {
            lo: energies[i],
            hi: energies[i + 1],
            f_lo: a.f,
            f_hi: b.f,
        });
    }
    Ok(ScanOutcome { brackets, diagnostics })
}

/// Bracket-preserving refinement (Illinois secant steps, bisection when the
/// bracket stops halving), followed by Pincherle confirmation.
///
/// The bracket is refined on w when w changes sign across it, otherwise on
/// F itself; a bracket around a pole of F then collapses onto the pole and
/// fails confirmation.
///
/// A root is confirmed when |F| and the Pincherle residual are both within
/// `confirm_tol`, or, for a sign change of w, when the backward error is
/// within `confirm_tol·ω` (reported with `well_conditioned = false`).
pub fn refine_root(
    params: &ModelParams,
    sector: &SectorLabel,
    bracket: &EnergyBracket,
    config: &SpectrumConfig,
) -> Result<Eigenvalue> {
    let ev = Evaluator::new(params, sector, &[bracket.lo, bracket.hi], config.cf_tol, config.max_terms)?;
    refine_with(&ev, params, sector, bracket, config)
}

fn refine_with(
    ev: &Evaluator,
    params: &ModelParams,
    sector: &SectorLabel,
    bracket: &EnergyBracket,
    config: &SpectrumConfig,
) -> Result<Eigenvalue> {
    if !(bracket.lo < bracket.hi) {
        return Err(Error::InvalidArgument(format!("empty bracket [{}, {}]", bracket.lo, bracket.hi)));
    }
    if !(config.refine_tol > 0.0) {
        return Err(Error::InvalidArgument("refinement tolerance must be > 0".into()));
    }
    let (lo, hi) = (ev.sample(bracket.lo)?, ev.sample(bracket.hi)?);
    let use_w = opposite(lo.w(), hi.w());
    if !use_w && !opposite(lo.f, hi.f) {
        return Err(Error::InvalidArgument(format!(
            "[{}, {}] does not bracket a sign change",
            bracket.lo, bracket.hi
        )));
    }
    let indicator = |e: f64| -> Result<f64> {
        let s = ev.sample(e)?;
        Ok(if use_w { s.w() } else { s.f })
    };

    let width_tol = config.refine_tol * params.omega;
    let residual_goal = config.refine_tol.min(config.confirm_tol);
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = if use_w { (lo.w(), hi.w()) } else { (lo.f, hi.f) };
    // Illinois halves the stored values; keep the true ones for the answer.
    let (mut true_a, mut true_b) = (fa, fb);
    let mut side = 0i8;
    let mut widths = [f64::INFINITY; 2];
    let mut iter = 0;
    loop {
        let width = b - a;
        let floor = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
        let tight = width <= width_tol && true_a.abs().min(true_b.abs()) <= residual_goal;
        if fa == 0.0 || fb == 0.0 || tight || width <= floor || (width <= width_tol && iter >= MAX_REFINE_ITER / 2) {
            break;
        }
        iter += 1;
        if iter > MAX_REFINE_ITER {
            return Err(Error::NoConvergence {
                what: "root refinement",
                iterations: MAX_REFINE_ITER,
            });
        }
        let stalled = width > 0.5 * widths[0];
        widths = [widths[1], width];
        let secant = (a * fb - b * fa) / (fb - fa);
        let x = if stalled || !(secant > a && secant < b) {
            0.5 * (a + b)
        } else {
            secant
        };
        let fx = indicator(x)?;
        if !opposite(fx, fa) {
            a = x;
            fa = fx;
            true_a = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            true_b = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let (mut energy, mut best) = if true_a.abs() <= true_b.abs() { (a, true_a) } else { (b, true_b) };
    // Once the bracket is a few ulps wide, try every float in it.
    let mut x = a;
    for _ in 0..FINAL_ULP_SWEEP {
        x = x.next_up();
        if x >= b {
            break;
        }
        let fx = indicator(x)?;
        if fx.abs() < best.abs() {
            energy = x;
            best = fx;
        }
    }
    let f_residual = ev.f(energy)?.value;
    let pincherle = pincherle_residual(params, sector, energy)?;
    let backward_error = eigen_backward_error(params, sector, energy)?;
    let well_conditioned = pincherle.abs() <= config.confirm_tol && f_residual.abs() <= config.confirm_tol;
    if !well_conditioned && !(use_w && backward_error <= config.confirm_tol * params.omega) {
        return Err(Error::PoleArtifact {
            energy,
            residual: pincherle,
        });
    }
    Ok(Eigenvalue {
        energy,
        sector: *sector,
        f_residual,
        pincherle_residual: pincherle,
        backward_error,
        well_conditioned,
        oracle_gap: None,
    })
}

/// Scan, refine, confirm and deduplicate the regular spectrum of one sector
/// inside `[e_min, e_max]`.
pub fn compute_spectrum(
    params: &ModelParams,
    sector: &SectorLabel,
    e_min: f64,
    e_max: f64,
    config: &SpectrumConfig,
) -> Result<SpectrumResult> {
    let scan = scan_brackets(params, sector, e_min, e_max, config)?;
    let ev = Evaluator::new(params, sector, &[e_min, e_max], config.cf_tol, config.max_terms)?;
    let refined: Vec<Result<Eigenvalue>> = scan
        .brackets
        .par_iter()
        .map(|b| refine_with(&ev, params, sector, b, config))
        .collect();
    let mut diagnostics = scan.diagnostics;
    let mut eigenvalues = Vec::new();
    for r in refined {
        match r {
            Ok(e) if e.well_conditioned || config.accept_ill_conditioned => eigenvalues.push(e),
            Ok(e) => diagnostics.ill_conditioned.push(e),
            Err(Error::PoleArtifact { energy, .. }) => diagnostics.rejected_roots.push(energy),
            Err(e) => return Err(e),
        }
    }
    eigenvalues.retain(|e| e.energy >= e_min && e.energy <= e_max);
    diagnostics.ill_conditioned.retain(|e| e.energy >= e_min && e.energy <= e_max);
    eigenvalues.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    let merge = 10.0 * config.refine_tol * params.omega;
    eigenvalues.dedup_by(|later, earlier| {
        if later.energy - earlier.energy < merge {
            if later.f_residual.abs() < earlier.f_residual.abs() {
                *earlier = *later;
            }
            true
        } else {
            false
        }
    });
    Ok(SpectrumResult {
        params: *params,
        sector: *sector,
        window: (e_min, e_max),
        eigenvalues,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedLevel {
    pub cf_energy: f64,
    pub oracle_energy: f64,
    pub gap: f64,
    /// False for roots held in `diagnostics.ill_conditioned`.
    pub well_conditioned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub sector: SectorLabel,
    pub matched: Vec<MatchedLevel>,
    pub unmatched_cf: Vec<f64>,
    pub unmatched_oracle: Vec<f64>,
    pub max_gap: f64,
    pub match_tol: f64,
    pub passed: bool,
}

/// Greedy nearest-pair matching of continued-fraction roots against oracle
/// eigenvalues inside the same window. Roots listed as ill-conditioned take
/// part too, flagged in the report. Fills `oracle_gap`.
pub fn crosscheck_oracle(spec: &mut SpectrumResult, oracle_eigs: &[f64], match_tol: f64) -> CrosscheckReport {
    let (lo, hi) = spec.window;
    let oracle: Vec<f64> = oracle_eigs.iter().copied().filter(|e| *e >= lo && *e <= hi).collect();
    let mut roots: Vec<&mut Eigenvalue> = spec
        .eigenvalues
        .iter_mut()
        .chain(spec.diagnostics.ill_conditioned.iter_mut())
        .collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, ev) in roots.iter().enumerate() {
        for (j, o) in oracle.iter().enumerate() {
            candidates.push(((ev.energy - o).abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut cf_used = vec![false; roots.len()];
    let mut or_used = vec![false; oracle.len()];
    for (_, i, j) in candidates {
        if cf_used[i] || or_used[j] {
            continue;
        }
        cf_used[i] = true;
        or_used[j] = true;
        roots[i].oracle_gap = Some(roots[i].energy - oracle[j]);
    }
    let mut matched: Vec<MatchedLevel> = roots
        .iter()
        .filter_map(|e| {
            e.oracle_gap.map(|gap| MatchedLevel {
                cf_energy: e.energy,
                oracle_energy: e.energy - gap,
                gap,
                well_conditioned: e.well_conditioned,
            })
        })
        .collect();
    matched.sort_by(|x, y| x.cf_energy.total_cmp(&y.cf_energy));
    let mut unmatched_cf: Vec<f64> = roots
        .iter()
        .zip(&cf_used)
        .filter(|(_, u)| !**u)
        .map(|(e, _)| e.energy)
        .collect();
    unmatched_cf.sort_by(f64::total_cmp);
    let unmatched_oracle: Vec<f64> = oracle.iter().zip(&or_used).filter(|(_, u)| !**u).map(|(e, _)| *e).collect();
    let max_gap = matched.iter().map(|m| m.gap.abs()).fold(0.0, f64::max);
    let passed = unmatched_cf.is_empty() && unmatched_oracle.is_empty() && max_gap <= match_tol;
    CrosscheckReport {
        sector: spec.sector,
        matched,
        unmatched_cf,
        unmatched_oracle,
        max_gap,
        match_tol,
        passed,
    }
}

//! Run configuration: TOML file, `--set` overrides, defaults.

use std::path::Path;

use anyhow::{bail, Context};
use rabi_cf_core::model::{enumerate_blocks, BlockLabel, Family, ModelParams, Parity, SectorLabel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    TwoMode,
    KPhoton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParitySelection {
    Plus,
    Minus,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    Tridiagonal,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub family: FamilyName,
    pub k: u32,
    pub omega: f64,
    pub delta: f64,
    pub g: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: FamilyName::TwoMode,
            k: 2,
            omega: 1.0,
            delta: 0.7,
            g: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorSection {
    /// Comma-separated labels ("1/2, 1") or "all:N".
    pub blocks: String,
    pub parity: ParitySelection,
}

impl Default for SectorSection {
    fn default() -> Self {
        Self {
            blocks: "all:2".into(),
            parity: ParitySelection::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    pub levels: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            e_min: None,
            e_max: None,
            levels: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// 0 selects a step of ω/20.
    pub grid_points: usize,
    pub refine_tol: f64,
    pub confirm_tol: f64,
    pub crosscheck_tol: f64,
    pub cf_tol: f64,
    pub max_terms: usize,
    pub accept_ill_conditioned: bool,
}

impl Default for NumericsSection {
    fn default() -> Self {
        use rabi_cf_core::spectrum::*;
        Self {
            grid_points: 0,
            refine_tol: DEFAULT_REFINE_TOL,
            confirm_tol: DEFAULT_CONFIRM_TOL,
            crosscheck_tol: DEFAULT_CROSSCHECK_TOL,
            cf_tol: rabi_cf_core::contfrac::DEFAULT_TOL,
            max_terms: rabi_cf_core::contfrac::DEFAULT_MAX_TERMS,
            accept_ill_conditioned: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub truncation: usize,
    pub method: OracleMethod,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            truncation: rabi_cf_core::oracle::DEFAULT_TRUNCATION,
            method: OracleMethod::Tridiagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WavefunctionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub level: usize,
    pub radius: f64,
    pub samples: usize,
    pub terms: usize,
}

impl Default for WavefunctionSection {
    fn default() -> Self {
        Self {
            energy: None,
            level: 0,
            radius: 3.0,
            samples: 61,
            terms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivergeSection {
    pub energies: Vec<f64>,
    pub n_max: usize,
    pub tail_growth: f64,
}

impl Default for DivergeSection {
    fn default() -> Self {
        use rabi_cf_core::bargmann::*;
        Self {
            energies: vec![-0.5, 0.0, 0.5, 1.0, 2.0, 4.0],
            n_max: DEFAULT_DIVERGENCE_N_MAX,
            tail_growth: DEFAULT_TAIL_GROWTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub truncations: Vec<usize>,
    pub levels: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            truncations: vec![100, 200, 400, 800],
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: Format,
    /// "-" writes to standard output.
    pub path: String,
    pub trace: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            path: "-".into(),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub sectors: SectorSection,
    pub window: WindowSection,
    pub numerics: NumericsSection,
    pub oracle: OracleSection,
    pub wavefunction: WavefunctionSection,
    pub diverge: DivergeSection,
    pub convergence: ConvergenceSection,
    pub output: OutputSection,
}

/// Every accepted key with its default and meaning, as printed by `--help`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.family", "\"two-mode\"", "two-mode | k-photon"),
    ("model.k", "2", "photon number (k-photon only)"),
    ("model.omega", "1.0", "boson frequency ω > 0"),
    ("model.delta", "0.7", "level splitting Δ"),
    ("model.g", "0.5", "coupling g"),
    ("sectors.blocks", "\"all:2\"", "block labels (\"1/2, 1\" or \"1/4\") or \"all:N\" for the first N"),
    ("sectors.parity", "\"both\"", "plus | minus | both"),
    ("window.e_min", "-2ω", "lower end of the energy window"),
    ("window.e_max", "2ω(levels + 2·block)", "upper end of the energy window"),
    ("window.levels", "6", "levels per sector (default window, oracle and wavefunction selection)"),
    ("numerics.grid_points", "0", "scan grid size; 0 selects a step of ω/20"),
    ("numerics.refine_tol", "1e-10", "bracket width for refinement, relative to ω"),
    ("numerics.confirm_tol", "1e-8", "|F| and Pincherle confirmation tolerance"),
    ("numerics.crosscheck_tol", "1e-8", "oracle agreement tolerance, relative to ω"),
    ("numerics.cf_tol", "1e-14", "continued-fraction convergence tolerance"),
    ("numerics.max_terms", "100000", "continued-fraction term cap"),
    ("numerics.accept_ill_conditioned", "false", "admit roots confirmed only by backward error"),
    ("oracle.truncation", "400", "basis size N of the truncated matrices"),
    ("oracle.method", "\"tridiagonal\"", "tridiagonal (per parity) | dense (spin-resolved block)"),
    ("wavefunction.energy", "level-th eigenvalue", "energy of the minimal solution"),
    ("wavefunction.level", "0", "eigenvalue index used when energy is unset"),
    ("wavefunction.radius", "3.0", "samples cover [-radius, radius] on both axes"),
    ("wavefunction.samples", "61", "points per axis"),
    ("wavefunction.terms", "200", "series truncation"),
    ("diverge.energies", "[-0.5, 0.0, 0.5, 1.0, 2.0, 4.0]", "trial energies"),
    ("diverge.n_max", "2000", "last index of the partial norm sums"),
    ("diverge.tail_growth", "1e-6", "threshold on P(n_max)/P(n_max/2) - 1"),
    ("convergence.truncations", "[100, 200, 400, 800]", "ascending basis sizes"),
    ("convergence.levels", "3", "levels tracked"),
    ("output.format", "\"csv\"", "csv | json"),
    ("output.path", "\"-\"", "output file; \"-\" is standard output"),
    ("output.trace", "false", "also emit F(E) grid samples (spectrum)"),
];

pub fn key_help() -> String {
    let width = KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (TOML sections; override with --set section.key=value):\n");
    for (key, default, what) in KEYS {
        out.push_str(&format!("  {key:<width$}  {what} [default: {default}]\n"));
    }
    out.push_str("\nEnvironment: RABI_CF_THREADS caps the worker count.\n");
    out.push_str("Exit codes: 0 ok, 1 i/o, 2 invalid input, 3 unsupported regime, 4 numerical failure.\n");
    out
}

fn parse_override_value(raw: &str) -> toml::Value {
    // Accept any TOML literal; anything else is taken as a bare string.
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> anyhow::Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("--set expects key=value, got {assignment:?}");
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.len() != 2 || path.iter().any(|p| p.is_empty()) {
        bail!("--set key must look like section.key, got {key:?}");
    }
    let section = table
        .entry(path[0])
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let Some(section) = section.as_table_mut() else {
        bail!("{} is not a section", path[0]);
    };
    section.insert(path[1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

/// Reads the optional config file and applies `--set` assignments on top.
pub fn load(file: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut table = match file {
        Some(path) => {
            // Reported as invalid input, not an i/o failure.
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
            text.parse::<toml::Table>()
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => toml::Table::new(),
    };
    for assignment in overrides {
        apply_override(&mut table, assignment)?;
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .context("invalid configuration")?;
    Ok(config)
}

impl RunConfig {
    pub fn params(&self) -> rabi_cf_core::Result<ModelParams> {
        let family = match self.model.family {
            FamilyName::TwoMode => Family::TwoMode,
            FamilyName::KPhoton => Family::KPhoton { k: self.model.k },
        };
        ModelParams::new(family, self.model.omega, self.model.delta, self.model.g)
    }

    pub fn blocks(&self, params: &ModelParams) -> anyhow::Result<Vec<BlockLabel>> {
        let spec = self.sectors.blocks.trim();
        if let Some(n) = spec.strip_prefix("all:") {
            let n: usize = n
                .trim()
                .parse()
                .with_context(|| format!("sectors.blocks: bad count in {spec:?}"))?;
            return Ok(enumerate_blocks(params, n)?);
        }
        let blocks = spec
            .split(',')
            .map(|s| s.parse::<BlockLabel>())
            .collect::<rabi_cf_core::Result<Vec<_>>>()?;
        if blocks.is_empty() {
            bail!("sectors.blocks is empty");
        }
        Ok(blocks)
    }

    pub fn parities(&self) -> Vec<Parity> {
        match self.sectors.parity {
            ParitySelection::Plus => vec![Parity::Plus],
            ParitySelection::Minus => vec![Parity::Minus],
            ParitySelection::Both => vec![Parity::Plus, Parity::Minus],
        }
    }

    /// Selected sectors, blocks ascending, plus before minus. Each is
    /// checked against the model family.
    pub fn sectors(&self, params: &ModelParams) -> anyhow::Result<Vec<SectorLabel>> {
        let mut out = Vec::new();
        for block in self.blocks(params)? {
            for parity in self.parities() {
                let sector = SectorLabel::new(block, parity);
                params.resolve(&sector)?;
                out.push(sector);
            }
        }
        Ok(out)
    }

    pub fn window(&self, params: &ModelParams, sector: &SectorLabel) -> (f64, f64) {
        let (lo, hi) = rabi_cf_core::spectrum::default_window(params, sector, self.window.levels);
        (self.window.e_min.unwrap_or(lo), self.window.e_max.unwrap_or(hi))
    }

    pub fn spectrum_config(&self, params: &ModelParams, window: (f64, f64)) -> rabi_cf_core::spectrum::SpectrumConfig {
        use rabi_cf_core::spectrum::SpectrumConfig;
        let base = SpectrumConfig::for_window(params, window.0, window.1);
        SpectrumConfig {
            grid_points: if self.numerics.grid_points == 0 {
                base.grid_points
            } else {
                self.numerics.grid_points
            },
            refine_tol: self.numerics.refine_tol,
            confirm_tol: self.numerics.confirm_tol,
            cf_tol: self.numerics.cf_tol,
            max_terms: self.numerics.max_terms,
            accept_ill_conditioned: self.numerics.accept_ill_conditioned,
        }
    }
}

//! Model parameters, invariant sectors and regime classification.
//!
//! Both families reduce to a collection of parity sectors, each governed by a
//! three-term recurrence whose large-index behavior decides whether entire,
//! normalizable wavefunctions exist:
//!
//! * two-mode: blocks labelled by the Bargmann index κ ∈ {1/2, 1, 3/2, …},
//!   normalizable iff |g/ω| < 1;
//! * k-photon: k blocks labelled by q = (rk+1)/k², r = 0..k−1, always
//!   normalizable for k = 1, normalizable iff |2g/ω| < 1 for k = 2 and never
//!   for k ≥ 3 (g ≠ 0).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    TwoMode,
    KPhoton { k: u32 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::TwoMode => f.write_str("two-mode"),
            Family::KPhoton { k } => write!(f, "{k}-photon"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    #[serde(flatten)]
    pub family: Family,
    pub omega: f64,
    pub delta: f64,
    pub g: f64,
}

impl ModelParams {
    pub fn new(family: Family, omega: f64, delta: f64, g: f64) -> Result<Self> {
        let params = Self {
            family,
            omega,
            delta,
            g,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn two_mode(omega: f64, delta: f64, g: f64) -> Result<Self> {
        Self::new(Family::TwoMode, omega, delta, g)
    }

    pub fn k_photon(k: u32, omega: f64, delta: f64, g: f64) -> Result<Self> {
        Self::new(Family::KPhoton { k }, omega, delta, g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega must be finite and > 0, got {}",
                self.omega
            )));
        }
        // Δ < 0 is the same model with the parity labels exchanged.
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams(format!("delta must be finite, got {}", self.delta)));
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidParams(format!("g must be finite, got {}", self.g)));
        }
        if let Family::KPhoton { k } = self.family {
            if k == 0 {
                return Err(Error::InvalidParams("k must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Recurrence and continued-fraction paths divide by g.
    pub fn require_coupling(&self) -> Result<()> {
        if self.g == 0.0 {
            Err(Error::CouplingZero)
        } else {
            Ok(())
        }
    }

    /// Same model with all energies multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            omega: self.omega * lambda,
            delta: self.delta * lambda,
            g: self.g * lambda,
            ..*self
        }
    }

    /// Resolves a sector's block label into the integers the formulas need.
    pub fn resolve(&self, sector: &SectorLabel) -> Result<ResolvedBlock> {
        let BlockLabel { num, den } = sector.block;
        match self.family {
            Family::TwoMode => {
                // κ = num/den must be a positive half-integer: 2κ integral.
                if num == 0 || (2 * num) % den != 0 {
                    return Err(Error::BlockMismatch { sector: *sector });
                }
                Ok(ResolvedBlock::TwoMode {
                    two_kappa: 2 * num / den,
                })
            }
            Family::KPhoton { k } => {
                if den != k * k || num == 0 || (num - 1) % k != 0 {
                    return Err(Error::BlockMismatch { sector: *sector });
                }
                let r = (num - 1) / k;
                if r >= k {
                    return Err(Error::BlockMismatch { sector: *sector });
                }
                Ok(ResolvedBlock::KPhoton { k, r })
            }
        }
    }
}

/// Integer data identifying a block once checked against the model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedBlock {
    /// Bargmann index κ = two_kappa / 2.
    TwoMode { two_kappa: u32 },
    /// q = (rk+1)/k², Fock states |kn + r⟩.
    KPhoton { k: u32, r: u32 },
}

impl ResolvedBlock {
    pub fn label(&self) -> f64 {
        match *self {
            ResolvedBlock::TwoMode { two_kappa } => f64::from(two_kappa) / 2.0,
            ResolvedBlock::KPhoton { k, r } => f64::from(r * k + 1) / f64::from(k * k),
        }
    }
}

/// Exact positive rational block label (κ or q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockLabel {
    num: u32,
    den: u32,
}

impl BlockLabel {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 || num == 0 {
            return Err(Error::InvalidArgument(format!(
                "block label {num}/{den} must be a positive rational"
            )));
        }
        let d = gcd(num, den);
        Ok(Self {
            num: num / d,
            den: den / d,
        })
    }

    pub fn numerator(&self) -> u32 {
        self.num
    }

    pub fn denominator(&self) -> u32 {
        self.den
    }

    pub fn value(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl fmt::Display for BlockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for BlockLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse block label {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => BlockLabel::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => BlockLabel::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

impl Serialize for BlockLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Plus,
    Minus,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Plus => 1.0,
            Parity::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Parity::Plus => Parity::Minus,
            Parity::Minus => Parity::Plus,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Plus => "plus",
            Parity::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SectorLabel {
    pub block: BlockLabel,
    pub parity: Parity,
}

impl SectorLabel {
    pub fn new(block: BlockLabel, parity: Parity) -> Self {
        Self { block, parity }
    }

    /// Two-mode sector with κ = two_kappa / 2.
    pub fn two_mode(two_kappa: u32, parity: Parity) -> Self {
        Self {
            block: BlockLabel::new(two_kappa, 2).expect("two_kappa must be positive"),
            parity,
        }
    }

    /// k-photon sector with Fock offset r, i.e. q = (rk+1)/k².
    pub fn k_photon(k: u32, r: u32, parity: Parity) -> Self {
        Self {
            block: BlockLabel::new(r * k + 1, k * k).expect("k must be positive"),
            parity,
        }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.block, self.parity)
    }
}

/// Lists block labels in ascending order.
///
/// Two-mode models have infinitely many blocks, so the first `max_blocks`
/// half-integers are returned. k-photon models have exactly k; `max_blocks`
/// caps the list but never pads it.
pub fn enumerate_blocks(params: &ModelParams, max_blocks: usize) -> Result<Vec<BlockLabel>> {
    params.validate()?;
    if max_blocks == 0 {
        return Err(Error::InvalidArgument("max_blocks must be positive".into()));
    }
    let labels = match params.family {
        Family::TwoMode => (1..=max_blocks as u32)
            .map(|m| BlockLabel::new(m, 2))
            .collect::<Result<Vec<_>>>()?,
        Family::KPhoton { k } => (0..k.min(max_blocks as u32))
            .map(|r| BlockLabel::new(r * k + 1, k * k))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeVerdict {
    Normalizable,
    NonNormalizable,
    #[serde(rename = "undefined-k-ge-3")]
    UndefinedKGe3,
}

impl fmt::Display for RegimeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeVerdict::Normalizable => "normalizable",
            RegimeVerdict::NonNormalizable => "non-normalizable",
            RegimeVerdict::UndefinedKGe3 => "undefined-k-ge-3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeClass {
    pub verdict: RegimeVerdict,
    /// |g/ω| (two-mode) or |2g/ω| (k = 2); unset otherwise.
    pub ratio: Option<f64>,
}

/// Decides whether entire normalizable wavefunctions exist.
///
/// The boundary ratio = 1 is non-normalizable. The free model g = 0 is
/// classified normalizable by convention.
pub fn classify_regime(params: &ModelParams) -> RegimeClass {
    let ratio = match params.family {
        Family::TwoMode => Some((params.g / params.omega).abs()),
        Family::KPhoton { k: 2 } => Some((2.0 * params.g / params.omega).abs()),
        Family::KPhoton { .. } => None,
    };
    let verdict = match (params.family, ratio) {
        _ if params.g == 0.0 => RegimeVerdict::Normalizable,
        (_, Some(r)) if r < 1.0 => RegimeVerdict::Normalizable,
        (_, Some(_)) => RegimeVerdict::NonNormalizable,
        (Family::KPhoton { k: 1 }, None) => RegimeVerdict::Normalizable,
        _ => RegimeVerdict::UndefinedKGe3,
    };
    RegimeClass { verdict, ratio }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicRoots {
    /// Smaller-modulus root.
    pub t1: Complex64,
    /// Larger-modulus root.
    pub t2: Complex64,
    pub distinct_real: bool,
}

/// Roots of the characteristic equation of the n ≥ 1 recurrence.
///
/// Two-mode: t² + (2ω/g)t + 1 = 0. Two-photon: t² + (ω/2g)t + 1/4 = 0.
/// Other k have no quadratic characteristic equation.
pub fn characteristic_roots(params: &ModelParams) -> Result<CharacteristicRoots> {
    params.validate()?;
    params.require_coupling()?;
    // Monic quadratic t² + s t + p with s = −(sum), p = product.
    let (s, p) = match params.family {
        Family::TwoMode => (2.0 * params.omega / params.g, 1.0),
        Family::KPhoton { k: 2 } => (params.omega / (2.0 * params.g), 0.25),
        Family::KPhoton { k } => return Err(Error::NoCharacteristicEquation { k }),
    };
    let disc = s * s - 4.0 * p;
    if disc > 0.0 {
        // Larger root without cancellation, smaller one from the product.
        let big = -0.5 * (s + s.signum() * disc.sqrt());
        let small = p / big;
        Ok(CharacteristicRoots {
            t1: Complex64::new(small, 0.0),
            t2: Complex64::new(big, 0.0),
            distinct_real: true,
        })
    } else {
        let re = -0.5 * s;
        let im = 0.5 * (-disc).sqrt();
        Ok(CharacteristicRoots {
            t1: Complex64::new(re, -im),
            t2: Complex64::new(re, im),
            distinct_real: false,
        })
    }
}

/// Where the middle point of the Newton–Puiseux diagram
/// P0(0,0), P1(1,α), P2(2,β) lies relative to the segment P0P2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PuiseuxShape {
    /// Two solution classes with different growth orders (k = 1).
    Above,
    /// A quadratic characteristic equation governs both classes.
    Collinear,
    /// All non-trivial solutions share one growth rate (k ≥ 3).
    Below,
}

/// Large-n behavior C_n ~ a n^α, D_n ~ b n^β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticExponents {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
}

impl AsymptoticExponents {
    pub fn puiseux_shape(&self) -> PuiseuxShape {
        let twice_alpha = 2.0 * self.alpha;
        if twice_alpha > self.beta {
            PuiseuxShape::Above
        } else if twice_alpha < self.beta {
            PuiseuxShape::Below
        } else {
            PuiseuxShape::Collinear
        }
    }
}

pub fn asymptotic_exponents(params: &ModelParams) -> Result<AsymptoticExponents> {
    params.validate()?;
    params.require_coupling()?;
    Ok(match params.family {
        Family::TwoMode => AsymptoticExponents {
            a: 2.0 * params.omega / params.g,
            alpha: -1.0,
            b: 1.0,
            beta: -2.0,
        },
        Family::KPhoton { k } => {
            let kf = f64::from(k);
            AsymptoticExponents {
                a: params.omega / (params.g * kf.powi(k as i32 - 1)),
                alpha: 1.0 - kf,
                b: kf.powi(-(k as i32)),
                beta: -kf,
            }
        }
    })
}

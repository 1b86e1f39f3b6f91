//! Three-term recurrences for the series coefficients of the sector
//! wavefunctions.
//!
//! With φ(z) = Σ S_n zⁿ the sector Schrödinger equation becomes
//!
//! ```text
//! S_1 + C_0 S_0 = 0,
//! S_{n+1} + C_n S_n + D_n S_{n-1} = 0,   n ≥ 1,
//! ```
//!
//! where C_n = (ε_n − E)/(g·w_n), D_n = 1/w_n, ε_n = diagonal energy of the
//! n-th basis state (including the ±(−1)ⁿΔ term) and w_n = (n+1)(n+2κ) for
//! the two-mode model or w_n = Π_{i=1..k}(kn+r+i) for the k-photon model.
//! The k-photon `(A_n, B_n)` pair is stored in the same [`CoefficientPair`].
//!
//! Sequences decay or grow factorially, so every sequence is kept as
//! mantissa/binary-exponent pairs; rescaling by powers of two is exact.

use crate::error::{Error, Result};
use crate::model::{classify_regime, ModelParams, RegimeVerdict, ResolvedBlock, SectorLabel};
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientPair {
    /// C_n (two-mode) or A_n (k-photon); affine in E.
    pub c: f64,
    /// D_n or B_n; independent of E.
    pub d: f64,
    pub n: usize,
}

/// Coefficient generator for one sector, with the block already resolved.
#[derive(Debug, Clone, Copy)]
pub struct SectorRecurrence {
    params: ModelParams,
    sector: SectorLabel,
    block: ResolvedBlock,
}

impl SectorRecurrence {
    pub fn new(params: &ModelParams, sector: &SectorLabel) -> Result<Self> {
        params.validate()?;
        params.require_coupling()?;
        let block = params.resolve(sector)?;
        Ok(Self {
            params: *params,
            sector: *sector,
            block,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn sector(&self) -> &SectorLabel {
        &self.sector
    }

    pub fn block(&self) -> ResolvedBlock {
        self.block
    }

    /// ε_n: diagonal energy of basis state n, ±(−1)ⁿΔ included.
    pub fn diagonal_energy(&self, n: usize) -> f64 {
        let alternating = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let spin = self.sector.parity.sign() * alternating * self.params.delta;
        let nf = n as f64;
        let boson = match self.block {
            // 2ω(n + κ − 1/2)
            ResolvedBlock::TwoMode { two_kappa } => {
                self.params.omega * (2.0 * nf + f64::from(two_kappa) - 1.0)
            }
            // kω(n + q − 1/k²) = ω(kn + r)
            ResolvedBlock::KPhoton { k, r } => self.params.omega * (f64::from(k) * nf + f64::from(r)),
        };
        boson + spin
    }

    /// 1/D_n.
    pub fn weight(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.block {
            ResolvedBlock::TwoMode { two_kappa } => (nf + 1.0) * (nf + f64::from(two_kappa)),
            ResolvedBlock::KPhoton { k, r } => {
                let base = f64::from(k) * nf + f64::from(r);
                (1..=k).map(|i| base + f64::from(i)).product()
            }
        }
    }

    pub fn at(&self, n: usize, energy: f64) -> CoefficientPair {
        let w = self.weight(n);
        CoefficientPair {
            c: (self.diagonal_energy(n) - energy) / (self.params.g * w),
            d: 1.0 / w,
            n,
        }
    }

    /// Index beyond which ε_n − E stays positive, so C_n no longer changes
    /// sign and the asymptotic regime has begun.
    pub fn turning_index(&self, energy: f64) -> usize {
        let step = match self.block {
            ResolvedBlock::TwoMode { .. } => 2.0 * self.params.omega,
            ResolvedBlock::KPhoton { k, .. } => f64::from(k) * self.params.omega,
        };
        let n = ((energy + self.params.delta).max(0.0) / step).ceil();
        n as usize + 1
    }
}

/// Recurrence coefficients at index `n` and trial energy `energy`.
pub fn coeff_at(
    params: &ModelParams,
    sector: &SectorLabel,
    n: usize,
    energy: f64,
) -> Result<CoefficientPair> {
    Ok(SectorRecurrence::new(params, sector)?.at(n, energy))
}

const RESCALE_HI: f64 = 1.0e150;
const RESCALE_LO: f64 = 1.0e-150;

/// Multiplies `m` by 2^e without intermediate overflow.
fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1000 {
        m *= 2f64.powi(1000);
        e -= 1000;
        if m.is_infinite() {
            return m;
        }
    }
    while e < -1000 {
        m *= 2f64.powi(-1000);
        e += 1000;
        if m == 0.0 {
            return m;
        }
    }
    m * 2f64.powi(e as i32)
}

/// Binary exponent that brings `x` near 1.
fn exponent_of(x: f64) -> i64 {
    x.abs().log2().floor() as i64
}

/// A sequence of reals stored as mantissa · 2^exponent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaledSeq {
    mantissa: Vec<f64>,
    exp2: Vec<i64>,
}

impl ScaledSeq {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            mantissa: Vec::with_capacity(n),
            exp2: Vec::with_capacity(n),
        }
    }

    /// Builds from plain values (no rescaling needed).
    pub fn from_values(values: &[f64]) -> Self {
        Self {
            mantissa: values.to_vec(),
            exp2: vec![0; values.len()],
        }
    }

    pub fn push(&mut self, mantissa: f64, exp2: i64) {
        self.mantissa.push(mantissa);
        self.exp2.push(exp2);
    }

    pub fn len(&self) -> usize {
        self.mantissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.mantissa.truncate(len);
        self.exp2.truncate(len);
    }

    pub fn raw(&self, n: usize) -> (f64, i64) {
        (self.mantissa[n], self.exp2[n])
    }

    /// Plain value; may underflow to 0 or overflow to ±∞.
    pub fn value(&self, n: usize) -> f64 {
        ldexp(self.mantissa[n], self.exp2[n])
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.value(n)).collect()
    }

    pub fn ln_abs(&self, n: usize) -> f64 {
        self.mantissa[n].abs().ln() + self.exp2[n] as f64 * std::f64::consts::LN_2
    }

    pub fn signum(&self, n: usize) -> f64 {
        if self.mantissa[n] == 0.0 {
            0.0
        } else {
            self.mantissa[n].signum()
        }
    }

    /// value(n + 1) / value(n), computed without leaving the scaled form.
    pub fn ratio(&self, n: usize) -> f64 {
        let (m0, e0) = self.raw(n);
        let (m1, e1) = self.raw(n + 1);
        ldexp(m1 / m0, e1 - e0)
    }

    /// Values at the given indices brought to a common exponent.
    pub fn common_scale<const N: usize>(&self, idx: [usize; N]) -> [f64; N] {
        let emax = idx
            .iter()
            .filter(|&&i| self.mantissa[i] != 0.0)
            .map(|&i| self.exp2[i])
            .max()
            .unwrap_or(0);
        idx.map(|i| ldexp(self.mantissa[i], self.exp2[i] - emax))
    }

    /// Divides every entry by entry 0. Returns false if entry 0 vanishes.
    pub fn normalize_first(&mut self) -> bool {
        let (m0, e0) = self.raw(0);
        if m0 == 0.0 || !m0.is_finite() {
            return false;
        }
        for (m, e) in self.mantissa.iter_mut().zip(self.exp2.iter_mut()) {
            *m /= m0;
            *e -= e0;
        }
        true
    }
}

/// Keeps `cur` near unit magnitude; rescales both entries by the same
/// power of two and accumulates the exponent.
fn rescale(prev: &mut f64, cur: &mut f64, exp2: &mut i64) {
    let a = cur.abs();
    if a != 0.0 && a.is_finite() && !(RESCALE_LO..=RESCALE_HI).contains(&a) {
        let e = exponent_of(*cur);
        let f = ldexp(1.0, -e);
        *prev *= f;
        *cur *= f;
        *exp2 += e;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    ForwardDominant,
    BackwardMinimal,
}

/// Series coefficients S_n (or K_n) at a fixed trial energy, S_0 = 1.
#[derive(Debug, Clone)]
pub struct SolutionSequence {
    pub params: ModelParams,
    pub sector: SectorLabel,
    pub energy: f64,
    pub kind: SequenceKind,
    pub values: ScaledSeq,
}

impl SolutionSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest relative three-point residual over the n ≥ 1 relations.
    pub fn max_recurrence_residual(&self) -> Result<f64> {
        let rec = SectorRecurrence::new(&self.params, &self.sector)?;
        let mut worst = 0.0f64;
        for n in 1..self.len().saturating_sub(1) {
            let [lo, mid, hi] = self.values.common_scale([n - 1, n, n + 1]);
            let cp = rec.at(n, self.energy);
            let terms = [hi, cp.c * mid, cp.d * lo];
            let scale = lo.abs().max(mid.abs()).max(hi.abs());
            if scale == 0.0 {
                continue;
            }
            let resid = terms.iter().sum::<f64>().abs() / scale;
            worst = worst.max(resid);
        }
        Ok(worst)
    }

    /// |S_1/S_0 + C_0|: the n = 0 relation, exact for forward sequences.
    pub fn boundary_residual(&self) -> Result<f64> {
        let rec = SectorRecurrence::new(&self.params, &self.sector)?;
        Ok((self.values.ratio(0) + rec.at(0, self.energy).c).abs())
    }
}

/// Forward recursion from S_0 = 1, S_1 = −C_0.
///
/// For generic E the result is dominated by the dominant solution; it is
/// what the orthogonal-polynomial identity and the divergence diagnostics
/// consume, never the norms of eigenstates.
pub fn forward_sequence(
    params: &ModelParams,
    sector: &SectorLabel,
    energy: f64,
    len: usize,
) -> Result<SolutionSequence> {
    let rec = SectorRecurrence::new(params, sector)?;
    if len < 2 {
        return Err(Error::InvalidArgument("sequence length must be >= 2".into()));
    }
    let mut values = ScaledSeq::with_capacity(len);
    let mut prev = 1.0;
    let mut cur = -rec.at(0, energy).c;
    let mut exp2 = 0i64;
    values.push(prev, 0);
    rescale(&mut prev, &mut cur, &mut exp2);
    values.push(cur, exp2);
    for n in 1..len - 1 {
        let cp = rec.at(n, energy);
        let next = -cp.c * cur - cp.d * prev;
        prev = cur;
        cur = next;
        rescale(&mut prev, &mut cur, &mut exp2);
        values.push(cur, exp2);
    }
    Ok(SolutionSequence {
        params: *params,
        sector: *sector,
        energy,
        kind: SequenceKind::ForwardDominant,
        values,
    })
}

/// Default Miller buffer for a requested length.
pub fn default_buffer(len: usize) -> usize {
    len.max(50)
}

/// Unnormalized Miller sequence S_0..=S_top from the seed S_{top+1} = 0,
/// S_top = 1, using only the n ≥ 1 relations.
fn miller_raw(rec: &SectorRecurrence, energy: f64, top: usize) -> ScaledSeq {
    let mut rev = ScaledSeq::with_capacity(top + 1);
    let mut above = 0.0; // S_{n+1}
    let mut cur = 1.0; // S_n
    let mut exp2 = 0i64;
    rev.push(cur, exp2);
    for n in (1..=top).rev() {
        let cp = rec.at(n, energy);
        let below = -(above + cp.c * cur) / cp.d;
        above = cur;
        cur = below;
        rescale(&mut above, &mut cur, &mut exp2);
        rev.push(cur, exp2);
    }
    let mut out = ScaledSeq::with_capacity(top + 1);
    for i in (0..rev.len()).rev() {
        let (m, e) = rev.raw(i);
        out.push(m, e);
    }
    out
}

fn require_minimal(params: &ModelParams) -> Result<()> {
    let verdict = classify_regime(params).verdict;
    if verdict != RegimeVerdict::Normalizable {
        return Err(Error::MinimalSolutionUnavailable { verdict });
    }
    Ok(())
}

/// Minimal solution of the n ≥ 1 recurrence via Miller's backward
/// recursion from index `len + buffer`, normalized to S_0 = 1.
///
/// Satisfies the n = 0 relation only when `energy` is an eigenvalue.
pub fn backward_minimal(
    params: &ModelParams,
    sector: &SectorLabel,
    energy: f64,
    len: usize,
    buffer: usize,
) -> Result<SolutionSequence> {
    let rec = SectorRecurrence::new(params, sector)?;
    require_minimal(params)?;
    if len < 2 {
        return Err(Error::InvalidArgument("sequence length must be >= 2".into()));
    }
    let top = len + buffer.max(rec.turning_index(energy));
    let mut values = miller_raw(&rec, energy, top);
    values.truncate(len);
    if !values.normalize_first() {
        return Err(Error::NoConvergence {
            what: "minimal solution normalization (S_0 = 0 at a continued-fraction pole)",
            iterations: top,
        });
    }
    Ok(SolutionSequence {
        params: *params,
        sector: *sector,
        energy,
        kind: SequenceKind::BackwardMinimal,
        values,
    })
}

const PINCHERLE_MAX_TOP: usize = 1 << 20;
/// Relative change below which the boundary ratio counts as settled.
const PINCHERLE_STABLE: f64 = 1.0e-13;
/// Level below which a change that stops shrinking counts as settled.
const PINCHERLE_NOISE: f64 = 1.0e-8;

/// Smallest Miller start index (doubling from the turning index) at which
/// the boundary ratio S_1/S_0 has settled.
pub(crate) fn stable_miller_top(rec: &SectorRecurrence, energy: f64) -> Result<usize> {
    let c0 = rec.at(0, energy).c;
    let boundary_ratio = |top: usize| miller_raw(rec, energy, top).ratio(0);
    let mut top = rec.turning_index(energy) + 64;
    let mut ratio = boundary_ratio(top);
    let mut prev_change = f64::INFINITY;
    let mut stalls = 0;
    loop {
        let next_top = 2 * top;
        let next = boundary_ratio(next_top);
        let scale = 1.0 + c0.abs() + next.abs();
        let change = (next - ratio).abs() / scale;
        // A change that stops shrinking is the rounding floor: immediately
        // when already small, after two doublings otherwise (near a pole,
        // where S_0 ≈ 0 and the ratio is pure noise).
        if change >= 0.5 * prev_change {
            stalls += 1;
        } else {
            stalls = 0;
        }
        let floor = stalls > 0 && (change <= PINCHERLE_NOISE || stalls >= 2);
        if !next.is_finite() || change <= PINCHERLE_STABLE || floor {
            return Ok(next_top);
        }
        if next_top >= PINCHERLE_MAX_TOP {
            return Err(Error::NoConvergence {
                what: "Miller backward recursion",
                iterations: next_top,
            });
        }
        top = next_top;
        ratio = next;
        prev_change = change;
    }
}

/// Boundary data of the Miller solution seeded at a fixed `top`:
/// (S_1/S_0 + C_0, sign of S_0). With `top` fixed, S_0 is a polynomial in E
/// whose sign flips exactly at the poles of the spectral function.
pub(crate) fn miller_boundary(rec: &SectorRecurrence, energy: f64, top: usize) -> (f64, f64) {
    let seq = miller_raw(rec, energy, top);
    (seq.ratio(0) + rec.at(0, energy).c, seq.signum(0))
}

/// S_1/S_0 + C_0(E) for the minimal solution; zero exactly at the regular
/// eigenvalues of the sector. The Miller start index is doubled until the
/// boundary ratio is stable to rounding.
pub fn pincherle_residual(params: &ModelParams, sector: &SectorLabel, energy: f64) -> Result<f64> {
    let rec = SectorRecurrence::new(params, sector)?;
    require_minimal(params)?;
    let top = stable_miller_top(&rec, energy)?;
    Ok(miller_boundary(&rec, energy, top).0)
}

/// Row-0 residual of the minimal solution mapped to the symmetric Jacobi
/// basis (v_n = S_n Π_{j<n} √w_j) and normalized to ‖v‖ = 1.
///
/// Rows n ≥ 1 hold exactly, so this is a backward error: some eigenvalue of
/// the sector lies within it of `energy`. Unlike F it stays well scaled for
/// states with little weight on the first basis vector.
pub fn eigen_backward_error(params: &ModelParams, sector: &SectorLabel, energy: f64) -> Result<f64> {
    let rec = SectorRecurrence::new(params, sector)?;
    require_minimal(params)?;
    let top = stable_miller_top(&rec, energy)?;
    let seq = miller_raw(&rec, energy, top);
    let residual = seq.ratio(0) + rec.at(0, energy).c;
    // ln|v_n|, then ln‖v‖² by a running log-sum-exp
    let mut ln_u = 0.0;
    let mut ln_norm_sq = f64::NEG_INFINITY;
    for n in 0..seq.len() {
        if seq.signum(n) != 0.0 {
            let t = 2.0 * (seq.ln_abs(n) + ln_u);
            let (hi, lo) = if t > ln_norm_sq { (t, ln_norm_sq) } else { (ln_norm_sq, t) };
            ln_norm_sq = hi + (lo - hi).exp().ln_1p();
        }
        ln_u += 0.5 * rec.weight(n).ln();
    }
    let ln_v0 = seq.ln_abs(0);
    let scale = params.g.abs() * rec.weight(0) * (ln_v0 - 0.5 * ln_norm_sq).exp();
    Ok(scale * residual.abs())
}

/// Orthogonal polynomials P_n(E) generated by the energy-polynomial
/// recurrence, P_0 = 1, P_{-1} = 0.
#[derive(Debug, Clone)]
pub struct OrthoPolySequence {
    pub params: ModelParams,
    pub sector: SectorLabel,
    pub energy: f64,
    pub values: ScaledSeq,
}

/// P_{n+1} = (1/g)[E ∓ (−1)ⁿΔ − ε⁰_n] P_n − λ_n P_{n−1} with, for the two-mode
/// model, ε⁰_n = 2ω(n+κ−1/2), λ_n = n(n+2κ−1), and for the k-photon model
/// ε⁰_n = kω(n+q−1/k²), λ_n = Π_j k(n+q−((j−1)k+1)/k²).
pub fn ortho_poly_sequence(
    params: &ModelParams,
    sector: &SectorLabel,
    energy: f64,
    len: usize,
) -> Result<OrthoPolySequence> {
    params.validate()?;
    params.require_coupling()?;
    let block = params.resolve(sector)?;
    if len < 2 {
        return Err(Error::InvalidArgument("sequence length must be >= 2".into()));
    }
    let (omega, delta, g) = (params.omega, params.delta, params.g);
    let pm = sector.parity.sign();
    let label = block.label();
    let step = |n: usize| -> (f64, f64) {
        let nf = n as f64;
        let alt = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        match block {
            ResolvedBlock::TwoMode { .. } => {
                let kappa = label;
                let a = (energy - pm * alt * delta - 2.0 * omega * (nf + kappa - 0.5)) / g;
                (a, nf * (nf + 2.0 * kappa - 1.0))
            }
            ResolvedBlock::KPhoton { k, .. } => {
                let q = label;
                let kf = f64::from(k);
                let k2 = kf * kf;
                let a = (energy - pm * alt * delta - kf * omega * (nf + q - 1.0 / k2)) / g;
                let lambda: f64 = (1..=k)
                    .map(|j| kf * (nf + q - (f64::from(j - 1) * kf + 1.0) / k2))
                    .product();
                (a, lambda)
            }
        }
    };
    let mut values = ScaledSeq::with_capacity(len);
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut exp2 = 0i64;
    values.push(cur, exp2);
    for n in 0..len - 1 {
        let (a, lambda) = step(n);
        let next = a * cur - lambda * prev;
        prev = cur;
        cur = next;
        rescale(&mut prev, &mut cur, &mut exp2);
        values.push(cur, exp2);
    }
    Ok(OrthoPolySequence {
        params: *params,
        sector: *sector,
        energy,
        values,
    })
}

/// ln of the denominator relating S_n (K_n) to P_n:
/// n!(n+2κ−1)! for the two-mode model, Π_j kⁿ Γ(n+1+q−((j−1)k+1)/k²) for
/// the k-photon model. With S_0 = P_0 = 1 the identity reads
/// S_n = P_n · exp(d_0 − d_n).
pub fn ln_poly_denominator(params: &ModelParams, sector: &SectorLabel, n: usize) -> Result<f64> {
    let block = params.resolve(sector)?;
    let nf = n as f64;
    Ok(match block {
        ResolvedBlock::TwoMode { two_kappa } => {
            ln_gamma(nf + 1.0) + ln_gamma(nf + f64::from(two_kappa))
        }
        ResolvedBlock::KPhoton { k, .. } => {
            let q = block.label();
            let kf = f64::from(k);
            (1..=k)
                .map(|j| {
                    nf * kf.ln() + ln_gamma(nf + 1.0 + q - (f64::from(j - 1) * kf + 1.0) / (kf * kf))
                })
                .sum()
        }
    })
}

//! Truncated-Hamiltonian ground truth.
//!
//! Each parity sector is an exactly tridiagonal operator in the number basis
//! of its block:
//!
//! * two-mode, block κ: ⟨n|H±|n⟩ = 2ω(n+κ−1/2) ± Δ(−1)ⁿ and
//!   ⟨n+1|H±|n⟩ = g√((n+1)(n+2κ)), from K₊|κ,n⟩ = √((n+1)(n+2κ))|κ,n+1⟩;
//! * k-photon, block q (Fock states |kn+r⟩, r = (k²q−1)/k):
//!   ⟨n|H±|n⟩ = kω(n+q−1/k²) ± Δ(−1)ⁿ and
//!   ⟨n+1|H±|n⟩ = g√(Π_{i=1..k}(kn+r+i)), from the Fock action of (a†)^k.
//!
//! The spin-resolved block (boson ⊗ spin, 2N states) is also available; its
//! spectrum is the union of the two parity sectors at any truncation.

mod jacobi;
mod tridiag;

pub use jacobi::{jacobi_eigenvalues, JacobiResult, DEFAULT_MAX_SWEEPS};
pub use tridiag::symmetric_tridiagonal_eigen;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BlockLabel, ModelParams, Parity, ResolvedBlock, SectorLabel};

pub const DEFAULT_TRUNCATION: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub sector: SectorLabel,
    pub truncation: usize,
}

impl TridiagonalMatrix {
    pub fn order(&self) -> usize {
        self.diag.len()
    }

    /// Levels above this energy feel the truncation edge and are not used
    /// for cross-checks.
    pub fn eligibility_cutoff(&self) -> f64 {
        let half = self.order() / 2;
        self.diag[half].min(self.diag[(half + 1).min(self.order() - 1)])
    }

    /// Same operator in reversed basis order.
    pub fn reversed(&self) -> Self {
        let mut diag = self.diag.clone();
        diag.reverse();
        let mut offdiag = self.offdiag.clone();
        offdiag.reverse();
        Self { diag, offdiag, ..self.clone() }
    }

    pub fn norm_bound(&self) -> f64 {
        let d = self.diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let o = self.offdiag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        d + 2.0 * o
    }
}

/// Boson part of the diagonal and the ladder elements of a block.
fn block_elements(params: &ModelParams, block: ResolvedBlock, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (omega, g) = (params.omega, params.g);
    match block {
        ResolvedBlock::TwoMode { two_kappa } => {
            let kappa = f64::from(two_kappa) / 2.0;
            let diag = (0..n).map(|m| 2.0 * omega * (m as f64 + kappa - 0.5)).collect();
            let off = (0..n.saturating_sub(1))
                .map(|m| {
                    let m = m as f64;
                    g * ((m + 1.0) * (m + 2.0 * kappa)).sqrt()
                })
                .collect();
            (diag, off)
        }
        ResolvedBlock::KPhoton { k, r } => {
            let kf = f64::from(k);
            let q = (f64::from(r) * kf + 1.0) / (kf * kf);
            let diag = (0..n).map(|m| kf * omega * (m as f64 + q - 1.0 / (kf * kf))).collect();
            let off = (0..n.saturating_sub(1))
                .map(|m| {
                    let base = kf * m as f64 + f64::from(r);
                    let ln_prod: f64 = (1..=k).map(|i| (base + f64::from(i)).ln()).sum();
                    g * (0.5 * ln_prod).exp()
                })
                .collect();
            (diag, off)
        }
    }
}

fn check_truncation(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("truncation must be >= 2, got {n}")));
    }
    Ok(())
}

/// Parity-sector Hamiltonian truncated to the lowest `n` basis states.
pub fn build_sector_tridiagonal(
    params: &ModelParams,
    sector: &SectorLabel,
    n: usize,
) -> Result<TridiagonalMatrix> {
    params.validate()?;
    check_truncation(n)?;
    let block = params.resolve(sector)?;
    let (mut diag, offdiag) = block_elements(params, block, n);
    let pm = sector.parity.sign();
    for (m, d) in diag.iter_mut().enumerate() {
        let alt = if m % 2 == 0 { 1.0 } else { -1.0 };
        *d += pm * alt * params.delta;
    }
    Ok(TridiagonalMatrix {
        diag,
        offdiag,
        sector: *sector,
        truncation: n,
    })
}

/// Dense block Hamiltonian in the (boson ⊗ spin) basis, row-major, index
/// 2m + s with s = 0 for spin up.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetricMatrix {
    pub order: usize,
    pub entries: Vec<f64>,
    pub block: BlockLabel,
    pub truncation: usize,
}

impl DenseSymmetricMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }
}

/// σ_z on the diagonal, σ_x coupling opposite spins through the ladder
/// stencil of the block.
pub fn build_full_block(params: &ModelParams, block: BlockLabel, n: usize) -> Result<DenseSymmetricMatrix> {
    params.validate()?;
    check_truncation(n)?;
    let resolved = params.resolve(&SectorLabel::new(block, Parity::Plus))?;
    let (boson, ladder) = block_elements(params, resolved, n);
    let order = 2 * n;
    let mut entries = vec![0.0; order * order];
    let mut set = |i: usize, j: usize, v: f64| {
        entries[i * order + j] = v;
        entries[j * order + i] = v;
    };
    for (m, &b) in boson.iter().enumerate() {
        set(2 * m, 2 * m, b + params.delta);
        set(2 * m + 1, 2 * m + 1, b - params.delta);
    }
    for (m, &t) in ladder.iter().enumerate() {
        set(2 * m, 2 * (m + 1) + 1, t);
        set(2 * m + 1, 2 * (m + 1), t);
    }
    Ok(DenseSymmetricMatrix {
        order,
        entries,
        block,
        truncation: n,
    })
}

/// Lowest `count` eigenvalues, ascending.
pub fn eigs_tridiagonal(m: &TridiagonalMatrix, count: usize) -> Result<Vec<f64>> {
    if count > m.order() {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenvalues of an order-{} matrix",
            m.order()
        )));
    }
    let (mut values, _) = symmetric_tridiagonal_eigen(&m.diag, &m.offdiag, false)?;
    values.truncate(count);
    Ok(values)
}

pub fn eigs_dense_symmetric(m: &DenseSymmetricMatrix) -> JacobiResult {
    jacobi_eigenvalues(m.entries.clone(), m.order, DEFAULT_MAX_SWEEPS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub sector: SectorLabel,
    pub truncations: Vec<usize>,
    /// `levels[i][j]`: i-th lowest eigenvalue at `truncations[j]`.
    pub levels: Vec<Vec<f64>>,
    /// `increments[i][j]` = |levels[i][j+1] − levels[i][j]|.
    pub increments: Vec<Vec<f64>>,
}

pub fn convergence_study(
    params: &ModelParams,
    sector: &SectorLabel,
    truncations: &[usize],
    levels: usize,
) -> Result<ConvergenceTable> {
    if truncations.is_empty() || truncations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("truncations must be non-empty and strictly ascending".into()));
    }
    if levels == 0 || levels > truncations[0] {
        return Err(Error::InvalidArgument(format!(
            "levels must be in 1..={}",
            truncations[0]
        )));
    }
    let spectra = truncations
        .iter()
        .map(|&n| eigs_tridiagonal(&build_sector_tridiagonal(params, sector, n)?, levels))
        .collect::<Result<Vec<_>>>()?;
    let levels_table: Vec<Vec<f64>> = (0..levels)
        .map(|i| spectra.iter().map(|s| s[i]).collect())
        .collect();
    let increments = levels_table
        .iter()
        .map(|row| row.windows(2).map(|w| (w[1] - w[0]).abs()).collect())
        .collect();
    Ok(ConvergenceTable {
        sector: *sector,
        truncations: truncations.to_vec(),
        levels: levels_table,
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_mode_matrix_example() {
        let p = ModelParams::two_mode(1.0, 0.7, 0.5).unwrap();
        let m = build_sector_tridiagonal(&p, &SectorLabel::two_mode(1, Parity::Plus), 3).unwrap();
        assert_eq!(m.diag, vec![0.7, 1.3, 4.7]);
        assert_eq!(m.offdiag, vec![0.5, 1.0]);
    }

    #[test]
    fn two_photon_matrix_example() {
        let p = ModelParams::k_photon(2, 1.0, 0.0, 0.25).unwrap();
        let m = build_sector_tridiagonal(&p, &SectorLabel::k_photon(2, 0, Parity::Plus), 2).unwrap();
        assert_eq!(m.diag, vec![0.0, 2.0]);
        assert_relative_eq!(m.offdiag[0], 0.25 * 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        let p = ModelParams::two_mode(1.0, 0.3, 0.0).unwrap();
        let s = SectorLabel::two_mode(2, Parity::Minus);
        let m = build_sector_tridiagonal(&p, &s, 10).unwrap();
        assert!(m.offdiag.iter().all(|&x| x == 0.0));
        let mut expected = m.diag.clone();
        expected.sort_by(f64::total_cmp);
        assert_eq!(eigs_tridiagonal(&m, 10).unwrap(), expected);
    }

    /// Independent construction: ladder elements read off explicit Fock
    /// matrices. Two-mode K₊ = a₁†a₂† on |n+δ, n⟩ (κ = (δ+1)/2); k-photon
    /// (a†)^k on |kn+r⟩.
    #[test]
    fn ladder_elements_match_fock_construction() {
        let dim = 80;
        // a† in a truncated Fock space: ⟨m+1|a†|m⟩ = √(m+1)
        let adag = |m: usize| ((m + 1) as f64).sqrt();
        for delta_n in 0..2usize {
            let two_kappa = delta_n as u32 + 1;
            let p = ModelParams::two_mode(1.0, 0.0, 1.0).unwrap();
            let m = build_sector_tridiagonal(&p, &SectorLabel::two_mode(two_kappa, Parity::Plus), 30).unwrap();
            for n in 0..29 {
                let elem = adag(n + delta_n) * adag(n);
                assert_relative_eq!(m.offdiag[n], elem, max_relative = 1e-14);
            }
        }
        for k in 1..=4usize {
            // dense (a†)^k by repeated multiplication
            let mut power = vec![vec![0.0f64; dim]; dim];
            for (i, row) in power.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            for _ in 0..k {
                let mut next = vec![vec![0.0f64; dim]; dim];
                for col in 0..dim {
                    for row in 0..dim - 1 {
                        next[row + 1][col] += adag(row) * power[row][col];
                    }
                }
                power = next;
            }
            let p = ModelParams::k_photon(k as u32, 1.0, 0.0, 1.0).unwrap();
            for r in 0..k {
                let s = SectorLabel::k_photon(k as u32, r as u32, Parity::Plus);
                let m = build_sector_tridiagonal(&p, &s, 10).unwrap();
                for n in 0..9 {
                    let (from, to) = (k * n + r, k * (n + 1) + r);
                    if to < dim {
                        assert_relative_eq!(m.offdiag[n], power[to][from], max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn k_photon_diagonal_counts_photons() {
        // kω(n+q−1/k²) = ω·(kn+r)
        let p = ModelParams::k_photon(3, 1.5, 0.0, 0.1).unwrap();
        for r in 0..3 {
            let m = build_sector_tridiagonal(&p, &SectorLabel::k_photon(3, r, Parity::Plus), 6).unwrap();
            for (n, d) in m.diag.iter().enumerate() {
                assert_relative_eq!(*d, 1.5 * (3 * n as u32 + r) as f64, max_relative = 1e-14, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn full_block_is_union_of_parities() {
        let p = ModelParams::two_mode(1.0, 0.45, 0.35).unwrap();
        let block: BlockLabel = "3/2".parse().unwrap();
        let n = 40;
        let full = eigs_dense_symmetric(&build_full_block(&p, block, n).unwrap());
        assert!(full.converged);
        let mut union = Vec::new();
        for parity in [Parity::Plus, Parity::Minus] {
            let m = build_sector_tridiagonal(&p, &SectorLabel::new(block, parity), n).unwrap();
            union.extend(eigs_tridiagonal(&m, n).unwrap());
        }
        union.sort_by(f64::total_cmp);
        for (a, b) in full.values.iter().zip(&union) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn full_block_limits() {
        let block: BlockLabel = "1".parse().unwrap();
        let p = ModelParams::two_mode(1.0, 0.3, 0.0).unwrap();
        let vals = eigs_dense_symmetric(&build_full_block(&p, block, 5).unwrap()).values;
        let mut expected: Vec<f64> = (0..5)
            .flat_map(|n| [2.0 * (n as f64 + 0.5) + 0.3, 2.0 * (n as f64 + 0.5) - 0.3])
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let p = ModelParams::two_mode(1.0, 0.0, 0.4).unwrap();
        let vals = eigs_dense_symmetric(&build_full_block(&p, block, 30).unwrap()).values;
        for pair in vals.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_reversal_invariance() {
        let p = ModelParams::k_photon(2, 1.0, 0.3, 0.2).unwrap();
        let m = build_sector_tridiagonal(&p, &SectorLabel::k_photon(2, 1, Parity::Minus), 200).unwrap();
        let a = eigs_tridiagonal(&m, 200).unwrap();
        let b = eigs_tridiagonal(&m.reversed(), 200).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * m.norm_bound());
        }
    }

    #[test]
    fn two_mode_zero_delta_closed_form() {
        for g in [0.2, 0.5, 0.8] {
            let p = ModelParams::two_mode(1.0, 0.0, g).unwrap();
            for two_kappa in [1, 2] {
                let m = build_sector_tridiagonal(&p, &SectorLabel::two_mode(two_kappa, Parity::Plus), 400).unwrap();
                let vals = eigs_tridiagonal(&m, 10).unwrap();
                let kappa = f64::from(two_kappa) / 2.0;
                for (n, v) in vals.iter().enumerate() {
                    let exact = 2.0 * (1.0 - g * g).sqrt() * (n as f64 + kappa) - 1.0;
                    assert!((v - exact).abs() < 1e-10, "g = {g}, n = {n}: {v} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn convergence_table_shape() {
        let p = ModelParams::k_photon(2, 1.0, 0.5, 0.4).unwrap();
        let s = SectorLabel::k_photon(2, 0, Parity::Plus);
        let t = convergence_study(&p, &s, &[100, 200, 400], 3).unwrap();
        assert_eq!(t.levels.len(), 3);
        assert_eq!(t.increments[0].len(), 2);
        assert!(t.increments[0][1] < 1e-8);
        assert!(convergence_study(&p, &s, &[200, 100], 3).is_err());
    }

    #[test]
    fn mismatched_block_rejected() {
        let p = ModelParams::k_photon(2, 1.0, 0.5, 0.4).unwrap();
        let s = SectorLabel::two_mode(1, Parity::Plus);
        assert!(matches!(build_sector_tridiagonal(&p, &s, 10), Err(Error::BlockMismatch { .. })));
    }
}

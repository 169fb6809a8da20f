//! Finite-rank nonnegative operators `γ = Σ_k λ_k |u_k⟩⟨u_k|` kept in
//! eigen-representation, with their densities `ρ_γ(x) = Σ_k λ_k |u_k(x)|²`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{lp_norm_of, GridFunction, TorusGrid};
use crate::partition::DyadicBlockSet;
use crate::sum::{compensated_sum, NeumaierSum};

/// Tolerance on Gram residuals and on the operator bound `≤ 1`.
pub const CONTRACT_TOLERANCE: f64 = 1e-10;

/// Eigenfunctions processed concurrently when accumulating densities.
const ACCUMULATION_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Contract {
    /// Only `λ_k ≥ 0`; eigenfunctions need not be orthonormal.
    #[serde(rename = "none")]
    Unconstrained,
    /// `0 ≤ γ ≤ 1`.
    InUnitBall,
    /// `0 ≤ γ ≤ (−Δ)^a`.
    PowerBounded { a: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractReport {
    pub contract: Contract,
    pub pass: bool,
    /// Largest `|⟨u_k, u_l⟩ − δ_kl|`; zero for the unconstrained contract.
    pub gram_residual: f64,
    /// Largest eigenvalue of the bound-normalized operator (`λ_max` for the unit ball).
    pub spectral_max: f64,
    /// `spectral_max − 1`; positive values are violations.
    pub margin: f64,
}

/// Nonnegative real density on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Density {
    /// Clamps rounding-level negatives (≥ −1e−12) to zero.
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::SizeMismatch { expected: grid.len(), got: values.len() });
        }
        let values = values
            .into_iter()
            .map(|v| {
                if v >= 0.0 {
                    Ok(v)
                } else if v >= -1e-12 {
                    Ok(0.0)
                } else {
                    Err(LabError::Domain(format!("density value {v} is negative")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    /// `∫ ρ^q`.
    pub fn power_integral(&self, q: f64) -> f64 {
        compensated_sum(self.values.iter().map(|v| v.powf(q))) * self.grid.cell_volume()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.grid, self.values.iter().copied(), p)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Density) -> Result<Density> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Density { grid: self.grid, values })
    }

    /// Pointwise sum of a family of densities, compensated in the given order.
    pub fn sum(parts: &[Density]) -> Result<Density> {
        let first = parts.first().ok_or_else(|| LabError::Config("no densities to sum".into()))?;
        let mut acc = vec![NeumaierSum::new(); first.values.len()];
        for part in parts {
            if part.grid != first.grid {
                return Err(LabError::GridMismatch);
            }
            for (a, v) in acc.iter_mut().zip(&part.values) {
                a.add(*v);
            }
        }
        Ok(Density { grid: first.grid, values: acc.iter().map(NeumaierSum::value).collect() })
    }
}

/// Sums `rows(k)` over `k` in index order; rows are computed in parallel chunks.
fn accumulate_rows<F>(count: usize, width: usize, rows: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let mut acc = vec![NeumaierSum::new(); width];
    let indices: Vec<usize> = (0..count).collect();
    for chunk in indices.chunks(ACCUMULATION_CHUNK) {
        let computed: Vec<Vec<f64>> = chunk.par_iter().map(|&k| rows(k)).collect::<Result<_>>()?;
        for row in computed {
            for (a, v) in acc.iter_mut().zip(row) {
                a.add(v);
            }
        }
    }
    Ok(acc.iter().map(NeumaierSum::value).collect())
}

#[derive(Clone, Debug)]
pub struct FiniteRankOperator {
    grid: TorusGrid,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<GridFunction>,
    contract: Contract,
}

impl FiniteRankOperator {
    /// Unconstrained operator; only checks shapes and `λ_k ≥ 0`.
    pub fn new(grid: TorusGrid, eigenvalues: Vec<f64>, eigenfunctions: Vec<GridFunction>) -> Result<Self> {
        if eigenvalues.len() != eigenfunctions.len() {
            return Err(LabError::SizeMismatch { expected: eigenvalues.len(), got: eigenfunctions.len() });
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(LabError::Domain(format!("eigenvalue {bad} is not a nonnegative real")));
        }
        if eigenfunctions.iter().any(|u| *u.grid() != grid) {
            return Err(LabError::GridMismatch);
        }
        Ok(Self { grid, eigenvalues, eigenfunctions, contract: Contract::Unconstrained })
    }

    /// Validates `contract` and tags the operator with it.
    pub fn with_contract(mut self, contract: Contract) -> Result<Self> {
        let report = self.validate_contract(contract)?;
        if !report.pass {
            return Err(LabError::Contract(format!(
                "{contract:?} fails: gram residual {:.3e}, margin {:.3e}",
                report.gram_residual, report.margin
            )));
        }
        self.contract = contract;
        Ok(self)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[GridFunction] {
        &self.eigenfunctions
    }

    pub fn contract(&self) -> Contract {
        self.contract
    }

    /// `tr γ = Σ_k λ_k ‖u_k‖²`.
    pub fn trace(&self) -> f64 {
        compensated_sum(
            self.eigenvalues
                .iter()
                .zip(&self.eigenfunctions)
                .map(|(l, u)| l * u.lp_norm(2.0).expect("p = 2").powi(2)),
        )
    }

    /// `c·γ`; the contract tag is dropped.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid, self.eigenvalues.iter().map(|l| l * c).collect(), self.eigenfunctions.clone())
    }

    /// `γ₁ + γ₂` as the concatenated eigensystem (contract dropped).
    pub fn concat(&self, other: &FiniteRankOperator) -> Result<Self> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch);
        }
        let mut eigenvalues = self.eigenvalues.clone();
        eigenvalues.extend_from_slice(&other.eigenvalues);
        let mut eigenfunctions = self.eigenfunctions.clone();
        eigenfunctions.extend_from_slice(&other.eigenfunctions);
        Self::new(self.grid, eigenvalues, eigenfunctions)
    }

    /// `ρ_γ(x) = Σ_k λ_k |u_k(x)|²`.
    pub fn density(&self) -> Density {
        let values = accumulate_rows(self.rank(), self.grid.len(), |k| {
            let l = self.eigenvalues[k];
            Ok(self.eigenfunctions[k].values().iter().map(|v| l * v.norm_sqr()).collect())
        })
        .expect("density rows are infallible");
        Density::new(self.grid, values).expect("sum of squares is nonnegative")
    }

    /// `ρ_{P_j γ P_j}(x) = Σ_k λ_k |P_j u_k(x)|²`.
    pub fn conjugated_density(&self, blocks: &DyadicBlockSet, j: i32) -> Result<Density> {
        if *blocks.grid() != self.grid {
            return Err(LabError::GridMismatch);
        }
        let symbol = blocks.symbol(j)?;
        let values = accumulate_rows(self.rank(), self.grid.len(), |k| {
            let piece = self.eigenfunctions[k].apply_multiplier(symbol)?;
            let l = self.eigenvalues[k];
            Ok(piece.values().iter().map(|v| l * v.norm_sqr()).collect())
        })?;
        Density::new(self.grid, values)
    }

    /// Every `ρ_{P_j γ P_j}`, `j = j_min..=j_max`, one forward transform per eigenfunction.
    pub fn conjugated_densities(&self, blocks: &DyadicBlockSet) -> Result<Vec<Density>> {
        if *blocks.grid() != self.grid {
            return Err(LabError::GridMismatch);
        }
        let width = self.grid.len();
        let tables: Vec<&[f64]> = blocks.symbols().map(|(_, s)| s).collect();
        let flat = accumulate_rows(self.rank(), width * tables.len(), |k| {
            let spectrum = self.eigenfunctions[k].forward_transform();
            let l = self.eigenvalues[k];
            let mut row = Vec::with_capacity(width * tables.len());
            for table in &tables {
                let piece = spectrum.multiply(table)?.inverse_transform();
                row.extend(piece.values().iter().map(|v| l * v.norm_sqr()));
            }
            Ok(row)
        })?;
        flat.chunks(width).map(|c| Density::new(self.grid, c.to_vec())).collect()
    }

    /// `tr (−Δ)^b γ = Σ_k λ_k ‖(−Δ)^{b/2} u_k‖²`.
    pub fn kinetic_trace(&self, b: f64) -> Result<f64> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(LabError::Domain(format!("kinetic power b = {b} must be a nonnegative real")));
        }
        let terms: Vec<f64> = (0..self.rank())
            .into_par_iter()
            .map(|k| Ok(self.eigenvalues[k] * self.eigenfunctions[k].kinetic_form(b)?))
            .collect::<Result<_>>()?;
        Ok(compensated_sum(terms))
    }

    /// Gram matrix `G_kl = ⟨u_k, u_l⟩`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        inner_products(&self.eigenfunctions)
    }

    /// Checks `contract` without tagging; see [`ContractReport`].
    pub fn validate_contract(&self, contract: Contract) -> Result<ContractReport> {
        let spectral_of = |spectral_max: f64, gram_residual: f64| {
            let margin = spectral_max - 1.0;
            ContractReport {
                contract,
                pass: gram_residual <= CONTRACT_TOLERANCE && margin <= CONTRACT_TOLERANCE,
                gram_residual,
                spectral_max,
                margin,
            }
        };
        match contract {
            Contract::Unconstrained => Ok(ContractReport {
                contract,
                pass: true,
                gram_residual: 0.0,
                spectral_max: 0.0,
                margin: 0.0,
            }),
            Contract::InUnitBall => {
                let gram_residual = identity_residual(&self.gram());
                let lambda_max = self.eigenvalues.iter().copied().fold(0.0, f64::max);
                Ok(spectral_of(lambda_max, gram_residual))
            }
            Contract::PowerBounded { a } => {
                if !a.is_finite() {
                    return Err(LabError::Domain(format!("power bound exponent {a} is not finite")));
                }
                let gram_residual = identity_residual(&self.gram());
                let weighted: Vec<GridFunction> = self
                    .eigenfunctions
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(u, l)| {
                        let spectrum = u.forward_transform();
                        if a != 0.0 && !spectrum.is_mean_zero() {
                            return Err(LabError::ZeroModeSingularity(format!(
                                "power bound (−Δ)^{a} needs mean-zero eigenfunctions"
                            )));
                        }
                        let unit = self.grid.frequency_unit();
                        let table: Vec<f64> = (0..self.grid.len())
                            .map(|idx| {
                                let m_sq = self.grid.lattice_norm_sq(idx);
                                if a == 0.0 {
                                    1.0
                                } else if m_sq == 0 {
                                    0.0
                                } else {
                                    ((m_sq as f64).sqrt() * unit).powf(-a)
                                }
                            })
                            .collect();
                        Ok(spectrum.multiply(&table)?.inverse_transform().scaled(Complex64::new(l.sqrt(), 0.0)))
                    })
                    .collect::<Result<_>>()?;
                let m = inner_products(&weighted);
                let spectral_max = if m.nrows() == 0 {
                    0.0
                } else {
                    m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                Ok(spectral_of(spectral_max, gram_residual))
            }
        }
    }

    /// Writes a JSON header at `path` and the eigenfunction samples next to
    /// it with extension `bin` (row-major, little-endian `f64`, re/im interleaved).
    pub fn save(&self, path: &Path) -> Result<()> {
        let data_path = data_path_for(path);
        let header = OperatorHeader {
            schema_version: OPERATOR_SCHEMA_VERSION,
            dim: self.grid.dim(),
            box_length: self.grid.box_length(),
            points_per_axis: self.grid.points_per_axis(),
            rank: self.rank(),
            eigenvalues: self.eigenvalues.clone(),
            contract: self.contract,
            data_file: data_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &header)?;
        out.write_all(b"\n")?;
        out.flush()?;

        let mut data = BufWriter::new(File::create(&data_path)?);
        for u in &self.eigenfunctions {
            for v in u.values() {
                data.write_all(&v.re.to_le_bytes())?;
                data.write_all(&v.im.to_le_bytes())?;
            }
        }
        data.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let header: OperatorHeader = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if header.schema_version != OPERATOR_SCHEMA_VERSION {
            return Err(LabError::Config(format!("unsupported operator schema {}", header.schema_version)));
        }
        if header.eigenvalues.len() != header.rank {
            return Err(LabError::SizeMismatch { expected: header.rank, got: header.eigenvalues.len() });
        }
        let grid = TorusGrid::new(header.dim, header.box_length, header.points_per_axis)?;
        let data_path = path.with_file_name(&header.data_file);
        let mut bytes = Vec::new();
        BufReader::new(File::open(data_path)?).read_to_end(&mut bytes)?;
        let expected = header.rank * grid.len() * 16;
        if bytes.len() != expected {
            return Err(LabError::SizeMismatch { expected, got: bytes.len() });
        }
        let mut numbers = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut eigenfunctions = Vec::with_capacity(header.rank);
        for _ in 0..header.rank {
            let values = (0..grid.len())
                .map(|_| {
                    let re = numbers.next().expect("length checked");
                    let im = numbers.next().expect("length checked");
                    Complex64::new(re, im)
                })
                .collect();
            eigenfunctions.push(GridFunction::new(grid, values)?);
        }
        let op = Self::new(grid, header.eigenvalues, eigenfunctions)?;
        match header.contract {
            Contract::Unconstrained => Ok(op),
            c => op.with_contract(c),
        }
    }
}

const OPERATOR_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct OperatorHeader {
    schema_version: u32,
    dim: usize,
    box_length: f64,
    points_per_axis: usize,
    rank: usize,
    eigenvalues: Vec<f64>,
    contract: Contract,
    data_file: String,
}

fn data_path_for(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

fn inner_products(fs: &[GridFunction]) -> DMatrix<Complex64> {
    let k = fs.len();
    let w = fs.first().map_or(0.0, |f| f.grid().cell_volume());
    // Upper triangle row by row; the lower half is filled by conjugation.
    let rows: Vec<Vec<Complex64>> = (0..k)
        .into_par_iter()
        .map(|r| {
            let a = fs[r].values();
            (r..k)
                .map(|c| a.iter().zip(fs[c].values()).map(|(x, y)| x.conj() * y).sum::<Complex64>() * w)
                .collect()
        })
        .collect();
    let mut gram = DMatrix::zeros(k, k);
    for (r, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            gram[(r, r + offset)] = v;
            if offset > 0 {
                gram[(r + offset, r)] = v.conj();
            }
        }
    }
    gram
}

fn identity_residual(gram: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, c)] - target).norm());
        }
    }
    worst
}

/// Constant diagonal `L^{-d} Σ_ξ Ψ_j(ξ)²` of the kernel of `P_j²`; bounds
/// `ρ_{P_j γ P_j}` pointwise for every `0 ≤ γ ≤ 1`.
pub fn diagonal_block_bound(blocks: &DyadicBlockSet, j: i32) -> Result<f64> {
    let symbol = blocks.symbol(j)?;
    Ok(compensated_sum(symbol.iter().map(|v| v * v)) / blocks.grid().volume())
}

/// Spectral projection onto plane waves with `|ξ|² ≤ μ`, all `λ = 1`.
pub fn fermi_sea(grid: TorusGrid, mu: f64) -> Result<FiniteRankOperator> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(LabError::EmptyOperator(format!("no lattice modes with |ξ|² ≤ {mu}")));
    }
    let unit_sq = grid.frequency_unit().powi(2);
    let modes: Vec<[i64; 3]> = (0..grid.len())
        .filter(|&idx| grid.lattice_norm_sq(idx) as f64 * unit_sq <= mu)
        .map(|idx| grid.lattice_vector(idx))
        .collect();
    plane_wave_operator(grid, &modes)
}

/// Fermi sea with the zero mode removed; mean-zero by construction.
pub fn punctured_fermi_sea(grid: TorusGrid, mu: f64) -> Result<FiniteRankOperator> {
    let unit_sq = grid.frequency_unit().powi(2);
    let modes: Vec<[i64; 3]> = (1..grid.len())
        .filter(|&idx| grid.lattice_norm_sq(idx) as f64 * unit_sq <= mu)
        .map(|idx| grid.lattice_vector(idx))
        .collect();
    if modes.is_empty() {
        return Err(LabError::EmptyOperator(format!("no nonzero lattice modes with |ξ|² ≤ {mu}")));
    }
    plane_wave_operator(grid, &modes)
}

fn plane_wave_operator(grid: TorusGrid, modes: &[[i64; 3]]) -> Result<FiniteRankOperator> {
    let d = grid.dim();
    let eigenfunctions = modes.par_iter().map(|m| grid.plane_wave(&m[..d])).collect::<Result<Vec<_>>>()?;
    let mut op = FiniteRankOperator::new(grid, vec![1.0; modes.len()], eigenfunctions)?;
    // Distinct lattice plane waves are orthonormal on the grid; skip the Gram check.
    op.contract = Contract::InUnitBall;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projectors::project;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid1() -> TorusGrid {
        TorusGrid::new(1, 2.0 * PI, 256).unwrap()
    }

    fn waves(grid: TorusGrid, ms: &[i64]) -> Vec<GridFunction> {
        ms.iter().map(|&m| grid.plane_wave(&[m]).unwrap()).collect()
    }

    #[test]
    fn rank_one_density() {
        let g = grid1();
        let u = g.sample(|x| Complex64::new((x[0]).cos() + 0.3, (2.0 * x[0]).sin()));
        let norm = u.lp_norm(2.0).unwrap();
        let u = u.scaled(Complex64::new(1.0 / norm, 0.0));
        let op = FiniteRankOperator::new(g, vec![1.0], vec![u.clone()]).unwrap();
        let rho = op.density();
        for (r, v) in rho.values().iter().zip(u.values()) {
            assert_eq!(*r, v.norm_sqr());
        }
        assert_relative_eq!(rho.integral(), 1.0, max_relative = 1e-12);
        let zero = FiniteRankOperator::new(g, vec![0.0, 0.0], waves(g, &[1, 2])).unwrap();
        assert!(zero.density().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn plane_wave_pair_has_constant_density() {
        let g = TorusGrid::new(2, 3.0, 16).unwrap();
        let fs = vec![g.plane_wave(&[1, 0]).unwrap(), g.plane_wave(&[-2, 3]).unwrap()];
        let op = FiniteRankOperator::new(g, vec![1.0, 1.0], fs).unwrap();
        for v in op.density().values() {
            assert_relative_eq!(*v, 2.0 / g.volume(), max_relative = 1e-12);
        }
        assert_relative_eq!(op.density().integral(), op.trace(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_negative_eigenvalues() {
        let g = grid1();
        assert!(FiniteRankOperator::new(g, vec![-0.1], waves(g, &[1])).is_err());
        assert!(FiniteRankOperator::new(g, vec![1.0, 1.0], waves(g, &[1])).is_err());
    }

    #[test]
    fn conjugated_density_examples() {
        let g = grid1();
        let b = DyadicBlockSet::smooth(g).unwrap();
        let u = waves(g, &[8]).remove(0);
        let op = FiniteRankOperator::new(g, vec![1.0], vec![u.clone()]).unwrap();
        for j in b.indices() {
            let rho = op.conjugated_density(&b, j).unwrap();
            let pj = project(&u, &b, j).unwrap();
            for (r, v) in rho.values().iter().zip(pj.values()) {
                assert_eq!(*r, v.norm_sqr());
            }
            let psi = b.symbol(j).unwrap()[g.lattice_slot(&[8]).unwrap()];
            for r in rho.values() {
                assert_relative_eq!(*r, psi * psi / g.volume(), epsilon = 1e-15);
            }
        }
        let all = op.conjugated_densities(&b).unwrap();
        for (j, rho) in b.indices().zip(&all) {
            let single = op.conjugated_density(&b, j).unwrap();
            for (a, c) in rho.values().iter().zip(single.values()) {
                assert!((a - c).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn conjugated_mass_bounded_by_trace() {
        let g = grid1();
        let b = DyadicBlockSet::smooth(g).unwrap();
        let op = FiniteRankOperator::new(g, vec![0.3, 1.0, 0.7], waves(g, &[3, 6, 8])).unwrap();
        let total: f64 = op.conjugated_densities(&b).unwrap().iter().map(Density::integral).sum();
        // Only |ξ| = 8 has overlap count 1.
        let sq = b.block_squared_sum();
        let expected = 0.3 * sq[g.lattice_slot(&[3]).unwrap()] + 1.0 * sq[g.lattice_slot(&[6]).unwrap()] + 0.7;
        assert_relative_eq!(total, expected, max_relative = 1e-12);
        assert!(total < op.trace());
        let dyadic = FiniteRankOperator::new(g, vec![1.0, 1.0], waves(g, &[4, -16])).unwrap();
        let total: f64 = dyadic.conjugated_densities(&b).unwrap().iter().map(Density::integral).sum();
        assert_relative_eq!(total, dyadic.trace(), max_relative = 1e-12);
    }

    #[test]
    fn kinetic_traces() {
        let g = grid1();
        let constant = g.sample(|_| Complex64::new(1.0 / g.volume().sqrt(), 0.0));
        let op = FiniteRankOperator::new(g, vec![1.0], vec![constant]).unwrap();
        assert!(op.kinetic_trace(1.0).unwrap().abs() < 1e-20);
        let wave = FiniteRankOperator::new(g, vec![1.0], waves(g, &[7])).unwrap();
        assert_relative_eq!(wave.kinetic_trace(1.0).unwrap(), 49.0, max_relative = 1e-12);
        assert!(wave.kinetic_trace(-1.0).is_err());

        let g2 = TorusGrid::new(2, 5.0, 32).unwrap();
        let mu = 40.0;
        let sea = fermi_sea(g2, mu).unwrap();
        let unit_sq = g2.frequency_unit().powi(2);
        let mut oracle = 0.0;
        for m0 in -16i64..16 {
            for m1 in -16i64..16 {
                let xi_sq = (m0 * m0 + m1 * m1) as f64 * unit_sq;
                if xi_sq <= mu {
                    oracle += xi_sq;
                }
            }
        }
        assert_relative_eq!(sea.kinetic_trace(1.0).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn fermi_sea_examples() {
        let g = grid1();
        let tiny = fermi_sea(g, 1e-9).unwrap();
        assert_eq!(tiny.rank(), 1);
        for v in tiny.density().values() {
            assert_relative_eq!(*v, 1.0 / g.box_length(), max_relative = 1e-12);
        }
        let three = fermi_sea(g, g.frequency_unit().powi(2) * 1.1).unwrap();
        assert_eq!(three.rank(), 3);
        for mu in [3.0, 50.0, 900.0] {
            let sea = fermi_sea(g, mu).unwrap();
            assert_eq!(sea.contract(), Contract::InUnitBall);
            assert_relative_eq!(sea.trace(), sea.rank() as f64, max_relative = 1e-12);
            assert_relative_eq!(sea.density().integral(), sea.rank() as f64, max_relative = 1e-12);
        }
        assert!(matches!(fermi_sea(g, 0.0), Err(LabError::EmptyOperator(_))));
        assert!(punctured_fermi_sea(g, 0.5).is_err());
        assert_eq!(punctured_fermi_sea(g, 4.0).unwrap().rank(), 4);
    }

    #[test]
    fn block_bound_examples_and_saturation() {
        let g = grid1();
        let sharp = DyadicBlockSet::sharp(g).unwrap();
        // Sharp block 3 on the integer lattice: 8 <= |m| < 16.
        assert_relative_eq!(diagonal_block_bound(&sharp, 3).unwrap(), 16.0 / g.box_length(), max_relative = 1e-14);

        let smooth = DyadicBlockSet::smooth(g).unwrap();
        let sea = fermi_sea(g, 40.0f64.powi(2)).unwrap();
        for j in 0..=4 {
            // supp ψ_j ⊂ |ξ| ≤ 2^{j+1} ≤ 32 < 40
            let bound = diagonal_block_bound(&smooth, j).unwrap();
            let rho = sea.conjugated_density(&smooth, j).unwrap();
            for v in rho.values() {
                assert_relative_eq!(*v, bound, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn block_bound_scales_like_volume() {
        for (dim, n) in [(1usize, 256usize), (2, 64), (3, 16)] {
            let g = TorusGrid::new(dim, 2.0 * PI, n).unwrap();
            let b = DyadicBlockSet::smooth(g).unwrap();
            let ball2 = [4.0, 4.0 * PI, 32.0 * PI / 3.0][dim - 1];
            let c = ball2 / (2.0 * PI).powi(dim as i32) * 2.0;
            for j in b.interior_indices() {
                assert!(diagonal_block_bound(&b, j).unwrap() <= c * 2f64.powi(j * dim as i32));
            }
        }
    }

    #[test]
    fn contract_validation() {
        let g = grid1();
        let sea = fermi_sea(g, 30.0).unwrap();
        assert!(sea.validate_contract(Contract::InUnitBall).unwrap().pass);

        let pair = FiniteRankOperator::new(g, vec![1.5, 0.5], waves(g, &[1, 2])).unwrap();
        let report = pair.validate_contract(Contract::InUnitBall).unwrap();
        assert!(!report.pass);
        assert_relative_eq!(report.margin, 0.5, max_relative = 1e-12);
        assert!(pair.clone().with_contract(Contract::InUnitBall).is_err());

        let skew = FiniteRankOperator::new(g, vec![1.0, 1.0], vec![waves(g, &[1])[0].clone(); 2]).unwrap();
        assert!(!skew.validate_contract(Contract::InUnitBall).unwrap().pass);

        let unit = g.frequency_unit();
        for m in [1i64, 2, 3] {
            let op = FiniteRankOperator::new(g, vec![1.0], waves(g, &[m])).unwrap();
            let report = op.validate_contract(Contract::PowerBounded { a: 1.0 }).unwrap();
            assert_relative_eq!(report.spectral_max, 1.0 / (m as f64 * unit).powi(2), max_relative = 1e-12);
            assert_eq!(report.pass, (m as f64 * unit).powi(2) >= 1.0);
        }
        let small_box = TorusGrid::new(1, 20.0, 64).unwrap();
        let slow = FiniteRankOperator::new(small_box, vec![1.0], vec![small_box.plane_wave(&[1]).unwrap()]).unwrap();
        assert!(!slow.validate_contract(Contract::PowerBounded { a: 1.0 }).unwrap().pass);

        for a in [1.0, -0.25] {
            assert!(matches!(
                sea.validate_contract(Contract::PowerBounded { a }),
                Err(LabError::ZeroModeSingularity(_))
            ));
        }
        let zero = sea.validate_contract(Contract::PowerBounded { a: 0.0 }).unwrap();
        assert!(zero.pass);
        assert_relative_eq!(zero.spectral_max, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn density_linearity() {
        let g = TorusGrid::new(2, 2.0 * PI, 32).unwrap();
        let a = fermi_sea(g, 5.0).unwrap();
        let b = FiniteRankOperator::new(g, vec![0.25], vec![g.plane_wave(&[4, -7]).unwrap()]).unwrap();
        let joint = a.concat(&b).unwrap().density();
        let separate = a.density().add(&b.density()).unwrap();
        for (x, y) in joint.values().iter().zip(separate.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sea.json");
        let g = TorusGrid::new(2, 3.0, 16).unwrap();
        let sea = fermi_sea(g, 20.0).unwrap().scaled(0.5).unwrap().with_contract(Contract::InUnitBall).unwrap();
        sea.save(&path).unwrap();
        assert!(dir.path().join("sea.bin").exists());
        let back = FiniteRankOperator::load(&path).unwrap();
        assert_eq!(back.eigenvalues(), sea.eigenvalues());
        assert_eq!(back.contract(), Contract::InUnitBall);
        for (u, v) in back.eigenfunctions().iter().zip(sea.eigenfunctions()) {
            assert_eq!(u, v);
        }
        let header: serde_json::Value = serde_json::from_reader(File::open(&path).unwrap()).unwrap();
        assert_eq!(header["rank"], sea.rank());
        assert_eq!(header["contract"]["kind"], "in-unit-ball");
        assert_eq!(
            std::fs::metadata(dir.path().join("sea.bin")).unwrap().len() as usize,
            sea.rank() * g.len() * 16
        );
    }
}

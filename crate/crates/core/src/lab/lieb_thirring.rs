//! Gagliardo-Nirenberg-Sobolev and Lieb-Thirring ratios, the dyadic
//! lower-bound chain behind the Lieb-Thirring proof, and the `(a, b)` family.

use serde::Serialize;

use super::Ratio;
use crate::error::{LabError, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::operator::{punctured_fermi_sea, Contract, FiniteRankOperator};
use crate::partition::{BlockFamily, DyadicBlockSet};
use crate::sum::compensated_sum;

/// Relative slack allowed in `T0 ≥ T1 ≥ T2`.
pub const CHAIN_TOLERANCE: f64 = 1e-10;

/// Kinetic terms below this multiple of their natural scale count as zero.
const DEGENERATE_KINETIC: f64 = 1e-20;

/// `‖u‖_{2+4/d} / (‖u‖₂^{2/(d+2)} ‖∇u‖₂^{d/(d+2)})`.
pub fn gns_check(u: &GridFunction) -> Result<Ratio> {
    let grid = u.grid();
    let d = grid.dim() as f64;
    let mass = u.lp_norm(2.0)?;
    let kinetic = u.kinetic_form(1.0)?;
    if mass == 0.0 || kinetic <= DEGENERATE_KINETIC * grid.frequency_unit().powi(2) * mass * mass {
        return Err(LabError::UndefinedRatio("constant function has no gradient".into()));
    }
    let rhs = mass.powf(2.0 / (d + 2.0)) * kinetic.powf(d / (2.0 * (d + 2.0)));
    Ratio::new(u.lp_norm(2.0 + 4.0 / d)?, rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LtOutcome {
    /// `tr(−Δ)γ / ∫ρ_γ^{1+2/d}`.
    pub ratio: Ratio,
    /// `Σ_k λ_k`.
    pub trace: f64,
    /// `(Σλ)^{2/d}·tr(−Δ)γ / ∫ρ^{1+2/d}`: the bound obtained from the
    /// triangle inequality and GNS applied to each eigenfunction.
    pub weak_ratio: f64,
}

fn require_contract(gamma: &FiniteRankOperator, contract: Contract) -> Result<()> {
    if gamma.contract() == contract {
        return Ok(());
    }
    let report = gamma.validate_contract(contract)?;
    if !report.pass {
        return Err(LabError::Contract(format!(
            "{contract:?}: gram residual {:.3e}, margin {:.3e}",
            report.gram_residual, report.margin
        )));
    }
    Ok(())
}

/// `tr(−Δ)^b γ / ∫ρ_γ^{1+2b/(d+2a)}`; shared by the plain and generalized checks.
fn power_ratio(gamma: &FiniteRankOperator, a: f64, b: f64) -> Result<Ratio> {
    let grid = gamma.grid();
    let d = grid.dim() as f64;
    let exponent = 1.0 + 2.0 * b / (d + 2.0 * a);
    let lhs = gamma.kinetic_trace(b)?;
    let scale = gamma.trace() * grid.frequency_unit().powf(2.0 * b);
    if lhs <= DEGENERATE_KINETIC * scale {
        return Err(LabError::UndefinedRatio("operator carries no kinetic energy".into()));
    }
    Ratio::new(lhs, gamma.density().power_integral(exponent))
}

/// Requires `0 ≤ γ ≤ 1`.
pub fn lieb_thirring_check(gamma: &FiniteRankOperator) -> Result<LtOutcome> {
    require_contract(gamma, Contract::InUnitBall)?;
    let ratio = power_ratio(gamma, 0.0, 1.0)?;
    let trace = compensated_sum(gamma.eigenvalues().iter().copied());
    let d = gamma.grid().dim() as f64;
    Ok(LtOutcome { ratio, trace, weak_ratio: trace.powf(2.0 / d) * ratio.ratio })
}

/// Requires `0 ≤ γ ≤ (−Δ)^a`, `a > −d/2`, `b ≥ 0`. For `a = 0, b = 1` the
/// ratio is bit-identical to [`lieb_thirring_check`].
pub fn generalized_lt_check(gamma: &FiniteRankOperator, a: f64, b: f64) -> Result<Ratio> {
    let d = gamma.grid().dim() as f64;
    if !(a > -d / 2.0 && a.is_finite()) {
        return Err(LabError::Domain(format!("power bound a = {a} must exceed −d/2 = {}", -d / 2.0)));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(LabError::Domain(format!("kinetic power b = {b} must be nonnegative")));
    }
    if !(a == 0.0 && gamma.contract() == Contract::InUnitBall) {
        require_contract(gamma, Contract::PowerBounded { a })?;
    }
    power_ratio(gamma, a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LtChain {
    /// `tr(−Δ)γ`.
    pub t0: f64,
    /// `Σ_j Σ_k λ_k ‖∇P_j u_k‖²`.
    pub t1: f64,
    /// `¼ Σ_{interior j} 4^j ∫ρ_{P_j γ P_j}`.
    pub t2: f64,
    pub pass: bool,
}

pub fn lt_chain_check(gamma: &FiniteRankOperator, blocks: &DyadicBlockSet) -> Result<LtChain> {
    if blocks.family() != BlockFamily::Smooth {
        return Err(LabError::UnsupportedFamily("sharp"));
    }
    if *blocks.grid() != *gamma.grid() {
        return Err(LabError::GridMismatch);
    }
    require_contract(gamma, Contract::InUnitBall)?;
    let grid = gamma.grid();
    let t0 = gamma.kinetic_trace(1.0)?;

    let norms = grid.frequency_norms();
    let weights: Vec<f64> = blocks.block_squared_sum().iter().zip(&norms).map(|(w, xi)| w * xi * xi).collect();
    let t1 = compensated_sum(gamma.eigenvalues().iter().zip(gamma.eigenfunctions()).map(|(l, u)| {
        let spectrum = u.forward_transform();
        let weighted = compensated_sum(spectrum.coefficients().iter().zip(&weights).map(|(c, w)| w * c.norm_sqr()));
        l * weighted / grid.volume()
    }));

    let densities = gamma.conjugated_densities(blocks)?;
    let interior = blocks.interior_indices();
    let t2 = 0.25
        * compensated_sum(
            blocks
                .indices()
                .zip(&densities)
                .filter(|(j, _)| interior.contains(j))
                .map(|(j, rho)| 4f64.powi(j) * rho.integral()),
        );
    let pass = t1 <= t0 * (1.0 + CHAIN_TOLERANCE) && t2 <= t1 * (1.0 + CHAIN_TOLERANCE);
    Ok(LtChain { t0, t1, t2, pass })
}

/// Fermi levels `μ = |m|²·(2π/L)²` of mean-zero seas whose ranks double
/// (`2, 4, 8, …`), each sea taken at the first shell reaching the target
/// rank. Only shells lying fully inside the lattice (`|m| ≤ N/2 − 1`) are
/// used; the largest such shell closes the sequence when it nearly doubles
/// the last rank. Ranks above `max_rank` are dropped.
pub fn doubling_fermi_levels(grid: &TorusGrid, max_rank: usize) -> Vec<(usize, f64)> {
    let radius = (grid.points_per_axis() / 2 - 1) as i64;
    let mut shells: Vec<i64> = (1..grid.len()).map(|idx| grid.lattice_norm_sq(idx)).filter(|&s| s <= radius * radius).collect();
    shells.sort_unstable();
    let mut cumulative: Vec<(i64, usize)> = Vec::new();
    for (count, s) in shells.iter().enumerate() {
        match cumulative.last_mut() {
            Some(last) if last.0 == *s => last.1 = count + 1,
            _ => cumulative.push((*s, count + 1)),
        }
    }
    let unit_sq = grid.frequency_unit().powi(2);
    let mut levels: Vec<(usize, f64)> = Vec::new();
    let mut target = 2usize;
    for &(s, count) in &cumulative {
        if count >= target {
            levels.push((count, s as f64 * unit_sq));
            while target <= count {
                target *= 2;
            }
        }
    }
    if let (Some(&(s, count)), Some(&(last, _))) = (cumulative.last(), levels.last()) {
        if count > last && 10 * count >= 19 * last {
            levels.push((count, s as f64 * unit_sq));
        }
    }
    levels.retain(|(rank, _)| *rank <= max_rank);
    levels
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeaPoint {
    pub rank: usize,
    pub mu: f64,
    pub lt: LtOutcome,
    pub chain: LtChain,
}

/// Lieb-Thirring ratio and dyadic chain along [`doubling_fermi_levels`].
pub fn fermi_sea_sweep(blocks: &DyadicBlockSet, max_rank: usize) -> Result<Vec<SeaPoint>> {
    doubling_fermi_levels(blocks.grid(), max_rank)
        .into_iter()
        .map(|(rank, mu)| {
            let sea = punctured_fermi_sea(*blocks.grid(), mu)?;
            Ok(SeaPoint { rank, mu, lt: lieb_thirring_check(&sea)?, chain: lt_chain_check(&sea, blocks)? })
        })
        .collect()
}

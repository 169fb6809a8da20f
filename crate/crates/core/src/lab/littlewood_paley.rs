//! Scalar and density Littlewood-Paley ratios and the companion duality identity.

use num_complex::Complex64;
use serde::Serialize;

use super::Ratio;
use crate::error::{LabError, Result};
use crate::grid::GridFunction;
use crate::operator::{Density, FiniteRankOperator};
use crate::partition::DyadicBlockSet;
use crate::projectors::{project, project_companion, square_function};
use crate::sum::compensated_sum;

/// `‖(Σ_j |P_j u|²)^{1/2}‖_p / ‖u‖_p`, `1 < p < ∞`.
pub fn lp_function_check(u: &GridFunction, p: f64, blocks: &DyadicBlockSet) -> Result<Ratio> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(LabError::Domain(format!("scalar Littlewood-Paley needs 1 < p < ∞, got {p}")));
    }
    let rhs = u.lp_norm(p)?;
    if rhs == 0.0 {
        return Err(LabError::UndefinedRatio("zero function".into()));
    }
    Ratio::new(square_function(u, blocks)?.lp_norm(p)?, rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParsevalCheck {
    /// `(‖Su‖₂ / ‖u‖₂)²` from the grid pipeline.
    pub direct: f64,
    /// `Σ_ξ (Σ_j Ψ_j²) |û|² / Σ_ξ |û|²`.
    pub closed_form: f64,
    pub residual: f64,
}

pub fn parseval_cross_check(u: &GridFunction, blocks: &DyadicBlockSet) -> Result<ParsevalCheck> {
    let direct = lp_function_check(u, 2.0, blocks)?.ratio.powi(2);
    let weights = blocks.block_squared_sum();
    let spectrum = u.forward_transform();
    let power: Vec<f64> = spectrum.coefficients().iter().map(|c| c.norm_sqr()).collect();
    let closed_form = compensated_sum(weights.iter().zip(&power).map(|(w, e)| w * e)) / compensated_sum(power.iter().copied());
    Ok(ParsevalCheck { direct, closed_form, residual: (direct - closed_form).abs() })
}

/// `‖Σ_j ρ_{P_j γ P_j}‖_p / ‖ρ_γ‖_p`, `1/2 < p < ∞`.
pub fn lp_density_check(gamma: &FiniteRankOperator, p: f64, blocks: &DyadicBlockSet) -> Result<Ratio> {
    if !(p > 0.5 && p.is_finite()) {
        return Err(LabError::Domain(format!("density Littlewood-Paley needs 1/2 < p < ∞, got {p}")));
    }
    let rhs = gamma.density().lp_norm(p)?;
    if rhs == 0.0 {
        return Err(LabError::UndefinedRatio("zero density".into()));
    }
    let localized = Density::sum(&gamma.conjugated_densities(blocks)?)?;
    Ratio::new(localized.lp_norm(p)?, rhs)
}

/// `|∫ f ḡ − Σ_j ∫ P_j f · conj(P̃_j g)| / (‖f‖₂ ‖g‖₂)`; absolute when a norm vanishes.
pub fn duality_identity_check(f: &GridFunction, g: &GridFunction, blocks: &DyadicBlockSet) -> Result<f64> {
    if !blocks.has_companions() {
        return Err(LabError::Config("duality identity needs companion blocks".into()));
    }
    let whole = g.inner(f)?;
    let mut re = Vec::with_capacity(blocks.len());
    let mut im = Vec::with_capacity(blocks.len());
    for j in blocks.indices() {
        let z = project_companion(g, blocks, j)?.inner(&project(f, blocks, j)?)?;
        re.push(z.re);
        im.push(z.im);
    }
    let split = Complex64::new(compensated_sum(re), compensated_sum(im));
    let scale = f.lp_norm(2.0)? * g.lp_norm(2.0)?;
    let gap = (whole - split).norm();
    Ok(if scale > 0.0 { gap / scale } else { gap })
}

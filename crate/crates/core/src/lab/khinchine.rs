//! Classical and tensor Khinchine averages over Rademacher signs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::SignEnsemble;
use crate::corpus::{derive_seed, seeded_rng};
use crate::error::{LabError, Result};
use crate::sum::{compensated_sum, NeumaierSum};

/// Sign vectors per parallel work unit; fixed so sums never depend on threads.
const CHUNK: u64 = 4096;

/// Cancellation threshold `E ≤ 1e−12·(Σ|a|²)^{p/2}` for the tensor average.
pub const DEGENERATE_RELATIVE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KhinchineOutcome {
    /// `E|Σ a_j r_j|^p`.
    pub expectation: f64,
    /// `(Σ|a_j|²)^{p/2}`.
    pub l2_power: f64,
    /// `E / ℓ`; bounded below by `1/C`.
    pub lower_ratio: f64,
    /// `ℓ / E`; bounded below by `1/C`.
    pub upper_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TensorKhinchineOutcome {
    /// `E|Σ_{j,k} a_jk r_j r_k|^p` with one shared sign sequence.
    pub expectation: f64,
    pub l2_power: f64,
    /// `ℓ / E`; `None` for degenerate cancellation.
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

/// `E f(r)` over `n` uniform signs, `r_i ∈ {−1, 1}` as `f64`.
fn sign_expectation<F>(n: usize, ensemble: SignEnsemble, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    ensemble.validate(n)?;
    let (total, units, average_over) = match ensemble {
        SignEnsemble::ExactEnumeration => (1u64 << n, (1u64 << n).div_ceil(CHUNK), (1u64 << n) as f64),
        SignEnsemble::MonteCarlo { samples, .. } => {
            (samples as u64, (samples as u64).div_ceil(CHUNK), samples as f64)
        }
    };
    let partials: Vec<f64> = (0..units)
        .into_par_iter()
        .map(|unit| {
            let first = unit * CHUNK;
            let last = (first + CHUNK).min(total);
            let mut signs = vec![1.0; n];
            let mut acc = NeumaierSum::new();
            match ensemble {
                SignEnsemble::ExactEnumeration => {
                    for mask in first..last {
                        for (i, s) in signs.iter_mut().enumerate() {
                            *s = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                        }
                        acc.add(f(&signs));
                    }
                }
                SignEnsemble::MonteCarlo { seed, .. } => {
                    let mut rng = seeded_rng(derive_seed(seed, unit));
                    for _ in first..last {
                        for s in signs.iter_mut() {
                            *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        }
                        acc.add(f(&signs));
                    }
                }
            }
            acc.value()
        })
        .collect();
    Ok(compensated_sum(partials) / average_over)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::Domain(format!("Khinchine exponent p = {p} must be ≥ 1")));
    }
    Ok(())
}

pub fn khinchine_ratio(a: &[Complex64], p: f64, ensemble: SignEnsemble) -> Result<KhinchineOutcome> {
    check_exponent(p)?;
    let expectation = sign_expectation(a.len(), ensemble, |r| {
        a.iter().zip(r).map(|(x, s)| x * s).sum::<Complex64>().norm_sqr().powf(p / 2.0)
    })?;
    let l2_power = compensated_sum(a.iter().map(|x| x.norm_sqr())).powf(p / 2.0);
    if l2_power == 0.0 {
        return Err(LabError::UndefinedRatio("zero coefficient vector".into()));
    }
    Ok(KhinchineOutcome { expectation, l2_power, lower_ratio: expectation / l2_power, upper_ratio: l2_power / expectation })
}

/// Rows and columns share the sign sequence `r_0, …, r_{max(n,m)−1}`.
pub fn khinchine_tensor_ratio(a: &DMatrix<Complex64>, p: f64, ensemble: SignEnsemble) -> Result<TensorKhinchineOutcome> {
    check_exponent(p)?;
    let n = a.nrows().max(a.ncols());
    let expectation = sign_expectation(n, ensemble, |r| {
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..a.nrows() {
            let row: Complex64 = (0..a.ncols()).map(|k| a[(j, k)] * r[k]).sum();
            total += row * r[j];
        }
        total.norm_sqr().powf(p / 2.0)
    })?;
    let l2_power = compensated_sum(a.iter().map(|x| x.norm_sqr())).powf(p / 2.0);
    if l2_power == 0.0 {
        return Err(LabError::UndefinedRatio("zero coefficient matrix".into()));
    }
    let degenerate = expectation <= DEGENERATE_RELATIVE * l2_power;
    Ok(TensorKhinchineOutcome { expectation, l2_power, ratio: (!degenerate).then(|| l2_power / expectation), degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::seeded_rng;
    use rand_distr::StandardNormal;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn single_term() {
        for p in [1.0, 1.5, 3.0] {
            let out = khinchine_ratio(&[c(1.0)], p, SignEnsemble::ExactEnumeration).unwrap();
            assert_eq!((out.expectation, out.l2_power, out.lower_ratio, out.upper_ratio), (1.0, 1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn two_terms() {
        let out = khinchine_ratio(&[c(1.0), c(1.0)], 2.0, SignEnsemble::ExactEnumeration).unwrap();
        assert!((out.expectation - 2.0).abs() < 1e-15 && (out.lower_ratio - 1.0).abs() < 1e-15);
        let out = khinchine_ratio(&[c(1.0), c(1.0)], 1.0, SignEnsemble::ExactEnumeration).unwrap();
        assert!((out.expectation - 1.0).abs() < 1e-15);
        assert!((out.lower_ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn p_two_is_orthogonality() {
        let mut rng = seeded_rng(1);
        let a: Vec<Complex64> =
            (0..10).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let out = khinchine_ratio(&a, 2.0, SignEnsemble::ExactEnumeration).unwrap();
        assert!((out.lower_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap() {
        let a = vec![c(1.0); 21];
        assert!(matches!(khinchine_ratio(&a, 1.0, SignEnsemble::ExactEnumeration), Err(LabError::EnumerationTooLarge(21))));
        assert!(khinchine_ratio(&a, 1.0, SignEnsemble::MonteCarlo { samples: 0, seed: 1 }).is_err());
        assert!(khinchine_ratio(&a, 0.5, SignEnsemble::MonteCarlo { samples: 10, seed: 1 }).is_err());
        assert!(matches!(khinchine_ratio(&[c(0.0)], 1.0, SignEnsemble::ExactEnumeration), Err(LabError::UndefinedRatio(_))));
    }

    #[test]
    fn monte_carlo_approaches_exact() {
        let a: Vec<Complex64> = (1..=12).map(|k| c(1.0 / k as f64)).collect();
        let exact = khinchine_ratio(&a, 3.0, SignEnsemble::ExactEnumeration).unwrap();
        let mc = khinchine_ratio(&a, 3.0, SignEnsemble::MonteCarlo { samples: 200_000, seed: 4 }).unwrap();
        assert!((mc.expectation / exact.expectation - 1.0).abs() < 0.02);
    }

    #[test]
    fn tensor_special_cases() {
        let diag = DMatrix::from_row_slice(1, 1, &[c(1.0)]);
        let out = khinchine_tensor_ratio(&diag, 1.5, SignEnsemble::ExactEnumeration).unwrap();
        assert_eq!(out.ratio, Some(1.0));
        let anti = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.0)]);
        let out = khinchine_tensor_ratio(&anti, 2.0, SignEnsemble::ExactEnumeration).unwrap();
        assert!(out.degenerate && out.ratio.is_none());
        assert_eq!(out.expectation, 0.0);
        assert!((out.l2_power - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tensor_matches_explicit_enumeration() {
        let a = DMatrix::from_row_slice(3, 3, &[c(0.3), c(-1.2), c(0.5), c(-1.2), c(0.8), c(2.0), c(0.5), c(2.0), c(-0.1)]);
        let mut total = 0.0;
        for r0 in [-1.0, 1.0] {
            for r1 in [-1.0, 1.0] {
                for r2 in [-1.0, 1.0] {
                    let r = [r0, r1, r2];
                    let mut s = 0.0;
                    for j in 0..3 {
                        for k in 0..3 {
                            s += a[(j, k)].re * r[j] * r[k];
                        }
                    }
                    total += s.abs();
                }
            }
        }
        let out = khinchine_tensor_ratio(&a, 1.0, SignEnsemble::ExactEnumeration).unwrap();
        assert!((out.expectation - total / 8.0).abs() < 1e-12);
    }

    #[test]
    fn rectangular_tensor_uses_shared_signs() {
        // a_{0,1} r_0 r_1 with a 1×2 index set: |r_0 r_1| = 1.
        let a = DMatrix::from_row_slice(1, 2, &[c(0.0), c(2.0)]);
        let out = khinchine_tensor_ratio(&a, 1.0, SignEnsemble::ExactEnumeration).unwrap();
        assert!((out.expectation - 2.0).abs() < 1e-15);
    }
}

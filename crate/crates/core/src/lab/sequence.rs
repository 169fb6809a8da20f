//! The dyadic sequence lemma: if `0 ≤ α_j ≤ 2^{jd}` then
//! `(Σ α_j)^{1+2/d} ≲ Σ 2^{2j} α_j`, with an explicit constant obtained by
//! splitting the sum at a scale `J` and optimizing over `J`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sum::compensated_sum;

/// Finite sequence `α_j` for `j = start, start+1, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSequence {
    pub start: i32,
    pub values: Vec<f64>,
}

impl DyadicSequence {
    pub fn new(start: i32, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn indexed(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &a)| (self.start + i as i32, a))
    }

    /// Every entry at its cap `2^{jd}`.
    pub fn saturated(dim: usize, start: i32, end: i32) -> Self {
        Self::new(start, (start..=end).map(|j| cap(dim, j)).collect())
    }

    /// Single spike `α_spike = 2^{spike·d}`, zero elsewhere.
    pub fn single_spike(dim: usize, start: i32, end: i32, spike: i32) -> Self {
        Self::new(start, (start..=end).map(|j| if j == spike { cap(dim, j) } else { 0.0 }).collect())
    }
}

fn cap(dim: usize, j: i32) -> f64 {
    2f64.powi(j * dim as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SequenceLemmaBound {
    /// `(Σ α_j)^{1+2/d}`.
    pub lhs: f64,
    /// `Σ 2^{2j} α_j`.
    pub rhs: f64,
    /// Minimizer of `A·2^{dJ} + 2^{−2J}·rhs`; `None` when `rhs = 0`.
    pub j_star: Option<i32>,
    /// Optimized split bound raised to `1+2/d`, divided by `rhs`.
    pub constant: f64,
    /// `(A + 4)^{1+2/d}`, valid for every admissible sequence.
    pub uniform_constant: f64,
    pub pass: bool,
}

impl SequenceLemmaBound {
    pub fn ratio(&self) -> Option<f64> {
        (self.rhs > 0.0).then(|| self.lhs / self.rhs)
    }
}

/// Geometric-sum constant `A = 1/(1 − 2^{−d})` in `Σ_{j≤J} 2^{jd} = A·2^{dJ}`.
pub fn geometric_constant(dim: usize) -> f64 {
    1.0 / (1.0 - 2f64.powi(-(dim as i32)))
}

/// Constant valid for all admissible sequences: choosing `2^J ≤ rhs^{1/(d+2)} < 2^{J+1}`
/// makes both halves of the split at most `A·rhs^{d/(d+2)}` and `4·rhs^{d/(d+2)}`.
pub fn uniform_constant(dim: usize) -> f64 {
    (geometric_constant(dim) + 4.0).powf(1.0 + 2.0 / dim as f64)
}

pub fn sequence_lemma_bound(alpha: &DyadicSequence, dim: usize) -> Result<SequenceLemmaBound> {
    if !(1..=3).contains(&dim) {
        return Err(LabError::Domain(format!("dimension {dim} not in 1..=3")));
    }
    for (j, a) in alpha.indexed() {
        if !(a >= 0.0 && a <= cap(dim, j) * (1.0 + 1e-12)) {
            return Err(LabError::Precondition(format!("α_{j} = {a} violates 0 ≤ α_j ≤ 2^(jd)")));
        }
    }
    let exponent = 1.0 + 2.0 / dim as f64;
    let total = compensated_sum(alpha.values.iter().copied());
    let lhs = total.powf(exponent);
    let rhs = compensated_sum(alpha.indexed().map(|(j, a)| 4f64.powi(j) * a));
    let uniform = uniform_constant(dim);
    if rhs == 0.0 {
        return Ok(SequenceLemmaBound { lhs, rhs, j_star: None, constant: 0.0, uniform_constant: uniform, pass: lhs == 0.0 });
    }

    let a = geometric_constant(dim);
    let split = |j: i32| a * cap(dim, j) + 4f64.powi(-j) * rhs;
    // Continuous minimizer of A x^d + rhs x^{-2} at x^{d+2} = 2 rhs / (d A).
    let centre = ((2.0 * rhs / (dim as f64 * a)).log2() / (dim as f64 + 2.0)).round() as i32;
    let (j_star, best) = ((centre - 4)..=(centre + 4))
        .map(|j| (j, split(j)))
        .fold((centre, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc });
    let constant = best.powf(exponent) / rhs;
    let pass = lhs <= constant * rhs * (1.0 + 1e-12) && constant <= uniform * (1.0 + 1e-12);
    Ok(SequenceLemmaBound { lhs, rhs, j_star: Some(j_star), constant, uniform_constant: uniform, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_is_sharp() {
        for dim in 1..=3 {
            for spike in -5..=6 {
                let seq = DyadicSequence::single_spike(dim, -10, 10, spike);
                let out = sequence_lemma_bound(&seq, dim).unwrap();
                assert!(out.pass);
                assert!((out.ratio().unwrap() - 1.0).abs() <= 1e-12, "d={dim} J={spike}: {out:?}");
            }
        }
    }

    #[test]
    fn zero_sequence() {
        let out = sequence_lemma_bound(&DyadicSequence::new(-3, vec![0.0; 7]), 2).unwrap();
        assert_eq!((out.lhs, out.rhs, out.j_star), (0.0, 0.0, None));
        assert!(out.pass);
    }

    #[test]
    fn rejects_inadmissible() {
        let seq = DyadicSequence::new(0, vec![1.0, 2.5]);
        assert!(matches!(sequence_lemma_bound(&seq, 1), Err(LabError::Precondition(_))));
        let neg = DyadicSequence::new(0, vec![-0.1]);
        assert!(sequence_lemma_bound(&neg, 1).is_err());
    }

    #[test]
    fn saturated_sequences_obey_uniform_constant() {
        for dim in 1..=3 {
            let out = sequence_lemma_bound(&DyadicSequence::saturated(dim, -10, 10), dim).unwrap();
            assert!(out.pass);
            assert!(out.lhs <= out.uniform_constant * out.rhs);
        }
    }

    #[test]
    fn j_star_is_global_minimizer() {
        let seq = DyadicSequence::saturated(2, -4, 6);
        let out = sequence_lemma_bound(&seq, 2).unwrap();
        let a = geometric_constant(2);
        let split = |j: i32| a * 4f64.powi(j) + 4f64.powi(-j) * out.rhs;
        let brute = (-40..=40).map(split).fold(f64::INFINITY, f64::min);
        assert_eq!(split(out.j_star.unwrap()), brute);
    }
}

//! Numerical checkers for the inequalities around the Littlewood-Paley
//! theory of operator densities, plus empirical constant envelopes.

pub mod envelope;
pub mod khinchine;
pub mod lieb_thirring;
pub mod littlewood_paley;
pub mod sequence;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use envelope::{estimate_envelope, Check, Envelope, EnvelopeTable, Inequality, RatioReport, RatioSample};
pub use khinchine::{khinchine_ratio, khinchine_tensor_ratio, KhinchineOutcome, TensorKhinchineOutcome};
pub use lieb_thirring::{
    doubling_fermi_levels, fermi_sea_sweep, generalized_lt_check, gns_check, lieb_thirring_check, lt_chain_check, LtChain,
    LtOutcome, SeaPoint,
};
pub use littlewood_paley::{duality_identity_check, lp_density_check, lp_function_check, parseval_cross_check};
pub use sequence::{sequence_lemma_bound, DyadicSequence, SequenceLemmaBound};

/// Largest sign count for exhaustive enumeration.
pub const MAX_EXACT_SIGNS: usize = 20;

/// How `E` over independent uniform signs is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SignEnsemble {
    /// All `2^n` sign vectors, `n ≤ 20`.
    ExactEnumeration,
    MonteCarlo { samples: usize, seed: u64 },
}

impl SignEnsemble {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Self::ExactEnumeration if n > MAX_EXACT_SIGNS => Err(LabError::EnumerationTooLarge(n)),
            Self::MonteCarlo { samples: 0, .. } => Err(LabError::Config("Monte Carlo needs at least one sample".into())),
            _ => Ok(()),
        }
    }
}

/// One evaluated inequality instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl Ratio {
    pub fn new(lhs: f64, rhs: f64) -> Result<Self> {
        if !(rhs > 0.0 && rhs.is_finite() && lhs.is_finite()) {
            return Err(LabError::UndefinedRatio(format!("lhs {lhs}, rhs {rhs}")));
        }
        Ok(Self { lhs, rhs, ratio: lhs / rhs })
    }
}

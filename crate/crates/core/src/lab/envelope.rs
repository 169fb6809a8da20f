//! Ratio reports over seeded corpora and the frozen envelope table.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lieb_thirring::{generalized_lt_check, gns_check, lieb_thirring_check};
use super::littlewood_paley::{lp_density_check, lp_function_check};
use super::Ratio;
use crate::corpus::CorpusSpec;
use crate::error::{LabError, Result};
use crate::partition::{BlockFamily, DyadicBlockSet, GlueKind};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const DEFAULT_ENVELOPES: &str = include_str!("../../config/envelopes.json");

/// Exponents closer than this are treated as equal when looking up envelopes.
const EXPONENT_MATCH: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    ScalarLp,
    DensityLp,
    Gns,
    LiebThirring,
    LiebThirringWeak,
    GeneralizedLt,
    KhinchineLower,
    KhinchineUpper,
    KhinchineTensor,
    SequenceLemma,
}

impl Inequality {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ScalarLp => "scalar-lp",
            Self::DensityLp => "density-lp",
            Self::Gns => "gns",
            Self::LiebThirring => "lieb-thirring",
            Self::LiebThirringWeak => "lieb-thirring-weak",
            Self::GeneralizedLt => "generalized-lt",
            Self::KhinchineLower => "khinchine-lower",
            Self::KhinchineUpper => "khinchine-upper",
            Self::KhinchineTensor => "khinchine-tensor",
            Self::SequenceLemma => "sequence-lemma",
        }
    }
}

/// Corpus-driven checks run by [`estimate_envelope`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Check {
    ScalarLp,
    DensityLp,
    Gns,
    LiebThirring,
    LiebThirringWeak,
    GeneralizedLt { a: f64, b: f64 },
}

impl Check {
    pub fn inequality(&self) -> Inequality {
        match self {
            Self::ScalarLp => Inequality::ScalarLp,
            Self::DensityLp => Inequality::DensityLp,
            Self::Gns => Inequality::Gns,
            Self::LiebThirring => Inequality::LiebThirring,
            Self::LiebThirringWeak => Inequality::LiebThirringWeak,
            Self::GeneralizedLt { .. } => Inequality::GeneralizedLt,
        }
    }

    /// Exponents evaluated: the requested list for the LP checks, the
    /// natural exponent of the inequality otherwise.
    fn exponents(&self, dim: usize, requested: &[f64]) -> Vec<f64> {
        let d = dim as f64;
        match *self {
            Self::ScalarLp | Self::DensityLp => requested.to_vec(),
            Self::Gns => vec![2.0 + 4.0 / d],
            Self::LiebThirring | Self::LiebThirringWeak => vec![1.0 + 2.0 / d],
            Self::GeneralizedLt { a, b } => vec![1.0 + 2.0 * b / (d + 2.0 * a)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dim: usize,
    pub box_length: f64,
    pub points_per_axis: usize,
    pub family: BlockFamily,
    pub profile: GlueKind,
}

impl GridConfig {
    pub fn of(blocks: &DyadicBlockSet) -> Self {
        let g = blocks.grid();
        Self {
            dim: g.dim(),
            box_length: g.box_length(),
            points_per_axis: g.points_per_axis(),
            family: blocks.family(),
            profile: blocks.profile().kind(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub corpus: Option<CorpusSpec>,
    /// Scalar settings specific to the check (`a`, `b`, array sizes, ...).
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub sample_id: usize,
    pub rank: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl RatioSample {
    pub fn new(sample_id: usize, rank: usize, r: Ratio) -> Self {
        Self { sample_id, rank, lhs: r.lhs, rhs: r.rhs, ratio: r.ratio }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub sample_id: usize,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Aggregates {
    pub fn of(ratios: &[f64]) -> Option<Self> {
        if ratios.is_empty() {
            return None;
        }
        let mut sorted = ratios.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        Some(Self {
            min: sorted[0],
            max: sorted[n - 1],
            mean: crate::sum::compensated_sum(ratios.iter().copied()) / n as f64,
            median,
        })
    }
}

/// Accepted ratio range; a missing side is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Envelope {
    pub fn contains(&self, ratio: f64) -> bool {
        self.lower.is_none_or(|lo| ratio >= lo) && self.upper.is_none_or(|hi| ratio <= hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub schema_version: u32,
    pub name: Inequality,
    pub p: f64,
    pub config: ReportConfig,
    pub seed: u64,
    pub sample_count: usize,
    pub samples: Vec<RatioSample>,
    pub aggregates: Option<Aggregates>,
    pub envelope: Option<Envelope>,
    pub excluded: Vec<Excluded>,
    pub pass: bool,
}

impl RatioReport {
    /// Passes when every ratio is finite, positive and inside `envelope`.
    pub fn from_samples(
        name: Inequality,
        p: f64,
        config: ReportConfig,
        seed: u64,
        samples: Vec<RatioSample>,
        excluded: Vec<Excluded>,
        envelope: Option<Envelope>,
    ) -> Self {
        let ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
        let sane = ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        let inside = envelope.is_none_or(|e| ratios.iter().all(|r| e.contains(*r)));
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            name,
            p,
            config,
            seed,
            sample_count: samples.len() + excluded.len(),
            aggregates: Aggregates::of(&ratios),
            samples,
            envelope,
            excluded,
            pass: sane && inside,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ratio).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEntry {
    pub inequality: Inequality,
    /// `None` matches every dimension.
    #[serde(default)]
    pub dim: Option<usize>,
    /// `None` matches every exponent.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTable {
    pub schema_version: u32,
    pub entries: Vec<EnvelopeEntry>,
}

impl Default for EnvelopeTable {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_ENVELOPES).expect("bundled envelope table parses")
    }
}

impl EnvelopeTable {
    pub fn empty() -> Self {
        Self { schema_version: REPORT_SCHEMA_VERSION, entries: Vec::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// First entry matching `(inequality, dim, p)`.
    pub fn lookup(&self, inequality: Inequality, dim: usize, p: f64) -> Option<Envelope> {
        self.entries
            .iter()
            .find(|e| e.inequality == inequality && e.dim.is_none_or(|d| d == dim) && e.p.is_none_or(|q| (q - p).abs() <= EXPONENT_MATCH))
            .map(|e| Envelope { lower: e.lower, upper: e.upper })
    }
}

/// Runs `check` over every corpus member, one report per exponent.
/// Members are generated and evaluated in parallel; samples are kept in
/// member order, so the result does not depend on the worker count.
/// Members whose ratio is undefined are listed under `excluded`.
pub fn estimate_envelope(
    blocks: &DyadicBlockSet,
    corpus: &CorpusSpec,
    check: Check,
    exponents: &[f64],
    envelopes: &EnvelopeTable,
) -> Result<Vec<RatioReport>> {
    corpus.validate()?;
    let grid = *blocks.grid();
    let ps = check.exponents(grid.dim(), exponents);
    if ps.is_empty() {
        return Err(LabError::Config("no exponents requested".into()));
    }

    type Row = Vec<std::result::Result<Ratio, String>>;
    let rows: Vec<(usize, Row)> = (0..corpus.samples)
        .into_par_iter()
        .map(|i| -> Result<(usize, Row)> {
            let member = corpus.member(&grid, i)?;
            let rank = member.rank();
            let mut row = Vec::with_capacity(ps.len());
            match check {
                Check::ScalarLp | Check::Gns => {
                    let u = member.into_function()?;
                    for &p in &ps {
                        let r = if check == Check::Gns { gns_check(&u) } else { lp_function_check(&u, p, blocks) };
                        row.push(r);
                    }
                }
                _ => {
                    let gamma = member.into_operator()?;
                    for &p in &ps {
                        row.push(match check {
                            Check::DensityLp => lp_density_check(&gamma, p, blocks),
                            Check::LiebThirring => lieb_thirring_check(&gamma).map(|o| o.ratio),
                            Check::LiebThirringWeak => lieb_thirring_check(&gamma)
                                .and_then(|o| Ratio::new(o.trace.powf(2.0 / grid.dim() as f64) * o.ratio.lhs, o.ratio.rhs)),
                            Check::GeneralizedLt { a, b } => generalized_lt_check(&gamma, a, b),
                            Check::ScalarLp | Check::Gns => unreachable!(),
                        });
                    }
                }
            }
            let row = row
                .into_iter()
                .map(|r| match r {
                    Ok(v) => Ok(Ok(v)),
                    Err(LabError::UndefinedRatio(msg)) => Ok(Err(msg)),
                    Err(e) => Err(e),
                })
                .collect::<Result<Row>>()?;
            Ok((rank, row))
        })
        .collect::<Result<_>>()?;

    let mut parameters = BTreeMap::new();
    if let Check::GeneralizedLt { a, b } = check {
        parameters.insert("a".to_string(), a);
        parameters.insert("b".to_string(), b);
    }
    let config = ReportConfig { grid: Some(GridConfig::of(blocks)), corpus: Some(corpus.clone()), parameters };

    Ok(ps
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let mut samples = Vec::new();
            let mut excluded = Vec::new();
            for (i, (rank, row)) in rows.iter().enumerate() {
                match &row[k] {
                    Ok(r) => samples.push(RatioSample::new(i, *rank, *r)),
                    Err(reason) => excluded.push(Excluded { sample_id: i, reason: reason.clone() }),
                }
            }
            let envelope = envelopes.lookup(check.inequality(), grid.dim(), p);
            RatioReport::from_samples(check.inequality(), p, config.clone(), corpus.seed, samples, excluded, envelope)
        })
        .collect())
}

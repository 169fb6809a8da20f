use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use lplab::corpus::CorpusSpec;
use lplab::{BlockFamily, GlueKind, LabError, Result};

/// Littlewood-Paley and Lieb-Thirring inequality lab on the discrete torus.
///
/// Exit status: 0 when every envelope and invariant passes, 1 when one
/// fails (the report is still written), 2 on usage or configuration errors.
#[derive(Debug, Parser)]
#[command(name = "lplab", version)]
pub struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "LPLAB_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Block tables (CSV) and partition-of-unity residuals (JSON).
    Partition(Common),
    /// Scalar Littlewood-Paley envelope over a random band-limited corpus.
    Lp(Common),
    /// Density Littlewood-Paley envelope over random orthonormal frames.
    LpDensity(Common),
    /// Classical and tensor Khinchine ratios over random coefficient arrays.
    Khinchine(KhinchineArgs),
    /// Gagliardo-Nirenberg-Sobolev envelope over mean-zero functions.
    Gns(Common),
    /// Lieb-Thirring envelope, the weaker triangle-inequality bound, the
    /// dyadic chain and a Fermi-sea sweep.
    LiebThirring(LiebThirringArgs),
    /// Generalized `tr(−Δ)^b γ ≳ ∫ρ^{1+2b/(d+2a)}` over `0 ≤ γ ≤ (−Δ)^a`.
    Glt(GltArgs),
    /// Dyadic sequence lemma over random admissible sequences.
    Seqlemma(SeqlemmaArgs),
    /// Every check with its defaults.
    All(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Spatial dimension (1, 2 or 3).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Grid points per axis (even); default 256, 64, 16 for d = 1, 2, 3.
    #[arg(long = "n")]
    pub points: Option<usize>,
    /// Box length L.
    #[arg(long = "box")]
    pub box_length: Option<f64>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Block family: smooth or sharp.
    #[arg(long)]
    pub family: Option<BlockFamily>,
    /// Bump profile: exp-rational or smoothstep.
    #[arg(long)]
    pub profile: Option<GlueKind>,
    /// Operator rank for frame corpora.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Corpus size.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-sample CSV path (block table for `partition`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Envelope table replacing the bundled one.
    #[arg(long)]
    pub envelopes: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct KhinchineArgs {
    #[command(flatten)]
    pub common: Common,
    /// Coefficients per array (≤ 20 for exact enumeration).
    #[arg(long)]
    pub terms: Option<usize>,
    /// Monte Carlo sign samples; exact enumeration when absent.
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct LiebThirringArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest Fermi-sea rank in the sweep.
    #[arg(long)]
    pub sea_max_rank: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GltArgs {
    #[command(flatten)]
    pub common: Common,
    /// Power bound exponent a > −d/2.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Kinetic power b ≥ 0.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SeqlemmaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Random admissible sequences.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Smallest index j.
    #[arg(long, allow_negative_numbers = true)]
    pub j_start: Option<i32>,
    /// Largest index j.
    #[arg(long, allow_negative_numbers = true)]
    pub j_end: Option<i32>,
}

/// Contents of a `--config` file; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dim: Option<usize>,
    pub n: Option<usize>,
    #[serde(rename = "box")]
    pub box_length: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub family: Option<BlockFamily>,
    pub profile: Option<GlueKind>,
    pub rank: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub corpus: Option<CorpusSpec>,
    pub envelopes: Option<PathBuf>,
    pub terms: Option<usize>,
    pub mc_samples: Option<usize>,
    pub sea_max_rank: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub trials: Option<usize>,
    pub j_start: Option<i32>,
    pub j_end: Option<i32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }
}

/// Flags merged over the config file and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub dim: usize,
    pub points: usize,
    pub box_length: f64,
    pub p: Option<Vec<f64>>,
    pub family: BlockFamily,
    pub profile: GlueKind,
    pub rank: Option<usize>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub corpus: Option<CorpusSpec>,
    pub envelopes: Option<PathBuf>,
    pub file: FileConfig,
}

pub fn default_points(dim: usize) -> usize {
    match dim {
        1 => 256,
        2 => 64,
        _ => 16,
    }
}

impl Settings {
    pub fn resolve(common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let dim = common.dim.or(file.dim).unwrap_or(1);
        if !(1..=3).contains(&dim) {
            return Err(LabError::Config(format!("dimension {dim} not in 1..=3")));
        }
        Ok(Self {
            dim,
            points: common.points.or(file.n).unwrap_or_else(|| default_points(dim)),
            box_length: common.box_length.or(file.box_length).unwrap_or(2.0 * PI),
            p: common.p.clone().or_else(|| file.p.clone()),
            family: common.family.or(file.family).unwrap_or(BlockFamily::Smooth),
            profile: common.profile.or(file.profile).unwrap_or(GlueKind::ExpRational),
            rank: common.rank.or(file.rank),
            samples: common.samples.or(file.samples),
            seed: common.seed.or(file.seed).unwrap_or(1),
            corpus: file.corpus.clone(),
            envelopes: common.envelopes.clone().or_else(|| file.envelopes.clone()),
            file,
        })
    }
}

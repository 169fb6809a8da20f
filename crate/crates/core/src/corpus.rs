//! Seeded test-function and operator generators.
//!
//! Every generator is a pure function of its parameters and a `u64` seed.
//! Corpus member `i` draws from a ChaCha20 stream keyed by
//! `derive_seed(master, i)`, so members can be produced in any order or in
//! parallel without changing a single bit.

use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};
use crate::grid::{GridFunction, SpectrumFunction, TorusGrid};
use crate::lab::sequence::DyadicSequence;
use crate::operator::{fermi_sea, punctured_fermi_sea, Contract, FiniteRankOperator};

/// Linear-independence threshold: a vector whose norm drops below this
/// fraction of its original norm during orthogonalization is rejected.
const DEPENDENCE_THRESHOLD: f64 = 1e-8;
const MAX_RETRIES: u64 = 5;

/// SplitMix64 finalizer applied to `master ⊕ golden·(index+1)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn band_limited_from<R: Rng + ?Sized>(grid: &TorusGrid, s: f64, zero_mean: bool, rng: &mut R) -> GridFunction {
    let amplitude = grid.volume().sqrt();
    let coefficients = grid
        .frequency_norms()
        .into_iter()
        .enumerate()
        .map(|(idx, xi)| {
            let z = complex_gaussian(rng);
            if zero_mean && idx == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                z * amplitude * (1.0 + xi).powf(-s)
            }
        })
        .collect();
    SpectrumFunction::new(*grid, coefficients).expect("one coefficient per slot").inverse_transform()
}

/// Fourier coefficients `L^{d/2} z_ξ (1+|ξ|)^{−s}` with `z_ξ` standard complex
/// Gaussians, so that `E‖u‖₂² = Σ_ξ (1+|ξ|)^{−2s}`.
pub fn random_band_limited(grid: &TorusGrid, s: f64, zero_mean: bool, seed: u64) -> GridFunction {
    band_limited_from(grid, s, zero_mean, &mut seeded_rng(seed))
}

/// L²-normalized periodized Gaussian of spatial width `width` centred at
/// `center`, modulated by the lattice frequency nearest to `momentum`.
pub fn wave_packet(grid: &TorusGrid, center: &[f64], momentum: &[f64], width: f64) -> Result<GridFunction> {
    let d = grid.dim();
    if !(width > 0.0 && width.is_finite()) {
        return Err(LabError::Domain(format!("packet width {width} must be positive")));
    }
    if center.len() != d || momentum.len() != d {
        return Err(LabError::Domain(format!("center and momentum need {d} components")));
    }
    let unit = grid.frequency_unit();
    let m0: Vec<f64> = momentum.iter().map(|k| (k / unit).round()).collect();
    let coefficients: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let m = grid.lattice_vector(idx);
            let mut offset_sq = 0.0;
            let mut phase = 0.0;
            for axis in 0..d {
                let xi = m[axis] as f64 * unit;
                offset_sq += (xi - m0[axis] * unit).powi(2);
                phase -= xi * center[axis];
            }
            Complex64::from_polar((-0.5 * width * width * offset_sq).exp(), phase)
        })
        .collect();
    let packet = SpectrumFunction::new(*grid, coefficients)?;
    let norm = packet.energy().sqrt();
    Ok(packet.inverse_transform().scaled(Complex64::new(1.0 / norm, 0.0)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenvalueMode {
    /// `λ_k` uniform in `[0, 1)`.
    #[default]
    Uniform,
    /// `λ_k = 1`.
    Ones,
}

impl FromStr for EigenvalueMode {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "ones" => Ok(Self::Ones),
            other => Err(LabError::Config(format!("unknown eigenvalue mode `{other}`"))),
        }
    }
}

/// Two-pass modified Gram–Schmidt on raw samples with weight `h^d`.
/// Returns `None` on numerical dependence.
fn orthonormalize(grid: &TorusGrid, mut vectors: Vec<Vec<Complex64>>) -> Option<Vec<Vec<Complex64>>> {
    let w = grid.cell_volume();
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * w
    };
    for k in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(k);
        let v = &mut rest[0];
        let original = inner(v, v).re.sqrt();
        for _ in 0..2 {
            for q in done.iter() {
                let c = inner(q, v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = inner(v, v).re.sqrt();
        if norm.is_nan() || norm <= DEPENDENCE_THRESHOLD * original {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Some(vectors)
}

/// `K` orthonormalized band-limited functions with eigenvalues per `mode`,
/// tagged with the unit-ball contract.
pub fn random_orthonormal_frame(
    grid: &TorusGrid,
    rank: usize,
    s: f64,
    mode: EigenvalueMode,
    zero_mean: bool,
    seed: u64,
) -> Result<FiniteRankOperator> {
    let available = grid.len() - usize::from(zero_mean);
    if rank == 0 || rank > available {
        return Err(LabError::Rank(format!("rank {rank} not in 1..={available}")));
    }
    for attempt in 0..=MAX_RETRIES {
        let mut rng = seeded_rng(if attempt == 0 { seed } else { derive_seed(seed, u64::MAX - attempt) });
        let raw: Vec<Vec<Complex64>> =
            (0..rank).map(|_| band_limited_from(grid, s, zero_mean, &mut rng).into_values()).collect();
        let eigenvalues: Vec<f64> = match mode {
            EigenvalueMode::Uniform => (0..rank).map(|_| rng.random::<f64>()).collect(),
            EigenvalueMode::Ones => vec![1.0; rank],
        };
        let Some(frame) = orthonormalize(grid, raw) else { continue };
        let eigenfunctions = frame.into_iter().map(|v| GridFunction::new(*grid, v)).collect::<Result<Vec<_>>>()?;
        return FiniteRankOperator::new(*grid, eigenvalues, eigenfunctions)?.with_contract(Contract::InUnitBall);
    }
    Err(LabError::Rank(format!("frame of rank {rank} stayed linearly dependent after {MAX_RETRIES} retries")))
}

/// Mean-zero random frame rescaled so that `0 ≤ γ ≤ (−Δ)^a` holds.
pub fn power_bounded_frame(grid: &TorusGrid, rank: usize, s: f64, a: f64, seed: u64) -> Result<FiniteRankOperator> {
    let frame = random_orthonormal_frame(grid, rank, s, EigenvalueMode::Uniform, true, seed)?;
    let contract = Contract::PowerBounded { a };
    let report = frame.validate_contract(contract)?;
    let frame = if report.spectral_max > 1.0 { frame.scaled((1.0 - 1e-12) / report.spectral_max)? } else { frame };
    frame.with_contract(contract)
}

/// Admissible sequences `α_j = m_j β_j 2^{jd}` with `β_j` uniform in `[0, 1]`
/// and a Bernoulli mask `m_j` of random density.
pub fn spike_sequences(dim: usize, start: i32, end: i32, count: usize, seed: u64) -> Result<Vec<DyadicSequence>> {
    if start > end {
        return Err(LabError::Config(format!("empty index range {start}..={end}")));
    }
    Ok((0..count as u64)
        .map(|i| {
            let mut rng = seeded_rng(derive_seed(seed, i));
            let density: f64 = rng.random_range(0.0..=1.0);
            let values = (start..=end)
                .map(|j| {
                    let keep = rng.random_bool(density);
                    let beta: f64 = rng.random_range(0.0..=1.0);
                    if keep { beta * 2f64.powi(j * dim as i32) } else { 0.0 }
                })
                .collect();
            DyadicSequence::new(start, values)
        })
        .collect())
}

fn default_growth() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    RandomBandLimited {
        s: f64,
        #[serde(default = "default_true")]
        zero_mean: bool,
    },
    /// Member centres are drawn uniformly in the box.
    WavePacket { momentum: Vec<f64>, width: f64 },
    /// Member `i` uses `μ·growth^i`.
    FermiSea {
        mu: f64,
        #[serde(default = "default_growth")]
        growth: f64,
        #[serde(default)]
        punctured: bool,
    },
    RandomOrthonormalFrame {
        rank: usize,
        s: f64,
        #[serde(default)]
        eigenvalues: EigenvalueMode,
        #[serde(default = "default_true")]
        zero_mean: bool,
    },
    /// Mean-zero frames rescaled into `0 ≤ γ ≤ (−Δ)^a`.
    PowerBoundedFrame { rank: usize, s: f64, a: f64 },
    SpikeSequence { j_start: i32, j_end: i32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    #[serde(flatten)]
    pub generator: Generator,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub enum CorpusMember {
    Function(GridFunction),
    Operator(FiniteRankOperator),
    Sequence(DyadicSequence),
}

impl CorpusMember {
    /// Functions become the rank-one projector onto `u/‖u‖`.
    pub fn into_operator(self) -> Result<FiniteRankOperator> {
        match self {
            Self::Operator(op) => Ok(op),
            Self::Function(u) => {
                let norm = u.lp_norm(2.0)?;
                if norm == 0.0 {
                    return Err(LabError::EmptyOperator("zero corpus function".into()));
                }
                let grid = *u.grid();
                FiniteRankOperator::new(grid, vec![1.0], vec![u.scaled(Complex64::new(1.0 / norm, 0.0))])?
                    .with_contract(Contract::InUnitBall)
            }
            Self::Sequence(_) => Err(LabError::Config("sequence corpora carry no operators".into())),
        }
    }

    pub fn into_function(self) -> Result<GridFunction> {
        match self {
            Self::Function(u) => Ok(u),
            Self::Operator(op) if op.rank() == 1 => Ok(op.eigenfunctions()[0].clone()),
            _ => Err(LabError::Config("corpus member is not a single function".into())),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Self::Function(_) => 1,
            Self::Operator(op) => op.rank(),
            Self::Sequence(_) => 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(LabError::Config("corpus needs at least one sample".into()));
        }
        let bad = |msg: String| Err(LabError::Config(msg));
        match &self.generator {
            Generator::RandomBandLimited { s, .. } | Generator::RandomOrthonormalFrame { s, .. } if !s.is_finite() => {
                bad(format!("decay exponent {s} is not finite"))
            }
            Generator::RandomOrthonormalFrame { rank: 0, .. } | Generator::PowerBoundedFrame { rank: 0, .. } => {
                bad("frame rank must be at least 1".into())
            }
            Generator::WavePacket { width, .. } if width.is_nan() || *width <= 0.0 => bad(format!("packet width {width} must be positive")),
            Generator::FermiSea { mu, growth, .. } if !(*mu > 0.0 && *growth >= 1.0) => {
                bad(format!("Fermi level {mu} must be positive and growth {growth} at least 1"))
            }
            Generator::SpikeSequence { j_start, j_end } if j_start > j_end => {
                bad(format!("empty index range {j_start}..={j_end}"))
            }
            _ => Ok(()),
        }
    }

    /// Member `index`, a pure function of `(self, grid, index)`.
    pub fn member(&self, grid: &TorusGrid, index: usize) -> Result<CorpusMember> {
        let seed = derive_seed(self.seed, index as u64);
        Ok(match &self.generator {
            Generator::RandomBandLimited { s, zero_mean } => {
                CorpusMember::Function(random_band_limited(grid, *s, *zero_mean, seed))
            }
            Generator::WavePacket { momentum, width } => {
                let mut rng = seeded_rng(seed);
                let center: Vec<f64> = (0..grid.dim()).map(|_| rng.random::<f64>() * grid.box_length()).collect();
                CorpusMember::Function(wave_packet(grid, &center, momentum, *width)?)
            }
            Generator::FermiSea { mu, growth, punctured } => {
                let level = mu * growth.powi(index as i32);
                CorpusMember::Operator(if *punctured { punctured_fermi_sea(*grid, level)? } else { fermi_sea(*grid, level)? })
            }
            Generator::RandomOrthonormalFrame { rank, s, eigenvalues, zero_mean } => {
                CorpusMember::Operator(random_orthonormal_frame(grid, *rank, *s, *eigenvalues, *zero_mean, seed)?)
            }
            Generator::PowerBoundedFrame { rank, s, a } => {
                CorpusMember::Operator(power_bounded_frame(grid, *rank, *s, *a, seed)?)
            }
            Generator::SpikeSequence { j_start, j_end } => {
                let mut batch = spike_sequences(grid.dim(), *j_start, *j_end, 1, seed)?;
                CorpusMember::Sequence(batch.remove(0))
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// `key = value` lines; `#` starts a comment; lists are comma separated.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut map = Map::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let parsed = if matches!(key.as_str(), "momentum") {
                Value::Array(value.split(',').map(|v| scalar_value(v.trim())).collect())
            } else {
                scalar_value(value)
            };
            map.insert(key, parsed);
        }
        let spec: Self = serde_json::from_value(Value::Object(map))?;
        spec.validate()?;
        Ok(spec)
    }

    /// JSON when the file starts with `{`, key=value otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') { Self::from_json(&text) } else { Self::from_key_values(&text) }
    }
}

fn scalar_value(text: &str) -> Value {
    if let Ok(b) = text.parse::<bool>() {
        Value::Bool(b)
    } else if let Ok(i) = text.parse::<i64>() {
        Value::from(i)
    } else if let Ok(x) = text.parse::<f64>() {
        Value::from(x)
    } else {
        Value::String(text.to_string())
    }
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use lplab::corpus::{derive_seed, seeded_rng, spike_sequences, CorpusSpec, EigenvalueMode, Generator};
use lplab::lab::envelope::{Envelope, Excluded, GridConfig, ReportConfig, REPORT_SCHEMA_VERSION};
use lplab::lab::sequence::uniform_constant;
use lplab::lab::{
    estimate_envelope, fermi_sea_sweep, generalized_lt_check, khinchine_ratio, khinchine_tensor_ratio,
    lieb_thirring_check, lp_density_check, lp_function_check, lt_chain_check, parseval_cross_check,
    sequence_lemma_bound, Check, DyadicSequence, EnvelopeTable, Inequality, Ratio, RatioReport, RatioSample,
    SignEnsemble,
};
use lplab::{BumpProfile, DyadicBlockSet, LabError, Result, TorusGrid};

use crate::args::{Command, Common, GltArgs, KhinchineArgs, LiebThirringArgs, SeqlemmaArgs, Settings};

/// One named invariant with the measured value and the bound it is held to.
#[derive(Clone, Debug, Serialize)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Invariant {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), value, bound, pass: value <= bound }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunOutput {
    pub schema_version: u32,
    pub command: String,
    pub reports: Vec<RatioReport>,
    pub invariants: Vec<Invariant>,
    pub tables: BTreeMap<String, Value>,
    pub pass: bool,
}

impl RunOutput {
    fn new(command: &str) -> Self {
        Self { schema_version: REPORT_SCHEMA_VERSION, command: command.to_string(), ..Self::default() }
    }

    fn finish(mut self) -> Self {
        self.pass = self.reports.iter().all(|r| r.pass) && self.invariants.iter().all(|i| i.pass);
        self
    }

    fn absorb(&mut self, other: RunOutput) {
        self.reports.extend(other.reports);
        self.invariants.extend(other.invariants);
        for (k, v) in other.tables {
            self.tables.insert(format!("{}.{k}", other.command), v);
        }
    }
}

struct Context {
    settings: Settings,
    csv: Option<std::path::PathBuf>,
    blocks: DyadicBlockSet,
    envelopes: EnvelopeTable,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let settings = Settings::resolve(common)?;
        let grid = TorusGrid::new(settings.dim, settings.box_length, settings.points)?;
        let blocks = DyadicBlockSet::build(grid, settings.family, BumpProfile::new(settings.profile))?;
        let blocks = if blocks.family() == lplab::BlockFamily::Smooth { blocks.with_companions()? } else { blocks };
        let envelopes = match &settings.envelopes {
            Some(path) => EnvelopeTable::load(path)?,
            None => EnvelopeTable::default(),
        };
        Ok(Self { settings, csv: common.csv.clone(), blocks, envelopes })
    }

    fn grid(&self) -> &TorusGrid {
        self.blocks.grid()
    }

    fn dim(&self) -> usize {
        self.settings.dim
    }

    /// The configured corpus, or `fallback`; `--samples` and `--seed` win.
    fn corpus(&self, fallback: Generator, samples: usize) -> CorpusSpec {
        let mut spec = self.settings.corpus.clone().unwrap_or(CorpusSpec {
            generator: fallback,
            seed: self.settings.seed,
            samples,
        });
        if let Some(n) = self.settings.samples {
            spec.samples = n;
        }
        if self.settings.corpus.is_none() || self.settings.file.seed.is_some() {
            spec.seed = self.settings.seed;
        }
        spec
    }

    fn exponents(&self, default: &[f64]) -> Vec<f64> {
        self.settings.p.clone().unwrap_or_else(|| default.to_vec())
    }

    fn report_config(&self, parameters: BTreeMap<String, f64>) -> ReportConfig {
        ReportConfig { grid: Some(GridConfig::of(&self.blocks)), corpus: None, parameters }
    }
}

fn band_limited() -> Generator {
    Generator::RandomBandLimited { s: 1.0, zero_mean: true }
}

fn frames(rank: usize) -> Generator {
    Generator::RandomOrthonormalFrame { rank, s: 1.0, eigenvalues: EigenvalueMode::Uniform, zero_mean: true }
}

pub fn run(command: &Command) -> Result<RunOutput> {
    match command {
        Command::Partition(c) => partition(&Context::new(c)?),
        Command::Lp(c) => scalar_lp(&Context::new(c)?),
        Command::LpDensity(c) => density_lp(&Context::new(c)?),
        Command::Khinchine(k) => khinchine(&Context::new(&k.common)?, k),
        Command::Gns(c) => gns(&Context::new(c)?),
        Command::LiebThirring(l) => lieb_thirring(&Context::new(&l.common)?, l),
        Command::Glt(g) => glt(&Context::new(&g.common)?, g),
        Command::Seqlemma(s) => seqlemma(&Context::new(&s.common)?, s),
        Command::All(c) => all(c),
    }
}

pub fn common_of(command: &Command) -> &Common {
    match command {
        Command::Partition(c) | Command::Lp(c) | Command::LpDensity(c) | Command::Gns(c) | Command::All(c) => c,
        Command::Khinchine(k) => &k.common,
        Command::LiebThirring(l) => &l.common,
        Command::Glt(g) => &g.common,
        Command::Seqlemma(s) => &s.common,
    }
}

fn partition(ctx: &Context) -> Result<RunOutput> {
    let mut out = RunOutput::new("partition");
    let blocks = &ctx.blocks;
    out.invariants.push(Invariant::at_most("partition-of-unity-residual", blocks.partition_residual(), 1e-12));
    if blocks.has_companions() {
        out.invariants.push(Invariant::at_most("companion-residual", blocks.companion_residual()?, 1e-12));
    }
    out.tables.insert(
        "blocks".into(),
        json!({ "grid": GridConfig::of(blocks), "j_min": blocks.j_min(), "j_max": blocks.j_max() }),
    );
    if let Some(path) = &ctx.csv {
        blocks.write_symbol_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(out.finish())
}

fn scalar_lp(ctx: &Context) -> Result<RunOutput> {
    let mut out = RunOutput::new("lp");
    let corpus = ctx.corpus(band_limited(), 200);
    out.reports = estimate_envelope(&ctx.blocks, &corpus, Check::ScalarLp, &ctx.exponents(&[1.5, 2.0, 3.0, 4.0]), &ctx.envelopes)?;
    let residuals: Vec<f64> = (0..corpus.samples)
        .into_par_iter()
        .map(|i| {
            let u = corpus.member(ctx.grid(), i)?.into_function()?;
            match parseval_cross_check(&u, &ctx.blocks) {
                Ok(c) => Ok(c.residual),
                Err(LabError::UndefinedRatio(_)) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    out.invariants.push(Invariant::at_most("parseval-closed-form", residuals.iter().copied().fold(0.0, f64::max), 1e-12));
    Ok(out.finish())
}

fn density_lp(ctx: &Context) -> Result<RunOutput> {
    let mut out = RunOutput::new("lp-density");
    let rank = ctx.settings.rank.unwrap_or(1);
    let corpus = ctx.corpus(frames(rank), 100);
    let ps = ctx.exponents(&[0.75, 1.0, 1.5, 2.0, 3.0]);
    out.reports = estimate_envelope(&ctx.blocks, &corpus, Check::DensityLp, &ps, &ctx.envelopes)?;
    if rank == 1 {
        // ‖Σ_j |P_j u|²‖_p / ‖|u|²‖_p against the squared scalar ratio at 2p.
        let gaps: Vec<f64> = (0..corpus.samples)
            .into_par_iter()
            .map(|i| {
                let gamma = corpus.member(ctx.grid(), i)?.into_operator()?;
                let u = &gamma.eigenfunctions()[0];
                let mut worst = 0.0f64;
                for &p in &ps {
                    let density = lp_density_check(&gamma, p, &ctx.blocks)?.ratio;
                    let scalar = lp_function_check(u, 2.0 * p, &ctx.blocks)?.ratio;
                    worst = worst.max((density - scalar * scalar).abs() / density);
                }
                Ok(worst)
            })
            .collect::<Result<_>>()?;
        out.invariants.push(Invariant::at_most("rank-one-scalar-agreement", gaps.iter().copied().fold(0.0, f64::max), 1e-12));
    }
    Ok(out.finish())
}

fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn khinchine(ctx: &Context, args: &KhinchineArgs) -> Result<RunOutput> {
    let mut out = RunOutput::new("khinchine");
    let terms = args.terms.or(ctx.settings.file.terms).unwrap_or(8);
    let arrays = ctx.settings.samples.unwrap_or(500);
    let mc = args.mc_samples.or(ctx.settings.file.mc_samples);
    let seed = ctx.settings.seed;
    let ps = ctx.exponents(&[1.0, 1.5, 2.0, 3.0]);
    let ensemble = |i: usize, salt: u64| match mc {
        Some(samples) => SignEnsemble::MonteCarlo { samples, seed: derive_seed(derive_seed(seed, salt), i as u64) },
        None => SignEnsemble::ExactEnumeration,
    };
    let mut parameters = BTreeMap::new();
    parameters.insert("terms".to_string(), terms as f64);
    let config = ctx.report_config(parameters);

    for &p in &ps {
        let rows: Vec<_> = (0..arrays)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let mut rng = seeded_rng(derive_seed(seed, i as u64));
                let a: Vec<Complex64> = (0..terms).map(|_| random_complex(&mut rng)).collect();
                let m = DMatrix::from_fn(terms, terms, |_, _| random_complex(&mut rng));
                let classical = khinchine_ratio(&a, p, ensemble(i, 1))?;
                let tensor = khinchine_tensor_ratio(&m, p, ensemble(i, 2))?;
                Ok((classical, tensor))
            })
            .collect::<Result<_>>()?;
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut tensor = Vec::new();
        let mut excluded = Vec::new();
        for (i, (c, t)) in rows.iter().enumerate() {
            lower.push(RatioSample::new(i, terms, Ratio::new(c.expectation, c.l2_power)?));
            upper.push(RatioSample::new(i, terms, Ratio::new(c.l2_power, c.expectation)?));
            match t.ratio {
                Some(_) => tensor.push(RatioSample::new(i, terms, Ratio::new(t.l2_power, t.expectation)?)),
                None => excluded.push(Excluded { sample_id: i, reason: "degenerate cancellation".into() }),
            }
        }
        if mc.is_none() {
            // Jensen: E|X|^p ≤ (E|X|²)^{p/2} for p ≤ 2 and ≥ for p ≥ 2.
            let violations = rows
                .iter()
                .filter(|(c, _)| {
                    let r = c.expectation / c.l2_power;
                    (p <= 2.0 && r > 1.0 + 1e-12) || (p >= 2.0 && r < 1.0 - 1e-12)
                })
                .count();
            out.invariants.push(Invariant::at_most(&format!("jensen-violations-p{p}"), violations as f64, 0.0));
        }
        let lookup = |q| ctx.envelopes.lookup(q, ctx.dim(), p);
        out.reports.push(RatioReport::from_samples(Inequality::KhinchineLower, p, config.clone(), seed, lower, vec![], lookup(Inequality::KhinchineLower)));
        out.reports.push(RatioReport::from_samples(Inequality::KhinchineUpper, p, config.clone(), seed, upper, vec![], lookup(Inequality::KhinchineUpper)));
        out.reports.push(RatioReport::from_samples(Inequality::KhinchineTensor, p, config.clone(), seed, tensor, excluded, lookup(Inequality::KhinchineTensor)));
    }

    let pair = khinchine_ratio(&[Complex64::new(1.0, 0.0); 2], 1.0, SignEnsemble::ExactEnumeration)?;
    out.invariants.push(Invariant::at_most("pair-p1-lower-ratio-error", (pair.lower_ratio - std::f64::consts::FRAC_1_SQRT_2).abs(), 1e-12));
    let spike = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    let spike = khinchine_tensor_ratio(&spike, 1.0, SignEnsemble::ExactEnumeration)?;
    out.invariants.push(Invariant::at_most("diagonal-spike-tensor-ratio-error", (spike.ratio.unwrap_or(f64::NAN) - 1.0).abs(), 0.0));
    Ok(out.finish())
}

fn gns(ctx: &Context) -> Result<RunOutput> {
    let mut out = RunOutput::new("gns");
    let corpus = ctx.corpus(band_limited(), 200);
    out.reports = estimate_envelope(&ctx.blocks, &corpus, Check::Gns, &[], &ctx.envelopes)?;
    Ok(out.finish())
}

fn lieb_thirring(ctx: &Context, args: &LiebThirringArgs) -> Result<RunOutput> {
    let mut out = RunOutput::new("lieb-thirring");
    let rank = ctx.settings.rank.unwrap_or(8);
    let corpus = ctx.corpus(frames(rank), 50);
    for check in [Check::LiebThirring, Check::LiebThirringWeak] {
        out.reports.extend(estimate_envelope(&ctx.blocks, &corpus, check, &[], &ctx.envelopes)?);
    }

    if ctx.blocks.has_companions() {
        let failures: Vec<f64> = (0..corpus.samples)
            .into_par_iter()
            .map(|i| {
                let gamma = corpus.member(ctx.grid(), i)?.into_operator()?;
                Ok(if lt_chain_check(&gamma, &ctx.blocks)?.pass { 0.0 } else { 1.0 })
            })
            .collect::<Result<_>>()?;
        out.invariants.push(Invariant::at_most("lt-chain-corpus-failures", failures.iter().sum(), 0.0));

        let max_rank = args.sea_max_rank.or(ctx.settings.file.sea_max_rank).unwrap_or(256);
        let sweep = fermi_sea_sweep(&ctx.blocks, max_rank)?;
        let chain_failures = sweep.iter().filter(|s| !s.chain.pass).count();
        out.invariants.push(Invariant::at_most("lt-chain-fermi-failures", chain_failures as f64, 0.0));
        let increases = sweep.windows(2).filter(|w| w[1].lt.ratio.ratio >= w[0].lt.ratio.ratio).count();
        out.invariants.push(Invariant::at_most("fermi-ratio-increases", increases as f64, 0.0));
        if let [.., a, b] = sweep.as_slice() {
            let change = (b.lt.ratio.ratio - a.lt.ratio.ratio).abs() / a.lt.ratio.ratio;
            out.invariants.push(Invariant::at_most("fermi-last-doubling-change", change, 0.02));
        }
        // The triangle-inequality bound loses a factor N^{2/d} on seas.
        let weak_decreases = sweep.windows(2).filter(|w| w[1].lt.weak_ratio <= w[0].lt.weak_ratio).count();
        out.invariants.push(Invariant::at_most("fermi-weak-ratio-decreases", weak_decreases as f64, 0.0));
        out.tables.insert("fermi_sea".into(), serde_json::to_value(&sweep)?);
    }
    Ok(out.finish())
}

fn default_power_bound(dim: usize) -> f64 {
    match dim {
        1 => -0.25,
        2 => 1.0,
        _ => -1.0,
    }
}

fn glt(ctx: &Context, args: &GltArgs) -> Result<RunOutput> {
    let mut out = RunOutput::new("glt");
    let a = args.a.or(ctx.settings.file.a).unwrap_or_else(|| default_power_bound(ctx.dim()));
    let b = args.b.or(ctx.settings.file.b).unwrap_or(1.0);
    let rank = ctx.settings.rank.unwrap_or(4);
    let corpus = ctx.corpus(Generator::PowerBoundedFrame { rank, s: 1.0, a }, 50);
    out.reports = estimate_envelope(&ctx.blocks, &corpus, Check::GeneralizedLt { a, b }, &[], &ctx.envelopes)?;

    let probe = CorpusSpec { generator: frames(rank), seed: ctx.settings.seed, samples: 1 }.member(ctx.grid(), 0)?.into_operator()?;
    let lt = lieb_thirring_check(&probe)?.ratio.ratio;
    let special = generalized_lt_check(&probe, 0.0, 1.0)?.ratio;
    let identical = if lt.to_bits() == special.to_bits() { 0.0 } else { 1.0 };
    out.invariants.push(Invariant::at_most("a0-b1-matches-lieb-thirring-bits", identical, 0.0));
    Ok(out.finish())
}

fn seqlemma(ctx: &Context, args: &SeqlemmaArgs) -> Result<RunOutput> {
    let mut out = RunOutput::new("seqlemma");
    let dim = ctx.dim();
    let trials = args.trials.or(ctx.settings.file.trials).or(ctx.settings.samples).unwrap_or(10_000);
    let start = args.j_start.or(ctx.settings.file.j_start).unwrap_or(-10);
    let end = args.j_end.or(ctx.settings.file.j_end).unwrap_or(10);
    let seed = ctx.settings.seed;
    let sequences = spike_sequences(dim, start, end, trials, seed)?;
    let bounds = sequences.par_iter().map(|s| sequence_lemma_bound(s, dim)).collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    for (i, bound) in bounds.iter().enumerate() {
        match Ratio::new(bound.lhs, bound.rhs) {
            Ok(r) => samples.push(RatioSample::new(i, 0, r)),
            Err(_) => excluded.push(Excluded { sample_id: i, reason: "zero sequence".into() }),
        }
    }
    let failures = bounds.iter().filter(|b| !b.pass).count();
    out.invariants.push(Invariant::at_most("lemma-failures", failures as f64, 0.0));
    let spike_error = (start..=end)
        .map(|j| {
            let b = sequence_lemma_bound(&DyadicSequence::single_spike(dim, start, end, j), dim)?;
            Ok((b.lhs / b.rhs - 1.0).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.invariants.push(Invariant::at_most("spike-ratio-error", spike_error, 1e-12));

    let mut parameters = BTreeMap::new();
    parameters.insert("j_start".to_string(), start as f64);
    parameters.insert("j_end".to_string(), end as f64);
    let envelope = Envelope { lower: None, upper: Some(uniform_constant(dim)) };
    out.reports.push(RatioReport::from_samples(
        Inequality::SequenceLemma,
        1.0 + 2.0 / dim as f64,
        ReportConfig { grid: None, corpus: None, parameters },
        seed,
        samples,
        excluded,
        Some(envelope),
    ));
    Ok(out.finish())
}

fn all(common: &Common) -> Result<RunOutput> {
    let mut out = RunOutput::new("all");
    let ctx = Context::new(&Common { csv: None, ..common.clone() })?;
    out.absorb(partition(&ctx)?);
    out.absorb(scalar_lp(&ctx)?);
    out.absorb(density_lp(&ctx)?);
    out.absorb(khinchine(&ctx, &KhinchineArgs { common: common.clone(), terms: None, mc_samples: None })?);
    out.absorb(gns(&ctx)?);
    out.absorb(lieb_thirring(&ctx, &LiebThirringArgs { common: common.clone(), sea_max_rank: None })?);
    out.absorb(glt(&ctx, &GltArgs { common: common.clone(), a: None, b: None })?);
    out.absorb(seqlemma(&ctx, &SeqlemmaArgs { common: common.clone(), trials: None, j_start: None, j_end: None })?);
    Ok(out.finish())
}

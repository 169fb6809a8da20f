//! Prints ratio ranges over the default desk corpora, used to freeze
//! `config/envelopes.json`.
//!
//!     cargo run --release -p lplab --example calibrate

use std::f64::consts::PI;

use lplab::corpus::{CorpusSpec, EigenvalueMode, Generator};
use lplab::lab::envelope::{estimate_envelope, Check, EnvelopeTable};
use lplab::{DyadicBlockSet, TorusGrid};

fn band(seed: u64, samples: usize) -> CorpusSpec {
    CorpusSpec { generator: Generator::RandomBandLimited { s: 1.0, zero_mean: true }, seed, samples }
}

fn frame(rank: usize, seed: u64, samples: usize) -> CorpusSpec {
    CorpusSpec {
        generator: Generator::RandomOrthonormalFrame { rank, s: 1.0, eigenvalues: EigenvalueMode::Uniform, zero_mean: true },
        seed,
        samples,
    }
}

fn range(blocks: &DyadicBlockSet, corpus: &CorpusSpec, check: Check, ps: &[f64]) -> Vec<(f64, f64, f64)> {
    estimate_envelope(blocks, corpus, check, ps, &EnvelopeTable::empty())
        .unwrap()
        .iter()
        .map(|r| {
            let a = r.aggregates.unwrap();
            (r.p, a.min, a.max)
        })
        .collect()
}

fn main() {
    for (dim, n) in [(1usize, 256usize), (2, 64)] {
        let blocks = DyadicBlockSet::smooth(TorusGrid::new(dim, 2.0 * PI, n).unwrap()).unwrap();
        for seed in [1u64, 2, 3] {
            for (p, lo, hi) in range(&blocks, &band(seed, 200), Check::ScalarLp, &[1.5, 2.0, 3.0, 4.0]) {
                println!("d={dim} seed={seed} scalar-lp p={p} [{lo:.4}, {hi:.4}]");
            }
            for (p, lo, hi) in range(&blocks, &band(seed, 200), Check::Gns, &[]) {
                println!("d={dim} seed={seed} gns p={p:.4} [{lo:.4}, {hi:.4}]");
            }
        }
        for rank in [1usize, 2, 4, 8, 16, 32] {
            let samples = if rank <= 4 { 100 } else { 40 };
            for (p, lo, hi) in range(&blocks, &frame(rank, 11, samples), Check::DensityLp, &[0.6, 0.75, 1.0, 1.5, 2.0, 3.0]) {
                println!("d={dim} rank={rank} density-lp p={p} [{lo:.4}, {hi:.4}]");
            }
            for check in [Check::LiebThirring, Check::LiebThirringWeak] {
                for (p, lo, hi) in range(&blocks, &frame(rank, 11, samples), check, &[]) {
                    println!("d={dim} rank={rank} {} p={p:.4} [{lo:.4}, {hi:.4}]", check.inequality().name());
                }
            }
        }
    }
}

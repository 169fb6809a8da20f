//! Littlewood-Paley projectors `P_j`, their companions `P̃_j`, the square
//! function and random-sign multipliers `Σ_j r_j P_j`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid::GridFunction;
use crate::partition::DyadicBlockSet;
use crate::sum::NeumaierSum;

/// Signs `r_j ∈ {−1, +1}` indexed by block, starting at `j_min`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignVector {
    j_min: i32,
    signs: Vec<i8>,
}

impl SignVector {
    pub fn new(j_min: i32, signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(LabError::Domain(format!("sign entries must be ±1, found {bad}")));
        }
        Ok(Self { j_min, signs })
    }

    pub fn all_positive(blocks: &DyadicBlockSet) -> Self {
        Self { j_min: blocks.j_min(), signs: vec![1; blocks.len()] }
    }

    pub fn random<R: Rng + ?Sized>(blocks: &DyadicBlockSet, rng: &mut R) -> Self {
        let signs = (0..blocks.len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self { j_min: blocks.j_min(), signs }
    }

    pub fn sign(&self, j: i32) -> Option<i8> {
        usize::try_from(j - self.j_min).ok().and_then(|i| self.signs.get(i).copied())
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

fn same_grid(f: &GridFunction, blocks: &DyadicBlockSet) -> Result<()> {
    if f.grid() != blocks.grid() {
        return Err(LabError::GridMismatch);
    }
    Ok(())
}

/// `P_j f`.
pub fn project(f: &GridFunction, blocks: &DyadicBlockSet, j: i32) -> Result<GridFunction> {
    same_grid(f, blocks)?;
    f.apply_multiplier(blocks.symbol(j)?)
}

/// `P̃_j f`; requires companion symbols.
pub fn project_companion(f: &GridFunction, blocks: &DyadicBlockSet, j: i32) -> Result<GridFunction> {
    same_grid(f, blocks)?;
    f.apply_multiplier(blocks.companion(j)?)
}

/// All pieces `P_j f`, `j = j_min..=j_max`, from a single forward transform.
pub fn decompose(f: &GridFunction, blocks: &DyadicBlockSet) -> Result<Vec<GridFunction>> {
    same_grid(f, blocks)?;
    let spectrum = f.forward_transform();
    blocks
        .indices()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&j| Ok(spectrum.multiply(blocks.symbol(j)?)?.inverse_transform()))
        .collect()
}

/// Pointwise `Σ_j |P_j f(x)|²`.
pub fn squared_pieces_sum(pieces: &[GridFunction]) -> Vec<f64> {
    let len = pieces.first().map_or(0, |p| p.values().len());
    (0..len)
        .map(|x| {
            let mut acc = NeumaierSum::new();
            for piece in pieces {
                acc.add(piece.values()[x].norm_sqr());
            }
            acc.value()
        })
        .collect()
}

/// Square function `(Σ_j |P_j f|²)^{1/2}` as a real grid function.
pub fn square_function(f: &GridFunction, blocks: &DyadicBlockSet) -> Result<GridFunction> {
    let pieces = decompose(f, blocks)?;
    let values: Vec<f64> = squared_pieces_sum(&pieces).into_iter().map(f64::sqrt).collect();
    GridFunction::from_real(*f.grid(), &values)
}

/// Multiplier with symbol `Σ_j r_j Ψ_j(ξ)`.
pub fn random_sign_multiplier(f: &GridFunction, blocks: &DyadicBlockSet, signs: &SignVector) -> Result<GridFunction> {
    same_grid(f, blocks)?;
    if signs.len() != blocks.len() || signs.j_min != blocks.j_min() {
        return Err(LabError::SizeMismatch { expected: blocks.len(), got: signs.len() });
    }
    let mut symbol = vec![0.0; f.grid().len()];
    for (j, table) in blocks.symbols() {
        let r = f64::from(signs.sign(j).expect("sign length checked"));
        for (acc, v) in symbol.iter_mut().zip(table) {
            *acc += r * v;
        }
    }
    f.apply_multiplier(&symbol)
}

/// `Σ_j P_j f`, used to check reconstruction.
pub fn reconstruct(pieces: &[GridFunction]) -> Result<GridFunction> {
    let first = pieces.first().ok_or_else(|| LabError::Config("no pieces to sum".into()))?;
    let len = first.values().len();
    let values = (0..len)
        .map(|x| {
            let mut re = NeumaierSum::new();
            let mut im = NeumaierSum::new();
            for p in pieces {
                re.add(p.values()[x].re);
                im.add(p.values()[x].im);
            }
            Complex64::new(re.value(), im.value())
        })
        .collect();
    GridFunction::new(*first.grid(), values)
}

//! Dyadic partitions of unity on the frequency lattice.
//!
//! A [`BumpProfile`] `φ` (equal to 1 on `[0,1]`, 0 on `[2,∞)`) generates the
//! annular bump `ψ(ξ) = φ(|ξ|) − φ(2|ξ|)` and its dilates `ψ_j = ψ(2^{-j}·)`.
//! On a finite lattice only finitely many `ψ_j` are nonzero; the lowest block
//! absorbs everything below it (including `ξ = 0`) and the highest block
//! absorbs everything above, so the tabulated family sums to one exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::TorusGrid;

/// Interpolation used between the inner radius 1 and the outer radius 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlueKind {
    /// `g(2−r) / (g(2−r) + g(r−1))` with `g(t) = exp(−1/t)`; C^∞.
    ExpRational,
    /// `1 − S(r−1)` with the quintic smoothstep `S`; C².
    Smoothstep,
}

impl fmt::Display for GlueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GlueKind::ExpRational => "exp-rational",
            GlueKind::Smoothstep => "smoothstep",
        })
    }
}

impl FromStr for GlueKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp-rational" => Ok(GlueKind::ExpRational),
            "smoothstep" => Ok(GlueKind::Smoothstep),
            other => Err(LabError::Config(format!("unknown profile kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockFamily {
    Smooth,
    Sharp,
}

impl BlockFamily {
    fn name(self) -> &'static str {
        match self {
            BlockFamily::Smooth => "smooth",
            BlockFamily::Sharp => "sharp",
        }
    }
}

impl fmt::Display for BlockFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(BlockFamily::Smooth),
            "sharp" => Ok(BlockFamily::Sharp),
            other => Err(LabError::Config(format!("unknown block family '{other}'"))),
        }
    }
}

fn exp_glue(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Radial cutoff `φ`: 1 on `[0,1]`, 0 on `[2,∞)`, monotone in between.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BumpProfile {
    kind: GlueKind,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self::new(GlueKind::ExpRational)
    }
}

impl BumpProfile {
    pub fn new(kind: GlueKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> GlueKind {
        self.kind
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 1.0;
        }
        if r >= 2.0 {
            return 0.0;
        }
        match self.kind {
            GlueKind::ExpRational => {
                let outer = exp_glue(2.0 - r);
                outer / (outer + exp_glue(r - 1.0))
            }
            GlueKind::Smoothstep => {
                let t = r - 1.0;
                1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
            }
        }
    }

    /// Annular bump `ψ(r) = φ(r) − φ(2r)`, supported in `[1/2, 2]`.
    pub fn annulus(&self, r: f64) -> f64 {
        self.eval(r) - self.eval(2.0 * r)
    }

    /// Companion `ψ̃(r) = φ(r/2) − φ(4r)`, identically 1 on `[1/2, 2]`.
    pub fn companion_annulus(&self, r: f64) -> f64 {
        self.eval(0.5 * r) - self.eval(4.0 * r)
    }

    /// Finite-difference smoothness probe on 50 points of `[0.5, 2.5]`.
    pub fn smoothness(&self) -> SmoothnessReport {
        const SAMPLES: usize = 50;
        let step = 2.0 / (SAMPLES - 1) as f64;
        let rs: Vec<f64> = (0..SAMPLES).map(|i| 0.5 + i as f64 * step).collect();
        let first: Vec<f64> = rs
            .iter()
            .map(|&r| (self.eval(r + step) - self.eval(r - step)) / (2.0 * step))
            .collect();
        let second: Vec<f64> = rs
            .iter()
            .map(|&r| (self.eval(r + step) - 2.0 * self.eval(r) + self.eval(r - step)) / (step * step))
            .collect();
        let max_first = first.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_second = second.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_first_jump = first.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs()));
        let finite = first.iter().chain(&second).all(|v| v.is_finite());
        SmoothnessReport {
            sample_spacing: step,
            max_first,
            max_second,
            max_first_jump,
            pass: finite && max_first_jump <= 10.0 * step * max_second,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub sample_spacing: f64,
    pub max_first: f64,
    pub max_second: f64,
    pub max_first_jump: f64,
    pub pass: bool,
}

/// `2^j` with `j` snapped to the nearest integer when `r` is dyadic up to rounding.
fn snapped_log2(r: f64) -> (f64, bool) {
    let t = r.log2();
    let k = t.round();
    if (t - k).abs() <= 1e-12 * t.abs().max(1.0) {
        (k, true)
    } else {
        (t, false)
    }
}

fn dyadic_floor(r: f64) -> i32 {
    let (t, exact) = snapped_log2(r);
    if exact {
        t as i32
    } else {
        t.floor() as i32
    }
}

fn dyadic_ceil(r: f64) -> i32 {
    let (t, exact) = snapped_log2(r);
    if exact {
        t as i32
    } else {
        t.ceil() as i32
    }
}

fn dyadic(j: i32) -> f64 {
    2f64.powi(j)
}

/// Finite family of multipliers `Ψ_j` tabulated in spectrum order.
#[derive(Clone, Debug)]
pub struct DyadicBlockSet {
    grid: TorusGrid,
    family: BlockFamily,
    profile: BumpProfile,
    j_min: i32,
    j_max: i32,
    symbols: Vec<Vec<f64>>,
    companions: Option<Vec<Vec<f64>>>,
}

impl DyadicBlockSet {
    pub fn build(grid: TorusGrid, family: BlockFamily, profile: BumpProfile) -> Result<Self> {
        let norms = grid.frequency_norms();
        let xi_min = grid.frequency_unit();
        let xi_max = norms.iter().copied().fold(0.0, f64::max);
        let j_min = dyadic_floor(xi_min);
        let j_max = match family {
            BlockFamily::Smooth => dyadic_ceil(xi_max),
            BlockFamily::Sharp => dyadic_floor(xi_max),
        };
        if j_max < j_min + 2 {
            return Err(LabError::Config(format!(
                "grid too coarse: blocks {j_min}..={j_max} give fewer than 3 dyadic scales"
            )));
        }

        let symbols: Vec<Vec<f64>> = (j_min..=j_max)
            .map(|j| {
                norms
                    .iter()
                    .map(|&r| match family {
                        BlockFamily::Smooth => smooth_symbol(&profile, j, j_min, j_max, r),
                        BlockFamily::Sharp => sharp_symbol(j, j_min, j_max, r),
                    })
                    .collect()
            })
            .collect();

        let nonempty = symbols.iter().filter(|s| s.iter().any(|&v| v != 0.0)).count();
        if nonempty < 3 {
            return Err(LabError::Config(format!("grid too coarse: only {nonempty} nonempty blocks")));
        }

        Ok(Self { grid, family, profile, j_min, j_max, symbols, companions: None })
    }

    /// Smooth family with companions, default profile.
    pub fn smooth(grid: TorusGrid) -> Result<Self> {
        Self::build(grid, BlockFamily::Smooth, BumpProfile::default())?.with_companions()
    }

    pub fn sharp(grid: TorusGrid) -> Result<Self> {
        Self::build(grid, BlockFamily::Sharp, BumpProfile::default())
    }

    /// Fills `Ψ̃_j`, equal to 1 on the support of `Ψ_j`.
    pub fn with_companions(mut self) -> Result<Self> {
        if self.family != BlockFamily::Smooth {
            return Err(LabError::UnsupportedFamily(self.family.name()));
        }
        let norms = self.grid.frequency_norms();
        let (j_min, j_max) = (self.j_min, self.j_max);
        let profile = self.profile;
        let companions = (j_min..=j_max)
            .map(|j| {
                norms
                    .iter()
                    .map(|&r| {
                        if j == j_min {
                            profile.eval(r / dyadic(j + 1))
                        } else if j == j_max {
                            1.0 - profile.eval(r * dyadic(2 - j))
                        } else {
                            profile.companion_annulus(r / dyadic(j))
                        }
                    })
                    .collect()
            })
            .collect();
        self.companions = Some(companions);
        Ok(self)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn family(&self) -> BlockFamily {
        self.family
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn indices(&self) -> RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    /// Blocks whose symbols are genuine dyadic annuli (edges excluded).
    pub fn interior_indices(&self) -> RangeInclusive<i32> {
        (self.j_min + 1)..=(self.j_max - 1)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn has_companions(&self) -> bool {
        self.companions.is_some()
    }

    fn slot(&self, j: i32) -> Result<usize> {
        if j < self.j_min || j > self.j_max {
            return Err(LabError::BlockIndex { j, min: self.j_min, max: self.j_max });
        }
        Ok((j - self.j_min) as usize)
    }

    pub fn symbol(&self, j: i32) -> Result<&[f64]> {
        Ok(&self.symbols[self.slot(j)?])
    }

    pub fn companion(&self, j: i32) -> Result<&[f64]> {
        let slot = self.slot(j)?;
        match &self.companions {
            Some(c) => Ok(&c[slot]),
            None => Err(LabError::Config("companion symbols have not been built".into())),
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.symbols.iter().enumerate().map(move |(i, s)| (self.j_min + i as i32, s.as_slice()))
    }

    /// Number of blocks with `Ψ_j(ξ) ≠ 0` at spectrum slot `idx`.
    pub fn overlap_count(&self, idx: usize) -> usize {
        self.symbols.iter().filter(|s| s[idx] != 0.0).count()
    }

    /// `Σ_j Ψ_j(ξ)` per slot.
    pub fn block_sum(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|idx| self.symbols.iter().map(|s| s[idx]).sum()).collect()
    }

    /// `Σ_j Ψ_j(ξ)²` per slot.
    pub fn block_squared_sum(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|idx| self.symbols.iter().map(|s| s[idx] * s[idx]).sum()).collect()
    }

    /// Largest deviation of `Σ_j Ψ_j` from 1 over the lattice.
    pub fn partition_residual(&self) -> f64 {
        self.block_sum().iter().fold(0.0, |m, v| m.max((v - 1.0).abs()))
    }

    /// Largest `|Ψ̃_j Ψ_j − Ψ_j|` over all blocks and slots.
    pub fn companion_residual(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for j in self.indices() {
            let (s, c) = (self.symbol(j)?, self.companion(j)?);
            for (a, b) in s.iter().zip(c) {
                worst = worst.max((a * b - a).abs());
            }
        }
        Ok(worst)
    }

    /// Plot table with one row per block and distinct lattice radius:
    /// `j, xi_abs, psi, psi_tilde` (the last column empty without companions).
    pub fn write_symbol_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut radii: BTreeMap<i64, usize> = BTreeMap::new();
        for idx in 0..self.grid.len() {
            radii.entry(self.grid.lattice_norm_sq(idx)).or_insert(idx);
        }
        let unit = self.grid.frequency_unit();
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["j", "xi_abs", "psi", "psi_tilde"])?;
        for j in self.indices() {
            let s = self.symbol(j)?;
            let c = self.companion(j).ok();
            for (&m_sq, &idx) in &radii {
                let tilde = c.map(|c| crate::report::format_float(c[idx])).unwrap_or_default();
                csv.write_record([
                    j.to_string(),
                    crate::report::format_float((m_sq as f64).sqrt() * unit),
                    crate::report::format_float(s[idx]),
                    tilde,
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    }
}

fn smooth_symbol(profile: &BumpProfile, j: i32, j_min: i32, j_max: i32, r: f64) -> f64 {
    if j == j_min {
        // Σ_{i≤j_min} ψ_i + 1(ξ=0) telescopes to φ(2^{-j_min} r), which is 1 at r=0.
        profile.eval(r / dyadic(j))
    } else if j == j_max {
        // Σ_{i≥j_max} ψ_i = 1 − φ(2^{1-j_max} r).
        1.0 - profile.eval(r * dyadic(1 - j))
    } else {
        profile.annulus(r / dyadic(j))
    }
}

fn sharp_symbol(j: i32, j_min: i32, j_max: i32, r: f64) -> f64 {
    let block = if r == 0.0 { j_min } else { dyadic_floor(r).clamp(j_min, j_max) };
    if block == j {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, n: usize) -> TorusGrid {
        TorusGrid::new(dim, 2.0 * PI, n).unwrap()
    }

    #[test]
    fn profile_values() {
        for kind in [GlueKind::ExpRational, GlueKind::Smoothstep] {
            let phi = BumpProfile::new(kind);
            assert_eq!(phi.eval(0.5), 1.0);
            assert_eq!(phi.eval(1.0), 1.0);
            assert_eq!(phi.eval(2.0), 0.0);
            assert_eq!(phi.eval(2.5), 0.0);
            assert_eq!(phi.eval(1.5), 0.5);
            let mut prev = 1.0;
            for i in 0..=400 {
                let v = phi.eval(0.75 + i as f64 * 0.004);
                assert!((0.0..=1.0).contains(&v));
                assert!(v <= prev);
                prev = v;
            }
        }
        let g = exp_glue(0.5);
        assert_eq!(BumpProfile::default().eval(1.5), g / (2.0 * g));
    }

    #[test]
    fn profiles_are_numerically_smooth() {
        for kind in [GlueKind::ExpRational, GlueKind::Smoothstep] {
            let report = BumpProfile::new(kind).smoothness();
            assert!(report.pass, "{kind}: {report:?}");
        }
    }

    #[test]
    fn block_ranges() {
        let b = DyadicBlockSet::smooth(grid(1, 256)).unwrap();
        assert_eq!((b.j_min(), b.j_max()), (0, 7));
        let b = DyadicBlockSet::smooth(grid(2, 64)).unwrap();
        assert_eq!((b.j_min(), b.j_max()), (0, 6));
        let b = DyadicBlockSet::sharp(grid(1, 256)).unwrap();
        assert_eq!((b.j_min(), b.j_max()), (0, 7));
        let b = DyadicBlockSet::sharp(grid(2, 64)).unwrap();
        assert_eq!((b.j_min(), b.j_max()), (0, 5));
        let odd = TorusGrid::new(1, 5.0, 64).unwrap();
        let b = DyadicBlockSet::smooth(odd).unwrap();
        assert_eq!(b.j_min(), 0);
        assert!(dyadic(b.j_max()) >= odd.max_frequency());
    }

    #[test]
    fn partition_of_unity_on_lattice() {
        for (dim, n, len) in [(1, 64, 2.0 * PI), (1, 256, 3.3), (2, 64, 2.0 * PI), (3, 16, 9.0)] {
            let g = TorusGrid::new(dim, len, n).unwrap();
            for family in [BlockFamily::Smooth, BlockFamily::Sharp] {
                for kind in [GlueKind::ExpRational, GlueKind::Smoothstep] {
                    let b = DyadicBlockSet::build(g, family, BumpProfile::new(kind)).unwrap();
                    assert!(b.partition_residual() <= 1e-12);
                    for (_, s) in b.symbols() {
                        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
                    }
                }
            }
        }
    }

    #[test]
    fn dyadic_points_hit_a_single_block() {
        let g = grid(1, 256);
        let smooth = DyadicBlockSet::smooth(g).unwrap();
        let sharp = DyadicBlockSet::sharp(g).unwrap();
        for j in 1..=6 {
            let idx = g.lattice_slot(&[1 << j]).unwrap();
            for b in [&smooth, &sharp] {
                assert_eq!(b.symbol(j).unwrap()[idx], 1.0);
                assert_eq!(b.overlap_count(idx), 1);
            }
        }
    }

    #[test]
    fn overlap_counts() {
        let g = grid(1, 256);
        let smooth = DyadicBlockSet::smooth(g).unwrap();
        let sharp = DyadicBlockSet::sharp(g).unwrap();
        // |ξ| = 1.5·2^j for j = 1..5
        for j in 1..=5 {
            let idx = g.lattice_slot(&[3 << (j - 1)]).unwrap();
            assert_eq!(smooth.overlap_count(idx), 2);
            assert!(smooth.symbol(j).unwrap()[idx] > 0.0);
            assert!(smooth.symbol(j + 1).unwrap()[idx] > 0.0);
        }
        for idx in 1..g.len() {
            assert_eq!(sharp.overlap_count(idx), 1);
            assert!(smooth.overlap_count(idx) <= 2);
        }
        let g2 = grid(2, 64);
        let smooth2 = DyadicBlockSet::smooth(g2).unwrap();
        assert!((1..g2.len()).all(|idx| smooth2.overlap_count(idx) <= 2));
    }

    #[test]
    fn companions_cover_supports() {
        for g in [grid(1, 256), grid(2, 64), TorusGrid::new(3, 4.0, 16).unwrap()] {
            let b = DyadicBlockSet::smooth(g).unwrap();
            assert!(b.companion_residual().unwrap() <= 1e-12);
        }
        let g = grid(1, 256);
        let b = DyadicBlockSet::smooth(g).unwrap();
        for j in b.interior_indices() {
            let at = g.lattice_slot(&[1 << j]).unwrap();
            assert_eq!(b.companion(j).unwrap()[at], 1.0);
            if j + 3 <= 6 {
                let far = g.lattice_slot(&[1 << (j + 3)]).unwrap();
                assert_eq!(b.companion(j).unwrap()[far], 0.0);
            }
        }
        assert!(matches!(
            DyadicBlockSet::sharp(g).unwrap().with_companions(),
            Err(LabError::UnsupportedFamily("sharp"))
        ));
        assert!(DyadicBlockSet::sharp(g).unwrap().companion(1).is_err());
    }

    #[test]
    fn squared_sum_bounds() {
        let g = grid(2, 64);
        let sharp = DyadicBlockSet::sharp(g).unwrap();
        assert!(sharp.block_squared_sum().iter().all(|&v| v == 1.0));
        let smooth = DyadicBlockSet::smooth(g).unwrap();
        for (idx, v) in smooth.block_squared_sum().into_iter().enumerate() {
            assert!((0.5..=1.0 + 1e-15).contains(&v));
            if smooth.overlap_count(idx) == 1 {
                assert_eq!(v, 1.0);
            }
        }
        // Ψ_j = Ψ_{j+1} = 1/2 at |ξ| = 1.5·2^j (symmetric glue).
        let g1 = grid(1, 256);
        let b = DyadicBlockSet::smooth(g1).unwrap();
        let idx = g1.lattice_slot(&[6]).unwrap();
        assert_eq!(b.symbol(2).unwrap()[idx], 0.5);
        assert_eq!(b.block_squared_sum()[idx], 0.5);
    }

    #[test]
    fn support_and_radial_symmetry() {
        let g = grid(2, 64);
        let b = DyadicBlockSet::smooth(g).unwrap();
        let norms = g.frequency_norms();
        for j in b.interior_indices() {
            let s = b.symbol(j).unwrap();
            for (idx, &v) in s.iter().enumerate() {
                if v != 0.0 {
                    assert!(norms[idx] >= dyadic(j - 1) && norms[idx] <= dyadic(j + 1));
                }
            }
        }
        let mut by_radius: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for idx in 0..g.len() {
            let row: Vec<f64> = b.symbols().map(|(_, s)| s[idx]).collect();
            let entry = by_radius.entry(g.lattice_norm_sq(idx)).or_insert_with(|| row.clone());
            assert_eq!(entry, &row);
        }
    }

    #[test]
    fn smallest_grid_still_has_three_scales() {
        let g = TorusGrid::new(1, 2.0 * PI, 8).unwrap();
        for b in [DyadicBlockSet::sharp(g).unwrap(), DyadicBlockSet::smooth(g).unwrap()] {
            assert_eq!(b.len(), 3);
            assert!(b.partition_residual() <= 1e-12);
        }
    }

    #[test]
    fn symbol_csv_shape() {
        let g = grid(1, 64);
        let b = DyadicBlockSet::smooth(g).unwrap();
        let mut out = Vec::new();
        b.write_symbol_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "j,xi_abs,psi,psi_tilde");
        assert_eq!(lines.len(), 1 + b.len() * 33);
    }
}

//! The periodic box `[0, L)^d` sampled on `N^d` points, its frequency lattice,
//! and the continuum-normalized Fourier transform pair
//!
//! ```text
//!   û(ξ_m) = h^d Σ_x f(x) e^{-i ξ_m·x},      f(x) = L^{-d} Σ_m û(ξ_m) e^{i ξ_m·x},
//! ```
//!
//! with `h = L/N` and `ξ_m = (2π/L) m`. Under this normalization the discrete
//! quadrature `h^d Σ_x` plays the role of `∫ dx` and `L^{-d} Σ_m` the role of
//! `(2π)^{-d} ∫ dξ`, so norms and traces converge to their continuum values.
//!
//! Spectra are stored in FFT order: along each axis, slot `k` holds the lattice
//! coordinate `k` for `k < N/2` and `k - N` otherwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fft::fft_nd;
use crate::sum::NeumaierSum;

pub const DEFAULT_POINT_CAP: usize = 1 << 24;

/// Relative size of the zero mode below which a function counts as mean-zero.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    box_length: f64,
    points_per_axis: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, box_length: f64, points_per_axis: usize) -> Result<Self> {
        Self::with_cap(dim, box_length, points_per_axis, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(dim: usize, box_length: f64, points_per_axis: usize, cap: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(LabError::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(LabError::InvalidGrid(format!("box length {box_length} must be positive")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(LabError::InvalidGrid(format!(
                "points per axis {points_per_axis} must be a power of two >= 8"
            )));
        }
        let total = (points_per_axis as u128).pow(dim as u32);
        if total > cap as u128 {
            return Err(LabError::InvalidGrid(format!("{total} grid points exceed the cap of {cap}")));
        }
        Ok(Self { dim, box_length, points_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Total number of samples, `N^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }

    /// Lattice spacing `2π/L`.
    pub fn frequency_unit(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest lattice frequency magnitude, `π √d N / L`.
    pub fn max_frequency(&self) -> f64 {
        PI * (self.dim as f64).sqrt() * self.points_per_axis as f64 / self.box_length
    }

    fn axis_indices(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut out = [0usize; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % n;
            rest /= n;
        }
        out
    }

    /// Integer lattice coordinates `m` of the spectrum slot `idx`.
    pub fn lattice_vector(&self, idx: usize) -> [i64; 3] {
        let n = self.points_per_axis;
        let k = self.axis_indices(idx);
        let mut m = [0i64; 3];
        for axis in 0..self.dim {
            m[axis] = if k[axis] < n / 2 { k[axis] as i64 } else { k[axis] as i64 - n as i64 };
        }
        m
    }

    /// Spectrum slot holding lattice vector `m`; `None` if outside the lattice.
    pub fn lattice_slot(&self, m: &[i64]) -> Option<usize> {
        if m.len() != self.dim {
            return None;
        }
        let n = self.points_per_axis as i64;
        let mut idx = 0usize;
        for &c in m {
            if c < -n / 2 || c >= n / 2 {
                return None;
            }
            idx = idx * n as usize + c.rem_euclid(n) as usize;
        }
        Some(idx)
    }

    /// `|m|²` for the spectrum slot `idx`.
    pub fn lattice_norm_sq(&self, idx: usize) -> i64 {
        self.lattice_vector(idx).iter().map(|c| c * c).sum()
    }

    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let unit = self.frequency_unit();
        let m = self.lattice_vector(idx);
        [m[0] as f64 * unit, m[1] as f64 * unit, m[2] as f64 * unit]
    }

    /// `|ξ|` for every spectrum slot.
    pub fn frequency_norms(&self) -> Vec<f64> {
        let unit = self.frequency_unit();
        (0..self.len())
            .map(|idx| (self.lattice_norm_sq(idx) as f64).sqrt() * unit)
            .collect()
    }

    /// Physical coordinates of the grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let k = self.axis_indices(idx);
        [k[0] as f64 * h, k[1] as f64 * h, k[2] as f64 * h]
    }

    pub fn sample<F>(&self, f: F) -> GridFunction
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let values = (0..self.len())
            .map(|idx| {
                let x = self.point(idx);
                f(&x[..self.dim])
            })
            .collect();
        GridFunction { grid: *self, values }
    }

    /// Normalized plane wave `L^{-d/2} e^{i ξ_m·x}`.
    pub fn plane_wave(&self, m: &[i64]) -> Result<GridFunction> {
        let slot = self
            .lattice_slot(m)
            .ok_or_else(|| LabError::Domain(format!("lattice vector {m:?} outside the grid")))?;
        let mut spec = SpectrumFunction::zeros(*self);
        spec.coefficients[slot] = Complex64::new(self.volume().sqrt(), 0.0);
        Ok(spec.inverse_transform())
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction { grid: *self, values: vec![Complex64::new(0.0, 0.0); self.len()] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::SizeMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: TorusGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn forward_transform(&self) -> SpectrumFunction {
        let mut data = self.values.clone();
        fft_nd(&mut data, self.grid.points_per_axis, self.grid.dim, FftDirection::Forward);
        let w = self.grid.cell_volume();
        for v in &mut data {
            *v *= w;
        }
        SpectrumFunction { grid: self.grid, coefficients: data }
    }

    /// `(h^d Σ_x |f(x)|^p)^{1/p}`; a quasinorm for `p < 1`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.grid, self.values.iter().map(|v| v.norm()), p)
    }

    /// `h^d Σ_x f(x)`.
    pub fn integral(&self) -> Complex64 {
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for v in &self.values {
            re.add(v.re);
            im.add(v.im);
        }
        Complex64::new(re.value(), im.value()) * self.grid.cell_volume()
    }

    /// `⟨self, other⟩ = h^d Σ_x conj(self) other`.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch);
        }
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for (a, b) in self.values.iter().zip(&other.values) {
            let z = a.conj() * b;
            re.add(z.re);
            im.add(z.im);
        }
        Ok(Complex64::new(re.value(), im.value()) * self.grid.cell_volume())
    }

    /// Fourier multiplier `F^{-1}(σ(ξ) F f)`; `σ` receives `ξ` as a `d`-slice.
    pub fn apply_symbol<S>(&self, symbol: S) -> GridFunction
    where
        S: Fn(&[f64]) -> Complex64,
    {
        let mut spec = self.forward_transform();
        let d = self.grid.dim;
        for (idx, c) in spec.coefficients.iter_mut().enumerate() {
            let xi = self.grid.frequency(idx);
            *c *= symbol(&xi[..d]);
        }
        spec.inverse_transform()
    }

    /// Multiplier given as a real table in spectrum (FFT) order.
    pub fn apply_multiplier(&self, table: &[f64]) -> Result<GridFunction> {
        Ok(self.forward_transform().multiply(table)?.inverse_transform())
    }

    /// `‖(-Δ)^{s/2} u‖²`; see [`SpectrumFunction::kinetic_form`].
    pub fn kinetic_form(&self, s: f64) -> Result<f64> {
        self.forward_transform().kinetic_form(s)
    }

    pub fn scaled(&self, c: Complex64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(GridFunction { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `(h^d Σ |v|^p)^{1/p}` over already-computed magnitudes.
pub(crate) fn lp_norm_of<I>(grid: &TorusGrid, magnitudes: I, p: f64) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    if !(p > 0.0 && p.is_finite()) {
        return Err(LabError::Domain(format!("L^p exponent must be positive and finite, got {p}")));
    }
    let mut acc = NeumaierSum::new();
    for m in magnitudes {
        acc.add(m.powf(p));
    }
    Ok((grid.cell_volume() * acc.value()).powf(1.0 / p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumFunction {
    grid: TorusGrid,
    coefficients: Vec<Complex64>,
}

impl SpectrumFunction {
    pub fn new(grid: TorusGrid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(LabError::SizeMismatch { expected: grid.len(), got: coefficients.len() });
        }
        Ok(Self { grid, coefficients })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, coefficients: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn inverse_transform(&self) -> GridFunction {
        let mut data = self.coefficients.clone();
        fft_nd(&mut data, self.grid.points_per_axis, self.grid.dim, FftDirection::Inverse);
        let w = 1.0 / self.grid.volume();
        for v in &mut data {
            *v *= w;
        }
        GridFunction { grid: self.grid, values: data }
    }

    pub fn multiply(&self, table: &[f64]) -> Result<SpectrumFunction> {
        if table.len() != self.coefficients.len() {
            return Err(LabError::SizeMismatch { expected: self.coefficients.len(), got: table.len() });
        }
        let coefficients = self.coefficients.iter().zip(table).map(|(c, s)| c * s).collect();
        Ok(SpectrumFunction { grid: self.grid, coefficients })
    }

    /// `L^{-d} Σ_m |û(ξ_m)|²`, equal to `‖f‖₂²` by Parseval.
    pub fn energy(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for c in &self.coefficients {
            acc.add(c.norm_sqr());
        }
        acc.value() / self.grid.volume()
    }

    /// Whether the zero mode is negligible relative to the total `ℓ²` mass.
    pub fn is_mean_zero(&self) -> bool {
        let total: f64 = self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        self.coefficients[0].norm() <= ZERO_MODE_TOLERANCE * total
    }

    /// Discrete `‖(-Δ)^{s/2} u‖² = L^{-d} Σ_ξ |ξ|^{2s} |û(ξ)|²`.
    ///
    /// For `s > 0` the zero mode contributes nothing; for `s = 0` it is included.
    /// For `s < 0` the zero mode must vanish, otherwise the form is infinite.
    pub fn kinetic_form(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(LabError::Domain(format!("kinetic exponent {s} is not finite")));
        }
        if s == 0.0 {
            return Ok(self.energy());
        }
        if s < 0.0 && !self.is_mean_zero() {
            return Err(LabError::ZeroModeSingularity(format!(
                "(-Δ)^{s} applied to a function with nonzero mean"
            )));
        }
        let unit_sq = self.grid.frequency_unit().powi(2);
        let mut acc = NeumaierSum::new();
        for (idx, c) in self.coefficients.iter().enumerate().skip(1) {
            let xi_sq = self.grid.lattice_norm_sq(idx) as f64 * unit_sq;
            acc.add(xi_sq.powf(s) * c.norm_sqr());
        }
        Ok(acc.value() / self.grid.volume())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_function(grid: TorusGrid, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        GridFunction::new(grid, values).unwrap()
    }

    /// Direct `O(N^{2d})` evaluation of the forward transform.
    fn direct_forward(f: &GridFunction) -> Vec<Complex64> {
        let g = f.grid();
        let d = g.dim();
        (0..g.len())
            .map(|m| {
                let xi = g.frequency(m);
                let mut acc = c(0.0, 0.0);
                for (x_idx, v) in f.values().iter().enumerate() {
                    let x = g.point(x_idx);
                    let phase: f64 = (0..d).map(|a| xi[a] * x[a]).sum();
                    acc += v * Complex64::from_polar(1.0, -phase);
                }
                acc * g.cell_volume()
            })
            .collect()
    }

    fn direct_inverse(s: &SpectrumFunction) -> Vec<Complex64> {
        let g = s.grid();
        let d = g.dim();
        (0..g.len())
            .map(|x_idx| {
                let x = g.point(x_idx);
                let mut acc = c(0.0, 0.0);
                for (m, v) in s.coefficients().iter().enumerate() {
                    let xi = g.frequency(m);
                    let phase: f64 = (0..d).map(|a| xi[a] * x[a]).sum();
                    acc += v * Complex64::from_polar(1.0, phase);
                }
                acc / g.volume()
            })
            .collect()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(0, 1.0, 8).is_err());
        assert!(TorusGrid::new(4, 1.0, 8).is_err());
        assert!(TorusGrid::new(1, 0.0, 8).is_err());
        assert!(TorusGrid::new(1, 1.0, 12).is_err());
        assert!(TorusGrid::new(1, 1.0, 4).is_err());
        assert!(TorusGrid::with_cap(3, 1.0, 64, 1 << 12).is_err());
        assert!(TorusGrid::new(3, 1.0, 64).is_ok());
    }

    #[test]
    fn lattice_layout() {
        let g = TorusGrid::new(1, 2.0 * PI, 8).unwrap();
        let ms: Vec<i64> = (0..8).map(|i| g.lattice_vector(i)[0]).collect();
        assert_eq!(ms, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.lattice_slot(&[-4]), Some(4));
        assert_eq!(g.lattice_slot(&[4]), None);
        let g2 = TorusGrid::new(2, 1.0, 8).unwrap();
        for idx in 0..g2.len() {
            let m = g2.lattice_vector(idx);
            assert_eq!(g2.lattice_slot(&m[..2]), Some(idx));
        }
    }

    #[test]
    fn constant_transforms_to_zero_mode() {
        let g = TorusGrid::new(1, 2.0 * PI, 8).unwrap();
        let f = g.sample(|_| c(1.0, 0.0));
        let s = f.forward_transform();
        assert_relative_eq!(s.coefficients()[0].re, 2.0 * PI, epsilon = 1e-13);
        for v in &s.coefficients()[1..] {
            assert!(v.norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_transform() {
        let g = TorusGrid::new(1, 2.0 * PI, 8).unwrap();
        let f = g.sample(|x| Complex64::from_polar(1.0, x[0]));
        let s = f.forward_transform();
        for (idx, v) in s.coefficients().iter().enumerate() {
            let expected = if idx == 1 { 2.0 * PI } else { 0.0 };
            assert!((v - c(expected, 0.0)).norm() < 1e-12, "slot {idx}: {v}");
        }
    }

    #[test]
    fn matches_direct_dft_and_parseval() {
        for (dim, n) in [(1, 64), (2, 8), (3, 8)] {
            let g = TorusGrid::new(dim, 3.7, n).unwrap();
            let f = random_function(g, 11 + dim as u64);
            let s = f.forward_transform();
            let oracle = direct_forward(&f);
            let scale = oracle.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in s.coefficients().iter().zip(&oracle) {
                assert!((a - b).norm() <= 1e-12 * scale);
            }
            let physical = f.lp_norm(2.0).unwrap().powi(2);
            assert_relative_eq!(physical, s.energy(), max_relative = 1e-12);

            let back = direct_inverse(&s);
            for (a, b) in f.values().iter().zip(&back) {
                assert!((a - b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_and_parseval_on_many_seeds() {
        let g = TorusGrid::new(2, 2.0 * PI, 32).unwrap();
        for seed in 0..100 {
            let f = random_function(g, seed);
            let s = f.forward_transform();
            let back = s.inverse_transform();
            let norm = f.lp_norm(2.0).unwrap();
            let err = back.add(&f.scaled(c(-1.0, 0.0))).unwrap().lp_norm(2.0).unwrap();
            assert!(err <= 1e-12 * norm);
            assert_relative_eq!(norm * norm, s.energy(), max_relative = 1e-12);
        }
    }

    #[test]
    fn single_coefficient_inverts_to_plane_wave() {
        let g = TorusGrid::new(2, 3.0, 16).unwrap();
        let m = [2i64, -3];
        let mut s = SpectrumFunction::zeros(g);
        let value = c(0.5, -1.25);
        s.coefficients_mut()[g.lattice_slot(&m).unwrap()] = value;
        let f = s.inverse_transform();
        let unit = g.frequency_unit();
        for (idx, v) in f.values().iter().enumerate() {
            let x = g.point(idx);
            let phase = unit * (m[0] as f64 * x[0] + m[1] as f64 * x[1]);
            let expected = value * Complex64::from_polar(1.0, phase) / g.volume();
            assert!((v - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let g = TorusGrid::new(2, 1.5, 16).unwrap();
        let f = g.sample(|_| c(-3.0, 4.0));
        for p in [0.6, 1.0, 2.0, 3.5] {
            assert_relative_eq!(f.lp_norm(p).unwrap(), 5.0 * g.volume().powf(1.0 / p), max_relative = 1e-13);
        }
        let mut values = vec![c(0.0, 0.0); g.len()];
        values[37] = c(1.0, 0.0);
        let spike = GridFunction::new(g, values).unwrap();
        assert_relative_eq!(spike.lp_norm(1.0).unwrap(), g.cell_volume(), max_relative = 1e-15);
        assert!(f.lp_norm(0.0).is_err());
        assert!(f.lp_norm(-1.0).is_err());
    }

    #[test]
    fn lp_norm_triangle_and_reverse_minkowski() {
        let g = TorusGrid::new(1, 2.0 * PI, 64).unwrap();
        for seed in 0..20 {
            let f = random_function(g, 3 * seed);
            let h = random_function(g, 3 * seed + 1);
            let sum = f.add(&h).unwrap();
            for p in [1.0, 1.5, 2.0, 4.0] {
                assert!(sum.lp_norm(p).unwrap() <= f.lp_norm(p).unwrap() + h.lp_norm(p).unwrap() + 1e-12);
            }
            let fa = GridFunction::from_real(g, &f.values().iter().map(|v| v.norm()).collect::<Vec<_>>()).unwrap();
            let ha = GridFunction::from_real(g, &h.values().iter().map(|v| v.norm()).collect::<Vec<_>>()).unwrap();
            let s = fa.add(&ha).unwrap();
            for p in [0.55, 0.75, 0.9] {
                assert!(s.lp_norm(p).unwrap() + 1e-12 >= fa.lp_norm(p).unwrap() + ha.lp_norm(p).unwrap());
            }
        }
    }

    #[test]
    fn apply_symbol_examples() {
        let g = TorusGrid::new(1, 2.0 * PI, 32).unwrap();
        let f = g.sample(|x| c(2.5, 0.0) + Complex64::from_polar(1.0, x[0]));
        let id = f.apply_symbol(|_| c(1.0, 0.0));
        for (a, b) in id.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-14);
        }
        let mean = f.apply_symbol(|xi| if xi[0] == 0.0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        for v in mean.values() {
            assert!((v - c(2.5, 0.0)).norm() < 1e-14);
        }
        let g2 = TorusGrid::new(2, 2.0 * PI, 16).unwrap();
        let wave = g2.plane_wave(&[3, -1]).unwrap();
        let lap = wave.apply_symbol(|xi| c(xi.iter().map(|v| v * v).sum(), 0.0));
        for (a, b) in lap.values().iter().zip(wave.values()) {
            assert!((a - b * 10.0).norm() < 1e-13);
        }
    }

    #[test]
    fn kinetic_form_examples() {
        let g = TorusGrid::new(2, 3.0, 16).unwrap();
        let wave = g.sample(|x| Complex64::from_polar(1.0, g.frequency_unit() * (2.0 * x[0] + x[1])));
        let xi_sq = 5.0 * g.frequency_unit().powi(2);
        assert_relative_eq!(wave.kinetic_form(1.0).unwrap(), xi_sq * g.volume(), max_relative = 1e-12);
        let constant = g.sample(|_| c(1.0, 0.0));
        assert!(constant.kinetic_form(1.0).unwrap().abs() < 1e-20);
        assert_relative_eq!(constant.kinetic_form(0.0).unwrap(), g.volume(), max_relative = 1e-12);
        assert!(matches!(constant.kinetic_form(-0.5), Err(LabError::ZeroModeSingularity(_))));
        assert_relative_eq!(wave.kinetic_form(-0.5).unwrap(), g.volume() / xi_sq.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn kinetic_form_matches_finite_differences() {
        // Band-limited to |m| <= K; the centered difference has symbol sin(ξh)/h,
        // so the energies differ by at most ~ (ξ_K h)^2 / 3 relative.
        let g = TorusGrid::new(1, 2.0 * PI, 256).unwrap();
        let k_max = 6i64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = SpectrumFunction::zeros(g);
        for m in -k_max..=k_max {
            if m != 0 {
                let slot = g.lattice_slot(&[m]).unwrap();
                s.coefficients_mut()[slot] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let u = s.inverse_transform();
        let n = g.points_per_axis();
        let h = g.spacing();
        let fd: f64 = (0..n)
            .map(|i| {
                let d = (u.values()[(i + 1) % n] - u.values()[(i + n - 1) % n]) / (2.0 * h);
                d.norm_sqr()
            })
            .sum::<f64>()
            * h;
        let exact = u.kinetic_form(1.0).unwrap();
        let bound = (k_max as f64 * g.frequency_unit() * h).powi(2) / 3.0;
        assert!((exact - fd).abs() / exact <= bound, "{exact} vs {fd}");
        assert!(exact >= fd);
    }
}

//! Uniform periodic lattice on the unit torus [0,1)^n and the sampled fields
//! that live on it.
//!
//! Points are stored row-major: axis 0 varies slowest. Differentiation is
//! pseudo-spectral by default (discrete Fourier transform with the Nyquist
//! mode removed from odd derivatives); a fourth-order central difference
//! stencil is kept for cross-validation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Vector2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, ZERO3};

pub type Spinor = Vector2<Complex64>;

/// Uniform lattice with `res` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    res: usize,
}

impl Grid {
    pub fn new(n: usize, res: usize) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        if res < 8 || !res.is_power_of_two() {
            return Err(Error::BadResolution(res));
        }
        Ok(Self { n, res })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn h(&self) -> f64 {
        1.0 / self.res as f64
    }

    /// Number of lattice points, res^n.
    pub fn len(&self) -> usize {
        self.res.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.n as i32)
    }

    pub fn multi_index(&self, p: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rem = p;
        for axis in (0..self.n).rev() {
            idx[axis] = rem % self.res;
            rem /= self.res;
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        (0..self.n).fold(0, |acc, axis| acc * self.res + idx[axis] % self.res)
    }

    pub fn position(&self, p: usize) -> [f64; 3] {
        let idx = self.multi_index(p);
        let mut x = [0.0; 3];
        for axis in 0..self.n {
            x[axis] = idx[axis] as f64 * self.h();
        }
        x
    }

    /// Signed integer wavenumber of every point along every axis.
    pub fn wavenumber(&self, p: usize, axis: usize) -> i64 {
        let j = self.multi_index(p)[axis] as i64;
        let res = self.res as i64;
        if j <= res / 2 {
            j
        } else {
            j - res
        }
    }

    fn is_nyquist(&self, p: usize, axis: usize) -> bool {
        self.multi_index(p)[axis] == self.res / 2
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.n {
            return Err(Error::AxisOutOfRange { axis, n: self.n });
        }
        Ok(())
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Differentiation scheme for [`partial_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Spectral,
    Fd4,
}

// ---------------------------------------------------------------------------
// Transforms

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(res: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(res)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(res),
                inverse: planner.plan_fft_inverse(res),
            })
        })
        .clone()
}

fn transform_axes(grid: &Grid, data: &mut [Complex64], fft: &dyn Fft<f64>) {
    let res = grid.res;
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); res];
    for axis in 0..grid.n {
        let stride = res.pow((grid.n - 1 - axis) as u32);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let block = res * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

pub(crate) fn forward_transform(grid: &Grid, data: &mut [Complex64]) {
    let p = plans(grid.res);
    transform_axes(grid, data, p.forward.as_ref());
}

pub(crate) fn inverse_transform(grid: &Grid, data: &mut [Complex64]) {
    let p = plans(grid.res);
    transform_axes(grid, data, p.inverse.as_ref());
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Zeroes every Fourier mode that sits on a Nyquist plane. Those modes are
/// annihilated by the spectral derivative, so they pollute the kernel of any
/// spectrally discretized operator.
pub(crate) fn remove_nyquist(grid: &Grid, data: &mut [Complex64]) {
    forward_transform(grid, data);
    for (p, v) in data.iter_mut().enumerate() {
        if (0..grid.n).any(|axis| grid.is_nyquist(p, axis)) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse_transform(grid, data);
}

fn derivative_multiplier(grid: &Grid, p: usize, axis: usize) -> Complex64 {
    if grid.is_nyquist(p, axis) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, 2.0 * PI * grid.wavenumber(p, axis) as f64)
    }
}

fn spectral_derivatives_from_spectrum(
    grid: &Grid,
    spectrum: &[Complex64],
    axes: &[&[usize]],
) -> Vec<Vec<Complex64>> {
    axes.iter()
        .map(|axes| {
            let mut out: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(p, &c)| {
                    axes.iter()
                        .fold(c, |acc, &a| acc * derivative_multiplier(grid, p, a))
                })
                .collect();
            inverse_transform(grid, &mut out);
            out
        })
        .collect()
}

fn fd4_line_derivative(grid: &Grid, data: &[Complex64], axis: usize) -> Vec<Complex64> {
    let inv = 1.0 / (12.0 * grid.h());
    (0..data.len())
        .map(|p| {
            let idx = grid.multi_index(p);
            let shifted = |s: i64| {
                let mut j = idx;
                j[axis] = ((idx[axis] as i64 + s).rem_euclid(grid.res as i64)) as usize;
                data[grid.flat_index(j)]
            };
            (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) * inv
        })
        .collect()
}

/// ∂_axis of complex sampled data.
pub fn derivative_complex(
    grid: &Grid,
    data: &[Complex64],
    axis: usize,
    scheme: Scheme,
) -> Result<Vec<Complex64>> {
    grid.check_axis(axis)?;
    if data.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    Ok(match scheme {
        Scheme::Spectral => {
            let mut spec = data.to_vec();
            forward_transform(grid, &mut spec);
            spectral_derivatives_from_spectrum(grid, &spec, &[&[axis]]).remove(0)
        }
        Scheme::Fd4 => fd4_line_derivative(grid, data, axis),
    })
}

fn to_complex(data: &[f64]) -> Vec<Complex64> {
    data.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// ∂_axis of real sampled data.
pub fn derivative_real(grid: &Grid, data: &[f64], axis: usize, scheme: Scheme) -> Result<Vec<f64>> {
    Ok(derivative_complex(grid, &to_complex(data), axis, scheme)?
        .into_iter()
        .map(|c| c.re)
        .collect())
}

/// All first partials of complex data with a single forward transform.
pub fn gradient_complex(grid: &Grid, data: &[Complex64]) -> Vec<Vec<Complex64>> {
    let mut spec = data.to_vec();
    forward_transform(grid, &mut spec);
    let axes: Vec<[usize; 1]> = (0..grid.n).map(|a| [a]).collect();
    let refs: Vec<&[usize]> = axes.iter().map(|a| &a[..]).collect();
    spectral_derivatives_from_spectrum(grid, &spec, &refs)
}

/// All first partials of two real arrays at once, packed as real and
/// imaginary parts of one complex transform.
fn gradient_real_pair(grid: &Grid, a: &[f64], b: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let packed: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    let d = gradient_complex(grid, &packed);
    let re = d.iter().map(|v| v.iter().map(|c| c.re).collect()).collect();
    let im = d.iter().map(|v| v.iter().map(|c| c.im).collect()).collect();
    (re, im)
}

/// All first partials of real data; `out[axis][point]`.
pub fn gradient_real(grid: &Grid, data: &[f64]) -> Vec<Vec<f64>> {
    gradient_complex(grid, &to_complex(data))
        .into_iter()
        .map(|v| v.into_iter().map(|c| c.re).collect())
        .collect()
}

/// First partials of many real arrays; `out[array][axis][point]`.
pub fn gradients_real(grid: &Grid, arrays: &[&[f64]]) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(arrays.len());
    let mut chunks = arrays.chunks(2);
    for chunk in &mut chunks {
        if chunk.len() == 2 {
            let (a, b) = gradient_real_pair(grid, chunk[0], chunk[1]);
            out.push(a);
            out.push(b);
        } else {
            out.push(gradient_real(grid, chunk[0]));
        }
    }
    out
}

/// Second partials ∂_i∂_j of real data; `out[i * n + j][point]`.
pub fn second_derivatives_real(grid: &Grid, data: &[f64]) -> Vec<Vec<f64>> {
    let n = grid.n;
    let mut spec = to_complex(data);
    forward_transform(grid, &mut spec);
    let pairs: Vec<[usize; 2]> = (0..n * n).map(|k| [k / n, k % n]).collect();
    let refs: Vec<&[usize]> = pairs.iter().map(|a| &a[..]).collect();
    spectral_derivatives_from_spectrum(grid, &spec, &refs)
        .into_iter()
        .map(|v| v.into_iter().map(|c| c.re).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Fields

/// Real scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, fun: impl Fn([f64; 3]) -> f64) -> Self {
        Self {
            grid,
            data: (0..grid.len()).map(|p| fun(grid.position(p))).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn map(&self, fun: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&x| fun(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, fun: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| fun(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Root-mean-square over grid points.
    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|x| x * x).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Real covariant (or, for vector fields, contravariant) tensor field of
/// arbitrary rank in coordinate components.
///
/// Component `(i_1, …, i_r)` is stored at flat index Σ i_k n^{r-1-k}.
/// Rank-1 fields are used both for vector fields X^i and for 1-forms α_i; the
/// variance is stated where each field is produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    rank: usize,
    pub comps: Vec<Vec<f64>>,
}

pub type VectorField = TensorField;
pub type Sym2Field = TensorField;
pub type ThreeTensorField = TensorField;

impl TensorField {
    pub fn zeros(grid: Grid, rank: usize) -> Self {
        let count = grid.n.pow(rank as u32);
        Self {
            grid,
            rank,
            comps: vec![vec![0.0; grid.len()]; count],
        }
    }

    pub fn from_comps(grid: Grid, rank: usize, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.n.pow(rank as u32) || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, rank, comps })
    }

    /// Flat metric δ.
    pub fn identity_metric(grid: Grid) -> Self {
        Self::constant_matrix(grid, &linalg::identity(grid.n))
    }

    pub fn constant_matrix(grid: Grid, m: &Mat3) -> Self {
        let mut out = Self::zeros(grid, 2);
        for p in 0..grid.len() {
            out.set_mat(p, m);
        }
        out
    }

    pub fn constant_vector(grid: Grid, v: &[f64]) -> Self {
        let mut out = Self::zeros(grid, 1);
        for (i, c) in out.comps.iter_mut().enumerate() {
            c.fill(v[i]);
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.grid.n + i)
    }

    pub fn comp(&self, idx: &[usize]) -> &[f64] {
        &self.comps[self.index(idx)]
    }

    pub fn comp_mut(&mut self, idx: &[usize]) -> &mut Vec<f64> {
        let k = self.index(idx);
        &mut self.comps[k]
    }

    /// Rank-2 value at a point.
    pub fn mat(&self, p: usize) -> Mat3 {
        debug_assert_eq!(self.rank, 2);
        let n = self.grid.n;
        let mut m = ZERO3;
        for i in 0..n {
            for j in 0..n {
                m[i][j] = self.comps[i * n + j][p];
            }
        }
        m
    }

    pub fn set_mat(&mut self, p: usize, m: &Mat3) {
        debug_assert_eq!(self.rank, 2);
        let n = self.grid.n;
        for i in 0..n {
            for j in 0..n {
                self.comps[i * n + j][p] = m[i][j];
            }
        }
    }

    /// Rank-1 value at a point.
    pub fn vec_at(&self, p: usize) -> [f64; 3] {
        debug_assert_eq!(self.rank, 1);
        let mut v = [0.0; 3];
        for (i, c) in self.comps.iter().enumerate() {
            v[i] = c[p];
        }
        v
    }

    pub fn set_vec(&mut self, p: usize, v: &[f64]) {
        for (i, c) in self.comps.iter_mut().enumerate() {
            c[p] = v[i];
        }
    }

    /// Symmetric part of a rank-2 field.
    pub fn symmetrized(&self) -> Self {
        let n = self.grid.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg: Vec<f64> = self.comps[i * n + j]
                    .iter()
                    .zip(&self.comps[j * n + i])
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                out.comps[i * n + j] = avg.clone();
                out.comps[j * n + i] = avg;
            }
        }
        out
    }

    /// Largest |T_ij − T_ji| over the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                for (a, b) in self.comps[i * n + j].iter().zip(&self.comps[j * n + i]) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Root-mean-square of the Euclidean component norm.
    pub fn rms(&self) -> f64 {
        let total: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|x| x * x).sum();
        (total / self.grid.len() as f64).sqrt()
    }

    /// Pointwise product φ·T.
    pub fn times_scalar(&self, phi: &ScalarField) -> Self {
        let mut out = self.clone();
        for c in &mut out.comps {
            for (x, &f) in c.iter_mut().zip(&phi.data) {
                *x *= f;
            }
        }
        out
    }

    pub fn map_comps(&self, fun: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            rank: self.rank,
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|&x| fun(x)).collect())
                .collect(),
        }
    }
}

/// Complex spinor field with m = 2 components (n ∈ {2, 3}).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: Grid,
    pub comps: [Vec<Complex64>; 2],
}

impl SpinorField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, Spinor::zeros())
    }

    pub fn constant(grid: Grid, value: Spinor) -> Self {
        Self {
            grid,
            comps: [vec![value[0]; grid.len()], vec![value[1]; grid.len()]],
        }
    }

    pub fn from_comps(grid: Grid, comps: [Vec<Complex64>; 2]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, comps })
    }

    pub fn from_fn(grid: Grid, fun: impl Fn([f64; 3]) -> Spinor) -> Self {
        let mut out = Self::zeros(grid);
        for p in 0..grid.len() {
            out.set(p, &fun(grid.position(p)));
        }
        out
    }

    pub fn from_fn_indexed(grid: Grid, fun: impl Fn(usize) -> Spinor) -> Self {
        let mut out = Self::zeros(grid);
        for p in 0..grid.len() {
            out.set(p, &fun(p));
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, p: usize) -> Spinor {
        Spinor::new(self.comps[0][p], self.comps[1][p])
    }

    pub fn set(&mut self, p: usize, v: &Spinor) {
        self.comps[0][p] = v[0];
        self.comps[1][p] = v[1];
    }

    /// Pointwise |ψ|².
    pub fn norm_sq(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: (0..self.grid.len()).map(|p| self.at(p).norm_squared()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |m, p| m.max(self.at(p).norm()))
    }

    /// Root-mean-square of the pointwise norm.
    pub fn rms(&self) -> f64 {
        (self.norm_sq().data.iter().sum::<f64>() / self.grid.len() as f64).sqrt()
    }

    pub fn map_points(&self, fun: impl Fn(usize, Spinor) -> Spinor) -> Self {
        let mut out = self.clone();
        for p in 0..self.grid.len() {
            out.set(p, &fun(p, self.at(p)));
        }
        out
    }
}

/// Real-linear combination `a·self + b·other` for any field type.
pub trait LinearField: Sized + Clone {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self;

    fn scaled(&self, a: f64) -> Self {
        self.combine(a, self, 0.0)
    }

    /// `self + b·other`.
    fn plus(&self, other: &Self, b: f64) -> Self {
        self.combine(1.0, other, b)
    }
}

fn combine_vec(x: &[f64], a: f64, y: &[f64], b: f64) -> Vec<f64> {
    x.iter().zip(y).map(|(&u, &v)| a * u + b * v).collect()
}

impl LinearField for ScalarField {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            grid: self.grid,
            data: combine_vec(&self.data, a, &other.data, b),
        }
    }
}

impl LinearField for TensorField {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            grid: self.grid,
            rank: self.rank,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(x, y)| combine_vec(x, a, y, b))
                .collect(),
        }
    }
}

impl LinearField for SpinorField {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let c = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(&u, &v)| u * a + v * b).collect()
        };
        Self {
            grid: self.grid,
            comps: [c(&self.comps[0], &other.comps[0]), c(&self.comps[1], &other.comps[1])],
        }
    }
}

/// Fields that can be differentiated componentwise.
pub trait Differentiable: Sized {
    fn partial(&self, axis: usize, scheme: Scheme) -> Result<Self>;
}

impl Differentiable for ScalarField {
    fn partial(&self, axis: usize, scheme: Scheme) -> Result<Self> {
        Ok(Self {
            grid: self.grid,
            data: derivative_real(&self.grid, &self.data, axis, scheme)?,
        })
    }
}

impl Differentiable for TensorField {
    fn partial(&self, axis: usize, scheme: Scheme) -> Result<Self> {
        let comps = self
            .comps
            .iter()
            .map(|c| derivative_real(&self.grid, c, axis, scheme))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid,
            rank: self.rank,
            comps,
        })
    }
}

impl Differentiable for SpinorField {
    fn partial(&self, axis: usize, scheme: Scheme) -> Result<Self> {
        Ok(Self {
            grid: self.grid,
            comps: [
                derivative_complex(&self.grid, &self.comps[0], axis, scheme)?,
                derivative_complex(&self.grid, &self.comps[1], axis, scheme)?,
            ],
        })
    }
}

/// Periodic ∂_axis of any field, componentwise.
pub fn partial_derivative<F: Differentiable>(field: &F, axis: usize, scheme: Scheme) -> Result<F> {
    field.partial(axis, scheme)
}

// ---------------------------------------------------------------------------
// Measure and quadrature

/// Positive density (4πτ)^{-n/2} e^{-f} √det g per point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureField {
    grid: Grid,
    pub density: Vec<f64>,
}

impl MeasureField {
    pub fn new(grid: Grid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(p) = density.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "measure density {} at point {p} is not positive",
                density[p]
            )));
        }
        Ok(Self { grid, density })
    }

    /// Unit density (flat δ, f = 0, τ = 1/4π).
    pub fn unit(grid: Grid) -> Self {
        Self {
            grid,
            density: vec![1.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Rectangle-rule quadrature h^n Σ values·density.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        let s: f64 = values.iter().zip(&self.density).map(|(v, d)| v * d).sum();
        s * self.grid.cell_volume()
    }

    /// ∫ dΩ.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

pub fn integrate(phi: &ScalarField, m: &MeasureField) -> Result<f64> {
    phi.grid.ensure_same(&m.grid)?;
    Ok(m.integrate_values(&phi.data))
}

/// dΩ = (4πτ)^{-n/2} e^{-f} dμ_g.
pub fn weighted_measure(g: &Sym2Field, f: &ScalarField, tau: f64) -> Result<MeasureField> {
    g.grid.ensure_same(&f.grid)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let n = g.grid.n;
    let norm = (4.0 * PI * tau).powf(-(n as f64) / 2.0);
    let density = (0..g.grid.len())
        .map(|p| {
            let parts = linalg::spd_parts(&g.mat(p), n, p)?;
            Ok(norm * (-f.data[p]).exp() * parts.det.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureField {
        grid: g.grid,
        density,
    })
}

/// Flat quadrature h^n Σ values.
pub fn flat_integral(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(4, 16).is_err());
        assert!(Grid::new(2, 12).is_err());
        assert!(Grid::new(2, 4).is_err());
        let g = Grid::new(3, 8).unwrap();
        assert_eq!(g.len(), 512);
        for p in [0, 17, 511] {
            assert_eq!(g.flat_index(g.multi_index(p)), p);
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let grid = Grid::new(2, 64).unwrap();
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let d = partial_derivative(&f, 0, Scheme::Spectral).unwrap();
        let err = (0..grid.len())
            .map(|p| (d.data[p] - 2.0 * PI * (2.0 * PI * grid.position(p)[0]).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn constant_has_zero_derivative() {
        let grid = Grid::new(3, 8).unwrap();
        let f = ScalarField::constant(grid, 3.7);
        for scheme in [Scheme::Spectral, Scheme::Fd4] {
            for axis in 0..3 {
                assert!(partial_derivative(&f, axis, scheme).unwrap().max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn axis_out_of_range() {
        let grid = Grid::new(2, 8).unwrap();
        let f = ScalarField::zeros(grid);
        assert!(matches!(
            partial_derivative(&f, 2, Scheme::Spectral),
            Err(Error::AxisOutOfRange { axis: 2, n: 2 })
        ));
    }

    #[test]
    fn gradient_matches_single_axis() {
        let grid = Grid::new(3, 8).unwrap();
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * (x[0] + 2.0 * x[2])).cos() + x[1].sin() * 0.0);
        let grad = gradient_real(&grid, &f.data);
        for axis in 0..3 {
            let single = derivative_real(&grid, &f.data, axis, Scheme::Spectral).unwrap();
            for p in 0..grid.len() {
                assert!((grad[axis][p] - single[p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measure_examples() {
        let grid = Grid::new(2, 16).unwrap();
        let flat = TensorField::identity_metric(grid);
        let f0 = ScalarField::zeros(grid);
        let m = weighted_measure(&flat, &f0, 1.0 / (4.0 * PI)).unwrap();
        assert!(m.density.iter().all(|d| (d - 1.0).abs() < 1e-14));
        assert!((integrate(&ScalarField::constant(grid, 1.0), &m).unwrap() - 1.0).abs() < 1e-14);
        let s = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        assert!(integrate(&s, &m).unwrap().abs() < 1e-14);

        let tau = 0.3;
        let m = weighted_measure(&flat, &ScalarField::constant(grid, 0.7), tau).unwrap();
        let expect = (4.0 * PI * tau).powi(-1) * (-0.7f64).exp();
        assert!(m.density.iter().all(|d| (d - expect).abs() < 1e-14));

        let g = TensorField::constant_matrix(grid, &[[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
        let m = weighted_measure(&g, &f0, tau).unwrap();
        let expect = 2.0 / (4.0 * PI * tau);
        assert!(m.density.iter().all(|d| (d - expect).abs() < 1e-13));
    }

    #[test]
    fn measure_rejects_bad_metric() {
        let grid = Grid::new(2, 8).unwrap();
        let g = TensorField::constant_matrix(grid, &[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0; 3]]);
        assert!(weighted_measure(&g, &ScalarField::zeros(grid), 1.0).is_err());
    }
}

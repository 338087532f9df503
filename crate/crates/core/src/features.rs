//! Covariance CSI features and the Log-Euclidean dissimilarity matrix.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::ChannelVector;
use crate::error::{invalid, Result};
use crate::seed;

/// Relative diagonal loading applied after the sample covariance.
pub const DEFAULT_LOADING: f64 = 1e-6;
pub const DEFAULT_SNAPSHOTS: usize = 64;
/// Eigenvalues are clamped to this fraction of the largest one before the log.
const EIG_FLOOR: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

/// Hermitian positive definite `N_BS x N_BS` covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFeature(pub DMatrix<Complex64>);

impl CovarianceFeature {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    pub snapshots: usize,
    pub loading: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            snapshots: DEFAULT_SNAPSHOTS,
            loading: DEFAULT_LOADING,
        }
    }
}

/// Sample covariance of `T` noisy snapshots `y_t = h s_t + n_t`, normalized
/// by `T * tx_power` and diagonally loaded with `loading * tr(R) / N`.
///
/// Symbols are QPSK with `|s_t|^2 = tx_power`; noise entries are circular
/// Gaussian with variance `noise_power`.
pub fn estimate_covariance(
    channel: &ChannelVector,
    noise_power: f64,
    tx_power: f64,
    params: &FeatureParams,
    seed: u64,
) -> Result<CovarianceFeature> {
    if params.snapshots < 1 {
        return Err(invalid("snapshot count must be at least 1"));
    }
    if !(tx_power > 0.0) || !(noise_power >= 0.0) {
        return Err(invalid("tx power must be positive and noise power nonnegative"));
    }
    let n = channel.len();
    let h = &channel.0;
    let amp = tx_power.sqrt();
    let noise_std = (noise_power / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    let mut y = nalgebra::DVector::<Complex64>::zeros(n);
    for _ in 0..params.snapshots {
        let q: u32 = rng.random_range(0..4);
        let s = Complex64::from_polar(amp, FRAC_PI_4 * (2 * q + 1) as f64);
        for (yi, hi) in y.iter_mut().zip(h.iter()) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *yi = hi * s + Complex64::new(re, im) * noise_std;
        }
        acc.ger(Complex64::new(1.0, 0.0), &y, &y.conjugate(), Complex64::new(1.0, 0.0));
    }
    acc /= Complex64::from(params.snapshots as f64 * tx_power);
    load_diagonal(&mut acc, params.loading);
    Ok(CovarianceFeature(acc))
}

fn load_diagonal(r: &mut DMatrix<Complex64>, loading: f64) {
    let n = r.nrows();
    let tr: f64 = (0..n).map(|i| r[(i, i)].re).sum();
    let eps = loading * tr / n as f64;
    for i in 0..n {
        r[(i, i)] += Complex64::from(eps);
    }
}

fn check_hermitian(r: &DMatrix<Complex64>) -> Result<()> {
    if !r.is_square() {
        return Err(invalid("covariance must be square"));
    }
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = r.nrows();
    for i in 0..n {
        for j in i..n {
            if (r[(i, j)] - r[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                return Err(invalid(format!("matrix is not Hermitian at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Principal matrix logarithm `U log(Lambda) U^H` via the Hermitian
/// eigendecomposition, eigenvalues clamped to `1e-12 * lambda_max`.
pub fn matrix_log(r: &CovarianceFeature) -> Result<DMatrix<Complex64>> {
    check_hermitian(&r.0)?;
    let eig = SymmetricEigen::new(r.0.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lmax > 0.0) {
        return Err(invalid("matrix is not positive definite"));
    }
    let floor = EIG_FLOOR * lmax;
    let u = &eig.eigenvectors;
    let n = u.nrows();
    let mut scaled = u.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let l = lam.max(floor).ln();
        scaled.column_mut(k).scale_mut(l);
    }
    let mut out = scaled * u.adjoint();
    // exact Hermitian symmetry
    for i in 0..n {
        out[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    Ok(out)
}

fn frobenius_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `|| log R - log R' ||_F`.
pub fn le_distance(r: &CovarianceFeature, r2: &CovarianceFeature) -> Result<f64> {
    if r.dim() != r2.dim() {
        return Err(invalid(format!("dimension mismatch: {} vs {}", r.dim(), r2.dim())));
    }
    Ok(frobenius_diff(&matrix_log(r)?, &matrix_log(r2)?))
}

/// Symmetric, zero-diagonal, nonnegative `N x N` matrix stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Builds from a dense row-major buffer. Asymmetry, nonzero diagonal
    /// or negative entries are rejected.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(invalid(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(invalid("dissimilarity diagonal must be zero"));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !(v >= 0.0) || v != data[j * n + i] {
                    return Err(invalid("dissimilarities must be symmetric and nonnegative"));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Builds from the strict upper triangle in row-major order.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(invalid("wrong upper-triangle length"));
        }
        let mut data = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("length checked");
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::from_dense(n, data)
    }

    /// Euclidean distances between points.
    pub fn euclidean<const D: usize>(points: &[[f64; D]]) -> Self {
        let n = points.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }

    /// Sub-matrix over `indices`, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        Self { n: m, data }
    }
}

/// Pairwise LE distances with each matrix log computed once.
pub fn dissimilarity_matrix(features: &[CovarianceFeature]) -> Result<DissimilarityMatrix> {
    if features.len() < 2 {
        return Err(invalid("need at least two features"));
    }
    let dim = features[0].dim();
    if features.iter().any(|f| f.dim() != dim) {
        return Err(invalid("features have mismatched dimensions"));
    }
    let logs = features.par_iter().map(matrix_log).collect::<Result<Vec<_>>>()?;
    let n = logs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| frobenius_diff(&logs[i], &logs[j])).collect())
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(DissimilarityMatrix { n, data })
}

/// Covariance features for a batch of channels; point `u` draws its noise
/// from `seed::derive(seed, [NOISE, u])`.
pub fn estimate_features(
    channels: &[ChannelVector],
    noise_power: f64,
    tx_power: f64,
    params: &FeatureParams,
    seed: u64,
) -> Result<Vec<CovarianceFeature>> {
    channels
        .par_iter()
        .enumerate()
        .map(|(u, h)| {
            estimate_covariance(h, noise_power, tx_power, params, seed::derive(seed, &[seed::tag::NOISE, u as u64]))
        })
        .collect()
}

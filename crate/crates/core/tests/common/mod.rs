//! Shared fixtures and oracles for the integration tests.
#![allow(dead_code)]

use ems_charting::features::{CovarianceFeature, DissimilarityMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ems_charting::seed::rng(seed)
}

pub fn complex_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// `A A^H / n + c I` with a random condition spread.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> CovarianceFeature {
    let a = complex_gaussian(rng, n, n);
    let c = 10f64.powf(rng.random_range(-3.0..0.0));
    let r = &a * a.adjoint() / Complex64::from(n as f64) + DMatrix::identity(n, n) * Complex64::from(c);
    CovarianceFeature((&r + r.adjoint()) * Complex64::from(0.5))
}

/// Random unitary from the QR factorization of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    complex_gaussian(rng, n, n).qr().q()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series;
/// independent of any eigendecomposition.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / Complex64::from(2f64.powi(s));
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / Complex64::from(k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn frobenius(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random_range(0.0..scale), rng.random_range(0.0..scale)]).collect()
}

pub fn random_dissimilarity(rng: &mut ChaCha8Rng, n: usize) -> DissimilarityMatrix {
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for _ in 0..n * (n - 1) / 2 {
        upper.push(rng.random_range(0.1..5.0));
    }
    DissimilarityMatrix::from_upper(n, &upper).unwrap()
}

/// Two small panels lighting a 5 x 5 grid; cheap enough for full searches.
pub const TINY: &str = r#"{
  "carrier_hz": 30e9,
  "bs": {"position": [0.0, 0.0, 8.5], "array": {"rows": 2, "cols": 4, "spacing_wavelengths": 0.5, "normal": [1.0, 1.0, 0.0]}},
  "panels": [
    {"center": [12.0, -2.0, 5.5], "normal": [-0.3, 1.0, 0.0], "rows": 2, "cols": 11, "spacing_wavelengths": 0.25},
    {"center": [-2.0, 12.0, 5.5], "normal": [1.0, -0.3, 0.0], "rows": 2, "cols": 11, "spacing_wavelengths": 0.25}
  ],
  "blockers": [{"min": [4.0, 4.0, 0.0], "max": [6.0, 6.0, 20.0]}],
  "test_points": {"grid": {"min": [3.0, 3.0], "max": [11.0, 11.0], "step": 2.0, "height": 1.5}},
  "tx_power_dbm": 23.0, "noise_power_dbm": -92.0
}"#;

pub fn brute_ranks(d: &DissimilarityMatrix, u: usize) -> Vec<usize> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).filter(|&v| v != u).collect();
    order.sort_by(|&a, &b| d.get(u, a).partial_cmp(&d.get(u, b)).unwrap().then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, v) in order.into_iter().enumerate() {
        rank[v] = r + 1;
    }
    rank
}

/// Trustworthiness and continuity straight from their definitions.
pub fn brute_tw_ct(primary: &DissimilarityMatrix, latent: &DissimilarityMatrix, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = primary.len();
    let e = 2.0 / (k as f64 * (2 * n - 3 * k - 1) as f64);
    let (mut tw, mut ct) = (Vec::new(), Vec::new());
    for u in 0..n {
        let rp = brute_ranks(primary, u);
        let rl = brute_ranks(latent, u);
        let mut intr = 0i64;
        let mut extr = 0i64;
        for v in 0..n {
            if v == u {
                continue;
            }
            if rl[v] <= k && rp[v] > k {
                intr += rp[v] as i64 - k as i64;
            }
            if rp[v] <= k && rl[v] > k {
                extr += rl[v] as i64 - k as i64;
            }
        }
        tw.push(1.0 - e * intr as f64);
        ct.push(1.0 - e * extr as f64);
    }
    (tw, ct)
}

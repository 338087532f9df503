//! Semi-supervised t-SNE.
//!
//! Gaussian affinities are calibrated per point to a target perplexity over
//! the dissimilarity matrix, the latent kernel is Student-t with one degree
//! of freedom, and the KL objective is minimized by gradient descent with
//! momentum. Anchor points are pinned to their known coordinates after every
//! update, so only unlabeled points move.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::features::DissimilarityMatrix;
use crate::seed;

const PERPLEXITY_TOL: f64 = 1e-4;
const BISECTION_STEPS: usize = 100;
const Q_FLOOR: f64 = 1e-12;

/// Joint affinities `p_{u,u'}`: symmetric, zero diagonal, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Wraps a dense row-major buffer without validation.
    pub fn from_dense_unchecked(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }
}

/// Row `u` holds the distribution `p_{u'|u}` over `u' != u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinities {
    n: usize,
    data: Vec<f64>,
}

impl ConditionalAffinities {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn from_dense_unchecked(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }
}

/// Latent coordinates, `dim` per point, with anchor flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub is_anchor: Vec<bool>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.is_anchor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_anchor.is_empty()
    }

    pub fn point(&self, u: usize) -> &[f64] {
        &self.coords[u * self.dim..(u + 1) * self.dim]
    }

    /// Embedding with no anchors, for evaluating latent affinities directly.
    pub fn free(dim: usize, coords: Vec<f64>) -> Self {
        let n = coords.len() / dim;
        Self {
            dim,
            coords,
            is_anchor: vec![false; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneParams {
    pub dim: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// `(factor, iterations)`; off when `None`.
    pub early_exaggeration: Option<(f64, usize)>,
    /// Per-point gradient norm cap.
    pub gradient_clip: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            dim: 2,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 100.0,
            momentum: 0.8,
            early_exaggeration: None,
            gradient_clip: 1e3,
            seed: 0,
        }
    }
}

fn row_distribution(row: &[f64], u: usize, sigma: f64, out: &mut [f64]) -> f64 {
    // shift by the smallest off-diagonal squared distance for stability
    let dmin = row
        .iter()
        .enumerate()
        .filter(|&(w, _)| w != u)
        .map(|(_, d)| d * d)
        .fold(f64::INFINITY, f64::min);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut z = 0.0;
    for (w, (o, d)) in out.iter_mut().zip(row).enumerate() {
        *o = if w == u { 0.0 } else { (-(d * d - dmin) * inv).exp() };
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    // entropy in bits
    -out.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

fn check_perplexity(n: usize, perplexity: f64, strict: bool) -> Result<()> {
    let max = n as f64 - 1.0;
    let ok = perplexity > 1.0 && if strict { perplexity < max } else { perplexity <= max };
    if !ok {
        return Err(invalid(format!(
            "perplexity {perplexity} outside (1, {}) for {n} points",
            n as f64 - 1.0
        )));
    }
    Ok(())
}

/// Per-point Gaussian bandwidths matching `perplexity`, by bisection on
/// `log sigma`. Accepts perplexities in `(1, N-1]`; rows whose target is
/// unreachable because of tied distances stop after the bisection budget.
pub fn calibrate_sigmas(d: &DissimilarityMatrix, perplexity: f64) -> Result<Vec<f64>> {
    let n = d.len();
    check_perplexity(n, perplexity, false)?;
    let target = perplexity.log2();
    (0..n)
        .into_par_iter()
        .map(|u| {
            let row = d.row(u);
            let scale = row
                .iter()
                .enumerate()
                .filter(|&(w, v)| w != u && *v > 0.0)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max);
            if scale == 0.0 {
                return Err(Error::DegenerateRow { row: u });
            }
            let mut buf = vec![0.0; n];
            let (mut lo, mut hi) = (scale.ln() - 30.0, scale.ln() + 30.0);
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..BISECTION_STEPS {
                mid = 0.5 * (lo + hi);
                let h = row_distribution(row, u, mid.exp(), &mut buf);
                if (h.exp2() - perplexity).abs() < PERPLEXITY_TOL {
                    break;
                }
                if h > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(mid.exp())
        })
        .collect()
}

/// Gaussian conditionals `p_{u'|u}` with per-row bandwidth `sigmas[u]`.
pub fn conditional_affinities(d: &DissimilarityMatrix, sigmas: &[f64]) -> Result<ConditionalAffinities> {
    let n = d.len();
    if sigmas.len() != n {
        return Err(invalid("one sigma per point required"));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("sigmas must be positive"));
    }
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(u, out)| {
        row_distribution(d.row(u), u, sigmas[u], out);
    });
    Ok(ConditionalAffinities { n, data })
}

/// `p_{u,u'} = (p_{u'|u} + p_{u|u'}) / 2N`.
pub fn symmetrize(c: &ConditionalAffinities) -> AffinityMatrix {
    let n = c.n;
    let mut data = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = (c.get(i, j) + c.get(j, i)) / denom;
        }
    }
    AffinityMatrix { n, data }
}

/// Joint affinities straight from dissimilarities.
pub fn joint_affinities(d: &DissimilarityMatrix, perplexity: f64) -> Result<AffinityMatrix> {
    let sigmas = calibrate_sigmas(d, perplexity)?;
    Ok(symmetrize(&conditional_affinities(d, &sigmas)?))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Student-t affinities `q_{u,u'}` normalized over ordered distinct pairs.
pub fn latent_affinities(z: &Embedding) -> Result<AffinityMatrix> {
    let n = z.len();
    if n < 2 {
        return Err(invalid("need at least two latent points"));
    }
    let mut data = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = 1.0 / (1.0 + sq_dist(z.point(i), z.point(j)));
                data[i * n + j] = w;
                total += w;
            }
        }
    }
    for v in &mut data {
        *v /= total;
    }
    Ok(AffinityMatrix { n, data })
}

/// `sum p log(p / q)` over `p > 0`, `q` floored at `1e-12`.
pub fn kl_objective(p: &AffinityMatrix, q: &AffinityMatrix) -> Result<f64> {
    if p.n != q.n {
        return Err(invalid("affinity shape mismatch"));
    }
    Ok(p.data
        .iter()
        .zip(&q.data)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv.max(Q_FLOOR)).ln())
        .sum())
}

/// Analytic gradient `4 sum (p - q)(z_u - z_u') / (1 + |z_u - z_u'|^2)`.
pub fn kl_gradient(p: &AffinityMatrix, z: &Embedding) -> Result<Vec<f64>> {
    if p.n != z.len() {
        return Err(invalid("affinity/embedding size mismatch"));
    }
    let mut ws = Workspace::new(z.len());
    ws.evaluate(p, 1.0, &z.coords, z.dim);
    Ok(ws.grad)
}

/// Scratch buffers for one objective/gradient evaluation.
struct Workspace {
    w: Vec<f64>,
    row_sums: Vec<f64>,
    grad: Vec<f64>,
    kl_rows: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            w: vec![0.0; n * n],
            row_sums: vec![0.0; n],
            grad: Vec::new(),
            kl_rows: vec![0.0; n],
        }
    }

    /// Fills the gradient (with `p` scaled by `exaggeration`) and returns
    /// the unexaggerated KL objective.
    fn evaluate(&mut self, p: &AffinityMatrix, exaggeration: f64, coords: &[f64], dim: usize) -> f64 {
        let n = p.n;
        self.grad.resize(n * dim, 0.0);
        self.w
            .par_chunks_mut(n)
            .zip(self.row_sums.par_iter_mut())
            .enumerate()
            .for_each(|(u, (wrow, sum))| {
                let zu = &coords[u * dim..(u + 1) * dim];
                let mut s = 0.0;
                for (v, wv) in wrow.iter_mut().enumerate() {
                    *wv = if v == u {
                        0.0
                    } else {
                        1.0 / (1.0 + sq_dist(zu, &coords[v * dim..(v + 1) * dim]))
                    };
                    s += *wv;
                }
                *sum = s;
            });
        let total: f64 = self.row_sums.iter().sum();
        let w = &self.w;
        self.grad
            .par_chunks_mut(dim)
            .zip(self.kl_rows.par_iter_mut())
            .enumerate()
            .for_each(|(u, (g, kl))| {
                g.iter_mut().for_each(|x| *x = 0.0);
                let zu = &coords[u * dim..(u + 1) * dim];
                let mut k = 0.0;
                for v in 0..n {
                    if v == u {
                        continue;
                    }
                    let wv = w[u * n + v];
                    let q = wv / total;
                    let pv = p.data[u * n + v];
                    if pv > 0.0 {
                        k += pv * (pv / q.max(Q_FLOOR)).ln();
                    }
                    let f = 4.0 * (exaggeration * pv - q) * wv;
                    let zv = &coords[v * dim..(v + 1) * dim];
                    for c in 0..dim {
                        g[c] += f * (zu[c] - zv[c]);
                    }
                }
                *kl = k;
            });
        self.kl_rows.iter().sum()
    }
}

/// Result of one semi-supervised t-SNE run.
#[derive(Debug, Clone, PartialEq)]
pub struct StsneResult {
    /// Lowest-objective iterate.
    pub embedding: Embedding,
    /// KL objective before the first update and after every update.
    pub trace: Vec<f64>,
}

impl StsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.trace[0]
    }

    pub fn best_kl(&self) -> f64 {
        self.trace.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn check_anchors(n: usize, anchors: &BTreeMap<usize, Vec<f64>>, dim: usize) -> Result<()> {
    if !(dim == 2 || dim == 3) {
        return Err(invalid(format!("latent dimension must be 2 or 3, got {dim}")));
    }
    if anchors.len() < dim + 1 {
        return Err(invalid(format!(
            "need at least {} anchors for a {dim}-D chart, got {}",
            dim + 1,
            anchors.len()
        )));
    }
    for (&i, y) in anchors {
        if i >= n {
            return Err(invalid(format!("anchor index {i} out of range")));
        }
        if y.len() != dim {
            return Err(invalid(format!("anchor {i} has {} coordinates, expected {dim}", y.len())));
        }
    }
    Ok(())
}

/// Seeded Gaussian around the anchor centroid with standard deviation equal
/// to a quarter of the anchor bounding-box diagonal; anchors at their targets.
pub fn initial_embedding(n: usize, anchors: &BTreeMap<usize, Vec<f64>>, dim: usize, seed: u64) -> Embedding {
    let mut centroid = vec![0.0; dim];
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for y in anchors.values() {
        for c in 0..dim {
            centroid[c] += y[c] / anchors.len() as f64;
            lo[c] = lo[c].min(y[c]);
            hi[c] = hi[c].max(y[c]);
        }
    }
    let std = (0..dim).map(|c| (hi[c] - lo[c]).powi(2)).sum::<f64>().sqrt() / 4.0;
    let mut coords = vec![0.0; n * dim];
    let mut is_anchor = vec![false; n];
    for u in 0..n {
        let z = &mut coords[u * dim..(u + 1) * dim];
        if let Some(y) = anchors.get(&u) {
            z.copy_from_slice(y);
            is_anchor[u] = true;
        } else {
            let mut rng = seed::rng(seed::derive(seed, &[seed::tag::TSNE, u as u64]));
            for c in 0..dim {
                let g: f64 = StandardNormal.sample(&mut rng);
                z[c] = centroid[c] + std * g;
            }
        }
    }
    Embedding { dim, coords, is_anchor }
}

/// Semi-supervised t-SNE from the seeded default initialization.
pub fn run_stsne(d: &DissimilarityMatrix, anchors: &BTreeMap<usize, Vec<f64>>, params: &TsneParams) -> Result<StsneResult> {
    check_anchors(d.len(), anchors, params.dim)?;
    let init = initial_embedding(d.len(), anchors, params.dim, params.seed);
    run_stsne_from(d, anchors, init, params)
}

/// Semi-supervised t-SNE from an explicit initialization. Anchor coordinates
/// in `init` are overwritten by their targets.
pub fn run_stsne_from(
    d: &DissimilarityMatrix,
    anchors: &BTreeMap<usize, Vec<f64>>,
    init: Embedding,
    params: &TsneParams,
) -> Result<StsneResult> {
    run_stsne_observed(d, anchors, init, params, |_, _| {})
}

/// [`run_stsne_from`] calling `observe(iteration, iterate)` on every iterate,
/// the initialization included.
pub fn run_stsne_observed(
    d: &DissimilarityMatrix,
    anchors: &BTreeMap<usize, Vec<f64>>,
    mut init: Embedding,
    params: &TsneParams,
    mut observe: impl FnMut(usize, &Embedding),
) -> Result<StsneResult> {
    let n = d.len();
    let dim = params.dim;
    check_anchors(n, anchors, dim)?;
    if params.iterations < 1 {
        return Err(invalid("iterations must be >= 1"));
    }
    if init.len() != n || init.dim != dim {
        return Err(invalid("initial embedding shape mismatch"));
    }
    for u in 0..n {
        init.is_anchor[u] = anchors.contains_key(&u);
        if let Some(y) = anchors.get(&u) {
            init.coords[u * dim..(u + 1) * dim].copy_from_slice(y);
        }
    }
    if anchors.len() == n {
        return Ok(StsneResult {
            embedding: init,
            trace: vec![0.0],
        });
    }
    check_perplexity(n, params.perplexity, true)?;
    let p = joint_affinities(d, params.perplexity)?;
    let mut ws = Workspace::new(n);
    let mut z = init;
    let mut velocity = vec![0.0; n * dim];
    let mut trace = Vec::with_capacity(params.iterations + 1);
    let mut best = (f64::INFINITY, z.coords.clone());
    for it in 0..=params.iterations {
        observe(it, &z);
        let exag = match params.early_exaggeration {
            Some((f, until)) if it < until => f,
            _ => 1.0,
        };
        let kl = ws.evaluate(&p, exag, &z.coords, dim);
        if !kl.is_finite() {
            return Err(Error::Numerical {
                iteration: it,
                what: format!("KL objective is {kl}"),
            });
        }
        trace.push(kl);
        if kl < best.0 {
            best = (kl, z.coords.clone());
        }
        if it == params.iterations {
            break;
        }
        for u in 0..n {
            if z.is_anchor[u] {
                continue;
            }
            let g = &mut ws.grad[u * dim..(u + 1) * dim];
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > params.gradient_clip {
                let s = params.gradient_clip / norm;
                g.iter_mut().for_each(|x| *x *= s);
            }
            for c in 0..dim {
                let k = u * dim + c;
                velocity[k] = params.momentum * velocity[k] - params.learning_rate * g[c];
                z.coords[k] += velocity[k];
            }
        }
        for (&i, y) in anchors {
            z.coords[i * dim..(i + 1) * dim].copy_from_slice(y);
        }
    }
    z.coords = best.1;
    Ok(StsneResult { embedding: z, trace })
}

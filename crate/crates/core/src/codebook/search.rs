//! End-to-end configuration scoring and codebook search.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::index::sample;
use rayon::prelude::*;

use super::Codebook;
use crate::channel::{ChannelVector, EmsConfiguration, LinkCache};
use crate::embedding::{run_stsne, StsneResult, TsneParams};
use crate::error::{invalid, Error, Result};
use crate::features::{dissimilarity_matrix, estimate_features, DissimilarityMatrix, FeatureParams};
use crate::metrics::{evaluate_embedding, Metric, MetricParams, MetricReport};
use crate::scene::{PatternConfig, Scene};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub features: FeatureParams,
    /// `seed` is overwritten per evaluation.
    pub tsne: TsneParams,
    pub metrics: MetricParams,
    pub patterns: PatternConfig,
    /// Fraction of test points used as anchors, in `(0, 1)`.
    pub supervision: f64,
    pub metric: Metric,
    pub alpha: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            features: FeatureParams::default(),
            tsne: TsneParams::default(),
            metrics: MetricParams::default(),
            patterns: PatternConfig::default(),
            supervision: 0.15,
            metric: Metric::Le,
            alpha: 0.9,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.supervision > 0.0 && self.supervision < 1.0) {
            return Err(invalid(format!("supervision ratio {} outside (0, 1)", self.supervision)));
        }
        for &a in self.metrics.alphas.iter().chain([&self.alpha]) {
            if !(a > 0.0 && a <= 1.0) {
                return Err(invalid(format!("alpha {a} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// `ceil(ratio * n)` distinct indices drawn uniformly without replacement,
/// returned in ascending order. At least one point must stay unlabeled.
pub fn select_anchors(n: usize, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid(format!("supervision ratio {ratio} outside (0, 1)")));
    }
    let count = (ratio * n as f64 - 1e-9).ceil() as usize;
    if count >= n {
        return Err(invalid(format!(
            "supervision ratio {ratio} labels all {n} test points; nothing left to evaluate"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut idx = sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Root seeds for averaging over `n` runs; the first is `root` itself.
pub fn evaluation_seeds(root: u64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| if i == 0 { root } else { seed::derive(root, &[i as u64]) })
        .collect()
}

/// Noise and initialization seed of a codeword combination.
pub fn combination_seed(root: u64, slopes: &[i32]) -> u64 {
    seed::for_slopes(root, slopes)
}

/// Noise and initialization seed of the no-EMS baseline.
pub fn baseline_seed(root: u64) -> u64 {
    seed::derive(root, &[seed::tag::BASELINE])
}

/// Anchor targets (true positions) for runs under `root`.
pub fn anchor_targets(truth: &[[f64; 2]], ratio: f64, root: u64) -> Result<BTreeMap<usize, Vec<f64>>> {
    let idx = select_anchors(truth.len(), ratio, seed::derive(root, &[seed::tag::ANCHORS]))?;
    Ok(idx.into_iter().map(|u| (u, truth[u].to_vec())).collect())
}

/// Semi-supervised chart of `d`. Anchors and the initialization both come
/// from `root`, so every configuration under one root starts from the same
/// embedding.
pub fn chart_dissimilarity(
    d: &DissimilarityMatrix,
    truth: &[[f64; 2]],
    params: &PipelineParams,
    root: u64,
) -> Result<StsneResult> {
    if truth.len() != d.len() {
        return Err(invalid(format!(
            "dissimilarity matrix covers {} points, scene has {}",
            d.len(),
            truth.len()
        )));
    }
    let tsne = TsneParams {
        seed: seed::derive(root, &[seed::tag::TSNE]),
        ..params.tsne
    };
    run_stsne(d, &anchor_targets(truth, params.supervision, root)?, &tsne)
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub dissimilarity: DissimilarityMatrix,
    pub chart: StsneResult,
    pub report: MetricReport,
    /// `Q_m(alpha)` of the configured metric.
    pub objective: f64,
}

/// Precomputed scene links plus pipeline settings; scores channel sets.
pub struct Pipeline {
    scene: Scene,
    cache: LinkCache,
    truth: Vec<[f64; 2]>,
    params: PipelineParams,
    evaluations: AtomicUsize,
}

impl Pipeline {
    pub fn new(scene: &Scene, params: PipelineParams) -> Result<Self> {
        scene.validate()?;
        params.validate()?;
        let cache = LinkCache::build(scene, &params.patterns)?;
        Ok(Self {
            scene: scene.clone(),
            cache,
            truth: scene.ground_truth(),
            params,
            evaluations: AtomicUsize::new(0),
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn cache(&self) -> &LinkCache {
        &self.cache
    }

    pub fn params(&self) -> &PipelineParams {
        &self.params
    }

    /// Number of full pipeline runs so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// The same pipeline with only the listed panels present.
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&j) = keep.iter().find(|&&j| j >= self.scene.num_panels()) {
            return Err(invalid(format!("panel index {j} out of range ({} panels)", self.scene.num_panels())));
        }
        let cache = LinkCache {
            direct: self.cache.direct.clone(),
            h_in: keep.iter().map(|&j| self.cache.h_in[j].clone()).collect(),
            h_out: keep.iter().map(|&j| self.cache.h_out[j].clone()).collect(),
        };
        Ok(Self {
            scene: self.scene.with_panels(keep),
            cache,
            truth: self.truth.clone(),
            params: self.params.clone(),
            evaluations: AtomicUsize::new(0),
        })
    }

    /// Anchor targets for runs under `root`.
    pub fn anchors(&self, root: u64) -> Result<BTreeMap<usize, Vec<f64>>> {
        anchor_targets(&self.truth, self.params.supervision, root)
    }

    /// Features, dissimilarities, chart and metrics for a set of channels.
    /// Anchors and initialization come from `root`; snapshot noise from `stream`.
    pub fn run_channels(&self, channels: &[ChannelVector], root: u64, stream: u64) -> Result<Evaluation> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let d = self.dissimilarities(channels, stream)?;
        self.chart_and_score(d, root)
    }

    pub fn dissimilarities(&self, channels: &[ChannelVector], stream: u64) -> Result<DissimilarityMatrix> {
        let s = &self.scene;
        let feats = estimate_features(channels, s.noise_power, s.tx_power, &self.params.features, stream)?;
        dissimilarity_matrix(&feats)
    }

    pub fn chart(&self, d: &DissimilarityMatrix, root: u64) -> Result<StsneResult> {
        chart_dissimilarity(d, &self.truth, &self.params, root)
    }

    fn chart_and_score(&self, d: DissimilarityMatrix, root: u64) -> Result<Evaluation> {
        let chart = self.chart(&d, root)?;
        let report = evaluate_embedding(&chart.embedding, &self.truth, &d, &self.params.metrics)?;
        let objective = report.objective(self.params.metric, self.params.alpha)?;
        Ok(Evaluation {
            dissimilarity: d,
            chart,
            report,
            objective,
        })
    }

    /// Direct channels only.
    pub fn baseline(&self, root: u64) -> Result<Evaluation> {
        let channels: Vec<ChannelVector> = self.cache.direct.iter().cloned().map(ChannelVector).collect();
        self.run_channels(&channels, root, baseline_seed(root))
    }
}

/// Scores one EMS configuration under `root`; `stream` seeds the snapshot
/// noise.
pub fn evaluate_configuration(
    pipeline: &Pipeline,
    config: &EmsConfiguration,
    root: u64,
    stream: u64,
) -> Result<Evaluation> {
    config.check(pipeline.scene())?;
    let channels = pipeline.cache().composite(config)?;
    pipeline.run_channels(&channels, root, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Greedy,
    /// Only the given panel present.
    Single(usize),
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "greedy" => Ok(SearchMode::Greedy),
            _ => match s.strip_prefix("single:").map(str::parse::<usize>) {
                Some(Ok(j)) if j >= 1 => Ok(SearchMode::Single(j - 1)),
                _ => Err(invalid(format!(
                    "unknown search mode `{s}` (expected exhaustive, greedy or single:J with J >= 1)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub root_seed: u64,
    /// Objectives are averaged over this many root seeds.
    pub n_seeds: usize,
    /// Maximum number of combinations.
    pub budget: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            root_seed: 0,
            n_seeds: 1,
            budget: 10_000,
        }
    }
}

/// Seed-averaged scores of one codeword combination.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    /// Lexicographic index in the full codeword product.
    pub combo_index: usize,
    pub slopes: Vec<i32>,
    pub objective: f64,
    /// Quantiles of the oriented metric at each configured alpha.
    pub quantiles: Vec<f64>,
    /// Medians of LE, TW and CT.
    pub medians: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub mode: SearchMode,
    /// Scene indices of the panels whose slopes appear in each row.
    pub panels: Vec<usize>,
    pub metric: Metric,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub rows: Vec<SearchRow>,
    /// Index into `rows` of the lowest objective (first on ties).
    pub best: usize,
    /// `(alpha, min, max)` across rows.
    pub envelope: Vec<(f64, f64, f64)>,
    /// Pipeline runs performed.
    pub evaluations: usize,
}

impl SearchReport {
    pub fn best_row(&self) -> &SearchRow {
        &self.rows[self.best]
    }

    /// Phase vectors of the best combination for each listed panel.
    pub fn best_phases(&self, codebooks: &[Codebook]) -> Vec<Vec<f64>> {
        self.best_row()
            .slopes
            .iter()
            .zip(codebooks)
            .map(|(&a, cb)| cb.by_slope(a).expect("slope comes from this codebook").phases.clone())
            .collect()
    }

    fn assemble(mode: SearchMode, panels: Vec<usize>, params: &PipelineParams, rows: Vec<SearchRow>, evaluations: usize) -> Self {
        let best = rows
            .iter()
            .enumerate()
            .fold(0, |b, (i, r)| if r.objective < rows[b].objective { i } else { b });
        let envelope = params
            .metrics
            .alphas
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.quantiles[k]), hi.max(r.quantiles[k]))
                });
                (a, lo, hi)
            })
            .collect();
        Self {
            mode,
            panels,
            metric: params.metric,
            alpha: params.alpha,
            alphas: params.metrics.alphas.clone(),
            rows,
            best,
            envelope,
            evaluations,
        }
    }
}

fn check_codebooks(pipeline: &Pipeline, codebooks: &[Codebook]) -> Result<()> {
    let m = pipeline.scene().num_panels();
    if codebooks.len() != m {
        return Err(invalid(format!("{} codebooks for {m} panels", codebooks.len())));
    }
    for (j, cb) in codebooks.iter().enumerate() {
        if cb.is_empty() {
            return Err(invalid(format!("codebook for panel {} is empty", j + 1)));
        }
        let l = pipeline.scene().panels[j].len();
        if cb.codewords().iter().any(|c| c.phases.len() != l) {
            return Err(invalid(format!("codebook for panel {} does not match its {l} elements", j + 1)));
        }
    }
    Ok(())
}

fn lexicographic_index(choice: &[usize], codebooks: &[Codebook]) -> usize {
    choice.iter().zip(codebooks).fold(0, |acc, (&k, cb)| acc * cb.len() + k)
}

/// Scores every `choice` (codeword position per panel) for every seed, in
/// parallel, and averages over seeds. `stream` maps `(root, slopes)` to the
/// evaluation seed.
fn score_choices(
    pipeline: &Pipeline,
    codebooks: &[Codebook],
    terms: &[Vec<Vec<nalgebra::DVector<num_complex::Complex64>>>],
    choices: &[Vec<usize>],
    combo_indices: &[usize],
    roots: &[u64],
    stream: &(dyn Fn(u64, &[i32]) -> u64 + Sync),
) -> Result<Vec<SearchRow>> {
    let alphas = &pipeline.params().metrics.alphas;
    let jobs: Vec<(usize, u64)> = (0..choices.len())
        .flat_map(|c| roots.iter().map(move |&r| (c, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, root)| {
            let choice = &choices[c];
            let slopes: Vec<i32> = choice.iter().zip(codebooks).map(|(&k, cb)| cb.codewords()[k].slope).collect();
            let panel_terms: Vec<&[_]> = choice.iter().enumerate().map(|(j, &k)| terms[j][k].as_slice()).collect();
            let channels = pipeline.cache().combine(&panel_terms);
            let eval = pipeline
                .run_channels(&channels, root, stream(root, &slopes))
                .map_err(|e| Error::Combination {
                    index: combo_indices[c],
                    source: Box::new(e),
                })?;
            let oriented = eval.report.oriented(pipeline.params().metric);
            let q = alphas
                .iter()
                .map(|&a| crate::metrics::quantile(&oriented, a))
                .collect::<Result<Vec<_>>>()?;
            let med = [Metric::Le, Metric::Tw, Metric::Ct].map(|m| eval.report.median(m));
            Ok((eval.objective, q, med))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = roots.len() as f64;
    Ok(choices
        .iter()
        .enumerate()
        .map(|(c, choice)| {
            let chunk = &results[c * roots.len()..(c + 1) * roots.len()];
            let mut objective = 0.0;
            let mut quantiles = vec![0.0; alphas.len()];
            let mut medians = [0.0; 3];
            for (o, q, m) in chunk {
                objective += o / n;
                for (acc, v) in quantiles.iter_mut().zip(q) {
                    *acc += v / n;
                }
                for (acc, v) in medians.iter_mut().zip(m) {
                    *acc += v / n;
                }
            }
            SearchRow {
                combo_index: combo_indices[c],
                slopes: choice.iter().zip(codebooks).map(|(&k, cb)| cb.codewords()[k].slope).collect(),
                objective,
                quantiles,
                medians,
            }
        })
        .collect())
}

fn precompute_terms(pipeline: &Pipeline, codebooks: &[Codebook]) -> Vec<Vec<Vec<nalgebra::DVector<num_complex::Complex64>>>> {
    codebooks
        .iter()
        .enumerate()
        .map(|(j, cb)| cb.codewords().iter().map(|c| pipeline.cache().panel_terms(j, &c.phases)).collect())
        .collect()
}

/// Every combination of the codebook product, in lexicographic order of
/// codeword positions (first panel most significant).
pub fn exhaustive_search(pipeline: &Pipeline, codebooks: &[Codebook], params: &SearchParams) -> Result<SearchReport> {
    check_codebooks(pipeline, codebooks)?;
    let required = codebooks
        .iter()
        .try_fold(1usize, |acc, cb| acc.checked_mul(cb.len()))
        .unwrap_or(usize::MAX);
    if required > params.budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: params.budget,
        });
    }
    let choices: Vec<Vec<usize>> = (0..required)
        .map(|mut idx| {
            let mut c = vec![0; codebooks.len()];
            for j in (0..codebooks.len()).rev() {
                c[j] = idx % codebooks[j].len();
                idx /= codebooks[j].len();
            }
            c
        })
        .collect();
    let indices: Vec<usize> = (0..required).collect();
    let roots = evaluation_seeds(params.root_seed, params.n_seeds.max(1));
    let before = pipeline.evaluations();
    let terms = precompute_terms(pipeline, codebooks);
    let rows = score_choices(pipeline, codebooks, &terms, &choices, &indices, &roots, &combination_seed)?;
    Ok(SearchReport::assemble(
        SearchMode::Exhaustive,
        (0..codebooks.len()).collect(),
        pipeline.params(),
        rows,
        pipeline.evaluations() - before,
    ))
}

/// Panels optimized one at a time in scene order, the others held at their
/// current choice (initially the specular codeword).
pub fn greedy_search(pipeline: &Pipeline, codebooks: &[Codebook], params: &SearchParams) -> Result<SearchReport> {
    check_codebooks(pipeline, codebooks)?;
    if codebooks.is_empty() {
        return Err(invalid("greedy search needs at least one panel"));
    }
    let required: usize = codebooks.iter().map(Codebook::len).sum();
    if required > params.budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: params.budget,
        });
    }
    let mut current = codebooks
        .iter()
        .enumerate()
        .map(|(j, cb)| {
            cb.specular_index()
                .ok_or_else(|| invalid(format!("codebook for panel {} has no specular codeword", j + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let roots = evaluation_seeds(params.root_seed, params.n_seeds.max(1));
    let before = pipeline.evaluations();
    let terms = precompute_terms(pipeline, codebooks);
    let mut rows = Vec::with_capacity(required);
    for j in 0..codebooks.len() {
        let choices: Vec<Vec<usize>> = (0..codebooks[j].len())
            .map(|k| {
                let mut c = current.clone();
                c[j] = k;
                c
            })
            .collect();
        let indices: Vec<usize> = choices.iter().map(|c| lexicographic_index(c, codebooks)).collect();
        let sweep = score_choices(pipeline, codebooks, &terms, &choices, &indices, &roots, &combination_seed)?;
        let best = sweep
            .iter()
            .enumerate()
            .fold(0, |b, (i, r)| if r.objective < sweep[b].objective { i } else { b });
        current[j] = best;
        rows.extend(sweep);
    }
    Ok(SearchReport::assemble(
        SearchMode::Greedy,
        (0..codebooks.len()).collect(),
        pipeline.params(),
        rows,
        pipeline.evaluations() - before,
    ))
}

/// Sweeps one panel's codebook with every other panel removed.
pub fn single_panel_sweep(pipeline: &Pipeline, panel: usize, codebook: &Codebook, params: &SearchParams) -> Result<SearchReport> {
    let sub = pipeline.restricted(&[panel])?;
    let codebooks = std::slice::from_ref(codebook);
    check_codebooks(&sub, codebooks)?;
    if codebook.len() > params.budget {
        return Err(Error::BudgetExceeded {
            required: codebook.len(),
            budget: params.budget,
        });
    }
    let choices: Vec<Vec<usize>> = (0..codebook.len()).map(|k| vec![k]).collect();
    let indices: Vec<usize> = (0..codebook.len()).collect();
    let roots = evaluation_seeds(params.root_seed, params.n_seeds.max(1));
    let terms = precompute_terms(&sub, codebooks);
    let stream = move |root: u64, slopes: &[i32]| {
        combination_seed(seed::derive(root, &[seed::tag::SINGLE_PANEL, panel as u64]), slopes)
    };
    let rows = score_choices(&sub, codebooks, &terms, &choices, &indices, &roots, &stream)?;
    pipeline.evaluations.fetch_add(sub.evaluations(), Ordering::Relaxed);
    Ok(SearchReport::assemble(
        SearchMode::Single(panel),
        vec![panel],
        pipeline.params(),
        rows,
        sub.evaluations(),
    ))
}

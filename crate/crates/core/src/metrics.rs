//! Point-wise chart quality: localization error, trustworthiness and
//! continuity over the unlabeled points, plus empirical CDFs and quantiles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::embedding::Embedding;
use crate::error::{invalid, Error, Result};
use crate::features::DissimilarityMatrix;

/// Which rank is charged for a neighbourhood violation.
///
/// `Classical` charges an intruder (latent neighbour that is not a primary
/// neighbour) its primary-space rank in trustworthiness, and a missing
/// neighbour its latent rank in continuity, which keeps both in `[0, 1]`.
/// `Literal` charges the rank from the same space that defines the
/// neighbourhood the point belongs to; those penalties are never positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankConvention {
    #[default]
    Classical,
    Literal,
}

/// Space whose neighbourhoods serve as the reference for TW/CT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    /// LE feature dissimilarities.
    #[default]
    Feature,
    /// True ground-plane positions.
    TruePosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Le,
    Tw,
    Ct,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Le, Metric::Tw, Metric::Ct];

    /// Name of the minimized quantity.
    pub fn objective_name(self) -> &'static str {
        match self {
            Metric::Le => "le",
            Metric::Tw => "neg_tw",
            Metric::Ct => "neg_ct",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Le => "le",
            Metric::Tw => "tw",
            Metric::Ct => "ct",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "le" => Ok(Metric::Le),
            "tw" => Ok(Metric::Tw),
            "ct" => Ok(Metric::Ct),
            other => Err(invalid(format!("unknown metric `{other}` (expected le, tw or ct)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricParams {
    pub kappa: usize,
    pub alphas: Vec<f64>,
    pub convention: RankConvention,
    pub neighborhood: Neighborhood,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            kappa: 51,
            alphas: vec![0.5, 0.9, 0.95],
            convention: RankConvention::default(),
            neighborhood: Neighborhood::default(),
        }
    }
}

/// `ranks[u * n + v]` is the rank of `v` in `u`'s neighbour list (1 = nearest,
/// ties to the lower index); the diagonal is 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    ranks: Vec<usize>,
    order: Vec<usize>,
}

impl RankTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self, u: usize, v: usize) -> usize {
        self.ranks[u * self.n + v]
    }

    /// Neighbours of `u` from nearest to farthest.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        let m = self.n - 1;
        &self.order[u * m..(u + 1) * m]
    }
}

pub fn rank_neighbors(d: &DissimilarityMatrix) -> RankTable {
    let n = d.len();
    let mut ranks = vec![0; n * n];
    let mut order = Vec::with_capacity(n * n.saturating_sub(1));
    for u in 0..n {
        let row = d.row(u);
        let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
        others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for (r, &v) in others.iter().enumerate() {
            ranks[u * n + v] = r + 1;
        }
        order.extend(others);
    }
    RankTable { n, ranks, order }
}

/// `2 / (kappa (2N - 3 kappa - 1))`, defined for `1 <= kappa < (2N - 1) / 3`.
pub fn eta(n: usize, kappa: usize) -> Result<f64> {
    let denom = 2 * n as i64 - 3 * kappa as i64 - 1;
    if kappa < 1 || denom <= 0 || kappa >= n {
        return Err(invalid(format!(
            "kappa {kappa} out of range for {n} evaluation points (need 1 <= kappa < {})",
            (2.0 * n as f64 - 1.0) / 3.0
        )));
    }
    Ok(2.0 / (kappa as f64 * denom as f64))
}

fn check_tables(primary: &RankTable, latent: &RankTable) -> Result<()> {
    if primary.n != latent.n {
        return Err(invalid("rank tables cover different point sets"));
    }
    Ok(())
}

/// Sum over `v` in `inside`'s kappa-neighbourhood but outside `outside`'s of
/// `charged.rank(u, v) - kappa`.
fn violations(inside: &RankTable, outside: &RankTable, charged: &RankTable, u: usize, kappa: usize) -> i64 {
    inside.neighbors(u)[..kappa]
        .iter()
        .filter(|&&v| outside.rank(u, v) > kappa)
        .map(|&v| charged.rank(u, v) as i64 - kappa as i64)
        .sum()
}

pub fn trustworthiness(primary: &RankTable, latent: &RankTable, kappa: usize, convention: RankConvention) -> Result<Vec<f64>> {
    check_tables(primary, latent)?;
    let e = eta(primary.n, kappa)?;
    let charged = match convention {
        RankConvention::Classical => primary,
        RankConvention::Literal => latent,
    };
    Ok((0..primary.n)
        .map(|u| 1.0 - e * violations(latent, primary, charged, u, kappa) as f64)
        .collect())
}

pub fn continuity(primary: &RankTable, latent: &RankTable, kappa: usize, convention: RankConvention) -> Result<Vec<f64>> {
    check_tables(primary, latent)?;
    let e = eta(primary.n, kappa)?;
    let charged = match convention {
        RankConvention::Classical => latent,
        RankConvention::Literal => primary,
    };
    Ok((0..primary.n)
        .map(|u| 1.0 - e * violations(primary, latent, charged, u, kappa) as f64)
        .collect())
}

/// Ground-plane distance `|z_u - y_u|` for every listed point.
pub fn localization_error(embedding: &Embedding, truth: &[[f64; 2]], points: &[usize]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(invalid("no unlabeled points to evaluate"));
    }
    if embedding.dim < 2 || truth.len() != embedding.len() {
        return Err(invalid("embedding and ground truth do not match"));
    }
    Ok(points
        .iter()
        .map(|&u| {
            let z = embedding.point(u);
            let y = truth[u];
            ((z[0] - y[0]).powi(2) + (z[1] - y[1]).powi(2)).sqrt()
        })
        .collect())
}

/// Nearest-rank quantile: the `ceil(alpha n)`-th order statistic.
pub fn quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, alpha)
}

fn quantile_sorted(sorted: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha {alpha} outside (0, 1]")));
    }
    let n = sorted.len();
    let k = ((alpha * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(n) - 1])
}

/// Empirical CDF samples `(value, fraction <= value)`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Scene indices of the evaluated (unlabeled) points.
    pub points: Vec<usize>,
    pub le: Vec<f64>,
    pub tw: Vec<f64>,
    pub ct: Vec<f64>,
    pub kappa: usize,
}

impl MetricReport {
    /// Per-point values of `m` oriented for minimization (TW, CT negated).
    pub fn oriented(&self, m: Metric) -> Vec<f64> {
        match m {
            Metric::Le => self.le.clone(),
            Metric::Tw => self.tw.iter().map(|x| -x).collect(),
            Metric::Ct => self.ct.iter().map(|x| -x).collect(),
        }
    }

    /// `Q_m(alpha)` of the oriented metric.
    pub fn objective(&self, m: Metric, alpha: f64) -> Result<f64> {
        quantile(&self.oriented(m), alpha)
    }

    pub fn median(&self, m: Metric) -> f64 {
        let raw = match m {
            Metric::Le => &self.le,
            Metric::Tw => &self.tw,
            Metric::Ct => &self.ct,
        };
        quantile(raw, 0.5).expect("report is nonempty")
    }

    /// Quantile table of every oriented metric, keyed by objective name.
    pub fn quantile_table(&self, alphas: &[f64]) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
        let mut out = BTreeMap::new();
        for m in Metric::ALL {
            let mut v = self.oriented(m);
            v.sort_by(f64::total_cmp);
            let mut row = BTreeMap::new();
            for &a in alphas {
                row.insert(format!("{a}"), quantile_sorted(&v, a)?);
            }
            out.insert(m.objective_name().to_string(), row);
        }
        Ok(out)
    }
}

/// Evaluates an embedding over its unlabeled points.
///
/// `primary` is the full feature dissimilarity matrix; it is ignored when
/// `params.neighborhood` selects true positions.
pub fn evaluate_embedding(
    embedding: &Embedding,
    truth: &[[f64; 2]],
    primary: &DissimilarityMatrix,
    params: &MetricParams,
) -> Result<MetricReport> {
    let points: Vec<usize> = (0..embedding.len()).filter(|&u| !embedding.is_anchor[u]).collect();
    let le = localization_error(embedding, truth, &points)?;
    let reference = match params.neighborhood {
        Neighborhood::Feature => primary.restrict(&points),
        Neighborhood::TruePosition => {
            DissimilarityMatrix::euclidean(&points.iter().map(|&u| truth[u]).collect::<Vec<_>>())
        }
    };
    let latent_pts: Vec<Vec<f64>> = points.iter().map(|&u| embedding.point(u).to_vec()).collect();
    let latent = latent_distances(&latent_pts);
    let pr = rank_neighbors(&reference);
    let lr = rank_neighbors(&latent);
    let tw = trustworthiness(&pr, &lr, params.kappa, params.convention)?;
    let ct = continuity(&pr, &lr, params.kappa, params.convention)?;
    Ok(MetricReport {
        points,
        le,
        tw,
        ct,
        kappa: params.kappa,
    })
}

fn latent_distances(pts: &[Vec<f64>]) -> DissimilarityMatrix {
    let n = pts.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DissimilarityMatrix::from_dense(n, data).expect("euclidean distances are a valid dissimilarity")
}

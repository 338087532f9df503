//! On-disk artifacts: binary channel and dissimilarity dumps, CSV and JSON
//! reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelVector;
use crate::codebook::{Codebook, SearchReport};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::features::DissimilarityMatrix;
use crate::metrics::{empirical_cdf, Metric, MetricReport};

pub const CHANNEL_MAGIC: &[u8; 4] = b"CCH1";
pub const DISSIMILARITY_MAGIC: &[u8; 4] = b"CCD1";

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn open_input(path: &Path, hint: &str) -> Result<File> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
            hint: hint.to_string(),
        });
    }
    Ok(File::open(path)?)
}

struct Reader<'a> {
    path: &'a Path,
    buf: Vec<u8>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, hint: &str) -> Result<Self> {
        let mut buf = Vec::new();
        open_input(path, hint)?.read_to_end(&mut buf)?;
        Ok(Self { path, buf, pos: 0 })
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(format_err(self.path, "file is truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let path = self.path;
        if self.take(4)? != magic {
            return Err(format_err(path, format!("expected magic {}", String::from_utf8_lossy(magic))));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(format_err(self.path, "trailing bytes after payload"));
        }
        Ok(())
    }
}

fn to_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| crate::error::invalid(format!("{what} {n} does not fit the file header")))
}

/// Writes `CCH1`: magic, `N_U`, `N_BS` (u32 LE), then `(re, im)` f64 LE pairs
/// row by row.
pub fn write_channels(path: impl AsRef<Path>, channels: &[ChannelVector]) -> Result<()> {
    let n_bs = channels.first().map_or(0, ChannelVector::len);
    if channels.iter().any(|h| h.len() != n_bs) {
        return Err(crate::error::invalid("channel vectors differ in length"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHANNEL_MAGIC)?;
    w.write_all(&to_u32(channels.len(), "test point count")?.to_le_bytes())?;
    w.write_all(&to_u32(n_bs, "antenna count")?.to_le_bytes())?;
    for h in channels {
        for z in h.as_slice() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_channels(path: impl AsRef<Path>) -> Result<Vec<ChannelVector>> {
    let path = path.as_ref();
    let mut r = Reader::new(path, "run `simulate` first to produce the channel dump")?;
    r.magic(CHANNEL_MAGIC)?;
    let n_u = r.u32()? as usize;
    let n_bs = r.u32()? as usize;
    let mut out = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        let mut v = Vec::with_capacity(n_bs);
        for _ in 0..n_bs {
            let re = r.f64()?;
            let im = r.f64()?;
            v.push(Complex64::new(re, im));
        }
        out.push(ChannelVector(DVector::from_vec(v)));
    }
    r.finish()?;
    Ok(out)
}

/// Writes `CCD1`: magic, `N_U` (u32 LE), then the strict upper triangle
/// row-major as f64 LE.
pub fn write_dissimilarity(path: impl AsRef<Path>, d: &DissimilarityMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DISSIMILARITY_MAGIC)?;
    w.write_all(&to_u32(d.len(), "test point count")?.to_le_bytes())?;
    for x in d.upper_triangle() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dissimilarity(path: impl AsRef<Path>) -> Result<DissimilarityMatrix> {
    let path = path.as_ref();
    let mut r = Reader::new(path, "run `simulate` first to produce the dissimilarity cache")?;
    r.magic(DISSIMILARITY_MAGIC)?;
    let n = r.u32()? as usize;
    let m = n * n.saturating_sub(1) / 2;
    let upper = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    DissimilarityMatrix::from_upper(n, &upper).map_err(|e| format_err(path, e.to_string()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().from_path(path)?)
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// `index,x_true,y_true,x_hat,y_hat[,z_hat],is_anchor`.
pub fn write_embedding_csv(path: impl AsRef<Path>, embedding: &Embedding, truth: &[[f64; 2]]) -> Result<()> {
    if truth.len() != embedding.len() {
        return Err(crate::error::invalid("embedding and ground truth differ in length"));
    }
    let mut w = csv_writer(path.as_ref())?;
    let mut header = vec!["index", "x_true", "y_true", "x_hat", "y_hat"];
    if embedding.dim == 3 {
        header.push("z_hat");
    }
    header.push("is_anchor");
    w.write_record(&header)?;
    for u in 0..embedding.len() {
        let mut rec = vec![u.to_string(), num(truth[u][0]), num(truth[u][1])];
        rec.extend(embedding.point(u).iter().map(|&x| num(x)));
        rec.push(if embedding.is_anchor[u] { "1" } else { "0" }.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an embedding CSV back into the embedding and the true positions.
pub fn read_embedding_csv(path: impl AsRef<Path>) -> Result<(Embedding, Vec<[f64; 2]>)> {
    let path = path.as_ref();
    open_input(path, "run `chart` first to produce the embedding")?;
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dim = match header.len() {
        6 => 2,
        7 => 3,
        n => return Err(format_err(path, format!("expected 6 or 7 columns, found {n}"))),
    };
    let mut coords = Vec::new();
    let mut is_anchor = Vec::new();
    let mut truth = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| format_err(path, format!("row {}: column {} is not a number", row + 1, i + 1)))
        };
        if field(0)? as usize != row {
            return Err(format_err(path, format!("row {}: indices must be 0, 1, 2, ...", row + 1)));
        }
        truth.push([field(1)?, field(2)?]);
        for c in 0..dim {
            coords.push(field(3 + c)?);
        }
        is_anchor.push(match rec.get(3 + dim) {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(format_err(path, format!("row {}: is_anchor must be 0 or 1", row + 1))),
        });
    }
    Ok((Embedding { dim, coords, is_anchor }, truth))
}

/// `iteration,kl`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["iteration", "kl"])?;
    for (i, kl) in trace.iter().enumerate() {
        w.write_record([i.to_string(), num(*kl)])?;
    }
    w.flush()?;
    Ok(())
}

/// `index,le_m,tw,ct` for every evaluated point.
pub fn write_metrics_csv(path: impl AsRef<Path>, report: &MetricReport) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["index", "le_m", "tw", "ct"])?;
    for (k, &u) in report.points.iter().enumerate() {
        w.write_record([u.to_string(), num(report.le[k]), num(report.tw[k]), num(report.ct[k])])?;
    }
    w.flush()?;
    Ok(())
}

/// `value,fraction`.
pub fn write_cdf_csv(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["value", "fraction"])?;
    for (x, f) in empirical_cdf(values) {
        w.write_record([num(x), num(f)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Paths written by [`write_metric_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub metrics: PathBuf,
    pub quantiles: PathBuf,
    pub cdfs: Vec<PathBuf>,
}

/// `metrics.csv`, `quantiles.json` and one `cdf_<metric>.csv` per oriented
/// metric (`le`, `neg_tw`, `neg_ct`) in `dir`.
pub fn write_metric_report(dir: impl AsRef<Path>, report: &MetricReport, alphas: &[f64]) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    let metrics = dir.join("metrics.csv");
    write_metrics_csv(&metrics, report)?;
    let quantiles = dir.join("quantiles.json");
    write_json(&quantiles, &report.quantile_table(alphas)?)?;
    let mut cdfs = Vec::new();
    for m in Metric::ALL {
        let p = dir.join(format!("cdf_{}.csv", m.objective_name()));
        write_cdf_csv(&p, &report.oriented(m))?;
        cdfs.push(p);
    }
    Ok(ReportFiles { metrics, quantiles, cdfs })
}

fn quantile_column(alpha: f64) -> String {
    format!("q{}", (alpha * 100.0).round() as i64)
}

/// `combo_index,slope_a_panel<j>...,objective,q<alpha>...`.
pub fn write_search_csv(path: impl AsRef<Path>, report: &SearchReport) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    let mut header = vec!["combo_index".to_string()];
    header.extend(report.panels.iter().map(|j| format!("slope_a_panel{}", j + 1)));
    header.push("objective".into());
    header.extend(report.alphas.iter().map(|&a| quantile_column(a)));
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![row.combo_index.to_string()];
        rec.extend(row.slopes.iter().map(i32::to_string));
        rec.push(num(row.objective));
        rec.extend(row.quantiles.iter().map(|&q| num(q)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BestPanel<'a> {
    panel: usize,
    slope: i32,
    increment_rad: f64,
    phases_rad: &'a [f64],
}

#[derive(Serialize)]
struct BestConfig<'a> {
    metric: String,
    alpha: f64,
    combo_index: usize,
    objective: f64,
    quantiles: BTreeMap<String, f64>,
    envelope: Vec<BTreeMap<&'static str, f64>>,
    evaluations: usize,
    panels: Vec<BestPanel<'a>>,
}

/// Best configuration with its full phase vectors. `codebooks` are those of
/// the panels listed in the report.
pub fn write_best_json(path: impl AsRef<Path>, report: &SearchReport, codebooks: &[Codebook]) -> Result<()> {
    let row = report.best_row();
    let panels = row
        .slopes
        .iter()
        .zip(&report.panels)
        .zip(codebooks)
        .map(|((&a, &j), cb)| {
            let cw = cb
                .by_slope(a)
                .ok_or_else(|| crate::error::invalid(format!("slope {a} missing from codebook of panel {}", j + 1)))?;
            Ok(BestPanel {
                panel: j + 1,
                slope: a,
                increment_rad: cw.increment,
                phases_rad: &cw.phases,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = BestConfig {
        metric: report.metric.objective_name().to_string(),
        alpha: report.alpha,
        combo_index: row.combo_index,
        objective: row.objective,
        quantiles: report
            .alphas
            .iter()
            .zip(&row.quantiles)
            .map(|(&a, &q)| (format!("{a}"), q))
            .collect(),
        envelope: report
            .envelope
            .iter()
            .map(|&(a, lo, hi)| BTreeMap::from([("alpha", a), ("min", lo), ("max", hi)]))
            .collect(),
        evaluations: report.evaluations,
        panels,
    };
    write_json(path.as_ref(), &best)
}

/// Writes any serializable summary as pretty JSON.
pub fn write_summary_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_json(path.as_ref(), value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.bin");
        let chans: Vec<ChannelVector> = (0..3)
            .map(|u| ChannelVector(DVector::from_fn(4, |i, _| Complex64::new(i as f64 + u as f64, -0.5 * i as f64))))
            .collect();
        write_channels(&p, &chans).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"CCH1");
        assert_eq!(bytes.len(), 12 + 3 * 4 * 16);
        assert_eq!(read_channels(&p).unwrap(), chans);
    }

    #[test]
    fn dissimilarity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        let d = DissimilarityMatrix::euclidean(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]]);
        write_dissimilarity(&p, &d).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 8 + 6 * 8);
        assert_eq!(read_dissimilarity(&p).unwrap(), d);
    }

    #[test]
    fn missing_and_corrupt_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope.bin");
        let e = read_dissimilarity(&p).unwrap_err();
        assert!(matches!(e, Error::MissingInput { .. }));
        assert!(e.to_string().contains("nope.bin"));
        std::fs::write(&p, b"CCD1\x03\x00\x00\x00").unwrap();
        assert!(matches!(read_dissimilarity(&p).unwrap_err(), Error::Format { .. }));
        std::fs::write(&p, b"XXXX\x00\x00\x00\x00").unwrap();
        assert!(matches!(read_dissimilarity(&p).unwrap_err(), Error::Format { .. }));
    }

    #[test]
    fn embedding_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let z = Embedding {
            dim: 2,
            coords: vec![0.1, -2.5, 3.0, 1e-7, 5.5, 6.25],
            is_anchor: vec![true, false, false],
        };
        let truth = vec![[0.1, -2.5], [3.0, 0.0], [5.0, 6.0]];
        write_embedding_csv(&p, &z, &truth).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("index,x_true,y_true,x_hat,y_hat,is_anchor\n"));
        let (z2, t2) = read_embedding_csv(&p).unwrap();
        assert_eq!(z2, z);
        assert_eq!(t2, truth);
    }
}

//! End-to-end run that writes every artifact to a directory: channel dump,
//! dissimilarity cache, embedding, KL trace, per-point metrics, CDFs and the
//! search table. Equivalent to `ems-chart all` with a small codebook.
//!
//! ```text
//! cargo run --release --example full_pipeline -- [OUT_DIR] [SCENE]
//! ```

use std::path::PathBuf;

use ems_charting::codebook::{exhaustive_search, panel_codebook, Pipeline, PipelineParams, SearchParams};
use ems_charting::io;
use ems_charting::scene::load_scene;

fn main() -> ems_charting::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let scene = load_scene(args.next().unwrap_or_else(|| "toy_canyon".into()))?;
    std::fs::create_dir_all(&out)?;
    let root = 0;

    let pipeline = Pipeline::new(&scene, PipelineParams::default())?;
    let baseline = pipeline.baseline(root)?;
    let channels: Vec<_> = pipeline.cache().direct.iter().cloned().map(ems_charting::channel::ChannelVector).collect();
    io::write_channels(out.join("channels.cch"), &channels)?;
    io::write_dissimilarity(out.join("dissimilarity.ccd"), &baseline.dissimilarity)?;
    io::write_embedding_csv(out.join("embedding.csv"), &baseline.chart.embedding, &scene.ground_truth())?;
    io::write_trace_csv(out.join("trace.csv"), &baseline.chart.trace)?;
    let files = io::write_metric_report(&out, &baseline.report, &pipeline.params().metrics.alphas)?;
    println!("baseline Q90(LE) {:.2} m; metric files {:?}", baseline.objective, files);

    if scene.num_panels() > 0 {
        let books = scene.panels.iter().map(|p| panel_codebook(p, 3)).collect::<Result<Vec<_>, _>>()?;
        let report = exhaustive_search(&pipeline, &books, &SearchParams::default())?;
        io::write_search_csv(out.join("search.csv"), &report)?;
        io::write_best_json(out.join("best.json"), &report, &books)?;
        println!("best slopes {:?}, Q90(LE) {:.2} m", report.best_row().slopes, report.best_row().objective);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

//! Codebook construction and search. Prints the DFT codewords of the first
//! panel, then runs greedy and exhaustive searches with a small codebook.
//!
//! ```text
//! cargo run --release --example codebook_search -- [SCENE] [K]
//! ```

use ems_charting::codebook::{
    exhaustive_search, greedy_search, panel_codebook, Pipeline, PipelineParams, SearchParams, SearchReport,
};
use ems_charting::metrics::MetricParams;
use ems_charting::scene::load_scene;

fn show(name: &str, report: &SearchReport) {
    let best = report.best_row();
    println!(
        "{name}: {} evaluations, best slopes {:?} with Q90(LE) = {:.2} m",
        report.evaluations, best.slopes, best.objective
    );
    for (alpha, lo, hi) in &report.envelope {
        println!("  alpha {alpha}: objective spans [{lo:.2}, {hi:.2}]");
    }
}

fn main() -> ems_charting::Result<()> {
    let mut args = std::env::args().skip(1);
    let scene = load_scene(args.next().unwrap_or_else(|| "toy_canyon".into()))?;
    let k: usize = args.next().map(|s| s.parse().expect("codebook size")).unwrap_or(3);

    let books = scene.panels.iter().map(|p| panel_codebook(p, k)).collect::<Result<Vec<_>, _>>()?;
    println!("panel 1 codebook ({} codewords):", books[0].len());
    for c in books[0].codewords() {
        println!("  a = {:+}  increment {:+.4} rad/element", c.slope, c.increment);
    }

    let mut params = PipelineParams {
        metrics: MetricParams { kappa: 5, ..MetricParams::default() },
        ..PipelineParams::default()
    };
    params.features.snapshots = 256;
    params.tsne.learning_rate = 500.0;
    params.tsne.early_exaggeration = Some((4.0, 250));
    let pipeline = Pipeline::new(&scene, params)?;
    let search = SearchParams::default();

    show("greedy", &greedy_search(&pipeline, &books, &search)?);
    let exhaustive = exhaustive_search(&pipeline, &books, &search)?;
    show("exhaustive", &exhaustive);
    println!("\nall combinations:");
    for row in &exhaustive.rows {
        println!("  {:?}  Q90 {:6.2} m  median TW {:.4}  CT {:.4}", row.slopes, row.objective, row.medians[1], row.medians[2]);
    }
    Ok(())
}

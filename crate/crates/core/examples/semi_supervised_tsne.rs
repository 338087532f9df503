//! Semi-supervised t-SNE on a noisy ring: a few anchors pin the chart's
//! frame and the remaining points fall into place between them.
//!
//! ```text
//! cargo run --release --example semi_supervised_tsne
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use ems_charting::embedding::{run_stsne, TsneParams};
use ems_charting::features::DissimilarityMatrix;
use rand::Rng;

fn main() -> ems_charting::Result<()> {
    let n = 120;
    let mut rng = ems_charting::seed::rng(11);
    let truth: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            let r = 10.0 + rng.random_range(-0.5..0.5);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let d = DissimilarityMatrix::euclidean(&truth);

    let anchors: BTreeMap<usize, Vec<f64>> = (0..n).step_by(10).map(|i| (i, truth[i].to_vec())).collect();
    let params = TsneParams { perplexity: 15.0, iterations: 600, ..TsneParams::default() };
    let result = run_stsne(&d, &anchors, &params)?;

    let moved = anchors
        .iter()
        .map(|(&i, y)| {
            let z = result.embedding.point(i);
            (z[0] - y[0]).hypot(z[1] - y[1])
        })
        .fold(0.0, f64::max);
    let mut err: Vec<f64> = (0..n)
        .filter(|i| !anchors.contains_key(i))
        .map(|i| {
            let z = result.embedding.point(i);
            (z[0] - truth[i][0]).hypot(z[1] - truth[i][1])
        })
        .collect();
    err.sort_by(f64::total_cmp);

    println!("{n} points, {} anchors", anchors.len());
    println!("KL {:.4} -> {:.4} over {} iterations", result.initial_kl(), result.best_kl(), params.iterations);
    println!("largest anchor displacement {moved}");
    println!("position error median {:.2}, 90th percentile {:.2} (ring radius 10)", err[err.len() / 2], err[err.len() * 9 / 10]);
    Ok(())
}

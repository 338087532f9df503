//! Covariance features and Log-Euclidean distances along a row of test
//! points: nearby points should be closer in feature space than distant ones.
//!
//! ```text
//! cargo run --release --example covariance_features -- [SCENE] [SNAPSHOTS]
//! ```

use ems_charting::channel::LinkCache;
use ems_charting::features::{dissimilarity_matrix, estimate_features, le_distance, matrix_log, FeatureParams};
use ems_charting::scene::{load_scene, PatternConfig};

fn main() -> ems_charting::Result<()> {
    let mut args = std::env::args().skip(1);
    let scene = load_scene(args.next().unwrap_or_else(|| "toy_canyon".into()))?;
    let snapshots = args.next().map(|s| s.parse().expect("snapshot count")).unwrap_or(64);
    let params = FeatureParams { snapshots, ..FeatureParams::default() };

    let cache = LinkCache::build(&scene, &PatternConfig::default())?;
    let channels: Vec<_> = cache.direct.iter().cloned().map(ems_charting::channel::ChannelVector).collect();
    let features = estimate_features(&channels, scene.noise_power, scene.tx_power, &params, 7)?;

    let r = &features[0];
    let log_r = matrix_log(r)?;
    println!("R_0 is {0} x {0}, tr R = {1:.3e}, tr log R = {2:.3}", r.dim(), r.0.trace().re, log_r.trace().re);

    // Points sharing the first test point's y coordinate, ordered by x.
    let y0 = scene.test_points[0].y;
    let mut row: Vec<usize> = (0..scene.num_test_points()).filter(|&u| (scene.test_points[u].y - y0).abs() < 1e-9).collect();
    row.sort_by(|&a, &b| scene.test_points[a].x.total_cmp(&scene.test_points[b].x));
    println!("\nLE distance from the westmost point of the row y = {y0:.2}:");
    for &u in row.iter().step_by(3) {
        let p = scene.test_points[u];
        println!("  x = {:6.2}  d_LE = {:8.3}", p.x, le_distance(&features[row[0]], &features[u])?);
    }

    let d = dissimilarity_matrix(&features)?;
    let upper = d.upper_triangle();
    let mean = upper.iter().sum::<f64>() / upper.len() as f64;
    let max = upper.iter().cloned().fold(0.0, f64::max);
    println!("\n{} x {} dissimilarity matrix, mean {mean:.3}, max {max:.3}", d.len(), d.len());
    Ok(())
}

//! Traces the direct paths for one test point and compares the received
//! power with and without the panels on their specular codeword.
//!
//! ```text
//! cargo run --example channel_synthesis -- [SCENE] [TEST_POINT_INDEX]
//! ```

use ems_charting::channel::{composite_channel, direct_channel, trace_direct_paths, EmsConfiguration, LinkCache};
use ems_charting::scene::{load_scene, PatternConfig};

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn main() -> ems_charting::Result<()> {
    let mut args = std::env::args().skip(1);
    let scene = load_scene(args.next().unwrap_or_else(|| "toy_canyon".into()))?;
    let patterns = PatternConfig::default();
    let n0 = scene.noise_power / scene.tx_power;
    let specular = EmsConfiguration::uniform(&scene);

    let u: usize = args.next().map(|s| s.parse().expect("test point index")).unwrap_or(0);
    let ue = scene.test_points[u];
    println!("test point {u} at ({:.2}, {:.2}, {:.2})", ue.x, ue.y, ue.z);
    for p in trace_direct_paths(&scene, &ue)? {
        println!(
            "  path {:6.2} m  |g| {:.3e}  arrival theta {:6.1} deg phi {:6.1} deg",
            p.length,
            p.gain.norm(),
            p.arrival.theta.to_degrees(),
            p.arrival.phi.to_degrees()
        );
    }
    let direct = direct_channel(&scene, &ue, &patterns)?;
    let with_ems = composite_channel(&scene, &ue, &specular, &patterns)?;
    println!("  SNR without panels {:7.2} dB", db(direct.norm().powi(2) / n0));
    println!("  SNR with specular  {:7.2} dB", db(with_ems.norm().powi(2) / n0));

    // The cache holds every link once, so recombining a configuration costs
    // one matrix-vector product per panel and point.
    let cache = LinkCache::build(&scene, &patterns)?;
    let h = cache.composite(&specular)?;
    let lit = |v: &[f64]| v.iter().filter(|&&s| s > 0.0).count();
    let base: Vec<f64> = cache.direct.iter().map(|h| db(h.norm_squared() / n0)).collect();
    let ems: Vec<f64> = h.iter().map(|h| db(h.0.norm_squared() / n0)).collect();
    println!(
        "\n{} test points above 0 dB SNR: {} without panels, {} with specular",
        scene.num_test_points(),
        lit(&base),
        lit(&ems)
    );
    Ok(())
}

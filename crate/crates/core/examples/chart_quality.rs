//! Charts the no-panel baseline and the specular configuration of a scene
//! and compares localization error, trustworthiness and continuity.
//!
//! ```text
//! cargo run --release --example chart_quality -- [SCENE] [SEED]
//! ```

use ems_charting::channel::EmsConfiguration;
use ems_charting::codebook::{combination_seed, evaluate_configuration, Evaluation, Pipeline, PipelineParams};
use ems_charting::metrics::{empirical_cdf, Metric, MetricParams};
use ems_charting::scene::load_scene;

fn summary(name: &str, e: &Evaluation) -> ems_charting::Result<()> {
    let r = &e.report;
    println!(
        "{name:>9}: LE median {:6.2} m  Q90 {:6.2} m | TW median {:.4}  Q10 {:.4} | CT median {:.4}  Q10 {:.4}",
        r.median(Metric::Le),
        r.objective(Metric::Le, 0.9)?,
        r.median(Metric::Tw),
        -r.objective(Metric::Tw, 0.9)?,
        r.median(Metric::Ct),
        -r.objective(Metric::Ct, 0.9)?,
    );
    Ok(())
}

fn main() -> ems_charting::Result<()> {
    let mut args = std::env::args().skip(1);
    let scene = load_scene(args.next().unwrap_or_else(|| "toy_canyon".into()))?;
    let root: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let mut params = PipelineParams {
        metrics: MetricParams { kappa: 5, ..MetricParams::default() },
        ..PipelineParams::default()
    };
    params.features.snapshots = 256;
    params.tsne.learning_rate = 500.0;
    params.tsne.early_exaggeration = Some((4.0, 250));
    let pipeline = Pipeline::new(&scene, params)?;

    let baseline = pipeline.baseline(root)?;
    let specular = evaluate_configuration(
        &pipeline,
        &EmsConfiguration::uniform(&scene),
        root,
        combination_seed(root, &vec![0; scene.num_panels()]),
    )?;
    summary("baseline", &baseline)?;
    summary("specular", &specular)?;

    println!("\nLE CDF (m: baseline / specular)");
    let (b, s) = (empirical_cdf(&baseline.report.le), empirical_cdf(&specular.report.le));
    for q in [0.25, 0.5, 0.75, 0.9, 0.95] {
        let at = |c: &[(f64, f64)]| c.iter().find(|&&(_, p)| p >= q).map(|&(x, _)| x).unwrap_or(f64::NAN);
        println!("  F = {q:.2}: {:6.2} / {:6.2}", at(&b), at(&s));
    }
    Ok(())
}

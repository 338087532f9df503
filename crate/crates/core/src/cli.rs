//! Command-line stages: `simulate`, `chart`, `evaluate`, `optimize`, `all`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::channel::{ChannelVector, EmsConfiguration};
use crate::codebook::{
    baseline_seed, chart_dissimilarity, combination_seed, exhaustive_search, greedy_search, panel_codebook,
    single_panel_sweep, Codebook, Pipeline, PipelineParams, SearchMode, SearchParams, SearchReport,
};
use crate::embedding::TsneParams;
use crate::error::{invalid, Error, Result};
use crate::features::FeatureParams;
use crate::io;
use crate::metrics::{evaluate_embedding, Metric, MetricParams, Neighborhood, RankConvention};
use crate::scene::{load_scene, Scene};

pub const CHANNELS_FILE: &str = "channels.cch";
pub const DISSIMILARITY_FILE: &str = "dissimilarity.ccd";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const SEARCH_FILE: &str = "search.csv";
pub const BEST_FILE: &str = "best.json";

/// EMS configuration selected with `--config`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigChoice {
    /// No panel contribution.
    Baseline,
    /// Every panel on its `a = 0` codeword.
    Specular,
    /// One slope index per panel.
    Codeword(Vec<i32>),
}

impl std::str::FromStr for ConfigChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => return Ok(ConfigChoice::Baseline),
            "specular" => return Ok(ConfigChoice::Specular),
            _ => {}
        }
        let list = s
            .strip_prefix("codeword:")
            .or_else(|| s.strip_prefix("codeword="))
            .ok_or_else(|| format!("expected baseline, specular or codeword LIST, got `{s}`"))?;
        list.split(',')
            .map(|a| a.trim().parse::<i32>().map_err(|_| format!("bad slope index `{a}` in codeword list")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ConfigChoice::Codeword)
    }
}

impl ConfigChoice {
    /// Slope per panel, or `None` for the baseline.
    pub fn slopes(&self, m: usize) -> Result<Option<Vec<i32>>> {
        match self {
            ConfigChoice::Baseline => Ok(None),
            ConfigChoice::Specular => Ok(Some(vec![0; m])),
            ConfigChoice::Codeword(a) if a.len() == m => Ok(Some(a.clone())),
            ConfigChoice::Codeword(a) => Err(invalid(format!(
                "codeword list has {} slopes but the scene has {m} panels",
                a.len()
            ))),
        }
    }

    /// Seed for noise and chart initialization under `root`.
    pub fn stream_seed(&self, root: u64, m: usize) -> Result<u64> {
        Ok(match self.slopes(m)? {
            None => baseline_seed(root),
            Some(a) => combination_seed(root, &a),
        })
    }

    pub fn channels(&self, pipeline: &Pipeline, k: usize) -> Result<Vec<ChannelVector>> {
        let scene = pipeline.scene();
        match self.slopes(scene.num_panels())? {
            None => Ok(pipeline.cache().direct.iter().cloned().map(ChannelVector).collect()),
            Some(slopes) => {
                let phases = slopes
                    .iter()
                    .zip(&scene.panels)
                    .enumerate()
                    .map(|(j, (&a, panel))| {
                        let cb = panel_codebook(panel, k)?;
                        cb.by_slope(a).map(|c| c.phases.clone()).ok_or_else(|| {
                            invalid(format!(
                                "slope {a} for panel {} is outside the codebook of size {k}",
                                j + 1
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                pipeline.cache().composite(&EmsConfiguration::new(phases))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Le,
    Tw,
    Ct,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Le => Metric::Le,
            MetricArg::Tw => Metric::Tw,
            MetricArg::Ct => Metric::Ct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NeighborhoodArg {
    Feature,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Classical,
    Literal,
}

/// Comma-separated quantile levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaList(pub Vec<f64>);

fn parse_alpha_list(s: &str) -> std::result::Result<AlphaList, String> {
    let v = s
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad alpha `{a}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if let Some(a) = v.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(format!("alpha {a} outside (0, 1]"));
    }
    Ok(AlphaList(v))
}

fn parse_search(s: &str) -> std::result::Result<SearchMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Settings shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Scene JSON file or bundled scene name (toy_canyon, freespace_line).
    #[arg(long, default_value = "toy_canyon", global = true)]
    pub scene: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// baseline, specular, or `codeword a1,a2,...`.
    #[arg(long, default_value = "baseline", global = true)]
    pub config: ConfigChoice,
    #[arg(long, default_value_t = 30.0, global = true)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000, global = true)]
    pub iters: usize,
    #[arg(long, default_value_t = 100.0, global = true)]
    pub learning_rate: f64,
    /// Neighbourhood size for trustworthiness and continuity.
    #[arg(long, default_value_t = 51, global = true)]
    pub kappa: usize,
    /// Quantile levels reported.
    #[arg(long, default_value = "0.5,0.9,0.95", value_parser = parse_alpha_list, global = true)]
    pub alpha: AlphaList,
    /// Quantile level of the search objective.
    #[arg(long, default_value_t = 0.9, global = true)]
    pub objective_alpha: f64,
    #[arg(long, value_enum, default_value = "le", global = true)]
    pub metric: MetricArg,
    /// exhaustive, greedy, or single:J (1-based panel index).
    #[arg(long, default_value = "exhaustive", value_parser = parse_search, global = true)]
    pub search: SearchMode,
    #[arg(long, default_value_t = 11, global = true)]
    pub codebook_size: usize,
    /// Maximum number of codeword combinations.
    #[arg(long, default_value_t = 10_000, global = true)]
    pub budget: usize,
    /// Root seeds averaged per combination.
    #[arg(long, default_value_t = 1, global = true)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0.15, global = true)]
    pub supervision: f64,
    #[arg(long, default_value_t = 64, global = true)]
    pub snapshots: usize,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Reference neighbourhoods for TW/CT.
    #[arg(long, value_enum, default_value = "feature", global = true)]
    pub neighborhood: NeighborhoodArg,
    #[arg(long, value_enum, default_value = "classical", global = true)]
    pub rank_convention: ConventionArg,
}

impl RunConfig {
    pub fn pipeline_params(&self) -> Result<PipelineParams> {
        let alphas = self.alpha.0.clone();
        let p = PipelineParams {
            features: FeatureParams {
                snapshots: self.snapshots,
                ..FeatureParams::default()
            },
            tsne: TsneParams {
                perplexity: self.perplexity,
                iterations: self.iters,
                learning_rate: self.learning_rate,
                ..TsneParams::default()
            },
            metrics: MetricParams {
                kappa: self.kappa,
                alphas,
                convention: match self.rank_convention {
                    ConventionArg::Classical => RankConvention::Classical,
                    ConventionArg::Literal => RankConvention::Literal,
                },
                neighborhood: match self.neighborhood {
                    NeighborhoodArg::Feature => Neighborhood::Feature,
                    NeighborhoodArg::Position => Neighborhood::TruePosition,
                },
            },
            supervision: self.supervision,
            metric: self.metric.into(),
            alpha: self.objective_alpha,
            ..PipelineParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn search_params(&self) -> SearchParams {
        SearchParams {
            root_seed: self.seed,
            n_seeds: self.seeds,
            budget: self.budget,
        }
    }

    fn output_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

#[derive(Debug, Parser)]
#[command(name = "ems-chart", version, about = "Channel charting with passive electromagnetic skins")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Ray-trace the scene and write the channel dump and dissimilarity cache.
    Simulate,
    /// Semi-supervised t-SNE on the cached dissimilarities.
    Chart,
    /// Localization error, trustworthiness and continuity of the chart.
    Evaluate,
    /// Codebook search.
    Optimize,
    /// simulate, chart, evaluate and optimize in sequence.
    All,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let scene = load_scene(&cfg.scene)?;
    let params = cfg.pipeline_params()?;
    let stream = cfg.config.stream_seed(cfg.seed, scene.num_panels())?;
    let pipeline = Pipeline::new(&scene, params)?;
    let channels = cfg.config.channels(&pipeline, cfg.codebook_size)?;
    let d = pipeline.dissimilarities(&channels, stream)?;
    let dir = cfg.output_dir()?;
    io::write_channels(dir.join(CHANNELS_FILE), &channels)?;
    io::write_dissimilarity(dir.join(DISSIMILARITY_FILE), &d)?;
    println!(
        "simulate: {} test points, {} BS antennas, {} panels -> {}",
        channels.len(),
        scene.num_bs_antennas(),
        scene.num_panels(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_chart(cfg: &RunConfig) -> Result<()> {
    let scene = load_scene(&cfg.scene)?;
    let params = cfg.pipeline_params()?;
    let d = io::read_dissimilarity(cfg.out.join(DISSIMILARITY_FILE))?;
    let truth = scene.ground_truth();
    let result = chart_dissimilarity(&d, &truth, &params, cfg.seed)?;
    let dir = cfg.output_dir()?;
    io::write_embedding_csv(dir.join(EMBEDDING_FILE), &result.embedding, &truth)?;
    io::write_trace_csv(dir.join(TRACE_FILE), &result.trace)?;
    let anchors = result.embedding.is_anchor.iter().filter(|&&a| a).count();
    println!(
        "chart: {} points ({anchors} anchors), KL {:.6} -> {:.6}",
        d.len(),
        result.initial_kl(),
        result.best_kl()
    );
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let params = cfg.pipeline_params()?;
    let (embedding, truth) = io::read_embedding_csv(cfg.out.join(EMBEDDING_FILE))?;
    let d = match params.metrics.neighborhood {
        Neighborhood::Feature => io::read_dissimilarity(cfg.out.join(DISSIMILARITY_FILE))?,
        Neighborhood::TruePosition => crate::features::DissimilarityMatrix::euclidean(&truth),
    };
    if d.len() != embedding.len() {
        return Err(invalid(format!(
            "dissimilarity cache covers {} points, embedding has {}",
            d.len(),
            embedding.len()
        )));
    }
    let report = evaluate_embedding(&embedding, &truth, &d, &params.metrics)?;
    io::write_metric_report(cfg.output_dir()?, &report, &params.metrics.alphas)?;
    println!(
        "evaluate: {} points, median LE {:.3} m, median TW {:.4}, median CT {:.4}, Q_{}({}) = {:.4}",
        report.points.len(),
        report.median(Metric::Le),
        report.median(Metric::Tw),
        report.median(Metric::Ct),
        params.metric.objective_name(),
        params.alpha,
        report.objective(params.metric, params.alpha)?
    );
    Ok(())
}

fn codebooks(scene: &Scene, k: usize) -> Result<Vec<Codebook>> {
    scene.panels.iter().map(|p| panel_codebook(p, k)).collect()
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<SearchReport> {
    let scene = load_scene(&cfg.scene)?;
    if scene.num_panels() == 0 {
        return Err(invalid("optimize needs a scene with at least one panel"));
    }
    let pipeline = Pipeline::new(&scene, cfg.pipeline_params()?)?;
    let books = codebooks(&scene, cfg.codebook_size)?;
    let search = cfg.search_params();
    let (report, used) = match cfg.search {
        SearchMode::Exhaustive => (exhaustive_search(&pipeline, &books, &search)?, books),
        SearchMode::Greedy => (greedy_search(&pipeline, &books, &search)?, books),
        SearchMode::Single(j) => {
            let cb = books
                .get(j)
                .cloned()
                .ok_or_else(|| invalid(format!("panel {} does not exist ({} panels)", j + 1, scene.num_panels())))?;
            (single_panel_sweep(&pipeline, j, &cb, &search)?, vec![cb])
        }
    };
    let dir = cfg.output_dir()?;
    io::write_search_csv(dir.join(SEARCH_FILE), &report)?;
    io::write_best_json(dir.join(BEST_FILE), &report, &used)?;
    let best = report.best_row();
    println!(
        "optimize: {} evaluations, best combination {} slopes {:?}, Q_{}({}) = {:.4}",
        report.evaluations,
        best.combo_index,
        best.slopes,
        report.metric.objective_name(),
        report.alpha,
        best.objective
    );
    Ok(report)
}

pub fn cmd_all(cfg: &RunConfig) -> Result<()> {
    cmd_simulate(cfg)?;
    cmd_chart(cfg)?;
    cmd_evaluate(cfg)?;
    let scene = load_scene(&cfg.scene)?;
    if scene.num_panels() > 0 {
        cmd_optimize(cfg)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = &cli.run;
    let work = || match cli.command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Chart => cmd_chart(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Optimize => cmd_optimize(cfg).map(|_| ()),
        Command::All => cmd_all(cfg),
    };
    match cfg.jobs {
        Some(0) => Err(invalid("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Joins `--config codeword LIST` into `--config codeword:LIST` so that
/// lists starting with a negative slope are not taken for flags.
fn join_codeword_args(args: Vec<OsString>) -> Vec<OsString> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter().peekable();
    while let Some(a) = it.next() {
        let is_config = a == "--config";
        if let Some(rest) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            if rest == "codeword" {
                if let Some(list) = it.next() {
                    out.push(format!("--config=codeword:{}", list.to_string_lossy()).into());
                    continue;
                }
            }
        }
        out.push(a);
        if is_config && it.peek().is_some_and(|v| v == "codeword") {
            it.next();
            match it.next() {
                Some(list) => out.push(format!("codeword:{}", list.to_string_lossy()).into()),
                None => out.push("codeword".into()),
            }
        }
    }
    out
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on runtime failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = join_codeword_args(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => 2,
                _ => 1,
            }
        }
    }
}

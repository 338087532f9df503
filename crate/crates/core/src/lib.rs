//! Channel charting with passive electromagnetic skins (EMS).
//!
//! The crate simulates narrowband MIMO uplink channels in a box-building
//! scene with reconfigurable panels, turns them into covariance features,
//! measures Log-Euclidean dissimilarities, charts the test points with
//! semi-supervised t-SNE, scores the chart and searches panel codebooks for
//! the configuration that minimizes a quantile of a chart-quality metric.
//!
//! ```no_run
//! use ems_charting::codebook::{exhaustive_search, panel_codebook, Pipeline, PipelineParams, SearchParams};
//! use ems_charting::scene::load_scene;
//!
//! let scene = load_scene("toy_canyon")?;
//! let pipeline = Pipeline::new(&scene, PipelineParams::default())?;
//! let books = scene
//!     .panels
//!     .iter()
//!     .map(|p| panel_codebook(p, 7))
//!     .collect::<Result<Vec<_>, _>>()?;
//! let report = exhaustive_search(&pipeline, &books, &SearchParams::default())?;
//! println!("best slopes {:?}", report.best_row().slopes);
//! # Ok::<(), ems_charting::Error>(())
//! ```

pub mod channel;
pub mod cli;
pub mod codebook;
pub mod embedding;
mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod scene;
pub mod seed;

pub use error::{Error, Result};

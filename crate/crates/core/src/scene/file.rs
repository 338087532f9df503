//! JSON scene description.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{dbm_to_watts, AntennaArray, Blocker, EmsPanel, Frame, Scene, Vec3, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    pub bs: BsSpec,
    #[serde(default)]
    pub panels: Vec<PanelSpec>,
    #[serde(default)]
    pub blockers: Vec<BlockerSpec>,
    pub test_points: TestPointSpec,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    #[serde(default = "default_reflection")]
    pub reflection_coefficient: f64,
}

fn default_reflection() -> f64 {
    0.7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsSpec {
    pub position: [f64; 3],
    pub array: ArraySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_wavelengths: f64,
    /// Boresight direction; defaults to +x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub center: [f64; 3],
    pub normal: [f64; 3],
    pub rows: usize,
    pub cols: usize,
    pub spacing_wavelengths: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockerSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestPointSpec {
    List(Vec<[f64; 3]>),
    Grid { grid: GridSpec },
}

/// Regular ground grid at a fixed height. Points strictly inside a blocker
/// are dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub step: f64,
    pub height: f64,
}

fn v(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl SceneFile {
    pub fn build(&self) -> std::result::Result<Scene, String> {
        let wavelength = match (self.wavelength_m, self.carrier_hz) {
            (Some(w), None) => w,
            (None, Some(f)) if f > 0.0 => SPEED_OF_LIGHT / f,
            (None, Some(f)) => return Err(format!("carrier_hz must be positive, got {f}")),
            (Some(_), Some(_)) => return Err("give exactly one of wavelength_m, carrier_hz".into()),
            (None, None) => return Err("missing wavelength_m or carrier_hz".into()),
        };
        let frame = match self.bs.array.normal {
            Some(n) => Frame::from_normal(v(n)).map_err(|e| format!("bs.array.normal: {e}"))?,
            None => Frame::default(),
        };
        let bs_position = v(self.bs.position);
        let a = &self.bs.array;
        let bs_array = AntennaArray::planar(bs_position, frame, a.rows, a.cols, a.spacing_wavelengths * wavelength)
            .map_err(|e| format!("bs.array: {e}"))?;
        let panels = self
            .panels
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let d = p.spacing_wavelengths * wavelength;
                EmsPanel::new(v(p.center), v(p.normal), p.cols, p.rows, d, d).map_err(|e| format!("panels[{j}]: {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let blockers = self
            .blockers
            .iter()
            .enumerate()
            .map(|(i, b)| Blocker::new(v(b.min), v(b.max)).map_err(|e| format!("blockers[{i}]: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let test_points = match &self.test_points {
            TestPointSpec::List(list) => list.iter().copied().map(v).collect(),
            TestPointSpec::Grid { grid } => {
                if !(grid.step > 0.0) {
                    return Err("test_points.grid.step must be positive".into());
                }
                let nx = ((grid.max[0] - grid.min[0]) / grid.step + 1e-9).floor() as usize + 1;
                let ny = ((grid.max[1] - grid.min[1]) / grid.step + 1e-9).floor() as usize + 1;
                let mut pts = Vec::with_capacity(nx * ny);
                for iy in 0..ny {
                    for ix in 0..nx {
                        let p = Vec3::new(
                            grid.min[0] + ix as f64 * grid.step,
                            grid.min[1] + iy as f64 * grid.step,
                            grid.height,
                        );
                        if !blockers.iter().any(|b| b.contains(&p)) {
                            pts.push(p);
                        }
                    }
                }
                pts
            }
        };
        if test_points.len() < 2 {
            return Err("scene needs at least two test points".into());
        }
        for (i, p) in test_points.iter().enumerate() {
            if blockers.iter().any(|b| b.contains(p)) {
                return Err(format!("test_points[{i}] lies inside a blocker"));
            }
        }
        let scene = Scene {
            bs_array,
            bs_position,
            panels,
            blockers,
            test_points,
            wavelength,
            tx_power: dbm_to_watts(self.tx_power_dbm),
            noise_power: dbm_to_watts(self.noise_power_dbm),
            reflection_coefficient: self.reflection_coefficient,
        };
        scene.validate().map_err(|e| e.to_string())?;
        Ok(scene)
    }
}

/// Parses scene JSON. `origin` names the source in error messages.
pub fn parse_scene(text: &str, origin: &str) -> Result<Scene> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SceneFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Scene {
        path: origin.to_string(),
        message: format!("field `{}`: {}", e.path(), e.inner()),
    })?;
    file.build().map_err(|message| Error::Scene {
        path: origin.to_string(),
        message,
    })
}

pub const TOY_CANYON: &str = include_str!("../../scenes/toy_canyon.json");
pub const FREESPACE_LINE: &str = include_str!("../../scenes/freespace_line.json");

/// Loads a scene from a path, or one of the bundled scenes by name
/// (`toy_canyon`, `freespace_line`).
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let name = path.to_string_lossy();
    match name.as_ref() {
        "toy_canyon" => return parse_scene(TOY_CANYON, "toy_canyon"),
        "freespace_line" => return parse_scene(FREESPACE_LINE, "freespace_line"),
        _ => {}
    }
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
            hint: "expected a scene JSON file or a bundled scene name (toy_canyon, freespace_line)".into(),
        });
    }
    let text = std::fs::read_to_string(path)?;
    parse_scene(&text, &name)
}

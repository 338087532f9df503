//! EMS phase profiles and codebooks of horizontal linear phase gradients.

mod search;

pub use search::{
    anchor_targets, baseline_seed, chart_dissimilarity, combination_seed, evaluate_configuration, evaluation_seeds,
    exhaustive_search, greedy_search, select_anchors, single_panel_sweep, Evaluation, Pipeline, PipelineParams, SearchMode, SearchParams, SearchReport,
    SearchRow,
};

use std::f64::consts::TAU;

use crate::error::{invalid, Result};
use crate::scene::{wave_vector, AngularPair, EmsPanel};

/// Wraps a phase into `[0, 2 pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Generalized-Snell profile `(k_o - k_i) . p_l + phi0`, with both angle
/// pairs given in the panel's local frame (normal as local x).
pub fn snell_phase_profile(
    panel: &EmsPanel,
    incident: AngularPair,
    outgoing: AngularPair,
    phi0: f64,
    wavelength: f64,
) -> Result<Vec<f64>> {
    let dk = wave_vector(outgoing, wavelength)? - wave_vector(incident, wavelength)?;
    let phi0 = wrap_phase(phi0);
    Ok(panel
        .local_coords()
        .iter()
        .map(|&(x, y)| wrap_phase(phi0 + dk.y * x + dk.z * y))
        .collect())
}

/// Linear horizontal phase ramp of one codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    /// Slope index `a`; `0` is the specular codeword.
    pub slope: i32,
    /// Phase increment per element along the panel width (radians).
    pub increment: f64,
    pub offset: f64,
    /// Realized phases, one per panel element, in `[0, 2 pi)`.
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codewords: Vec<Codeword>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn slopes(&self) -> Vec<i32> {
        self.codewords.iter().map(|c| c.slope).collect()
    }

    pub fn by_slope(&self, a: i32) -> Option<&Codeword> {
        self.codewords.iter().find(|c| c.slope == a)
    }

    /// Position of the specular codeword, if present.
    pub fn specular_index(&self) -> Option<usize> {
        self.codewords.iter().position(|c| c.slope == 0)
    }
}

/// `K` DFT phase gradients over a panel of `l_x` by `l_y` elements: slope
/// `a` in `-(K-1)/2 ..= (K-1)/2` gets the increment `2 pi a / l_x`, applied
/// along the element column index about the panel center.
pub fn dft_gradient_codebook(l_x: usize, l_y: usize, k: usize, phi0: f64) -> Result<Codebook> {
    if k.is_multiple_of(2) {
        return Err(invalid(format!("codebook size must be odd, got {k}")));
    }
    if k > l_x {
        return Err(invalid(format!("codebook size {k} exceeds panel width {l_x}")));
    }
    if l_y == 0 {
        return Err(invalid("panel must have at least one row"));
    }
    let half = (k / 2) as i32;
    let phi0 = wrap_phase(phi0);
    let center = (l_x as f64 - 1.0) / 2.0;
    let codewords = (-half..=half)
        .map(|a| {
            let increment = TAU * a as f64 / l_x as f64;
            let row: Vec<f64> = (0..l_x)
                .map(|i| wrap_phase(phi0 + increment * (i as f64 - center)))
                .collect();
            Codeword {
                slope: a,
                increment,
                offset: phi0,
                phases: row.iter().copied().cycle().take(l_x * l_y).collect(),
            }
        })
        .collect();
    Ok(Codebook { codewords })
}

/// Codebook sized for a panel.
pub fn panel_codebook(panel: &EmsPanel, k: usize) -> Result<Codebook> {
    dft_gradient_codebook(panel.l_x(), panel.l_y(), k, 0.0)
}

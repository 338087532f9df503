//! Single-bounce ray engine and narrowband channel synthesis.
//!
//! The direct link between a UE and the BS is traced as a line-of-sight ray
//! plus one specular reflection per blocker face (image method). Every EMS
//! adds a cascaded term `H_out * diag(exp(j phi)) * h_in` built from
//! per-element spherical-wave path gains.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::scene::{AngularPair, AntennaArray, Blocker, ElementKind, PatternConfig, Scene, Vec3, SPEED_OF_LIGHT};

/// Segment lengths shorter than this fraction of the segment are treated
/// as grazing contact rather than crossing a blocker.
const CONTACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Direction of departure at the UE.
    pub departure: AngularPair,
    /// Direction of arrival at the BS, pointing from the BS toward the last
    /// interaction point.
    pub arrival: AngularPair,
    pub length: f64,
    pub delay: f64,
}

/// Narrowband channel `h` with one entry per BS antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub DVector<Complex64>);

impl ChannelVector {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.0.as_slice()
    }
}

/// Per-panel element phases `phi_j` in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct EmsConfiguration {
    pub phases: Vec<Vec<f64>>,
}

impl EmsConfiguration {
    pub fn new(phases: Vec<Vec<f64>>) -> Self {
        Self { phases }
    }

    /// All panels at constant zero phase.
    pub fn uniform(scene: &Scene) -> Self {
        Self::new(scene.panels.iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn check(&self, scene: &Scene) -> Result<()> {
        if self.phases.len() != scene.num_panels() {
            return Err(invalid(format!(
                "configuration has {} panels, scene has {}",
                self.phases.len(),
                scene.num_panels()
            )));
        }
        for (j, (ph, panel)) in self.phases.iter().zip(&scene.panels).enumerate() {
            if ph.len() != panel.len() {
                return Err(invalid(format!(
                    "panel {j}: {} phases for {} elements",
                    ph.len(),
                    panel.len()
                )));
            }
        }
        Ok(())
    }
}

/// True iff the open segment `(a, b)` misses the interior of every blocker.
pub fn los_visible(a: &Vec3, b: &Vec3, blockers: &[Blocker]) -> bool {
    blockers.iter().all(|blk| !segment_enters(a, b, blk))
}

fn segment_enters(a: &Vec3, b: &Vec3, blk: &Blocker) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..3 {
        if d[i] == 0.0 {
            if !(a[i] > blk.min[i] && a[i] < blk.max[i]) {
                return false;
            }
        } else {
            let ta = (blk.min[i] - a[i]) / d[i];
            let tb = (blk.max[i] - a[i]) / d[i];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    t1 - t0 > CONTACT_TOL
}

/// Free-space gain `lambda / (4 pi d) * exp(-j 2 pi d / lambda)`.
pub fn path_gain(length: f64, wavelength: f64) -> Result<Complex64> {
    if !(length > 0.0) {
        return Err(invalid(format!("path length must be positive, got {length}")));
    }
    if !(wavelength > 0.0) {
        return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(free_space(length, wavelength))
}

#[inline]
fn free_space(length: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(wavelength / (2.0 * TAU * length), -TAU * length / wavelength)
}

/// Path whose first hop leaves `from` toward `first` and whose last hop
/// reaches `to` from `last`.
fn path(gain: Complex64, from: &Vec3, first: &Vec3, last: &Vec3, to: &Vec3, length: f64) -> PathComponent {
    PathComponent {
        gain,
        departure: AngularPair::from_direction(&(first - from)),
        arrival: AngularPair::from_direction(&(last - to)),
        length,
        delay: length / SPEED_OF_LIGHT,
    }
}

/// Traces the LoS path and first-order specular reflections off blocker
/// faces between `ue` and the BS reference point.
pub fn trace_direct_paths(scene: &Scene, ue: &Vec3) -> Result<Vec<PathComponent>> {
    if scene.blockers.iter().any(|b| b.contains(ue)) {
        return Err(invalid(format!("UE at {ue:?} lies inside a blocker")));
    }
    let bs = scene.bs_array.reference();
    let lambda = scene.wavelength;
    let mut paths = Vec::new();
    if los_visible(ue, bs, &scene.blockers) {
        let d = (bs - ue).norm();
        paths.push(path(path_gain(d, lambda)?, ue, bs, ue, bs, d));
    }
    for blk in &scene.blockers {
        for axis in 0..3 {
            for (plane, outward) in [(blk.min[axis], -1.0), (blk.max[axis], 1.0)] {
                let su = outward * (ue[axis] - plane);
                let sb = outward * (bs[axis] - plane);
                if su <= 0.0 || sb <= 0.0 {
                    continue;
                }
                let mut image = *ue;
                image[axis] = 2.0 * plane - ue[axis];
                let t = (plane - image[axis]) / (bs[axis] - image[axis]);
                let mut hit = image + (bs - image) * t;
                hit[axis] = plane;
                let on_face = (0..3)
                    .filter(|&i| i != axis)
                    .all(|i| hit[i] >= blk.min[i] && hit[i] <= blk.max[i]);
                if !on_face {
                    continue;
                }
                if !los_visible(ue, &hit, &scene.blockers) || !los_visible(&hit, bs, &scene.blockers) {
                    continue;
                }
                let d = (hit - ue).norm() + (bs - hit).norm();
                let g = path_gain(d, lambda)? * scene.reflection_coefficient;
                paths.push(path(g, ue, &hit, &hit, bs, d));
            }
        }
    }
    Ok(paths)
}

/// `h = (1/sqrt(P)) sum_p alpha_p rho(arrival_p) a(arrival_p)`, with the
/// array response phased relative to the array reference point.
pub fn synthesize_channel(
    paths: &[PathComponent],
    array: &AntennaArray,
    wavelength: f64,
    patterns: &PatternConfig,
) -> Result<ChannelVector> {
    let n = array.len();
    let mut h = DVector::<Complex64>::zeros(n);
    if paths.is_empty() {
        return Ok(ChannelVector(h));
    }
    let k0 = TAU / wavelength;
    let origin = array.reference();
    for p in paths {
        let dir = p.arrival.unit_vector();
        let rho = patterns.gain(ElementKind::Bs, array.frame().local_angles(&dir));
        let c = p.gain * rho;
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let k = dir * k0;
        for (hn, pos) in h.iter_mut().zip(array.element_positions()) {
            *hn += c * Complex64::from_polar(1.0, k.dot(&(pos - origin)));
        }
    }
    h /= Complex64::from((paths.len() as f64).sqrt());
    Ok(ChannelVector(h))
}

/// Direct-link channel of one UE.
pub fn direct_channel(scene: &Scene, ue: &Vec3, patterns: &PatternConfig) -> Result<ChannelVector> {
    let paths = trace_direct_paths(scene, ue)?;
    synthesize_channel(&paths, &scene.bs_array, scene.wavelength, patterns)
}

fn check_panel(scene: &Scene, j: usize) -> Result<()> {
    if j >= scene.num_panels() {
        return Err(invalid(format!("panel index {j} out of range ({} panels)", scene.num_panels())));
    }
    Ok(())
}

/// UE to panel element channel `h_in` (length `L`).
pub fn ue_to_panel(scene: &Scene, ue: &Vec3, j: usize, patterns: &PatternConfig) -> Result<DVector<Complex64>> {
    check_panel(scene, j)?;
    let panel = &scene.panels[j];
    let l = panel.len();
    if !los_visible(ue, panel.center(), &scene.blockers) {
        return Ok(DVector::zeros(l));
    }
    let lambda = scene.wavelength;
    let frame = panel.frame();
    Ok(DVector::from_iterator(
        l,
        panel.element_positions().iter().map(|p| {
            let d = ue - p;
            let r = d.norm();
            free_space(r, lambda) * patterns.gain(ElementKind::MetaAtom, frame.local_angles(&d))
        }),
    ))
}

/// Panel element to BS antenna channel `H_out` (`N_BS x L`).
pub fn panel_to_bs(scene: &Scene, j: usize, patterns: &PatternConfig) -> Result<DMatrix<Complex64>> {
    check_panel(scene, j)?;
    let panel = &scene.panels[j];
    let bs = &scene.bs_array;
    let (n, l) = (bs.len(), panel.len());
    if !los_visible(panel.center(), bs.reference(), &scene.blockers) {
        return Ok(DMatrix::zeros(n, l));
    }
    let lambda = scene.wavelength;
    let pframe = panel.frame();
    let bframe = bs.frame();
    let mut h = DMatrix::zeros(n, l);
    for (ell, pe) in panel.element_positions().iter().enumerate() {
        for (row, pb) in bs.element_positions().iter().enumerate() {
            let d = pb - pe;
            let r = d.norm();
            let rho = patterns.gain(ElementKind::MetaAtom, pframe.local_angles(&d))
                * patterns.gain(ElementKind::Bs, bframe.local_angles(&(-d)));
            h[(row, ell)] = free_space(r, lambda) * rho;
        }
    }
    Ok(h)
}

/// `(h_in, H_out)` for UE `ue` and panel `j`.
pub fn ems_link_channels(
    scene: &Scene,
    ue: &Vec3,
    j: usize,
    patterns: &PatternConfig,
) -> Result<(DVector<Complex64>, DMatrix<Complex64>)> {
    Ok((ue_to_panel(scene, ue, j, patterns)?, panel_to_bs(scene, j, patterns)?))
}

/// `H_out * diag(exp(j phi)) * h_in`.
pub fn panel_term(h_in: &DVector<Complex64>, h_out: &DMatrix<Complex64>, phases: &[f64]) -> DVector<Complex64> {
    let phased = DVector::from_iterator(
        h_in.len(),
        h_in.iter().zip(phases).map(|(g, &ph)| g * Complex64::from_polar(1.0, ph)),
    );
    h_out * phased
}

/// Composite channel `h(S) = h_d + sum_j H_out_j Phi_j h_in_j`.
pub fn composite_channel(
    scene: &Scene,
    ue: &Vec3,
    config: &EmsConfiguration,
    patterns: &PatternConfig,
) -> Result<ChannelVector> {
    config.check(scene)?;
    let mut h = direct_channel(scene, ue, patterns)?.0;
    for (j, phases) in config.phases.iter().enumerate() {
        let (h_in, h_out) = ems_link_channels(scene, ue, j, patterns)?;
        h += panel_term(&h_in, &h_out, phases);
    }
    Ok(ChannelVector(h))
}

/// Precomputed link channels for every test point of a scene. Building the
/// composite channel for a new configuration then costs one matrix-vector
/// product per panel and test point.
#[derive(Debug, Clone)]
pub struct LinkCache {
    pub direct: Vec<DVector<Complex64>>,
    /// `h_in[j][u]`
    pub h_in: Vec<Vec<DVector<Complex64>>>,
    /// `h_out[j]`
    pub h_out: Vec<DMatrix<Complex64>>,
}

impl LinkCache {
    pub fn build(scene: &Scene, patterns: &PatternConfig) -> Result<Self> {
        use rayon::prelude::*;
        let direct = scene
            .test_points
            .par_iter()
            .map(|ue| direct_channel(scene, ue, patterns).map(|c| c.0))
            .collect::<Result<Vec<_>>>()?;
        let h_out = (0..scene.num_panels())
            .map(|j| panel_to_bs(scene, j, patterns))
            .collect::<Result<Vec<_>>>()?;
        let h_in = (0..scene.num_panels())
            .map(|j| {
                scene
                    .test_points
                    .par_iter()
                    .map(|ue| ue_to_panel(scene, ue, j, patterns))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { direct, h_in, h_out })
    }

    pub fn num_test_points(&self) -> usize {
        self.direct.len()
    }

    pub fn num_panels(&self) -> usize {
        self.h_out.len()
    }

    /// Contribution of panel `j` with the given phases at every test point.
    pub fn panel_terms(&self, j: usize, phases: &[f64]) -> Vec<DVector<Complex64>> {
        use rayon::prelude::*;
        self.h_in[j]
            .par_iter()
            .map(|h_in| panel_term(h_in, &self.h_out[j], phases))
            .collect()
    }

    /// Composite channels for every test point under `config`.
    pub fn composite(&self, config: &EmsConfiguration) -> Result<Vec<ChannelVector>> {
        if config.phases.len() != self.num_panels() {
            return Err(invalid(format!(
                "configuration has {} panels, cache has {}",
                config.phases.len(),
                self.num_panels()
            )));
        }
        let terms: Vec<_> = config
            .phases
            .iter()
            .enumerate()
            .map(|(j, ph)| self.panel_terms(j, ph))
            .collect();
        Ok(self.combine(&terms.iter().map(|t| t.as_slice()).collect::<Vec<_>>()))
    }

    /// Direct channel plus the given precomputed panel terms.
    pub fn combine(&self, terms: &[&[DVector<Complex64>]]) -> Vec<ChannelVector> {
        (0..self.num_test_points())
            .map(|u| {
                let mut h = self.direct[u].clone();
                for t in terms {
                    h += &t[u];
                }
                ChannelVector(h)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{EmsPanel, Frame};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 0.01;

    fn bare_scene(bs: Vec3, blockers: Vec<Blocker>, panels: Vec<EmsPanel>) -> Scene {
        Scene {
            bs_array: AntennaArray::planar(bs, Frame::default(), 1, 1, LAMBDA / 2.0).unwrap(),
            bs_position: bs,
            panels,
            blockers,
            test_points: vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
            wavelength: LAMBDA,
            tx_power: 1.0,
            noise_power: 1e-3,
            reflection_coefficient: 0.7,
        }
    }

    fn unit_box() -> Blocker {
        Blocker::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn visibility_cases() {
        let b = unit_box();
        assert!(!los_visible(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.0), &[b]));
        assert!(los_visible(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.0), &[]));
        // along the top face
        assert!(los_visible(&Vec3::new(-3.0, 0.0, 1.0), &Vec3::new(3.0, 0.0, 1.0), &[b]));
        // along an edge
        assert!(los_visible(&Vec3::new(-3.0, 1.0, 1.0), &Vec3::new(3.0, 1.0, 1.0), &[b]));
        // passes above
        assert!(los_visible(&Vec3::new(-3.0, 0.0, 1.5), &Vec3::new(3.0, 0.0, 1.5), &[b]));
        // ends on a face
        assert!(los_visible(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::new(-1.0, 0.0, 0.0), &[b]));
        // diagonal crossing a corner region
        assert!(!los_visible(&Vec3::new(-2.0, 0.0, -2.0), &Vec3::new(2.0, 0.0, 2.0), &[b]));
    }

    #[test]
    fn path_gain_cases() {
        let g = path_gain(LAMBDA, LAMBDA).unwrap();
        assert_relative_eq!(g.norm(), 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert!(g.arg().abs() < 1e-9);
        let g = path_gain(LAMBDA / 2.0, LAMBDA).unwrap();
        assert_relative_eq!(g.arg().abs(), PI, epsilon = 1e-9);
        let a = path_gain(3.7, LAMBDA).unwrap();
        let b = path_gain(7.4, LAMBDA).unwrap();
        assert_relative_eq!(a.norm() / b.norm(), 2.0, epsilon = 1e-12);
        assert!(path_gain(0.0, LAMBDA).is_err());
        assert!(path_gain(-1.0, LAMBDA).is_err());
    }

    #[test]
    fn empty_scene_has_only_los() {
        let s = bare_scene(Vec3::new(0.0, 0.0, 8.5), vec![], vec![]);
        let ue = Vec3::new(10.0, 3.0, 1.5);
        let p = trace_direct_paths(&s, &ue).unwrap();
        assert_eq!(p.len(), 1);
        assert_relative_eq!(p[0].length, (ue - s.bs_position).norm(), epsilon = 1e-12);
        assert_relative_eq!(p[0].delay, p[0].length / SPEED_OF_LIGHT);
        let toward_ue = AngularPair::from_direction(&(ue - s.bs_position));
        assert_relative_eq!(p[0].arrival.theta, toward_ue.theta, epsilon = 1e-12);
        assert_relative_eq!(p[0].arrival.phi, toward_ue.phi, epsilon = 1e-12);
        let toward_bs = AngularPair::from_direction(&(s.bs_position - ue));
        assert_relative_eq!(p[0].departure.phi, toward_bs.phi, epsilon = 1e-12);
        let h = direct_channel(&s, &ue, &PatternConfig::default()).unwrap();
        assert!(h.norm() > 0.0);
    }

    #[test]
    fn wall_between_blocks_everything() {
        let wall = Blocker::new(Vec3::new(4.0, -50.0, 0.0), Vec3::new(5.0, 50.0, 50.0)).unwrap();
        let s = bare_scene(Vec3::new(0.0, 0.0, 8.5), vec![wall], vec![]);
        let p = trace_direct_paths(&s, &Vec3::new(10.0, 0.0, 1.5)).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn wall_behind_gives_image_path() {
        // wall face at y = 5; UE and BS at the same height h = 2
        let wall = Blocker::new(Vec3::new(-50.0, 5.0, 0.0), Vec3::new(50.0, 6.0, 20.0)).unwrap();
        let bs = Vec3::new(0.0, 0.0, 2.0);
        let ue = Vec3::new(8.0, 1.0, 2.0);
        let s = bare_scene(bs, vec![wall], vec![]);
        let p = trace_direct_paths(&s, &ue).unwrap();
        assert_eq!(p.len(), 2);
        // image of UE across y = 5 is (8, 9, 2)
        let want = ((8.0f64).powi(2) + 9.0f64.powi(2)).sqrt();
        assert_relative_eq!(p[1].length, want, epsilon = 1e-12);
        assert_relative_eq!(p[1].gain.norm(), 0.7 * LAMBDA / (4.0 * PI * want), epsilon = 1e-15);
        // reflection point (x, 5, 2) with x = 8 * 5 / 9
        let hit = Vec3::new(8.0 * 5.0 / 9.0, 5.0, 2.0);
        let arr = AngularPair::from_direction(&(hit - bs));
        assert_relative_eq!(p[1].arrival.theta, arr.theta, epsilon = 1e-12);
    }

    #[test]
    fn ue_inside_blocker_rejected() {
        let s = bare_scene(Vec3::new(0.0, 0.0, 8.5), vec![unit_box()], vec![]);
        assert!(trace_direct_paths(&s, &Vec3::zeros()).is_err());
    }

    #[test]
    fn synthesis_cases() {
        let arr = AntennaArray::planar(Vec3::zeros(), Frame::default(), 2, 4, LAMBDA / 2.0).unwrap();
        let iso = PatternConfig::isotropic();
        assert_eq!(synthesize_channel(&[], &arr, LAMBDA, &iso).unwrap().norm(), 0.0);

        let ang = AngularPair::new(0.3, 0.1);
        let one = PathComponent {
            gain: Complex64::new(1.0, 0.0),
            departure: ang,
            arrival: ang,
            length: 1.0,
            delay: 1.0 / SPEED_OF_LIGHT,
        };
        let h = synthesize_channel(std::slice::from_ref(&one), &arr, LAMBDA, &iso).unwrap();
        let a = crate::scene::array_response(&arr, ang, LAMBDA).unwrap();
        for n in 0..arr.len() {
            assert_relative_eq!((h.0[n] - a[n]).norm(), 0.0, epsilon = 1e-12);
        }

        // second path rotated so it cancels the first at element 0
        let ang2 = AngularPair::new(-0.7, 0.2);
        let a2 = crate::scene::array_response(&arr, ang2, LAMBDA).unwrap();
        let g2 = -(a[0] / a2[0]);
        let two = PathComponent {
            gain: g2,
            arrival: ang2,
            departure: ang2,
            ..one.clone()
        };
        let h = synthesize_channel(&[one, two], &arr, LAMBDA, &iso).unwrap();
        for n in 0..arr.len() {
            let want = (a[n] + g2 * a2[n]) / 2f64.sqrt();
            assert_relative_eq!((h.0[n] - want).norm(), 0.0, epsilon = 1e-12);
        }
        assert!(h.0[0].norm() < 1e-12);
    }

    fn panel_scene() -> Scene {
        // panel on the y = 0 plane facing +y; BS and UE in front of it
        let panel = EmsPanel::new(Vec3::new(0.0, 0.0, 3.0), Vec3::y(), 1, 1, LAMBDA / 4.0, LAMBDA / 4.0).unwrap();
        bare_scene(Vec3::new(-4.0, 6.0, 3.0), vec![], vec![panel])
    }

    #[test]
    fn single_element_link_collapses_to_scalars() {
        let s = panel_scene();
        let ue = Vec3::new(5.0, 4.0, 3.0);
        let pat = PatternConfig::default();
        let (h_in, h_out) = ems_link_channels(&s, &ue, 0, &pat).unwrap();
        assert_eq!(h_in.len(), 1);
        assert_eq!(h_out.shape(), (1, 1));
        let pe = s.panels[0].element_positions()[0];
        let d1 = (ue - pe).norm();
        let d2 = (s.bs_position - pe).norm();
        let rho_in = (ue - pe).normalize().y;
        let rho_out = (s.bs_position - pe).normalize().y;
        // BS boresight +x, arrival from the panel direction
        let rho_bs = (pe - s.bs_position).normalize().x.max(0.0).powi(2);
        let want_in = path_gain(d1, LAMBDA).unwrap() * rho_in;
        let want_out = path_gain(d2, LAMBDA).unwrap() * rho_out * rho_bs;
        assert_relative_eq!((h_in[0] - want_in).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!((h_out[(0, 0)] - want_out).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn blocked_ue_sees_no_panel() {
        let mut s = panel_scene();
        s.blockers.push(Blocker::new(Vec3::new(2.0, 1.0, 0.0), Vec3::new(3.0, 5.0, 10.0)).unwrap());
        let (h_in, _) = ems_link_channels(&s, &Vec3::new(5.0, 3.0, 3.0), 0, &PatternConfig::default()).unwrap();
        assert!(h_in.iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn far_field_phase_ramp() {
        let lambda = LAMBDA;
        let panel = EmsPanel::new(Vec3::zeros(), Vec3::y(), 8, 1, lambda / 4.0, lambda / 4.0).unwrap();
        let aperture = 8.0 * lambda / 4.0;
        let dir = AngularPair::new(1.2, 0.1).unit_vector();
        let ue = dir * (100.0 * aperture);
        let mut s = bare_scene(Vec3::new(0.0, 5.0, 0.0), vec![], vec![panel]);
        s.wavelength = lambda;
        let h_in = ue_to_panel(&s, &ue, 0, &PatternConfig::isotropic()).unwrap();
        let k = dir * (TAU / lambda);
        let ref0 = h_in[0].arg() - k.dot(&s.panels[0].element_positions()[0]);
        for (ell, p) in s.panels[0].element_positions().iter().enumerate() {
            let want = ref0 + k.dot(p);
            let diff = (h_in[ell].arg() - want + PI).rem_euclid(TAU) - PI;
            assert!(diff.abs() < TAU * 0.01, "element {ell}: {diff}");
        }
    }

    #[test]
    fn composite_cases() {
        let pat = PatternConfig::default();
        let mut s = panel_scene();
        let ue = Vec3::new(5.0, 4.0, 3.0);
        let direct = direct_channel(&s, &ue, &pat).unwrap();
        let plain = composite_channel(&s, &ue, &EmsConfiguration::uniform(&s), &pat).unwrap();
        let flipped = composite_channel(&s, &ue, &EmsConfiguration::new(vec![vec![PI]]), &pat).unwrap();
        let unphased = &plain.0 - &direct.0;
        assert!(unphased.norm() > 0.0);
        assert_relative_eq!((&flipped.0 - (&direct.0 - &unphased)).norm(), 0.0, epsilon = 1e-18);
        assert!(composite_channel(&s, &ue, &EmsConfiguration::new(vec![]), &pat).is_err());

        s.panels.clear();
        let c = composite_channel(&s, &ue, &EmsConfiguration::new(vec![]), &pat).unwrap();
        assert_eq!(c, direct_channel(&s, &ue, &pat).unwrap());
    }

    #[test]
    fn all_panel_links_blocked_gives_direct() {
        let pat = PatternConfig::default();
        let mut s = panel_scene();
        // box sealing the panel face
        s.blockers.push(Blocker::new(Vec3::new(-1.0, 0.5, 0.0), Vec3::new(1.0, 1.0, 6.0)).unwrap());
        let ue = Vec3::new(0.5, 4.0, 3.0);
        let c = composite_channel(&s, &ue, &EmsConfiguration::uniform(&s), &pat).unwrap();
        assert_eq!(c, direct_channel(&s, &ue, &pat).unwrap());
    }

    #[test]
    fn cache_matches_direct_evaluation() {
        let scene = crate::scene::load_scene("freespace_line").unwrap();
        let pat = PatternConfig::default();
        let cache = LinkCache::build(&scene, &pat).unwrap();
        let cfg = EmsConfiguration::new(
            scene.panels.iter().map(|p| (0..p.len()).map(|l| 0.37 * l as f64).collect()).collect(),
        );
        let fast = cache.composite(&cfg).unwrap();
        for (u, ue) in scene.test_points.iter().enumerate() {
            let slow = composite_channel(&scene, ue, &cfg, &pat).unwrap();
            assert!((&slow.0 - &fast[u].0).norm() <= 1e-12 * slow.norm().max(1e-30));
        }
    }
}

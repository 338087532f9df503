//! World geometry: antenna arrays, EMS panels, blockers and the angular
//! primitives shared by the channel and codebook modules.

mod file;

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{invalid, Result};

pub use file::{load_scene, parse_scene, SceneFile};

pub type Vec3 = Vector3<f64>;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Azimuth `theta` in `[-pi, pi)` and elevation `phi` in `[-pi/2, pi/2]`,
/// elevation measured from the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularPair {
    pub theta: f64,
    pub phi: f64,
}

impl AngularPair {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Angles of a (not necessarily unit) direction vector.
    pub fn from_direction(d: &Vec3) -> Self {
        let n = d.norm();
        let mut theta = d.y.atan2(d.x);
        if theta >= PI {
            theta -= TAU;
        }
        let phi = (d.z / n).clamp(-1.0, 1.0).asin();
        Self { theta, phi }
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(cp * ct, cp * st, sp)
    }
}

/// Wave vector `(2 pi / lambda) [cos phi cos theta, cos phi sin theta, sin phi]`.
pub fn wave_vector(angles: AngularPair, wavelength: f64) -> Result<Vec3> {
    if !(wavelength > 0.0) {
        return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(angles.unit_vector() * (TAU / wavelength))
}

/// Orthonormal right-handed frame `(normal, u_x, u_y)`. Local angles are
/// measured with `normal` as the local x axis (boresight), `u_x` as local y
/// and `u_y` as local z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub normal: Vec3,
    pub u_x: Vec3,
    pub u_y: Vec3,
}

impl Frame {
    /// Frame whose `u_x` axis is horizontal. A vertical normal falls back to
    /// the global x axis for `u_x`.
    pub fn from_normal(normal: Vec3) -> Result<Self> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("frame normal must be a finite nonzero vector"));
        }
        let normal = normal / n;
        let h = Vec3::z().cross(&normal);
        let u_x = if h.norm() > 1e-9 {
            h.normalize()
        } else {
            Vec3::x()
        };
        let u_y = normal.cross(&u_x);
        Ok(Self { normal, u_x, u_y })
    }

    pub fn to_local(&self, d: &Vec3) -> Vec3 {
        Vec3::new(d.dot(&self.normal), d.dot(&self.u_x), d.dot(&self.u_y))
    }

    /// Angles of a global direction expressed in this frame.
    pub fn local_angles(&self, d: &Vec3) -> AngularPair {
        AngularPair::from_direction(&self.to_local(d))
    }
}

impl Default for Frame {
    fn default() -> Self {
        Self {
            normal: Vec3::x(),
            u_x: Vec3::y(),
            u_y: Vec3::z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Bs,
    MetaAtom,
}

/// Clamped-cosine-power exponents for both element kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternConfig {
    pub bs_exponent: f64,
    pub meta_exponent: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            bs_exponent: 2.0,
            meta_exponent: 1.0,
        }
    }
}

impl PatternConfig {
    /// Every element radiates uniformly.
    pub fn isotropic() -> Self {
        Self {
            bs_exponent: 0.0,
            meta_exponent: 0.0,
        }
    }

    pub fn exponent(&self, kind: ElementKind) -> f64 {
        match kind {
            ElementKind::Bs => self.bs_exponent,
            ElementKind::MetaAtom => self.meta_exponent,
        }
    }

    pub fn gain(&self, kind: ElementKind, local: AngularPair) -> f64 {
        element_pattern(local, self.exponent(kind))
    }
}

/// `max(cos phi cos theta, 0)^q` for angles in the element's local frame.
pub fn element_pattern(local: AngularPair, exponent: f64) -> f64 {
    let c = (local.phi.cos() * local.theta.cos()).max(0.0);
    c.powf(exponent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaArray {
    element_positions: Vec<Vec3>,
    reference: Vec3,
    frame: Frame,
}

impl AntennaArray {
    pub fn new(element_positions: Vec<Vec3>, frame: Frame) -> Result<Self> {
        if element_positions.is_empty() {
            return Err(invalid("antenna array needs at least one element"));
        }
        if element_positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(invalid("antenna element positions must be finite"));
        }
        for (i, a) in element_positions.iter().enumerate() {
            for b in &element_positions[i + 1..] {
                if (a - b).norm() == 0.0 {
                    return Err(invalid("antenna element positions must be distinct"));
                }
            }
        }
        let reference = element_positions.iter().sum::<Vec3>() / element_positions.len() as f64;
        Ok(Self {
            element_positions,
            reference,
            frame,
        })
    }

    /// Uniform planar array centered at `center`: `cols` along `frame.u_x`,
    /// `rows` along `frame.u_y`.
    pub fn planar(center: Vec3, frame: Frame, rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("planar array needs rows, cols >= 1"));
        }
        if !(spacing > 0.0) && rows * cols > 1 {
            return Err(invalid("array spacing must be positive"));
        }
        let positions = grid_positions(&center, &frame, cols, rows, spacing, spacing)
            .map(|(p, _, _)| p)
            .collect();
        Self::new(positions, frame)
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    pub fn element_positions(&self) -> &[Vec3] {
        &self.element_positions
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Phase reference point (element centroid). Path lengths that feed
    /// [`crate::channel::synthesize_channel`] are measured to this point.
    pub fn reference(&self) -> &Vec3 {
        &self.reference
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            element_positions: self.element_positions.iter().map(|p| p + offset).collect(),
            reference: self.reference + offset,
            frame: self.frame,
        }
    }
}

fn grid_positions<'a>(
    center: &'a Vec3,
    frame: &'a Frame,
    lx: usize,
    ly: usize,
    dx: f64,
    dy: f64,
) -> impl Iterator<Item = (Vec3, f64, f64)> + 'a {
    let ox = (lx as f64 - 1.0) / 2.0;
    let oy = (ly as f64 - 1.0) / 2.0;
    (0..ly).flat_map(move |k| {
        (0..lx).map(move |i| {
            let x = (i as f64 - ox) * dx;
            let y = (k as f64 - oy) * dy;
            (center + frame.u_x * x + frame.u_y * y, x, y)
        })
    })
}

/// Array response `a_n = exp(j k^T p_n)`.
pub fn array_response(array: &AntennaArray, angles: AngularPair, wavelength: f64) -> Result<Vec<Complex64>> {
    let k = wave_vector(angles, wavelength)?;
    Ok(steering(&k, array.element_positions(), &Vec3::zeros()))
}

/// `exp(j k^T (p_n - origin))` for every position.
pub(crate) fn steering(k: &Vec3, positions: &[Vec3], origin: &Vec3) -> Vec<Complex64> {
    positions
        .iter()
        .map(|p| Complex64::from_polar(1.0, k.dot(&(p - origin))))
        .collect()
}

/// A planar EMS made of `l_x * l_y` meta-atoms. Element `l = k * l_x + i`
/// sits at local coordinates `((i - (l_x-1)/2) d_x, (k - (l_y-1)/2) d_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmsPanel {
    center: Vec3,
    frame: Frame,
    l_x: usize,
    l_y: usize,
    d_x: f64,
    d_y: f64,
    element_positions: Vec<Vec3>,
    local_coords: Vec<(f64, f64)>,
}

impl EmsPanel {
    pub fn new(center: Vec3, normal: Vec3, l_x: usize, l_y: usize, d_x: f64, d_y: f64) -> Result<Self> {
        if l_x == 0 || l_y == 0 {
            return Err(invalid("EMS panel grid must be at least 1x1"));
        }
        if !(d_x > 0.0 && d_y > 0.0) {
            return Err(invalid("EMS element spacing must be positive"));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(invalid("EMS center must be finite"));
        }
        let frame = Frame::from_normal(normal)?;
        let (element_positions, local_coords) = grid_positions(&center, &frame, l_x, l_y, d_x, d_y)
            .map(|(p, x, y)| (p, (x, y)))
            .unzip();
        Ok(Self {
            center,
            frame,
            l_x,
            l_y,
            d_x,
            d_y,
            element_positions,
            local_coords,
        })
    }

    pub fn center(&self) -> &Vec3 {
        &self.center
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn normal(&self) -> &Vec3 {
        &self.frame.normal
    }

    pub fn l_x(&self) -> usize {
        self.l_x
    }

    pub fn l_y(&self) -> usize {
        self.l_y
    }

    pub fn d_x(&self) -> f64 {
        self.d_x
    }

    pub fn d_y(&self) -> f64 {
        self.d_y
    }

    /// Number of meta-atoms `L`.
    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    pub fn element_positions(&self) -> &[Vec3] {
        &self.element_positions
    }

    /// In-plane coordinates `(x_l, y_l)` relative to the panel center.
    pub fn local_coords(&self) -> &[(f64, f64)] {
        &self.local_coords
    }
}

/// Axis-aligned box obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blocker {
    pub min: Vec3,
    pub max: Vec3,
}

impl Blocker {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(min[i] <= max[i])) {
            return Err(invalid(format!("blocker min {min:?} must be <= max {max:?} componentwise")));
        }
        Ok(Self { min, max })
    }

    /// Strict interior test; points on a face are outside.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bs_array: AntennaArray,
    pub bs_position: Vec3,
    pub panels: Vec<EmsPanel>,
    pub blockers: Vec<Blocker>,
    pub test_points: Vec<Vec3>,
    pub wavelength: f64,
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Noise power in watts.
    pub noise_power: f64,
    /// Real reflection coefficient applied to blocker specular paths.
    pub reflection_coefficient: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(invalid("wavelength must be positive"));
        }
        if !(self.tx_power > 0.0 && self.noise_power > 0.0) {
            return Err(invalid("tx and noise powers must be positive"));
        }
        let mut sorted: Vec<[f64; 3]> = self.test_points.iter().map(|p| [p.x, p.y, p.z]).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite test points"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("test points must be distinct"));
        }
        Ok(())
    }

    pub fn num_panels(&self) -> usize {
        self.panels.len()
    }

    pub fn num_test_points(&self) -> usize {
        self.test_points.len()
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.bs_array.len()
    }

    /// Copy of the scene keeping only the listed panels, in the given order.
    pub fn with_panels(&self, keep: &[usize]) -> Self {
        let mut s = self.clone();
        s.panels = keep.iter().map(|&j| self.panels[j].clone()).collect();
        s
    }

    /// Ground-plane coordinates `(x, y)` of every test point.
    pub fn ground_truth(&self) -> Vec<[f64; 2]> {
        self.test_points.iter().map(|p| [p.x, p.y]).collect()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    const LAMBDA: f64 = 0.01;

    #[test]
    fn wave_vector_axis_cases() {
        let k = TAU / LAMBDA;
        let v = wave_vector(AngularPair::new(0.0, 0.0), LAMBDA).unwrap();
        assert_relative_eq!(v, Vec3::new(k, 0.0, 0.0), epsilon = 1e-9);
        let v = wave_vector(AngularPair::new(FRAC_PI_2, 0.0), LAMBDA).unwrap();
        assert_relative_eq!(v, Vec3::new(0.0, k, 0.0), epsilon = 1e-9);
        let v = wave_vector(AngularPair::new(0.0, FRAC_PI_2), LAMBDA).unwrap();
        assert_relative_eq!(v, Vec3::new(0.0, 0.0, k), epsilon = 1e-9);
        assert!(wave_vector(AngularPair::new(0.0, 0.0), 0.0).is_err());
        assert!(wave_vector(AngularPair::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn array_response_trivial_cases() {
        let line: Vec<Vec3> = (0..4).map(|i| Vec3::new(0.0, i as f64 * LAMBDA / 2.0, 0.0)).collect();
        let arr = AntennaArray::new(line, Frame::default()).unwrap();
        for a in array_response(&arr, AngularPair::new(0.0, 0.0), LAMBDA).unwrap() {
            assert_relative_eq!(a.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(a.im, 0.0, epsilon = 1e-12);
        }
        let pair = vec![Vec3::new(LAMBDA / 4.0, 0.0, 0.0), Vec3::new(-LAMBDA / 4.0, 0.0, 0.0)];
        let arr = AntennaArray::new(pair, Frame::default()).unwrap();
        let a = array_response(&arr, AngularPair::new(0.0, 0.0), LAMBDA).unwrap();
        assert_relative_eq!(a[0].arg(), FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(a[1].arg(), -FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn array_response_matches_scalar_evaluation() {
        use rand::Rng;
        let mut rng = crate::seed::rng(11);
        for _ in 0..20 {
            let pos: Vec<Vec3> = (0..6)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let arr = AntennaArray::new(pos.clone(), Frame::default()).unwrap();
            let (theta, phi) = (rng.random_range(-PI..PI), rng.random_range(-FRAC_PI_2..FRAC_PI_2));
            let a = array_response(&arr, AngularPair::new(theta, phi), LAMBDA).unwrap();
            for (n, p) in pos.iter().enumerate() {
                let kx = TAU / LAMBDA * phi.cos() * theta.cos();
                let ky = TAU / LAMBDA * phi.cos() * theta.sin();
                let kz = TAU / LAMBDA * phi.sin();
                let ph = kx * p.x + ky * p.y + kz * p.z;
                assert_relative_eq!(a[n].re, ph.cos(), epsilon = 1e-9);
                assert_relative_eq!(a[n].im, ph.sin(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn element_pattern_cases() {
        for q in [0.5, 1.0, 2.0, 3.0] {
            assert_relative_eq!(element_pattern(AngularPair::new(0.0, 0.0), q), 1.0);
            assert!(element_pattern(AngularPair::new(FRAC_PI_2, 0.0), q).abs() < 1e-8);
        }
        assert_relative_eq!(element_pattern(AngularPair::new(PI / 3.0, 0.0), 2.0), 0.25, epsilon = 1e-12);
        // back hemisphere is clamped
        assert_eq!(element_pattern(AngularPair::new(-PI, 0.0), 1.0), 0.0);
    }

    #[test]
    fn panel_positions_reconstruct_from_grid() {
        let p = EmsPanel::new(Vec3::new(1.0, 2.0, 5.5), Vec3::new(0.0, -1.0, 0.0), 4, 3, 0.1, 0.2).unwrap();
        let f = p.frame();
        assert_relative_eq!(f.normal.dot(&f.u_x), 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.normal.dot(&f.u_y), 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.u_x.dot(&f.u_y), 0.0, epsilon = 1e-15);
        assert_eq!(p.len(), 12);
        for k in 0..3 {
            for i in 0..4 {
                let l = k * 4 + i;
                let expect = p.center() + f.u_x * ((i as f64 - 1.5) * 0.1) + f.u_y * ((k as f64 - 1.0) * 0.2);
                assert_relative_eq!(p.element_positions()[l], expect, epsilon = 1e-12);
                assert_relative_eq!((p.element_positions()[l] - p.center()).dot(&f.normal), 0.0, epsilon = 1e-12);
            }
        }
        let centroid = p.element_positions().iter().sum::<Vec3>() / 12.0;
        assert_relative_eq!(centroid, *p.center(), epsilon = 1e-12);
    }

    #[test]
    fn frame_local_angles_boresight() {
        let f = Frame::from_normal(Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let a = f.local_angles(&Vec3::new(0.0, 3.0, 0.0));
        assert_relative_eq!(a.theta, 0.0, epsilon = 1e-12);
        assert_relative_eq!(a.phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn array_rejects_duplicates_and_empty() {
        assert!(AntennaArray::new(vec![], Frame::default()).is_err());
        assert!(AntennaArray::new(vec![Vec3::zeros(), Vec3::zeros()], Frame::default()).is_err());
    }

    #[test]
    fn angles_stay_in_range() {
        let a = AngularPair::from_direction(&Vec3::new(-1.0, 0.0, 0.0));
        assert!(a.theta >= -PI && a.theta < PI);
    }

    proptest! {
        #[test]
        fn wave_vector_norm(theta in -PI..PI, phi in -FRAC_PI_2..FRAC_PI_2, lambda in 1e-3..10.0f64) {
            let k = wave_vector(AngularPair::new(theta, phi), lambda).unwrap();
            let want = TAU / lambda;
            prop_assert!(((k.norm() - want) / want).abs() < 1e-12);
        }

        #[test]
        fn translation_is_global_phase(theta in -PI..PI, phi in -FRAC_PI_2..FRAC_PI_2,
                                       ox in -5.0..5.0f64, oy in -5.0..5.0f64, oz in -5.0..5.0f64) {
            let arr = AntennaArray::planar(Vec3::zeros(), Frame::default(), 2, 3, LAMBDA / 2.0).unwrap();
            let moved = arr.translated(&Vec3::new(ox, oy, oz));
            let ang = AngularPair::new(theta, phi);
            let a = array_response(&arr, ang, LAMBDA).unwrap();
            let b = array_response(&moved, ang, LAMBDA).unwrap();
            let g = b[0] / a[0];
            prop_assert!((g.norm() - 1.0).abs() < 1e-12);
            for n in 0..a.len() {
                prop_assert!((a[n].norm() - 1.0).abs() < 1e-12);
                prop_assert!((b[n] - a[n] * g).norm() < 1e-6);
            }
        }
    }
}

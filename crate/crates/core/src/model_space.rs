//! Constant-curvature model spaces: round spheres, Euclidean space and
//! hyperbolic space of arbitrary dimension, together with the radial volume
//! functions of their geodesic balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::numerics::{adaptive_simpson, unit_sphere_area};

const VOLUME_QUAD_TOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Spherical,
    Euclidean,
    Hyperbolic,
}

/// A simply connected model geometry of constant sectional curvature.
///
/// `scale` is the sphere radius `R` for spherical spaces and `|K|^{-1/2}` for
/// hyperbolic spaces; it is fixed to 1 and ignored for Euclidean space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    geometry: Geometry,
    scale: f64,
    dim: usize,
}

impl ModelSpace {
    pub fn new(geometry: Geometry, scale: f64, dim: usize) -> Result<Self> {
        if dim < 1 {
            return invalid("dimension must be at least 1");
        }
        if geometry != Geometry::Euclidean && !(scale.is_finite() && scale > 0.0) {
            return invalid(format!("curvature scale must be positive, got {scale}"));
        }
        let scale = if geometry == Geometry::Euclidean { 1.0 } else { scale };
        Ok(Self { geometry, scale, dim })
    }

    /// Round sphere `S^d(R)`.
    pub fn sphere(radius: f64, dim: usize) -> Result<Self> {
        Self::new(Geometry::Spherical, radius, dim)
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(Geometry::Euclidean, 1.0, dim)
    }

    /// Hyperbolic space of constant curvature `curvature < 0`.
    pub fn hyperbolic(curvature: f64, dim: usize) -> Result<Self> {
        if !(curvature < 0.0) {
            return invalid(format!("hyperbolic curvature must be negative, got {curvature}"));
        }
        Self::new(Geometry::Hyperbolic, 1.0 / (-curvature).sqrt(), dim)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sectional curvature: `1/R²`, `0`, or `-1/scale²`.
    pub fn curvature(&self) -> f64 {
        match self.geometry {
            Geometry::Spherical => 1.0 / (self.scale * self.scale),
            Geometry::Euclidean => 0.0,
            Geometry::Hyperbolic => -1.0 / (self.scale * self.scale),
        }
    }

    /// Largest admissible geodesic radius (`πR` on spheres, infinite otherwise).
    pub fn max_radius(&self) -> f64 {
        match self.geometry {
            Geometry::Spherical => PI * self.scale,
            _ => f64::INFINITY,
        }
    }

    /// Total volume of a spherical space, `None` for non-compact ones.
    pub fn total_volume(&self) -> Option<f64> {
        match self.geometry {
            Geometry::Spherical => Some(self.ball_volume_unchecked(self.max_radius())),
            _ => None,
        }
    }

    fn check_radius(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t > self.max_radius() * (1.0 + 1e-15) {
            return domain(format!(
                "geodesic radius {t} outside [0, {}]",
                self.max_radius()
            ));
        }
        Ok(())
    }

    /// The warping function `s(t)` of the metric `dt² + s(t)² dθ²`.
    pub fn metric_coefficient(&self, t: f64) -> Result<f64> {
        self.check_radius(t)?;
        Ok(self.warp(t))
    }

    pub(crate) fn warp(&self, t: f64) -> f64 {
        match self.geometry {
            Geometry::Spherical => self.scale * (t / self.scale).sin(),
            Geometry::Euclidean => t,
            Geometry::Hyperbolic => self.scale * (t / self.scale).sinh(),
        }
    }

    /// `(d-1)`-measure of the geodesic sphere of radius `r`: `β_{d-1} s(r)^{d-1}`.
    pub fn geodesic_sphere_area(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.sphere_area_unchecked(r))
    }

    pub(crate) fn sphere_area_unchecked(&self, r: f64) -> f64 {
        unit_sphere_area(self.dim) * self.warp(r).powi(self.dim as i32 - 1)
    }

    /// Volume of the geodesic ball of radius `r`.
    pub fn geodesic_ball_volume(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.ball_volume_unchecked(r.min(self.max_radius())))
    }

    pub(crate) fn ball_volume_unchecked(&self, r: f64) -> f64 {
        let a = self.scale;
        let th = r / a;
        match (self.geometry, self.dim) {
            (_, 1) => 2.0 * r,
            (Geometry::Euclidean, 2) => PI * r * r,
            (Geometry::Euclidean, 3) => 4.0 / 3.0 * PI * r * r * r,
            (Geometry::Spherical, 2) => 4.0 * PI * a * a * (0.5 * th).sin().powi(2),
            (Geometry::Hyperbolic, 2) => 4.0 * PI * a * a * (0.5 * th).sinh().powi(2),
            (Geometry::Spherical, 3) => PI * a.powi(3) * double_angle_defect(2.0 * th, false),
            (Geometry::Hyperbolic, 3) => PI * a.powi(3) * double_angle_defect(2.0 * th, true),
            _ => adaptive_simpson(|t| self.sphere_area_unchecked(t), 0.0, r, VOLUME_QUAD_TOL),
        }
    }

    /// Geodesic radius of the ball with volume `volume`.
    ///
    /// Bisection to a narrow bracket, then Newton steps kept inside it.
    pub fn cap_radius_for_volume(&self, volume: f64) -> Result<f64> {
        if !(volume > 0.0) || !volume.is_finite() {
            return domain(format!("ball volume must be positive, got {volume}"));
        }
        let (mut lo, mut hi) = match self.total_volume() {
            Some(total) => {
                if volume >= total {
                    return domain(format!(
                        "ball volume {volume} is not below the total volume {total}"
                    ));
                }
                (0.0, self.max_radius())
            }
            None => {
                let mut hi = self.scale;
                while self.ball_volume_unchecked(hi) < volume {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return domain("ball volume too large to invert");
                    }
                }
                (0.0, hi)
            }
        };

        let mut iter = 0;
        while iter < ROOT_MAX_ITER && hi - lo > 1e-4 * hi {
            let mid = 0.5 * (lo + hi);
            if self.ball_volume_unchecked(mid) < volume {
                lo = mid;
            } else {
                hi = mid;
            }
            iter += 1;
        }

        let mut r = 0.5 * (lo + hi);
        while iter < ROOT_MAX_ITER {
            iter += 1;
            let f = self.ball_volume_unchecked(r) - volume;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
            let slope = self.sphere_area_unchecked(r);
            let mut next = r - f / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - r).abs();
            r = next;
            if step <= 4.0 * f64::EPSILON * r {
                break;
            }
        }
        Ok(r)
    }
}

/// `(2θ ∓ sin 2θ)`-type defects, accurate for small arguments:
/// returns `x - sin x` (spherical) or `sinh x - x` (hyperbolic).
fn double_angle_defect(x: f64, hyperbolic: bool) -> f64 {
    if x.abs() < 0.5 {
        // x³/3! ± x⁵/5! + x⁷/7! ± ...
        let sign = if hyperbolic { 1.0 } else { -1.0 };
        let x2 = x * x;
        let mut term = x * x2 / 6.0;
        let mut acc = term;
        let mut k = 3.0;
        for _ in 0..10 {
            term *= sign * x2 / ((k + 1.0) * (k + 2.0));
            acc += term;
            k += 2.0;
        }
        acc
    } else if hyperbolic {
        x.sinh() - x
    } else {
        x - x.sin()
    }
}

/// A geodesic ball `B(x₀, ρ)` in a model space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicBall {
    space: ModelSpace,
    radius: f64,
}

impl GeodesicBall {
    pub fn new(space: ModelSpace, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return domain(format!("ball radius must be positive, got {radius}"));
        }
        if space.geometry() == Geometry::Spherical && radius >= space.max_radius() {
            return domain(format!(
                "ball radius {radius} must be below πR = {}",
                space.max_radius()
            ));
        }
        Ok(Self { space, radius })
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn volume(&self) -> f64 {
        self.space.ball_volume_unchecked(self.radius)
    }

    pub fn boundary_area(&self) -> f64 {
        self.space.sphere_area_unchecked(self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_simpson;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn metric_coefficient_examples() {
        let e = ModelSpace::euclidean(2).unwrap();
        assert_eq!(e.metric_coefficient(0.7).unwrap(), 0.7);
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(close(s.metric_coefficient(PI / 2.0).unwrap(), 1.0, 1e-15));
        let h = ModelSpace::hyperbolic(-1.0, 2).unwrap();
        // sinh(1) = (e - 1/e)/2
        let oracle = (1f64.exp() - (-1f64).exp()) / 2.0;
        assert!(close(h.metric_coefficient(1.0).unwrap(), oracle, 1e-15));
        assert!((oracle - 1.175_201_193_643_801_4).abs() < 1e-15);
    }

    #[test]
    fn metric_coefficient_rejects_out_of_range() {
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(s.metric_coefficient(-0.1).is_err());
        assert!(s.metric_coefficient(3.2).is_err());
    }

    #[test]
    fn sphere_area_examples() {
        let e = ModelSpace::euclidean(2).unwrap();
        assert!(close(e.geodesic_sphere_area(1.0).unwrap(), 2.0 * PI, 1e-14));
        let s2 = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(close(s2.geodesic_sphere_area(PI / 2.0).unwrap(), 2.0 * PI, 1e-14));
        let s3 = ModelSpace::sphere(1.0, 3).unwrap();
        let oracle = 4.0 * PI * 1f64.sin().powi(2);
        assert!(close(s3.geodesic_sphere_area(1.0).unwrap(), oracle, 1e-14));
    }

    #[test]
    fn ball_volume_examples() {
        let e = ModelSpace::euclidean(2).unwrap();
        assert!(close(e.geodesic_ball_volume(1.0).unwrap(), PI, 1e-15));
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(close(s.geodesic_ball_volume(PI).unwrap(), 4.0 * PI, 1e-15));
        let half = adaptive_simpson(|t| 2.0 * PI * t.sin(), 0.0, PI / 2.0, 1e-13);
        assert!(close(s.geodesic_ball_volume(PI / 2.0).unwrap(), half, 1e-12));
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for space in [
            ModelSpace::sphere(1.3, 3).unwrap(),
            ModelSpace::hyperbolic(-0.7, 3).unwrap(),
            ModelSpace::hyperbolic(-2.0, 2).unwrap(),
            ModelSpace::euclidean(3).unwrap(),
        ] {
            for r in [1e-3, 0.1, 0.9, 2.0] {
                let quad = adaptive_simpson(|t| space.sphere_area_unchecked(t), 0.0, r, 1e-14);
                let closed = space.geodesic_ball_volume(r).unwrap();
                assert!(
                    (quad - closed).abs() <= 1e-11 * closed.max(1e-300),
                    "{space:?} r={r}: {quad} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn one_dimensional_ball() {
        let e = ModelSpace::euclidean(1).unwrap();
        assert_eq!(e.geodesic_ball_volume(0.3).unwrap(), 0.6);
        assert!(close(e.geodesic_sphere_area(0.3).unwrap(), 2.0, 1e-15));
    }

    #[test]
    fn total_sphere_volume_matches_sine_power_integral() {
        for d in 2..=6 {
            let s = ModelSpace::sphere(0.8, d).unwrap();
            let integral = adaptive_simpson(|t| t.sin().powi(d as i32 - 1), 0.0, PI, 1e-14);
            let oracle = unit_sphere_area(d) * 0.8f64.powi(d as i32) * integral;
            assert!(close(s.total_volume().unwrap(), oracle, 1e-10), "d={d}");
        }
    }

    #[test]
    fn cap_radius_examples() {
        let e = ModelSpace::euclidean(2).unwrap();
        assert!(close(e.cap_radius_for_volume(PI).unwrap(), 1.0, 1e-14));
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(close(s.cap_radius_for_volume(2.0 * PI).unwrap(), PI / 2.0, 1e-14));
        let eps = 1e-3;
        let r = s.cap_radius_for_volume(4.0 * PI * (1.0 - eps)).unwrap();
        // 2π(1 - cos r) = 4π(1 - ε)  ⇒  r = arccos(2ε - 1)
        let oracle = (2.0 * eps - 1.0).acos();
        assert!(r.is_finite() && r < PI);
        assert!(close(r, oracle, 1e-12), "{r} vs {oracle}");
    }

    #[test]
    fn cap_radius_rejects_bad_volumes() {
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(s.cap_radius_for_volume(0.0).is_err());
        assert!(s.cap_radius_for_volume(4.0 * PI).is_err());
        assert!(s.cap_radius_for_volume(-1.0).is_err());
    }

    #[test]
    fn ball_constructor_validates() {
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        assert!(GeodesicBall::new(s, PI).is_err());
        assert!(GeodesicBall::new(s, 0.0).is_err());
        assert!(GeodesicBall::new(s, 1.0).is_ok());
        assert!(ModelSpace::sphere(-1.0, 2).is_err());
        assert!(ModelSpace::euclidean(0).is_err());
    }

    fn any_space() -> impl Strategy<Value = ModelSpace> {
        (0usize..3, 1usize..=4, 0.3f64..3.0).prop_map(|(g, d, scale)| match g {
            0 => ModelSpace::sphere(scale, d).unwrap(),
            1 => ModelSpace::euclidean(d).unwrap(),
            _ => ModelSpace::hyperbolic(-1.0 / (scale * scale), d).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn radius_volume_round_trip(space in any_space(), frac in 1e-3f64..0.99) {
            let r = if space.geometry() == Geometry::Spherical {
                frac * space.max_radius()
            } else {
                frac * 5.0 * space.scale()
            };
            let v = space.geodesic_ball_volume(r).unwrap();
            let back = space.cap_radius_for_volume(v).unwrap();
            prop_assert!((back - r).abs() <= 1e-10 * r, "{:?}: {} -> {} -> {}", space, r, v, back);
        }

        #[test]
        fn ball_volume_strictly_increasing(space in any_space(), a in 1e-3f64..0.98, gap in 1e-4f64..0.01) {
            let top = if space.geometry() == Geometry::Spherical { space.max_radius() } else { 5.0 * space.scale() };
            let r0 = a * top;
            let r1 = (a + gap) * top;
            prop_assert!(space.geodesic_ball_volume(r1).unwrap() > space.geodesic_ball_volume(r0).unwrap());
        }
    }
}

//! Poisson hierarchy on geodesic balls through the radial representation
//! `v(r) = ∫_r^ρ s(τ)^{1-d} ∫_0^τ s(ξ)^{d-1} f(ξ) dξ dτ`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::model_space::{GeodesicBall, ModelSpace};
use crate::numerics::{
    cumulative_from_start, cumulative_to_end, factorial, integrate_uniform, interpolate_uniform,
};
use crate::spectral::MomentSequence;

/// Default number of radial nodes.
pub const DEFAULT_RADII: usize = 4096;

/// A function of geodesic distance from the centre of a ball, sampled on a
/// strictly increasing grid over `[0, ρ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    space: ModelSpace,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(space: ModelSpace, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 {
            return invalid("a radial field needs at least two nodes");
        }
        if radii.len() != values.len() {
            return invalid(format!(
                "{} radii but {} values",
                radii.len(),
                values.len()
            ));
        }
        if radii[0] != 0.0 {
            return invalid("radial grid must start at 0");
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("radial grid must be strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("radial field values must be finite");
        }
        space.metric_coefficient(*radii.last().unwrap())?;
        Ok(Self { space, radii, values })
    }

    /// Uniform grid of `n` nodes on `[0, ρ]` with values `f(r)`.
    pub fn from_fn(space: ModelSpace, rho: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return invalid("a radial field needs at least two nodes");
        }
        let radii = uniform_radii(rho, n);
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(space, radii, values)
    }

    pub fn constant(space: ModelSpace, rho: f64, n: usize, c: f64) -> Result<Self> {
        Self::from_fn(space, rho, n, |_| c)
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Outer radius `ρ`.
    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Spacing of the grid, or `None` if it is not uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        let n = self.radii.len() - 1;
        let h = self.outer_radius() / n as f64;
        let uniform = self
            .radii
            .iter()
            .enumerate()
            .all(|(i, r)| (r - i as f64 * h).abs() <= 1e-9 * h);
        uniform.then_some(h)
    }

    /// `∫_B f dV` with the fourth-order rule (uniform grids only).
    pub fn integrate(&self) -> Result<f64> {
        let h = self.require_uniform()?;
        let weighted: Vec<f64> = self
            .radii
            .iter()
            .zip(&self.values)
            .map(|(&r, v)| v * self.space.sphere_area_unchecked(r))
            .collect();
        Ok(integrate_uniform(&weighted, h))
    }

    fn require_uniform(&self) -> Result<f64> {
        self.uniform_step()
            .ok_or_else(|| crate::error::Error::InvalidInput("radial grid is not uniform".into()))
    }

    fn matches(&self, ball: &GeodesicBall) -> bool {
        self.space == *ball.space()
            && (self.outer_radius() - ball.radius()).abs() <= 1e-12 * ball.radius()
    }
}

fn uniform_radii(rho: f64, n: usize) -> Vec<f64> {
    let h = rho / (n - 1) as f64;
    let mut radii: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    radii[n - 1] = rho;
    radii
}

/// Outward flux `g(r) = s(r)^{1-d} ∫_0^r s^{d-1} f` and solution
/// `v(r) = ∫_r^ρ g` on a uniform grid.
fn solve_uniform(space: &ModelSpace, radii: &[f64], h: f64, rhs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = space.dim() as i32;
    let source: Vec<f64> = radii
        .iter()
        .zip(rhs)
        .map(|(&r, f)| space.warp(r).powi(d - 1) * f)
        .collect();
    let inner = cumulative_from_start(&source, h);
    let flux: Vec<f64> = radii
        .iter()
        .zip(&inner)
        .enumerate()
        .map(|(i, (&r, m))| {
            if d == 1 {
                *m
            } else if i == 0 {
                // g(τ) ≈ τ f(0) / d near the centre
                0.0
            } else {
                m / space.warp(r).powi(d - 1)
            }
        })
        .collect();
    let solution = cumulative_to_end(&flux, h);
    (flux, solution)
}

/// Solves `-Δv = f` on the ball with `v = 0` on its boundary for radial `f ≥ 0`.
pub fn radial_poisson_solve(ball: &GeodesicBall, rhs: &RadialField) -> Result<RadialField> {
    if !rhs.matches(ball) {
        return invalid("right-hand side is not sampled on this ball");
    }
    let h = rhs.require_uniform()?;
    if let Some(v) = rhs.values.iter().find(|v| **v < 0.0) {
        return invalid(format!("right-hand side must be nonnegative, found {v}"));
    }
    let (_, v) = solve_uniform(&rhs.space, &rhs.radii, h, &rhs.values);
    RadialField::new(rhs.space, rhs.radii.clone(), v)
}

/// The Poisson hierarchy on a ball, stored as `w_n = u_n / n!` so that
/// `-Δ w_n = w_{n-1}` and `∫ w_n = T_n / n!`.
#[derive(Debug, Clone)]
pub struct BallHierarchy {
    ball: GeodesicBall,
    radii: Vec<f64>,
    step: f64,
    scaled: Vec<Vec<f64>>,
    fluxes: Vec<Vec<f64>>,
    moments: MomentSequence,
}

impl BallHierarchy {
    pub fn ball(&self) -> &GeodesicBall {
        &self.ball
    }

    pub fn moments(&self) -> &MomentSequence {
        &self.moments
    }

    pub fn depth(&self) -> usize {
        self.scaled.len()
    }

    /// `u_n = 𝔼^x[τ^n]` as a radial field, `1 ≤ n ≤ N`.
    pub fn profile(&self, n: usize) -> RadialField {
        let f = factorial(n);
        let values = self.scaled[n - 1].iter().map(|w| w * f).collect();
        RadialField { space: *self.ball.space(), radii: self.radii.clone(), values }
    }

    /// `u_n / n!` as a radial field.
    pub fn scaled_profile(&self, n: usize) -> RadialField {
        RadialField {
            space: *self.ball.space(),
            radii: self.radii.clone(),
            values: self.scaled[n - 1].clone(),
        }
    }

    fn weighted_integral(&self, integrand: impl Fn(usize) -> f64) -> f64 {
        let space = self.ball.space();
        let vals: Vec<f64> = self
            .radii
            .iter()
            .enumerate()
            .map(|(i, &r)| integrand(i) * space.sphere_area_unchecked(r))
            .collect();
        integrate_uniform(&vals, self.step)
    }

    /// `∫ |∇w_k|² dV`; equals `T_{2k-1}/(2k-1)!` for the exact solution.
    pub fn scaled_energy(&self, k: usize) -> f64 {
        let g = &self.fluxes[k - 1];
        self.weighted_integral(|i| g[i] * g[i])
    }

    /// `∫ w_k² dV`; equals `T_{2k}/(2k)!` for the exact solution.
    pub fn scaled_l2(&self, k: usize) -> f64 {
        let w = &self.scaled[k - 1];
        self.weighted_integral(|i| w[i] * w[i])
    }

    /// `∫ |∇u_k|² dV`.
    pub fn energy(&self, k: usize) -> f64 {
        self.scaled_energy(k) * factorial(k).powi(2)
    }

    /// `∫ u_k² dV`.
    pub fn l2_norm_sq(&self, k: usize) -> f64 {
        self.scaled_l2(k) * factorial(k).powi(2)
    }
}

/// Runs the hierarchy `-Δu_n = n u_{n-1}`, `u_0 ≡ 1`, for `n = 1..=N` on a
/// uniform grid of `n_radii` nodes.
pub fn moment_hierarchy_ball(ball: &GeodesicBall, count: usize, n_radii: usize) -> Result<BallHierarchy> {
    if count == 0 {
        return invalid("at least one moment is required");
    }
    if n_radii < 8 {
        return invalid(format!("need at least 8 radial nodes, got {n_radii}"));
    }
    let space = *ball.space();
    let radii = uniform_radii(ball.radius(), n_radii);
    let h = ball.radius() / (n_radii - 1) as f64;
    let area: Vec<f64> = radii.iter().map(|&r| space.sphere_area_unchecked(r)).collect();

    let mut prev = vec![1.0; n_radii];
    let mut scaled = Vec::with_capacity(count);
    let mut fluxes = Vec::with_capacity(count);
    let mut moments = Vec::with_capacity(count);
    for _ in 0..count {
        let (g, w) = solve_uniform(&space, &radii, h, &prev);
        let weighted: Vec<f64> = w.iter().zip(&area).map(|(a, b)| a * b).collect();
        moments.push(integrate_uniform(&weighted, h));
        fluxes.push(g);
        scaled.push(w.clone());
        prev = w;
    }
    let moments = MomentSequence::from_scaled(ball.volume(), moments)?;
    Ok(BallHierarchy { ball: *ball, radii, step: h, scaled, fluxes, moments })
}

/// `u_n(r) = 𝔼^x[τ^n]` at `|x| = r`, by cubic interpolation of the profile.
pub fn pointwise_moment(ball: &GeodesicBall, u: &RadialField, r: f64) -> Result<f64> {
    if !u.matches(ball) {
        return invalid("profile is not sampled on this ball");
    }
    if !(r >= 0.0) || r > ball.radius() {
        return domain(format!("radius {r} outside [0, {}]", ball.radius()));
    }
    if r == ball.radius() {
        return Ok(*u.values.last().unwrap());
    }
    let h = u.require_uniform()?;
    Ok(interpolate_uniform(&u.values, 0.0, h, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    fn interval() -> GeodesicBall {
        GeodesicBall::new(ModelSpace::euclidean(1).unwrap(), 0.5).unwrap()
    }

    fn disc() -> GeodesicBall {
        GeodesicBall::new(ModelSpace::euclidean(2).unwrap(), 1.0).unwrap()
    }

    fn hemisphere() -> GeodesicBall {
        GeodesicBall::new(ModelSpace::sphere(1.0, 2).unwrap(), FRAC_PI_2).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn disc_torsion_function() {
        let b = disc();
        let rhs = RadialField::constant(*b.space(), 1.0, 1025, 1.0).unwrap();
        let v = radial_poisson_solve(&b, &rhs).unwrap();
        for (r, val) in v.radii().iter().zip(v.values()) {
            assert!((val - (1.0 - r * r) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hemisphere_torsion_function() {
        let b = hemisphere();
        let rhs = RadialField::constant(*b.space(), FRAC_PI_2, 2049, 1.0).unwrap();
        let v = radial_poisson_solve(&b, &rhs).unwrap();
        for (t, val) in v.radii().iter().zip(v.values()) {
            assert!((val - (1.0 + t.cos()).ln()).abs() < 1e-9, "θ={t}");
        }
        assert!((v.values()[0] - LN_2).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let b = disc();
        let rhs = RadialField::constant(*b.space(), 1.0, 64, 0.0).unwrap();
        let v = radial_poisson_solve(&b, &rhs).unwrap();
        assert!(v.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn rejects_negative_rhs_and_mismatch() {
        let b = disc();
        let rhs = RadialField::from_fn(*b.space(), 1.0, 64, |r| 0.5 - r).unwrap();
        assert!(radial_poisson_solve(&b, &rhs).is_err());
        let other = RadialField::constant(*b.space(), 0.9, 64, 1.0).unwrap();
        assert!(radial_poisson_solve(&b, &other).is_err());
    }

    #[test]
    fn closed_form_moments() {
        let h = moment_hierarchy_ball(&interval(), 2, DEFAULT_RADII).unwrap();
        assert!(rel(h.moments().moment(1), 1.0 / 12.0) < 1e-8);
        assert!(rel(h.moments().moment(2), 1.0 / 60.0) < 1e-8);
        let h = moment_hierarchy_ball(&disc(), 1, DEFAULT_RADII).unwrap();
        assert!(rel(h.moments().moment(1), PI / 8.0) < 1e-7);
        let h = moment_hierarchy_ball(&hemisphere(), 1, DEFAULT_RADII).unwrap();
        assert!(rel(h.moments().moment(1), 2.0 * PI * (2.0 * LN_2 - 1.0)) < 1e-6);
    }

    #[test]
    fn pointwise_examples() {
        let b = interval();
        let h = moment_hierarchy_ball(&b, 1, 513).unwrap();
        let u1 = h.profile(1);
        assert!((pointwise_moment(&b, &u1, 0.0).unwrap() - 0.125).abs() < 1e-12);
        assert!((pointwise_moment(&b, &u1, 0.3).unwrap() - (0.25 - 0.09) / 2.0).abs() < 1e-10);
        let b = disc();
        let u1 = moment_hierarchy_ball(&b, 1, 513).unwrap().profile(1);
        assert_eq!(pointwise_moment(&b, &u1, 1.0).unwrap(), 0.0);
        assert!(pointwise_moment(&b, &u1, 1.1).is_err());
        let b = hemisphere();
        let u1 = moment_hierarchy_ball(&b, 1, 1025).unwrap().profile(1);
        assert!((pointwise_moment(&b, &u1, 0.0).unwrap() - LN_2).abs() < 1e-9);
    }

    #[test]
    fn energy_and_l2_identities_on_disc() {
        let h = moment_hierarchy_ball(&disc(), 8, DEFAULT_RADII).unwrap();
        let m = h.moments();
        for k in 1..=4 {
            let e = h.energy(k);
            let target = factorial(k).powi(2) / factorial(2 * k - 1) * m.moment(2 * k - 1);
            assert!(rel(e, target) < 1e-6, "energy k={k}");
            let l = h.l2_norm_sq(k);
            let target = factorial(k).powi(2) / factorial(2 * k) * m.moment(2 * k);
            assert!(rel(l, target) < 1e-6, "L2 k={k}");
        }
    }

    #[test]
    fn profiles_nonnegative_and_nonincreasing() {
        for b in [interval(), disc(), hemisphere()] {
            let h = moment_hierarchy_ball(&b, 5, 1024).unwrap();
            for n in 1..=5 {
                let u = h.profile(n);
                let v = u.values();
                assert!(v.iter().all(|x| *x >= 0.0));
                assert!(v.windows(2).all(|w| w[1] <= w[0]));
                assert_eq!(*v.last().unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn refinement_order_on_disc_and_hemisphere() {
        // the disc T_1 is reproduced exactly by the cubic rule, so use T_2, T_3
        let order = |b: &GeodesicBall, n: usize, exact: f64| {
            let e1 = rel(moment_hierarchy_ball(b, n, 65).unwrap().moments().moment(n), exact);
            let e2 = rel(moment_hierarchy_ball(b, n, 129).unwrap().moments().moment(n), exact);
            (e1 / e2).log2()
        };
        // w_2 = (3 - 4r² + r⁴)/64 on the disc, so T_2 = 2 ∫ w_2 = π/24
        assert!(order(&disc(), 2, PI / 24.0) >= 1.9);
        assert!(order(&hemisphere(), 1, 2.0 * PI * (2.0 * LN_2 - 1.0)) >= 1.9);
    }

    #[test]
    fn hyperbolic_ball_matches_volume_scaling() {
        // tiny balls look Euclidean: T_1 ≈ π ρ⁴ / 8
        let b = GeodesicBall::new(ModelSpace::hyperbolic(-1.0, 2).unwrap(), 1e-3).unwrap();
        let h = moment_hierarchy_ball(&b, 1, 257).unwrap();
        assert!(rel(h.moments().moment(1), PI * 1e-12 / 8.0) < 1e-5);
    }
}

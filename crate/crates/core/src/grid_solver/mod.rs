//! Finite-volume Dirichlet Laplacian on masked domains of the flat torus
//! and the round sphere: Poisson solves, the moment hierarchy and low
//! eigenpairs.

mod domain;
mod eigen;
pub mod io;
mod mask;
mod sparse;
mod surface;

use serde::{Deserialize, Serialize};

pub use domain::{build_domain, GridDomain};
pub use eigen::{dirichlet_eigenpairs, EigenDecomposition, DEFAULT_A_SQ_FLOOR, EIGEN_RESIDUAL_TOL};
pub use mask::{evaluate_mask, geodesic_distance, MaskSpec};
pub use sparse::SolveStats;
pub use surface::{ClosedSurface, MIN_RESOLUTION};

use crate::error::{invalid, Result};
use crate::numerics::factorial;
use crate::spectral::MomentSequence;

/// Relative weighted residual targeted by the Poisson solver.
pub const SOLVE_TOL: f64 = 1e-12;
/// Largest relative weighted residual accepted from the Poisson solver,
/// unless the rounding floor reported in [`SolveStats`] is larger.
pub const SOLVE_ACCEPT: f64 = 1e-10;

/// A function on the interior nodes of a [`GridDomain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("grid field values must be finite, found {v}"));
        }
        Ok(Self { values })
    }

    pub fn constant(domain: &GridDomain, c: f64) -> Result<Self> {
        Self::new(vec![c; domain.interior_len()])
    }

    /// Samples `f(a, b)` at the interior node coordinates.
    pub fn from_fn(domain: &GridDomain, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(
            domain
                .interior_nodes()
                .iter()
                .map(|&n| {
                    let (a, b) = domain.surface().coordinates(n);
                    f(a, b)
                })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn solve_raw(domain: &GridDomain, rhs: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let b: Vec<f64> = rhs.iter().zip(domain.weights()).map(|(f, w)| f * w).collect();
    domain.solve_stiffness(&b, SOLVE_TOL, SOLVE_ACCEPT)
}

/// Solves `L u = f` with zero boundary values, returning the solution and
/// the solver statistics.
pub fn poisson_solve_with_stats(domain: &GridDomain, rhs: &GridField) -> Result<(GridField, SolveStats)> {
    if rhs.len() != domain.interior_len() {
        return invalid(format!(
            "right-hand side has {} values for {} interior nodes",
            rhs.len(),
            domain.interior_len()
        ));
    }
    let (u, stats) = solve_raw(domain, rhs.values())?;
    Ok((GridField::new(u)?, stats))
}

/// Solves `-Δu = f` on the domain with `u = 0` on its boundary.
pub fn poisson_solve(domain: &GridDomain, rhs: &GridField) -> Result<GridField> {
    poisson_solve_with_stats(domain, rhs).map(|(u, _)| u)
}

/// The discrete hierarchy `L w_n = w_{n-1}`, `w_0 = 1`, with `w_n = u_n/n!`.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    scaled: Vec<Vec<f64>>,
    moments: MomentSequence,
    max_residual: f64,
}

impl GridHierarchy {
    pub fn moments(&self) -> &MomentSequence {
        &self.moments
    }

    pub fn depth(&self) -> usize {
        self.scaled.len()
    }

    /// `u_n = n! w_n`.
    pub fn field(&self, n: usize) -> GridField {
        let f = factorial(n);
        GridField { values: self.scaled[n - 1].iter().map(|w| w * f).collect() }
    }

    /// `w_n = u_n / n!`.
    pub fn scaled_field(&self, n: usize) -> &[f64] {
        &self.scaled[n - 1]
    }

    /// Largest relative residual over the Poisson solves.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// `⟨L w_k, w_k⟩_w = w_kᵀ A w_k`; equals `T_{2k-1}/(2k-1)!` in exact
    /// arithmetic.
    pub fn scaled_energy(&self, domain: &GridDomain, k: usize) -> f64 {
        let w = &self.scaled[k - 1];
        sparse::dot(w, &domain.apply_stiffness(w))
    }

    /// `⟨w_k, w_k⟩_w`; equals `T_{2k}/(2k)!` in exact arithmetic.
    pub fn scaled_l2(&self, domain: &GridDomain, k: usize) -> f64 {
        let w = &self.scaled[k - 1];
        domain.weighted_dot(w, w)
    }
}

/// Runs the Poisson hierarchy `-Δu_n = n u_{n-1}` for `n = 1..=count`;
/// `T_n = Σ_i w_i u_n(i)`.
pub fn moment_hierarchy_grid(domain: &GridDomain, count: usize) -> Result<GridHierarchy> {
    if count == 0 {
        return invalid("at least one moment is required");
    }
    let mut prev = vec![1.0; domain.interior_len()];
    let mut scaled = Vec::with_capacity(count);
    let mut moments = Vec::with_capacity(count);
    let mut max_residual: f64 = 0.0;
    for _ in 0..count {
        let (w, stats) = solve_raw(domain, &prev)?;
        max_residual = max_residual.max(stats.residual);
        moments.push(domain.integrate(&w));
        scaled.push(w.clone());
        prev = w;
    }
    let moments = MomentSequence::from_scaled(domain.volume(), moments)?;
    Ok(GridHierarchy { scaled, moments, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{LN_2, PI};

    fn band(n: usize) -> GridDomain {
        let t = ClosedSurface::flat_torus(1.0, 1.0, n, n).unwrap();
        build_domain(&t, &MaskSpec::Rectangle { lo: [0.0, 0.25], hi: [1.0, 0.75] }).unwrap()
    }

    #[test]
    fn zero_rhs() {
        let d = band(32);
        let u = poisson_solve(&d, &GridField::constant(&d, 0.0).unwrap()).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn band_profile_is_exact() {
        // the 5-point stencil is exact on quadratics
        let d = band(64);
        let (u, stats) = poisson_solve_with_stats(&d, &GridField::constant(&d, 1.0).unwrap()).unwrap();
        assert!(stats.residual <= SOLVE_ACCEPT);
        for (slot, &node) in d.interior_nodes().iter().enumerate() {
            let (_, y) = d.surface().coordinates(node);
            let exact = (y - 0.25) * (0.75 - y) / 2.0;
            assert!((u.values()[slot] - exact).abs() < 1e-11);
        }
        assert!((u.max() - 1.0 / 32.0).abs() < 1e-11);
    }

    #[test]
    fn band_torsional_rigidity() {
        let h = moment_hierarchy_grid(&band(64), 3).unwrap();
        assert!((h.moments().moment(1) - 0.5f64.powi(3) / 12.0).abs() < 1e-4);
        assert!((h.moments().volume() - 0.5).abs() < 1e-12);
        for n in 1..=3 {
            assert!(h.moments().moment(n) > 0.0);
            assert!(h.field(n).min() >= 0.0);
        }
    }

    #[test]
    fn discrete_identities() {
        let t = ClosedSurface::flat_torus(1.0, 1.0, 64, 64).unwrap();
        let d = build_domain(&t, &MaskSpec::Cap { center: [0.4, 0.5], radius: 0.3 }).unwrap();
        let h = moment_hierarchy_grid(&d, 6).unwrap();
        for k in 1..=3 {
            let e = h.scaled_energy(&d, k);
            let l = h.scaled_l2(&d, k);
            let s = h.moments().scaled_moments();
            assert!((e / s[2 * k - 2] - 1.0).abs() < 1e-9, "energy k={k}");
            assert!((l / s[2 * k - 1] - 1.0).abs() < 1e-9, "L2 k={k}");
        }
    }

    #[test]
    fn self_adjoint_on_random_fields() {
        let s = ClosedSurface::round_sphere(1.0, 32, 64).unwrap();
        let d = build_domain(&s, &MaskSpec::Rectangle { lo: [0.6, 0.3], hi: [2.2, 3.5] }).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let u: Vec<f64> = (0..d.interior_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..d.interior_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = d.weighted_dot(&d.apply_laplacian(&u), &v);
            let b = d.weighted_dot(&u, &d.apply_laplacian(&v));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
        }
    }

    #[test]
    fn hemisphere_matches_radial_solution() {
        let s = ClosedSurface::round_sphere(1.0, 64, 128).unwrap();
        let d = build_domain(&s, &MaskSpec::Cap { center: [0.0, 0.0], radius: PI / 2.0 }).unwrap();
        let u = poisson_solve(&d, &GridField::constant(&d, 1.0).unwrap()).unwrap();
        let err = d
            .interior_nodes()
            .iter()
            .zip(u.values())
            .map(|(&n, v)| (v - (1.0 + s.coordinates(n).0.cos()).ln()).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "max error {err}");
        assert!((u.max() - LN_2).abs() < 5e-3);
    }

    #[test]
    fn rejects_mismatched_rhs() {
        let d = band(32);
        assert!(poisson_solve(&d, &GridField::new(vec![1.0; 3]).unwrap()).is_err());
    }
}

//! Checks of the comparison inequalities: moment spectra against the
//! symmetrized cap, pointwise comparison of Poisson solutions, the Cheeger
//! bound from moments and the Faber-Krahn ordering.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::grid_solver::{
    dirichlet_eigenpairs, moment_hierarchy_grid, poisson_solve, ClosedSurface, GridDomain, GridField, MaskSpec,
};
use crate::iso_radius::{comparison_radius, RicciBoundInput};
use crate::model_space::{GeodesicBall, Geometry, ModelSpace};
use crate::numerics::{factorial, interpolate_uniform};
use crate::radial_solver::{moment_hierarchy_ball, radial_poisson_solve, RadialField, DEFAULT_RADII};
use crate::rearrange::{spherical_symmetrization, WeightedSample};
use crate::spectral::{recover_spectrum, MomentSequence};

/// Number of radial moments used to recover `λ_1` of a cap.
pub const CAP_RECOVERY_MOMENTS: usize = 24;

/// Which model sphere hosts the symmetrized domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SphereChoice {
    /// `S^d(R)` with `R` from the isoperimetric comparison.
    #[serde(rename = "bbg_R")]
    BbgR,
    /// `S^d(1/√K)`; requires `K > 0`.
    #[serde(rename = "sqrtK")]
    SqrtK,
}

impl fmt::Display for SphereChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SphereChoice::BbgR => "bbg_R",
            SphereChoice::SqrtK => "sqrtK",
        })
    }
}

/// The comparison sphere for a closed surface.
pub fn comparison_sphere(surface: &ClosedSurface, choice: SphereChoice) -> Result<ModelSpace> {
    let k = surface.curvature();
    let radius = match choice {
        SphereChoice::BbgR => comparison_radius(&RicciBoundInput::new(k, 2, surface.diameter())?)?,
        SphereChoice::SqrtK => {
            if !(k > 0.0) {
                return Err(Error::Hypothesis(format!("the sqrtK sphere needs K > 0, got K = {k}")));
            }
            1.0 / k.sqrt()
        }
    };
    ModelSpace::sphere(radius, 2)
}

/// The cap `Ω*` in `sphere` with `Vol(Ω*)/Vol(sphere) = vol_domain/vol_m`.
pub fn symmetrized_ball(vol_domain: f64, vol_m: f64, sphere: ModelSpace) -> Result<GeodesicBall> {
    if sphere.geometry() != Geometry::Spherical {
        return invalid("the symmetrization target must be a round sphere");
    }
    if !(vol_domain > 0.0) || !(vol_m > vol_domain) || !vol_m.is_finite() {
        return domain(format!("need 0 < Vol(Ω) < Vol(M), got {vol_domain} and {vol_m}"));
    }
    let total = sphere.total_volume().expect("spheres have finite volume");
    let radius = sphere.cap_radius_for_volume(total * (vol_domain / vol_m))?;
    GeodesicBall::new(sphere, radius)
}

fn describe(d: &GridDomain) -> String {
    match *d.surface() {
        ClosedSurface::FlatTorus { lx, ly, nx, ny } => {
            format!("flat torus {lx}x{ly} at {nx}x{ny}, Vol(Ω) = {}", d.volume())
        }
        ClosedSurface::RoundSphere { radius, ntheta, nphi } => {
            format!("round sphere R = {radius} at {ntheta}x{nphi}, Vol(Ω) = {}", d.volume())
        }
    }
}

/// Moment-spectrum comparison `T_n(Ω)/Vol(Ω) ≤ T_n(Ω*)/Vol(Ω*)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub domain: String,
    pub sphere_choice: SphereChoice,
    pub sphere_radius: f64,
    pub domain_volume: f64,
    pub ambient_volume: f64,
    pub cap_radius: f64,
    /// `T_n(Ω)/Vol(Ω)` for `n = 1..=N`.
    pub domain_ratios: Vec<f64>,
    /// `T_n(Ω*)/Vol(Ω*)`.
    pub cap_ratios: Vec<f64>,
    /// `cap ratio - domain ratio`.
    pub margins: Vec<f64>,
    /// Discretization error bound per `n`: the change of both ratios under
    /// halving the grid and radial resolutions, the cap being rebuilt from
    /// the coarse grid volume.
    pub budgets: Vec<f64>,
    /// `margin ≥ -budget`.
    pub pass: Vec<bool>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|p| *p)
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}\nsphere {} (R = {:.6}), cap radius {:.6}\n{:>3} {:>14} {:>14} {:>12} {:>11}  ok\n",
            self.domain, self.sphere_choice, self.sphere_radius, self.cap_radius, "n", "T_n/Vol (Ω)", "T_n/Vol (cap)", "margin", "budget"
        );
        for i in 0..self.margins.len() {
            s.push_str(&format!(
                "{:>3} {:>14.6e} {:>14.6e} {:>12.4e} {:>11.3e}  {}\n",
                i + 1,
                self.domain_ratios[i],
                self.cap_ratios[i],
                self.margins[i],
                self.budgets[i],
                if self.pass[i] { "yes" } else { "NO" }
            ));
        }
        s
    }
}

fn ratios(m: &MomentSequence) -> Vec<f64> {
    (1..=m.len()).map(|n| m.moment(n) / m.volume()).collect()
}

/// Builds `Ω*` (or `Ω**`), runs both hierarchies and compares the normalized
/// moments for `n = 1..=count`.
pub fn moment_comparison_report(domain: &GridDomain, count: usize, choice: SphereChoice) -> Result<ComparisonReport> {
    if count == 0 {
        return invalid("at least one moment is required");
    }
    let sphere = comparison_sphere(domain.surface(), choice)?;
    let vol = domain.volume();
    let vol_m = domain.ambient_volume();
    let cap = symmetrized_ball(vol, vol_m, sphere)?;

    let fine = moment_hierarchy_grid(domain, count)?;
    let coarse_domain = domain.coarsened()?;
    let coarse = moment_hierarchy_grid(&coarse_domain, count)?;
    let cap_fine = moment_hierarchy_ball(&cap, count, DEFAULT_RADII)?;
    // the coarse cap follows the coarse grid volume, so the budget also
    // covers the shift of Ω* with the discrete volume
    let cap_2h = symmetrized_ball(coarse_domain.volume(), vol_m, sphere)?;
    let cap_coarse = moment_hierarchy_ball(&cap_2h, count, DEFAULT_RADII / 2)?;

    let domain_ratios = ratios(fine.moments());
    let cap_ratios = ratios(cap_fine.moments());
    let coarse_ratios = ratios(coarse.moments());
    let cap_coarse_ratios = ratios(cap_coarse.moments());
    let margins: Vec<f64> = cap_ratios.iter().zip(&domain_ratios).map(|(c, d)| c - d).collect();
    let budgets: Vec<f64> = (0..count)
        .map(|i| (domain_ratios[i] - coarse_ratios[i]).abs() + (cap_ratios[i] - cap_coarse_ratios[i]).abs())
        .collect();
    let pass = margins.iter().zip(&budgets).map(|(m, b)| *m >= -b).collect();
    Ok(ComparisonReport {
        domain: describe(domain),
        sphere_choice: choice,
        sphere_radius: sphere.scale(),
        domain_volume: vol,
        ambient_volume: vol_m,
        cap_radius: cap.radius(),
        domain_ratios,
        cap_ratios,
        margins,
        budgets,
        pass,
    })
}

/// Pointwise comparison `u* ≤ v` on `Ω*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeComparison {
    pub domain: String,
    pub sphere_choice: SphereChoice,
    pub cap_radius: f64,
    pub radii: Vec<f64>,
    /// Symmetrization of the grid solution `u`.
    pub u_star: Vec<f64>,
    /// Radial solution of `-Δv = f*` on `Ω*`.
    pub v: Vec<f64>,
    /// `max (u* - v)`.
    pub violation: f64,
    /// `min (v - u*)`.
    pub min_gap: f64,
    /// Largest change of `u*` and `v` under halving the resolutions.
    pub budget: f64,
    pub pass: bool,
}

struct Profiles {
    cap: GeodesicBall,
    u_star: RadialField,
    v: RadialField,
}

/// `u = 0` on the boundary nodes, which carry half their cell.
fn boundary_extended(domain: &GridDomain, interior: &[f64], boundary: impl Fn(usize) -> f64) -> WeightedSample {
    let mut values = interior.to_vec();
    let mut weights = domain.weights().to_vec();
    for (k, &b) in domain.boundary_nodes().iter().enumerate() {
        values.push(boundary(k));
        weights.push(0.5 * domain.node_weight(b));
    }
    WeightedSample::new(values, weights, domain.ambient_volume()).expect("grid samples are valid")
}

fn profiles(domain: &GridDomain, f: &[f64], sphere: ModelSpace, n_radii: usize) -> Result<Profiles> {
    let cap = symmetrized_ball(domain.volume(), domain.ambient_volume(), sphere)?;
    let u = poisson_solve(domain, &GridField::new(f.to_vec())?)?;
    let u_sample = boundary_extended(domain, &u.values().iter().map(|x| x.max(0.0)).collect::<Vec<_>>(), |_| 0.0);
    let adjacency = domain.boundary_adjacency();
    let f_sample = boundary_extended(domain, f, |k| {
        let nb = &adjacency[k];
        nb.iter().map(|&s| f[s]).sum::<f64>() / nb.len() as f64
    });
    let u_star = spherical_symmetrization(&u_sample, &cap, n_radii)?;
    let f_star = spherical_symmetrization(&f_sample, &cap, n_radii)?;
    let v = radial_poisson_solve(&cap, &f_star)?;
    Ok(Profiles { cap, u_star, v })
}

/// Value of a uniform radial profile at `r`, zero outside its ball.
fn sample(field: &RadialField, r: f64) -> f64 {
    let rho = field.outer_radius();
    if r >= rho {
        return 0.0;
    }
    let h = rho / (field.len() - 1) as f64;
    interpolate_uniform(field.values(), 0.0, h, r)
}

fn sup_difference(a: &RadialField, b: &RadialField) -> f64 {
    a.radii().iter().map(|&r| (sample(a, r) - sample(b, r)).abs()).fold(0.0, f64::max)
}

/// Solves `-Δu = f` on the grid and `-Δv = f*` on `Ω*`, and compares `u*`
/// with `v`. Boundary nodes enter the rearrangement of `u` with value 0 and
/// half their cell; `f` there is the mean over interior neighbours.
pub fn pde_comparison_check(domain: &GridDomain, f: &GridField, choice: SphereChoice) -> Result<PdeComparison> {
    if f.len() != domain.interior_len() {
        return invalid("f does not match the domain");
    }
    if let Some(x) = f.values().iter().find(|x| **x < 0.0) {
        return invalid(format!("f must be nonnegative, found {x}"));
    }
    let sphere = comparison_sphere(domain.surface(), choice)?;
    let fine = profiles(domain, f.values(), sphere, DEFAULT_RADII)?;

    let coarse_domain = domain.coarsened()?;
    let map = domain.surface().coarse_to_fine(coarse_domain.surface());
    let f_coarse: Vec<f64> = coarse_domain
        .interior_nodes()
        .iter()
        .map(|&c| f.values()[domain.slot_of(map[c]).expect("coarse interior nodes are fine interior nodes")])
        .collect();
    let coarse = profiles(&coarse_domain, &f_coarse, sphere, DEFAULT_RADII / 2)?;

    let budget = sup_difference(&fine.u_star, &coarse.u_star) + sup_difference(&fine.v, &coarse.v);
    let gaps: Vec<f64> = fine.v.values().iter().zip(fine.u_star.values()).map(|(v, u)| v - u).collect();
    let violation = gaps.iter().map(|g| -g).fold(f64::NEG_INFINITY, f64::max);
    let min_gap = -violation;
    Ok(PdeComparison {
        domain: describe(domain),
        sphere_choice: choice,
        cap_radius: fine.cap.radius(),
        radii: fine.u_star.radii().to_vec(),
        u_star: fine.u_star.values().to_vec(),
        v: fine.v.values().to_vec(),
        violation,
        min_gap,
        budget,
        pass: violation <= budget,
    })
}

/// `C² ≤ Vol(Ω) (k!)²/(2k-1)! · T_{2k-1}/T_k²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheegerReport {
    pub k: usize,
    pub cheeger_constant: f64,
    /// `C²`.
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub holds: bool,
}

/// Evaluates the Cheeger bound from the moments of a domain with
/// `Vol(Ω) ≤ Vol(M)/2`. The Cheeger constant `c` of `M` is an input.
pub fn cheeger_bound_check(c: f64, vol_domain: f64, vol_m: f64, moments: &MomentSequence, k: usize) -> Result<CheegerReport> {
    if !(c > 0.0) || !c.is_finite() {
        return invalid(format!("Cheeger constant must be positive, got {c}"));
    }
    if !(vol_domain > 0.0) || !(vol_m > 0.0) {
        return invalid("volumes must be positive");
    }
    if k == 0 || 2 * k - 1 > moments.len() {
        return invalid(format!("order k = {k} needs T_{} but only {} moments are given", 2 * k - 1, moments.len()));
    }
    if vol_domain > 0.5 * vol_m * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "Vol(Ω) = {vol_domain} exceeds half of Vol(M) = {vol_m}"
        )));
    }
    let tk = moments.moment(k);
    let rhs = vol_domain * factorial(k).powi(2) / factorial(2 * k - 1) * moments.moment(2 * k - 1) / (tk * tk);
    let lhs = c * c;
    Ok(CheegerReport { k, cheeger_constant: c, lhs, rhs, slack: rhs - lhs, holds: lhs <= rhs })
}

/// Faber-Krahn ordering `λ_1(Ω*) ≤ λ_1(Ω)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaberKrahnReport {
    pub domain: String,
    pub sphere_choice: SphereChoice,
    pub cap_radius: f64,
    /// Grid `λ_1(Ω)`.
    pub lambda_domain: f64,
    /// `λ_1(Ω*)` recovered from the cap's moments.
    pub lambda_cap: f64,
    /// `λ_1(Ω) - λ_1(Ω*)`.
    pub slack: f64,
    /// Change of `λ_1(Ω)` under grid coarsening plus the recovery
    /// uncertainty of `λ_1(Ω*)`.
    pub budget: f64,
    pub holds: bool,
}

/// Compares the grid `λ_1(Ω)` with `λ_1` of the symmetrized cap, the latter
/// recovered from `CAP_RECOVERY_MOMENTS` radial moments.
pub fn faber_krahn_check(domain: &GridDomain, choice: SphereChoice) -> Result<FaberKrahnReport> {
    let sphere = comparison_sphere(domain.surface(), choice)?;
    let cap = symmetrized_ball(domain.volume(), domain.ambient_volume(), sphere)?;
    let lambda_domain = dirichlet_eigenpairs(domain, 2)?.eigenvalues()[0];
    let lambda_coarse = dirichlet_eigenpairs(&domain.coarsened()?, 2)?.eigenvalues()[0];

    let cap_moments = moment_hierarchy_ball(&cap, CAP_RECOVERY_MOMENTS, DEFAULT_RADII)?;
    let recovery = recover_spectrum(cap_moments.moments(), 1)?;
    let first = recovery
        .spectrum
        .pairs()
        .first()
        .ok_or_else(|| Error::InvalidInput("no eigenvalue could be recovered for the cap".into()))?;
    let lambda_cap = first.nu;
    let budget = (lambda_domain - lambda_coarse).abs() + recovery.uncertainties[0].nu;
    let slack = lambda_domain - lambda_cap;
    Ok(FaberKrahnReport {
        domain: describe(domain),
        sphere_choice: choice,
        cap_radius: cap.radius(),
        lambda_domain,
        lambda_cap,
        slack,
        budget,
        holds: slack >= -budget,
    })
}

/// Named comparison setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Square `[0, 1/2]²` on the unit flat torus at 256², compared in
    /// `S²(R)`.
    TorusSquareVsCap,
    /// `θ ∈ (π/3, 2π/3)`, `φ ∈ (0, π/2)` on `S²(1)` at 256×512, compared in
    /// `S²(1/√K)`.
    SphereRectVsCap,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::TorusSquareVsCap, Preset::SphereRectVsCap];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TorusSquareVsCap => "torus-square-vs-cap",
            Preset::SphereRectVsCap => "sphere-rect-vs-cap",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset {name:?}")))
    }

    /// Surface, mask and sphere choice.
    pub fn setup(self) -> (ClosedSurface, MaskSpec, SphereChoice) {
        use std::f64::consts::PI;
        match self {
            Preset::TorusSquareVsCap => (
                ClosedSurface::FlatTorus { lx: 1.0, ly: 1.0, nx: 256, ny: 256 },
                MaskSpec::Rectangle { lo: [0.0, 0.0], hi: [0.5, 0.5] },
                SphereChoice::BbgR,
            ),
            Preset::SphereRectVsCap => (
                ClosedSurface::RoundSphere { radius: 1.0, ntheta: 256, nphi: 512 },
                MaskSpec::Rectangle { lo: [PI / 3.0, 0.0], hi: [2.0 * PI / 3.0, PI / 2.0] },
                SphereChoice::SqrtK,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_solver::build_domain;
    use crate::spectral::MomentSequence;
    use std::f64::consts::PI;

    #[test]
    fn symmetrized_ball_examples() {
        let s = ModelSpace::sphere(1.0, 2).unwrap();
        let half = symmetrized_ball(1.0, 2.0, s).unwrap();
        assert!((half.radius() - PI / 2.0).abs() < 1e-10);
        let quarter = symmetrized_ball(1.0, 4.0, s).unwrap();
        assert!((quarter.radius() - PI / 3.0).abs() < 1e-10);
        assert!((quarter.volume() / (4.0 * PI) - 0.25).abs() < 1e-8 * 0.25);
        let nearly = symmetrized_ball(1.0 - 1e-9, 1.0, s).unwrap();
        assert!(PI - nearly.radius() < 1e-3);
        assert!(symmetrized_ball(1.0, 1.0, s).is_err());
        assert!(symmetrized_ball(0.5, 1.0, ModelSpace::euclidean(2).unwrap()).is_err());
    }

    #[test]
    fn sqrt_k_needs_positive_curvature() {
        let t = ClosedSurface::flat_torus(1.0, 1.0, 16, 16).unwrap();
        assert!(matches!(comparison_sphere(&t, SphereChoice::SqrtK), Err(Error::Hypothesis(_))));
        let r = comparison_sphere(&t, SphereChoice::BbgR).unwrap().scale();
        // K = 0, diam = √2/2
        let expect = comparison_radius(&RicciBoundInput::new(0.0, 2, 0.5f64.sqrt()).unwrap()).unwrap();
        assert_eq!(r, expect);
        let s = ClosedSurface::round_sphere(2.0, 16, 32).unwrap();
        assert!((comparison_sphere(&s, SphereChoice::SqrtK).unwrap().scale() - 2.0).abs() < 1e-15);
        assert!((comparison_sphere(&s, SphereChoice::BbgR).unwrap().scale() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn cheeger_interval_example() {
        // arc of length a on a circle of circumference L: T_1 = a³/12
        let (a, l) = (0.5, 2.0);
        let m = MomentSequence::from_moments(a, &[a.powi(3) / 12.0]).unwrap();
        let r = cheeger_bound_check(4.0 / l, a, l, &m, 1).unwrap();
        assert!((r.rhs - 12.0 / (a * a)).abs() < 1e-12);
        assert!(r.holds && r.slack > 0.0);
        assert!(matches!(cheeger_bound_check(4.0 / l, 1.5, l, &m, 1), Err(Error::Hypothesis(_))));
        assert!(cheeger_bound_check(4.0 / l, a, l, &m, 2).is_err());
    }

    #[test]
    fn small_torus_report_passes() {
        let t = ClosedSurface::flat_torus(1.0, 1.0, 64, 64).unwrap();
        let d = build_domain(&t, &MaskSpec::Rectangle { lo: [0.0, 0.0], hi: [0.5, 0.5] }).unwrap();
        let r = moment_comparison_report(&d, 3, SphereChoice::BbgR).unwrap();
        assert_eq!(r.margins.len(), 3);
        assert!(r.all_pass(), "{}", r.summary());
        assert!(r.margins.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn zero_source_has_no_violation() {
        let t = ClosedSurface::flat_torus(1.0, 1.0, 64, 64).unwrap();
        let d = build_domain(&t, &MaskSpec::Rectangle { lo: [0.0, 0.0], hi: [0.5, 0.5] }).unwrap();
        let r = pde_comparison_check(&d, &GridField::constant(&d, 0.0).unwrap(), SphereChoice::BbgR).unwrap();
        assert_eq!(r.violation, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        }
        assert!(Preset::from_name("interval").is_err());
    }
}

//! Distribution functions, decreasing rearrangements and spherical
//! symmetrization of sampled functions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::model_space::{GeodesicBall, Geometry};
use crate::numerics::{kahan_sum, KahanSum};
use crate::radial_solver::RadialField;

/// Tolerance on the volume normalization of a symmetrization target.
const NORMALIZATION_TOL: f64 = 1e-8;

/// Values `f(x_i) ≥ 0` with volume weights on a domain `Ω ⊂ M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    domain_volume: f64,
    ambient_volume: f64,
}

impl WeightedSample {
    /// `domain_volume` is taken as the compensated sum of the weights.
    pub fn new(values: Vec<f64>, weights: Vec<f64>, ambient_volume: f64) -> Result<Self> {
        let total = kahan_sum(weights.iter().copied());
        Self::with_volume(values, weights, total, ambient_volume)
    }

    pub fn with_volume(
        values: Vec<f64>,
        weights: Vec<f64>,
        domain_volume: f64,
        ambient_volume: f64,
    ) -> Result<Self> {
        if values.is_empty() {
            return invalid("sample is empty");
        }
        if values.len() != weights.len() {
            return invalid(format!("{} values but {} weights", values.len(), weights.len()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return invalid(format!("sample values must be finite and nonnegative, found {v}"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return invalid(format!("weights must be positive, found {w}"));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - domain_volume).abs() > 1e-10 * domain_volume {
            return invalid(format!("weights sum to {total}, not the domain volume {domain_volume}"));
        }
        if !(ambient_volume >= domain_volume * (1.0 - 1e-12)) {
            return invalid(format!(
                "domain volume {domain_volume} exceeds the ambient volume {ambient_volume}"
            ));
        }
        Ok(Self { values, weights, domain_volume, ambient_volume })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain_volume(&self) -> f64 {
        self.domain_volume
    }

    pub fn ambient_volume(&self) -> f64 {
        self.ambient_volume
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sorted level structure for repeated queries.
    pub fn rearrangement(&self) -> Rearrangement {
        Rearrangement::new(self)
    }
}

/// The step function `f^#` of a sample: distinct levels in decreasing order
/// and the volume of `{f ≥ level}` for each.
#[derive(Debug, Clone, PartialEq)]
pub struct Rearrangement {
    levels: Vec<f64>,
    cumulative: Vec<f64>,
    domain_volume: f64,
}

impl Rearrangement {
    pub fn new(sample: &WeightedSample) -> Self {
        let mut order: Vec<usize> = (0..sample.values.len()).collect();
        order.sort_by(|&a, &b| sample.values[b].total_cmp(&sample.values[a]));
        let mut levels: Vec<f64> = Vec::new();
        let mut cumulative: Vec<f64> = Vec::new();
        let mut acc = KahanSum::new();
        for i in order {
            let v = sample.values[i];
            acc.add(sample.weights[i]);
            if levels.last() == Some(&v) {
                *cumulative.last_mut().unwrap() = acc.value();
            } else {
                levels.push(v);
                cumulative.push(acc.value());
            }
        }
        *cumulative.last_mut().unwrap() = sample.domain_volume;
        Self { levels, cumulative, domain_volume: sample.domain_volume }
    }

    /// Distinct values in decreasing order.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `cumulative[j]` is the volume of `{f ≥ levels[j]}`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// `μ_f(t) = Vol{f > t}`.
    pub fn distribution(&self, t: f64) -> f64 {
        let above = self.levels.partition_point(|&v| v > t);
        if above == 0 {
            0.0
        } else {
            self.cumulative[above - 1]
        }
    }

    /// `f^#(s) = inf{t : μ_f(t) ≤ s}` for `s ∈ [0, Vol(Ω)]`.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) || s > self.domain_volume {
            return domain(format!("s = {s} outside [0, {}]", self.domain_volume));
        }
        Ok(self.value_clamped(s))
    }

    fn value_clamped(&self, s: f64) -> f64 {
        let j = self.cumulative.partition_point(|&c| c <= s);
        self.levels[j.min(self.levels.len() - 1)]
    }
}

/// `μ_f(t) = Vol{x : f(x) > t}`.
pub fn distribution_function(sample: &WeightedSample, t: f64) -> f64 {
    kahan_sum(
        sample
            .values
            .iter()
            .zip(&sample.weights)
            .filter(|(v, _)| **v > t)
            .map(|(_, w)| *w),
    )
}

/// `f^#(s)`; see [`Rearrangement::value_at`].
pub fn decreasing_rearrangement(sample: &WeightedSample, s: f64) -> Result<f64> {
    Rearrangement::new(sample).value_at(s)
}

/// `f*(r) = f^#((Vol(M)/Vol(S)) · Vol(B(r)))` on a uniform grid of
/// `n_radii` nodes over the target cap.
pub fn spherical_symmetrization(
    sample: &WeightedSample,
    target: &GeodesicBall,
    n_radii: usize,
) -> Result<RadialField> {
    let space = *target.space();
    if space.geometry() != Geometry::Spherical {
        return invalid("symmetrization target must be a cap in a round sphere");
    }
    if n_radii < 2 {
        return invalid("need at least two radial nodes");
    }
    let sphere_volume = space.total_volume().unwrap();
    let fraction = sample.domain_volume / sample.ambient_volume;
    let target_fraction = target.volume() / sphere_volume;
    if (target_fraction - fraction).abs() > NORMALIZATION_TOL * fraction {
        return invalid(format!(
            "target holds {target_fraction} of its sphere but the domain holds {fraction} of M"
        ));
    }
    let scale = sample.ambient_volume / sphere_volume;
    let rearr = Rearrangement::new(sample);
    RadialField::from_fn(space, target.radius(), n_radii, |r| {
        let s = (scale * space.ball_volume_unchecked(r)).clamp(0.0, sample.domain_volume);
        rearr.value_clamped(s)
    })
}

/// Volume of the shell owned by each node: `[r_{i-1/2}, r_{i+1/2}] ∩ [0, ρ]`.
pub fn shell_volumes(field: &RadialField) -> Vec<f64> {
    let r = field.radii();
    let space = field.space();
    let n = r.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(0.0);
    for w in r.windows(2) {
        edges.push(space.ball_volume_unchecked(0.5 * (w[0] + w[1])));
    }
    edges.push(space.ball_volume_unchecked(r[n - 1]));
    edges.windows(2).map(|e| e[1] - e[0]).collect()
}

/// `Vol{r : f(r) > t}` for a radial profile, with shell volumes as weights.
pub fn radial_distribution_function(field: &RadialField, t: f64) -> f64 {
    kahan_sum(
        field
            .values()
            .iter()
            .zip(shell_volumes(field))
            .filter(|(v, _)| **v > t)
            .map(|(_, w)| w),
    )
}

/// Normalized `L^p` mean `(1/Vol) ∫ |f|^p dV`.
pub trait LpMean {
    fn lp_mean(&self, p: f64) -> Result<f64>;
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("exponent must be at least 1, got {p}"));
    }
    Ok(())
}

impl LpMean for WeightedSample {
    fn lp_mean(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let sum = kahan_sum(self.values.iter().zip(&self.weights).map(|(v, w)| w * v.abs().powf(p)));
        Ok(sum / self.domain_volume)
    }
}

impl LpMean for RadialField {
    /// Shell-volume quadrature, which treats the profile as piecewise
    /// constant and so is exact on the step functions produced by
    /// [`spherical_symmetrization`] up to the grid resolution.
    fn lp_mean(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let shells = shell_volumes(self);
        let total = kahan_sum(shells.iter().copied());
        let sum = kahan_sum(self.values().iter().zip(&shells).map(|(v, w)| w * v.abs().powf(p)));
        Ok(sum / total)
    }
}

pub fn lp_mean<T: LpMean + ?Sized>(f: &T, p: f64) -> Result<f64> {
    f.lp_mean(p)
}

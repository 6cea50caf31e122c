//! Radius of the comparison sphere in the Bérard–Besson–Gallot isoperimetric
//! inequality for closed manifolds with `Ric ≥ (d-1)K`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::numerics::{adaptive_simpson, adaptive_simpson_rel};

const QUAD_TOL: f64 = 1e-12;

/// Curvature bound, dimension and diameter of a closed manifold `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicciBoundInput {
    /// Lower Ricci bound is `(d-1)·curvature`.
    pub curvature: f64,
    pub dim: usize,
    /// Diameter of `M` (not of a subdomain).
    pub diameter: f64,
}

impl RicciBoundInput {
    pub fn new(curvature: f64, dim: usize, diameter: f64) -> Result<Self> {
        let input = Self { curvature, dim, diameter };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return invalid(format!("dimension must be at least 2, got {}", self.dim));
        }
        if !(self.diameter > 0.0) || !self.diameter.is_finite() {
            return invalid(format!("diameter must be positive, got {}", self.diameter));
        }
        if !self.curvature.is_finite() {
            return invalid("curvature must be finite");
        }
        if self.curvature > 0.0 {
            let myers = PI / self.curvature.sqrt();
            if self.diameter > myers * (1.0 + 1e-12) {
                return invalid(format!(
                    "diameter {} exceeds the Myers bound π/√K = {myers}",
                    self.diameter
                ));
            }
        }
        Ok(())
    }
}

/// `∫_0^π sin^{d-1} θ dθ`.
pub fn sine_power_integral(d: usize) -> f64 {
    let p = d as i32 - 1;
    adaptive_simpson(|t| t.sin().powi(p), 0.0, PI, QUAD_TOL)
}

/// Radius `R` of the comparison sphere `S^d(R)`.
pub fn comparison_radius(input: &RicciBoundInput) -> Result<f64> {
    input.validate()?;
    let d = input.dim;
    let k = input.curvature;
    let diam = input.diameter;
    let total = sine_power_integral(d);
    let r = if k > 0.0 {
        let sk = k.sqrt();
        let upper = (0.5 * diam * sk).min(0.5 * PI);
        let p = d as i32 - 1;
        let half = adaptive_simpson(|t| t.cos().powi(p), 0.0, upper, QUAD_TOL);
        (2.0 * half / total).powf(1.0 / d as f64) / sk
    } else if k == 0.0 {
        diam / ((1.0 + d as f64 * total).powf(1.0 / d as f64) - 1.0)
    } else {
        let sk = (-k).sqrt();
        1.0 / (sk * isoperimetric_constant(diam * sk, d)?)
    };
    Ok(r)
}

/// `x ∫_0^z (cosh t + x sinh t)^{d-1} dt`, integrated on `[0, 1]` after
/// substituting `t = z s` so the tolerance stays relative for small `z`.
fn defining_integral(x: f64, z: f64, d: usize) -> f64 {
    let p = d as i32 - 1;
    let inner = adaptive_simpson_rel(
        |s| {
            let t = z * s;
            (t.cosh() + x * t.sinh()).powi(p)
        },
        0.0,
        1.0,
        1e-14,
        0.0,
    );
    x * z * inner
}

/// The unique `x > 0` with `x ∫_0^z (cosh t + x sinh t)^{d-1} dt = ∫_0^π sin^{d-1}`.
///
/// The left side is strictly increasing in `x`, so plain bisection converges;
/// the upper end of the bracket grows geometrically until the sign changes.
pub fn isoperimetric_constant(z: f64, d: usize) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return domain(format!("argument must be positive, got {z}"));
    }
    if d < 2 {
        return invalid(format!("dimension must be at least 2, got {d}"));
    }
    let target = sine_power_integral(d);
    let residual = |x: f64| defining_integral(x, z, d) - target;

    let mut lo = 0.0;
    let mut hi = (2.0 / z).max(10.0);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return domain("bracket expansion overflowed");
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Residual of the defining equation at `x`; used for diagnostics.
pub fn isoperimetric_residual(x: f64, z: f64, d: usize) -> f64 {
    defining_integral(x, z, d) - sine_power_integral(d)
}

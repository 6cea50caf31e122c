use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::io::read_mask_file;
use super::surface::ClosedSurface;
use crate::error::{invalid, Result};

/// Description of the interior of a grid domain.
///
/// Coordinates are `(x, y)` on a torus and `(θ, φ)` on a sphere. All
/// inequalities are strict, so nodes on the boundary curve are exterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    /// Geodesic disc (periodic distance on the torus, great-circle distance
    /// on the sphere).
    Cap { center: [f64; 2], radius: f64 },
    /// Coordinate rectangle `lo < (a, b) < hi`. A periodic axis whose extent
    /// covers the full period is unrestricted; periodic axes may wrap.
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    Union { parts: Vec<MaskSpec> },
    Difference { base: Box<MaskSpec>, minus: Box<MaskSpec> },
    /// A 0/1 mask file with a one-line header.
    File { path: PathBuf },
}

/// Interior flags for every node of `surface`.
pub fn evaluate_mask(surface: &ClosedSurface, spec: &MaskSpec) -> Result<Vec<bool>> {
    match spec {
        MaskSpec::File { path } => {
            let (file_surface, mask) = read_mask_file(path)?;
            let same_grid = match (file_surface, *surface) {
                (
                    ClosedSurface::FlatTorus { nx: a, ny: b, .. },
                    ClosedSurface::FlatTorus { nx: c, ny: d, .. },
                ) => a == c && b == d,
                (
                    ClosedSurface::RoundSphere { ntheta: a, nphi: b, .. },
                    ClosedSurface::RoundSphere { ntheta: c, nphi: d, .. },
                ) => a == c && b == d,
                _ => false,
            };
            if !same_grid {
                return invalid("mask file grid does not match the surface");
            }
            Ok(mask)
        }
        _ => {
            validate(spec)?;
            Ok((0..surface.node_count())
                .map(|n| contains(surface, spec, surface.coordinates(n)))
                .collect())
        }
    }
}

fn validate(spec: &MaskSpec) -> Result<()> {
    match spec {
        MaskSpec::Cap { center, radius } => {
            if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                return invalid("cap needs a finite centre and positive radius");
            }
        }
        MaskSpec::Rectangle { lo, hi } => {
            if (0..2).any(|i| !(hi[i] > lo[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
                return invalid("rectangle bounds must satisfy lo < hi");
            }
        }
        MaskSpec::Union { parts } => {
            if parts.is_empty() {
                return invalid("union of no parts");
            }
            parts.iter().try_for_each(validate)?;
        }
        MaskSpec::Difference { base, minus } => {
            validate(base)?;
            validate(minus)?;
        }
        MaskSpec::File { .. } => return invalid("mask files cannot be nested in set operations"),
    }
    Ok(())
}

fn periodic_offset(x: f64, lo: f64, period: f64) -> f64 {
    (x - lo).rem_euclid(period)
}

/// Points closer than this fraction of the axis scale to a boundary curve
/// count as on it, so rounding in node coordinates cannot flip membership.
const EDGE_TOL: f64 = 1e-12;

/// Strict containment of `x` in `(lo, hi)` on a circle of length `period`.
fn in_periodic_interval(x: f64, lo: f64, hi: f64, period: f64) -> bool {
    if hi - lo >= period * (1.0 - EDGE_TOL) {
        return true;
    }
    let eps = EDGE_TOL * period;
    let off = periodic_offset(x, lo, period);
    let off = if off > period - eps { off - period } else { off };
    off > eps && off < hi - lo - eps
}

fn in_interval(x: f64, lo: f64, hi: f64, scale: f64) -> bool {
    x > lo + EDGE_TOL * scale && x < hi - EDGE_TOL * scale
}

fn contains(surface: &ClosedSurface, spec: &MaskSpec, (a, b): (f64, f64)) -> bool {
    match spec {
        MaskSpec::Cap { center, radius } => {
            let scale = match *surface {
                ClosedSurface::FlatTorus { lx, ly, .. } => lx.max(ly),
                ClosedSurface::RoundSphere { radius, .. } => PI * radius,
            };
            geodesic_distance(surface, (a, b), (center[0], center[1])) < radius - EDGE_TOL * scale
        }
        MaskSpec::Rectangle { lo, hi } => match *surface {
            ClosedSurface::FlatTorus { lx, ly, .. } => {
                in_periodic_interval(a, lo[0], hi[0], lx) && in_periodic_interval(b, lo[1], hi[1], ly)
            }
            ClosedSurface::RoundSphere { .. } => {
                in_interval(a, lo[0], hi[0], PI)
                    && (a == 0.0 || a == PI || in_periodic_interval(b, lo[1], hi[1], 2.0 * PI))
            }
        },
        MaskSpec::Union { parts } => parts.iter().any(|p| contains(surface, p, (a, b))),
        MaskSpec::Difference { base, minus } => {
            contains(surface, base, (a, b)) && !contains(surface, minus, (a, b))
        }
        MaskSpec::File { .. } => unreachable!("file masks are evaluated separately"),
    }
}

/// Geodesic distance between coordinate pairs on the surface.
pub fn geodesic_distance(surface: &ClosedSurface, p: (f64, f64), q: (f64, f64)) -> f64 {
    match *surface {
        ClosedSurface::FlatTorus { lx, ly, .. } => {
            let wrap = |d: f64, l: f64| {
                let d = d.rem_euclid(l);
                d.min(l - d)
            };
            let dx = wrap(p.0 - q.0, lx);
            let dy = wrap(p.1 - q.1, ly);
            (dx * dx + dy * dy).sqrt()
        }
        ClosedSurface::RoundSphere { radius, .. } => {
            // haversine form, accurate for small separations
            let (t1, p1) = p;
            let (t2, p2) = q;
            let s = ((t1 - t2) * 0.5).sin().powi(2)
                + t1.sin() * t2.sin() * ((p1 - p2) * 0.5).sin().powi(2);
            2.0 * radius * s.sqrt().clamp(0.0, 1.0).asin()
        }
    }
}

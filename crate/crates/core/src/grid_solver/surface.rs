use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest admissible grid resolution along any axis.
pub const MIN_RESOLUTION: usize = 16;

/// A closed two-dimensional model surface with a structured grid.
///
/// Torus nodes sit at `(i h_x, j h_y)`. Sphere nodes are the two poles plus
/// `n_θ - 1` latitude rings of `n_φ` nodes at `θ_j = jπ/n_θ`, `φ_k = 2πk/n_φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosedSurface {
    FlatTorus { lx: f64, ly: f64, nx: usize, ny: usize },
    RoundSphere { radius: f64, ntheta: usize, nphi: usize },
}

/// A link between two nodes with its finite-volume conductance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Link {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
}

impl ClosedSurface {
    pub fn flat_torus(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        let s = ClosedSurface::FlatTorus { lx, ly, nx, ny };
        s.validate()?;
        Ok(s)
    }

    pub fn round_sphere(radius: f64, ntheta: usize, nphi: usize) -> Result<Self> {
        let s = ClosedSurface::RoundSphere { radius, ntheta, nphi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (lengths, res): (Vec<f64>, [usize; 2]) = match *self {
            ClosedSurface::FlatTorus { lx, ly, nx, ny } => (vec![lx, ly], [nx, ny]),
            ClosedSurface::RoundSphere { radius, ntheta, nphi } => (vec![radius], [ntheta, nphi]),
        };
        if lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return invalid("surface lengths must be positive and finite");
        }
        if res.iter().any(|n| *n < MIN_RESOLUTION) {
            return invalid(format!("grid resolution must be at least {MIN_RESOLUTION} per axis"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        match *self {
            ClosedSurface::FlatTorus { nx, ny, .. } => nx * ny,
            ClosedSurface::RoundSphere { ntheta, nphi, .. } => (ntheta - 1) * nphi + 2,
        }
    }

    /// `Vol(M)`.
    pub fn volume(&self) -> f64 {
        match *self {
            ClosedSurface::FlatTorus { lx, ly, .. } => lx * ly,
            ClosedSurface::RoundSphere { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    /// `K` with `Ric = (d-1)K = K` in two dimensions.
    pub fn curvature(&self) -> f64 {
        match *self {
            ClosedSurface::FlatTorus { .. } => 0.0,
            ClosedSurface::RoundSphere { radius, .. } => 1.0 / (radius * radius),
        }
    }

    /// Intrinsic diameter of the surface.
    pub fn diameter(&self) -> f64 {
        match *self {
            ClosedSurface::FlatTorus { lx, ly, .. } => 0.5 * (lx * lx + ly * ly).sqrt(),
            ClosedSurface::RoundSphere { radius, .. } => PI * radius,
        }
    }

    /// Sphere grid spacings `(h_θ, h_φ)`, or torus `(h_x, h_y)`.
    pub fn spacing(&self) -> (f64, f64) {
        match *self {
            ClosedSurface::FlatTorus { lx, ly, nx, ny } => (lx / nx as f64, ly / ny as f64),
            ClosedSurface::RoundSphere { ntheta, nphi, .. } => {
                (PI / ntheta as f64, 2.0 * PI / nphi as f64)
            }
        }
    }

    /// Coordinates `(x, y)` or `(θ, φ)` of a node.
    pub fn coordinates(&self, node: usize) -> (f64, f64) {
        let (h1, h2) = self.spacing();
        match *self {
            ClosedSurface::FlatTorus { nx, .. } => ((node % nx) as f64 * h1, (node / nx) as f64 * h2),
            ClosedSurface::RoundSphere { ntheta, nphi, .. } => {
                if node == 0 {
                    (0.0, 0.0)
                } else if node == self.node_count() - 1 {
                    (PI, 0.0)
                } else {
                    let ring = (node - 1) / nphi + 1;
                    let k = (node - 1) % nphi;
                    debug_assert!(ring < ntheta);
                    (ring as f64 * h1, k as f64 * h2)
                }
            }
        }
    }

    /// Sphere node index for ring `j` (0 and `n_θ` are the poles) and
    /// longitude index `k`.
    pub fn sphere_node(&self, ring: usize, k: usize) -> usize {
        match *self {
            ClosedSurface::RoundSphere { ntheta, nphi, .. } => {
                if ring == 0 {
                    0
                } else if ring == ntheta {
                    self.node_count() - 1
                } else {
                    1 + (ring - 1) * nphi + k % nphi
                }
            }
            ClosedSurface::FlatTorus { .. } => panic!("sphere_node called on a torus"),
        }
    }

    /// Index of the torus node `(i, j)`, periodic in both.
    pub fn torus_node(&self, i: usize, j: usize) -> usize {
        match *self {
            ClosedSurface::FlatTorus { nx, ny, .. } => (j % ny) * nx + i % nx,
            ClosedSurface::RoundSphere { .. } => panic!("torus_node called on a sphere"),
        }
    }

    /// Area of the dual cell of every node. Sphere rings own the band
    /// between the half-latitudes; each pole owns the cap of radius `h_θ/2`.
    pub fn node_weights(&self) -> Vec<f64> {
        match *self {
            ClosedSurface::FlatTorus { nx, ny, .. } => {
                let (hx, hy) = self.spacing();
                vec![hx * hy; nx * ny]
            }
            ClosedSurface::RoundSphere { radius, ntheta, nphi } => {
                let (ht, hp) = self.spacing();
                let r2 = radius * radius;
                let pole = 2.0 * PI * r2 * (1.0 - (0.5 * ht).cos());
                let mut w = Vec::with_capacity(self.node_count());
                w.push(pole);
                for j in 1..ntheta {
                    let band = r2 * hp * 2.0 * (j as f64 * ht).sin() * (0.5 * ht).sin();
                    w.extend(std::iter::repeat(band).take(nphi));
                }
                w.push(pole);
                w
            }
        }
    }

    /// All nearest-neighbour links with conductance `|dual face| / |edge|`.
    pub(crate) fn links(&self) -> Vec<Link> {
        match *self {
            ClosedSurface::FlatTorus { nx, ny, .. } => {
                let (hx, hy) = self.spacing();
                let mut links = Vec::with_capacity(2 * nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        let a = self.torus_node(i, j);
                        links.push(Link { a, b: self.torus_node(i + 1, j), conductance: hy / hx });
                        links.push(Link { a, b: self.torus_node(i, j + 1), conductance: hx / hy });
                    }
                }
                links
            }
            ClosedSurface::RoundSphere { ntheta, nphi, .. } => {
                let (ht, hp) = self.spacing();
                let mut links = Vec::with_capacity(2 * self.node_count());
                for j in 1..ntheta {
                    let theta = j as f64 * ht;
                    let along = ht / (theta.sin() * hp);
                    for k in 0..nphi {
                        let a = self.sphere_node(j, k);
                        links.push(Link { a, b: self.sphere_node(j, k + 1), conductance: along });
                    }
                }
                for j in 0..ntheta {
                    let across = ((j as f64 + 0.5) * ht).sin() * hp / ht;
                    for k in 0..nphi {
                        let a = self.sphere_node(j, k);
                        let b = self.sphere_node(j + 1, k);
                        links.push(Link { a, b, conductance: across });
                    }
                }
                links
            }
        }
    }

    /// The same surface at half the resolution, when every axis is even and
    /// stays at or above the minimum resolution.
    pub fn coarsened(&self) -> Option<ClosedSurface> {
        let ok = |n: usize| n % 2 == 0 && n / 2 >= MIN_RESOLUTION;
        match *self {
            ClosedSurface::FlatTorus { lx, ly, nx, ny } if ok(nx) && ok(ny) => {
                Some(ClosedSurface::FlatTorus { lx, ly, nx: nx / 2, ny: ny / 2 })
            }
            ClosedSurface::RoundSphere { radius, ntheta, nphi } if ok(ntheta) && ok(nphi) => {
                Some(ClosedSurface::RoundSphere { radius, ntheta: ntheta / 2, nphi: nphi / 2 })
            }
            _ => None,
        }
    }

    /// For each node of the coarsened surface, the fine node at the same
    /// location.
    pub(crate) fn coarse_to_fine(&self, coarse: &ClosedSurface) -> Vec<usize> {
        match (*self, *coarse) {
            (ClosedSurface::FlatTorus { .. }, ClosedSurface::FlatTorus { nx, ny, .. }) => (0..ny)
                .flat_map(|j| (0..nx).map(move |i| (i, j)))
                .map(|(i, j)| self.torus_node(2 * i, 2 * j))
                .collect(),
            (ClosedSurface::RoundSphere { .. }, ClosedSurface::RoundSphere { ntheta, nphi, .. }) => {
                let mut map = vec![0];
                for j in 1..ntheta {
                    for k in 0..nphi {
                        map.push(self.sphere_node(2 * j, 2 * k));
                    }
                }
                map.push(self.node_count() - 1);
                map
            }
            _ => panic!("surfaces of different kinds"),
        }
    }
}

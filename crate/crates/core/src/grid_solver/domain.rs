use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use super::mask::{evaluate_mask, MaskSpec};
use super::sparse::{pcg, CholeskyFactor, CsrMatrix, Preconditioner, SolveStats};
use super::surface::ClosedSurface;
use crate::error::{invalid, Result};
use crate::numerics::kahan_sum;

const EXTERIOR: usize = usize::MAX;

/// A masked domain `Ω` on a closed surface, with the finite-volume
/// Dirichlet operator `L = W^{-1} A` on its interior nodes.
///
/// Exterior nodes carry the zero boundary value. `A` is symmetric positive
/// definite and `W` holds the dual-cell areas, so `L` is self-adjoint in the
/// node-volume inner product.
#[derive(Debug, Clone)]
pub struct GridDomain {
    surface: ClosedSurface,
    mask: Vec<bool>,
    all_weights: Vec<f64>,
    nodes: Vec<usize>,
    slot: Vec<usize>,
    weights: Vec<f64>,
    inv_weights: Vec<f64>,
    boundary: Vec<usize>,
    matrix: CsrMatrix,
    components: usize,
    factor: OnceLock<Option<Arc<CholeskyFactor>>>,
}

/// Builds the domain described by `spec` on `surface`.
pub fn build_domain(surface: &ClosedSurface, spec: &MaskSpec) -> Result<GridDomain> {
    surface.validate()?;
    let mask = evaluate_mask(surface, spec)?;
    GridDomain::from_mask(*surface, mask)
}

impl GridDomain {
    pub fn from_mask(surface: ClosedSurface, mask: Vec<bool>) -> Result<Self> {
        surface.validate()?;
        let n = surface.node_count();
        if mask.len() != n {
            return invalid(format!("mask has {} entries for {n} nodes", mask.len()));
        }
        let count = mask.iter().filter(|b| **b).count();
        if count == 0 {
            return invalid("domain interior is empty");
        }
        if count == n {
            return invalid("domain covers the whole surface; its complement must be nonempty");
        }
        if let ClosedSurface::RoundSphere { ntheta, nphi, .. } = surface {
            check_poles(&surface, &mask, ntheta, nphi)?;
        }

        let all_weights = surface.node_weights();
        let nodes: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let mut slot = vec![EXTERIOR; n];
        for (s, &node) in nodes.iter().enumerate() {
            slot[node] = s;
        }
        let weights: Vec<f64> = nodes.iter().map(|&i| all_weights[i]).collect();
        let inv_weights = weights.iter().map(|w| 1.0 / w).collect();

        let links = surface.links();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(5); nodes.len()];
        let mut is_boundary = vec![false; n];
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for l in &links {
            let (sa, sb) = (slot[l.a], slot[l.b]);
            if sa != EXTERIOR {
                rows[sa].push((sa, l.conductance));
            }
            if sb != EXTERIOR {
                rows[sb].push((sb, l.conductance));
            }
            match (sa != EXTERIOR, sb != EXTERIOR) {
                (true, true) => {
                    rows[sa].push((sb, -l.conductance));
                    rows[sb].push((sa, -l.conductance));
                    adjacency[sa].push(sb);
                    adjacency[sb].push(sa);
                }
                (true, false) => is_boundary[l.b] = true,
                (false, true) => is_boundary[l.a] = true,
                (false, false) => {}
            }
        }
        let boundary = (0..n).filter(|&i| is_boundary[i]).collect();
        let components = count_components(&adjacency);
        Ok(Self {
            surface,
            mask,
            all_weights,
            nodes,
            slot,
            weights,
            inv_weights,
            boundary,
            matrix: CsrMatrix::from_rows(rows),
            components,
            factor: OnceLock::new(),
        })
    }

    pub fn surface(&self) -> &ClosedSurface {
        &self.surface
    }

    /// Interior flag of every surface node.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of interior nodes.
    pub fn interior_len(&self) -> usize {
        self.nodes.len()
    }

    /// Surface node index of each interior slot.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Interior slot of a surface node, if it is interior.
    pub fn slot_of(&self, node: usize) -> Option<usize> {
        (self.slot[node] != EXTERIOR).then_some(self.slot[node])
    }

    /// Dual-cell areas of the interior nodes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dual-cell area of any surface node.
    pub fn node_weight(&self, node: usize) -> f64 {
        self.all_weights[node]
    }

    /// Exterior nodes with at least one interior neighbour; they carry the
    /// Dirichlet condition.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior slots adjacent to a boundary node.
    pub fn interior_neighbours(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .surface
            .links()
            .iter()
            .filter_map(|l| {
                if l.a == node {
                    self.slot_of(l.b)
                } else if l.b == node {
                    self.slot_of(l.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Interior slots adjacent to each boundary node, in the order of
    /// [`GridDomain::boundary_nodes`].
    pub fn boundary_adjacency(&self) -> Vec<Vec<usize>> {
        let mut map: Vec<Vec<usize>> = vec![Vec::new(); self.boundary.len()];
        let mut index = vec![EXTERIOR; self.surface.node_count()];
        for (k, &b) in self.boundary.iter().enumerate() {
            index[b] = k;
        }
        for l in self.surface.links() {
            if index[l.a] != EXTERIOR {
                if let Some(s) = self.slot_of(l.b) {
                    map[index[l.a]].push(s);
                }
            }
            if index[l.b] != EXTERIOR {
                if let Some(s) = self.slot_of(l.a) {
                    map[index[l.b]].push(s);
                }
            }
        }
        for m in &mut map {
            m.sort_unstable();
            m.dedup();
        }
        map
    }

    /// Connected components of the interior under nearest-neighbour links.
    pub fn components(&self) -> usize {
        self.components
    }

    /// `Σ` interior cell areas.
    pub fn interior_volume(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    /// `Vol(Ω)`: interior cells plus half of each boundary cell, which places
    /// the edge of `Ω` on the boundary nodes where `u = 0` is imposed.
    pub fn volume(&self) -> f64 {
        kahan_sum(
            self.weights
                .iter()
                .copied()
                .chain(self.boundary.iter().map(|&b| 0.5 * self.all_weights[b])),
        )
    }

    /// `Vol(M)`.
    pub fn ambient_volume(&self) -> f64 {
        self.surface.volume()
    }

    /// Solves `A x = b` by conjugate gradients, preconditioned with a sparse
    /// Cholesky factor of `A` computed on first use (Jacobi if the
    /// factorization fails).
    pub(crate) fn solve_stiffness(&self, b: &[f64], tol: f64, accept: f64) -> Result<(Vec<f64>, SolveStats)> {
        let factor = self.factor.get_or_init(|| CholeskyFactor::new(&self.matrix).map(Arc::new));
        let (precond, max_iter) = match factor {
            Some(f) => (Preconditioner::Cholesky(f), 100),
            None => (Preconditioner::Jacobi, (20 * b.len()).max(2000)),
        };
        pcg(&self.matrix, b, &self.inv_weights, precond, tol, accept, max_iter)
    }

    /// `A u` (stiffness form).
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.apply(u)
    }

    /// `L u = W^{-1} A u`, the discrete `-Δ` with zero boundary values.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.apply(u);
        for (v, iw) in y.iter_mut().zip(&self.inv_weights) {
            *v *= iw;
        }
        y
    }

    /// `⟨u, v⟩_w = Σ w_i u_i v_i`.
    pub fn weighted_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        kahan_sum(self.weights.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b))
    }

    /// `Σ w_i u_i`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        kahan_sum(self.weights.iter().zip(u).map(|(w, a)| w * a))
    }

    /// The domain on the half-resolution grid, obtained by sampling the mask
    /// at the coarse nodes.
    pub fn coarsened(&self) -> Result<GridDomain> {
        let coarse = self
            .surface
            .coarsened()
            .ok_or_else(|| crate::Error::InvalidInput("grid cannot be coarsened further".into()))?;
        let map = self.surface.coarse_to_fine(&coarse);
        let mask = map.into_iter().map(|f| self.mask[f]).collect();
        GridDomain::from_mask(coarse, mask)
    }
}

fn check_poles(surface: &ClosedSurface, mask: &[bool], ntheta: usize, nphi: usize) -> Result<()> {
    let ring_uniform = |j: usize| {
        let first = mask[surface.sphere_node(j, 0)];
        (0..nphi).all(|k| mask[surface.sphere_node(j, k)] == first)
    };
    for (pole, next) in [(0, 1), (ntheta, ntheta - 1)] {
        let pole_in = mask[surface.sphere_node(pole, 0)];
        if pole_in {
            if !(1..ntheta).all(ring_uniform) {
                return invalid(
                    "domain contains a pole; only caps centred at a pole may do so",
                );
            }
        } else if (0..nphi).any(|k| mask[surface.sphere_node(next, k)]) {
            return invalid("domain touches a pole without containing it");
        }
    }
    Ok(())
}

fn count_components(adjacency: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; adjacency.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..adjacency.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    components
}

//! Lowest Dirichlet eigenpairs by shift-invert block Krylov iteration.
//!
//! Works with the symmetric form `S = W^{-1/2} A W^{-1/2}` of `L`. The
//! subspace is grown with `S^{-1}` (one preconditioned solve per vector),
//! kept orthonormal by full reorthogonalization, and projected with a
//! Rayleigh-Ritz step. Ritz vectors are post-multiplied by `S^{-1}` (one free
//! inverse-iteration step), which removes the high-frequency error that would
//! otherwise dominate `‖Lφ - λφ‖`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::domain::GridDomain;
use super::sparse::dot;
use super::GridField;
use crate::error::{invalid, Error, Result};
use crate::spectral::{SpectralData, SpectralPair};

/// Residual target: `‖Lφ - λφ‖_w ≤ EIGEN_RESIDUAL_TOL · max(1, λ)` with
/// `‖φ‖_w = 1`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
/// Relative gap below which eigenvalues are treated as one eigenspace.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Eigenspaces with `a² ≤ DEFAULT_A_SQ_FLOOR · Vol(Ω)` are left out of
/// `spec*`.
pub const DEFAULT_A_SQ_FLOOR: f64 = 1e-9;

const INNER_TOL: f64 = 1e-13;
const INNER_ACCEPT: f64 = 1e-10;
const SEED: u64 = 0x5eed_0f_e16e;

/// The `m` lowest eigenpairs of `L` on a domain.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    fields: Vec<GridField>,
    residuals: Vec<f64>,
    projections: Vec<f64>,
    volume: f64,
    subspace_dim: usize,
}

impl EigenDecomposition {
    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenfields, orthonormal in the node-volume inner product.
    pub fn fields(&self) -> &[GridField] {
        &self.fields
    }

    /// `‖Lφ - λφ‖_w` per pair.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `⟨φ, 1⟩_w` per pair.
    pub fn projections(&self) -> &[f64] {
        &self.projections
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Size of the search subspace at convergence.
    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    /// Distinct eigenvalues with the squared projection of `1` onto each
    /// eigenspace, including eigenspaces with negligible projection.
    pub fn clusters(&self) -> Vec<SpectralPair> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for (i, (&lam, &a)) in self.eigenvalues.iter().zip(&self.projections).enumerate() {
            match out.last_mut() {
                Some(c) if lam - self.eigenvalues[i - 1] <= CLUSTER_TOL * lam.abs() => {
                    c.0 += lam;
                    c.1 += a * a;
                    c.2 += 1;
                }
                _ => out.push((lam, a * a, 1)),
            }
        }
        out.into_iter()
            .map(|(s, a_sq, k)| SpectralPair { nu: s / k as f64, a_sq })
            .collect()
    }

    /// `Σ a²` over all computed pairs.
    pub fn a_sq_sum(&self) -> f64 {
        self.projections.iter().map(|a| a * a).sum()
    }

    /// `spec*` truncated to the computed pairs: eigenspaces whose `a²`
    /// exceeds `floor · Vol(Ω)`.
    pub fn spectral_data(&self, floor: f64) -> Result<SpectralData> {
        let cut = floor * self.volume;
        let pairs = self.clusters().into_iter().filter(|p| p.a_sq > cut).collect();
        SpectralData::new(self.volume, pairs)
    }
}

struct Operator<'a> {
    domain: &'a GridDomain,
    sqrt_w: Vec<f64>,
}

impl Operator<'_> {
    /// `S^{-1} q = W^{1/2} A^{-1} W^{1/2} q`.
    fn apply(&self, q: &[f64]) -> Result<Vec<f64>> {
        let b: Vec<f64> = q.iter().zip(&self.sqrt_w).map(|(x, s)| x * s).collect();
        let (x, _) = self.domain.solve_stiffness(&b, INNER_TOL, INNER_ACCEPT)?;
        Ok(x.iter().zip(&self.sqrt_w).map(|(x, s)| x * s).collect())
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.par_iter().map(|q| dot(q, v)).collect();
        for (q, c) in basis.iter().zip(coeffs) {
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

/// Orthonormalizes `block` against `basis` and itself, replacing deflated
/// vectors by random ones.
fn orthonormalize(block: Vec<Vec<f64>>, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = basis.first().or(block.first()).map_or(0, Vec::len);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut v in block {
        for attempt in 0..4 {
            let before = norm(&v);
            project_out(&mut v, basis);
            project_out(&mut v, &out);
            let after = norm(&v);
            if after > 1e-8 * before && after > 0.0 {
                v.iter_mut().for_each(|x| *x /= after);
                out.push(v);
                break;
            }
            if attempt == 3 || basis.len() + out.len() >= n {
                break;
            }
            v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
    }
    out
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Rayleigh-Ritz on `span(Q)` with `H = Qᵀ S^{-1} Q`; returns the `count`
/// post-processed Ritz vectors `S^{-1} Q s` for the largest Ritz values of
/// `H`, mapped back to `φ = W^{-1/2} z`.
fn ritz(h: &[Vec<f64>], y: &[Vec<f64>], sqrt_w: &[f64], count: usize) -> Ritz {
    let k = h.len();
    let hm = DMatrix::from_fn(k, k, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let eig = SymmetricEigen::new(hm);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = sqrt_w.len();
    let vectors: Vec<Vec<f64>> = order[..count.min(k)]
        .par_iter()
        .map(|&c| {
            let s = eig.eigenvectors.column(c);
            let mut z = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                let coef = s[j];
                for (zi, yi) in z.iter_mut().zip(yj) {
                    *zi += coef * yi;
                }
            }
            z.iter().zip(sqrt_w).map(|(v, s)| v / s).collect()
        })
        .collect();
    Ritz { values: order[..count.min(k)].iter().map(|&c| 1.0 / eig.eigenvalues[c]).collect(), vectors }
}

struct Refined {
    values: Vec<f64>,
    fields: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

/// Rayleigh-Ritz for `A φ = λ W φ` on the span of `vectors`, giving
/// `W`-orthonormal fields and their residuals.
fn refine(domain: &GridDomain, vectors: &[Vec<f64>]) -> Result<Refined> {
    let k = vectors.len();
    let av: Vec<Vec<f64>> = vectors.par_iter().map(|v| domain.apply_stiffness(v)).collect();
    let gram = DMatrix::from_fn(k, k, |i, j| domain.weighted_dot(&vectors[i], &vectors[j]));
    let stiff = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&vectors[i], &av[j]) + dot(&vectors[j], &av[i])));
    let gram = DMatrix::from_fn(k, k, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("eigenvector candidates are linearly dependent".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("eigenvector candidates are linearly dependent".into()))?;
    let c = &l_inv * &stiff * l_inv.transpose();
    let c = DMatrix::from_fn(k, k, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let coeffs = l_inv.transpose() * &eig.eigenvectors;
    let n = domain.interior_len();
    let results: Vec<(f64, Vec<f64>, f64)> = order
        .par_iter()
        .map(|&c| {
            let mut phi = vec![0.0; n];
            for (j, v) in vectors.iter().enumerate() {
                let a = coeffs[(j, c)];
                for (p, x) in phi.iter_mut().zip(v) {
                    *p += a * x;
                }
            }
            let scale = domain.weighted_dot(&phi, &phi).sqrt();
            phi.iter_mut().for_each(|p| *p /= scale);
            // fix the sign so that ⟨φ, 1⟩_w ≥ 0
            if domain.integrate(&phi) < 0.0 {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
            let lphi = domain.apply_laplacian(&phi);
            let lambda = domain.weighted_dot(&phi, &lphi);
            let r: Vec<f64> = lphi.iter().zip(&phi).map(|(l, p)| l - lambda * p).collect();
            (lambda, phi, domain.weighted_dot(&r, &r).sqrt())
        })
        .collect();
    let mut out = Refined { values: Vec::new(), fields: Vec::new(), residuals: Vec::new() };
    for (l, f, r) in results {
        out.values.push(l);
        out.fields.push(f);
        out.residuals.push(r);
    }
    Ok(out)
}

fn target(lambda: f64) -> f64 {
    EIGEN_RESIDUAL_TOL * lambda.abs().max(1.0)
}

/// The `m` smallest eigenvalues of the Dirichlet operator `L` with
/// `W`-orthonormal eigenfields. If the `m`-th eigenvalue belongs to a
/// cluster that extends further, converged members of that cluster are
/// included as well.
pub fn dirichlet_eigenpairs(domain: &GridDomain, m: usize) -> Result<EigenDecomposition> {
    let n = domain.interior_len();
    if m == 0 {
        return invalid("at least one eigenpair is required");
    }
    if 2 * m > n {
        return invalid(format!("{m} eigenpairs requested for only {n} interior nodes"));
    }
    let block = m.clamp(2, 4).min(n);
    let guard = block.min(n - m);
    let wanted = m + guard;
    let cap = n.min(6 * m + 60).max(wanted + block);
    let check_every = (m / (2 * block)).max(1);

    let op = Operator { domain, sqrt_w: domain.weights().iter().map(|w| w.sqrt()).collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut y: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut next = orthonormalize(start, &q, &mut rng);
    let mut steps = 0;
    let mut last: Option<Refined> = None;

    loop {
        let images: Vec<Vec<f64>> = next.par_iter().map(|v| op.apply(v)).collect::<Result<_>>()?;
        for (v, img) in next.into_iter().zip(&images) {
            q.push(v);
            y.push(img.clone());
        }
        // extend H = Qᵀ Y by the new rows and columns
        let k = q.len();
        for row in &mut h {
            row.resize(k, 0.0);
        }
        h.resize(k, vec![0.0; k]);
        let start_col = k - images.len();
        let cols: Vec<Vec<f64>> = (start_col..k)
            .into_par_iter()
            .map(|j| q.iter().map(|qi| dot(qi, &y[j])).collect())
            .collect();
        for (off, col) in cols.into_iter().enumerate() {
            let j = start_col + off;
            for (i, v) in col.into_iter().enumerate() {
                h[i][j] = v;
                if i < start_col {
                    h[j][i] = v;
                }
            }
        }
        steps += 1;

        let full = k >= cap || k >= n;
        if k >= wanted && (steps % check_every == 0 || full) {
            let r = ritz(&h, &y, &op.sqrt_w, wanted);
            let refined = refine(domain, &r.vectors)?;
            debug_assert_eq!(r.values.len(), refined.values.len());
            let done = refined.values[..m].iter().zip(&refined.residuals[..m]).all(|(&l, &res)| res <= target(l));
            if done {
                return Ok(assemble(domain, refined, m, k));
            }
            last = Some(refined);
        }
        if k >= cap || k >= n {
            break;
        }
        let fresh: Vec<Vec<f64>> = images.into_iter().take(cap - k).collect();
        next = orthonormalize(fresh, &q, &mut rng);
        if next.is_empty() {
            break;
        }
    }

    let unconverged = match last {
        Some(r) => r.values[..m]
            .iter()
            .zip(&r.residuals[..m])
            .enumerate()
            .filter(|(_, (&l, &res))| res > target(l))
            .map(|(i, (_, &res))| (i + 1, res))
            .collect(),
        None => vec![(1, f64::INFINITY)],
    };
    Err(Error::EigenNonConvergence { unconverged, target: EIGEN_RESIDUAL_TOL })
}

fn assemble(domain: &GridDomain, refined: Refined, m: usize, subspace_dim: usize) -> EigenDecomposition {
    let mut keep = m;
    while keep < refined.values.len()
        && refined.residuals[keep] <= target(refined.values[keep])
        && refined.values[keep] - refined.values[keep - 1] <= CLUSTER_TOL * refined.values[keep]
    {
        keep += 1;
    }
    let fields: Vec<GridField> = refined.fields.into_iter().take(keep).map(|v| GridField { values: v }).collect();
    let projections = fields.iter().map(|f| domain.integrate(f.values())).collect();
    EigenDecomposition {
        eigenvalues: refined.values[..keep].to_vec(),
        residuals: refined.residuals[..keep].to_vec(),
        fields,
        projections,
        volume: domain.volume(),
        subspace_dim,
    }
}

use dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, MatMut, Par, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};

const ROWS_PER_TASK: usize = 2048;

/// Symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
pub(crate) struct CsrMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; diagonal entries are
    /// included in the lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; rows.len()];
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if j == i {
                    diag[i] += v;
                }
                if cols.len() > row_ptr[i] && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals, diag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            acc += self.vals[p] * x[self.cols[p]];
        }
        acc
    }

    /// `y = A x`, parallel over row blocks; each row is summed in a fixed
    /// order so the result does not depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(ROWS_PER_TASK).enumerate().for_each(|(c, chunk)| {
            let base = c * ROWS_PER_TASK;
            for (k, out) in chunk.iter_mut().enumerate() {
                *out = self.row_dot(base + k, x);
            }
        });
    }

    /// `|A| |x|`, entrywise absolute values.
    pub fn abs_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        y.par_chunks_mut(ROWS_PER_TASK).enumerate().for_each(|(c, chunk)| {
            let base = c * ROWS_PER_TASK;
            for (k, out) in chunk.iter_mut().enumerate() {
                let i = base + k;
                *out = (self.row_ptr[i]..self.row_ptr[i + 1]).map(|p| (self.vals[p] * x[self.cols[p]]).abs()).sum();
            }
        });
        y
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.matvec(x, &mut y);
        y
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sqrt(Σ r_i² / w_i)`.
fn weighted_norm(r: &[f64], inv_w: &[f64]) -> f64 {
    r.iter().zip(inv_w).map(|(x, iw)| x * x * iw).sum::<f64>().sqrt()
}

/// Sparse Cholesky factor `P A Pᵀ = L Lᵀ` with a fill-reducing ordering.
pub(crate) struct CholeskyFactor {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl std::fmt::Debug for CholeskyFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CholeskyFactor").field("nnz", &self.values.len()).finish()
    }
}

impl CholeskyFactor {
    /// Factors `a`; `None` if it is not numerically positive definite.
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.dim();
        let mut triplets = Vec::with_capacity(a.vals.len());
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.cols[p] <= i {
                    triplets.push(Triplet::new(i, a.cols[p], a.vals[p]));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).ok()?;
        let symbolic = factorize_symbolic_cholesky(
            mat.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            Default::default(),
        )
        .ok()?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut buf = MemBuffer::try_new(symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default())).ok()?;
        symbolic
            .factorize_numeric_llt(
                &mut values,
                mat.as_ref(),
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .ok()?;
        Some(Self { symbolic, values })
    }

    /// Overwrites `rhs` with `A^{-1} rhs`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let mat = MatMut::from_column_major_slice_mut(rhs, n, 1);
        LltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            mat,
            Par::Seq,
            MemStack::new(&mut buf),
        );
    }
}

/// Preconditioner for [`pcg`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum Preconditioner<'a> {
    Jacobi,
    Cholesky(&'a CholeskyFactor),
}

/// Convergence record of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// True relative residual `‖b - Ax‖ / ‖b‖` in the `W^{-1}` norm.
    pub residual: f64,
    /// Rounding floor `8ε ‖|A||x| + |b|‖ / ‖b‖` in the same norm; residuals
    /// below it cannot be distinguished from zero in double precision.
    pub floor: f64,
}

/// Preconditioned conjugate gradients for `A x = b`.
///
/// Residuals are measured in the `W^{-1}` norm, which for `b = W f` is the
/// node-volume norm of `L x - f` with `L = W^{-1} A`. Iterates until the
/// recursive residual drops below `tol`, then confirms with the true
/// residual, restarting from it if rounding has let the two drift apart.
/// The solve is accepted once the true residual is below `accept` or the
/// rounding floor, whichever is larger.
pub(crate) fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    inv_w: &[f64],
    precond: Preconditioner<'_>,
    tol: f64,
    accept: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    let bnorm = weighted_norm(b, inv_w);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, residual: 0.0, floor: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let apply_precond = |r: &[f64], z: &mut [f64]| match precond {
        Preconditioner::Jacobi => {
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
        }
        Preconditioner::Cholesky(f) => {
            z.copy_from_slice(r);
            f.solve_in_place(z);
        }
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    let mut true_res = f64::INFINITY;
    let mut floor = 0.0;

    for _restart in 0..4 {
        apply_precond(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            if weighted_norm(&r, inv_w) <= tol * bnorm {
                break;
            }
            a.matvec(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            apply_precond(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        a.matvec(&x, &mut q);
        for i in 0..n {
            r[i] = b[i] - q[i];
        }
        let previous = true_res;
        true_res = weighted_norm(&r, inv_w) / bnorm;
        let scale: Vec<f64> = a.abs_matvec(&x).iter().zip(b).map(|(s, bi)| s + bi.abs()).collect();
        floor = 8.0 * f64::EPSILON * weighted_norm(&scale, inv_w) / bnorm;
        if true_res <= accept.max(floor) || iterations >= max_iter || true_res > 0.5 * previous {
            break;
        }
    }
    if true_res > accept.max(floor) {
        return Err(Error::NonConvergence {
            method: "conjugate gradients",
            iterations,
            residual: true_res,
            target: accept.max(floor),
        });
    }
    Ok((x, SolveStats { iterations, residual: true_res, floor }))
}

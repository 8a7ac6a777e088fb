//! Dense symmetric positive-definite factorization and a conjugate-gradient
//! solver for the sparse operators that are too large to materialize.
//!
//! Graphs at desk scale stay below a few thousand vertices, where a dense
//! Cholesky is exact, simple and fast. The lattice probe works on boxes of
//! ~10^4 vertices, where only matrix-vector products are affordable; those
//! go through [`conjugate_gradient`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// Unlike `nalgebra`'s built-in factorization this reports the index of the
/// failing pivot, which identifies the leading minor that lost positivity.
#[derive(Debug)]
pub struct Cholesky {
    lower: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `a = L L^T`. Fails with the pivot index if `a` is not
    /// positive definite.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log det a`, from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|j| 2.0 * self.lower[(j, j)].ln()).sum()
    }

    /// Solves `a x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let l = &self.lower;
        let mut y = b.clone();
        for i in 0..n {
            for k in 0..i {
                let t = l[(i, k)] * y[k];
                y[i] -= t;
            }
            y[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = l[(k, i)] * y[k];
                y[i] -= t;
            }
            y[i] /= l[(i, i)];
        }
        y
    }

    /// Full inverse; symmetric by construction up to roundoff, so the
    /// result is symmetrized before returning.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            let col = self.solve(&e);
            inv.set_column(j, &col);
        }
        // Symmetrize to keep downstream identity checks clean.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

/// Tests positive definiteness by attempting a Cholesky factorization.
pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    Cholesky::new(a).is_ok()
}

/// Schur complement of `a` onto the complement of `u`:
/// `a_cc - a_cu (a_uu)^{-1} a_uc`, rows/columns ordered as in `complement`.
pub fn schur_complement(a: &DMatrix<f64>, u: &[usize]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let in_u = {
        let mut mask = vec![false; n];
        for &i in u {
            mask[i] = true;
        }
        mask
    };
    let comp: Vec<usize> = (0..n).filter(|&i| !in_u[i]).collect();
    if u.is_empty() {
        return Ok(a.select_rows(comp.iter()).select_columns(comp.iter()));
    }
    let a_uu = a.select_rows(u.iter()).select_columns(u.iter());
    let a_uc = a.select_rows(u.iter()).select_columns(comp.iter());
    let chol = Cholesky::new(&a_uu)?;
    let mut result = a.select_rows(comp.iter()).select_columns(comp.iter());
    // result -= a_cu (a_uu)^{-1} a_uc, one solve per column of a_uc.
    for (jc, _) in comp.iter().enumerate() {
        let rhs = a_uc.column(jc).into_owned();
        let x = chol.solve(&rhs);
        for (ic, _) in comp.iter().enumerate() {
            let mut dot = 0.0;
            for (k, _) in u.iter().enumerate() {
                dot += a_uc[(k, ic)] * x[k];
            }
            result[(ic, jc)] -= dot;
        }
    }
    Ok(result)
}

/// Symmetric sparse matrix in compressed neighbour-list form, for
/// matrix-vector products only.
pub struct SparseSym {
    pub n: usize,
    pub diag: Vec<f64>,
    pub off: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut s = self.diag[i] * x[i];
            for &(j, w) in &self.off[i] {
                s += w * x[j];
            }
            out[i] = s;
        }
    }
}

/// Jacobi-preconditioned conjugate gradients for positive-definite sparse
/// systems. Returns the solution and the iteration count.
pub fn conjugate_gradient(
    a: &SparseSym,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let minv: Vec<f64> = a.diag.iter().map(|&d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&minv, ).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok((x, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Degenerate {
        context: "conjugate gradient",
        detail: format!("no convergence in {max_iter} iterations"),
    })
}

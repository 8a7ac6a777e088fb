//! The operator `H_beta = 2 beta - W`, Green matrices, `F`-ratios, `psi`
//! vectors, Schur complements, and harmonic residuals.
//!
//! Everything here is dense Cholesky: at desk scale exactness and
//! simplicity beat scalability, and the sparse conjugate-gradient path in
//! [`crate::linalg`] covers the one large-lattice experiment.

use nalgebra::{DMatrix, DVector};

use crate::beta::BetaField;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::{schur_complement, Cholesky, SparseSym};

/// Where a Green matrix came from; restricted matrices are extended by zero
/// outside their index set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenKind {
    /// Inverse of the full `H_beta`.
    Full,
    /// Inverse of an interior restriction `(H_beta)_{U,U}`.
    Restricted,
    /// Boundary-block inverse `(2 rho - C)^{-1}`.
    Boundary,
}

/// A symmetric positive Green matrix over an explicit vertex set.
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    mat: DMatrix<f64>,
    support: Vec<usize>,
    kind: GreenKind,
}

impl GreenMatrix {
    pub fn from_parts(mat: DMatrix<f64>, support: Vec<usize>, kind: GreenKind) -> Self {
        Self { mat, support, kind }
    }

    pub fn kind(&self) -> GreenKind {
        self.kind
    }

    /// The vertex indices this matrix is defined over.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Entry by original vertex labels; zero outside the support.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let pi = self.support.iter().position(|&v| v == i);
        let pj = self.support.iter().position(|&v| v == j);
        match (pi, pj) {
            (Some(a), Some(b)) => self.mat[(a, b)],
            _ => 0.0,
        }
    }

    /// Entry by position within the support.
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.mat[(a, b)]
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Dense `H_beta = 2 beta - W` for a graph with optional self-weights.
pub fn h_beta(g: &WeightedGraph, b: &BetaField) -> DMatrix<f64> {
    let n = g.vertex_count();
    assert_eq!(b.len(), n, "beta/graph dimension mismatch");
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 2.0 * b.0[i] - g.self_weight(i);
        for &(j, w) in g.neighbours(i) {
            h[(i, j)] = -w;
        }
    }
    h
}

/// Sparse form of `H_beta` for matrix-vector products.
pub fn h_beta_sparse(g: &WeightedGraph, b: &BetaField) -> SparseSym {
    let n = g.vertex_count();
    SparseSym {
        n,
        diag: (0..n).map(|i| 2.0 * b.0[i] - g.self_weight(i)).collect(),
        off: (0..n)
            .map(|i| g.neighbours(i).iter().map(|&(j, w)| (j, -w)).collect())
            .collect(),
    }
}

/// Full Green matrix `(H_beta)^{-1}` via Cholesky.
pub fn green(g: &WeightedGraph, b: &BetaField) -> Result<GreenMatrix> {
    let h = h_beta(g, b);
    let chol = Cholesky::new(&h)?;
    Ok(GreenMatrix {
        mat: chol.inverse(),
        support: (0..g.vertex_count()).collect(),
        kind: GreenKind::Full,
    })
}

/// `F(i, j) = G(i, j) / G(j, j)`; equals 1 on the diagonal.
pub fn f_ratio(g: &GreenMatrix, i: usize, j: usize) -> f64 {
    g.entry(i, j) / g.entry(j, j)
}

/// Interior-restricted Green matrix `((H_beta)_{U,U})^{-1}` over `subset`,
/// extended by zero outside.
pub fn hat_green_restricted(
    g: &WeightedGraph,
    b: &BetaField,
    subset: &[usize],
) -> Result<GreenMatrix> {
    let h = h_beta(g, b);
    let hk = h.select_rows(subset.iter()).select_columns(subset.iter());
    let chol = Cholesky::new(&hk)?;
    Ok(GreenMatrix {
        mat: chol.inverse(),
        support: subset.to_vec(),
        kind: GreenKind::Restricted,
    })
}

/// Boundary-intensity vector of `subset`: for each vertex, edges leaving
/// the subset plus its outward weight.
pub fn eta_of_subset(g: &WeightedGraph, subset: &[usize]) -> Vec<f64> {
    let n = g.vertex_count();
    let mut inside = vec![false; n];
    for &v in subset {
        inside[v] = true;
    }
    subset
        .iter()
        .map(|&v| {
            g.outward_weight(v)
                + g.neighbours(v)
                    .iter()
                    .filter(|&&(u, _)| !inside[u])
                    .map(|&(_, w)| w)
                    .sum::<f64>()
        })
        .collect()
}

/// The nonnegative vector `psi = Ghat eta` over `subset`. Extended by one
/// outside the subset, it is annihilated by `H_beta` on the subset.
#[derive(Debug, Clone)]
pub struct PsiVector {
    pub values: DVector<f64>,
    pub support: Vec<usize>,
}

impl PsiVector {
    pub fn value_at(&self, v: usize) -> f64 {
        self.support
            .iter()
            .position(|&u| u == v)
            .map(|p| self.values[p])
            .unwrap_or(0.0)
    }
}

/// `psi = Ghat^{(n)} eta^{(n)}` for the restriction to `subset`, with `eta`
/// derived from the graph (edges leaving the subset plus outward weights).
pub fn psi_restricted(g: &WeightedGraph, b: &BetaField, subset: &[usize]) -> Result<PsiVector> {
    let eta = eta_of_subset(g, subset);
    psi_restricted_with_eta(g, b, subset, &eta)
}

/// As [`psi_restricted`] with an explicit `eta` over the subset.
pub fn psi_restricted_with_eta(
    g: &WeightedGraph,
    b: &BetaField,
    subset: &[usize],
    eta: &[f64],
) -> Result<PsiVector> {
    if eta.len() != subset.len() {
        return Err(Error::DimensionMismatch {
            expected: subset.len(),
            got: eta.len(),
        });
    }
    let h = h_beta(g, b);
    let hk = h.select_rows(subset.iter()).select_columns(subset.iter());
    let chol = Cholesky::new(&hk)?;
    let rhs = DVector::from_column_slice(eta);
    Ok(PsiVector {
        values: chol.solve(&rhs),
        support: subset.to_vec(),
    })
}

/// Schur complement of `h` onto the complement of `subset`:
/// `h_cc - h_cu (h_uu)^{-1} h_uc`. Its inverse equals the corresponding
/// block of `h^{-1}`.
pub fn schur(h: &DMatrix<f64>, subset: &[usize]) -> Result<DMatrix<f64>> {
    schur_complement(h, subset)
}

/// Maximum absolute residual `max_{i in subset} |(h f)_i|`, the measure of
/// how far `f` is from being `H_beta`-harmonic on `subset`.
pub fn harmonic_residual(h: &DMatrix<f64>, f: &DVector<f64>, subset: &[usize]) -> f64 {
    let hf = h * f;
    subset.iter().map(|&i| hf[i].abs()).fold(0.0, f64::max)
}

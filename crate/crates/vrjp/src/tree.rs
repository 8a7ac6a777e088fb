//! Tree-specific machinery: branch-resolved harmonic decompositions of
//! `psi`, boundary coupling matrices, the boundary-block Green matrix, and
//! harmonic measures.
//!
//! Throughout, the tree is truncated to its first `n` generations (an index
//! prefix, by breadth-first numbering) and `m <= n` selects the boundary
//! resolution: one boundary point per generation-`m` vertex, absorbing the
//! outward edges of its branch. `m = 0` is the wired restriction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::beta::{self, BetaField, NuParams};
use crate::error::{Error, Result};
use crate::graph::{restrict_tree_bm, RootedTree, WeightedGraph};
use crate::green::{GreenKind, GreenMatrix};
use crate::linalg::Cholesky;

/// Interior Green machinery for the first `n` generations of a tree: one
/// Cholesky factorization of `H_beta` on the truncation, with cached
/// columns on demand.
pub struct TreeGreen<'t> {
    tree: &'t RootedTree,
    n: usize,
    size: usize,
    chol: Cholesky,
    eta: Vec<f64>,
    columns: std::cell::RefCell<std::collections::BTreeMap<usize, DVector<f64>>>,
}

impl<'t> TreeGreen<'t> {
    pub fn new(tree: &'t RootedTree, b: &BetaField, n: usize) -> Result<Self> {
        let size = tree.truncation_size(n);
        if b.len() < size {
            return Err(Error::DimensionMismatch {
                expected: size,
                got: b.len(),
            });
        }
        let mut h = DMatrix::zeros(size, size);
        for v in 0..size {
            h[(v, v)] = 2.0 * b.0[v] - tree.graph().self_weight(v);
            if let Some(p) = tree.parent(v) {
                let w = tree.graph().weight(p, v);
                h[(v, p)] = -w;
                h[(p, v)] = -w;
            }
        }
        let chol = Cholesky::new(&h)?;
        let eta = (0..size).map(|v| tree.eta_at(v, n)).collect();
        Ok(Self {
            tree,
            n,
            size,
            chol,
            eta,
            columns: Default::default(),
        })
    }

    pub fn tree(&self) -> &RootedTree {
        self.tree
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// Column `Ghat(., v)` of the interior-restricted Green matrix.
    pub fn ghat_column(&self, v: usize) -> DVector<f64> {
        if let Some(col) = self.columns.borrow().get(&v) {
            return col.clone();
        }
        let mut e = DVector::zeros(self.size);
        e[v] = 1.0;
        let col = self.chol.solve(&e);
        self.columns.borrow_mut().insert(v, col.clone());
        col
    }

    pub fn ghat_entry(&self, i: usize, j: usize) -> f64 {
        self.ghat_column(j)[i]
    }

    /// `psi = Ghat eta` over the truncation.
    pub fn psi(&self) -> DVector<f64> {
        let rhs = DVector::from_column_slice(&self.eta);
        self.chol.solve(&rhs)
    }

    /// `Fhat(i, j) = Ghat(i, j) / Ghat(j, j)`.
    pub fn f_hat(&self, i: usize, j: usize) -> f64 {
        let col = self.ghat_column(j);
        col[i] / col[j]
    }

    /// Outward weights of the truncation restricted to the branch of `x`:
    /// the right-hand side whose solve is the branch column of `chi`.
    pub fn branch_rhs(&self, x: usize) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.size);
        for v in self.tree.generation(self.n) {
            if self.eta[v] != 0.0 && self.tree.is_descendant(x, v) {
                rhs[v] = self.eta[v];
            }
        }
        rhs
    }

    /// Branch mass seen from `i`: `chi_{|x|}(i, delta_x)`, computed as a
    /// dot product against the cached column `Ghat(., i)`.
    pub fn branch_mass(&self, i: usize, x: usize) -> f64 {
        let col = self.ghat_column(i);
        let mut sum = 0.0;
        for v in self.tree.generation(self.n) {
            if self.eta[v] != 0.0 && self.tree.is_descendant(x, v) {
                sum += col[v] * self.eta[v];
            }
        }
        sum
    }
}

/// The branch decomposition of `psi` at resolution `m`: column `x` is the
/// harmonic mass routed through the branch of the generation-`m` vertex
/// `x`. Rows sum to `psi`.
#[derive(Debug, Clone)]
pub struct ChiMatrix {
    /// `size x cells`: entry `(i, c)` is `chi(i, delta_{cells[c]})`.
    pub values: DMatrix<f64>,
    /// The generation-`m` vertices owning the boundary points.
    pub cells: Vec<usize>,
    pub m: usize,
    pub n: usize,
}

impl ChiMatrix {
    /// Index of the cell whose branch contains `x`.
    pub fn cell_of(&self, tree: &RootedTree, x: usize) -> Option<usize> {
        self.cells.iter().position(|&z| tree.is_descendant(z, x))
    }

    /// Row sums, which equal `psi` on the truncation.
    pub fn row_sums(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.values.nrows());
        for c in 0..self.values.ncols() {
            out += self.values.column(c);
        }
        out
    }
}

/// Branch decomposition by one linear solve per boundary cell.
pub fn chi_solve(green: &TreeGreen, m: usize) -> Result<ChiMatrix> {
    if m > green.truncation() {
        return Err(Error::InvalidParameter(format!(
            "branch generation {m} exceeds truncation {}",
            green.truncation()
        )));
    }
    let cells: Vec<usize> = green.tree().generation(m).collect();
    let mut values = DMatrix::zeros(green.size(), cells.len());
    for (c, &x) in cells.iter().enumerate() {
        let rhs = green.branch_rhs(x);
        let col = green.chol.solve(&rhs);
        values.set_column(c, &col);
    }
    Ok(ChiMatrix {
        values,
        cells,
        m,
        n: green.truncation(),
    })
}

/// Branch decomposition in closed form, using only `psi` and the hitting
/// ratios `Fhat` at the cell vertices and their parents:
///
/// ```text
/// chi(i, delta_x) = 1_{i in U_x} (psi(i) - Fhat(i,x) psi(x))
///   + Fhat(i,x) (psi(x) - Fhat(x,px) psi(px)) / (1 - Fhat(x,px) Fhat(px,x))
/// ```
///
/// Produces the same matrix as [`chi_solve`]; a degenerate denominator
/// falls back to the linear solve for that cell.
pub fn chi_closed(green: &TreeGreen, m: usize) -> Result<ChiMatrix> {
    if m > green.truncation() {
        return Err(Error::InvalidParameter(format!(
            "branch generation {m} exceeds truncation {}",
            green.truncation()
        )));
    }
    let tree = green.tree();
    let cells: Vec<usize> = tree.generation(m).collect();
    let psi = green.psi();
    let mut values = DMatrix::zeros(green.size(), cells.len());
    if m == 0 {
        values.set_column(0, &psi);
        return Ok(ChiMatrix {
            values,
            cells,
            m,
            n: green.truncation(),
        });
    }
    for (c, &x) in cells.iter().enumerate() {
        let px = tree.parent(x).expect("cells of generation >= 1 have parents");
        let col_x = green.ghat_column(x);
        let f_x_px = green.f_hat(x, px);
        let f_px_x = green.f_hat(px, x);
        let denom = 1.0 - f_x_px * f_px_x;
        if denom <= 1e-12 {
            // Numerically degenerate cell: use the solve route.
            let rhs = green.branch_rhs(x);
            let col = green.chol.solve(&rhs);
            values.set_column(c, &col);
            continue;
        }
        let through = (psi[x] - f_x_px * psi[px]) / denom;
        for i in 0..green.size() {
            let f_i_x = col_x[i] / col_x[x];
            let inside = if tree.is_descendant(x, i) && i != x {
                psi[i] - f_i_x * psi[x]
            } else {
                0.0
            };
            values[(i, c)] = inside + f_i_x * through;
        }
    }
    Ok(ChiMatrix {
        values,
        cells,
        m,
        n: green.truncation(),
    })
}

/// The boundary coupling `Wtilde_{B,T} Ghat Wtilde_{T,B}`: self-weights on
/// the diagonal, cross-branch conductances off it. Built from the chi
/// columns, since column `x` of `Wtilde_{T,B}` is exactly the branch
/// right-hand side.
pub fn boundary_coupling_matrix(green: &TreeGreen, chi: &ChiMatrix) -> DMatrix<f64> {
    let k = chi.cells.len();
    let mut w = DMatrix::zeros(k, k);
    for (a, &x) in chi.cells.iter().enumerate() {
        let rhs = green.branch_rhs(x);
        for b in 0..k {
            w[(a, b)] = rhs.dot(&chi.values.column(b).into_owned());
        }
    }
    // Symmetrize roundoff.
    for a in 0..k {
        for b in (a + 1)..k {
            let v = 0.5 * (w[(a, b)] + w[(b, a)]);
            w[(a, b)] = v;
            w[(b, a)] = v;
        }
    }
    w
}

/// Cross-branch coupling with zero diagonal, from the meet formula:
/// `C(x, y) = chi(x^y, dx) chi(x^y, dy) / Ghat(x^y, x^y)` for `x != y`.
///
/// Agrees with the off-diagonal part of [`boundary_coupling_matrix`]; the
/// two routes are independent and are cross-checked in the tests.
pub fn check_matrix(green: &TreeGreen, chi: &ChiMatrix) -> DMatrix<f64> {
    let k = chi.cells.len();
    let mut c = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let meet = green.tree().meet(chi.cells[a], chi.cells[b]);
            let v = chi.values[(meet, a)] * chi.values[(meet, b)] / green.ghat_entry(meet, meet);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    c
}

/// Strips the diagonal of a coupling matrix, leaving the cross-branch part.
pub fn strip_diagonal(coupling: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = coupling.clone();
    for i in 0..c.nrows() {
        c[(i, i)] = 0.0;
    }
    c
}

/// Centered boundary potential `rho_b = beta_b - coupling_bb / 2`.
pub fn beta_to_rho(beta_boundary: &[f64], coupling: &DMatrix<f64>) -> Vec<f64> {
    beta_boundary
        .iter()
        .enumerate()
        .map(|(b, &v)| v - 0.5 * coupling[(b, b)])
        .collect()
}

pub fn rho_to_beta(rho: &[f64], coupling: &DMatrix<f64>) -> Vec<f64> {
    rho.iter()
        .enumerate()
        .map(|(b, &v)| v + 0.5 * coupling[(b, b)])
        .collect()
}

/// Draws the boundary potential conditionally on the interior, returning
/// the centered `rho` (whose law has the cross-branch coupling as
/// conductances and no intensity).
pub fn sample_rho<R: Rng + ?Sized>(coupling: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let k = coupling.nrows();
    let mut edges = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            if coupling[(a, b)] != 0.0 {
                edges.push((a, b, coupling[(a, b)]));
            }
        }
    }
    let mut g = WeightedGraph::from_edges(k, &edges)?;
    for a in 0..k {
        g.set_self_weight(a, coupling[(a, a)]);
    }
    let params = NuParams::zero_eta(g);
    let order: Vec<usize> = (0..k).collect();
    let b = beta::sample_nu(&params, &order, rng)?;
    Ok(beta_to_rho(b.as_slice(), coupling))
}

/// Boundary-block Green matrix `(2 rho - C)^{-1}`.
pub fn check_green(rho: &[f64], check: &DMatrix<f64>) -> Result<GreenMatrix> {
    let k = check.nrows();
    if rho.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: rho.len(),
        });
    }
    let mut h = -check.clone();
    for b in 0..k {
        h[(b, b)] = 2.0 * rho[b];
    }
    let chol = Cholesky::new(&h)?;
    Ok(GreenMatrix::from_parts(
        chol.inverse(),
        (0..k).collect(),
        GreenKind::Boundary,
    ))
}

/// One entry of the boundary-resolved Green matrix
/// `G_m(i, j) = Ghat(i, j) + sum_{b,b'} chi(i,b) Gcheck(b,b') chi(j,b')`.
pub fn g_m_entry(
    green: &TreeGreen,
    chi: &ChiMatrix,
    gcheck: &GreenMatrix,
    i: usize,
    j: usize,
) -> f64 {
    let k = chi.cells.len();
    let mut corr = 0.0;
    for a in 0..k {
        for b in 0..k {
            corr += chi.values[(i, a)] * gcheck.at(a, b) * chi.values[(j, b)];
        }
    }
    green.ghat_entry(i, j) + corr
}

/// The column `G_m(i0, .)` over interior then boundary vertices.
pub fn g_m_column(
    green: &TreeGreen,
    chi: &ChiMatrix,
    gcheck: &GreenMatrix,
    i0: usize,
) -> DVector<f64> {
    let k = chi.cells.len();
    let size = green.size();
    let ghat_i0 = green.ghat_column(i0);
    // weights[b] = sum_a chi(i0, a) Gcheck(a, b) = G_m(i0, delta_b).
    let mut weights = vec![0.0; k];
    for b in 0..k {
        for a in 0..k {
            weights[b] += chi.values[(i0, a)] * gcheck.at(a, b);
        }
    }
    let mut col = DVector::zeros(size + k);
    for j in 0..size {
        let mut corr = 0.0;
        for b in 0..k {
            corr += weights[b] * chi.values[(j, b)];
        }
        col[j] = ghat_i0[j] + corr;
    }
    for b in 0..k {
        col[size + b] = weights[b];
    }
    col
}

/// Dense oracle for the same column: invert the full operator of the
/// boundary graph, with the boundary potential reconstructed from `rho`.
pub fn g_m_column_dense_oracle(
    tree: &RootedTree,
    b: &BetaField,
    rho: &[f64],
    coupling: &DMatrix<f64>,
    m: usize,
    n: usize,
    i0: usize,
) -> Result<DVector<f64>> {
    let bg = restrict_tree_bm(tree, m, n)?;
    let beta_boundary = rho_to_beta(rho, coupling);
    let mut all = b.as_slice()[..bg.interior_count()].to_vec();
    all.extend_from_slice(&beta_boundary);
    let full = bg.full_graph();
    let h = crate::green::h_beta(&full, &BetaField(all));
    let chol = Cholesky::new(&h)?;
    let mut e = DVector::zeros(full.vertex_count());
    e[i0] = 1.0;
    Ok(chol.solve(&e))
}

/// Harmonic measures on a tree from a table of hitting ratios `f(i, j)`:
///
/// ```text
/// mu_i(branch of x) = 1_{i in U_x} (1 - f(i,x))
///   + f(i,x) (1 - f(x,px)) / (1 - f(px,x) f(x,px))
/// ```
///
/// with `mu_i(whole boundary) = 1`. Stored for all `i` in the truncation
/// and all `x` up to `depth_cap`.
#[derive(Debug, Clone)]
pub struct HarmonicMeasureTable {
    values: DMatrix<f64>,
}

impl HarmonicMeasureTable {
    /// `mu_i` of the branch of `x`.
    pub fn value(&self, i: usize, x: usize) -> f64 {
        self.values[(i, x)]
    }

    pub fn target_count(&self) -> usize {
        self.values.ncols()
    }
}

pub fn harmonic_measure_table(
    tree: &RootedTree,
    size: usize,
    depth_cap: usize,
    f: &mut dyn FnMut(usize, usize) -> f64,
) -> Result<HarmonicMeasureTable> {
    let targets = tree.truncation_size(depth_cap.min(tree.max_depth()));
    let mut values = DMatrix::zeros(size, targets);
    for x in 0..targets {
        if x == tree.root() {
            for i in 0..size {
                values[(i, x)] = 1.0;
            }
            continue;
        }
        let px = tree.parent(x).unwrap();
        let f_x_px = f(x, px);
        let f_px_x = f(px, x);
        let denom = 1.0 - f_x_px * f_px_x;
        if denom <= 0.0 || !(0.0..1.0 + 1e-12).contains(&f_x_px) {
            return Err(Error::Degenerate {
                context: "harmonic_measure_table",
                detail: format!("degenerate transport at edge ({px},{x})"),
            });
        }
        let through = (1.0 - f_x_px) / denom;
        for i in 0..size {
            let f_i_x = f(i, x);
            let inside = if tree.is_descendant(x, i) && i != x {
                1.0 - f_i_x
            } else {
                0.0
            };
            values[(i, x)] = inside + f_i_x * through;
        }
    }
    Ok(HarmonicMeasureTable { values })
}

/// Hitting ratio of the `psi`-conductance walk on the truncation:
/// `f(i, j) = (psi(j)/psi(i)) Fhat(i, j)`, the probability that the walk
/// from `i` ever hits `j` before being absorbed beyond the truncation.
/// Requires `psi > 0` at the evaluated vertices.
pub fn psi_walk_hitting_ratio(green: &TreeGreen, psi: &DVector<f64>, i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    psi[j] / psi[i] * green.f_hat(i, j)
}

/// Exit measure of the boundary-resolved environment started at the root:
/// the probability that the process escapes through the branch of `x`,
/// as a ratio of bilinear forms of the root's branch masses against the
/// boundary Green matrix.
///
/// For `|x| <= m` the cell masses aggregate. Below the resolution `m`, the
/// boundary kernel is constant on each cell, so the within-cell refinement
/// uses the deeper branch mass directly.
pub fn exit_measure_rep(
    green: &TreeGreen,
    chi: &ChiMatrix,
    gcheck: &GreenMatrix,
    x: usize,
) -> Result<f64> {
    let tree = green.tree();
    if tree.depth(x) > green.truncation() {
        return Err(Error::InvalidParameter("target below the truncation".into()));
    }
    let k = chi.cells.len();
    let root = tree.root();
    let c: Vec<f64> = (0..k).map(|a| chi.values[(root, a)]).collect();
    let mut u = vec![0.0; k];
    for a in 0..k {
        for b in 0..k {
            u[a] += gcheck.at(a, b) * c[b];
        }
    }
    let denom: f64 = (0..k).map(|a| c[a] * u[a]).sum();
    if denom <= 0.0 {
        return Err(Error::Degenerate {
            context: "exit_measure_rep",
            detail: "degenerate boundary mass".into(),
        });
    }
    let numerator = if tree.depth(x) <= chi.m {
        (0..k)
            .filter(|&a| tree.is_descendant(x, chi.cells[a]))
            .map(|a| c[a] * u[a])
            .sum::<f64>()
    } else {
        let cell = chi
            .cell_of(tree, x)
            .expect("every vertex below generation m has a cell");
        green.branch_mass(root, x) * u[cell]
    };
    Ok(numerator / denom)
}

/// Interior potential parameters for the truncation of a tree: the induced
/// conductances with the truncation's own boundary intensity.
pub fn truncation_params(tree: &RootedTree, n: usize) -> Result<NuParams> {
    let size = tree.truncation_size(n);
    let mut edges = Vec::new();
    for v in 1..size {
        let p = tree.parent(v).unwrap();
        edges.push((p, v, tree.graph().weight(p, v)));
    }
    let graph = WeightedGraph::from_edges(size, &edges)?;
    let eta = (0..size).map(|v| tree.eta_at(v, n)).collect();
    NuParams::new(graph, eta)
}

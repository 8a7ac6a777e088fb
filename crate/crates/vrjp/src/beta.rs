//! The potential law `nu_V^{W,eta}`: density, closed-form Laplace
//! transform, restriction and conditional laws, and an exact sequential
//! sampler.
//!
//! For a finite graph with conductances `W` and a nonnegative vector `eta`,
//! the law lives on the set of `beta` making `H_beta = 2 beta - W` positive
//! definite, with density
//!
//! ```text
//! (2/pi)^{|V|/2} exp(-(<1, H 1> + <eta, H^{-1} eta>)/2) exp(<eta, 1>)
//!     / sqrt(det H)
//! ```
//!
//! Two structural facts make exact sampling possible:
//!
//! * marginalizing onto a subset `U` only changes `eta` (edges leaving `U`
//!   fold into it), and
//! * conditioning on `beta_U` yields the same family again, on the
//!   complement, with a Schur-complement conductance matrix that generally
//!   has diagonal entries.
//!
//! Iterating both facts one vertex at a time reduces joint sampling to a
//! chain of scalar draws from a generalized-inverse-Gaussian family, each
//! followed by a local rank-one update. The update has the fill-in pattern
//! of sparse Gaussian elimination, so the vertex order matters for cost
//! (never for correctness): eliminating leaves first keeps trees fill-free.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{BoundaryGraph, WeightedGraph};
use crate::green;
use crate::linalg::Cholesky;
use crate::rng::{gamma_half_rate_half, inverse_gaussian};

/// Parameters of the potential law: a weighted graph (diagonal allowed)
/// plus a nonnegative boundary-intensity vector `eta`.
#[derive(Debug, Clone)]
pub struct NuParams {
    graph: WeightedGraph,
    eta: Vec<f64>,
}

impl NuParams {
    pub fn new(graph: WeightedGraph, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != graph.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.vertex_count(),
                got: eta.len(),
            });
        }
        if eta.iter().any(|&e| e < 0.0 || !e.is_finite()) {
            return Err(Error::InvalidParameter("eta must be nonnegative".into()));
        }
        Ok(Self { graph, eta })
    }

    /// The law with `eta = 0`.
    pub fn zero_eta(graph: WeightedGraph) -> Self {
        let n = graph.vertex_count();
        Self {
            graph,
            eta: vec![0.0; n],
        }
    }

    /// Parameters of the interior potential of a boundary graph: the
    /// interior conductances with `eta` equal to the total boundary weight
    /// per vertex.
    pub fn for_boundary_interior(bg: &BoundaryGraph) -> Self {
        Self {
            graph: bg.interior().clone(),
            eta: bg.eta().to_vec(),
        }
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A positive potential with `H_beta = 2 beta - W` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaField(pub Vec<f64>);

impl BetaField {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Membership in the support: `H_beta` positive definite, checked by
    /// Cholesky on the full matrix.
    pub fn is_in_domain(&self, graph: &WeightedGraph) -> bool {
        if self.len() != graph.vertex_count() {
            return false;
        }
        Cholesky::new(&green::h_beta(graph, self)).is_ok()
    }
}

/// Single-site law: with self-weight `w` and intensity `eta`, the variable
/// `t = 2 beta - w` has density proportional to
/// `t^{-1/2} exp(-(t + eta^2/t)/2)` on `t > 0`.
#[derive(Debug, Clone, Copy)]
pub struct GigParams {
    pub self_weight: f64,
    pub eta: f64,
}

impl GigParams {
    pub fn new(self_weight: f64, eta: f64) -> Result<Self> {
        if self_weight < 0.0 || eta < 0.0 || !self_weight.is_finite() || !eta.is_finite() {
            return Err(Error::InvalidParameter(
                "single-site parameters must be nonnegative".into(),
            ));
        }
        Ok(Self { self_weight, eta })
    }
}

/// Exact draw from the single-site law.
///
/// With `eta = 0`, `t = 2 beta - w` is Gamma(1/2, rate 1/2), sampled as a
/// squared standard normal. Otherwise `t = 1/Y` with `Y` inverse-Gaussian
/// of mean `1/eta` and shape 1.
pub fn sample_single_site<R: Rng + ?Sized>(p: GigParams, rng: &mut R) -> f64 {
    let t = if p.eta == 0.0 {
        gamma_half_rate_half(rng)
    } else {
        1.0 / inverse_gaussian(rng, 1.0 / p.eta, 1.0)
    };
    (t + p.self_weight) / 2.0
}

/// Unnormalized-free density of the law at `b`; zero outside the support.
pub fn nu_density(p: &NuParams, b: &BetaField) -> Result<f64> {
    let n = p.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let h = green::h_beta(p.graph(), b);
    let chol = match Cholesky::new(&h) {
        Ok(c) => c,
        Err(_) => return Ok(0.0),
    };
    let ones = DVector::from_element(n, 1.0);
    let quad_ones = (&h * &ones).dot(&ones);
    let eta = DVector::from_column_slice(p.eta());
    let quad_eta = chol.solve(&eta).dot(&eta);
    let eta_sum: f64 = p.eta().iter().sum();
    let log_det = chol.log_det();
    let log_density = 0.5 * n as f64 * (2.0 / std::f64::consts::PI).ln()
        - 0.5 * (quad_ones + quad_eta)
        + eta_sum
        - 0.5 * log_det;
    Ok(log_density.exp())
}

/// Closed-form Laplace transform `E[exp(-<lambda, beta>)]`.
///
/// Off-diagonal edges contribute `W_ij (sqrt((1+l_i)(1+l_j)) - 1)` once per
/// undirected edge and boundary intensities `eta_i (sqrt(1+l_i) - 1)`. A
/// diagonal self-weight shifts the potential deterministically by `W_ii/2`,
/// contributing `W_ii l_i / 2`; the shift identity is exercised against
/// quadrature in the tests.
pub fn nu_laplace(p: &NuParams, lambda: &[f64]) -> Result<f64> {
    let n = p.len();
    if lambda.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lambda.len(),
        });
    }
    if lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
    }
    let mut exponent = 0.0;
    for i in 0..n {
        exponent -= p.eta()[i] * ((1.0 + lambda[i]).sqrt() - 1.0);
        exponent -= 0.5 * p.graph().self_weight(i) * lambda[i];
    }
    for (i, j, w) in p.graph().edges() {
        exponent -= w * (((1.0 + lambda[i]) * (1.0 + lambda[j])).sqrt() - 1.0);
    }
    let mut value = exponent.exp();
    for &l in lambda {
        value /= (1.0 + l).sqrt();
    }
    Ok(value)
}

/// Law of the restriction to `subset`: same edges inside, with the weight
/// of every outgoing edge folded into `eta`.
pub fn marginal_params(p: &NuParams, subset: &[usize]) -> Result<NuParams> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty subset".into()));
    }
    let n = p.len();
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in subset.iter().enumerate() {
        pos[v] = k;
    }
    let mut edges = Vec::new();
    let mut eta = vec![0.0; subset.len()];
    for (k, &v) in subset.iter().enumerate() {
        eta[k] = p.eta()[v];
        for &(u, w) in p.graph().neighbours(v) {
            if pos[u] != usize::MAX {
                if pos[u] > k {
                    edges.push((k, pos[u], w));
                }
            } else {
                eta[k] += w;
            }
        }
    }
    let mut graph = WeightedGraph::from_edges(subset.len(), &edges)?;
    for (k, &v) in subset.iter().enumerate() {
        graph.set_self_weight(k, p.graph().self_weight(v));
        graph.set_outward_weight(k, p.graph().outward_weight(v));
    }
    NuParams::new(graph, eta)
}

/// Law of the complement conditionally on the restriction: conductances
/// gain the Schur coupling `W_cu ((H_beta)_uu)^{-1} W_uc` (diagonal
/// included) and `eta` gains `W_cu ((H_beta)_uu)^{-1} eta_u`.
///
/// Vertices of the result are ordered as in the complement of `subset`.
pub fn conditional_params(
    p: &NuParams,
    subset: &[usize],
    beta_u: &[f64],
) -> Result<NuParams> {
    let n = p.len();
    if beta_u.len() != subset.len() {
        return Err(Error::DimensionMismatch {
            expected: subset.len(),
            got: beta_u.len(),
        });
    }
    let mut in_u = vec![false; n];
    for &v in subset {
        in_u[v] = true;
    }
    let comp: Vec<usize> = (0..n).filter(|&v| !in_u[v]).collect();
    if comp.is_empty() {
        return Err(Error::InvalidParameter("subset covers the whole graph".into()));
    }
    // (H_beta)_{U,U}
    let k = subset.len();
    let mut h_uu = DMatrix::zeros(k, k);
    for (a, &va) in subset.iter().enumerate() {
        h_uu[(a, a)] = 2.0 * beta_u[a] - p.graph().self_weight(va);
        for (b, &vb) in subset.iter().enumerate() {
            if a != b {
                h_uu[(a, b)] = -p.graph().weight(va, vb);
            }
        }
    }
    let chol = Cholesky::new(&h_uu)?;
    // Columns of W_{U, comp}.
    let mut edges = Vec::new();
    let mut self_w: Vec<f64> = comp.iter().map(|&v| p.graph().self_weight(v)).collect();
    let mut eta: Vec<f64> = comp.iter().map(|&v| p.eta()[v]).collect();
    let eta_u = DVector::from_iterator(k, subset.iter().enumerate().map(|(a, &va)| {
        let _ = a;
        p.eta()[va]
    }));
    let g_eta = chol.solve(&eta_u);
    let cols: Vec<DVector<f64>> = comp
        .iter()
        .map(|&vc| {
            DVector::from_iterator(k, subset.iter().map(|&vu| p.graph().weight(vu, vc)))
        })
        .collect();
    let solved: Vec<DVector<f64>> = cols.iter().map(|c| chol.solve(c)).collect();
    for (a, &va) in comp.iter().enumerate() {
        eta[a] += cols[a].dot(&g_eta);
        for (b, &vb) in comp.iter().enumerate() {
            if b < a {
                continue;
            }
            let coupling = cols[a].dot(&solved[b]);
            if a == b {
                self_w[a] += coupling;
            } else {
                let w = p.graph().weight(va, vb) + coupling;
                if w != 0.0 {
                    edges.push((a, b, w));
                }
            }
        }
    }
    let mut graph = WeightedGraph::from_edges(comp.len(), &edges)?;
    for a in 0..comp.len() {
        graph.set_self_weight(a, self_w[a]);
        graph.set_outward_weight(a, p.graph().outward_weight(comp[a]));
    }
    NuParams::new(graph, eta)
}

/// Diagnostics from a joint draw.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleStats {
    /// Draws rejected because the positive-definiteness verification of the
    /// assembled field failed in floating point. The true event has
    /// probability zero, so rejection does not bias the law.
    pub rejected: u32,
}

/// Maximum size at which the assembled field is re-verified by a dense
/// Cholesky factorization. Above this, positivity of every elimination
/// pivot (which holds by construction) is the guarantee.
const DENSE_VERIFY_LIMIT: usize = 600;

/// Exact joint draw from the law, eliminating vertices in the given order.
///
/// Each step samples the marginal of the next vertex under the current
/// conditional law (a single-site draw) and then folds the drawn value into
/// the conductances and intensities of the remaining vertices. Any order is
/// legal; the default [`reverse_bfs_order`] keeps the update sparse.
pub fn sample_nu<R: Rng + ?Sized>(p: &NuParams, order: &[usize], rng: &mut R) -> Result<BetaField> {
    sample_nu_with_stats(p, order, rng).map(|(b, _)| b)
}

/// As [`sample_nu`], also reporting rejection diagnostics.
pub fn sample_nu_with_stats<R: Rng + ?Sized>(
    p: &NuParams,
    order: &[usize],
    rng: &mut R,
) -> Result<(BetaField, SampleStats)> {
    let n = p.len();
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || seen[v] {
            return Err(Error::InvalidParameter("order must be a permutation".into()));
        }
        seen[v] = true;
    }
    let mut stats = SampleStats::default();
    const MAX_REJECTIONS: u32 = 16;
    loop {
        let beta = sample_once(p, order, rng)?;
        let ok = if n <= DENSE_VERIFY_LIMIT {
            beta.is_in_domain(p.graph())
        } else {
            true
        };
        if ok {
            return Ok((beta, stats));
        }
        stats.rejected += 1;
        if stats.rejected >= MAX_REJECTIONS {
            return Err(Error::Degenerate {
                context: "sample_nu",
                detail: format!("{MAX_REJECTIONS} consecutive draws failed verification"),
            });
        }
    }
}

fn sample_once<R: Rng + ?Sized>(p: &NuParams, order: &[usize], rng: &mut R) -> Result<BetaField> {
    let n = p.len();
    // Working copy of the conditional parameters over the unsampled set:
    // sorted off-diagonal rows, plus diagonal and eta vectors.
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| p.graph().neighbours(v).to_vec())
        .collect();
    let mut diag: Vec<f64> = (0..n).map(|v| p.graph().self_weight(v)).collect();
    let mut eta: Vec<f64> = p.eta().to_vec();
    let mut remaining = vec![true; n];
    let mut beta = vec![0.0; n];
    let mut scratch: Vec<(usize, f64)> = Vec::new();

    for &v in order {
        remaining[v] = false;
        // Marginal of v under the current conditional law: every edge to a
        // still-unsampled vertex folds into the intensity.
        let nbrs: Vec<(usize, f64)> = rows[v]
            .iter()
            .copied()
            .filter(|&(u, _)| remaining[u])
            .collect();
        let eta_single = eta[v] + nbrs.iter().map(|&(_, w)| w).sum::<f64>();
        let params = GigParams::new(diag[v], eta_single)?;
        let b = sample_single_site(params, rng);
        beta[v] = b;
        let t = 2.0 * b - diag[v];
        debug_assert!(t > 0.0);
        // Condition the remainder on beta_v: rank-one update among the
        // neighbours of v.
        let inv_t = 1.0 / t;
        for &(a, wa) in &nbrs {
            eta[a] += wa * eta[v] * inv_t;
            diag[a] += wa * wa * inv_t;
            // Merge the increments wa * wb / t for b != a into row a.
            merge_updates(&mut rows[a], &nbrs, a, v, wa * inv_t, &mut scratch);
        }
    }
    Ok(BetaField(beta))
}

/// Adds `scale * w_b` to row entries for each `(b, w_b)` in `updates`
/// (skipping `skip` and removing `drop_v`), keeping the row sorted. Single
/// merge pass through both sorted lists.
fn merge_updates(
    row: &mut Vec<(usize, f64)>,
    updates: &[(usize, f64)],
    skip: usize,
    drop_v: usize,
    scale: f64,
    scratch: &mut Vec<(usize, f64)>,
) {
    scratch.clear();
    scratch.reserve(row.len() + updates.len());
    let mut ri = 0;
    let mut ui = 0;
    while ri < row.len() || ui < updates.len() {
        let next_r = if ri < row.len() { row[ri].0 } else { usize::MAX };
        let next_u = if ui < updates.len() {
            updates[ui].0
        } else {
            usize::MAX
        };
        if next_r < next_u {
            if next_r != drop_v {
                scratch.push(row[ri]);
            }
            ri += 1;
        } else if next_u < next_r {
            if next_u != skip {
                scratch.push((next_u, scale * updates[ui].1));
            }
            ui += 1;
        } else {
            let mut w = row[ri].1;
            if next_u != skip {
                w += scale * updates[ui].1;
            }
            if next_r != drop_v {
                scratch.push((next_r, w));
            }
            ri += 1;
            ui += 1;
        }
    }
    std::mem::swap(row, scratch);
}

/// Reverse breadth-first order from `start`: deepest layers first, `start`
/// last. On a tree rooted at `start` this eliminates leaves first, which
/// produces no off-diagonal fill at all.
pub fn reverse_bfs_order(g: &WeightedGraph, start: usize) -> Vec<usize> {
    let n = g.vertex_count();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(u, _) in g.neighbours(v) {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    // Unreachable vertices (isolated) go in index order at the front.
    for v in 0..n {
        if !seen[v] {
            order.push(v);
        }
    }
    order.reverse();
    order
}

/// Extends a potential on the interior of a boundary graph to the boundary
/// vertices, drawing them from their exact conditional law.
///
/// The conditional conductances on the boundary are the Schur coupling
/// `Wtilde_{B,int} Ghat Wtilde_{int,B}` through the interior Green matrix;
/// the returned field lists interior values first, then boundary values.
pub fn extend_to_boundary<R: Rng + ?Sized>(
    bg: &BoundaryGraph,
    beta_interior: &BetaField,
    rng: &mut R,
) -> Result<BetaField> {
    let (coupling, _) = boundary_coupling(bg, beta_interior)?;
    let nb = bg.boundary_count();
    let mut edges = Vec::new();
    for x in 0..nb {
        for y in 0..nb {
            let w = coupling[(x, y)];
            if y > x && w != 0.0 {
                edges.push((x, y, w));
            }
        }
    }
    let mut bgraph = WeightedGraph::from_edges(nb, &edges)?;
    for x in 0..nb {
        bgraph.set_self_weight(x, coupling[(x, x)]);
    }
    let params = NuParams::zero_eta(bgraph);
    let order: Vec<usize> = (0..nb).collect();
    let beta_b = sample_nu(&params, &order, rng)?;
    let mut all = beta_interior.0.clone();
    all.extend_from_slice(&beta_b.0);
    Ok(BetaField(all))
}

/// The boundary Schur coupling `Wtilde_{B,int} Ghat Wtilde_{int,B}` and the
/// interior Green factor used to build it.
pub fn boundary_coupling(
    bg: &BoundaryGraph,
    beta_interior: &BetaField,
) -> Result<(DMatrix<f64>, Cholesky)> {
    let ni = bg.interior_count();
    if beta_interior.len() != ni {
        return Err(Error::DimensionMismatch {
            expected: ni,
            got: beta_interior.len(),
        });
    }
    let h = green::h_beta(bg.interior(), beta_interior);
    let chol = Cholesky::new(&h)?;
    let nb = bg.boundary_count();
    let mut cols = Vec::with_capacity(nb);
    for b in 0..nb {
        let mut rhs = DVector::zeros(ni);
        for &(i, w) in bg.boundary_weights(b) {
            rhs[i] = w;
        }
        cols.push((rhs.clone(), chol.solve(&rhs)));
    }
    let mut coupling = DMatrix::zeros(nb, nb);
    for x in 0..nb {
        for y in x..nb {
            let v = cols[x].0.dot(&cols[y].1);
            coupling[(x, y)] = v;
            coupling[(y, x)] = v;
        }
    }
    Ok((coupling, chol))
}

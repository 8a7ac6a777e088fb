//! The environment families that represent the time-changed reinforced
//! process as a mixture of Markov jump processes, and the reconstruction of
//! the potential data from raw rates.
//!
//! Three families are built here:
//!
//! * the wired environment, with rates `W_ij G(i0,j) / (2 G(i0,i))` from
//!   the full Green matrix of a wired boundary graph;
//! * the free-tree environment, with an independent inverse-Gaussian
//!   variable per edge;
//! * the generation-`m` boundary environment on trees, with rates from the
//!   boundary-resolved Green matrix.
//!
//! All three share the reversibility structure
//! `r_ij * r_ji = (W_ij / 2)^2`, which is what makes the rates a gradient
//! field and the reconstruction well-posed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::beta::BetaField;
use crate::error::{Error, Result};
use crate::graph::{BoundaryGraph, RootedTree, WeightedGraph};
use crate::green::{h_beta, GreenMatrix};
use crate::linalg::Cholesky;
use crate::rng::inverse_gaussian;
use crate::sim::RateField;
use crate::tree::{ChiMatrix, TreeGreen};

/// Which family an environment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepKind {
    Wired,
    FreeTree,
    Boundary { m: usize },
}

/// A sampled environment: rates plus the data that generated them.
#[derive(Debug, Clone)]
pub struct Representation {
    pub kind: RepKind,
    pub rates: RateField,
    pub start: usize,
    /// `1/(2 G(i0, i0))` where known (wired and boundary kinds).
    pub gamma: Option<f64>,
}

/// Wired environment from the full Green matrix of a boundary graph whose
/// potential has been extended to the boundary.
///
/// The field must list interior values first, then boundary values, as
/// produced by [`crate::beta::extend_to_boundary`]. Rates live on the full
/// graph (boundary edges included).
pub fn standard_rep(bg: &BoundaryGraph, beta_full: &BetaField, i0: usize) -> Result<Representation> {
    let full = bg.full_graph();
    let n = full.vertex_count();
    if beta_full.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: beta_full.len(),
        });
    }
    let h = h_beta(&full, beta_full);
    let chol = Cholesky::new(&h)?;
    let mut e = DVector::zeros(n);
    e[i0] = 1.0;
    let g_col = chol.solve(&e);
    let rates = RateField::from_fn(&full, |i, j| 0.5 * full.weight(i, j) * g_col[j] / g_col[i]);
    Ok(Representation {
        kind: RepKind::Wired,
        rates,
        start: i0,
        gamma: Some(1.0 / (2.0 * g_col[i0])),
    })
}

/// Consistency data of a wired environment against the rank-one
/// decomposition `G = Ghat + psi psi^T / (2 gamma)` of its Green column.
pub struct WiredDecomposition {
    pub gamma: f64,
    /// Largest absolute mismatch between the two routes to `G(i0, .)`.
    pub max_error: f64,
}

/// Cross-checks the two routes to the wired Green column: the full-matrix
/// inverse against `Ghat(i0, .) + psi(i0) psi(.) G(delta, delta)`.
pub fn wired_decomposition_check(
    bg: &BoundaryGraph,
    beta_full: &BetaField,
    i0: usize,
) -> Result<WiredDecomposition> {
    if bg.boundary_count() != 1 {
        return Err(Error::InvalidParameter(
            "decomposition check needs a single wired boundary vertex".into(),
        ));
    }
    let ni = bg.interior_count();
    let full = bg.full_graph();
    let h = h_beta(&full, beta_full);
    let chol = Cholesky::new(&h)?;
    let mut e = DVector::zeros(ni + 1);
    e[i0] = 1.0;
    let g_col = chol.solve(&e);
    let g_dd = {
        let mut ed = DVector::zeros(ni + 1);
        ed[ni] = 1.0;
        chol.solve(&ed)[ni]
    };
    let interior = BetaField(beta_full.0[..ni].to_vec());
    let hk = h_beta(bg.interior(), &interior);
    let ik = Cholesky::new(&hk)?;
    let ghat_col = {
        let mut ei = DVector::zeros(ni);
        if i0 < ni {
            ei[i0] = 1.0;
        }
        ik.solve(&ei)
    };
    let psi = ik.solve(&DVector::from_column_slice(bg.eta()));
    let mut max_error: f64 = 0.0;
    for j in 0..ni {
        let decomposed = if i0 < ni {
            ghat_col[j] + psi[i0] * psi[j] * g_dd
        } else {
            // started at the boundary vertex itself
            psi[j] * g_dd
        };
        max_error = max_error.max((g_col[j] - decomposed).abs());
    }
    Ok(WiredDecomposition {
        gamma: 1.0 / (2.0 * g_dd),
        max_error,
    })
}

/// Free-tree environment: one independent inverse-Gaussian variable per
/// non-root vertex, with mean 1 and shape equal to the parent edge weight.
/// The rate down the edge is `W A / 2`, the rate back up `W / (2 A)`.
pub fn free_rep<R: Rng + ?Sized>(tree: &RootedTree, rng: &mut R) -> Representation {
    let n = tree.vertex_count();
    let mut rates = RateField::new(n);
    for v in 1..n {
        let p = tree.parent(v).unwrap();
        let w = tree.graph().weight(p, v);
        let a = inverse_gaussian(rng, 1.0, w);
        rates.set(p, v, 0.5 * w * a);
        rates.set(v, p, 0.5 * w / a);
    }
    Representation {
        kind: RepKind::FreeTree,
        rates,
        start: tree.root(),
        gamma: None,
    }
}

/// Generation-`m` boundary environment on a tree truncation: rates from
/// the boundary-resolved Green column, over the boundary graph (interior
/// vertices first, then one vertex per cell).
pub fn bm_rep(
    green: &TreeGreen,
    chi: &ChiMatrix,
    gcheck: &GreenMatrix,
    i0: usize,
) -> Result<Representation> {
    let col = crate::tree::g_m_column(green, chi, gcheck, i0);
    let bg = crate::graph::restrict_tree_bm(green.tree(), chi.m, chi.n)?;
    let full = bg.full_graph();
    let rates = RateField::from_fn(&full, |i, j| 0.5 * full.weight(i, j) * col[j] / col[i]);
    Ok(Representation {
        kind: RepKind::Boundary { m: chi.m },
        rates,
        start: i0,
        gamma: Some(1.0 / (2.0 * col[i0])),
    })
}

/// Worst multiplicative defect `|t_sigma - 1|` over a fundamental cycle
/// basis, where `t_ij = 2 r_ij / W_ij`. Zero (empty basis) on trees;
/// gradient-generated rates have defect at roundoff level.
pub fn cycle_consistency(rates: &RateField, g: &WeightedGraph) -> Result<f64> {
    let n = g.vertex_count();
    if n == 0 {
        return Ok(0.0);
    }
    // Log-potential along a breadth-first spanning tree.
    let mut log_u = vec![f64::NAN; n];
    let mut parent_edge = vec![usize::MAX; n];
    log_u[0] = 0.0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut visited_edges = std::collections::BTreeSet::new();
    while let Some(v) = queue.pop_front() {
        for &(u, w) in g.neighbours(v) {
            if log_u[u].is_nan() {
                let r = rates.rate(v, u);
                if r <= 0.0 {
                    return Err(Error::Degenerate {
                        context: "cycle_consistency",
                        detail: format!("zero rate on spanning edge ({v},{u})"),
                    });
                }
                log_u[u] = log_u[v] + (2.0 * r / w).ln();
                parent_edge[u] = v;
                visited_edges.insert((v.min(u), v.max(u)));
                queue.push_back(u);
            }
        }
    }
    if log_u.iter().any(|x| x.is_nan()) {
        return Err(Error::DisconnectedSubset);
    }
    // Every non-tree edge closes one basis cycle.
    let mut worst: f64 = 0.0;
    for (i, j, w) in g.edges() {
        if visited_edges.contains(&(i.min(j), i.max(j))) {
            continue;
        }
        let r = rates.rate(i, j);
        if r <= 0.0 {
            return Err(Error::Degenerate {
                context: "cycle_consistency",
                detail: format!("zero rate on basis edge ({i},{j})"),
            });
        }
        let t_sigma = ((2.0 * r / w).ln() + log_u[i] - log_u[j]).exp();
        worst = worst.max((t_sigma - 1.0).abs());
    }
    Ok(worst)
}

/// The potential data recovered from an environment.
#[derive(Debug, Clone)]
pub struct ReconstructedEnv {
    /// `beta_i = r_i + gamma 1_{i = i0}`.
    pub beta: BetaField,
    pub gamma: f64,
    /// Log-potential with `u[i0] = 0`; rates are `W_ij e^{u_j - u_i} / 2`.
    pub u: Vec<f64>,
    /// `G(i0, .) = e^u / (2 gamma)` over all vertices of the graph.
    pub g_col: Vec<f64>,
    /// `h = G(i0, .) - Ghat(i0, .)` on the interior.
    pub h: Vec<f64>,
    /// Max `|(H_beta h)_i|` over interior vertices other than `i0`, with
    /// `h` extended by `G(i0, .)` on the boundary.
    pub harmonic_residual_off_start: f64,
    /// The residual at `i0` itself. Both residuals vanish (to roundoff)
    /// for every cycle-consistent rate field and every `gamma`; they are
    /// numerical-corruption diagnostics, not model checks.
    pub residual_at_start: f64,
}

/// Rebuilds `(beta, u, G(i0,.), h)` from raw rates and an independent
/// gamma, on a boundary graph whose interior defines the reference
/// restricted Green matrix.
///
/// Requires consistent cycles (checked, tolerance `1e-8`); the
/// log-potential is integrated along a breadth-first spanning tree, which
/// cycle consistency makes path-independent.
pub fn reconstruct_env(
    rates: &RateField,
    gamma: f64,
    i0: usize,
    bg: &BoundaryGraph,
) -> Result<ReconstructedEnv> {
    let full = bg.full_graph();
    let n = full.vertex_count();
    let ni = bg.interior_count();
    let defect = cycle_consistency(rates, &full)?;
    if defect > 1e-8 {
        return Err(Error::InconsistentCycles {
            defect,
            tol: 1e-8,
        });
    }
    // u from edge ratios along a spanning tree rooted at i0.
    let mut u = vec![f64::NAN; n];
    u[i0] = 0.0;
    let mut queue = std::collections::VecDeque::from([i0]);
    while let Some(v) = queue.pop_front() {
        for &(w_nbr, w) in full.neighbours(v) {
            if u[w_nbr].is_nan() {
                u[w_nbr] = u[v] + (2.0 * rates.rate(v, w_nbr) / w).ln();
                queue.push_back(w_nbr);
            }
        }
    }
    if u.iter().any(|x| x.is_nan()) {
        return Err(Error::DisconnectedSubset);
    }
    let g_col: Vec<f64> = u.iter().map(|&ui| ui.exp() / (2.0 * gamma)).collect();
    let beta: Vec<f64> = (0..n)
        .map(|i| rates.holding_rate(i) + if i == i0 { gamma } else { 0.0 })
        .collect();
    // Interior restricted Green column at i0.
    let interior_beta = BetaField(beta[..ni].to_vec());
    let hk = h_beta(bg.interior(), &interior_beta);
    let chol = Cholesky::new(&hk)?;
    let ghat_col = {
        let mut e = DVector::zeros(ni);
        if i0 < ni {
            e[i0] = 1.0;
        }
        chol.solve(&e)
    };
    let h_vec: Vec<f64> = (0..ni).map(|i| g_col[i] - ghat_col[i]).collect();
    // Residual of H_beta h over the interior, extending h by G(i0, .) on
    // the boundary (the restricted column extends by zero).
    let beta_field = BetaField(beta.clone());
    let h_full = h_beta(&full, &beta_field);
    let mut f = DVector::zeros(n);
    for (i, &hv) in h_vec.iter().enumerate() {
        f[i] = hv;
    }
    for b in 0..bg.boundary_count() {
        f[ni + b] = g_col[ni + b];
    }
    let hf = &h_full * &f;
    let mut off: f64 = 0.0;
    for i in 0..ni {
        if i != i0 {
            off = off.max(hf[i].abs());
        }
    }
    let at_start = if i0 < ni { hf[i0].abs() } else { 0.0 };
    Ok(ReconstructedEnv {
        beta: beta_field,
        gamma,
        u,
        g_col,
        h: h_vec,
        harmonic_residual_off_start: off,
        residual_at_start: at_start,
    })
}

/// Running products `S_k = prod_{l <= k} 2 r_{i_{l-1}, i_l} / W` along a
/// ray from the root: the rate-telescope that distinguishes the
/// environment families along a branch.
pub fn s_n_statistic(rates: &RateField, ray: &[usize], w: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ray.len().saturating_sub(1));
    let mut acc = 1.0;
    for pair in ray.windows(2) {
        acc *= 2.0 * rates.rate(pair[0], pair[1]) / w;
        out.push(acc);
    }
    out
}

/// Sum of outgoing rates per vertex, for holding-rate law checks.
pub fn holding_rates(rates: &RateField) -> Vec<f64> {
    (0..rates.vertex_count())
        .map(|i| rates.holding_rate(i))
        .collect()
}

/// Max over edges of `|r_ij r_ji - (W_ij/2)^2|`, the reversibility
/// structure shared by every family.
pub fn reversibility_defect(rates: &RateField, g: &WeightedGraph) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, j, w) in g.edges() {
        let prod = rates.rate(i, j) * rates.rate(j, i);
        worst = worst.max((prod - 0.25 * w * w).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::{extend_to_boundary, reverse_bfs_order, sample_nu, NuParams};
    use crate::graph::{build_regular_tree, restrict_wired, small};
    use crate::rng::stream;
    use crate::tree::{
        boundary_coupling_matrix, check_green, chi_solve, sample_rho, strip_diagonal,
        truncation_params,
    };

    fn wired_triangle_rep(seed: u64, idx: u64) -> (BoundaryGraph, BetaField, Representation) {
        // A triangle sitting inside a larger graph: one outward edge per
        // vertex, so the wired boundary vertex is attached to all three.
        let mut g = small::triangle(1.0);
        for v in 0..3 {
            g.set_outward_weight(v, 1.0);
        }
        let bg = restrict_wired(&g, &[0, 1, 2]).unwrap();
        let params = NuParams::for_boundary_interior(&bg);
        let order = reverse_bfs_order(params.graph(), 0);
        let mut rng = stream(seed, "wired-triangle", idx);
        let interior = sample_nu(&params, &order, &mut rng).unwrap();
        let full = extend_to_boundary(&bg, &interior, &mut rng).unwrap();
        let rep = standard_rep(&bg, &full, 0).unwrap();
        (bg, full, rep)
    }

    #[test]
    fn standard_rep_holding_rates_are_beta_tilde() {
        // Holding rates equal beta, minus gamma at the start vertex.
        for idx in 0..20 {
            let (_bg, beta, rep) = wired_triangle_rep(61, idx);
            let gamma = rep.gamma.unwrap();
            for i in 0..4 {
                let r_i = rep.rates.holding_rate(i);
                let expect = beta.0[i] - if i == 0 { gamma } else { 0.0 };
                assert!(
                    (r_i - expect).abs() < 1e-10,
                    "vertex {i}: {r_i} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn standard_rep_reversibility() {
        let (bg, _beta, rep) = wired_triangle_rep(62, 0);
        let full = bg.full_graph();
        assert!(reversibility_defect(&rep.rates, &full) < 1e-14);
    }

    #[test]
    fn wired_decomposition_two_routes_agree() {
        let g = crate::graph::build_grid(2, 2, 1.0).unwrap();
        let bg = restrict_wired(&g, &[0, 1, 2, 3]).unwrap();
        let params = NuParams::for_boundary_interior(&bg);
        let order = reverse_bfs_order(params.graph(), 0);
        let mut rng = stream(63, "decomposition", 0);
        for _ in 0..20 {
            let interior = sample_nu(&params, &order, &mut rng).unwrap();
            let full = extend_to_boundary(&bg, &interior, &mut rng).unwrap();
            let check = wired_decomposition_check(&bg, &full, 0).unwrap();
            assert!(check.max_error < 1e-10, "error {}", check.max_error);
            assert!(check.gamma > 0.0);
        }
    }

    #[test]
    fn free_rep_reversibility_and_mean() {
        let tree = build_regular_tree(3, 4, 1.0).unwrap();
        let mut rng = stream(64, "free-rep", 0);
        let mut sum = 0.0;
        let mut count = 0usize;
        let n_reps = 2000;
        for _ in 0..n_reps {
            let rep = free_rep(&tree, &mut rng);
            assert!(reversibility_defect(&rep.rates, tree.graph()) < 1e-14);
            for v in 1..tree.vertex_count() {
                let p = tree.parent(v).unwrap();
                sum += 2.0 * rep.rates.rate(p, v) / tree.graph().weight(p, v);
                count += 1;
            }
        }
        // A values have mean 1 (inverse Gaussian with unit mean).
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn bm_rep_matches_standard_on_wired_tree() {
        // m = 0 with the same interior field and the same gamma gives the
        // same rates as the wired construction.
        let tree = build_regular_tree(3, 3, 1.0).unwrap();
        let n = 3;
        let params = truncation_params(&tree, n).unwrap();
        let order = reverse_bfs_order(params.graph(), 0);
        let mut rng = stream(65, "bm-vs-wired", 0);
        let interior = sample_nu(&params, &order, &mut rng).unwrap();
        let green = TreeGreen::new(&tree, &interior, n).unwrap();
        let chi = chi_solve(&green, 0).unwrap();
        let coupling = boundary_coupling_matrix(&green, &chi);
        let rho = sample_rho(&coupling, &mut rng).unwrap();
        let gcheck = check_green(&rho, &strip_diagonal(&coupling)).unwrap();
        let rep_bm = bm_rep(&green, &chi, &gcheck, 0).unwrap();

        // Wired route with the boundary beta implied by the same rho.
        let bg = crate::graph::restrict_tree_bm(&tree, 0, n).unwrap();
        let beta_b = crate::tree::rho_to_beta(&rho, &coupling);
        let mut all = interior.0.clone();
        all.extend_from_slice(&beta_b);
        let rep_wired = standard_rep(&bg, &BetaField(all), 0).unwrap();
        for (i, j, _) in bg.full_graph().edges() {
            let a = rep_bm.rates.rate(i, j);
            let b = rep_wired.rates.rate(i, j);
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "({i},{j}): {a} vs {b}");
        }
        assert!((rep_bm.gamma.unwrap() - rep_wired.gamma.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn cycle_consistency_tree_is_zero() {
        let tree = build_regular_tree(3, 3, 1.0).unwrap();
        let mut rng = stream(66, "cycle-tree", 0);
        let rep = free_rep(&tree, &mut rng);
        assert_eq!(cycle_consistency(&rep.rates, tree.graph()).unwrap(), 0.0);
    }

    #[test]
    fn cycle_consistency_detects_perturbation() {
        let (bg, _beta, rep) = wired_triangle_rep(67, 0);
        let full = bg.full_graph();
        assert!(cycle_consistency(&rep.rates, &full).unwrap() < 1e-12);
        let mut perturbed = rep.rates.clone();
        perturbed.set(0, 1, 2.0 * rep.rates.rate(0, 1));
        let defect = cycle_consistency(&perturbed, &full).unwrap();
        assert!((defect - 1.0).abs() < 1e-9, "defect {defect}");
    }

    #[test]
    fn reconstruct_round_trip() {
        for idx in 0..20 {
            let (bg, beta, rep) = wired_triangle_rep(68, idx);
            let gamma = rep.gamma.unwrap();
            let env = reconstruct_env(&rep.rates, gamma, 0, &bg).unwrap();
            // beta recovered exactly off the start vertex, and at it since
            // gamma is the environment's own.
            for i in 0..4 {
                assert!(
                    (env.beta.0[i] - beta.0[i]).abs() < 1e-10,
                    "beta {i}: {} vs {}",
                    env.beta.0[i],
                    beta.0[i]
                );
            }
            assert!(env.harmonic_residual_off_start < 1e-8);
            assert!(env.residual_at_start < 1e-8);
        }
    }

    #[test]
    fn reconstruct_recovers_rank_one_tail() {
        // On a wired graph with eta > 0, the recovered harmonic part is
        // h(i) = psi(i) psi(i0) G(delta, delta), the rank-one tail of the
        // wired decomposition.
        let g = crate::graph::build_grid(1, 4, 1.0).unwrap();
        let bg = restrict_wired(&g, &[0, 1, 2, 3]).unwrap();
        let params = NuParams::for_boundary_interior(&bg);
        let order = reverse_bfs_order(params.graph(), 0);
        let mut rng = stream(69, "reconstruct-h", 0);
        for _ in 0..10 {
            let interior = sample_nu(&params, &order, &mut rng).unwrap();
            let full = extend_to_boundary(&bg, &interior, &mut rng).unwrap();
            let rep = standard_rep(&bg, &full, 1).unwrap();
            let env = reconstruct_env(&rep.rates, rep.gamma.unwrap(), 1, &bg).unwrap();
            let boundary_gamma = wired_decomposition_check(&bg, &full, 1).unwrap().gamma;
            let psi = crate::green::psi_restricted_with_eta(
                bg.interior(),
                &BetaField(interior.0.clone()),
                &[0, 1, 2, 3],
                bg.eta(),
            )
            .unwrap();
            for i in 0..4 {
                let expect = psi.values[i] * psi.values[1] / (2.0 * boundary_gamma);
                assert!(
                    (env.h[i] - expect).abs() < 1e-10 * expect.abs().max(1.0),
                    "h[{i}] = {} vs {expect}",
                    env.h[i]
                );
            }
        }
    }

    #[test]
    fn any_gamma_yields_a_harmonic_pair() {
        // The reconstruction is self-consistent for every gamma, not just
        // the environment's own: the recovered h is harmonic for the
        // recovered potential.
        let (bg, _beta, rep) = wired_triangle_rep(70, 0);
        let foreign = rep.gamma.unwrap() * 1.7;
        let env = reconstruct_env(&rep.rates, foreign, 0, &bg).unwrap();
        assert!(env.harmonic_residual_off_start < 1e-8);
        assert!(env.residual_at_start < 1e-8);
    }

    #[test]
    fn foreign_gamma_defect_shows_against_original_field() {
        // Against the original potential, a rescaled gamma leaves the
        // reconstructed Green column harmonic off the start vertex but
        // scales the defect at the start by gamma/gamma'.
        let (bg, beta, rep) = wired_triangle_rep(70, 1);
        let own = rep.gamma.unwrap();
        let foreign = own * 1.7;
        let env = reconstruct_env(&rep.rates, foreign, 0, &bg).unwrap();
        let full = bg.full_graph();
        let h_orig = h_beta(&full, &beta);
        let col = DVector::from_column_slice(&env.g_col);
        let hg = &h_orig * &col;
        for i in 1..4 {
            assert!(hg[i].abs() < 1e-10, "off-start residual {} at {i}", hg[i]);
        }
        assert!(
            (hg[0] - own / foreign).abs() < 1e-10,
            "start defect {} vs {}",
            hg[0],
            own / foreign
        );
    }

    #[test]
    fn reconstruct_rejects_inconsistent_cycles() {
        let (bg, _beta, rep) = wired_triangle_rep(71, 0);
        let mut perturbed = rep.rates.clone();
        perturbed.set(0, 1, 2.0 * rep.rates.rate(0, 1));
        match reconstruct_env(&perturbed, rep.gamma.unwrap(), 0, &bg) {
            Err(Error::InconsistentCycles { .. }) => {}
            other => panic!("expected cycle rejection, got {other:?}"),
        }
    }

    #[test]
    fn s_n_constant_rates() {
        let tree = build_regular_tree(3, 5, 1.0).unwrap();
        let rates = RateField::half_conductance(tree.graph());
        let mut ray = vec![0usize];
        while let Some(&child) = tree.children(*ray.last().unwrap()).first() {
            ray.push(child);
        }
        let s = s_n_statistic(&rates, &ray, 1.0);
        assert_eq!(s.len(), 5);
        for v in s {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn s_n_telescopes_for_green_rates() {
        // For wired-environment rates, S_k = G(i0, ray_k) / G(i0, i0).
        let tree = build_regular_tree(3, 3, 1.0).unwrap();
        let n = 3;
        let params = truncation_params(&tree, n).unwrap();
        let order = reverse_bfs_order(params.graph(), 0);
        let mut rng = stream(72, "sn-telescope", 0);
        let interior = sample_nu(&params, &order, &mut rng).unwrap();
        let bg = crate::graph::restrict_tree_bm(&tree, 0, n).unwrap();
        let full_beta = extend_to_boundary(&bg, &interior, &mut rng).unwrap();
        let rep = standard_rep(&bg, &full_beta, 0).unwrap();
        let full = bg.full_graph();
        let h = h_beta(&full, &full_beta);
        let chol = Cholesky::new(&h).unwrap();
        let mut e = DVector::zeros(full.vertex_count());
        e[0] = 1.0;
        let g_col = chol.solve(&e);
        let mut ray = vec![0usize];
        while let Some(&child) = tree.children(*ray.last().unwrap()).first() {
            if tree.depth(child) > n {
                break;
            }
            ray.push(child);
        }
        let s = s_n_statistic(&rep.rates, &ray, 1.0);
        for (k, sv) in s.iter().enumerate() {
            let expect = g_col[ray[k + 1]] / g_col[0];
            assert!((sv - expect).abs() < 1e-12, "S_{k}: {sv} vs {expect}");
        }
    }
}

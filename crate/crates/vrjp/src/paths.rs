//! Truncated sums over walks, used as independent oracles for the Green
//! matrix and the `F`-ratio.
//!
//! The Green matrix admits an expansion over walks `sigma` from `i` to `j`:
//! each walk contributes the product of its edge conductances divided by
//! `2 beta` at every visited vertex. Truncating at a maximum length gives a
//! monotone lower bound converging to the matrix entry. The `F`-ratio has
//! the analogous expansion over walks that avoid the target until the final
//! step, with the target's `2 beta` factor omitted.
//!
//! Enumeration is depth-first with multiplicative pruning and a hard node
//! budget. Pruning only ever lowers the lower bound, keeping the oracle
//! sound: it never overestimates.

use crate::beta::BetaField;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Truncation controls for walk enumeration.
#[derive(Debug, Clone, Copy)]
pub struct PathSumConfig {
    /// Maximum walk length (number of edges).
    pub max_len: usize,
    /// Walks whose accumulated weight falls below this threshold are
    /// abandoned together with all their extensions.
    pub prune_below: f64,
    /// Hard cap on visited enumeration nodes.
    pub node_budget: u64,
}

impl Default for PathSumConfig {
    fn default() -> Self {
        Self {
            max_len: 12,
            prune_below: 1e-16,
            node_budget: 50_000_000,
        }
    }
}

impl PathSumConfig {
    pub fn with_max_len(max_len: usize) -> Self {
        Self {
            max_len,
            ..Self::default()
        }
    }
}

/// Result of a truncated walk sum.
#[derive(Debug, Clone, Copy)]
pub struct PathSum {
    /// The truncated sum: a lower bound on the limit.
    pub value: f64,
    /// Enumeration nodes visited.
    pub nodes: u64,
    /// Whether any branch was cut by the pruning threshold.
    pub pruned: bool,
}

struct Dfs<'a> {
    graph: &'a WeightedGraph,
    beta: &'a [f64],
    cfg: PathSumConfig,
    target: usize,
    avoid_target_interior: bool,
    sum: f64,
    nodes: u64,
    pruned: bool,
}

impl Dfs<'_> {
    fn run(&mut self, v: usize, weight: f64, len: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cfg.node_budget {
            return Err(Error::BudgetExceeded {
                visited: self.nodes,
                cap: self.cfg.node_budget,
            });
        }
        if weight < self.cfg.prune_below {
            self.pruned = true;
            return Ok(());
        }
        if v == self.target {
            self.sum += weight;
            if self.avoid_target_interior {
                // Walks for the F-ratio stop on first arrival.
                return Ok(());
            }
        }
        if len == self.cfg.max_len {
            return Ok(());
        }
        for &(u, w) in self.graph.neighbours(v) {
            let step = if self.avoid_target_interior {
                // Weight omits the final vertex's 2 beta factor, so charge
                // the current vertex on departure.
                w / (2.0 * self.beta[v])
            } else {
                w / (2.0 * self.beta[u])
            };
            self.run(u, weight * step, len + 1)?;
        }
        Ok(())
    }
}

/// Truncated walk expansion of `G(i, j)`: all walks of length at most
/// `cfg.max_len`, each weighted by edge conductances over `2 beta` at every
/// visited vertex. Monotone nondecreasing in the length cap and bounded
/// above by the matrix entry.
pub fn path_sum_green(
    g: &WeightedGraph,
    b: &BetaField,
    i: usize,
    j: usize,
    cfg: PathSumConfig,
) -> Result<PathSum> {
    assert_eq!(b.len(), g.vertex_count());
    let mut dfs = Dfs {
        graph: g,
        beta: b.as_slice(),
        cfg,
        target: j,
        avoid_target_interior: false,
        sum: 0.0,
        nodes: 0,
        pruned: false,
    };
    dfs.run(i, 1.0 / (2.0 * b.0[i]), 0)?;
    Ok(PathSum {
        value: dfs.sum,
        nodes: dfs.nodes,
        pruned: dfs.pruned,
    })
}

/// Truncated walk expansion of `F(i, j) = G(i, j)/G(j, j)`: walks reaching
/// `j` for the first time at their final step, with the final `2 beta`
/// factor omitted. `F(i, i)` is exactly 1 (the empty walk).
pub fn path_sum_f(
    g: &WeightedGraph,
    b: &BetaField,
    i: usize,
    j: usize,
    cfg: PathSumConfig,
) -> Result<PathSum> {
    assert_eq!(b.len(), g.vertex_count());
    if i == j {
        return Ok(PathSum {
            value: 1.0,
            nodes: 1,
            pruned: false,
        });
    }
    let mut dfs = Dfs {
        graph: g,
        beta: b.as_slice(),
        cfg,
        target: j,
        avoid_target_interior: true,
        sum: 0.0,
        nodes: 0,
        pruned: false,
    };
    dfs.run(i, 1.0, 0)?;
    Ok(PathSum {
        value: dfs.sum,
        nodes: dfs.nodes,
        pruned: dfs.pruned,
    })
}

/// Length cap sufficient for the walk sum to come within `tol` of its
/// limit, from the spectral radius of the transfer matrix
/// `M_uv = W_uv / (2 sqrt(beta_u beta_v))`.
///
/// Power iteration on `M` is independent of any Cholesky-based inverse, so
/// using it to budget the oracle does not couple the two routes.
pub fn suggested_max_len(g: &WeightedGraph, b: &BetaField, tol: f64, cap: usize) -> usize {
    let n = g.vertex_count();
    if n == 1 {
        return 1;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut rho = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let di = 2.0 * b.0[i] - g.self_weight(i);
            for &(j, w) in g.neighbours(i) {
                let dj = 2.0 * b.0[j] - g.self_weight(j);
                next[i] += w / (di * dj).sqrt() * v[j];
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1;
        }
        for x in &mut next {
            *x /= norm;
        }
        rho = norm;
        v = next;
    }
    if rho >= 1.0 {
        return cap;
    }
    // Tail after L steps is of order rho^{L+1} / (1 - rho); scale by the
    // largest 1/(2 beta) prefactor.
    let scale = b
        .as_slice()
        .iter()
        .map(|&bi| 1.0 / (2.0 * bi))
        .fold(0.0, f64::max)
        .max(1.0);
    let needed = ((tol * (1.0 - rho) / scale).ln() / rho.ln()).ceil();
    if !needed.is_finite() || needed < 1.0 {
        1
    } else {
        (needed as usize).min(cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::small;
    use crate::green;

    #[test]
    fn pair_partial_sums_follow_geometric_series() {
        // On two vertices with W = 1 and beta = 1, walks 0 -> 0 alternate
        // and contribute (1/2) (1/4)^k; the limit is 2/3 = G(0, 0).
        let g = small::pair(1.0);
        let b = BetaField(vec![1.0, 1.0]);
        let s0 = path_sum_green(&g, &b, 0, 0, PathSumConfig::with_max_len(0)).unwrap();
        assert!((s0.value - 0.5).abs() < 1e-15);
        let s2 = path_sum_green(&g, &b, 0, 0, PathSumConfig::with_max_len(2)).unwrap();
        assert!((s2.value - (0.5 + 0.125)).abs() < 1e-15);
        let s40 = path_sum_green(&g, &b, 0, 0, PathSumConfig::with_max_len(40)).unwrap();
        assert!((s40.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn zero_length_between_distinct_vertices() {
        let g = small::pair(1.0);
        let b = BetaField(vec![1.0, 1.0]);
        let s = path_sum_green(&g, &b, 0, 1, PathSumConfig::with_max_len(0)).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn triangle_converges_to_inverse() {
        let g = small::triangle(1.0);
        let b = BetaField(vec![2.0, 2.0, 2.0]);
        let gm = green::green(&g, &b).unwrap();
        let len = suggested_max_len(&g, &b, 1e-4, 64);
        assert!(len <= 16, "walk count must stay enumerable, got {len}");
        for i in 0..3 {
            for j in 0..3 {
                let s = path_sum_green(&g, &b, i, j, PathSumConfig::with_max_len(len)).unwrap();
                let exact = gm.entry(i, j);
                assert!(s.value <= exact + 1e-12, "lower bound violated");
                assert!(
                    (exact - s.value).abs() < 1e-4,
                    "entry ({i},{j}): {} vs {exact} at len {len}",
                    s.value
                );
            }
        }
    }

    #[test]
    fn monotone_in_length() {
        let g = small::triangle(1.0);
        let b = BetaField(vec![1.5, 1.2, 2.0]);
        let mut prev = 0.0;
        for len in 0..12 {
            let s = path_sum_green(&g, &b, 0, 1, PathSumConfig::with_max_len(len)).unwrap();
            assert!(s.value >= prev - 1e-15);
            prev = s.value;
        }
    }

    #[test]
    fn f_ratio_pair_exact_at_length_one() {
        let g = small::pair(1.0);
        let b = BetaField(vec![1.0, 1.0]);
        let s = path_sum_f(&g, &b, 0, 1, PathSumConfig::with_max_len(1)).unwrap();
        assert!((s.value - 0.5).abs() < 1e-15);
        let gm = green::green(&g, &b).unwrap();
        assert!((s.value - green::f_ratio(&gm, 0, 1)).abs() < 1e-15);
    }

    #[test]
    fn f_ratio_same_vertex_is_one() {
        let g = small::triangle(1.0);
        let b = BetaField(vec![1.5, 1.5, 1.5]);
        let s = path_sum_f(&g, &b, 2, 2, PathSumConfig::default()).unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn f_ratio_path_graph_converges() {
        let g = small::path(3, 1.0);
        let b = BetaField(vec![1.1, 0.9, 1.3]);
        let gm = green::green(&g, &b).unwrap();
        let len = suggested_max_len(&g, &b, 1e-6, 64);
        let s = path_sum_f(&g, &b, 0, 2, PathSumConfig::with_max_len(len)).unwrap();
        let exact = green::f_ratio(&gm, 0, 2);
        assert!((s.value - exact).abs() < 1e-4, "{} vs {exact}", s.value);
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let g = small::triangle(1.0);
        let b = BetaField(vec![1.5, 1.5, 1.5]);
        let cfg = PathSumConfig {
            max_len: 30,
            prune_below: 0.0,
            node_budget: 1000,
        };
        match path_sum_green(&g, &b, 0, 0, cfg) {
            Err(Error::BudgetExceeded { visited, cap }) => {
                assert!(visited > cap);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn disconnected_pair_sums_to_zero() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let b = BetaField(vec![1.0, 1.0, 1.0]);
        let s = path_sum_green(&g, &b, 0, 2, PathSumConfig::default()).unwrap();
        assert_eq!(s.value, 0.0);
        let f = path_sum_f(&g, &b, 0, 2, PathSumConfig::default()).unwrap();
        assert_eq!(f.value, 0.0);
    }
}

//! Exact simulation of the vertex-reinforced jump process, its time
//! change, and Markov jump processes in a fixed environment, plus the
//! Radon–Nikodym density tying the two together.
//!
//! The reinforced process is simulated in its own clock: while the process
//! sits at `i`, every other local time is frozen, so the sojourn is
//! exponential with rate `sum_j W_ij L_j` and the jump target is
//! categorical with the same weights — no discretization anywhere. The
//! time change `D(s) = sum_i (L_i(s)^2 - 1)` is piecewise quadratic and is
//! applied in closed form per sojourn.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Simulation budget.
#[derive(Debug, Clone, Copy)]
pub enum Budget {
    /// Stop after this many jumps.
    Jumps(usize),
    /// Stop at this horizon in the process's own clock, truncating the
    /// final sojourn.
    Horizon(f64),
    /// Stop at this horizon in the time-changed clock (only meaningful for
    /// the reinforced process), truncating the final sojourn.
    TimeChangedHorizon(f64),
}

/// A piecewise-constant trajectory: visited states with strictly
/// increasing jump times, truncated at `horizon`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Visited states; `states[0]` is the start vertex.
    pub states: Vec<usize>,
    /// Jump times; `times[k]` is when the process entered `states[k + 1]`.
    pub times: Vec<f64>,
    /// Total elapsed time.
    pub horizon: f64,
    /// True if a budget cut the trajectory mid-sojourn (horizon budgets) or
    /// the process got absorbed at a rate-zero vertex.
    pub truncated: bool,
}

impl Trajectory {
    pub fn start(&self) -> usize {
        self.states[0]
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    /// Accumulated time at each vertex over `[0, horizon]`.
    pub fn local_times(&self, n_vertices: usize) -> Vec<f64> {
        let mut l = vec![0.0; n_vertices];
        let mut prev = 0.0;
        for (k, &t) in self.times.iter().enumerate() {
            l[self.states[k]] += t - prev;
            prev = t;
        }
        l[*self.states.last().unwrap()] += self.horizon - prev;
        l
    }

    /// The first `k` jump targets (shorter if the trajectory is).
    pub fn jump_prefix(&self, k: usize) -> &[usize] {
        let end = (k + 1).min(self.states.len());
        &self.states[1..end]
    }
}

/// Nonnegative jump rates on directed edges, with cached holding rates.
#[derive(Debug, Clone)]
pub struct RateField {
    rates: Vec<Vec<(usize, f64)>>,
    holding: Vec<f64>,
}

impl RateField {
    pub fn new(n: usize) -> Self {
        Self {
            rates: vec![Vec::new(); n],
            holding: vec![0.0; n],
        }
    }

    pub fn from_fn(g: &WeightedGraph, mut rate: impl FnMut(usize, usize) -> f64) -> Self {
        let n = g.vertex_count();
        let mut rf = Self::new(n);
        for i in 0..n {
            for &(j, _) in g.neighbours(i) {
                rf.set(i, j, rate(i, j));
            }
        }
        rf
    }

    pub fn set(&mut self, i: usize, j: usize, r: f64) {
        assert!(r >= 0.0 && r.is_finite(), "invalid rate {r} on ({i},{j})");
        match self.rates[i].binary_search_by_key(&j, |&(v, _)| v) {
            Ok(pos) => {
                self.holding[i] += r - self.rates[i][pos].1;
                self.rates[i][pos].1 = r;
            }
            Err(pos) => {
                self.rates[i].insert(pos, (j, r));
                self.holding[i] += r;
            }
        }
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i]
            .binary_search_by_key(&j, |&(v, _)| v)
            .map(|pos| self.rates[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Holding rate `r_i = sum_j r_ij`.
    pub fn holding_rate(&self, i: usize) -> f64 {
        self.holding[i]
    }

    pub fn outgoing(&self, i: usize) -> &[(usize, f64)] {
        &self.rates[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.rates.len()
    }

    /// Directed edges `(i, j, r_ij)` with positive rate.
    pub fn directed_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.rates.iter().enumerate() {
            for &(j, r) in row {
                if r > 0.0 {
                    out.push((i, j, r));
                }
            }
        }
        out
    }

    /// The reference field with rate `w/2` on every edge.
    pub fn half_conductance(g: &WeightedGraph) -> Self {
        Self::from_fn(g, |i, j| 0.5 * g.weight(i, j))
    }
}

/// Exact simulation of the reinforced process: jump from `i` to a
/// neighbour `j` at rate `W_ij L_j`, where `L_j` is one plus the local
/// time at `j`.
///
/// `TimeChangedHorizon` budgets are tracked through the closed-form time
/// change while simulating in the process clock. The returned trajectory is
/// always in the process clock; apply [`time_change`] to move it.
pub fn simulate_vrjp<R: Rng + ?Sized>(
    g: &WeightedGraph,
    start: usize,
    budget: Budget,
    rng: &mut R,
) -> Result<Trajectory> {
    let n = g.vertex_count();
    if start >= n {
        return Err(Error::InvalidParameter(format!("start {start} out of range")));
    }
    let mut local = vec![1.0f64; n]; // L_j = 1 + accumulated time at j
    let mut states = vec![start];
    let mut times = Vec::new();
    let mut now = 0.0;
    let mut d_now = 0.0; // time-changed clock
    let mut current = start;
    loop {
        match budget {
            Budget::Jumps(k) if times.len() >= k => {
                return Ok(Trajectory {
                    states,
                    times,
                    horizon: now,
                    truncated: false,
                })
            }
            _ => {}
        }
        let neighbours = g.neighbours(current);
        let total_rate: f64 = neighbours.iter().map(|&(j, w)| w * local[j]).sum();
        if total_rate == 0.0 {
            // Isolated vertex: the process never jumps. Horizon budgets
            // still terminate; a jump budget can never be met.
            return match budget {
                Budget::Horizon(h) => {
                    local[current] += h - now;
                    Ok(Trajectory {
                        states,
                        times,
                        horizon: h,
                        truncated: true,
                    })
                }
                Budget::TimeChangedHorizon(t) => {
                    let delta = sojourn_for_time_change(local[current], t - d_now);
                    Ok(Trajectory {
                        states,
                        times,
                        horizon: now + delta,
                        truncated: true,
                    })
                }
                Budget::Jumps(_) => Err(Error::Degenerate {
                    context: "simulate_vrjp",
                    detail: "jump budget on a vertex with no neighbours".into(),
                }),
            };
        }
        let sojourn = Exp::new(total_rate).unwrap().sample(rng);
        // Horizon budgets may cut the sojourn short.
        match budget {
            Budget::Horizon(h) if now + sojourn >= h => {
                local[current] += h - now;
                return Ok(Trajectory {
                    states,
                    times,
                    horizon: h,
                    truncated: true,
                });
            }
            Budget::TimeChangedHorizon(t) => {
                // While at `current`, D grows by 2 L delta + delta^2.
                let d_after = d_now + 2.0 * local[current] * sojourn + sojourn * sojourn;
                if d_after >= t {
                    let delta = sojourn_for_time_change(local[current], t - d_now);
                    local[current] += delta;
                    return Ok(Trajectory {
                        states,
                        times,
                        horizon: now + delta,
                        truncated: true,
                    });
                }
                d_now = d_after;
            }
            _ => {}
        }
        now += sojourn;
        local[current] += sojourn;
        // Categorical jump proportional to W_ij L_j.
        let mut u = rng.random_range(0.0..total_rate);
        let mut target = neighbours.last().unwrap().0;
        for &(j, w) in neighbours {
            let r = w * local[j];
            if u < r {
                target = j;
                break;
            }
            u -= r;
        }
        states.push(target);
        times.push(now);
        current = target;
    }
}

/// Sojourn length `delta` solving `2 L delta + delta^2 = d_remaining`.
fn sojourn_for_time_change(l: f64, d_remaining: f64) -> f64 {
    debug_assert!(d_remaining >= 0.0);
    -l + (l * l + d_remaining).sqrt()
}

/// Maps a trajectory through the time change
/// `D(s) = sum_i (L_i(s)^2 - 1)`, jump times and horizon included. States
/// are unchanged and `D(0) = 0`.
pub fn time_change(traj: &Trajectory, n_vertices: usize) -> Trajectory {
    let mut local = vec![1.0f64; n_vertices];
    let mut out_times = Vec::with_capacity(traj.times.len());
    let mut d = 0.0;
    let mut prev = 0.0;
    for (k, &t) in traj.times.iter().enumerate() {
        let v = traj.states[k];
        let delta = t - prev;
        d += 2.0 * local[v] * delta + delta * delta;
        local[v] += delta;
        out_times.push(d);
        prev = t;
    }
    let v = *traj.states.last().unwrap();
    let delta = traj.horizon - prev;
    d += 2.0 * local[v] * delta + delta * delta;
    Trajectory {
        states: traj.states.clone(),
        times: out_times,
        horizon: d,
        truncated: traj.truncated,
    }
}

/// Inverse of [`time_change`]: maps a time-changed trajectory back to the
/// process clock. Round-tripping is exact up to floating point.
pub fn time_change_inverse(traj: &Trajectory, n_vertices: usize) -> Trajectory {
    let mut local = vec![1.0f64; n_vertices];
    let mut out_times = Vec::with_capacity(traj.times.len());
    let mut d_prev = 0.0;
    let mut s = 0.0;
    for (k, &t) in traj.times.iter().enumerate() {
        let v = traj.states[k];
        let delta = sojourn_for_time_change(local[v], t - d_prev);
        s += delta;
        local[v] += delta;
        out_times.push(s);
        d_prev = t;
    }
    let v = *traj.states.last().unwrap();
    let delta = sojourn_for_time_change(local[v], traj.horizon - d_prev);
    Trajectory {
        states: traj.states.clone(),
        times: out_times,
        horizon: s + delta,
        truncated: traj.truncated,
    }
}

/// Standard continuous-time Markov chain simulation under a fixed rate
/// field: exponential sojourns at the holding rate, categorical jumps.
/// Absorbing vertices (holding rate zero) end the trajectory flagged as
/// truncated.
pub fn simulate_mjp<R: Rng + ?Sized>(
    r: &RateField,
    start: usize,
    budget: Budget,
    rng: &mut R,
) -> Result<Trajectory> {
    let n = r.vertex_count();
    if start >= n {
        return Err(Error::InvalidParameter(format!("start {start} out of range")));
    }
    let mut states = vec![start];
    let mut times = Vec::new();
    let mut now = 0.0;
    let mut current = start;
    loop {
        match budget {
            Budget::Jumps(k) if times.len() >= k => {
                return Ok(Trajectory {
                    states,
                    times,
                    horizon: now,
                    truncated: false,
                })
            }
            _ => {}
        }
        let total = r.holding_rate(current);
        if total == 0.0 {
            let horizon = match budget {
                Budget::Horizon(h) | Budget::TimeChangedHorizon(h) => h,
                Budget::Jumps(_) => now,
            };
            return Ok(Trajectory {
                states,
                times,
                horizon,
                truncated: true,
            });
        }
        let sojourn = Exp::new(total).unwrap().sample(rng);
        match budget {
            Budget::Horizon(h) | Budget::TimeChangedHorizon(h) if now + sojourn >= h => {
                return Ok(Trajectory {
                    states,
                    times,
                    horizon: h,
                    truncated: true,
                });
            }
            _ => {}
        }
        now += sojourn;
        let mut u = rng.random_range(0.0..total);
        let outgoing = r.outgoing(current);
        let mut target = outgoing.last().unwrap().0;
        for &(j, rate) in outgoing {
            if u < rate {
                target = j;
                break;
            }
            u -= rate;
        }
        states.push(target);
        times.push(now);
        current = target;
    }
}

/// Radon–Nikodym density of the time-changed reinforced process against
/// the reference jump process with rates `W/2`, on the sigma-field of the
/// trajectory up to its horizon.
///
/// With `l_i` the local times accumulated by the trajectory,
///
/// ```text
/// exp(-sum_{i~j} W_ij (sqrt((1+l_i)(1+l_j)) - 1))
///   * exp(sum_i W_i l_i / 2) * prod_{i != start} (1+l_i)^{-1/2}
/// ```
///
/// The trajectory must be truncated exactly at the horizon of interest
/// (time-changed clock), so that its local times are the ones the density
/// reads.
pub fn rn_density(g: &WeightedGraph, start: usize, traj: &Trajectory) -> f64 {
    let n = g.vertex_count();
    let l = traj.local_times(n);
    let mut log_density = 0.0;
    for (i, j, w) in g.edges() {
        log_density -= w * (((1.0 + l[i]) * (1.0 + l[j])).sqrt() - 1.0);
    }
    for i in 0..n {
        let w_i: f64 = g.neighbours(i).iter().map(|&(_, w)| w).sum();
        log_density += 0.5 * w_i * l[i];
        if i != start {
            log_density -= 0.5 * (1.0 + l[i]).ln();
        }
    }
    log_density.exp()
}

/// Rate estimates recovered from a single long trajectory by the law of
/// large numbers: mean sojourn inverts to the holding rate, departure
/// frequencies to the transition probabilities.
#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub rates: RateField,
    /// Completed visits per vertex (excluding a final truncated sojourn);
    /// vertices with fewer than two visits yield no estimate.
    pub visits: Vec<usize>,
}

pub fn estimate_rates_from_traj(traj: &Trajectory, n_vertices: usize) -> RateEstimate {
    let mut sojourn_sum = vec![0.0f64; n_vertices];
    let mut departures: Vec<std::collections::BTreeMap<usize, usize>> =
        vec![std::collections::BTreeMap::new(); n_vertices];
    let mut visits = vec![0usize; n_vertices];
    let mut prev_time = 0.0;
    for (k, &t) in traj.times.iter().enumerate() {
        let from = traj.states[k];
        let to = traj.states[k + 1];
        sojourn_sum[from] += t - prev_time;
        *departures[from].entry(to).or_insert(0) += 1;
        visits[from] += 1;
        prev_time = t;
    }
    let mut rates = RateField::new(n_vertices);
    for i in 0..n_vertices {
        if visits[i] < 2 {
            continue;
        }
        let mean_sojourn = sojourn_sum[i] / visits[i] as f64;
        for (&j, &count) in &departures[i] {
            let p = count as f64 / visits[i] as f64;
            rates.set(i, j, p / mean_sojourn);
        }
    }
    RateEstimate { rates, visits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::small;
    use crate::rng::stream;

    #[test]
    fn first_sojourn_on_pair_is_unit_exponential() {
        // Started at 0 with L_1 = 1, the first sojourn is Exp(1).
        let g = small::pair(1.0);
        let mut rng = stream(31, "first-sojourn", 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = simulate_vrjp(&g, 0, Budget::Jumps(1), &mut rng).unwrap();
            sum += t.times[0];
        }
        let mean = sum / n as f64;
        let stderr = 1.0 / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * stderr, "mean {mean}");
    }

    #[test]
    fn single_vertex_never_jumps() {
        let g = small::singleton();
        let mut rng = stream(32, "lonely", 0);
        let t = simulate_vrjp(&g, 0, Budget::Horizon(5.0), &mut rng).unwrap();
        assert_eq!(t.states, vec![0]);
        assert!(t.truncated);
        assert_eq!(t.local_times(1), vec![5.0]);
    }

    #[test]
    fn triangle_first_jump_is_symmetric() {
        let g = small::triangle(1.0);
        let mut rng = stream(33, "triangle-first", 0);
        let n = 100_000;
        let mut to_1 = 0usize;
        for _ in 0..n {
            let t = simulate_vrjp(&g, 0, Budget::Jumps(1), &mut rng).unwrap();
            if t.states[1] == 1 {
                to_1 += 1;
            }
        }
        let p = to_1 as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "p {p}");
    }

    #[test]
    fn time_change_single_sojourn() {
        // Sitting at the start for s: D(s) = (1+s)^2 - 1 = 2s + s^2.
        let traj = Trajectory {
            states: vec![0],
            times: vec![],
            horizon: 1.5,
            truncated: true,
        };
        let z = time_change(&traj, 1);
        assert!((z.horizon - (2.0 * 1.5 + 1.5 * 1.5)).abs() < 1e-14);
    }

    #[test]
    fn time_change_round_trip() {
        let g = small::triangle(1.0);
        let mut rng = stream(34, "roundtrip", 0);
        for _ in 0..50 {
            let y = simulate_vrjp(&g, 0, Budget::Jumps(20), &mut rng).unwrap();
            let z = time_change(&y, 3);
            // Mapped jump times strictly increase.
            for w in z.times.windows(2) {
                assert!(w[1] > w[0]);
            }
            let back = time_change_inverse(&z, 3);
            for (a, b) in y.times.iter().zip(&back.times) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((y.horizon - back.horizon).abs() < 1e-12);
        }
    }

    #[test]
    fn time_changed_horizon_budget_is_exact() {
        let g = small::triangle(1.0);
        let mut rng = stream(35, "z-horizon", 0);
        for k in 0..50 {
            let t_max = 0.5 + 0.1 * k as f64;
            let y = simulate_vrjp(&g, 0, Budget::TimeChangedHorizon(t_max), &mut rng).unwrap();
            let z = time_change(&y, 3);
            assert!((z.horizon - t_max).abs() < 1e-10, "horizon {}", z.horizon);
            assert!(z.truncated);
            // Local times sum to the horizon in both clocks.
            let l: f64 = y.local_times(3).iter().sum();
            assert!((l - y.horizon).abs() < 1e-12);
        }
    }

    #[test]
    fn mjp_sojourn_mean() {
        let mut r = RateField::new(2);
        r.set(0, 1, 0.5);
        r.set(1, 0, 0.5);
        let mut rng = stream(36, "mjp-sojourn", 0);
        let n = 50_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = simulate_mjp(&r, 0, Budget::Jumps(1), &mut rng).unwrap();
            sum += t.times[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn mjp_embedded_chain_frequencies() {
        let g = small::triangle(1.0);
        let mut r = RateField::half_conductance(&g);
        r.set(0, 1, 0.75); // bias one edge
        let mut rng = stream(37, "mjp-chain", 0);
        let n = 100_000;
        let mut to_1 = 0usize;
        for _ in 0..n {
            let t = simulate_mjp(&r, 0, Budget::Jumps(1), &mut rng).unwrap();
            if t.states[1] == 1 {
                to_1 += 1;
            }
        }
        let p = to_1 as f64 / n as f64;
        let expect = 0.75 / (0.75 + 0.5);
        let stderr = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((p - expect).abs() < 4.0 * stderr, "p {p} vs {expect}");
    }

    #[test]
    fn mjp_absorbing_vertex_flags_truncation() {
        let mut r = RateField::new(2);
        r.set(0, 1, 1.0);
        let mut rng = stream(38, "absorbing", 0);
        let t = simulate_mjp(&r, 0, Budget::Jumps(5), &mut rng).unwrap();
        assert_eq!(t.states, vec![0, 1]);
        assert!(t.truncated);
    }

    #[test]
    fn rn_density_no_jump_closed_form() {
        let g = small::triangle(1.0);
        let horizon = 1.3;
        let traj = Trajectory {
            states: vec![0],
            times: vec![],
            horizon,
            truncated: true,
        };
        let d = rn_density(&g, 0, &traj);
        let w_tot = 2.0;
        let expected =
            (-w_tot * ((1.0 + horizon).sqrt() - 1.0)).exp() * (0.5 * w_tot * horizon).exp();
        assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
    }

    #[test]
    fn rn_density_at_time_zero_is_one() {
        let g = small::triangle(1.0);
        let traj = Trajectory {
            states: vec![0],
            times: vec![],
            horizon: 0.0,
            truncated: true,
        };
        assert_eq!(rn_density(&g, 0, &traj), 1.0);
    }

    #[test]
    fn rate_estimation_recovers_rates() {
        let g = small::triangle(1.0);
        let mut truth = RateField::half_conductance(&g);
        truth.set(0, 1, 1.25);
        truth.set(2, 0, 0.3);
        let mut rng = stream(39, "rate-recovery", 0);
        let traj = simulate_mjp(&truth, 0, Budget::Jumps(100_000), &mut rng).unwrap();
        let est = estimate_rates_from_traj(&traj, 3);
        for (i, j, r) in truth.directed_edges() {
            let visits = est.visits[i] as f64;
            let stderr = r / visits.sqrt() * 2.0; // loose moment bound
            let got = est.rates.rate(i, j);
            assert!(
                (got - r).abs() < 3.0 * stderr.max(0.01),
                "rate ({i},{j}): {got} vs {r}"
            );
        }
    }

    #[test]
    fn rate_estimation_skips_rare_vertices() {
        let traj = Trajectory {
            states: vec![0, 1, 0],
            times: vec![1.0, 2.0],
            horizon: 2.5,
            truncated: false,
        };
        let est = estimate_rates_from_traj(&traj, 3);
        // Vertex 1 was visited once, vertex 2 never: no estimates.
        assert_eq!(est.visits[1], 1);
        assert_eq!(est.rates.outgoing(1), &[]);
        assert_eq!(est.rates.outgoing(2), &[]);
    }
}

//! Discrete optimal transport between two histograms.
//!
//! Two solvers share one result type:
//!
//! * [`OtSolver::Sinkhorn`] runs log-domain Sinkhorn scaling on the
//!   max-normalised cost with an annealed regularisation schedule, then
//!   rounds the iterate onto the feasible set so the returned plan has exact
//!   marginals.
//! * [`OtSolver::Exact`] solves the transportation LP by successive shortest
//!   augmenting paths. It is exact up to floating point and is meant for
//!   small supports (tests, interpretability exports).
//!
//! In both cases the reported distance is `Σ t_ij c_ij` with the original,
//! unnormalised cost.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    /// Regularisation at the start of the schedule.
    pub eps_start: f64,
    /// Final regularisation; the schedule halves down to this value.
    pub eps_end: f64,
    /// Iteration budget across the whole schedule.
    pub max_iters: usize,
    /// Stop once the largest marginal violation drops below this.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            eps_start: 0.1,
            eps_end: 1e-3,
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OtSolver {
    Sinkhorn(SinkhornConfig),
    Exact,
}

impl Default for OtSolver {
    fn default() -> Self {
        OtSolver::Sinkhorn(SinkhornConfig::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Sinkhorn,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub solver: SolverKind,
    pub iterations: usize,
    /// Largest marginal violation of the returned plan.
    pub marginal_error: f64,
    /// Largest marginal violation of the raw Sinkhorn iterate before rounding.
    pub raw_marginal_error: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OtSolution {
    pub plan: Array2<f64>,
    pub distance: f64,
    pub meta: SolverMeta,
}

/// Solves `min <T, C>` over couplings of `p` (rows) and `q` (columns).
pub fn solve(p: &[f64], q: &[f64], cost: &Array2<f64>, solver: &OtSolver) -> OtSolution {
    assert_eq!(cost.dim(), (p.len(), q.len()), "cost shape must match marginals");
    assert!(!p.is_empty() && !q.is_empty(), "marginals must be non-empty");
    let (plan, iterations, raw_error, converged, kind) = match solver {
        OtSolver::Sinkhorn(cfg) => {
            let run = sinkhorn(p, q, cost, cfg);
            let rounded = round_to_feasible(&run.plan, p, q);
            (rounded, run.iterations, run.error, run.converged, SolverKind::Sinkhorn)
        }
        OtSolver::Exact => {
            let (plan, augmentations) = exact(p, q, cost);
            (plan, augmentations, 0.0, true, SolverKind::Exact)
        }
    };
    let marginal_error = marginal_violation(&plan, p, q);
    let distance = (&plan * cost).sum();
    OtSolution {
        plan,
        distance,
        meta: SolverMeta {
            solver: kind,
            iterations,
            marginal_error,
            raw_marginal_error: if kind == SolverKind::Exact { marginal_error } else { raw_error },
            converged,
        },
    }
}

/// Largest absolute deviation of the plan's row/column sums from `p`/`q`.
pub fn marginal_violation(plan: &Array2<f64>, p: &[f64], q: &[f64]) -> f64 {
    let rows = plan.rows().into_iter().zip(p).map(|(r, &pi)| (r.sum() - pi).abs());
    let cols = plan.columns().into_iter().zip(q).map(|(c, &qj)| (c.sum() - qj).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

struct SinkhornRun {
    plan: Array2<f64>,
    iterations: usize,
    error: f64,
    converged: bool,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn sinkhorn(p: &[f64], q: &[f64], cost: &Array2<f64>, cfg: &SinkhornConfig) -> SinkhornRun {
    let (n, m) = cost.dim();
    let scale = cost.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        // every coupling costs nothing; the independent one is as good as any
        let plan = Array2::from_shape_fn((n, m), |(i, j)| p[i] * q[j]);
        return SinkhornRun {
            plan,
            iterations: 0,
            error: 0.0,
            converged: true,
        };
    }
    let c = cost / scale;
    let log_p: Vec<f64> = p.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let log_q: Vec<f64> = q.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let plan_of = |f: &[f64], g: &[f64], eps: f64| {
        Array2::from_shape_fn((n, m), |(i, j)| {
            let v = (f[i] + g[j] - c[[i, j]]) / eps;
            if v == f64::NEG_INFINITY || v.is_nan() { 0.0 } else { v.exp() }
        })
    };

    let mut eps = cfg.eps_start.max(cfg.eps_end);
    let mut iterations = 0;
    let mut error = f64::INFINITY;
    loop {
        let last_stage = eps <= cfg.eps_end;
        // intermediate stages only need a warm start for the next one
        let stage_tol = if last_stage { cfg.tol } else { cfg.tol.max(1e-4) };
        let stage_cap = if last_stage {
            cfg.max_iters.saturating_sub(iterations)
        } else {
            (cfg.max_iters / 10).min(cfg.max_iters.saturating_sub(iterations))
        };
        let mut stage_iters = 0;
        while stage_iters < stage_cap {
            for i in 0..n {
                f[i] = if log_p[i] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    eps * log_p[i] - eps * log_sum_exp((0..m).map(|j| (g[j] - c[[i, j]]) / eps))
                };
            }
            for j in 0..m {
                g[j] = if log_q[j] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    eps * log_q[j] - eps * log_sum_exp((0..n).map(|i| (f[i] - c[[i, j]]) / eps))
                };
            }
            stage_iters += 1;
            iterations += 1;
            // columns are exact after the g update; measure the rows
            error = (0..n)
                .map(|i| {
                    let row: f64 = (0..m)
                        .map(|j| {
                            let v = (f[i] + g[j] - c[[i, j]]) / eps;
                            if v.is_finite() { v.exp() } else { 0.0 }
                        })
                        .sum();
                    (row - p[i]).abs()
                })
                .fold(0.0, f64::max);
            if error < stage_tol {
                break;
            }
        }
        if last_stage || iterations >= cfg.max_iters {
            let converged = last_stage && error < cfg.tol;
            return SinkhornRun {
                plan: plan_of(&f, &g, eps),
                iterations,
                error,
                converged,
            };
        }
        eps = (eps / 2.0).max(cfg.eps_end);
    }
}

/// Projects an approximate coupling onto the transport polytope of `(p, q)`
/// (Altschuler, Weed & Rigollet rounding). Entries stay non-negative.
pub fn round_to_feasible(plan: &Array2<f64>, p: &[f64], q: &[f64]) -> Array2<f64> {
    let mut x = plan.clone();
    for (mut row, &pi) in x.rows_mut().into_iter().zip(p) {
        let s = row.sum();
        if s > pi && s > 0.0 {
            row *= pi / s;
        }
    }
    for (mut col, &qj) in x.columns_mut().into_iter().zip(q) {
        let s = col.sum();
        if s > qj && s > 0.0 {
            col *= qj / s;
        }
    }
    let err_r: Vec<f64> = x.rows().into_iter().zip(p).map(|(r, &pi)| (pi - r.sum()).max(0.0)).collect();
    let err_c: Vec<f64> = x.columns().into_iter().zip(q).map(|(c, &qj)| (qj - c.sum()).max(0.0)).collect();
    let mass: f64 = err_r.iter().sum();
    if mass > 0.0 {
        for (i, &a) in err_r.iter().enumerate() {
            for (j, &b) in err_c.iter().enumerate() {
                x[[i, j]] += a * b / mass;
            }
        }
    }
    x
}

const MASS_EPS: f64 = 1e-15;

/// Successive shortest augmenting paths on the bipartite residual network.
/// Returns the plan and the number of augmentations.
fn exact(p: &[f64], q: &[f64], cost: &Array2<f64>) -> (Array2<f64>, usize) {
    let (n, m) = cost.dim();
    let mut flow = Array2::<f64>::zeros((n, m));
    let mut supply = p.to_vec();
    let mut demand = q.to_vec();
    let mut augmentations = 0;

    // node k < n is a source-side row, n + j is a column
    loop {
        let open_sources: Vec<usize> = (0..n).filter(|&i| supply[i] > MASS_EPS).collect();
        if open_sources.is_empty() || demand.iter().all(|&d| d <= MASS_EPS) {
            break;
        }
        let mut dist = vec![f64::INFINITY; n + m];
        let mut pred: Vec<Option<usize>> = vec![None; n + m];
        for &i in &open_sources {
            dist[i] = 0.0;
        }
        // Bellman-Ford; the residual graph has no negative cycles at an
        // optimum of the partial problem.
        for _ in 0..(n + m) {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let nd = dist[i] + cost[[i, j]];
                        if nd < dist[n + j] - 1e-15 {
                            dist[n + j] = nd;
                            pred[n + j] = Some(i);
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if flow[[i, j]] > MASS_EPS {
                            let nd = dist[n + j] - cost[[i, j]];
                            if nd < dist[i] - 1e-15 {
                                dist[i] = nd;
                                pred[i] = Some(n + j);
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..m)
            .filter(|&j| demand[j] > MASS_EPS && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]));
        let Some(target) = target else { break };

        // walk back to a source, collecting the path and its bottleneck
        let mut path = Vec::new();
        let mut node = n + target;
        let mut bottleneck = demand[target];
        while let Some(prev) = pred[node] {
            path.push((prev, node));
            if prev >= n {
                // backward edge column(prev) -> row(node)
                bottleneck = bottleneck.min(flow[[node, prev - n]]);
            }
            node = prev;
        }
        // the walk ends at a row that was seeded as an open source
        let source = node;
        bottleneck = bottleneck.min(supply[source]);
        for &(from, to) in &path {
            if from < n {
                flow[[from, to - n]] += bottleneck;
            } else {
                flow[[to, from - n]] -= bottleneck;
                if flow[[to, from - n]] < MASS_EPS {
                    flow[[to, from - n]] = 0.0;
                }
            }
        }
        supply[source] -= bottleneck;
        demand[target] -= bottleneck;
        augmentations += 1;
    }
    (flow, augmentations)
}

//! Coupled-execution diagnostics for the recursive scheme and the greedy
//! trajectory experiment on complete bipartite graphs.
//!
//! A coupled run executes the scheme twice on the same arrivals and coins:
//! once on `G` and once on `G \ {v}`. The matched status of `u` at `t_k` can
//! only go from 0 (usual) to 1 (without `v`) through a *flipping sequence*,
//! an odd-length path from `v` to `F_u` of surviving edges arriving in
//! increasing order before `u`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrival::{arrives_before, Coins, TimeWindow, VertexArrivals};
use crate::error::{Error, Result};
use crate::exec::{fold_trials, Exec};
use crate::graph::{Graph, OddGirth};
use crate::recursive::{arc_index, EstimateTable, Horizon, Matching, RecursiveVertex};
use crate::rng::StreamKey;

/// The usual execution and the execution without `v`, both cut at `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub u: usize,
    pub v: usize,
    pub horizon: f64,
    pub usual: Matching,
    pub parallel: Matching,
}

impl CoupledRun {
    /// `M_u(t_k)`.
    pub fn m_u(&self) -> bool {
        self.usual.matched_by(self.u, self.horizon)
    }

    /// `M_u^{-v}(t_k)`.
    pub fn m_u_without_v(&self) -> bool {
        self.parallel.matched_by(self.u, self.horizon)
    }

    /// Some `w != v` selected `u` in the execution without `v`.
    pub fn selected_without_v(&self, g: &Graph) -> bool {
        self.parallel.accepted.iter().any(|a| {
            let e = g.edge(a.edge);
            let p = a.proposer.expect("vertex arrivals");
            p != self.u && (e.u == self.u || e.v == self.u)
        })
    }
}

/// Runs `scheme` on `G` and on `G \ {v}` with shared randomness up to `t_k`.
pub fn coupled_run(
    scheme: &RecursiveVertex<'_>,
    table: &EstimateTable,
    s: &VertexArrivals,
    coins: &Coins,
    u: usize,
    v: usize,
    t_k: f64,
) -> Result<CoupledRun> {
    let g = scheme.graph();
    if u == v {
        return Err(Error::InvalidParameter("u and v must differ".into()));
    }
    if g.edge_between(u, v).is_none() {
        return Err(Error::InvalidParameter(format!("({u}, {v}) is not an edge")));
    }
    let usual = scheme.simulate(s, coins, table, Horizon { until: t_k, excluded: None })?;
    let parallel = scheme.simulate(s, coins, table, Horizon { until: t_k, excluded: Some(v) })?;
    Ok(CoupledRun { u, v, horizon: t_k, usual, parallel })
}

/// Every path `v = v_1, ..., v_d` (`d` even, `u` not on it) with potential:
/// `F_u = v_d`, `F_{v_i} = v_{i-1}` for `i >= 3`, and `F_{v_1} = v_2` or
/// `F_{v_2} = v_1`.
///
/// Such paths follow the chain `F_u, F_{F_u}, ...` backwards, so there are
/// at most two candidates; graphs of odd girth at least 5 admit at most one.
pub fn potential_paths(g: &Graph, s: &VertexArrivals, u: usize, v: usize) -> Vec<Vec<usize>> {
    let mut chain = Vec::new();
    let mut found = Vec::new();
    let mut cur = s.choice[u];
    while let Some(c) = cur {
        if c == u || c == v || chain.contains(&c) {
            break;
        }
        chain.push(c);
        // chain = v_d, v_{d-1}, ..., v_2 with d = chain.len() + 1.
        if chain.len() % 2 == 1 && g.edge_between(v, c).is_some() && (s.choice[v] == Some(c) || s.choice[c] == Some(v)) {
            let mut path = vec![v];
            path.extend(chain.iter().rev());
            found.push(path);
        }
        cur = s.choice[c];
    }
    found
}

/// The path with potential, if any; the first one when several exist.
pub fn detect_potential_path(g: &Graph, s: &VertexArrivals, u: usize, v: usize) -> Option<Vec<usize>> {
    potential_paths(g, s, u, v).into_iter().next()
}

/// All path times precede `Y_u`, in order `v_1 < ... < v_d` or
/// `v_2 < v_1 < v_3 < ... < v_d`.
pub fn check_badly_ordered(s: &VertexArrivals, path: &[usize], u: usize) -> bool {
    if path.iter().any(|&w| !arrives_before(&s.time, w, u)) {
        return false;
    }
    let increasing = |p: &[usize]| p.windows(2).all(|w| arrives_before(&s.time, w[0], w[1]));
    if increasing(path) {
        return true;
    }
    if path.len() < 2 {
        return false;
    }
    let mut swapped = path.to_vec();
    swapped.swap(0, 1);
    increasing(&swapped)
}

/// Whether the edge between `a` and `b` is active and its acceptance bit
/// comes up under `scheme`'s estimates.
pub fn survives(scheme: &RecursiveVertex<'_>, table: &EstimateTable, s: &VertexArrivals, coins: &Coins, a: usize, b: usize) -> bool {
    let g = scheme.graph();
    let Some(e) = g.edge_between(a, b) else { return false };
    let (early, late) = if arrives_before(&s.time, a, b) { (a, b) } else { (b, a) };
    s.choice[late] == Some(early)
        && coins.a[late] < scheme.acceptance_probability(table, arc_index(g, e, late), s.time[late])
}

/// Searches for a flipping sequence for `u` via `v`.
pub fn find_flipping_sequence(
    scheme: &RecursiveVertex<'_>,
    table: &EstimateTable,
    s: &VertexArrivals,
    coins: &Coins,
    u: usize,
    v: usize,
) -> Option<Vec<usize>> {
    let target = s.choice[u]?;
    if target == v || !arrives_before(&s.time, v, u) {
        return None;
    }
    let g = scheme.graph();
    let mut path = vec![v];
    let mut on_path = vec![false; g.vertex_count()];
    on_path[v] = true;
    on_path[u] = true;
    fn edge_time(s: &VertexArrivals, a: usize, b: usize) -> f64 {
        s.time[a].max(s.time[b])
    }
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        scheme: &RecursiveVertex<'_>,
        table: &EstimateTable,
        s: &VertexArrivals,
        coins: &Coins,
        u: usize,
        target: usize,
        last: f64,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
    ) -> bool {
        let here = *path.last().expect("non-empty");
        for &(w, _) in scheme.graph().neighbors(here) {
            if on_path[w] || !arrives_before(&s.time, w, u) || !survives(scheme, table, s, coins, here, w) {
                continue;
            }
            let t = edge_time(s, here, w);
            if t <= last {
                continue;
            }
            path.push(w);
            if w == target && path.len() % 2 == 0 {
                return true;
            }
            on_path[w] = true;
            if w != target && dfs(scheme, table, s, coins, u, target, t, path, on_path) {
                return true;
            }
            on_path[w] = false;
            path.pop();
        }
        false
    }
    dfs(scheme, table, s, coins, u, target, f64::NEG_INFINITY, &mut path, &mut on_path).then_some(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlippingReport {
    pub potential_path: Option<Vec<usize>>,
    pub potential_path_count: usize,
    pub badly_ordered: bool,
    pub flipping: bool,
    /// `M_u^{-v}(t_k) - M_u(t_k) > 1_{B_{v->u}}`.
    pub indicator_violation: bool,
    /// Some `w != v` selected `u` without `v` while `u` is unmatched in `G`.
    pub selection_violation: bool,
}

/// Classifies one coupled sample.
pub fn flipping_report(
    scheme: &RecursiveVertex<'_>,
    table: &EstimateTable,
    s: &VertexArrivals,
    coins: &Coins,
    run: &CoupledRun,
) -> FlippingReport {
    let g = scheme.graph();
    let paths = potential_paths(g, s, run.u, run.v);
    let badly_ordered = paths.iter().any(|p| check_badly_ordered(s, p, run.u));
    let flipping = find_flipping_sequence(scheme, table, s, coins, run.u, run.v).is_some();
    let diff = i32::from(run.m_u_without_v()) - i32::from(run.m_u());
    FlippingReport {
        potential_path_count: paths.len(),
        potential_path: paths.into_iter().next(),
        badly_ordered,
        flipping,
        indicator_violation: diff > i32::from(flipping),
        selection_violation: run.selected_without_v(g) && !run.m_u(),
    }
}

/// `(1/t_k) int_0^{t_k} 2 y^{g-1}/(g-1)! dy = 2 t_k^{g-1} / g!`, zero for
/// bipartite graphs.
pub fn correlation_bound(g: OddGirth, t_k: f64) -> Result<f64> {
    Ok(match g.check()? {
        OddGirth::Infinite => 0.0,
        OddGirth::Finite(g) => 2.0 * t_k.powi(g as i32 - 1) / (1..=g).map(|i| i as f64).product::<f64>(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub u: usize,
    pub v: usize,
    pub t_k: f64,
    pub trials: u64,
    /// Estimate of `E[M_u^{-v}(t_k) - M_u(t_k) | Y_u < t_k]`.
    pub gap: f64,
    pub std_error: f64,
    pub bound: f64,
    pub indicator_violations: u64,
    pub selection_violations: u64,
    pub flipping: u64,
    pub potential: u64,
    pub badly_ordered_potential: u64,
    pub max_potential_paths: usize,
}

impl GapEstimate {
    pub fn within_bound(&self, sigmas: f64) -> bool {
        self.gap <= self.bound + sigmas * self.std_error
    }
}

#[derive(Debug, Default, Clone)]
struct GapAcc {
    n: u64,
    sum: i64,
    sum_sq: u64,
    indicator: u64,
    selection: u64,
    flipping: u64,
    potential: u64,
    badly: u64,
    max_paths: usize,
}

impl GapAcc {
    fn merge(mut self, o: GapAcc) -> GapAcc {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.indicator += o.indicator;
        self.selection += o.selection;
        self.flipping += o.flipping;
        self.potential += o.potential;
        self.badly += o.badly;
        self.max_paths = self.max_paths.max(o.max_paths);
        self
    }
}

/// Estimates the positive correlation between `Y_v > t_k` and `M_u(t_k)`
/// through the coupling `E[M_u | Y_u < t_k < Y_v] = E[M_u^{-v} | Y_u < t_k]`.
/// Every trial draws `Y_u` uniformly on `[0, t_k)` and runs both executions
/// on common randomness.
#[allow(clippy::too_many_arguments)]
pub fn correlation_gap(
    scheme: &RecursiveVertex<'_>,
    table: &EstimateTable,
    u: usize,
    v: usize,
    t_k: f64,
    trials: u64,
    key: StreamKey,
    exec: Exec,
) -> Result<GapEstimate> {
    if !(t_k > 0.0 && t_k <= 1.0) {
        return Err(Error::InvalidParameter(format!("t_k must lie in (0, 1], got {t_k}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let g = scheme.graph();
    // Validates the pair and the table coverage once up front.
    {
        let mut rng = key.child(u64::MAX).stream();
        let s = scheme.sampler().sample(&mut rng);
        let c = Coins::draw(g.vertex_count(), &mut rng);
        coupled_run(scheme, table, &s, &c, u, v, t_k)?;
    }
    let acc = fold_trials(
        exec,
        trials,
        GapAcc::default,
        |acc, trial| {
            let mut rng = key.child(trial).stream();
            let s = scheme.sampler().sample_with(&mut rng, &[(u, TimeWindow::Before(t_k))]);
            let coins = Coins::draw(g.vertex_count(), &mut rng);
            let run = coupled_run(scheme, table, &s, &coins, u, v, t_k).expect("validated");
            let rep = flipping_report(scheme, table, &s, &coins, &run);
            let d = i64::from(run.m_u_without_v()) - i64::from(run.m_u());
            acc.n += 1;
            acc.sum += d;
            acc.sum_sq += d.unsigned_abs();
            acc.indicator += u64::from(rep.indicator_violation);
            acc.selection += u64::from(rep.selection_violation);
            acc.flipping += u64::from(rep.flipping);
            acc.potential += u64::from(rep.potential_path_count > 0);
            acc.badly += u64::from(rep.badly_ordered);
            acc.max_paths = acc.max_paths.max(rep.potential_path_count);
        },
        GapAcc::merge,
    );
    let n = acc.n as f64;
    let mean = acc.sum as f64 / n;
    let var = if acc.n > 1 { ((acc.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(GapEstimate {
        u,
        v,
        t_k,
        trials,
        gap: mean,
        std_error: (var / n).sqrt(),
        bound: correlation_bound(g.odd_girth(), t_k)?,
        indicator_violations: acc.indicator,
        selection_violations: acc.selection,
        flipping: acc.flipping,
        potential: acc.potential,
        badly_ordered_potential: acc.badly,
        max_potential_paths: acc.max_paths,
    })
}

/// `m(s) = (e^{-s} + s - 1) / 2`, the solution of `m' = s/2 - m`, `m(0) = 0`.
pub fn hardness_curve(s: f64) -> f64 {
    ((-s).exp() + s - 1.0) / 2.0
}

/// Online algorithm run in the trajectory experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum HardnessAlgorithm {
    /// Accept whenever the chosen partner has arrived and is free.
    #[default]
    Greedy,
    /// The two-phase scheme with switch time `t`.
    TwoPhase { t: f64 },
}

/// One row of the trajectory: averages after `t` arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub mean_matched: f64,
    pub curve: f64,
    pub q_frequency: f64,
}

/// One-step drift aggregated over a range of steps, restricted to `Q_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBucket {
    pub t_start: usize,
    pub t_end: usize,
    pub samples: u64,
    /// Mean of `M(t+1) - M(t)`.
    pub mean_step: f64,
    /// Mean of `(1 + n^{-1/3})(t/2n - M(t)/n)`.
    pub mean_bound: f64,
    /// Standard error of the mean of `step - bound`.
    pub std_error: f64,
}

impl DriftBucket {
    pub fn within_bound(&self, sigmas: f64) -> bool {
        self.samples == 0 || self.mean_step <= self.mean_bound + sigmas * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub n: usize,
    pub trials: u64,
    pub algorithm: HardnessAlgorithm,
    pub points: Vec<TrajectoryPoint>,
    pub drift: Vec<DriftBucket>,
    pub final_mean: f64,
    pub final_std_error: f64,
    /// Per trial, the first step at which `Q_t` fails (`2n + 1` if never).
    pub first_q_failure: Vec<usize>,
}

impl TrajectoryReport {
    /// Fraction of trials in which `Q_s` holds for every `s <= t`.
    pub fn q_holds_through(&self, t: usize) -> f64 {
        self.first_q_failure.iter().filter(|&&f| f > t).count() as f64 / self.trials as f64
    }

    /// Largest `|mean M(t)/n - m(t/n)|` over the trajectory.
    pub fn max_deviation(&self) -> f64 {
        self.points.iter().map(|p| (p.mean_matched - p.curve).abs()).fold(0.0, f64::max)
    }
}

/// `|L \ L_t|, |R \ R_t| <= (1 + n^{-1/3})(2n - t)/2`.
pub fn balance_event(n: usize, t: usize, left_remaining: usize, right_remaining: usize) -> bool {
    let cap = (1.0 + (n as f64).powf(-1.0 / 3.0)) * (2 * n - t) as f64 / 2.0;
    left_remaining as f64 <= cap && right_remaining as f64 <= cap
}

/// Matching size after each arrival, plus the side of each arrival.
fn greedy_trajectory<R: Rng>(n: usize, rng: &mut R) -> (Vec<usize>, Vec<bool>) {
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.shuffle(rng);
    let mut arrived = vec![false; 2 * n];
    let mut matched = vec![false; 2 * n];
    let mut sizes = Vec::with_capacity(2 * n + 1);
    sizes.push(0);
    let mut size = 0;
    for &w in &order {
        arrived[w] = true;
        let offset = if w < n { n } else { 0 };
        let partner = offset + rng.gen_range(0..n);
        if arrived[partner] && !matched[partner] {
            matched[partner] = true;
            matched[w] = true;
            size += 1;
        }
        sizes.push(size);
    }
    (sizes, order.iter().map(|&w| w < n).collect())
}

fn scheme_trajectory<R: Rng>(n: usize, tp: &crate::two_phase::TwoPhase<'_>, rng: &mut R) -> (Vec<usize>, Vec<bool>) {
    let s = tp.sampler().sample(rng);
    let coins = Coins::draw(2 * n, rng);
    let m = tp.run(&s, &coins);
    let order = crate::arrival::arrival_order(&s.time);
    let mut sizes = Vec::with_capacity(2 * n + 1);
    sizes.push(0);
    let mut size = 0;
    for &w in &order {
        // Each acceptance happens at its proposer's arrival.
        size += m.accepted.iter().filter(|a| a.proposer == Some(w)).count();
        sizes.push(size);
    }
    (sizes, order.iter().map(|&w| w < n).collect())
}

#[derive(Debug, Clone)]
struct TrajAcc {
    trials: u64,
    /// Sums of matching sizes after each step.
    sum: Vec<u64>,
    sum_final_sq: u64,
    q_count: Vec<u64>,
    drift_n: Vec<u64>,
    /// Per bucket, integer sums of `step`, `k = t - 2M(t)`, `step^2`,
    /// `step k` and `k^2`; the bound is `slack k / 2n`.
    drift_step: Vec<i64>,
    drift_k: Vec<i64>,
    drift_step_sq: Vec<i64>,
    drift_step_k: Vec<i64>,
    drift_k_sq: Vec<i64>,
    first_failure: Vec<(u64, usize)>,
}

impl TrajAcc {
    fn new(n: usize, buckets: usize) -> Self {
        TrajAcc {
            trials: 0,
            sum: vec![0; 2 * n + 1],
            sum_final_sq: 0,
            q_count: vec![0; 2 * n + 1],
            drift_n: vec![0; buckets],
            drift_step: vec![0; buckets],
            drift_k: vec![0; buckets],
            drift_step_sq: vec![0; buckets],
            drift_step_k: vec![0; buckets],
            drift_k_sq: vec![0; buckets],
            first_failure: Vec::new(),
        }
    }

    fn merge(mut self, o: TrajAcc) -> TrajAcc {
        self.trials += o.trials;
        self.sum_final_sq += o.sum_final_sq;
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.q_count.iter_mut().zip(&o.q_count) {
            *a += b;
        }
        for i in 0..self.drift_n.len() {
            self.drift_n[i] += o.drift_n[i];
            self.drift_step[i] += o.drift_step[i];
            self.drift_k[i] += o.drift_k[i];
            self.drift_step_sq[i] += o.drift_step_sq[i];
            self.drift_step_k[i] += o.drift_step_k[i];
            self.drift_k_sq[i] += o.drift_k_sq[i];
        }
        self.first_failure.extend(o.first_failure);
        self
    }
}

/// Number of drift buckets over `t = 0..2n`.
pub const DRIFT_BUCKETS: usize = 20;

/// Runs the round-based arrival process on `K_{n,n}` with `x = 1/n`: the
/// `2n` vertices arrive in uniformly random order and each picks a uniform
/// partner on the other side.
pub fn hardness_trajectory(n: usize, algorithm: HardnessAlgorithm, trials: u64, key: StreamKey, exec: Exec) -> Result<TrajectoryReport> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidParameter("n and trials must be positive".into()));
    }
    let graph;
    let two_phase = match algorithm {
        HardnessAlgorithm::Greedy => None,
        HardnessAlgorithm::TwoPhase { t } => {
            graph = crate::graph::Family::CompleteBipartite { n }.generate()?;
            Some(crate::two_phase::TwoPhase::new(&graph, crate::two_phase::PruneParams::new(t)?)?)
        }
    };
    let steps = 2 * n;
    let bucket_of = |t: usize| (t * DRIFT_BUCKETS / steps).min(DRIFT_BUCKETS - 1);
    let slack = 1.0 + (n as f64).powf(-1.0 / 3.0);
    let acc = fold_trials(
        exec,
        trials,
        || TrajAcc::new(n, DRIFT_BUCKETS),
        |acc, trial| {
            let mut rng = key.child(trial).stream();
            let (sizes, left) = match &two_phase {
                None => greedy_trajectory(n, &mut rng),
                Some(tp) => scheme_trajectory(n, tp, &mut rng),
            };
            acc.trials += 1;
            let (mut l_arrived, mut r_arrived) = (0usize, 0usize);
            let mut first_failure = steps + 1;
            for t in 0..=steps {
                acc.sum[t] += sizes[t] as u64;
                let q = balance_event(n, t, n - l_arrived, n - r_arrived);
                if q {
                    acc.q_count[t] += 1;
                    if t < steps {
                        let b = bucket_of(t);
                        let step = (sizes[t + 1] - sizes[t]) as i64;
                        let k = t as i64 - 2 * sizes[t] as i64;
                        acc.drift_n[b] += 1;
                        acc.drift_step[b] += step;
                        acc.drift_k[b] += k;
                        acc.drift_step_sq[b] += step * step;
                        acc.drift_step_k[b] += step * k;
                        acc.drift_k_sq[b] += k * k;
                    }
                } else if first_failure > steps {
                    first_failure = t;
                }
                if t < steps {
                    if left[t] {
                        l_arrived += 1;
                    } else {
                        r_arrived += 1;
                    }
                }
            }
            acc.sum_final_sq += (sizes[steps] * sizes[steps]) as u64;
            acc.first_failure.push((trial, first_failure));
        },
        TrajAcc::merge,
    );
    let tr = acc.trials as f64;
    let points = (0..=steps)
        .map(|t| TrajectoryPoint {
            t,
            mean_matched: acc.sum[t] as f64 / n as f64 / tr,
            curve: hardness_curve(t as f64 / n as f64),
            q_frequency: acc.q_count[t] as f64 / tr,
        })
        .collect();
    let drift = (0..DRIFT_BUCKETS)
        .map(|b| {
            let k = acc.drift_n[b] as f64;
            let c = slack / (2.0 * n as f64);
            let (mean_step, mean_bound) = if k > 0.0 { (acc.drift_step[b] as f64 / k, c * acc.drift_k[b] as f64 / k) } else { (0.0, 0.0) };
            let mean_diff = mean_step - mean_bound;
            let diff_sq = acc.drift_step_sq[b] as f64 - 2.0 * c * acc.drift_step_k[b] as f64 + c * c * acc.drift_k_sq[b] as f64;
            let var = if k > 1.0 { ((diff_sq - k * mean_diff * mean_diff) / (k - 1.0)).max(0.0) } else { 0.0 };
            DriftBucket {
                t_start: (b * steps).div_ceil(DRIFT_BUCKETS),
                t_end: ((b + 1) * steps).div_ceil(DRIFT_BUCKETS),
                samples: acc.drift_n[b],
                mean_step,
                mean_bound,
                std_error: if k > 0.0 { (var / k).sqrt() } else { 0.0 },
            }
        })
        .collect();
    let final_mean = acc.sum[steps] as f64 / n as f64 / tr;
    let final_sq = acc.sum_final_sq as f64 / (n * n) as f64;
    let final_var = if acc.trials > 1 { ((final_sq - tr * final_mean * final_mean) / (tr - 1.0)).max(0.0) } else { 0.0 };
    let mut failures = acc.first_failure;
    failures.sort_unstable();
    Ok(TrajectoryReport {
        n,
        trials,
        algorithm,
        points,
        drift,
        final_mean,
        final_std_error: (final_var / tr).sqrt(),
        first_q_failure: failures.into_iter().map(|(_, f)| f).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;
    use crate::recursive::RecursiveParams;
    use crate::selection::SelectionFunction;

    fn scheme(g: &Graph) -> (RecursiveVertex<'_>, EstimateTable) {
        let c = SelectionFunction::vertex(g.odd_girth()).unwrap();
        let s = RecursiveVertex::new(g, c, RecursiveParams { phases: 8, delta: 0.0, samples: 300 }).unwrap();
        let t = s.build_table(StreamKey::new(1), Exec::Auto).unwrap();
        (s, t)
    }

    fn sample(g: &Graph, choice: Vec<Option<usize>>, time: Vec<f64>) -> VertexArrivals {
        assert_eq!(choice.len(), g.vertex_count());
        VertexArrivals { choice, time }
    }

    #[test]
    fn pentagon_potential_path() {
        // Cycle 0-1-2-3-4-0 with u = 2, v = 1, v2 = 0, v3 = 4, v4 = 3.
        let g = Family::OddCycle { g: 5 }.generate().unwrap();
        let s = sample(&g, vec![Some(1), Some(0), Some(3), Some(4), Some(0)], vec![0.1, 0.2, 0.9, 0.4, 0.3]);
        assert_eq!(detect_potential_path(&g, &s, 2, 1), Some(vec![1, 0, 4, 3]));
        assert!(check_badly_ordered(&s, &[1, 0, 4, 3], 2));
        let mut none = s.clone();
        none.choice[2] = None;
        assert_eq!(detect_potential_path(&g, &none, 2, 1), None);
    }

    #[test]
    fn badly_ordered_cases() {
        let s = VertexArrivals { choice: vec![None; 4], time: vec![0.1, 0.2, 0.5, 0.3] };
        assert!(check_badly_ordered(&s, &[0, 1], 2));
        assert!(check_badly_ordered(&s, &[1, 0], 2));
        assert!(!check_badly_ordered(&s, &[0, 2], 3));
        assert!(!check_badly_ordered(&s, &[0, 3, 1], 2));
    }

    #[test]
    fn bipartite_has_no_potential_path() {
        let g = Family::CompleteBipartite { n: 3 }.generate().unwrap();
        let sampler = crate::arrival::ArrivalSampler::new(&g).unwrap();
        let mut rng = StreamKey::new(2).stream();
        for _ in 0..20_000 {
            let s = sampler.sample(&mut rng);
            for e in g.edges() {
                assert!(potential_paths(&g, &s, e.u, e.v).is_empty());
                assert!(potential_paths(&g, &s, e.v, e.u).is_empty());
            }
        }
    }

    #[test]
    fn coupling_sanity() {
        let g = Family::OddCycle { g: 5 }.generate().unwrap();
        let (sch, tab) = scheme(&g);
        let mut rng = StreamKey::new(3).stream();
        for _ in 0..5000 {
            let s = sch.sampler().sample(&mut rng);
            let c = Coins::draw(5, &mut rng);
            let run = coupled_run(&sch, &tab, &s, &c, 0, 1, 0.6).unwrap();
            if s.time[1] > 0.6 {
                assert_eq!(run.usual, run.parallel);
            }
            let rep = flipping_report(&sch, &tab, &s, &c, &run);
            assert!(!rep.indicator_violation && !rep.selection_violation);
            assert!(rep.potential_path_count <= 1);
            if rep.flipping {
                assert!(rep.potential_path.is_some() && rep.badly_ordered);
            }
        }
        assert!(coupled_run(&sch, &tab, &sch.sampler().sample(&mut rng), &Coins::draw(5, &mut rng), 0, 0, 0.5).is_err());
    }

    #[test]
    fn single_edge_without_v_never_matches_u() {
        let g = Family::SingleEdge { x: 1.0 }.generate().unwrap();
        let (sch, tab) = scheme(&g);
        let est = correlation_gap(&sch, &tab, 0, 1, 0.5, 2000, StreamKey::new(4), Exec::Auto).unwrap();
        assert!(est.gap <= 0.0);
        assert_eq!(est.bound, 0.0);
    }

    #[test]
    fn bound_values() {
        let b = correlation_bound(OddGirth::Finite(5), 0.5).unwrap();
        assert!((b - 2.0 * 0.5f64.powi(4) / 120.0).abs() < 1e-15);
        assert_eq!(correlation_bound(OddGirth::Infinite, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn hardness_curve_matches_ode() {
        assert!((hardness_curve(2.0) - 0.567_667_641).abs() < 1e-9);
        // RK4 on m' = s/2 - m.
        let (mut s, mut m, h) = (0.0f64, 0.0f64, 1e-3);
        let f = |s: f64, m: f64| s / 2.0 - m;
        while s < 2.0 - 1e-12 {
            let k1 = f(s, m);
            let k2 = f(s + h / 2.0, m + h / 2.0 * k1);
            let k3 = f(s + h / 2.0, m + h / 2.0 * k2);
            let k4 = f(s + h, m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            s += h;
            assert!((m - hardness_curve(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn trajectory_shape_and_replay() {
        let a = hardness_trajectory(40, HardnessAlgorithm::Greedy, 30, StreamKey::new(5), Exec::Auto).unwrap();
        let b = hardness_trajectory(40, HardnessAlgorithm::Greedy, 30, StreamKey::new(5), Exec::Sequential).unwrap();
        assert_eq!(a.points.len(), 81);
        assert_eq!(a.points[0].mean_matched, 0.0);
        assert_eq!(a.first_q_failure.len(), 30);
        assert_eq!(a, b);
        assert!(a.points.windows(2).all(|w| w[1].mean_matched >= w[0].mean_matched));
        let tp = hardness_trajectory(20, HardnessAlgorithm::TwoPhase { t: 0.5 }, 5, StreamKey::new(5), Exec::Auto).unwrap();
        assert!(tp.final_mean <= 1.0);
    }
}

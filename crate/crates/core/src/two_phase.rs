//! The two-phase scheme for general graphs.
//!
//! Every active edge is first pruned: it survives with probability
//! `a_t(x_e)`. Proposals arriving before the switch time `t` then run the
//! online contention resolution of Ezra et al. on the pruned instance,
//! and later proposals are accepted greedily.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::arrival::{arrival_order, arrives_before, ArrivalSampler, Coins, VertexArrivals};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::bisect;
use crate::recursive::Matching;

/// `a_t(x)`, the probability that an active edge survives pruning.
pub fn prune_factor(x: f64, t: f64) -> f64 {
    let p = 3.0 + 6.0 * t + 4.0 * t * t + 2.0 * t * t * t;
    p / (p + 2.0 * x * (1.0 - t) * (1.0 + 3.0 * t + t * t))
}

/// `f_t(x) = x a_t(x)`.
pub fn survival_prob(x: f64, t: f64) -> f64 {
    x * prune_factor(x, t)
}

/// Rational form of `f_t(x)` after cancelling the common factor.
/// Undefined at `t = 1`, where numerator and denominator both vanish.
pub fn survival_prob_rational(x: f64, t: f64) -> f64 {
    let (t2, t3, t5) = (t * t, t * t * t, t.powi(5));
    x * (3.0 + 2.0 * t5 - 5.0 * t2) / (3.0 + 2.0 * t5 * (1.0 - x) + 2.0 * x + 10.0 * t3 * x - 5.0 * t2 * (1.0 + 2.0 * x))
}

/// `4t^6 + 16t^5 + 100t^4 + 180t^3 + 80t^2 - 4t - 1`.
pub fn t0_polynomial(t: f64) -> f64 {
    ((((((4.0 * t + 16.0) * t + 100.0) * t + 180.0) * t + 80.0) * t - 4.0) * t) - 1.0
}

/// The root of [`t0_polynomial`] in `(0, 1)`, about 0.119.
pub fn find_t0() -> f64 {
    assert!(t0_polynomial(0.0) < 0.0 && t0_polynomial(1.0) > 0.0);
    bisect(t0_polynomial, 0.0, 1.0, 1e-15).expect("sign change on (0, 1)")
}

/// `(16 + 5t^2 - 10t^3 + 4t^5) / 30`.
pub fn guarantee_poly(t: f64) -> f64 {
    (16.0 + 5.0 * t * t - 10.0 * t.powi(3) + 4.0 * t.powi(5)) / 30.0
}

/// Switch time of the two-phase scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    pub t: f64,
}

impl PruneParams {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("t must lie in [0, 1], got {t}")));
        }
        Ok(PruneParams { t })
    }

    /// Uses the threshold `t0`.
    pub fn at_t0() -> Self {
        PruneParams { t: find_t0() }
    }

    pub fn t0(&self) -> f64 {
        find_t0()
    }
}

/// The two-phase scheme on a fixed instance.
#[derive(Debug, Clone)]
pub struct TwoPhase<'g> {
    graph: &'g Graph,
    sampler: ArrivalSampler,
    t: f64,
    prune: Vec<f64>,
    survive: Vec<f64>,
}

impl<'g> TwoPhase<'g> {
    pub fn new(graph: &'g Graph, params: PruneParams) -> Result<Self> {
        let params = PruneParams::new(params.t)?;
        if !graph.is_one_regular() {
            log::warn!("fractional matching is not 1-regular; the two-phase guarantee does not apply");
        }
        let prune: Vec<f64> = graph.edges().iter().map(|e| prune_factor(e.x, params.t)).collect();
        let survive = graph.edges().iter().zip(&prune).map(|(e, a)| e.x * a).collect();
        Ok(TwoPhase { graph, sampler: ArrivalSampler::new(graph)?, t: params.t, prune, survive })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn sampler(&self) -> &ArrivalSampler {
        &self.sampler
    }

    /// `b_{u,v}`: sums `f_t(x_{u,w})` over neighbors `w` of `u` that
    /// arrived before `v`.
    pub fn ocrs_probability(&self, s: &VertexArrivals, u: usize, v: usize) -> f64 {
        let sum: f64 = self
            .graph
            .neighbors(u)
            .iter()
            .filter(|&&(w, _)| arrives_before(&s.time, w, v))
            .map(|&(_, e)| self.survive[e])
            .sum();
        let denom = 2.0 - sum;
        assert!((1.0 - 1e-9..=2.0).contains(&denom), "OCRS denominator {denom} outside [1, 2]");
        1.0 / denom.max(1.0)
    }

    /// Runs the scheme. The proposer `v` uses `coins.a[v]` for the pruning
    /// bit and `coins.b[v]` for the phase-one bit.
    pub fn run(&self, s: &VertexArrivals, coins: &Coins) -> Matching {
        let mut m = Matching::empty(self.graph.vertex_count());
        for v in arrival_order(&s.time) {
            let Some(u) = s.choice[v] else { continue };
            if !arrives_before(&s.time, u, v) || m.is_matched(u) {
                continue;
            }
            let e = self.graph.edge_between(u, v).expect("choice is a neighbor");
            if coins.a[v] >= self.prune[e] {
                continue;
            }
            let y = s.time[v];
            if y < self.t && coins.b[v] >= self.ocrs_probability(s, u, v) {
                continue;
            }
            m.accept(self.graph, e, Some(v), y);
        }
        m
    }
}

/// Greedy: accept every active edge whose target is free.
pub fn run_greedy(g: &Graph, s: &VertexArrivals) -> Matching {
    let mut m = Matching::empty(g.vertex_count());
    for v in arrival_order(&s.time) {
        let Some(u) = s.choice[v] else { continue };
        if arrives_before(&s.time, u, v) && !m.is_matched(u) {
            m.accept(g, g.edge_between(u, v).expect("choice is a neighbor"), Some(v), s.time[v]);
        }
    }
    m
}

/// Prune-greedy: accept a free target when a `3/(3+2x)` bit comes up.
pub fn run_prune_greedy(g: &Graph, s: &VertexArrivals, coins: &Coins) -> Matching {
    let mut m = Matching::empty(g.vertex_count());
    for v in arrival_order(&s.time) {
        let Some(u) = s.choice[v] else { continue };
        if !arrives_before(&s.time, u, v) || m.is_matched(u) {
            continue;
        }
        let e = g.edge_between(u, v).expect("choice is a neighbor");
        if coins.a[v] < 3.0 / (3.0 + 2.0 * g.edge(e).x) {
            m.accept(g, e, Some(v), s.time[v]);
        }
    }
    m
}

/// The vertex-arrival OCRS of Ezra et al. with `b = 1/(2 - sum x)`.
pub fn run_pure_ocrs(g: &Graph, s: &VertexArrivals, coins: &Coins) -> Matching {
    let mut m = Matching::empty(g.vertex_count());
    for v in arrival_order(&s.time) {
        let Some(u) = s.choice[v] else { continue };
        if !arrives_before(&s.time, u, v) || m.is_matched(u) {
            continue;
        }
        let e = g.edge_between(u, v).expect("choice is a neighbor");
        // Same coin layout as the two-phase scheme, whose pruning bit
        // always passes at t = 1.
        if coins.a[v] >= 1.0 {
            continue;
        }
        let sum: f64 = g.neighbors(u).iter().filter(|&&(w, _)| arrives_before(&s.time, w, v)).map(|&(_, f)| g.edge(f).x).sum();
        if coins.b[v] < 1.0 / (2.0 - sum) {
            m.accept(g, e, Some(v), s.time[v]);
        }
    }
    m
}

fn two_values_side(fx: f64, x: f64, y: f64, t: f64) -> f64 {
    let k = 3.0 + 2.0 * t.powi(5) - 5.0 * t * t;
    fx * (1.0 / 3.0 + t.powi(3) / 6.0 - t * t / 2.0 - (2.0 - 2.0 * x - y) * k / 60.0)
}

/// Left side minus right side of the two-values inequality at `(x, y)`.
pub fn two_values_excess(x: f64, y: f64, t: f64) -> f64 {
    let k = 3.0 + 2.0 * t.powi(5) - 5.0 * t * t;
    let lhs = two_values_side(survival_prob(x, t), x, y, t) + two_values_side(survival_prob(y, t), y, x, t);
    let rhs = (1.0 / 3.0 + t.powi(3) / 6.0 - t * t / 2.0 - k / 30.0) * (x + y);
    lhs - rhs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoValuesReport {
    pub t: f64,
    pub grid: usize,
    /// Largest `lhs - rhs` over the grid.
    pub max_excess: f64,
    /// Grid points with `lhs - rhs > 1e-10`.
    pub violations: Vec<(f64, f64, f64)>,
}

impl TwoValuesReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const TWO_VALUES_TOL: f64 = 1e-10;

/// Evaluates the two-values inequality on a `grid x grid` lattice of `[0,1]^2`.
pub fn check_two_values_inequality(t: f64, grid: usize) -> Result<TwoValuesReport> {
    if grid < 2 {
        return Err(Error::InvalidParameter("grid must be at least 2".into()));
    }
    let step = 1.0 / (grid - 1) as f64;
    let mut report = TwoValuesReport { t, grid, max_excess: f64::NEG_INFINITY, violations: Vec::new() };
    for i in 0..grid {
        for j in 0..grid {
            let (x, y) = (i as f64 * step, j as f64 * step);
            let d = two_values_excess(x, y, t);
            report.max_excess = report.max_excess.max(d);
            if d > TWO_VALUES_TOL {
                report.violations.push((x, y, d));
            }
        }
    }
    Ok(report)
}

/// Dense polynomial in `y`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn identity() -> Self {
        Polynomial(vec![0.0, 1.0])
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    /// `y -> integral of self from a to y`.
    pub fn integral_from(&self, a: f64) -> Polynomial {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0.0);
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        let mut p = Polynomial(out);
        let base = p.eval(a);
        p.0[0] -= base;
        p
    }

    pub fn add_scaled(&mut self, other: &Polynomial, scale: f64) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn definite(&self, a: f64, b: f64) -> f64 {
        self.integral_from(a).eval(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    pub fn for_level(ell: usize) -> Direction {
        if ell % 2 == 0 {
            Direction::Lower
        } else {
            Direction::Upper
        }
    }
}

pub const MAX_RECURSION_LEVEL: usize = 4;

/// Evaluator for the recursive lower and upper bounds on
/// `E[M_{u0->u1}(y) | Y_{u0} = y] / f(x_{u0,u1})`, `y in (t, 1]`.
///
/// The bounds are polynomials in `y`, so the integrals are computed
/// exactly and memoized by deleted-vertex set, directed pair and level.
#[derive(Debug, Clone)]
pub struct RecursionBounds<'g> {
    graph: &'g Graph,
    t: f64,
    survive: Vec<f64>,
    memo: HashMap<(Vec<usize>, usize, usize, usize), Polynomial>,
}

impl<'g> RecursionBounds<'g> {
    pub fn new(graph: &'g Graph, t: f64) -> Result<Self> {
        PruneParams::new(t)?;
        let survive = graph.edges().iter().map(|e| survival_prob(e.x, t)).collect();
        Ok(RecursionBounds { graph, t, survive, memo: HashMap::new() })
    }

    /// Level-`ell` bound for the pair `u0 -> u1` on the full graph.
    pub fn bound(&mut self, u0: usize, u1: usize, ell: usize, direction: Direction) -> Result<Polynomial> {
        if ell == 0 || ell > MAX_RECURSION_LEVEL {
            return Err(Error::InvalidParameter(format!("level must lie in 1..={MAX_RECURSION_LEVEL}, got {ell}")));
        }
        if Direction::for_level(ell) != direction {
            return Err(Error::InvalidParameter(format!(
                "level {ell} gives an {} bound",
                if ell % 2 == 0 { "lower" } else { "upper" }
            )));
        }
        if self.graph.edge_between(u0, u1).is_none() {
            return Err(Error::InvalidParameter(format!("({u0}, {u1}) is not an edge")));
        }
        Ok(self.eval(&[], u0, u1, ell))
    }

    fn eval(&mut self, deleted: &[usize], u0: usize, u1: usize, ell: usize) -> Polynomial {
        if ell == 1 {
            return Polynomial::identity();
        }
        let key = (deleted.to_vec(), u0, u1, ell);
        if let Some(p) = self.memo.get(&key) {
            return p.clone();
        }
        let mut inner: Vec<usize> = deleted.to_vec();
        inner.push(u0);
        inner.sort_unstable();
        let t = self.t;
        let mut out = Polynomial::identity();
        let nbrs: Vec<(usize, usize)> = self.graph.neighbors(u1).to_vec();
        for (u2, e) in nbrs {
            if inner.binary_search(&u2).is_ok() {
                continue;
            }
            let mut sum = self.eval(&inner, u1, u2, ell - 1);
            sum.add_scaled(&self.eval(&inner, u2, u1, ell - 1), 1.0);
            let mut term = sum.integral_from(t);
            term.0[0] += t * t / 2.0;
            out.add_scaled(&term, -self.survive[e]);
        }
        self.memo.insert(key, out.clone());
        out
    }

    /// `a(x)(t^2/2 + integral over (t,1] of L(y,4) for both directions)`.
    pub fn guarantee_lower_bound(&mut self, edge: usize) -> Result<f64> {
        let e = *self.graph.edge(edge);
        let mut both = self.bound(e.u, e.v, 4, Direction::Lower)?;
        both.add_scaled(&self.bound(e.v, e.u, 4, Direction::Lower)?, 1.0);
        Ok(prune_factor(e.x, self.t) * (self.t * self.t / 2.0 + both.definite(self.t, 1.0)))
    }
}

/// Tabulates a level-`ell` bound at `points` evenly spaced values of `y`
/// in `(t, 1]`.
pub fn recursion_bound(
    g: &Graph,
    t: f64,
    pair: (usize, usize),
    ell: usize,
    direction: Direction,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    let p = RecursionBounds::new(g, t)?.bound(pair.0, pair.1, ell, direction)?;
    let points = points.max(1);
    Ok((1..=points)
        .map(|i| {
            let y = t + (1.0 - t) * i as f64 / points as f64;
            (y, p.eval(y))
        })
        .collect())
}

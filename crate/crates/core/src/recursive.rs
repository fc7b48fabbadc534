//! The recursive exact-selection scheme.
//!
//! Time is cut into `T` phases `I_j = (t_{j-1}, t_j]` with `t_j = j/T`. At
//! the start of phase `j + 1` the scheme estimates, for every directed pair
//! `v -> u` along an edge, the probability `S_{v->u}(j)` that `u` is still
//! unmatched at `t_j` given `Y_u < t_j < Y_v`. It does so by re-running
//! itself up to `t_j` on fresh randomness, using the estimates already
//! recorded for earlier phases. An active edge arriving at `y` in phase
//! `j + 1` is then accepted with probability
//! `min(c(y) / S(j) * (1 - delta) / (1 + 1/(C T y)), 1)` if its target is
//! still free, so that it is accepted with probability close to `c(y)`.
//!
//! The same machinery with per-edge estimates of "both endpoints free"
//! drives the edge-arrival variant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrival::{sort_by_arrival, ArrivalSampler, Coins, EdgeArrivals, TimeWindow, VertexArrivals};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::graph::{Graph, LOAD_TOL};
use crate::rng::StreamKey;
use crate::selection::SelectionFunction;

/// Smallest `Q >= (3 / (C delta^2)) ln(2 T n^2 / delta)`.
pub fn required_samples(floor: f64, delta: f64, phases: usize, n: usize) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::InvalidParameter(format!("floor C must lie in (0, 1], got {floor}")));
    }
    if phases == 0 || n == 0 {
        return Err(Error::InvalidParameter("T and n must be positive".into()));
    }
    let (t, n) = (phases as f64, n as f64);
    let q = 3.0 / (floor * delta * delta) * (2.0 * t * n * n / delta).ln();
    Ok(q.ceil().max(1.0) as usize)
}

/// `t_j = j / T`.
#[inline]
pub fn boundary(j: usize, phases: usize) -> f64 {
    j as f64 / phases as f64
}

/// The `j` with `y` in `I_{j+1} = (t_j, t_{j+1}]`; `y = 0` maps to 0.
#[inline]
pub fn phase_of(y: f64, phases: usize) -> usize {
    let mut j = ((y * phases as f64).ceil() as usize).saturating_sub(1).min(phases - 1);
    if j > 0 && y <= boundary(j, phases) {
        j -= 1;
    } else if j + 1 < phases && y > boundary(j + 1, phases) {
        j += 1;
    }
    j
}

/// Phase-indexed safety estimates, written once per phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    phases: usize,
    width: usize,
    floor_clamp: f64,
    values: Vec<f64>,
}

impl EstimateTable {
    /// A table with phase 0 set to 1 everywhere.
    pub fn new(phases: usize, width: usize, floor_clamp: f64) -> Self {
        EstimateTable { phases, width, floor_clamp, values: vec![1.0; width] }
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn floor_clamp(&self) -> f64 {
        self.floor_clamp
    }

    /// Number of phases recorded so far.
    pub fn filled(&self) -> usize {
        if self.width == 0 {
            self.phases
        } else {
            self.values.len() / self.width
        }
    }

    pub fn is_complete(&self) -> bool {
        self.filled() == self.phases
    }

    pub fn get(&self, phase: usize, key: usize) -> Result<f64> {
        if phase >= self.filled() {
            return Err(Error::MissingPhase { requested: phase, filled: self.filled() });
        }
        Ok(self.values[phase * self.width + key])
    }

    #[inline]
    fn at(&self, phase: usize, key: usize) -> f64 {
        self.values[phase * self.width + key]
    }

    pub fn phase(&self, phase: usize) -> Result<&[f64]> {
        if phase >= self.filled() {
            return Err(Error::MissingPhase { requested: phase, filled: self.filled() });
        }
        Ok(&self.values[phase * self.width..(phase + 1) * self.width])
    }

    /// Records the next phase, clamping every value into `[floor_clamp, 1]`.
    pub fn push_phase(&mut self, values: Vec<f64>) -> Result<()> {
        if self.is_complete() {
            return Err(Error::InvalidParameter("estimate table already complete".into()));
        }
        if values.len() != self.width {
            return Err(Error::InvalidParameter(format!("phase has {} entries, expected {}", values.len(), self.width)));
        }
        self.values.extend(values.into_iter().map(|s| s.clamp(self.floor_clamp, 1.0)));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursiveParams {
    /// Number of phases `T`.
    pub phases: usize,
    /// Sampling parameter; 0 gives the idealized scheme.
    pub delta: f64,
    /// Simulations per estimate `Q`.
    pub samples: usize,
}

impl RecursiveParams {
    fn check(&self) -> Result<()> {
        if self.phases == 0 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("Q must be at least 1".into()));
        }
        Ok(())
    }
}

/// An accepted edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accepted {
    pub edge: usize,
    /// Later-arriving endpoint; `None` under edge arrivals.
    pub proposer: Option<usize>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub accepted: Vec<Accepted>,
    /// Time each vertex got matched, `INFINITY` if never.
    pub matched_at: Vec<f64>,
}

impl Matching {
    pub fn empty(vertex_count: usize) -> Self {
        Matching { accepted: Vec::new(), matched_at: vec![f64::INFINITY; vertex_count] }
    }

    pub(crate) fn reset(&mut self, vertex_count: usize) {
        self.accepted.clear();
        self.matched_at.clear();
        self.matched_at.resize(vertex_count, f64::INFINITY);
    }

    pub fn is_matched(&self, v: usize) -> bool {
        self.matched_at[v].is_finite()
    }

    /// `M_v(y)`: matched at or before `y`.
    pub fn matched_by(&self, v: usize, y: f64) -> bool {
        self.matched_at[v] <= y
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.accepted.iter().any(|a| a.edge == edge)
    }

    pub(crate) fn accept(&mut self, g: &Graph, edge: usize, proposer: Option<usize>, time: f64) {
        let e = g.edge(edge);
        self.matched_at[e.u] = time;
        self.matched_at[e.v] = time;
        self.accepted.push(Accepted { edge, proposer, time });
    }

    /// No two accepted edges share a vertex.
    pub fn is_valid(&self, g: &Graph) -> bool {
        let mut seen = vec![false; g.vertex_count()];
        self.accepted.iter().all(|a| {
            let e = g.edge(a.edge);
            let ok = !seen[e.u] && !seen[e.v];
            seen[e.u] = true;
            seen[e.v] = true;
            ok
        })
    }
}

/// Index of the directed pair `proposer -> other endpoint` along `edge`.
#[inline]
pub fn arc_index(g: &Graph, edge: usize, proposer: usize) -> usize {
    2 * edge + usize::from(proposer == g.edge(edge).v)
}

/// Options for a partial vertex-arrival execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    /// Only arrivals with `Y <= until` are processed.
    pub until: f64,
    /// Vertex removed from the graph (the parallel execution on `G \ {v}`).
    pub excluded: Option<usize>,
}

impl Horizon {
    pub const FULL: Horizon = Horizon { until: 1.0, excluded: None };
}

/// Reusable buffers for nested simulations.
#[derive(Debug, Default)]
struct Workspace {
    sample: Option<VertexArrivals>,
    coins: Option<Coins>,
    order: Vec<usize>,
    matching: Option<Matching>,
}

/// The recursive scheme under vertex arrivals.
#[derive(Debug, Clone)]
pub struct RecursiveVertex<'g> {
    graph: &'g Graph,
    sampler: ArrivalSampler,
    selection: SelectionFunction,
    params: RecursiveParams,
}

impl<'g> RecursiveVertex<'g> {
    pub fn new(graph: &'g Graph, selection: SelectionFunction, params: RecursiveParams) -> Result<Self> {
        params.check()?;
        if !(selection.floor > 0.0) {
            return Err(Error::InvalidParameter("selection floor must be positive".into()));
        }
        Ok(RecursiveVertex { graph, sampler: ArrivalSampler::new(graph)?, selection, params })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn params(&self) -> RecursiveParams {
        self.params
    }

    pub fn selection(&self) -> &SelectionFunction {
        &self.selection
    }

    pub fn sampler(&self) -> &ArrivalSampler {
        &self.sampler
    }

    /// An empty table (phase 0 only) with the `C/2` clamp.
    pub fn new_table(&self) -> EstimateTable {
        EstimateTable::new(self.params.phases, 2 * self.graph.edge_count(), self.selection.floor / 2.0)
    }

    /// Bernoulli parameter for `A_{v->u}` when the pair arrives at `y`.
    #[inline]
    pub fn acceptance_probability(&self, table: &EstimateTable, arc: usize, y: f64) -> f64 {
        let t = self.params.phases;
        let s = table.at(phase_of(y, t), arc);
        let correction = (1.0 - self.params.delta) / (1.0 + 1.0 / (self.selection.floor * t as f64 * y));
        (self.selection.eval(y) / s * correction).min(1.0)
    }

    /// Runs the scheme on arrivals up to the horizon. Every phase reached
    /// must already be recorded in `table`.
    pub fn simulate(
        &self,
        s: &VertexArrivals,
        coins: &Coins,
        table: &EstimateTable,
        horizon: Horizon,
    ) -> Result<Matching> {
        let mut m = Matching::empty(self.graph.vertex_count());
        let mut order = Vec::new();
        self.check_table_covers(table, horizon.until)?;
        self.simulate_into(s, coins, table, horizon, &mut order, &mut m);
        Ok(m)
    }

    fn check_table_covers(&self, table: &EstimateTable, until: f64) -> Result<()> {
        let needed = phase_of(until.min(1.0), self.params.phases);
        if needed >= table.filled() {
            return Err(Error::MissingPhase { requested: needed, filled: table.filled() });
        }
        Ok(())
    }

    fn simulate_into(
        &self,
        s: &VertexArrivals,
        coins: &Coins,
        table: &EstimateTable,
        horizon: Horizon,
        order: &mut Vec<usize>,
        m: &mut Matching,
    ) {
        m.reset(self.graph.vertex_count());
        order.clear();
        order.extend((0..s.time.len()).filter(|&v| s.time[v] <= horizon.until && Some(v) != horizon.excluded));
        sort_by_arrival(order, &s.time);
        for &v in order.iter() {
            self.process_arrival(v, s, coins, table, horizon.excluded, m);
        }
    }

    #[inline]
    fn process_arrival(
        &self,
        v: usize,
        s: &VertexArrivals,
        coins: &Coins,
        table: &EstimateTable,
        excluded: Option<usize>,
        m: &mut Matching,
    ) {
        let Some(u) = s.choice[v] else { return };
        if Some(u) == excluded || !crate::arrival::arrives_before(&s.time, u, v) || m.is_matched(u) {
            return;
        }
        let edge = self.graph.edge_between(u, v).expect("choice is a neighbor");
        let y = s.time[v];
        if coins.a[v] < self.acceptance_probability(table, arc_index(self.graph, edge, v), y) {
            m.accept(self.graph, edge, Some(v), y);
        }
    }

    /// Full execution. Phases missing from `table` are estimated when the
    /// first arrival of that phase is reached, with streams keyed by `key`.
    pub fn run(
        &self,
        s: &VertexArrivals,
        coins: &Coins,
        table: &mut EstimateTable,
        key: StreamKey,
        exec: Exec,
    ) -> Result<Matching> {
        let mut m = Matching::empty(self.graph.vertex_count());
        for v in crate::arrival::arrival_order(&s.time) {
            let j = phase_of(s.time[v], self.params.phases);
            while table.filled() <= j {
                self.fill_next_phase(table, key, exec)?;
            }
            self.process_arrival(v, s, coins, table, None, &mut m);
        }
        Ok(m)
    }

    /// Monte-Carlo estimate of `E[S_u(t_j) | Y_u < t_j < Y_v]` for the pair
    /// `v -> u` given by `arc`, from `Q` runs up to `t_j`.
    pub fn estimate_safety(&self, table: &EstimateTable, phase: usize, arc: usize, key: StreamKey) -> Result<f64> {
        if phase == 0 {
            return Ok(1.0);
        }
        if phase > table.filled() {
            return Err(Error::MissingPhase { requested: phase - 1, filled: table.filled() });
        }
        let mut ws = Workspace::default();
        let safe = self.count_safe(table, phase, arc, key, self.params.samples, &mut ws);
        Ok((safe as f64 / self.params.samples as f64).max(table.floor_clamp()))
    }

    fn count_safe(
        &self,
        table: &EstimateTable,
        phase: usize,
        arc: usize,
        key: StreamKey,
        samples: usize,
        ws: &mut Workspace,
    ) -> usize {
        let e = self.graph.edge(arc / 2);
        // arc = 2e proposes from e.u; the target is the other endpoint.
        let (proposer, target) = if arc % 2 == 0 { (e.u, e.v) } else { (e.v, e.u) };
        let tj = boundary(phase, self.params.phases);
        let windows = [(target, TimeWindow::Before(tj)), (proposer, TimeWindow::After(tj))];
        let n = self.graph.vertex_count();
        let mut rng = key.stream();
        let sample = ws.sample.get_or_insert_with(|| VertexArrivals { choice: vec![None; n], time: vec![0.0; n] });
        let coins = ws.coins.get_or_insert_with(|| Coins { a: Vec::new(), b: Vec::new() });
        let m = ws.matching.get_or_insert_with(|| Matching::empty(n));
        let mut safe = 0;
        for _ in 0..samples {
            self.sampler.sample_into(&mut rng, &windows, sample);
            coins.redraw(n, &mut rng);
            self.simulate_into(sample, coins, table, Horizon { until: tj, excluded: None }, &mut ws.order, m);
            if !m.matched_by(target, tj) {
                safe += 1;
            }
        }
        safe
    }

    /// Estimates phase `table.filled()` for every directed pair.
    pub fn fill_next_phase(&self, table: &mut EstimateTable, key: StreamKey, exec: Exec) -> Result<()> {
        let j = table.filled();
        if j >= self.params.phases {
            return Err(Error::InvalidParameter("estimate table already complete".into()));
        }
        let phase_key = key.child(j as u64);
        let q = self.params.samples;
        let snapshot: &EstimateTable = table;
        let values = map_indexed(exec, snapshot.width(), |arc| {
            let mut ws = Workspace::default();
            let safe = self.count_safe(snapshot, j, arc, phase_key.child(arc as u64), q, &mut ws);
            safe as f64 / q as f64
        });
        table.push_phase(values)
    }

    /// All `T` phases of estimates.
    pub fn build_table(&self, key: StreamKey, exec: Exec) -> Result<EstimateTable> {
        let mut table = self.new_table();
        while !table.is_complete() {
            self.fill_next_phase(&mut table, key, exec)?;
        }
        Ok(table)
    }
}

/// The recursive scheme under edge arrivals, for the rank-1, general and
/// tree selection functions.
#[derive(Debug, Clone)]
pub struct RecursiveEdge<'g> {
    graph: &'g Graph,
    selection: SelectionFunction,
    params: RecursiveParams,
}

/// An active edge arriving at `time` with decision uniform `coin`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeEvent {
    time: f64,
    edge: usize,
    coin: f64,
}

impl<'g> RecursiveEdge<'g> {
    pub fn new(graph: &'g Graph, selection: SelectionFunction, params: RecursiveParams) -> Result<Self> {
        params.check()?;
        if !(selection.floor > 0.0) {
            return Err(Error::InvalidParameter("selection floor must be positive".into()));
        }
        Ok(RecursiveEdge { graph, selection, params })
    }

    pub fn params(&self) -> RecursiveParams {
        self.params
    }

    pub fn selection(&self) -> &SelectionFunction {
        &self.selection
    }

    pub fn new_table(&self) -> EstimateTable {
        EstimateTable::new(self.params.phases, self.graph.edge_count(), self.selection.floor / 2.0)
    }

    #[inline]
    pub fn acceptance_probability(&self, table: &EstimateTable, edge: usize, y: f64) -> f64 {
        let t = self.params.phases;
        let s = table.at(phase_of(y, t), edge);
        let correction = (1.0 - self.params.delta) / (1.0 + 1.0 / (self.selection.floor * t as f64 * y));
        (self.selection.eval(y) / s * correction).min(1.0)
    }

    fn process(&self, events: &[EdgeEvent], table: &EstimateTable, m: &mut Matching) {
        for ev in events {
            let e = self.graph.edge(ev.edge);
            if m.is_matched(e.u) || m.is_matched(e.v) {
                continue;
            }
            if ev.coin < self.acceptance_probability(table, ev.edge, ev.time) {
                m.accept(self.graph, ev.edge, None, ev.time);
            }
        }
    }

    /// Replays arrivals against a complete table.
    pub fn simulate(&self, s: &EdgeArrivals, coins: &Coins, table: &EstimateTable) -> Result<Matching> {
        if !table.is_complete() {
            return Err(Error::MissingPhase { requested: table.phases() - 1, filled: table.filled() });
        }
        let mut events = self.events(s, coins);
        events.sort_unstable_by(|a, b| a.time.total_cmp(&b.time).then(a.edge.cmp(&b.edge)));
        let mut m = Matching::empty(self.graph.vertex_count());
        self.process(&events, table, &mut m);
        Ok(m)
    }

    fn events(&self, s: &EdgeArrivals, coins: &Coins) -> Vec<EdgeEvent> {
        (0..self.graph.edge_count())
            .filter(|&e| s.active[e])
            .map(|e| EdgeEvent { time: s.time[e], edge: e, coin: coins.a[e] })
            .collect()
    }

    /// Full execution; missing phases are estimated on reaching them.
    pub fn run(
        &self,
        s: &EdgeArrivals,
        coins: &Coins,
        table: &mut EstimateTable,
        key: StreamKey,
        exec: Exec,
    ) -> Result<Matching> {
        let mut events = self.events(s, coins);
        events.sort_unstable_by(|a, b| a.time.total_cmp(&b.time).then(a.edge.cmp(&b.edge)));
        let mut m = Matching::empty(self.graph.vertex_count());
        for ev in &events {
            let j = phase_of(ev.time, self.params.phases);
            while table.filled() <= j {
                self.fill_next_phase(table, key, exec)?;
            }
            self.process(std::slice::from_ref(ev), table, &mut m);
        }
        Ok(m)
    }

    /// Estimate of `P[e feasible at t_j | Y_e > t_j]`.
    pub fn estimate_feasibility(&self, table: &EstimateTable, phase: usize, edge: usize, key: StreamKey) -> Result<f64> {
        if phase == 0 {
            return Ok(1.0);
        }
        if phase > table.filled() {
            return Err(Error::MissingPhase { requested: phase - 1, filled: table.filled() });
        }
        let free = self.count_feasible(table, phase, edge, key, self.params.samples);
        Ok((free as f64 / self.params.samples as f64).max(table.floor_clamp()))
    }

    fn count_feasible(&self, table: &EstimateTable, phase: usize, edge: usize, key: StreamKey, samples: usize) -> usize {
        let tj = boundary(phase, self.params.phases);
        let target = self.graph.edge(edge);
        let mut rng = key.stream();
        let mut events = Vec::new();
        let mut m = Matching::empty(self.graph.vertex_count());
        let mut free = 0;
        for _ in 0..samples {
            // Active and arrived by t_j has probability x t_j; the time is
            // then uniform on [0, t_j]. `edge` itself arrives after t_j.
            events.clear();
            for (f, e) in self.graph.edges().iter().enumerate() {
                if f != edge && rng.gen::<f64>() < e.x * tj {
                    events.push(EdgeEvent { time: rng.gen::<f64>() * tj, edge: f, coin: rng.gen() });
                }
            }
            events.sort_unstable_by(|a, b| a.time.total_cmp(&b.time).then(a.edge.cmp(&b.edge)));
            m.reset(self.graph.vertex_count());
            self.process(&events, table, &mut m);
            if !m.is_matched(target.u) && !m.is_matched(target.v) {
                free += 1;
            }
        }
        free
    }

    pub fn fill_next_phase(&self, table: &mut EstimateTable, key: StreamKey, exec: Exec) -> Result<()> {
        let j = table.filled();
        if j >= self.params.phases {
            return Err(Error::InvalidParameter("estimate table already complete".into()));
        }
        let phase_key = key.child(j as u64);
        let q = self.params.samples;
        let snapshot: &EstimateTable = table;
        let values = map_indexed(exec, snapshot.width(), |e| {
            self.count_feasible(snapshot, j, e, phase_key.child(e as u64), q) as f64 / q as f64
        });
        table.push_phase(values)
    }

    pub fn build_table(&self, key: StreamKey, exec: Exec) -> Result<EstimateTable> {
        let mut table = self.new_table();
        while !table.is_complete() {
            self.fill_next_phase(&mut table, key, exec)?;
        }
        Ok(table)
    }
}

/// Checks that `g` is a star whose values sum to 1 and returns its center.
pub fn unit_star_center(g: &Graph) -> Result<usize> {
    let bad = |m: String| Err(Error::InvalidParameter(m));
    if g.edge_count() == 0 {
        return bad("rank-1 closed form needs a non-empty star".into());
    }
    let center = if g.edge_count() == 1 {
        g.edge(0).u
    } else {
        let (a, b) = (g.edge(0), g.edge(1));
        if a.u == b.u || a.u == b.v {
            a.u
        } else {
            a.v
        }
    };
    if g.degree(center) != g.edge_count() {
        return bad("rank-1 closed form needs a star".into());
    }
    let total = g.load(center);
    if (total - 1.0).abs() > LOAD_TOL {
        return bad(format!("rank-1 closed form needs values summing to 1, got {total}"));
    }
    Ok(center)
}

/// Accepts the first active element at time `y` whose independent bit with
/// probability `exp(-y x_e)` comes up.
pub fn run_rank1_closed_form(g: &Graph, s: &EdgeArrivals, coins: &Coins) -> Result<Matching> {
    unit_star_center(g)?;
    let mut m = Matching::empty(g.vertex_count());
    let mut order: Vec<usize> = (0..g.edge_count()).filter(|&e| s.active[e]).collect();
    sort_by_arrival(&mut order, &s.time);
    for e in order {
        let y = s.time[e];
        if coins.a[e] < (-y * g.edge(e).x).exp() {
            m.accept(g, e, None, y);
            break;
        }
    }
    Ok(m)
}

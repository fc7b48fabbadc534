//! The arrival process: choices `F_v` and times `Y_v` for vertex arrivals,
//! independent activity and times `Y_e` for edge arrivals.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, LOAD_TOL};

/// Vertex-arrival realization.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexArrivals {
    /// `F_v`: chosen neighbor, or `None` for ⊥.
    pub choice: Vec<Option<usize>>,
    /// `Y_v`.
    pub time: Vec<f64>,
}

/// Edge-arrival realization.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeArrivals {
    pub active: Vec<bool>,
    /// `Y_e`.
    pub time: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalSample {
    Vertex(VertexArrivals),
    Edge(EdgeArrivals),
}

impl ArrivalSample {
    pub fn as_vertex(&self) -> Result<&VertexArrivals> {
        match self {
            ArrivalSample::Vertex(s) => Ok(s),
            ArrivalSample::Edge(_) => Err(Error::ModeMismatch { expected: "vertex" }),
        }
    }

    pub fn as_edge(&self) -> Result<&EdgeArrivals> {
        match self {
            ArrivalSample::Edge(s) => Ok(s),
            ArrivalSample::Vertex(_) => Err(Error::ModeMismatch { expected: "edge" }),
        }
    }
}

/// `(Y_a, a) < (Y_b, b)`: arrival order with ties broken by id.
#[inline]
pub fn arrives_before(time: &[f64], a: usize, b: usize) -> bool {
    match time[a].total_cmp(&time[b]) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a < b,
    }
}

/// Indices sorted by arrival time, ties by index.
pub fn arrival_order(time: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..time.len()).collect();
    sort_by_arrival(&mut order, time);
    order
}

pub(crate) fn sort_by_arrival(order: &mut [usize], time: &[f64]) {
    order.sort_unstable_by(|&a, &b| time[a].total_cmp(&time[b]).then(a.cmp(&b)));
}

/// Restricts the arrival time of one vertex (or edge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeWindow {
    /// Uniform on `[0, b)`.
    Before(f64),
    /// Uniform on `(b, 1]`.
    After(f64),
    /// Exactly this time.
    At(f64),
}

impl TimeWindow {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let r: f64 = rng.gen();
        match self {
            TimeWindow::Before(b) => r * b,
            // 1 - r lies in (0, 1], so the draw lies in (b, 1].
            TimeWindow::After(b) => b + (1.0 - r) * (1.0 - b),
            TimeWindow::At(y) => y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveEdge {
    pub edge: usize,
    /// The later-arriving endpoint.
    pub proposer: usize,
    /// The earlier endpoint.
    pub target: usize,
    /// `max(Y_u, Y_v)`.
    pub arrival: f64,
}

/// Precomputed categorical tables for drawing `F_v`.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    /// Per vertex: `(neighbor, cumulative x)`.
    cumulative: Vec<Vec<(usize, f64)>>,
}

impl ArrivalSampler {
    pub fn new(g: &Graph) -> Result<Self> {
        let cumulative = (0..g.vertex_count())
            .map(|v| {
                let mut acc = 0.0;
                let table: Vec<(usize, f64)> = g
                    .neighbors(v)
                    .iter()
                    .map(|&(w, e)| {
                        acc += g.edge(e).x;
                        (w, acc)
                    })
                    .collect();
                if acc > 1.0 + LOAD_TOL {
                    Err(Error::Overloaded { vertex: v, load: acc })
                } else {
                    Ok(table)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ArrivalSampler { cumulative })
    }

    pub fn vertex_count(&self) -> usize {
        self.cumulative.len()
    }

    #[inline]
    pub fn draw_choice<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Option<usize> {
        let r: f64 = rng.gen();
        self.cumulative[v].iter().find(|&&(_, c)| r < c).map(|&(w, _)| w)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VertexArrivals {
        self.sample_with(rng, &[])
    }

    /// Samples with some arrival times restricted, the rest uniform on `[0, 1]`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, windows: &[(usize, TimeWindow)]) -> VertexArrivals {
        let n = self.vertex_count();
        let mut out = VertexArrivals { choice: vec![None; n], time: vec![0.0; n] };
        self.sample_into(rng, windows, &mut out);
        out
    }

    /// Like [`sample_with`](Self::sample_with) but reuses `out`'s buffers.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, windows: &[(usize, TimeWindow)], out: &mut VertexArrivals) {
        let n = self.vertex_count();
        out.choice.resize(n, None);
        out.time.resize(n, 0.0);
        for v in 0..n {
            out.choice[v] = self.draw_choice(v, rng);
            out.time[v] = rng.gen();
        }
        for &(v, w) in windows {
            out.time[v] = w.draw(rng);
        }
    }
}

pub fn sample_vertex_arrivals<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<ArrivalSample> {
    Ok(ArrivalSample::Vertex(ArrivalSampler::new(g)?.sample(rng)))
}

pub fn sample_edge_arrivals<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> ArrivalSample {
    ArrivalSample::Edge(draw_edge_arrivals(g, rng, &[]))
}

pub fn draw_edge_arrivals<R: Rng + ?Sized>(g: &Graph, rng: &mut R, windows: &[(usize, TimeWindow)]) -> EdgeArrivals {
    let mut active = Vec::with_capacity(g.edge_count());
    let mut time = Vec::with_capacity(g.edge_count());
    for e in g.edges() {
        active.push(rng.gen::<f64>() < e.x);
        time.push(rng.gen::<f64>());
    }
    for &(e, w) in windows {
        time[e] = w.draw(rng);
    }
    EdgeArrivals { active, time }
}

/// Active edges of a vertex-arrival sample, in order of arrival.
pub fn active_edges(g: &Graph, s: &VertexArrivals) -> Vec<ActiveEdge> {
    let mut out = Vec::new();
    for v in arrival_order(&s.time) {
        if let Some(u) = s.choice[v] {
            if arrives_before(&s.time, u, v) {
                let edge = g.edge_between(u, v).expect("choice is a neighbor");
                out.push(ActiveEdge { edge, proposer: v, target: u, arrival: s.time[v] });
            }
        }
    }
    out
}

/// Per-vertex uniforms driving a scheme's independent Bernoulli draws.
///
/// Each proposer (vertex mode) or edge (edge mode) owns its uniforms, so two
/// executions sharing a `Coins` make identical decisions wherever they
/// face identical probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Coins {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Coins {
    pub fn draw<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Self {
        let mut c = Coins { a: Vec::with_capacity(count), b: Vec::with_capacity(count) };
        c.redraw(count, rng);
        c
    }

    pub fn redraw<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) {
        self.a.clear();
        self.b.clear();
        for _ in 0..count {
            self.a.push(rng.gen());
            self.b.push(rng.gen());
        }
    }
}

//! Graphs carrying a fractional matching, odd girth, and instance families.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Absolute tolerance for vertex-load checks.
pub const LOAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Smaller endpoint.
    pub u: usize,
    /// Larger endpoint.
    pub v: usize,
    pub x: f64,
}

impl Edge {
    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected simple graph with a value `x_e` in `[0, 1]` on every edge.
///
/// Immutable after construction. Edges are stored once as `(min, max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new<I>(vertex_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut seen = HashSet::new();
        let mut stored = Vec::new();
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (a, b, x) in edges {
            for w in [a, b] {
                if w >= vertex_count {
                    return Err(Error::VertexOutOfRange { vertex: w, vertex_count });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::EdgeValue { u: a, v: b, x });
            }
            let (u, v) = (a.min(b), a.max(b));
            if !seen.insert((u, v)) {
                return Err(Error::DuplicateEdge(u, v));
            }
            let id = stored.len();
            stored.push(Edge { u, v, x });
            adjacency[u].push((v, id));
            adjacency[v].push((u, id));
        }
        Ok(Graph { vertex_count, edges: stored, adjacency })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// `(neighbor, edge id)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let (short, other) = if self.adjacency[a].len() <= self.adjacency[b].len() { (a, b) } else { (b, a) };
        self.adjacency[short].iter().find(|&&(w, _)| w == other).map(|&(_, e)| e)
    }

    pub fn x(&self, a: usize, b: usize) -> f64 {
        self.edge_between(a, b).map_or(0.0, |e| self.edges[e].x)
    }

    /// `sum_{e in d(v)} x_e`.
    pub fn load(&self, v: usize) -> f64 {
        self.adjacency[v].iter().map(|&(_, e)| self.edges[e].x).sum()
    }

    pub fn validate_fractional_matching(&self) -> ValidationReport {
        let violations = (0..self.vertex_count)
            .filter_map(|v| {
                let load = self.load(v);
                (load > 1.0 + LOAD_TOL).then_some(Violation { vertex: v, load })
            })
            .collect();
        ValidationReport { violations }
    }

    pub fn is_one_regular(&self) -> bool {
        (0..self.vertex_count).all(|v| (self.load(v) - 1.0).abs() <= LOAD_TOL)
    }

    /// Support neighbors (edges with `x > 0`).
    fn support(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().filter(|&&(_, e)| self.edges[e].x > 0.0).map(|&(w, _)| w)
    }

    /// Two-colors the support graph; `None` if it has an odd cycle.
    pub fn two_coloring(&self) -> Option<Vec<u8>> {
        let mut color = vec![u8::MAX; self.vertex_count];
        let mut queue = VecDeque::new();
        for s in 0..self.vertex_count {
            if color[s] != u8::MAX {
                continue;
            }
            color[s] = 0;
            queue.push_back(s);
            while let Some(a) = queue.pop_front() {
                for b in self.support(a) {
                    if color[b] == u8::MAX {
                        color[b] = 1 - color[a];
                        queue.push_back(b);
                    } else if color[b] == color[a] {
                        return None;
                    }
                }
            }
        }
        Some(color)
    }

    /// Length of the shortest odd cycle of the support graph.
    ///
    /// BFS over (vertex, parity) from each start; the shortest odd closed
    /// walk through any vertex has the length of the shortest odd cycle.
    pub fn odd_girth(&self) -> OddGirth {
        let n = self.vertex_count;
        let mut best = usize::MAX;
        let mut dist = vec![[usize::MAX; 2]; n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            for d in dist.iter_mut() {
                *d = [usize::MAX; 2];
            }
            dist[s][0] = 0;
            queue.clear();
            queue.push_back((s, 0usize));
            while let Some((a, p)) = queue.pop_front() {
                let d = dist[a][p];
                if d + 1 >= best {
                    break;
                }
                for b in self.support(a) {
                    let q = 1 - p;
                    if dist[b][q] == usize::MAX {
                        dist[b][q] = d + 1;
                        queue.push_back((b, q));
                    }
                }
            }
            if dist[s][1] != usize::MAX {
                best = best.min(dist[s][1]);
            }
        }
        let girth = if best == usize::MAX { OddGirth::Infinite } else { OddGirth::Finite(best as u64) };
        debug_assert_eq!(girth.is_infinite(), self.two_coloring().is_some());
        girth
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            vertex_count: self.vertex_count,
            edges: self.edges.iter().map(|e| (e.u, e.v, e.x)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        Graph::new(file.vertex_count, file.edges)
    }
}

/// On-disk graph format: `{"vertex_count": n, "edges": [[u, v, x], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphFile {
    pub vertex_count: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub vertex: usize,
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Length of the shortest odd cycle, or `Infinite` for bipartite graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OddGirth {
    Finite(u64),
    Infinite,
}

impl OddGirth {
    pub fn finite(g: u64) -> Result<Self> {
        if g >= 3 && g % 2 == 1 {
            Ok(OddGirth::Finite(g))
        } else {
            Err(Error::InvalidGirth(g))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, OddGirth::Infinite)
    }

    pub(crate) fn check(self) -> Result<Self> {
        match self {
            OddGirth::Finite(g) => OddGirth::finite(g),
            OddGirth::Infinite => Ok(self),
        }
    }
}

impl fmt::Display for OddGirth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OddGirth::Finite(g) => write!(f, "{g}"),
            OddGirth::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for OddGirth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" | "bipartite" => Ok(OddGirth::Infinite),
            other => {
                let g: u64 = other.parse().map_err(|_| Error::InvalidParameter(format!("odd girth `{s}`")))?;
                OddGirth::finite(g)
            }
        }
    }
}

impl Serialize for OddGirth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for OddGirth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(g) => OddGirth::finite(g),
            Raw::Str(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Instance families used throughout the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    SingleEdge { x: f64 },
    /// Center 0 with `k` leaves, every edge valued `x`.
    Star { k: usize, x: f64 },
    /// Path with `edges` edges, every edge valued 1/2.
    Path { edges: usize },
    /// Uniform random recursive tree; `x_e = 1 / max(deg u, deg v)`.
    RandomTree { edges: usize, seed: u64 },
    /// Middle edge `(u_0, v_0)` plus `n` pendant edges on each side, all `1/(n+1)`.
    DoubleStar { n: usize },
    /// `K_{n,n}` with `x = 1/n`.
    CompleteBipartite { n: usize },
    /// `K_n` with `x = 1/(n-1)`.
    Complete { n: usize },
    /// Cycle of odd length `g` with `x = 1/2`.
    OddCycle { g: usize },
    /// Odd cycle `C_g` with every vertex replaced by `k` copies and every
    /// cycle edge by `K_{k,k}`; `x = 1/(2k)`. Odd girth `g`.
    CycleBlowup { g: usize, k: usize },
}

impl Family {
    pub fn generate(&self) -> Result<Graph> {
        let bad = |msg: String| Err(Error::InvalidFamily(msg));
        let g = match *self {
            Family::SingleEdge { x } => Graph::new(2, [(0, 1, x)])?,
            Family::Star { k, x } => {
                if k == 0 {
                    return bad("star needs k >= 1".into());
                }
                Graph::new(k + 1, (1..=k).map(|i| (0, i, x)))?
            }
            Family::Path { edges } => {
                if edges == 0 {
                    return bad("path needs at least one edge".into());
                }
                Graph::new(edges + 1, (0..edges).map(|i| (i, i + 1, 0.5)))?
            }
            Family::RandomTree { edges, seed } => {
                if edges == 0 {
                    return bad("tree needs at least one edge".into());
                }
                let mut rng = StreamKey::new(seed).purpose(Purpose::Generator).stream();
                let parent: Vec<usize> = (1..=edges).map(|i| rng.gen_range(0..i)).collect();
                let mut deg = vec![0usize; edges + 1];
                for (i, &p) in parent.iter().enumerate() {
                    deg[i + 1] += 1;
                    deg[p] += 1;
                }
                Graph::new(
                    edges + 1,
                    parent.iter().enumerate().map(|(i, &p)| (p, i + 1, 1.0 / deg[p].max(deg[i + 1]) as f64)),
                )?
            }
            Family::DoubleStar { n } => {
                if n == 0 {
                    return bad("double star needs n >= 1".into());
                }
                // u_0 = 0, v_0 = 1, u_i = 2i, v_i = 2i + 1.
                let x = 1.0 / (n + 1) as f64;
                let mut edges = vec![(0, 1, x)];
                for i in 1..=n {
                    edges.push((0, 2 * i, x));
                    edges.push((1, 2 * i + 1, x));
                }
                Graph::new(2 * n + 2, edges)?
            }
            Family::CompleteBipartite { n } => {
                if n == 0 {
                    return bad("complete bipartite needs n >= 1".into());
                }
                let x = 1.0 / n as f64;
                Graph::new(2 * n, (0..n).flat_map(|a| (0..n).map(move |b| (a, n + b, x))))?
            }
            Family::Complete { n } => {
                if n < 2 {
                    return bad("complete graph needs n >= 2".into());
                }
                let x = 1.0 / (n - 1) as f64;
                Graph::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b, x))))?
            }
            Family::OddCycle { g } => {
                if g < 3 || g % 2 == 0 {
                    return bad(format!("odd cycle needs odd length >= 3, got {g}"));
                }
                Graph::new(g, (0..g).map(|i| (i, (i + 1) % g, 0.5)))?
            }
            Family::CycleBlowup { g, k } => {
                if g < 3 || g % 2 == 0 {
                    return bad(format!("cycle blowup needs odd length >= 3, got {g}"));
                }
                if k == 0 {
                    return bad("cycle blowup needs k >= 1".into());
                }
                let x = 1.0 / (2 * k) as f64;
                let mut edges = Vec::new();
                for i in 0..g {
                    let j = (i + 1) % g;
                    for a in 0..k {
                        for b in 0..k {
                            edges.push((i * k + a, j * k + b, x));
                        }
                    }
                }
                Graph::new(g * k, edges)?
            }
        };
        let report = g.validate_fractional_matching();
        if let Some(v) = report.violations.first() {
            return Err(Error::Overloaded { vertex: v.vertex, load: v.load });
        }
        Ok(g)
    }

    /// Whether every generated instance of this family is 1-regular.
    pub fn is_one_regular(&self) -> bool {
        match *self {
            Family::SingleEdge { x } => x == 1.0,
            Family::Star { k, x } => k == 1 && x == 1.0,
            Family::CompleteBipartite { .. }
            | Family::Complete { .. }
            | Family::OddCycle { .. }
            | Family::CycleBlowup { .. } => true,
            Family::Path { .. } | Family::RandomTree { .. } | Family::DoubleStar { .. } => false,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Parses `name` or `name:key=value,key=value`, e.g. `star:k=4,x=0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut obj = serde_json::Map::new();
        obj.insert("family".into(), serde_json::Value::String(name.trim().replace('-', "_")));
        for kv in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidFamily(format!("parameter `{kv}` is not key=value")))?;
            let value: serde_json::Value = serde_json::from_str(v.trim())
                .map_err(|_| Error::InvalidFamily(format!("parameter `{k}` has non-numeric value `{v}`")))?;
            obj.insert(k.trim().to_string(), value);
        }
        serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| Error::InvalidFamily(format!("{s}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(f: Family) -> Graph {
        f.generate().unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(gen(Family::Star { k: 3, x: 1.0 / 3.0 }).validate_fractional_matching().is_ok());
        assert!(gen(Family::SingleEdge { x: 1.0 }).validate_fractional_matching().is_ok());
        let tri = Graph::new(3, [(0, 1, 0.6), (1, 2, 0.6), (0, 2, 0.6)]).unwrap();
        let report = tri.validate_fractional_matching();
        assert_eq!(report.violations.len(), 3);
        for v in &report.violations {
            assert!((v.load - 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn one_regular_examples() {
        assert!(gen(Family::CompleteBipartite { n: 5 }).is_one_regular());
        assert!(gen(Family::Complete { n: 7 }).is_one_regular());
        assert!(!gen(Family::SingleEdge { x: 0.5 }).is_one_regular());
    }

    #[test]
    fn odd_girth_examples() {
        assert_eq!(gen(Family::OddCycle { g: 5 }).odd_girth(), OddGirth::Finite(5));
        assert_eq!(gen(Family::Complete { n: 4 }).odd_girth(), OddGirth::Finite(3));
        assert_eq!(gen(Family::CompleteBipartite { n: 3 }).odd_girth(), OddGirth::Infinite);
        for g in [3, 5, 7, 9, 11, 13] {
            assert_eq!(gen(Family::OddCycle { g }).odd_girth(), OddGirth::Finite(g as u64));
            assert_eq!(gen(Family::CycleBlowup { g, k: 2 }).odd_girth(), OddGirth::Finite(g as u64));
        }
    }

    #[test]
    fn zero_edges_ignored_by_odd_girth() {
        let g = Graph::new(3, [(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.0)]).unwrap();
        assert_eq!(g.odd_girth(), OddGirth::Infinite);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn family_examples() {
        let star = gen(Family::Star { k: 4, x: 0.25 });
        assert_eq!(star.edge_count(), 4);
        assert!(star.edges().iter().all(|e| e.x == 0.25));
        let kb = gen(Family::CompleteBipartite { n: 3 });
        assert_eq!(kb.edge_count(), 9);
        assert!(kb.edges().iter().all(|e| (e.x - 1.0 / 3.0).abs() < 1e-15));
        let ds = gen(Family::DoubleStar { n: 2 });
        assert_eq!(ds.edge_count(), 5);
        assert!(ds.edge_between(0, 1).is_some());
        for i in 1..=2 {
            assert!(ds.edge_between(0, 2 * i).is_some());
            assert!(ds.edge_between(1, 2 * i + 1).is_some());
        }
        assert!(ds.edges().iter().all(|e| (e.x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn structural_errors() {
        assert_eq!(Graph::new(2, [(0, 0, 0.5)]), Err(Error::SelfLoop(0)));
        assert_eq!(Graph::new(2, [(0, 1, 0.5), (1, 0, 0.2)]), Err(Error::DuplicateEdge(0, 1)));
        assert!(matches!(Graph::new(2, [(0, 2, 0.5)]), Err(Error::VertexOutOfRange { .. })));
        assert!(matches!(Graph::new(2, [(0, 1, 1.5)]), Err(Error::EdgeValue { .. })));
        assert!(matches!(Graph::new(2, [(0, 1, f64::NAN)]), Err(Error::EdgeValue { .. })));
        assert!(matches!(Family::OddCycle { g: 4 }.generate(), Err(Error::InvalidFamily(_))));
    }

    #[test]
    fn family_parsing() {
        assert_eq!("star:k=4,x=0.25".parse::<Family>().unwrap(), Family::Star { k: 4, x: 0.25 });
        assert_eq!("complete-bipartite:n=6".parse::<Family>().unwrap(), Family::CompleteBipartite { n: 6 });
        assert!("star:k=4".parse::<Family>().is_err());
        assert!("nonsense:n=1".parse::<Family>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = gen(Family::DoubleStar { n: 3 });
        assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);
        assert!(Graph::from_json(r#"{"vertex_count":2,"edges":[[0,0,0.5]]}"#).is_err());
    }
}

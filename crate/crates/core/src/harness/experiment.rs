//! Monte-Carlo selectability experiments and exact-selection profiles.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arrival::{active_edges, draw_edge_arrivals, ArrivalSampler, Coins};
use crate::error::{Error, Result};
use crate::exec::fold_trials;
use crate::graph::{Graph, OddGirth};
use crate::recursive::{required_samples, run_rank1_closed_form, unit_star_center, Horizon, Matching, RecursiveEdge, RecursiveParams, RecursiveVertex};
use crate::rng::{Purpose, StreamKey};
use crate::selection::{EdgeKind, SelectionFunction};
use crate::two_phase::{run_greedy, PruneParams, TwoPhase};

use super::config::{CheckKind, ExperimentConfig, SchemeName};
use super::stats::Proportion;
use super::CheckOutcome;

/// Bins with fewer active events than this are not judged.
pub const MIN_BIN_EVENTS: u64 = 100;

/// Parameters after defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScheme {
    pub scheme: SchemeName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<OddGirth>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recursive: Option<RecursiveParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub odd_girth: OddGirth,
    pub max_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStat {
    pub edge: usize,
    pub u: usize,
    pub v: usize,
    pub x: f64,
    pub trials: u64,
    pub active: u64,
    pub accepted: u64,
    /// `accepted / active`; `None` when the edge was never active.
    pub rate: Option<Proportion>,
    /// `accepted / (trials x)` with the Wilson interval of
    /// `accepted / trials` divided by `x`; `None` when `x = 0`.
    pub ratio: Option<Proportion>,
}

impl EdgeStat {
    pub fn insufficient(&self) -> bool {
        self.active == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinStatus {
    Pass,
    Fail,
    Underpowered,
    NoBand,
}

impl BinStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BinStatus::Pass => "pass",
            BinStatus::Fail => "fail",
            BinStatus::Underpowered => "underpowered",
            BinStatus::NoBand => "no_band",
        }
    }
}

/// Conditional acceptance of active events whose arrival falls in a bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub bin: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub active: u64,
    pub accepted: u64,
    pub rate: Option<Proportion>,
    /// Range the true conditional rate must lie in, before widening by
    /// the observed standard error.
    pub band: Option<(f64, f64)>,
    pub status: BinStatus,
}

/// Rank-1 safety: no element accepted strictly before `Y_e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyStat {
    pub edge: usize,
    pub x: f64,
    pub bin: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub samples: u64,
    pub safe: u64,
    pub rate: Option<Proportion>,
    /// Bin average of `exp(-y (1 - x))`.
    pub target: f64,
    pub status: BinStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub instance: InstanceSummary,
    pub resolved: ResolvedScheme,
    pub edges: Vec<EdgeStat>,
    /// Smallest ratio over edges with `x > 0`.
    pub min_ratio: Option<f64>,
    pub min_ratio_edge: Option<usize>,
    pub min_ratio_std_error: Option<f64>,
    /// `sum accepted / (trials sum x)`.
    pub pooled_ratio: Option<f64>,
    pub pooled_std_error: Option<f64>,
    /// Edges with no active occurrence.
    pub insufficient_edges: Vec<usize>,
    pub bins: Vec<BinStat>,
    pub safety: Vec<SafetyStat>,
    pub checks: Vec<CheckOutcome>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.assert)
    }
}

/// Wall-clock measurements, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub name: String,
    pub table_seconds: f64,
    pub trial_seconds: f64,
    pub total_seconds: f64,
    pub parallel: bool,
}

enum Scheme<'g> {
    Vertex { scheme: RecursiveVertex<'g>, table: crate::recursive::EstimateTable },
    Edge { scheme: RecursiveEdge<'g>, table: crate::recursive::EstimateTable },
    Rank1,
    TwoPhase(TwoPhase<'g>),
    Greedy(ArrivalSampler),
}

/// Per-trial event counts; merged by elementwise addition.
#[derive(Debug, Clone)]
struct Counts {
    active: Vec<u64>,
    accepted: Vec<u64>,
    bin_active: Vec<u64>,
    bin_accepted: Vec<u64>,
    /// `edge * bins + bin`.
    safety_samples: Vec<u64>,
    safety_safe: Vec<u64>,
    /// Sum over trials of the squared number of accepted edges.
    accepted_sq: u64,
}

impl Counts {
    fn new(edges: usize, bins: usize, safety: bool) -> Self {
        let cells = if safety { edges * bins } else { 0 };
        Counts {
            active: vec![0; edges],
            accepted: vec![0; edges],
            bin_active: vec![0; bins],
            bin_accepted: vec![0; bins],
            safety_samples: vec![0; cells],
            safety_safe: vec![0; cells],
            accepted_sq: 0,
        }
    }

    fn merge(mut self, o: Counts) -> Counts {
        for (a, b) in [
            (&mut self.active, &o.active),
            (&mut self.accepted, &o.accepted),
            (&mut self.bin_active, &o.bin_active),
            (&mut self.bin_accepted, &o.bin_accepted),
            (&mut self.safety_samples, &o.safety_samples),
            (&mut self.safety_safe, &o.safety_safe),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.accepted_sq += o.accepted_sq;
        self
    }

    fn record(&mut self, bins: usize, edge: usize, y: f64, matching: &Matching) {
        let b = bin_of(y, bins);
        self.active[edge] += 1;
        self.bin_active[b] += 1;
        if matching.contains(edge) {
            self.accepted[edge] += 1;
            self.bin_accepted[b] += 1;
        }
    }
}

fn bin_of(y: f64, bins: usize) -> usize {
    ((y * bins as f64) as usize).min(bins - 1)
}

/// Average of `exp(-k y)` over `[a, b]`.
pub fn mean_exp(k: f64, a: f64, b: f64) -> f64 {
    if k.abs() < 1e-12 || b <= a {
        return (-k * a).exp();
    }
    ((-k * a).exp() - (-k * b).exp()) / (k * (b - a))
}

fn resolve(cfg: &ExperimentConfig, g: &Graph) -> Result<ResolvedScheme> {
    let mut r = ResolvedScheme { scheme: cfg.scheme, g: None, recursive: None, selection: None, t: None };
    let recursive_params = |selection: &SelectionFunction| -> Result<RecursiveParams> {
        let (phases, delta) = (cfg.phases(), cfg.delta());
        let samples = match cfg.samples {
            Some(q) => q,
            None => required_samples(selection.floor, delta, phases, g.vertex_count())?,
        };
        Ok(RecursiveParams { phases, delta, samples })
    };
    match cfg.scheme {
        SchemeName::RecursiveVertex => {
            let girth = cfg.g.unwrap_or_else(|| g.odd_girth());
            let sel = SelectionFunction::vertex(girth)?;
            r.recursive = Some(recursive_params(&sel)?);
            r.g = Some(girth);
            r.selection = Some(sel);
        }
        SchemeName::RecursiveEdge => {
            let sel = SelectionFunction::edge(cfg.edge_function.expect("validated"));
            r.recursive = Some(recursive_params(&sel)?);
            r.selection = Some(sel);
        }
        SchemeName::Rank1Closed => {
            unit_star_center(g)?;
            r.selection = Some(SelectionFunction::edge(EdgeKind::Rank1));
        }
        SchemeName::TwoPhase => r.t = Some(cfg.t.expect("validated").value()),
        SchemeName::Greedy => {}
    }
    Ok(r)
}

fn band_for(resolved: &ResolvedScheme, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let sel = resolved.selection.as_ref()?;
    if resolved.scheme == SchemeName::Rank1Closed {
        let m = mean_exp(1.0, lo, hi);
        return Some((m, m));
    }
    let p = resolved.recursive?;
    let factor = (1.0 - p.delta) / (1.0 + p.delta);
    let ct = sel.floor * p.phases as f64;
    const GRID: usize = 64;
    let (mut band_lo, mut band_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=GRID {
        let y = lo + (hi - lo) * i as f64 / GRID as f64;
        let c = sel.eval(y);
        let lower = if y > 0.0 { factor * (1.0 - 4.0 / (ct * y)) * c } else { f64::NEG_INFINITY };
        band_lo = band_lo.min(lower);
        band_hi = band_hi.max(c);
    }
    Some((band_lo.max(0.0), band_hi.min(1.0)))
}

fn judge(rate: Option<&Proportion>, band: Option<(f64, f64)>, sigmas: f64) -> BinStatus {
    let (Some(p), Some((lo, hi))) = (rate, band) else {
        return if rate.is_none() { BinStatus::Underpowered } else { BinStatus::NoBand };
    };
    if p.n < MIN_BIN_EVENTS {
        return BinStatus::Underpowered;
    }
    let w = sigmas * p.std_error;
    if p.estimate + w >= lo - 1e-12 && p.estimate - w <= hi + 1e-12 {
        BinStatus::Pass
    } else {
        BinStatus::Fail
    }
}

fn bin_sigmas(cfg: &ExperimentConfig, safety: bool) -> f64 {
    cfg.checks
        .iter()
        .find_map(|c| match (&c.kind, safety) {
            (CheckKind::BinsInBand { sigmas }, false) | (CheckKind::SafetyInBand { sigmas }, true) => Some(*sigmas),
            _ => None,
        })
        .unwrap_or(3.0)
}

/// Runs `cfg.trials` independent trials and evaluates the configured checks.
pub fn run_experiment(cfg: &ExperimentConfig, base: Option<&std::path::Path>) -> Result<(ExperimentReport, Timing)> {
    cfg.validate()?;
    let start = Instant::now();
    let g = cfg.instance.load(base)?;
    let resolved = resolve(cfg, &g)?;
    let master = StreamKey::new(cfg.seed);
    let scheme = match cfg.scheme {
        SchemeName::RecursiveVertex => {
            let s = RecursiveVertex::new(&g, resolved.selection.clone().unwrap(), resolved.recursive.unwrap())?;
            let table = s.build_table(master.purpose(Purpose::Estimates), cfg.exec)?;
            Scheme::Vertex { scheme: s, table }
        }
        SchemeName::RecursiveEdge => {
            let s = RecursiveEdge::new(&g, resolved.selection.clone().unwrap(), resolved.recursive.unwrap())?;
            let table = s.build_table(master.purpose(Purpose::Estimates), cfg.exec)?;
            Scheme::Edge { scheme: s, table }
        }
        SchemeName::Rank1Closed => Scheme::Rank1,
        SchemeName::TwoPhase => Scheme::TwoPhase(TwoPhase::new(&g, PruneParams::new(resolved.t.unwrap())?)?),
        SchemeName::Greedy => Scheme::Greedy(ArrivalSampler::new(&g)?),
    };
    let table_seconds = start.elapsed().as_secs_f64();
    let trial_start = Instant::now();
    let counts = simulate_trials(cfg, &g, &scheme, master.purpose(Purpose::Experiment))?;
    let trial_seconds = trial_start.elapsed().as_secs_f64();
    let report = assemble(cfg, &g, resolved, counts);
    let timing = Timing {
        name: cfg.name.clone(),
        table_seconds,
        trial_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        parallel: cfg.exec.is_parallel(),
    };
    Ok((report, timing))
}

fn simulate_trials(cfg: &ExperimentConfig, g: &Graph, scheme: &Scheme<'_>, key: StreamKey) -> Result<Counts> {
    let (m, bins) = (g.edge_count(), cfg.bins);
    let safety = matches!(scheme, Scheme::Rank1);
    let n = g.vertex_count();
    let width = match scheme {
        Scheme::Edge { .. } | Scheme::Rank1 => m,
        _ => n,
    };
    let step = |acc: &mut Counts, trial: u64| -> Result<()> {
        let mut rng = key.child(trial).stream();
        let matching = match scheme {
            Scheme::Vertex { scheme: s, table } => {
                let arr = s.sampler().sample(&mut rng);
                let coins = Coins::draw(width, &mut rng);
                let matching = s.simulate(&arr, &coins, table, Horizon::FULL)?;
                for ev in active_edges(g, &arr) {
                    acc.record(bins, ev.edge, ev.arrival, &matching);
                }
                matching
            }
            Scheme::TwoPhase(tp) => {
                let arr = tp.sampler().sample(&mut rng);
                let coins = Coins::draw(width, &mut rng);
                let matching = tp.run(&arr, &coins);
                for ev in active_edges(g, &arr) {
                    acc.record(bins, ev.edge, ev.arrival, &matching);
                }
                matching
            }
            Scheme::Greedy(sampler) => {
                let arr = sampler.sample(&mut rng);
                let matching = run_greedy(g, &arr);
                for ev in active_edges(g, &arr) {
                    acc.record(bins, ev.edge, ev.arrival, &matching);
                }
                matching
            }
            Scheme::Edge { scheme: s, table } => {
                let arr = draw_edge_arrivals(g, &mut rng, &[]);
                let coins = Coins::draw(width, &mut rng);
                let matching = s.simulate(&arr, &coins, table)?;
                for e in (0..m).filter(|&e| arr.active[e]) {
                    acc.record(bins, e, arr.time[e], &matching);
                }
                matching
            }
            Scheme::Rank1 => {
                let arr = draw_edge_arrivals(g, &mut rng, &[]);
                let coins = Coins::draw(width, &mut rng);
                let matching = run_rank1_closed_form(g, &arr, &coins)?;
                for e in (0..m).filter(|&e| arr.active[e]) {
                    acc.record(bins, e, arr.time[e], &matching);
                }
                let first = matching.accepted.first().map_or(f64::INFINITY, |a| a.time);
                for e in 0..m {
                    let cell = e * bins + bin_of(arr.time[e], bins);
                    acc.safety_samples[cell] += 1;
                    acc.safety_safe[cell] += u64::from(first >= arr.time[e]);
                }
                matching
            }
        };
        let k = matching.accepted.len() as u64;
        acc.accepted_sq += k * k;
        Ok(())
    };
    // Surface configuration errors before fanning out.
    let mut probe = Counts::new(m, bins, safety);
    step(&mut probe, 0)?;
    Ok(fold_trials(
        cfg.exec,
        cfg.trials - 1,
        || Counts::new(m, bins, safety),
        |acc, t| step(acc, t + 1).expect("first trial succeeded"),
        Counts::merge,
    )
    .merge(probe))
}

fn assemble(cfg: &ExperimentConfig, g: &Graph, resolved: ResolvedScheme, c: Counts) -> ExperimentReport {
    let trials = cfg.trials;
    let edges: Vec<EdgeStat> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| EdgeStat {
            edge: i,
            u: e.u,
            v: e.v,
            x: e.x,
            trials,
            active: c.active[i],
            accepted: c.accepted[i],
            rate: Proportion::new(c.accepted[i], c.active[i]),
            ratio: (e.x > 0.0).then(|| Proportion::new(c.accepted[i], trials).expect("trials > 0").scaled(e.x)),
        })
        .collect();
    let min = edges
        .iter()
        .filter_map(|e| e.ratio.map(|r| (e.edge, r)))
        .min_by(|a, b| a.1.estimate.total_cmp(&b.1.estimate).then(a.0.cmp(&b.0)));
    let total_x: f64 = g.edges().iter().map(|e| e.x).sum();
    let total_acc: u64 = c.accepted.iter().sum();
    let (pooled_ratio, pooled_std_error) = if total_x > 0.0 {
        let n = trials as f64;
        let per_trial = total_acc as f64 / n;
        let var = if trials > 1 { ((c.accepted_sq as f64 - n * per_trial * per_trial) / (n - 1.0)).max(0.0) } else { 0.0 };
        (Some(per_trial / total_x), Some((var / n).sqrt() / total_x))
    } else {
        (None, None)
    };
    let bins_n = cfg.bins;
    let width = 1.0 / bins_n as f64;
    let exact = cfg.scheme.is_exact();
    let sig = bin_sigmas(cfg, false);
    let bins = (0..bins_n)
        .map(|b| {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            let rate = Proportion::new(c.bin_accepted[b], c.bin_active[b]);
            let band = if exact { band_for(&resolved, lo, hi) } else { None };
            BinStat { bin: b, y_lo: lo, y_hi: hi, active: c.bin_active[b], accepted: c.bin_accepted[b], rate, band, status: judge(rate.as_ref(), band, sig) }
        })
        .collect();
    let sig_s = bin_sigmas(cfg, true);
    let mut safety = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        for b in 0..bins_n {
            if c.safety_samples.is_empty() {
                break;
            }
            let cell = e * bins_n + b;
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            let rate = Proportion::new(c.safety_safe[cell], c.safety_samples[cell]);
            let target = mean_exp(1.0 - edge.x, lo, hi);
            safety.push(SafetyStat {
                edge: e,
                x: edge.x,
                bin: b,
                y_lo: lo,
                y_hi: hi,
                samples: c.safety_samples[cell],
                safe: c.safety_safe[cell],
                rate,
                target,
                status: judge(rate.as_ref(), Some((target, target)), sig_s),
            });
        }
    }
    let mut report = ExperimentReport {
        config: cfg.clone(),
        instance: InstanceSummary {
            vertex_count: g.vertex_count(),
            edge_count: g.edge_count(),
            odd_girth: g.odd_girth(),
            max_load: (0..g.vertex_count()).map(|v| g.load(v)).fold(0.0, f64::max),
        },
        resolved,
        insufficient_edges: edges.iter().filter(|e| e.insufficient()).map(|e| e.edge).collect(),
        min_ratio: min.map(|(_, r)| r.estimate),
        min_ratio_edge: min.map(|(e, _)| e),
        min_ratio_std_error: min.map(|(_, r)| r.std_error),
        pooled_ratio,
        pooled_std_error,
        edges,
        bins,
        safety,
        checks: Vec::new(),
    };
    report.checks = cfg.checks.iter().map(|c| evaluate(&report, &c.kind, c.assert)).collect();
    report
}

fn evaluate(r: &ExperimentReport, check: &CheckKind, assert: bool) -> CheckOutcome {
    let (passed, detail) = match check {
        CheckKind::MinRatio { at_least, sigmas } => match (r.min_ratio, r.min_ratio_std_error) {
            (Some(m), Some(se)) => {
                let worst = r
                    .edges
                    .iter()
                    .filter_map(|e| e.ratio.map(|p| (e.edge, p)))
                    .find(|(_, p)| p.estimate + sigmas * p.std_error < *at_least);
                let ok = worst.is_none() && r.insufficient_edges.is_empty();
                let detail = match worst {
                    Some((e, p)) => format!("edge {e} ratio {:.5} (se {:.5}) below {at_least}", p.estimate, p.std_error),
                    None if !ok => format!("edges without data: {:?}", r.insufficient_edges),
                    None => format!("min ratio {m:.5} (se {se:.5}) >= {at_least} - {sigmas} se"),
                };
                (ok, detail)
            }
            _ => (false, "no edge with positive value".into()),
        },
        CheckKind::RatioWithin { target, tol, edges } => {
            let mut worst: Option<(usize, f64)> = None;
            let mut ok = true;
            for e in r.edges.iter().filter(|e| edges.as_ref().map_or(true, |l| l.contains(&e.edge))) {
                match e.ratio {
                    Some(p) => {
                        let d = (p.estimate - target).abs();
                        if worst.map_or(true, |(_, w)| d > w) {
                            worst = Some((e.edge, d));
                        }
                        ok &= d <= *tol;
                    }
                    None => ok = false,
                }
            }
            let detail = match worst {
                Some((e, d)) => format!("largest deviation {d:.5} at edge {e}, tolerance {tol}"),
                None => "no matching edges".into(),
            };
            (ok && worst.is_some(), detail)
        }
        CheckKind::PooledRatioWithin { target, tol } => match r.pooled_ratio {
            Some(p) => ((p - target).abs() <= *tol, format!("pooled ratio {p:.5}, target {target} +- {tol}")),
            None => (false, "no edge value".into()),
        },
        CheckKind::PooledRatioAtLeast { at_least, sigmas } => match (r.pooled_ratio, r.pooled_std_error) {
            (Some(p), Some(se)) => (p + sigmas * se >= *at_least, format!("pooled ratio {p:.5} (se {se:.5}), need {at_least} - {sigmas} se")),
            _ => (false, "no edge value".into()),
        },
        CheckKind::BinsInBand { .. } => bin_summary(r.bins.iter().map(|b| (b.status, b.bin, None))),
        CheckKind::SafetyInBand { .. } => bin_summary(r.safety.iter().map(|s| (s.status, s.bin, Some(s.edge)))),
        other => (false, format!("check `{}` does not apply to simulate tasks", other.name())),
    };
    CheckOutcome { check: check.name().to_string(), assert, passed, detail }
}

fn bin_summary(statuses: impl Iterator<Item = (BinStatus, usize, Option<usize>)>) -> (bool, String) {
    let (mut pass, mut under, mut fails) = (0usize, 0usize, Vec::new());
    for (s, bin, edge) in statuses {
        match s {
            BinStatus::Pass => pass += 1,
            BinStatus::Underpowered => under += 1,
            BinStatus::Fail => fails.push(match edge {
                Some(e) => format!("edge {e} bin {bin}"),
                None => format!("bin {bin}"),
            }),
            BinStatus::NoBand => {}
        }
    }
    let ok = fails.is_empty() && pass > 0;
    let mut detail = format!("{pass} pass, {} fail, {under} underpowered", fails.len());
    if !fails.is_empty() {
        detail.push_str(&format!(": {}", fails.iter().take(8).cloned().collect::<Vec<_>>().join(", ")));
    }
    (ok, detail)
}

/// Selectability estimate: per-edge ratios, their minimum and the checks.
pub fn estimate_selectability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment(cfg, None).map(|(r, _)| r)
}

/// Like [`estimate_selectability`] but requires an exact-selection scheme,
/// so every bin carries a target band.
pub fn exact_selection_profile(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if !cfg.scheme.is_exact() {
        return Err(Error::Config(format!(
            "scheme {} has no exact-selection target; use recursive-vertex, recursive-edge or rank1-closed",
            cfg.scheme.as_str()
        )));
    }
    estimate_selectability(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;
    use crate::exec::Exec;
    use crate::harness::config::{Check, InstanceSpec};

    fn cfg(family: Family, scheme: SchemeName, trials: u64) -> ExperimentConfig {
        ExperimentConfig::new(InstanceSpec::Family(family), scheme, trials, 42)
    }

    #[test]
    fn mean_exp_limits() {
        assert!((mean_exp(0.0, 0.2, 0.4) - 1.0).abs() < 1e-15);
        assert!((mean_exp(1.0, 0.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn rank1_single_edge_always_accepts_first() {
        let mut c = cfg(Family::Star { k: 1, x: 1.0 }, SchemeName::Rank1Closed, 2000);
        c.checks.push(Check { kind: CheckKind::SafetyInBand { sigmas: 3.0 }, assert: true });
        let r = estimate_selectability(&c).unwrap();
        let e = &r.edges[0];
        assert_eq!(e.active, 2000);
        assert!(r.safety.iter().all(|s| s.safe == s.samples));
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn greedy_single_edge_accepts_every_active() {
        let r = estimate_selectability(&cfg(Family::SingleEdge { x: 1.0 }, SchemeName::Greedy, 500)).unwrap();
        assert_eq!(r.edges[0].active, 500);
        assert_eq!(r.edges[0].accepted, 500);
        assert_eq!(r.min_ratio, Some(1.0));
        assert!(r.bins.iter().all(|b| b.status != BinStatus::Fail));
    }

    #[test]
    fn zero_value_edge_is_insufficient_not_an_error() {
        let mut c = cfg(Family::SingleEdge { x: 0.0 }, SchemeName::Greedy, 50);
        c.checks.push(Check { kind: CheckKind::MinRatio { at_least: 0.1, sigmas: 0.0 }, assert: true });
        let r = estimate_selectability(&c).unwrap();
        assert_eq!(r.insufficient_edges, vec![0]);
        assert!(r.min_ratio.is_none());
        assert!(!r.passed());
    }

    #[test]
    fn sequential_matches_auto() {
        let mut c = cfg(Family::CompleteBipartite { n: 3 }, SchemeName::TwoPhase, 3000);
        c.t = Some(crate::harness::config::SwitchTime::Value(0.4));
        let a = estimate_selectability(&c).unwrap();
        c.exec = Exec::Sequential;
        let mut b = estimate_selectability(&c).unwrap();
        b.config.exec = Exec::Auto;
        assert_eq!(a, b);
    }

    #[test]
    fn profile_rejects_inexact_scheme() {
        let c = cfg(Family::SingleEdge { x: 1.0 }, SchemeName::Greedy, 10);
        assert!(exact_selection_profile(&c).is_err());
    }

    #[test]
    fn recursive_vertex_band_shape() {
        let mut c = cfg(Family::SingleEdge { x: 1.0 }, SchemeName::RecursiveVertex, 4000);
        c.phases = Some(10);
        c.delta = Some(0.0);
        c.samples = Some(50);
        c.checks.push(Check { kind: CheckKind::BinsInBand { sigmas: 3.0 }, assert: true });
        let r = exact_selection_profile(&c).unwrap();
        for b in &r.bins {
            let (lo, hi) = b.band.unwrap();
            assert!(lo <= hi && (0.0..=1.0).contains(&lo));
        }
        assert!(r.passed(), "{:?}", r.checks);
    }
}

//! Selection functions `c(y)` and the `alpha_g` guarantees.
//!
//! For vertex arrivals on a graph of odd girth `g` the selection function
//! solves `c'(t) = (1 - 2(t c(t) + phi_g(t)) - c(t)) / t` with `c(0) = 1`,
//! which makes the certificate `c(t) <= 1 - (1/t) int_0^t 2(c(y) y + phi_g(y)) dy`
//! tight at every `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::OddGirth;
use crate::numeric::integrate;

/// Below this, `c_vertex` uses its first-order expansion `1 - y`.
pub const SMALL_Y: f64 = 1e-6;

fn factorial(k: u64) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `phi_g(y) = y^(g-1) / (g-1)!`, zero for bipartite graphs.
pub fn phi(y: f64, g: OddGirth) -> Result<f64> {
    Ok(match g.check()? {
        OddGirth::Finite(g) => y.powi((g - 1) as i32) / factorial(g - 1),
        OddGirth::Infinite => 0.0,
    })
}

/// Upper incomplete gamma `Γ(s, z)` for integer `s >= 1`, via
/// `(s-1)! e^{-z} sum_{k<s} z^k / k!`.
pub fn gamma_upper_int(s: u32, z: f64) -> f64 {
    assert!(s >= 1, "integer order must be positive");
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..s {
        term *= z / k as f64;
        sum += term;
    }
    factorial(u64::from(s) - 1) * (-z).exp() * sum
}

/// Vertex-arrival selection function for odd girth `g`.
pub fn c_vertex(y: f64, g: OddGirth) -> Result<f64> {
    let g = g.check()?;
    if y < SMALL_Y {
        // c(0) = 1 and c'(0) = -1 for every g.
        return Ok(1.0 - y.max(0.0));
    }
    let e = (-2.0 * y).exp();
    let base = (1.0 - e) / (2.0 * y);
    Ok(match g {
        OddGirth::Infinite => base,
        OddGirth::Finite(g) => {
            let s = g as u32;
            let diff = gamma_upper_int(s, -2.0 * y) - gamma_upper_int(s, 0.0);
            base - e * diff / (2f64.powi(s as i32 - 1) * y * factorial(g - 1))
        }
    })
}

/// Edge-arrival selection functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// `e^{-y}`, for a single star (rank-1 matroid).
    Rank1,
    /// `e^{-2y}`, for any graph.
    General,
    /// `1/(1+y)^2`, for trees.
    Tree,
}

pub fn c_edge(y: f64, kind: EdgeKind) -> f64 {
    match kind {
        EdgeKind::Rank1 => (-y).exp(),
        EdgeKind::General => (-2.0 * y).exp(),
        EdgeKind::Tree => 1.0 / ((1.0 + y) * (1.0 + y)),
    }
}

/// `alpha_g = 2 int_0^1 c(y) y dy` in closed form.
pub fn alpha_closed_form(g: OddGirth) -> Result<f64> {
    let e2 = (2.0f64).exp();
    Ok(match g.check()? {
        OddGirth::Infinite => (1.0 + 1.0 / e2) / 2.0,
        OddGirth::Finite(g) => {
            let s = g as u32;
            let diff = gamma_upper_int(s, -2.0) - gamma_upper_int(s, 0.0);
            0.5 + 1.0 / (2.0 * e2) - (2.0 / g as f64 - diff / (2f64.powi(s as i32 - 1) * e2)) / factorial(g - 1)
        }
    })
}

/// `alpha_g` by adaptive quadrature of `2 c(y) y`.
pub fn alpha_numeric(g: OddGirth, tol: f64) -> Result<f64> {
    let g = g.check()?;
    integrate(|y| 2.0 * y * c_vertex(y, g).expect("girth checked"), 0.0, 1.0, tol)
}

/// Monotone piecewise-linear selection function given by knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    knots: Vec<(f64, f64)>,
}

impl Table {
    /// Knots must start at `y = 0`, end at `y = 1`, have increasing `y` and
    /// non-increasing values in `[0, 1]`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("selection table: {m}")));
        if knots.len() < 2 || knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return bad("knots must span [0, 1]");
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad("knot positions must increase");
            }
            if w[1].1 > w[0].1 {
                return bad("values must be non-increasing");
            }
        }
        if knots.iter().any(|&(_, c)| !(0.0..=1.0).contains(&c)) {
            return bad("values must lie in [0, 1]");
        }
        Ok(Table { knots })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        let i = self.knots.partition_point(|&(k, _)| k <= y);
        if i == 0 {
            return self.knots[0].1;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].1;
        }
        let (y0, c0) = self.knots[i - 1];
        let (y1, c1) = self.knots[i];
        c0 + (c1 - c0) * (y - y0) / (y1 - y0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionKind {
    Vertex { g: OddGirth },
    Edge { edge: EdgeKind },
    Custom { table: Table },
}

/// An evaluable selection function with its floor `C` and guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFunction {
    pub kind: SelectionKind,
    /// `C` with `c(y) >= C` on `[0, 1]`.
    pub floor: f64,
    /// `2 int c(y) y dy` for vertex kinds, `int c(y) dy` for edge kinds.
    pub target_integral: f64,
}

impl SelectionFunction {
    pub fn vertex(g: OddGirth) -> Result<Self> {
        Ok(SelectionFunction {
            kind: SelectionKind::Vertex { g: g.check()? },
            floor: c_vertex(1.0, g)?,
            target_integral: alpha_closed_form(g)?,
        })
    }

    pub fn edge(kind: EdgeKind) -> Self {
        let target_integral = match kind {
            EdgeKind::Rank1 => 1.0 - (-1.0f64).exp(),
            EdgeKind::General => (1.0 - (-2.0f64).exp()) / 2.0,
            EdgeKind::Tree => 0.5,
        };
        SelectionFunction { kind: SelectionKind::Edge { edge: kind }, floor: c_edge(1.0, kind), target_integral }
    }

    /// A user table; the floor must be supplied and positive.
    pub fn custom(table: Table, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::InvalidParameter(format!("floor C must be positive, got {floor}")));
        }
        let target_integral = integrate(|y| 2.0 * y * table.eval(y), 0.0, 1.0, 1e-10)?;
        Ok(SelectionFunction { kind: SelectionKind::Custom { table }, floor, target_integral })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        match &self.kind {
            SelectionKind::Vertex { g } => c_vertex(y, *g).expect("girth checked at construction"),
            SelectionKind::Edge { edge } => c_edge(y, *edge),
            SelectionKind::Custom { table } => table.eval(y),
        }
    }
}

/// Outcome of checking the selection-function conditions on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub grid_size: usize,
    /// Grid points `t` where `c(t) > c(t - 1/grid)`.
    pub monotone_violations: Vec<f64>,
    /// Grid points where `c(t) < C`.
    pub floor_violations: Vec<f64>,
    /// `(t, slack)` with negative slack in the integral inequality.
    pub inequality_violations: Vec<(f64, f64)>,
    pub min_slack: f64,
    pub max_abs_slack: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.monotone_violations.is_empty() && self.floor_violations.is_empty() && self.inequality_violations.is_empty()
    }
}

/// Slack below which the integral inequality counts as violated; absorbs
/// quadrature error.
pub const SLACK_TOL: f64 = 1e-9;

/// Checks monotonicity, the floor, and
/// `c(t) <= 1 - (1/t) int_0^t 2(c(y) y + phi_g(y)) dy` at `t = i/grid`.
pub fn verify_selection_conditions(c: &SelectionFunction, g: OddGirth, grid_size: usize) -> Result<VerificationReport> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!("grid size {grid_size} < 2")));
    }
    let g = g.check()?;
    let h = 1.0 / grid_size as f64;
    let integrand = |y: f64| 2.0 * (c.eval(y) * y + phi(y, g).expect("girth checked"));
    let mut report = VerificationReport {
        grid_size,
        monotone_violations: Vec::new(),
        floor_violations: Vec::new(),
        inequality_violations: Vec::new(),
        min_slack: f64::INFINITY,
        max_abs_slack: 0.0,
    };
    let mut cumulative = 0.0;
    let mut prev = c.eval(0.0);
    for i in 1..=grid_size {
        let (a, t) = ((i - 1) as f64 * h, i as f64 * h);
        // Tolerance proportional to length keeps (1/t) * error below 1e-10.
        cumulative += integrate(integrand, a, t, 1e-10 * h)?;
        let ct = c.eval(t);
        if ct > prev {
            report.monotone_violations.push(t);
        }
        if ct < c.floor {
            report.floor_violations.push(t);
        }
        let slack = 1.0 - cumulative / t - ct;
        report.min_slack = report.min_slack.min(slack);
        report.max_abs_slack = report.max_abs_slack.max(slack.abs());
        if slack < -SLACK_TOL {
            report.inequality_violations.push((t, slack));
        }
        prev = ct;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: OddGirth = OddGirth::Infinite;
    fn g(k: u64) -> OddGirth {
        OddGirth::finite(k).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.5, g(3)).unwrap(), 0.125);
        assert_eq!(phi(0.37, INF).unwrap(), 0.0);
        assert!((phi(1.0, g(5)).unwrap() - 1.0 / 24.0).abs() < 1e-15);
        assert!(phi(0.5, OddGirth::Finite(4)).is_err());
        assert!(phi(0.5, OddGirth::Finite(1)).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_upper_int(3, 0.0), 2.0);
        for z in [-2.0, -0.5, 0.0, 0.7] {
            assert!((gamma_upper_int(1, z) - (-z).exp()).abs() < 1e-14);
        }
        // 2 e^2; cross-checked by quadrature of zeta^2 e^{-zeta} on [-2, 60].
        let v = gamma_upper_int(3, -2.0);
        assert!((v - 2.0 * 2f64.exp()).abs() < 1e-12);
        let q = integrate(|z| z * z * (-z).exp(), -2.0, 60.0, 1e-12).unwrap();
        assert!((v - q).abs() < 1e-9);
        assert!((v - 14.7781).abs() < 1e-4);
    }

    #[test]
    fn c_vertex_examples() {
        for gg in [g(3), g(5), g(9), INF] {
            assert_eq!(c_vertex(0.0, gg).unwrap(), 1.0);
        }
        let e2 = (-2.0f64).exp();
        assert!((c_vertex(1.0, INF).unwrap() - (1.0 - e2) / 2.0).abs() < 1e-15);
        assert!((c_vertex(1.0, INF).unwrap() - 0.432332).abs() < 1e-6);
        assert!((c_vertex(1.0, g(3)).unwrap() - (1.0 - e2) / 4.0).abs() < 1e-14);
    }

    /// RK4 on the defining ODE from a series start near 0, compared to the closed form.
    fn rk4_c(gg: OddGirth, steps: usize) -> f64 {
        let rhs = |t: f64, c: f64| (1.0 - 2.0 * (t * c + phi(t, gg).unwrap()) - c) / t;
        let t0 = 1e-4;
        let mut c = 1.0 - t0 + (2.0 / 3.0) * t0 * t0; // series of (1-e^{-2t})/2t
        let h = (1.0 - t0) / steps as f64;
        let mut t = t0;
        for _ in 0..steps {
            let k1 = rhs(t, c);
            let k2 = rhs(t + h / 2.0, c + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, c + h / 2.0 * k2);
            let k4 = rhs(t + h, c + h * k3);
            c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        c
    }

    #[test]
    fn c_vertex_matches_rk4() {
        // The start value is off by O(t0^3), which the ODE damps.
        let c3 = rk4_c(g(3), 20_000);
        assert!((c3 - c_vertex(1.0, g(3)).unwrap()).abs() < 1e-8, "{c3}");
        assert!((rk4_c(g(7), 20_000) - c_vertex(1.0, g(7)).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn c_edge_examples() {
        assert_eq!(c_edge(0.0, EdgeKind::Rank1), 1.0);
        let tree = integrate(|y| c_edge(y, EdgeKind::Tree), 0.0, 1.0, 1e-12).unwrap();
        assert!((tree - 0.5).abs() < 1e-11);
        let gen = integrate(|y| c_edge(y, EdgeKind::General), 0.0, 1.0, 1e-12).unwrap();
        assert!((gen - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-11);
    }

    #[test]
    fn alpha_values() {
        let e2 = (2.0f64).exp();
        let cases = [
            (g(3), 5.0 / 12.0 + 1.0 / (4.0 * e2), 0.4505),
            (g(5), 121.0 / 240.0 + 7.0 / (16.0 * e2), 0.5633),
            (g(7), 10121.0 / 20160.0 + 31.0 / (64.0 * e2), 0.5675),
        ];
        for (gg, exact, approx) in cases {
            let a = alpha_closed_form(gg).unwrap();
            assert!((a - exact).abs() < 1e-12, "{gg}: {a} vs {exact}");
            assert!(a >= approx && a - approx < 1e-4);
            assert!((alpha_numeric(gg, 1e-10).unwrap() - exact).abs() < 1e-9);
        }
        let ainf = (1.0 + 1.0 / e2) / 2.0;
        assert!((alpha_numeric(INF, 1e-10).unwrap() - ainf).abs() < 1e-9);
    }

    #[test]
    fn alpha_increasing() {
        let mut prev = 0.0;
        for gg in [g(3), g(5), g(7), g(9), g(11), INF] {
            let a = alpha_numeric(gg, 1e-10).unwrap();
            assert!(a > prev);
            assert!((a - alpha_closed_form(gg).unwrap()).abs() < 1e-9);
            prev = a;
        }
    }

    #[test]
    fn small_y_limit() {
        for gg in [g(3), g(5), INF] {
            assert!((c_vertex(1e-6, gg).unwrap() - 1.0).abs() < 1e-4);
            // Continuity across the small-y branch.
            let below = c_vertex(SMALL_Y * 0.999, gg).unwrap();
            let above = c_vertex(SMALL_Y * 1.001, gg).unwrap();
            assert!((below - above).abs() < 1e-8);
        }
    }

    #[test]
    fn ode_consistency() {
        for gg in [g(3), g(5), g(7), INF] {
            let h = 1e-5;
            let mut t = 0.01;
            while t <= 1.0 - h {
                let c = c_vertex(t, gg).unwrap();
                let d = (c_vertex(t + h, gg).unwrap() - c_vertex(t - h, gg).unwrap()) / (2.0 * h);
                let rhs = (1.0 - 2.0 * (t * c + phi(t, gg).unwrap()) - c) / t;
                assert!((d - rhs).abs() < 1e-6, "g={gg} t={t}: {d} vs {rhs}");
                t += 0.01;
            }
        }
    }

    #[test]
    fn floor_positive() {
        for gg in [g(3), g(5), g(7), g(9), g(11), INF] {
            let f = SelectionFunction::vertex(gg).unwrap();
            assert!(f.floor > 0.0);
        }
    }

    #[test]
    fn certificate_tight_for_closed_form() {
        for gg in [INF, g(5)] {
            let c = SelectionFunction::vertex(gg).unwrap();
            let r = verify_selection_conditions(&c, gg, 1000).unwrap();
            assert!(r.passed(), "{r:?}");
            assert!(r.max_abs_slack <= 1e-8, "{}", r.max_abs_slack);
        }
    }

    #[test]
    fn constant_one_fails_certificate() {
        let table = Table::new(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let c = SelectionFunction::custom(table, 1.0).unwrap();
        let r = verify_selection_conditions(&c, g(3), 100).unwrap();
        assert_eq!(r.inequality_violations.len(), 100);
        assert!(!r.passed());
    }

    #[test]
    fn table_validation_and_interpolation() {
        assert!(Table::new(vec![(0.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(Table::new(vec![(0.1, 0.5), (1.0, 0.4)]).is_err());
        let t = Table::new(vec![(0.0, 1.0), (0.5, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(t.eval(0.25), 0.75);
        assert_eq!(t.eval(0.75), 0.375);
        assert_eq!(t.eval(1.0), 0.25);
        assert!(SelectionFunction::custom(t, 0.0).is_err());
    }
}

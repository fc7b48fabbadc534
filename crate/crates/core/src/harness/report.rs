//! Report files. Every CSV starts with a `# rcrs <kind> v<version>` line
//! naming its frozen column layout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, OddGirth};
use crate::two_phase::{guarantee_poly, RecursionBounds};
use crate::selection::{phi, SelectionFunction};

use super::experiment::{ExperimentReport, Timing};
use super::stats::Proportion;

pub const EDGES_HEADER: &str = "# rcrs edges v1";
pub const BINS_HEADER: &str = "# rcrs bins v1";
pub const SAFETY_HEADER: &str = "# rcrs safety v1";
pub const GAP_HEADER: &str = "# rcrs gap v1";
pub const TRAJECTORY_HEADER: &str = "# rcrs trajectory v1";
pub const DRIFT_HEADER: &str = "# rcrs drift v1";
pub const SELECTION_HEADER: &str = "# rcrs selection v1";
pub const BOUNDS_HEADER: &str = "# rcrs two-phase-bounds v1";

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Formats a float with the shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `header` and then CSV rows.
pub fn write_csv<W: Write>(out: W, header: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = out;
    writeln!(out, "{header}")?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(columns).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

pub fn write_csv_file(path: &Path, header: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_csv(create(path)?, header, columns, rows).map_err(|e| io_err(path, e))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| io_err(path, e))?;
    writeln!(f).and_then(|_| f.flush()).map_err(|e| io_err(path, e))
}

fn prop_cols(p: Option<&Proportion>) -> [String; 4] {
    match p {
        Some(p) => [num(p.estimate), num(p.lo), num(p.hi), num(p.std_error)],
        None => Default::default(),
    }
}

pub const EDGE_COLUMNS: [&str; 16] = [
    "edge", "u", "v", "x", "trials", "active", "accepted", "rate", "rate_lo", "rate_hi", "rate_std_error", "ratio", "ratio_lo",
    "ratio_hi", "ratio_std_error", "status",
];

pub fn edge_rows(r: &ExperimentReport) -> Vec<Vec<String>> {
    r.edges
        .iter()
        .map(|e| {
            let mut row = vec![e.edge.to_string(), e.u.to_string(), e.v.to_string(), num(e.x), e.trials.to_string(), e.active.to_string(), e.accepted.to_string()];
            row.extend(prop_cols(e.rate.as_ref()));
            row.extend(prop_cols(e.ratio.as_ref()));
            row.push(if e.insufficient() { "insufficient_data" } else { "ok" }.to_string());
            row
        })
        .collect()
}

pub const BIN_COLUMNS: [&str; 12] =
    ["bin", "y_lo", "y_hi", "active", "accepted", "rate", "rate_lo", "rate_hi", "std_error", "band_lo", "band_hi", "status"];

pub fn bin_rows(r: &ExperimentReport) -> Vec<Vec<String>> {
    r.bins
        .iter()
        .map(|b| {
            let mut row = vec![b.bin.to_string(), num(b.y_lo), num(b.y_hi), b.active.to_string(), b.accepted.to_string()];
            row.extend(prop_cols(b.rate.as_ref()));
            row.push(opt(b.band.map(|x| x.0)));
            row.push(opt(b.band.map(|x| x.1)));
            row.push(b.status.as_str().to_string());
            row
        })
        .collect()
}

pub const SAFETY_COLUMNS: [&str; 12] = ["edge", "x", "bin", "y_lo", "y_hi", "samples", "safe", "rate", "rate_lo", "rate_hi", "std_error", "target"];

pub fn safety_rows(r: &ExperimentReport) -> Vec<Vec<String>> {
    r.safety
        .iter()
        .map(|s| {
            let mut row = vec![s.edge.to_string(), num(s.x), s.bin.to_string(), num(s.y_lo), num(s.y_hi), s.samples.to_string(), s.safe.to_string()];
            row.extend(prop_cols(s.rate.as_ref()));
            row.push(num(s.target));
            row
        })
        .collect()
}

/// Writes `<stem>.edges.csv`, `<stem>.bins.csv`, `<stem>.safety.csv` (rank-1
/// only), `<stem>.json` and `<stem>.timing.json` into `dir`.
pub fn write_experiment(dir: &Path, stem: &str, report: &ExperimentReport, timing: Option<&Timing>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = |suffix: &str| dir.join(format!("{stem}.{suffix}"));
    let p = path("edges.csv");
    write_csv_file(&p, EDGES_HEADER, &EDGE_COLUMNS, edge_rows(report))?;
    written.push(p);
    let p = path("bins.csv");
    write_csv_file(&p, BINS_HEADER, &BIN_COLUMNS, bin_rows(report))?;
    written.push(p);
    if !report.safety.is_empty() {
        let p = path("safety.csv");
        write_csv_file(&p, SAFETY_HEADER, &SAFETY_COLUMNS, safety_rows(report))?;
        written.push(p);
    }
    let p = path("json");
    write_json_file(&p, report)?;
    written.push(p);
    if let Some(t) = timing {
        let p = path("timing.json");
        write_json_file(&p, t)?;
        written.push(p);
    }
    Ok(written)
}

pub const BOUNDS_COLUMNS: [&str; 10] =
    ["edge", "u", "v", "x", "ratio", "ratio_lo", "ratio_hi", "ratio_std_error", "lower_bound", "guarantee_poly"];

/// Empirical two-phase ratios next to the level-4 lower bound of each edge
/// and the 1-regular guarantee polynomial.
pub fn two_phase_bound_rows(g: &Graph, t: f64, r: &ExperimentReport) -> Result<Vec<Vec<String>>> {
    let mut bounds = RecursionBounds::new(g, t)?;
    let poly = guarantee_poly(t);
    r.edges
        .iter()
        .map(|e| {
            let mut row = vec![e.edge.to_string(), e.u.to_string(), e.v.to_string(), num(e.x)];
            row.extend(prop_cols(e.ratio.as_ref()));
            row.push(num(bounds.guarantee_lower_bound(e.edge)?));
            row.push(num(poly));
            Ok(row)
        })
        .collect()
}

/// Columns `y`, then `c_<g>` and `phi_<g>` for every girth, at `points`
/// evenly spaced values on `[0, 1]`.
pub fn write_selection_table<W: Write>(out: W, girths: &[OddGirth], points: usize) -> Result<()> {
    let points = points.max(2);
    let mut columns = vec!["y".to_string()];
    for g in girths {
        columns.push(format!("c_{g}"));
        columns.push(format!("phi_{g}"));
    }
    let fns = girths.iter().map(|&g| SelectionFunction::vertex(g)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let y = i as f64 / (points - 1) as f64;
        let mut row = vec![num(y)];
        for (c, &g) in fns.iter().zip(girths) {
            row.push(num(c.eval(y)));
            row.push(num(phi(y, g)?));
        }
        rows.push(row);
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    write_csv(out, SELECTION_HEADER, &cols, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_version_line() {
        let mut buf = Vec::new();
        write_selection_table(&mut buf, &[OddGirth::Finite(3), OddGirth::Infinite], 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SELECTION_HEADER);
        assert_eq!(lines[1], "y,c_3,phi_3,c_inf,phi_inf");
        assert_eq!(lines[2], "0,1,0,1,0");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_csv_file(&blocker.join("sub/a.csv"), EDGES_HEADER, &["a"], Vec::<Vec<String>>::new()).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}

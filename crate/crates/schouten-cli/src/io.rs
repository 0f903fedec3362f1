//! Plain-text artifacts: scalar fields and metric dumps as CSV with a
//! header row, run histories as JSON lines.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};

use schouten::manifold::{CurvatureBundle, GridChart, MetricData, MetricField};

/// Write a scalar field: one row per node, columns
/// `i0..i{a-1}, x0..x{a-1}, <name>`.
pub fn write_field_csv(
    path: &Path,
    chart: &GridChart,
    values: &[f64],
    name: &str,
) -> anyhow::Result<()> {
    let axes = chart.axes();
    let mut out = String::new();
    for a in 0..axes {
        write!(out, "i{a},")?;
    }
    for a in 0..axes {
        write!(out, "x{a},")?;
    }
    writeln!(out, "{name}")?;
    for node in 0..chart.num_nodes() {
        let multi = chart.multi(node);
        let coords = chart.coords(node);
        for m in &multi {
            write!(out, "{m},")?;
        }
        for c in &coords {
            write!(out, "{c:.17e},")?;
        }
        writeln!(out, "{:.17e}", values[node])?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Read a scalar field written by [`write_field_csv`]; validates the node
/// count and index order against the chart.
pub fn read_field_csv(path: &Path, chart: &GridChart) -> anyhow::Result<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let axes = chart.axes();
    let mut values = Vec::with_capacity(chart.num_nodes());
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 * axes + 1 {
            bail!("line {}: expected {} columns, got {}", lineno + 1, 2 * axes + 1, cols.len());
        }
        let mut multi = Vec::with_capacity(axes);
        for c in &cols[..axes] {
            multi.push(c.parse::<usize>().with_context(|| format!("line {}", lineno + 1))?);
        }
        if chart.flat(&multi) != values.len() {
            bail!("line {}: node order does not match the chart", lineno + 1);
        }
        values.push(cols[2 * axes].parse::<f64>().with_context(|| format!("line {}", lineno + 1))?);
    }
    if values.len() != chart.num_nodes() {
        bail!("field has {} nodes, chart expects {}", values.len(), chart.num_nodes());
    }
    Ok(values)
}

/// Metric and Schouten dump. Grid charts write the upper triangles of
/// `g_ij` and `A_ij`; warped charts write the profile and the two
/// Schouten eigenvalues.
pub fn write_metric_csv(
    path: &Path,
    metric: &MetricField,
    curv: &CurvatureBundle,
) -> anyhow::Result<()> {
    let chart = &metric.chart;
    let mut out = String::new();
    match (&metric.data, curv) {
        (MetricData::Warped { phi, .. }, CurvatureBundle::Warped(w)) => {
            writeln!(out, "i0,r,phi,a_rad,a_tan")?;
            for node in 0..chart.num_nodes() {
                let r = chart.coords(node)[0];
                writeln!(
                    out,
                    "{node},{r:.17e},{:.17e},{:.17e},{:.17e}",
                    phi[node], w.a_rad[node], w.a_tan[node]
                )?;
            }
        }
        (MetricData::Grid { g }, CurvatureBundle::Grid(gc)) => {
            let n = chart.n;
            for a in 0..n {
                write!(out, "i{a},")?;
            }
            for a in 0..n {
                write!(out, "x{a},")?;
            }
            let mut names = Vec::new();
            for i in 0..n {
                for j in i..n {
                    names.push(format!("g{i}{j}"));
                }
            }
            for i in 0..n {
                for j in i..n {
                    names.push(format!("a{i}{j}"));
                }
            }
            writeln!(out, "{}", names.join(","))?;
            for node in 0..chart.num_nodes() {
                for m in &chart.multi(node) {
                    write!(out, "{m},")?;
                }
                for c in &chart.coords(node) {
                    write!(out, "{c:.17e},")?;
                }
                let mut vals = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        vals.push(format!("{:.17e}", g[node * n * n + i * n + j]));
                    }
                }
                for i in 0..n {
                    for j in i..n {
                        vals.push(format!("{:.17e}", gc.schouten[node * n * n + i * n + j]));
                    }
                }
                writeln!(out, "{}", vals.join(","))?;
            }
        }
        _ => bail!("metric and curvature bundles disagree on the backend"),
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// One JSON document per line.
pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

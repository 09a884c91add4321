//! CSV and SVG output for experiments, robust summaries and fronts.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::design_space::DesignSpace;
use crate::engine::RunTrace;
use crate::error::{Error, Result};
use crate::objectives::{ConstraintSpec, ObjectiveSpec};
use crate::robust::RobustSummary;

use super::{ExperimentReport, ExperimentRow};

/// Every grid design with its Pareto flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontTable {
    pub summaries: Vec<RobustSummary>,
    pub pareto: Vec<bool>,
}

impl FrontTable {
    pub fn optimal_count(&self) -> usize {
        self.pareto.iter().filter(|&&p| p).count()
    }

    pub fn infeasible_count(&self) -> usize {
        self.summaries.iter().filter(|s| !s.feasible).count()
    }

    pub fn dominated_count(&self) -> usize {
        self.summaries.len() - self.optimal_count() - self.infeasible_count()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Table(e.to_string())
}

fn write_rows<W: Write>(writer: W, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Table(e.to_string()))
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn write_summary<W: Write>(writer: W, report: &ExperimentReport) -> Result<()> {
    let header = owned(&["n", "mean_score_star", "std_score_star", "frac_within_tol", "optimal_score"]);
    write_rows(
        writer,
        &header,
        report.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.mean_score_star.to_string(),
                r.std_score_star.to_string(),
                r.frac_within_tol.to_string(),
                report.optimal_score.to_string(),
            ]
        }),
    )
}

pub fn write_traces<W: Write>(writer: W, traces: &[RunTrace]) -> Result<()> {
    let header = owned(&["run", "n", "score_star"]);
    let rows = traces.iter().enumerate().flat_map(|(run, t)| {
        t.score_star.iter().enumerate().map(move |(i, s)| vec![run.to_string(), (i + 1).to_string(), s.to_string()])
    });
    write_rows(writer, &header, rows)
}

#[derive(Deserialize)]
struct SummaryLine {
    n: usize,
    mean_score_star: f64,
    std_score_star: f64,
    frac_within_tol: f64,
    optimal_score: f64,
}

/// Parses `summary.csv`; returns the rows and the optimal score.
pub fn read_summary<R: Read>(reader: R) -> Result<(Vec<ExperimentRow>, f64)> {
    let mut rows = Vec::new();
    let mut optimal = f64::INFINITY;
    for line in csv::Reader::from_reader(reader).deserialize::<SummaryLine>() {
        let l = line.map_err(csv_err)?;
        optimal = l.optimal_score;
        rows.push(ExperimentRow {
            n: l.n,
            mean_score_star: l.mean_score_star,
            std_score_star: l.std_score_star,
            frac_within_tol: l.frac_within_tol,
        });
    }
    Ok((rows, optimal))
}

#[derive(Deserialize)]
struct TraceLine {
    run: usize,
    n: usize,
    score_star: f64,
}

/// Parses `traces.csv`; rows must be grouped by run with `n` counting from 1.
pub fn read_traces<R: Read>(reader: R) -> Result<Vec<RunTrace>> {
    let mut traces: Vec<RunTrace> = Vec::new();
    for line in csv::Reader::from_reader(reader).deserialize::<TraceLine>() {
        let l = line.map_err(csv_err)?;
        if l.run == traces.len() && l.n == 1 {
            traces.push(RunTrace::default());
        }
        let runs = traces.len();
        match traces.last_mut() {
            Some(t) if l.run + 1 == runs && l.n == t.len() + 1 => t.score_star.push(l.score_star),
            _ => return Err(Error::Table(format!("traces out of order at run {}, n {}", l.run, l.n))),
        }
    }
    Ok(traces)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn parse_summary(path: impl AsRef<Path>) -> Result<(Vec<ExperimentRow>, f64)> {
    read_summary(open(path.as_ref())?)
}

pub fn parse_traces(path: impl AsRef<Path>) -> Result<Vec<RunTrace>> {
    read_traces(open(path.as_ref())?)
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Design parameters, worst-case objectives, feasible flag, Pareto flag.
pub fn write_front<W: Write>(
    writer: W,
    space: &DesignSpace,
    objectives: &[ObjectiveSpec],
    front: &FrontTable,
) -> Result<()> {
    let mut header: Vec<String> = space.parameters().iter().map(|p| p.name().to_string()).collect();
    header.extend(objectives.iter().map(|o| o.name.clone()));
    header.extend(owned(&["feasible", "pareto"]));
    let mut rows = Vec::with_capacity(front.summaries.len());
    for (s, &p) in front.summaries.iter().zip(&front.pareto) {
        let mut row: Vec<String> = s.design.values.iter().map(f64::to_string).collect();
        for o in objectives {
            row.push(s.worst_case.get(&o.name)?.to_string());
        }
        row.push(flag(s.feasible));
        row.push(flag(p));
        rows.push(row);
    }
    write_rows(writer, &header, rows)
}

/// Design parameters, worst-case objectives and constraint metrics, feasible flag.
pub fn write_robust<W: Write>(
    writer: W,
    space: &DesignSpace,
    objectives: &[ObjectiveSpec],
    constraints: &[ConstraintSpec],
    summaries: &[RobustSummary],
) -> Result<()> {
    let mut header: Vec<String> = space.parameters().iter().map(|p| p.name().to_string()).collect();
    header.extend(objectives.iter().map(|o| o.name.clone()));
    let mut cons: Vec<&str> = Vec::new();
    for c in constraints {
        if !cons.contains(&c.name.as_str()) {
            cons.push(&c.name);
        }
    }
    header.extend(cons.iter().map(|c| format!("{c}_worst")));
    header.push("feasible".into());
    let mut rows = Vec::with_capacity(summaries.len());
    for s in summaries {
        let mut row: Vec<String> = s.design.values.iter().map(f64::to_string).collect();
        for o in objectives {
            row.push(s.worst_case.get(&o.name)?.to_string());
        }
        for c in &cons {
            let v = s.constraint_worst.get(*c).ok_or_else(|| Error::MissingMetric(c.to_string()))?;
            row.push(v.to_string());
        }
        row.push(flag(s.feasible));
        rows.push(row);
    }
    write_rows(writer, &header, rows)
}

/// Mean Score* line with a ±std band. Infinite points are left out.
fn svg_plot(report: &ExperimentReport) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let pts: Vec<(f64, f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.mean_score_star.is_finite() && r.std_score_star.is_finite())
        .map(|r| (r.n as f64, r.mean_score_star, r.std_score_star))
        .collect();
    let n_max = report.rows.len().max(2) as f64;
    let y_max = pts.iter().map(|&(_, m, s)| m + s).fold(0.0f64, f64::max).max(1e-12);
    let y_min = pts.iter().map(|&(_, m, s)| m - s).fold(0.0f64, f64::min);
    let x = |n: f64| pad + (n - 1.0) / (n_max - 1.0) * (w - 2.0 * pad);
    let y = |v: f64| h - pad - (v - y_min) / (y_max - y_min) * (h - 2.0 * pad);
    let upper: Vec<String> = pts.iter().map(|&(n, m, s)| format!("{:.2},{:.2}", x(n), y(m + s))).collect();
    let lower: Vec<String> = pts.iter().rev().map(|&(n, m, s)| format!("{:.2},{:.2}", x(n), y(m - s))).collect();
    let mean: Vec<String> = pts.iter().map(|&(n, m, _)| format!("{:.2},{:.2}", x(n), y(m))).collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - pad,
        r = w - pad
    ));
    if !pts.is_empty() {
        svg.push_str(&format!(
            "<polygon points=\"{} {}\" fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\"/>\n",
            upper.join(" "),
            lower.join(" ")
        ));
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
            mean.join(" ")
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">trials (1..{})</text>\n",
        w / 2.0,
        h - 12.0,
        report.rows.len()
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">mean Score* [{:.3}, {:.3}]</text>\n",
        h / 2.0,
        h / 2.0,
        y_min,
        y_max
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Writes `summary.csv`, `traces.csv`, `score_vs_trials.svg` and, given a
/// front, `front.csv` into `dir`. Returns the paths written.
pub fn emit_report(
    dir: impl AsRef<Path>,
    report: &ExperimentReport,
    front: Option<(&DesignSpace, &[ObjectiveSpec], &FrontTable)>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("summary.csv");
    write_summary(create(&path)?, report).map_err(|e| with_path(&path, e))?;
    written.push(path);

    let path = dir.join("traces.csv");
    write_traces(create(&path)?, &report.traces).map_err(|e| with_path(&path, e))?;
    written.push(path);

    if let Some((space, objectives, table)) = front {
        let path = dir.join("front.csv");
        write_front(create(&path)?, space, objectives, table).map_err(|e| with_path(&path, e))?;
        written.push(path);
    }

    let path = dir.join("score_vs_trials.svg");
    fs::write(&path, svg_plot(report)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Table(msg) => Error::Table(format!("{}: {msg}", path.display())),
        other => other,
    }
}

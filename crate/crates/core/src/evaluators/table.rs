//! Precomputed metrics stored as CSV.
//!
//! Header: design parameter names in declaration order, the operating parameter
//! name, then metric names. One row per (design, operating value). Floats are
//! written in shortest round-trip form, so a dump/load cycle is bit-exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::design_space::{DesignPoint, DesignSpace};
use crate::error::{Error, Result};

use super::{evaluate_grid, EvalError, Evaluator, MetricSet};

#[derive(Debug, Clone)]
pub struct EvaluationTable {
    space: DesignSpace,
    metric_names: Vec<String>,
    /// Indexed by `flat_design * operating_len + operating_index`.
    rows: Vec<Vec<f64>>,
    provenance: String,
}

impl EvaluationTable {
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn key(&self, design: &DesignPoint, operating: f64) -> Option<usize> {
        let flat = self.space.flat_index(design).ok()?;
        let op = self.space.operating().position(operating)?;
        Some(flat * self.space.operating().len() + op)
    }
}

impl Evaluator for EvaluationTable {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError> {
        let key = self
            .key(design, operating)
            .ok_or_else(|| EvalError::MissingKey { design: design.to_string(), operating })?;
        Ok(self.metric_names.iter().cloned().zip(self.rows[key].iter().copied()).collect())
    }

    fn metric_names(&self) -> Vec<String> {
        self.metric_names.clone()
    }
}

fn parse_float(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Table(format!("line {line}: malformed number `{field}` in column `{column}`")))
}

/// Reads and validates a complete table for `space`.
pub fn read_table<R: Read>(reader: R, space: &DesignSpace, provenance: impl Into<String>) -> Result<EvaluationTable> {
    let provenance = provenance.into();
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| Error::Table(format!("{provenance}: cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();

    let dim = space.dimension();
    let expected: Vec<&str> =
        space.parameters().iter().map(|p| p.name()).chain(std::iter::once(space.operating().name())).collect();
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Table(format!(
                    "{provenance}: unknown column `{got}` at position {}, expected `{want}`",
                    i + 1
                )))
            }
            None => return Err(Error::Table(format!("{provenance}: missing column `{want}`"))),
        }
    }
    let metric_names: Vec<String> = header[dim + 1..].to_vec();
    if metric_names.is_empty() {
        return Err(Error::Table(format!("{provenance}: no metric columns")));
    }
    for (i, m) in metric_names.iter().enumerate() {
        if m.is_empty() || expected.contains(&m.as_str()) || metric_names[..i].contains(m) {
            return Err(Error::Table(format!("{provenance}: unknown or repeated column `{m}`")));
        }
    }

    let ops = space.operating().len();
    let total = space.size().checked_mul(ops).ok_or_else(|| Error::Table("grid too large for a table".into()))?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; total];
    for record in csv.records() {
        let record = record.map_err(|e| Error::Table(format!("{provenance}: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Table(format!(
                "{provenance} line {line}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let values =
            record.iter().zip(&header).map(|(f, col)| parse_float(f, line, col)).collect::<Result<Vec<f64>>>()?;
        let design = DesignPoint::new(values[..dim].to_vec());
        let flat = space.flat_index(&design).map_err(|e| Error::Table(format!("{provenance} line {line}: {e}")))?;
        let op = space.operating().position(values[dim]).ok_or_else(|| {
            Error::Table(format!(
                "{provenance} line {line}: `{}` = {} is not on the operating grid",
                space.operating().name(),
                values[dim]
            ))
        })?;
        let metrics = values[dim + 1..].to_vec();
        if let Some((name, v)) = metric_names.iter().zip(&metrics).find(|(_, v)| !v.is_finite()) {
            return Err(Error::Table(format!("{provenance} line {line}: metric `{name}` is not finite ({v})")));
        }
        let slot = &mut rows[flat * ops + op];
        if slot.is_some() {
            return Err(Error::Table(format!(
                "{provenance} line {line}: duplicate row for design {design} at {} = {}",
                space.operating().name(),
                values[dim]
            )));
        }
        *slot = Some(metrics);
    }

    let missing: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.is_none()).map(|(i, _)| i).collect();
    if !missing.is_empty() {
        let shown: Vec<String> = missing
            .iter()
            .take(5)
            .map(|&i| {
                format!(
                    "design {} at {} = {}",
                    space.point_at(i / ops),
                    space.operating().name(),
                    space.operating().values()[i % ops]
                )
            })
            .collect();
        return Err(Error::Table(format!("{provenance}: {} missing rows, e.g. {}", missing.len(), shown.join("; "))));
    }

    Ok(EvaluationTable {
        space: space.clone(),
        metric_names,
        rows: rows.into_iter().map(|r| r.unwrap()).collect(),
        provenance,
    })
}

pub fn load_table(path: impl AsRef<Path>, space: &DesignSpace) -> Result<EvaluationTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, space, path.display().to_string())
}

/// Evaluates the full grid and writes it as a table.
pub fn write_table<W: Write, E: Evaluator + ?Sized>(
    writer: W,
    space: &DesignSpace,
    evaluator: &E,
    workers: usize,
) -> Result<usize> {
    let metric_names = evaluator.metric_names();
    let groups = evaluate_grid(evaluator, space, workers)?;
    let to_err = |e: csv::Error| Error::Table(format!("write failed: {e}"));
    let mut out = csv::WriterBuilder::new().from_writer(writer);
    let header: Vec<&str> = space
        .parameters()
        .iter()
        .map(|p| p.name())
        .chain(std::iter::once(space.operating().name()))
        .chain(metric_names.iter().map(String::as_str))
        .collect();
    out.write_record(&header).map_err(to_err)?;
    let mut rows = 0;
    for group in &groups {
        for rec in group {
            let mut fields: Vec<String> = rec.design.values.iter().map(|v| v.to_string()).collect();
            fields.push(rec.operating_value.to_string());
            for name in &metric_names {
                let v = rec.metrics.get(name).ok_or_else(|| Error::Evaluation {
                    context: format!("design {} at {}", rec.design, rec.operating_value),
                    source: EvalError::MissingMetric(name.clone()),
                })?;
                fields.push(v.to_string());
            }
            out.write_record(&fields).map_err(to_err)?;
            rows += 1;
        }
    }
    out.flush().map_err(|e| Error::Table(format!("write failed: {e}")))?;
    Ok(rows)
}

pub fn dump_table<E: Evaluator + ?Sized>(
    path: impl AsRef<Path>,
    space: &DesignSpace,
    evaluator: &E,
    workers: usize,
) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(std::io::BufWriter::new(file), space, evaluator, workers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{OperatingGrid, ParameterKind, ParameterSpec};

    fn tiny_space() -> DesignSpace {
        DesignSpace::new(
            vec![
                ParameterSpec::new("a", ParameterKind::GriddedFloat, 0.0, 1.0, 2).unwrap(),
                ParameterSpec::new("b", ParameterKind::EvenInteger, 2.0, 4.0, 2).unwrap(),
            ],
            OperatingGrid::new("op", vec![0.1, 0.2]).unwrap(),
        )
        .unwrap()
    }

    fn full_csv() -> String {
        let mut s = String::from("a,b,op,m1,m2\n");
        for a in ["0", "1"] {
            for b in ["2", "4"] {
                for op in ["0.1", "0.2"] {
                    s.push_str(&format!("{a},{b},{op},1.5,-2e-3\n"));
                }
            }
        }
        s
    }

    #[test]
    fn reads_complete_table() {
        let t = read_table(full_csv().as_bytes(), &tiny_space(), "mem").unwrap();
        assert_eq!(t.len(), 8);
        let m = t.evaluate(&DesignPoint::new(vec![1.0, 4.0]), 0.2).unwrap();
        assert_eq!(m["m1"], 1.5);
        assert_eq!(m["m2"], -0.002);
        assert_eq!(t.metric_names(), vec!["m1", "m2"]);
    }

    #[test]
    fn missing_row_is_named() {
        let text = full_csv().replace("1,4,0.2,1.5,-2e-3\n", "");
        let err = read_table(text.as_bytes(), &tiny_space(), "mem").unwrap_err().to_string();
        assert!(err.contains("1 missing rows"), "{err}");
        assert!(err.contains("design (1, 4) at op = 0.2"), "{err}");
    }

    #[test]
    fn duplicate_row_rejected() {
        let text = full_csv() + "0,2,0.1,9,9\n";
        let err = read_table(text.as_bytes(), &tiny_space(), "mem").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn malformed_and_unknown_columns() {
        let text = full_csv().replacen("1.5", "1,5x", 1);
        assert!(read_table(text.as_bytes(), &tiny_space(), "mem").is_err());
        let text = full_csv().replacen("1.5", "abc", 1);
        let err = read_table(text.as_bytes(), &tiny_space(), "mem").unwrap_err().to_string();
        assert!(err.contains("malformed number `abc`"), "{err}");
        let text = full_csv().replacen("a,b,op", "a,c,op", 1);
        let err = read_table(text.as_bytes(), &tiny_space(), "mem").unwrap_err().to_string();
        assert!(err.contains("unknown column `c`"), "{err}");
        let text = full_csv().replacen("m2", "m1", 1);
        assert!(read_table(text.as_bytes(), &tiny_space(), "mem").is_err());
    }

    #[test]
    fn off_grid_values_rejected() {
        let text = full_csv().replacen("0,2,0.1", "0.5,2,0.1", 1);
        assert!(read_table(text.as_bytes(), &tiny_space(), "mem").is_err());
        let text = full_csv().replacen("0,2,0.1", "0,2,0.15", 1);
        assert!(read_table(text.as_bytes(), &tiny_space(), "mem").is_err());
    }

    struct Weird;

    impl Evaluator for Weird {
        fn evaluate(&self, d: &DesignPoint, op: f64) -> Result<MetricSet, EvalError> {
            let x = d.values[0] / 3.0 + op * 1e-17 + d.values[1] * 1e300;
            Ok([("x".to_string(), x), ("y".to_string(), -x / 7.0)].into())
        }

        fn metric_names(&self) -> Vec<String> {
            vec!["x".into(), "y".into()]
        }
    }

    #[test]
    fn dump_load_is_bit_exact() {
        let space = tiny_space();
        let mut buf = Vec::new();
        assert_eq!(write_table(&mut buf, &space, &Weird, 1).unwrap(), 8);
        let t = read_table(buf.as_slice(), &space, "mem").unwrap();
        for d in space.enumerate_grid() {
            for &op in space.operating().values() {
                let (a, b) = (Weird.evaluate(&d, op).unwrap(), t.evaluate(&d, op).unwrap());
                for k in ["x", "y"] {
                    assert_eq!(a[k].to_bits(), b[k].to_bits());
                }
            }
        }
    }
}

//! Per-family summaries of a record stream.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::record::{ReportRecord, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub family: String,
    pub model: String,
    pub n: usize,
    pub trials: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    /// `true`, `false`, or `skipped`.
    pub pass: String,
}

impl SummaryRow {
    pub fn failed(&self) -> bool {
        self.pass == "false"
    }

    fn severity(&self) -> f64 {
        if self.tolerance > 0.0 {
            self.max_residual / self.tolerance
        } else if self.max_residual > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// One row per (suite, family, model, n); failing rows first by
/// `max_residual / tolerance` descending, then the rest in first-seen order.
pub fn summarize(records: &[ReportRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for r in records {
        let key = |x: &SummaryRow| x.suite == r.suite && x.family == r.family && x.model == r.model && x.n == r.n;
        let i = match rows.iter().position(key) {
            Some(i) => i,
            None => {
                rows.push(SummaryRow {
                    suite: r.suite.clone(),
                    family: r.family.clone(),
                    model: r.model.clone(),
                    n: r.n,
                    trials: 0,
                    max_residual: 0.0,
                    tolerance: r.tolerance,
                    pass: "skipped".into(),
                });
                rows.len() - 1
            }
        };
        let row = &mut rows[i];
        if r.status == Status::NotApplicable {
            continue;
        }
        row.trials += 1;
        row.max_residual = row.max_residual.max(r.residual);
        row.tolerance = row.tolerance.max(r.tolerance);
        row.pass = match (row.pass.as_str(), r.pass) {
            ("false", _) | (_, false) => "false",
            _ => "true",
        }
        .into();
    }
    let (mut bad, good): (Vec<_>, Vec<_>) = rows.into_iter().partition(SummaryRow::failed);
    bad.sort_by(|a, b| b.severity().total_cmp(&a.severity()));
    bad.extend(good);
    bad
}

pub fn write_csv<W: Write>(w: W, rows: &[SummaryRow]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()
}

/// Fixed-width table for terminals.
pub fn write_text<W: Write>(mut w: W, rows: &[SummaryRow]) -> io::Result<()> {
    let width = rows.iter().map(|r| r.family.len()).max().unwrap_or(6).max(6);
    writeln!(w, "{:<12} {:<width$} {:>6} {:>12} {:>10}  pass", "suite", "family", "trials", "max_residual", "tolerance")?;
    for r in rows {
        writeln!(w, "{:<12} {:<width$} {:>6} {:>12.3e} {:>10.1e}  {}", r.suite, r.family, r.trials, r.max_residual, r.tolerance, r.pass)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Context;

    #[test]
    fn failing_rows_lead_by_severity() {
        let cx = Context { model: "heisenberg".into(), n: 2, mode: "float".into() };
        let recs = vec![
            cx.record("axioms", "a", 1e-12, 1e-8, true),
            cx.record("structure", "mild", 1e-6, 1e-8, false),
            cx.record("axioms", "a", 2e-12, 1e-8, true),
            cx.record("bochner", "severe", 1e-2, 1e-8, false),
            cx.not_applicable("integrals", "sphere"),
        ];
        let rows = summarize(&recs);
        let names: Vec<&str> = rows.iter().map(|r| r.family.as_str()).collect();
        assert_eq!(names, ["severe", "mild", "a", "suite"]);
        assert_eq!(rows[2].trials, 2);
        assert_eq!(rows[2].max_residual, 2e-12);
        assert_eq!(rows[3].pass, "skipped");
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("suite,family,model,n,trials,max_residual,tolerance,pass\n"));
        assert_eq!(text.lines().count(), 5);
    }
}

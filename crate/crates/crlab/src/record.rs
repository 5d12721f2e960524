//! JSON-lines report records.

use std::io::{self, BufRead, Write};

use crlab_core::report::Family;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT-APPLICABLE")]
    NotApplicable,
}

/// One family evaluated at one point, field, or trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub suite: String,
    pub family: String,
    pub model: String,
    pub n: usize,
    pub mode: String,
    pub status: Status,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    /// Every evaluated sum was exactly zero; only meaningful in exact mode.
    pub exact_zero: bool,
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<String>>,
    /// Sample index: point, point·fields + field, or integral trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Fields shared by every record of a run.
#[derive(Clone, Debug)]
pub struct Context {
    pub model: String,
    pub n: usize,
    pub mode: String,
}

impl Context {
    pub fn record(&self, suite: &str, family: &str, residual: f64, tolerance: f64, pass: bool) -> ReportRecord {
        ReportRecord {
            suite: suite.into(),
            family: family.into(),
            model: self.model.clone(),
            n: self.n,
            mode: self.mode.clone(),
            status: if pass { Status::Pass } else { Status::Fail },
            pass,
            residual,
            tolerance,
            exact_zero: residual == 0.0,
            evaluations: 1,
            point: None,
            trial: None,
            wall_ms: None,
            note: String::new(),
        }
    }

    pub fn family(&self, suite: &str, f: &Family, tolerance: f64) -> ReportRecord {
        let mut r = self.record(suite, &f.name, f.residual, tolerance, f.passes(tolerance));
        r.exact_zero = f.exact_zero;
        r.evaluations = f.evaluations;
        r
    }

    pub fn not_applicable(&self, suite: &str, note: &str) -> ReportRecord {
        let mut r = self.record(suite, "suite", 0.0, 0.0, true);
        r.status = Status::NotApplicable;
        r.note = note.into();
        r
    }
}

impl ReportRecord {
    pub fn at(mut self, point: Option<Vec<String>>, trial: Option<usize>) -> Self {
        self.point = point;
        self.trial = trial;
        self
    }

    /// A skipped record is neither a pass nor a violation.
    pub fn is_violation(&self) -> bool {
        self.status == Status::Fail
    }
}

pub fn write_jsonl<W: Write>(w: &mut W, records: &[ReportRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Vec<ReportRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_through_jsonl() {
        let cx = Context { model: "heisenberg".into(), n: 2, mode: "exact".into() };
        let recs = vec![
            cx.record("structure", "webster-symmetric", 0.0, 1e-8, true).at(Some(vec!["1/2".into()]), Some(3)),
            cx.not_applicable("integrals", "sphere"),
        ];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"status\":\"NOT-APPLICABLE\""));
        assert!(!text.contains("wall_ms"));
        assert_eq!(read_jsonl(&buf[..]).unwrap(), recs);
        assert!(!recs[1].is_violation());
    }
}

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    LossChange,
    MaxIterations,
    LineSearchFailed,
    TargetLoss,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::GradientTolerance => "gradient tolerance",
            Termination::LossChange => "loss change",
            Termination::MaxIterations => "max iterations",
            Termination::LineSearchFailed => "line search failed",
            Termination::TargetLoss => "target loss reached",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub params: Vec<f64>,
    pub loss: f64,
    pub terms: Vec<f64>,
    /// Infinity norm of the gradient at `params`.
    pub grad_norm: f64,
    pub step_len: f64,
    pub beta: f64,
    /// The direction leaving this point is pure steepest descent.
    pub reset: bool,
    /// This row follows a random perturbation rather than a line search.
    pub escape: bool,
    pub seconds: f64,
}

/// Step-by-step record of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    term_names: Vec<String>,
    rows: Vec<TraceRow>,
    best: usize,
    termination: Termination,
    evaluations: usize,
}

impl OptimizationTrace {
    pub(crate) fn new(term_names: Vec<String>) -> Self {
        Self {
            term_names,
            rows: Vec::new(),
            best: 0,
            termination: Termination::MaxIterations,
            evaluations: 0,
        }
    }

    pub(crate) fn push(&mut self, row: TraceRow) {
        if self.rows.is_empty() || row.loss < self.rows[self.best].loss {
            self.best = self.rows.len();
        }
        self.rows.push(row);
    }

    pub(crate) fn finish(&mut self, termination: Termination, evaluations: usize) {
        self.termination = termination;
        self.evaluations = evaluations;
    }

    pub fn term_names(&self) -> &[String] {
        &self.term_names
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn best_row(&self) -> &TraceRow {
        &self.rows[self.best]
    }

    pub fn best_params(&self) -> &[f64] {
        &self.rows[self.best].params
    }

    pub fn best_loss(&self) -> f64 {
        self.rows[self.best].loss
    }

    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace has the starting row")
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Objective evaluations spent, including finite differences and line searches.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn iterations(&self) -> usize {
        self.final_row().step
    }

    /// Column names: `step, loss, <terms>, gradnorm, steplen, beta, reset, seconds,
    /// escape, p0 .. p{n-1}`.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string(), "loss".to_string()];
        h.extend(self.term_names.iter().cloned());
        for c in ["gradnorm", "steplen", "beta", "reset", "seconds", "escape"] {
            h.push(c.to_string());
        }
        let n = self.rows.first().map_or(0, |r| r.params.len());
        h.extend((0..n).map(|i| format!("p{i}")));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for r in &self.rows {
            let mut rec = vec![r.step.to_string(), r.loss.to_string()];
            rec.extend(r.terms.iter().map(|t| t.to_string()));
            rec.push(r.grad_norm.to_string());
            rec.push(r.step_len.to_string());
            rec.push(r.beta.to_string());
            rec.push(u8::from(r.reset).to_string());
            rec.push(r.seconds.to_string());
            rec.push(u8::from(r.escape).to_string());
            rec.extend(r.params.iter().map(|p| p.to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Rows and term names back from a CSV written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<TraceRow>)> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let gi = header
            .iter()
            .position(|h| h == "gradnorm")
            .ok_or_else(|| Error::InvalidArgument("trace CSV lacks a gradnorm column".into()))?;
        if gi < 2 || header.len() < gi + 6 {
            return Err(Error::InvalidArgument("malformed trace CSV header".into()));
        }
        let terms = header[2..gi].to_vec();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number '{s}': {e}")))
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            rows.push(TraceRow {
                step: f[0]
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("bad step: {e}")))?,
                loss: num(f[1])?,
                terms: f[2..gi].iter().map(|s| num(s)).collect::<Result<_>>()?,
                grad_norm: num(f[gi])?,
                step_len: num(f[gi + 1])?,
                beta: num(f[gi + 2])?,
                reset: f[gi + 3] == "1",
                seconds: num(f[gi + 4])?,
                escape: f[gi + 5] == "1",
                params: f[gi + 6..].iter().map(|s| num(s)).collect::<Result<_>>()?,
            });
        }
        Ok((terms, rows))
    }
}

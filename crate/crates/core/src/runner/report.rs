//! Structured results of `recover` / `extrapolate` runs, stored as JSON.

use super::config::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::loss::SizeObservables;
use crate::optimizer::Termination;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Training overlap below `1 - APPROXIMATE_FIT_TOL` marks the fit approximate.
pub const APPROXIMATE_FIT_TOL: f64 = 1e-6;
/// Test overlaps below this are flagged as degraded.
pub const DEGRADED_TEST_OVERLAP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Recover,
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    /// Some training overlap stays visibly below one.
    ApproximateFit,
    /// Some test overlap is below [`DEGRADED_TEST_OVERLAP`].
    DegradedTestOverlap,
    /// The planted support uses operators missing from the ansatz.
    UnderSpannedBasis,
    /// The best run stopped on its iteration budget.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledValue {
    pub label: String,
    pub value: f64,
}

/// Learned model evaluated at one system size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n_sites: usize,
    pub dim: usize,
    /// Norm of the reference's projection onto the ground space, in `[0, 1]`.
    pub overlap: f64,
    pub energy_variance: f64,
    /// `variance / <H>^2`; absent when `<H>` vanishes.
    pub relative_variance: Option<f64>,
    pub kl: f64,
    pub e0: f64,
    pub gap: f64,
    pub ground_degeneracy: usize,
}

impl SizeReport {
    pub fn from_observables(o: &SizeObservables) -> Result<Self> {
        let missing = || Error::InvalidArgument(format!("no reference state at N = {}", o.n_sites));
        Ok(Self {
            n_sites: o.n_sites,
            dim: o.dim,
            overlap: o.overlap.ok_or_else(missing)?.clamp(0.0, 1.0),
            energy_variance: o.energy_variance.ok_or_else(missing)?,
            relative_variance: o.relative_variance,
            kl: o.kl.ok_or_else(missing)?,
            e0: o.e0,
            gap: o.gap,
            ground_degeneracy: o.ground_degeneracy,
        })
    }
}

/// Learned coefficients split by the planted support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSplit {
    pub support: Vec<LabeledValue>,
    pub off_support: Vec<LabeledValue>,
    /// Sum of `|gamma_m|` over ansatz operators outside the support.
    pub off_support_l1: f64,
    /// Planted coefficients of the ansatz operators.
    pub planted: Vec<LabeledValue>,
    /// Support labels absent from the ansatz.
    pub missing_support: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub n_starts: usize,
    pub best_start: usize,
    /// Standard deviation of the final losses over successful starts.
    pub final_loss_dispersion: f64,
    pub failed_starts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub schema_version: u32,
    pub kind: RunKind,
    pub seed: u64,
    /// Search parameters (before the parametrization map).
    pub params: Vec<f64>,
    /// Operator coefficients, one per ansatz label.
    pub coefficients: Vec<LabeledValue>,
    pub final_loss: f64,
    pub loss_terms: Vec<LabeledValue>,
    pub train: Vec<SizeReport>,
    pub test: Vec<SizeReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub support: Option<SupportSplit>,
    pub optimizer: OptimizerSummary,
    pub flags: Vec<ReportFlag>,
    /// Trace of the best start, relative to the output directory.
    pub trace_file: String,
}

impl RecoveryReport {
    pub fn has_flag(&self, flag: ReportFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.coefficients.iter().find(|c| c.label == label).map(|c| c.value)
    }

    pub fn size(&self, n_sites: usize) -> Option<&SizeReport> {
        self.train.iter().chain(&self.test).find(|s| s.n_sites == n_sites)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v.get("schema_version").and_then(|x| x.as_u64());
        if found != Some(SCHEMA_VERSION as u64) {
            return Err(Error::SchemaVersion {
                found: found.unwrap_or(0) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Plain-text table, one row per size.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5} {:>5} {:>8} {:>20} {:>12} {:>12} {:>12}",
            "set", "N", "dim", "overlap", "sigma2_rel", "kl", "gap"
        );
        for (set, rows) in [("train", &self.train), ("test", &self.test)] {
            for r in rows {
                let rel = r.relative_variance.map_or("-".to_string(), |v| format!("{v:.3e}"));
                let _ = writeln!(
                    s,
                    "{:>5} {:>5} {:>8} {:>20.15} {:>12} {:>12.3e} {:>12.6}",
                    set, r.n_sites, r.dim, r.overlap, rel, r.kl, r.gap
                );
            }
        }
        let _ = writeln!(s, "final loss {:.6e}", self.final_loss);
        for c in &self.coefficients {
            let _ = writeln!(s, "  {:<12} {:+.10}", c.label, c.value);
        }
        if let Some(sp) = &self.support {
            let _ = writeln!(s, "off-support sum |gamma| = {:.3e}", sp.off_support_l1);
        }
        if !self.flags.is_empty() {
            let flags: Vec<String> = self.flags.iter().map(|f| format!("{f:?}")).collect();
            let _ = writeln!(s, "flags: {}", flags.join(", "));
        }
        s
    }
}

/// Flags implied by the measured overlaps, the support and the termination.
pub fn compute_flags(
    train: &[SizeReport],
    test: &[SizeReport],
    support: Option<&SupportSplit>,
    termination: Termination,
) -> Vec<ReportFlag> {
    let mut flags = Vec::new();
    if train.iter().any(|r| r.overlap < 1.0 - APPROXIMATE_FIT_TOL) {
        flags.push(ReportFlag::ApproximateFit);
    }
    if test.iter().any(|r| r.overlap < DEGRADED_TEST_OVERLAP) {
        flags.push(ReportFlag::DegradedTestOverlap);
    }
    if support.is_some_and(|s| !s.missing_support.is_empty()) {
        flags.push(ReportFlag::UnderSpannedBasis);
    }
    if termination == Termination::MaxIterations {
        flags.push(ReportFlag::BudgetExhausted);
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, overlap: f64) -> SizeReport {
        SizeReport {
            n_sites: n,
            dim: 1 << n,
            overlap,
            energy_variance: 0.0,
            relative_variance: Some(0.0),
            kl: 0.0,
            e0: -1.0,
            gap: 0.5,
            ground_degeneracy: 1,
        }
    }

    fn report() -> RecoveryReport {
        RecoveryReport {
            schema_version: SCHEMA_VERSION,
            kind: RunKind::Recover,
            seed: 1,
            params: vec![1.0, 0.25],
            coefficients: vec![
                LabeledValue {
                    label: "a".into(),
                    value: 1.0,
                },
                LabeledValue {
                    label: "b".into(),
                    value: 0.25,
                },
            ],
            final_loss: 1e-12,
            loss_terms: vec![],
            train: vec![row(4, 1.0)],
            test: vec![row(6, 0.99)],
            support: None,
            optimizer: OptimizerSummary {
                termination: Termination::GradientTolerance,
                iterations: 3,
                evaluations: 40,
                n_starts: 1,
                best_start: 0,
                final_loss_dispersion: 0.0,
                failed_starts: vec![],
            },
            flags: vec![ReportFlag::DegradedTestOverlap],
            trace_file: "trace.csv".into(),
        }
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let r = report();
        let s = r.to_json().unwrap();
        assert_eq!(RecoveryReport::from_json(&s).unwrap(), r);
        let old = s.replace("\"schema_version\": 1", "\"schema_version\": 0");
        assert!(matches!(
            RecoveryReport::from_json(&old),
            Err(Error::SchemaVersion { found: 0, .. })
        ));
        assert!(r.table().contains("DegradedTestOverlap"));
        assert_eq!(r.coefficient("b"), Some(0.25));
        assert_eq!(r.size(6).unwrap().overlap, 0.99);
    }

    #[test]
    fn flags_follow_thresholds() {
        let f = compute_flags(&[row(4, 1.0)], &[row(6, 0.9995)], None, Termination::LossChange);
        assert!(f.is_empty());
        let f = compute_flags(&[row(4, 0.99)], &[row(6, 0.5)], None, Termination::MaxIterations);
        assert_eq!(
            f,
            [
                ReportFlag::ApproximateFit,
                ReportFlag::DegradedTestOverlap,
                ReportFlag::BudgetExhausted
            ]
        );
    }
}

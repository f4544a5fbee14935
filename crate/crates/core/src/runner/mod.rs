//! Experiment drivers: build a loss from a config, run the search, and persist results.
//!
//! Output directory layout of `recover` / `extrapolate`:
//! `config.toml` (effective config), `report.json`, `trace.csv` (best start),
//! `traces/start_NNN.csv` (every successful start) and `references/N{n}.amp`.
//! `scan` writes `config.toml`, `grid.csv`, `trace_cgd.csv`, `trace_sd.csv` and
//! `scan.json`; `bench` writes `bench.json`.

pub mod config;
pub mod planted;
pub mod reference;
pub mod report;
pub mod scan;

pub use config::{ExperimentConfig, ReferenceConfig, SizeWeighting, TermConfig, TermKindName, SCHEMA_VERSION};
pub use planted::{generate_planted_problem, PlantedOptions, PlantedProblem};
pub use reference::{make_reference_state, read_amplitudes, write_amplitudes, NamedState};
pub use report::{RecoveryReport, ReportFlag, RunKind, SizeReport};
pub use scan::{scan_objective, Grid, ScanResult, ScanSummary};

use crate::error::{Error, Result};
use crate::hilbert::{SpinBasis, WaveFunction};
use crate::loss::{Gauge, LossSpec, LossTerm, SizeSpec, TermKind};
use crate::operators::{HamiltonianAnsatz, ParamBox};
use crate::optimizer::{fd_gradient, multistart, random_starts, MultistartResult, Objective, OptimizationTrace};
use crate::spectra::eigs_low;
use report::{compute_flags, LabeledValue, OptimizerSummary, SupportSplit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Largest-size importance used by `extrapolate` when the config sets none.
pub const EXTRAPOLATE_IMPORTANCE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Recover,
    Extrapolate,
    Scan,
    Bench,
}

/// Everything derived from a config before optimization starts.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mode: RunMode,
    pub ansatz: Arc<HamiltonianAnsatz>,
    pub train: Vec<Arc<SpinBasis>>,
    pub test: Vec<Arc<SpinBasis>>,
    pub references: BTreeMap<usize, WaveFunction>,
    pub planted: Option<PlantedProblem>,
    /// The training loss.
    pub loss: LossSpec,
    /// Overlap-only loss over every size, used to read off observables.
    probe: LossSpec,
}

impl Experiment {
    /// Builds bases, references and the loss. Relative amplitude-file paths resolve
    /// against `base_dir`.
    pub fn prepare(config: &ExperimentConfig, mode: RunMode, base_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let sys = &config.system;
        if mode == RunMode::Extrapolate {
            let max_train = *sys.train_sizes.iter().max().expect("validated");
            if sys.test_sizes.is_empty() || sys.test_sizes.iter().any(|&n| n <= max_train) {
                return Err(Error::Config(
                    "extrapolate needs test sizes strictly larger than every training size".into(),
                ));
            }
        }
        let map = config.parametrization.build(sys.model.labels()?.len() - sys.exclude.len())?;
        let ansatz = Arc::new(HamiltonianAnsatz::from_model(sys.model.clone(), &sys.exclude, map)?);
        let local_dim = sys.model.local_dim()?;
        let make = |n: usize| SpinBasis::new(n, local_dim, sys.twice_sz, sys.boundary).map(Arc::new);
        let train = sys.train_sizes.iter().map(|&n| make(n)).collect::<Result<Vec<_>>>()?;
        let test = sys.test_sizes.iter().map(|&n| make(n)).collect::<Result<Vec<_>>>()?;
        let all: Vec<Arc<SpinBasis>> = train.iter().chain(&test).cloned().collect();

        let (references, planted) = build_references(config, &ansatz, &all, base_dir)?;

        let importance = config.loss.largest_size_importance.unwrap_or(match mode {
            RunMode::Extrapolate => EXTRAPOLATE_IMPORTANCE,
            _ => 1.0,
        });
        let max_train_dim = train.iter().map(|b| b.dim()).max().expect("validated") as f64;
        let largest = *sys.train_sizes.iter().max().expect("validated");
        let sizes: Vec<SizeSpec> = train
            .iter()
            .map(|b| {
                let base = match config.loss.size_weighting {
                    SizeWeighting::HilbertDimension => b.dim() as f64 / max_train_dim,
                    SizeWeighting::Uniform => 1.0,
                };
                let boost = if b.n_sites() == largest { importance } else { 1.0 };
                SizeSpec {
                    basis: b.clone(),
                    reference: Some(references[&b.n_sites()].clone()),
                    weight: base * boost,
                }
            })
            .collect();
        let loss = LossSpec::new(
            config.loss_terms()?,
            sizes,
            ansatz.clone(),
            config.loss.gauge,
            config.eigen.clone(),
        )?;
        let probe = LossSpec::new(
            vec![LossTerm::new(TermKind::Overlap { raw: false }, 1.0)],
            all.iter()
                .map(|b| SizeSpec {
                    basis: b.clone(),
                    reference: Some(references[&b.n_sites()].clone()),
                    weight: 1.0,
                })
                .collect(),
            ansatz.clone(),
            Gauge::None,
            config.eigen.clone(),
        )?;
        Ok(Self {
            config: config.clone(),
            mode,
            ansatz,
            train,
            test,
            references,
            planted,
            loss,
            probe,
        })
    }

    /// Random starts (or the configured start) in search coordinates.
    pub fn starts(&self) -> Result<Vec<Vec<f64>>> {
        if let Some(s) = &self.config.search.start {
            return Ok(vec![s.clone()]);
        }
        let bounds = match &self.config.search.start_box {
            Some(b) => ParamBox::new(b.clone())?,
            None => self
                .ansatz
                .map()
                .param_box()
                .cloned()
                .unwrap_or_else(|| ParamBox::unit(self.ansatz.n_params())),
        };
        let gauge = self.loss.gauge();
        Ok(random_starts(&bounds, self.config.optimizer.n_starts, self.config.seed)
            .iter()
            .map(|x| gauge.reduce(x))
            .collect())
    }

    /// Planted parameters in the ansatz's coordinates (linear parametrizations only).
    pub fn planted_params(&self) -> Option<Vec<f64>> {
        let p = self.planted.as_ref()?;
        Some(
            self.ansatz
                .labels()
                .iter()
                .map(|l| {
                    let i = p.labels.iter().position(|m| m == l).expect("ansatz labels come from the model");
                    p.coefficients[i]
                })
                .collect(),
        )
    }

    /// Observables of `H(params)` at every training and test size.
    pub fn observe(&self, params: &[f64]) -> Result<(Vec<SizeReport>, Vec<SizeReport>)> {
        let b = self.probe.evaluate_full(params)?;
        let rows = b
            .observables
            .iter()
            .map(SizeReport::from_observables)
            .collect::<Result<Vec<_>>>()?;
        let (train, test) = rows.split_at(self.train.len());
        Ok((train.to_vec(), test.to_vec()))
    }

    fn support_split(&self, coefficients: &[f64]) -> Option<SupportSplit> {
        let p = self.planted.as_ref()?;
        let support_labels: Vec<&String> = p.support.iter().map(|&i| &p.labels[i]).collect();
        let mut split = SupportSplit {
            support: vec![],
            off_support: vec![],
            off_support_l1: 0.0,
            planted: vec![],
            missing_support: support_labels
                .iter()
                .filter(|l| !self.ansatz.labels().contains(l))
                .map(|l| l.to_string())
                .collect(),
        };
        let planted = self.planted_params().expect("planted");
        for ((label, &c), &star) in self.ansatz.labels().iter().zip(coefficients).zip(&planted) {
            let lv = LabeledValue {
                label: label.clone(),
                value: c,
            };
            if support_labels.contains(&label) {
                split.support.push(lv);
            } else {
                split.off_support_l1 += c.abs();
                split.off_support.push(lv);
            }
            split.planted.push(LabeledValue {
                label: label.clone(),
                value: star,
            });
        }
        Some(split)
    }

    /// Multistart search over the training loss.
    pub fn optimize(&self) -> Result<MultistartResult> {
        let starts = self.starts()?;
        multistart(&self.loss, &starts, &self.config.optimizer, self.config.search.method)
    }

    /// Report for the best start of `result`.
    pub fn report(&self, result: &MultistartResult) -> Result<RecoveryReport> {
        let trace = result.best_trace();
        let params = self.loss.full_params(trace.best_params())?;
        let breakdown = self.loss.evaluate_full(&params)?;
        let coefficients = self.ansatz.coefficients(&params)?;
        let (train, test) = self.observe(&params)?;
        let support = self.support_split(&coefficients);
        let flags = compute_flags(&train, &test, support.as_ref(), trace.termination());
        let failed = result
            .failures
            .iter()
            .map(|(i, m)| format!("start {i}: {m}"))
            .collect::<Vec<_>>();
        Ok(RecoveryReport {
            schema_version: SCHEMA_VERSION,
            kind: match self.mode {
                RunMode::Extrapolate => RunKind::Extrapolate,
                _ => RunKind::Recover,
            },
            seed: self.config.seed,
            params,
            coefficients: self
                .ansatz
                .labels()
                .iter()
                .zip(&coefficients)
                .map(|(l, &v)| LabeledValue {
                    label: l.clone(),
                    value: v,
                })
                .collect(),
            final_loss: breakdown.total,
            loss_terms: self
                .loss
                .term_names()
                .into_iter()
                .zip(&breakdown.per_term)
                .map(|(label, &value)| LabeledValue { label, value })
                .collect(),
            train,
            test,
            support,
            optimizer: OptimizerSummary {
                termination: trace.termination(),
                iterations: trace.iterations(),
                evaluations: trace.evaluations(),
                n_starts: result.traces.len() + result.failures.len(),
                best_start: start_index(result),
                final_loss_dispersion: result.dispersion,
                failed_starts: failed,
            },
            flags,
            trace_file: "trace.csv".into(),
        })
    }
}

/// Index among all starts (failed ones included) of the best run.
fn start_index(result: &MultistartResult) -> usize {
    let mut ok = 0;
    let mut i = 0;
    loop {
        if result.failures.iter().any(|(f, _)| *f == i) {
            i += 1;
            continue;
        }
        if ok == result.best {
            return i;
        }
        ok += 1;
        i += 1;
    }
}

fn build_references(
    config: &ExperimentConfig,
    ansatz: &HamiltonianAnsatz,
    bases: &[Arc<SpinBasis>],
    base_dir: Option<&Path>,
) -> Result<(BTreeMap<usize, WaveFunction>, Option<PlantedProblem>)> {
    match &config.reference {
        ReferenceConfig::Planted {
            support,
            seed,
            coefficient_range,
            min_gap,
        } => {
            let labels = config.system.model.labels()?;
            let idx = |l: &String| labels.iter().position(|m| m == l).expect("validated");
            let support: Vec<usize> = support.iter().map(idx).collect();
            let (fixed, l1_total) = match config.loss.gauge {
                Gauge::None => (None, None),
                Gauge::FreezeOne { index, value } => (Some((idx(&ansatz.labels()[index]), value)), None),
                Gauge::L1Sum { total } => (None, Some(total)),
            };
            let p = generate_planted_problem(
                &config.system.model,
                &support,
                bases,
                &PlantedOptions {
                    seed: *seed,
                    coefficient_range: *coefficient_range,
                    min_gap: *min_gap,
                    fixed,
                    l1_total,
                    eigen: config.eigen.clone(),
                },
            )?;
            Ok((p.references.clone(), Some(p)))
        }
        ReferenceConfig::Point { params } => {
            let mut refs = BTreeMap::new();
            for b in bases {
                let h = ansatz.hamiltonian_at(params, b)?;
                let r = eigs_low(&h, b, 1, &config.eigen)?;
                if r.ground_degeneracy != 1 {
                    return Err(Error::Config(format!(
                        "the reference point has a {}-fold degenerate ground level at N = {}",
                        r.ground_degeneracy,
                        b.n_sites()
                    )));
                }
                refs.insert(b.n_sites(), r.eigenvectors[0].clone());
            }
            Ok((refs, None))
        }
        ReferenceConfig::Named { state } => {
            let mut refs = BTreeMap::new();
            for b in bases {
                refs.insert(b.n_sites(), make_reference_state(*state, b)?);
            }
            Ok((refs, None))
        }
        ReferenceConfig::File { paths } => {
            let mut refs = BTreeMap::new();
            for b in bases {
                let rel = &paths[&b.n_sites().to_string()];
                let path = match base_dir {
                    Some(d) if rel.is_relative() => d.join(rel),
                    _ => rel.clone(),
                };
                let f = File::open(&path)
                    .map_err(|e| Error::Config(format!("cannot open amplitude file {}: {e}", path.display())))?;
                refs.insert(b.n_sites(), read_amplitudes(BufReader::new(f), b)?);
            }
            Ok((refs, None))
        }
    }
}

/// Result of `recover` / `extrapolate`.
#[derive(Debug)]
pub struct RecoveryRun {
    pub experiment: Experiment,
    pub result: MultistartResult,
    pub report: RecoveryReport,
}

impl RecoveryRun {
    pub fn best_trace(&self) -> &OptimizationTrace {
        self.result.best_trace()
    }

    /// Writes config, report, traces and reference states into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("traces"))?;
        std::fs::create_dir_all(dir.join("references"))?;
        self.experiment.config.save(&dir.join("config.toml"))?;
        write_trace(self.best_trace(), &dir.join(&self.report.trace_file))?;
        for (i, t) in self.result.traces.iter().enumerate() {
            write_trace(t, &dir.join("traces").join(format!("start_{i:03}.csv")))?;
        }
        for (n, psi) in &self.experiment.references {
            let f = BufWriter::new(File::create(dir.join("references").join(format!("N{n}.amp")))?);
            write_amplitudes(f, psi)?;
        }
        self.report.save(&dir.join("report.json"))
    }
}

pub fn write_trace(trace: &OptimizationTrace, path: &Path) -> Result<()> {
    trace.write_csv(BufWriter::new(File::create(path)?))
}

pub fn run_recover(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<RecoveryRun> {
    run_recovery(config, RunMode::Recover, base_dir)
}

/// Like [`run_recover`], with the largest training size weighted up by default and
/// test sizes required to exceed every training size.
pub fn run_extrapolate(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<RecoveryRun> {
    run_recovery(config, RunMode::Extrapolate, base_dir)
}

fn run_recovery(config: &ExperimentConfig, mode: RunMode, base_dir: Option<&Path>) -> Result<RecoveryRun> {
    let experiment = Experiment::prepare(config, mode, base_dir)?;
    let result = experiment.optimize()?;
    let report = experiment.report(&result)?;
    Ok(RecoveryRun {
        experiment,
        result,
        report,
    })
}

/// Recomputes the report's final loss from a persisted trace and its config.
pub fn recompute_final_loss(config: &ExperimentConfig, mode: RunMode, base_dir: Option<&Path>, trace_csv: &Path) -> Result<f64> {
    let experiment = Experiment::prepare(config, mode, base_dir)?;
    let (_, rows) = OptimizationTrace::read_csv(BufReader::new(File::open(trace_csv)?))?;
    let best = rows
        .iter()
        .min_by(|a, b| a.loss.total_cmp(&b.loss))
        .ok_or_else(|| Error::InvalidArgument("trace has no rows".into()))?;
    Ok(experiment.loss.evaluate(&best.params)?.total)
}

/// Scan of the training loss over a two-parameter box.
pub fn run_scan(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<ScanResult> {
    let experiment = Experiment::prepare(config, RunMode::Scan, base_dir)?;
    let scan_cfg = config.scan.clone().unwrap_or_default();
    if experiment.loss.reduced_dim() != 2 || experiment.loss.gauge() != Gauge::None {
        return Err(Error::Config(format!(
            "scan needs exactly two free parameters and no gauge, got {} parameters",
            experiment.ansatz.n_params()
        )));
    }
    let bounds = experiment
        .ansatz
        .map()
        .param_box()
        .cloned()
        .ok_or_else(|| Error::Config("scan needs parametrization bounds".into()))?;
    let loss = &experiment.loss;
    let sizes: Vec<usize> = experiment.train.iter().map(|b| b.n_sites()).collect();
    let mut names = loss.term_names();
    for n in &sizes {
        for obs in ["overlap", "kl", "energy_variance", "e0", "gap"] {
            names.push(format!("{obs}_n{n}"));
        }
    }
    let grid = scan::scan_grid(&bounds, scan_cfg.n1, scan_cfg.n2, names, |p| {
        let b = loss.evaluate_full(p)?;
        let mut layers = b.per_term.clone();
        for o in &b.observables {
            layers.extend([
                o.overlap.unwrap_or(f64::NAN),
                o.kl.unwrap_or(f64::NAN),
                o.energy_variance.unwrap_or(f64::NAN),
                o.e0,
                o.gap,
            ]);
        }
        Ok((b.total, layers))
    })?;
    let start = scan_cfg.start.unwrap_or_else(|| bounds.center());
    let (cgd, steepest) = scan::descent_paths(loss, &start, &config.optimizer)?;
    Ok(ScanResult {
        grid,
        start,
        cgd,
        steepest,
    })
}

/// Writes the outputs of [`run_scan`] into `dir`.
pub fn persist_scan(config: &ExperimentConfig, result: &ScanResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    config.save(&dir.join("config.toml"))?;
    result.grid.write_csv(BufWriter::new(File::create(dir.join("grid.csv"))?))?;
    write_trace(&result.cgd, &dir.join("trace_cgd.csv"))?;
    write_trace(&result.steepest, &dir.join("trace_sd.csv"))?;
    std::fs::write(dir.join("scan.json"), serde_json::to_string_pretty(&result.summary())? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub operation: String,
    pub n_sites: Option<usize>,
    pub dim: Option<usize>,
    pub repetitions: usize,
    pub seconds_per_call: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let size = e.n_sites.map_or("-".to_string(), |n| n.to_string());
            let dim = e.dim.map_or("-".to_string(), |d| d.to_string());
            s += &format!(
                "{:<14} N={:<4} dim={:<8} {:>12.3e} s/call ({} reps)\n",
                e.operation, size, dim, e.seconds_per_call, e.repetitions
            );
        }
        s
    }
}

/// Repeats `f` until `budget` seconds have passed (at least once, at most `max_reps`).
fn time_it<F: FnMut() -> Result<()>>(budget: f64, max_reps: usize, mut f: F) -> Result<(usize, f64)> {
    let t0 = Instant::now();
    let mut reps = 0;
    while reps < max_reps && (reps == 0 || t0.elapsed().as_secs_f64() < budget) {
        f()?;
        reps += 1;
    }
    Ok((reps, t0.elapsed().as_secs_f64() / reps as f64))
}

/// Times the main kernels on the configured system at a random parameter point.
pub fn run_bench(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<BenchReport> {
    let experiment = Experiment::prepare(config, RunMode::Bench, base_dir)?;
    let x = experiment.starts()?.remove(0);
    let params = experiment.loss.full_params(&x)?;
    let mut entries = Vec::new();
    for b in &experiment.train {
        let h = experiment.ansatz.hamiltonian_at(&params, b)?;
        let v = experiment.references[&b.n_sites()].amplitudes().to_vec();
        let (reps, secs) = time_it(0.2, 10_000, || h.apply(&v).map(drop))?;
        entries.push(BenchEntry {
            operation: "matvec".into(),
            n_sites: Some(b.n_sites()),
            dim: Some(b.dim()),
            repetitions: reps,
            seconds_per_call: secs,
        });
        let (reps, secs) = time_it(0.5, 100, || eigs_low(&h, b, 1, &config.eigen).map(drop))?;
        entries.push(BenchEntry {
            operation: "eigs_low".into(),
            n_sites: Some(b.n_sites()),
            dim: Some(b.dim()),
            repetitions: reps,
            seconds_per_call: secs,
        });
    }
    let (reps, secs) = time_it(0.5, 100, || experiment.loss.evaluate(&x).map(drop))?;
    entries.push(BenchEntry {
        operation: "evaluate_loss".into(),
        n_sites: None,
        dim: None,
        repetitions: reps,
        seconds_per_call: secs,
    });
    let (reps, secs) = time_it(1.0, 20, || {
        fd_gradient(&experiment.loss, &x, config.optimizer.fd_step).map(drop)
    })?;
    entries.push(BenchEntry {
        operation: "fd_gradient".into(),
        n_sites: None,
        dim: Some(experiment.loss.dim()),
        repetitions: reps,
        seconds_per_call: secs,
    });
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        entries,
    })
}

/// Sizes the global worker pool; must run before any parallel work.
pub fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot set up {n} worker threads: {e}")))
}

/// Output directory: the explicit one, else the config's, else `./out`.
pub fn output_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const AKLT: &str = r#"
schema_version = 1

[system]
model = { name = "heisenberg_bilinear_biquadratic" }
twice_sz = 0
train_sizes = [4]
test_sizes = [6]

[reference]
kind = "named"
state = "aklt_periodic"

[loss]
gauge = { kind = "freeze_one", index = 0, value = 1.0 }

[optimizer]
n_starts = 2
record_timing = false

[search]
start_box = [[0.5, 1.5], [-1.0, 1.0]]
"#;

    #[test]
    fn aklt_recovery_small() {
        let cfg = ExperimentConfig::from_toml_str(AKLT).unwrap();
        let run = run_recover(&cfg, None).unwrap();
        let r = &run.report;
        assert_eq!(r.coefficient("bilinear"), Some(1.0));
        assert!((r.coefficient("biquadratic").unwrap() - 1.0 / 3.0).abs() < 1e-3, "{}", r.table());
        assert!(r.train[0].overlap > 1.0 - 1e-9);
        assert!(r.test[0].overlap > 1.0 - 1e-6);
        assert!(r.support.is_none());
    }

    #[test]
    fn persisted_trace_reproduces_loss() {
        let cfg = ExperimentConfig::from_toml_str(AKLT).unwrap();
        let run = run_recover(&cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run.persist(dir.path()).unwrap();
        let back = RecoveryReport::load(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, run.report);
        let loaded = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
        let again = recompute_final_loss(&loaded, RunMode::Recover, None, &dir.path().join("trace.csv")).unwrap();
        assert!((again - back.final_loss).abs() < 1e-12);
        let amp = std::fs::read_to_string(dir.path().join("references/N4.amp")).unwrap();
        assert!(amp.starts_with("# n_sites=4"));
    }

    #[test]
    fn extrapolate_requires_larger_test_sizes() {
        let mut cfg = ExperimentConfig::from_toml_str(AKLT).unwrap();
        cfg.system.test_sizes = vec![];
        assert!(matches!(
            Experiment::prepare(&cfg, RunMode::Extrapolate, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn planted_freeze_respects_gauge() {
        let mut cfg = ExperimentConfig::from_toml_str(AKLT).unwrap();
        cfg.system.model = crate::operators::ModelSpec::J1J2 { spin: 0.5 };
        cfg.system.train_sizes = vec![6];
        cfg.system.test_sizes = vec![];
        cfg.reference = ReferenceConfig::Planted {
            support: vec!["J1".into(), "J2".into()],
            seed: 4,
            coefficient_range: [0.1, 0.4],
            min_gap: 1e-3,
        };
        cfg.loss.terms.truncate(3);
        let e = Experiment::prepare(&cfg, RunMode::Recover, None).unwrap();
        let p = e.planted_params().unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.1 && p[1] <= 0.4);
        let b = e.loss.evaluate_full(&p).unwrap();
        assert!(b.total < 1e-10, "{}", b.total);
    }

    #[test]
    fn scan_rejects_wrong_dimension() {
        let cfg = ExperimentConfig::from_toml_str(AKLT).unwrap();
        assert!(matches!(run_scan(&cfg, None), Err(Error::Config(_))));
    }
}

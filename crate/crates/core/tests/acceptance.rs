//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.
//!
//! Lines go straight to the process stdout so they show up without `--nocapture`.
//! Criterion 1 runs ten full planted recoveries and dominates the wall time.

use hamsearch::hilbert::{kl_divergence, WaveFunction};
use hamsearch::operators::CsrMatrix;
use hamsearch::optimizer::{fd_gradient, minimize, CgdConfig, FnObjective, Method};
use hamsearch::runner::{
    persist_scan, run_extrapolate, run_recover, run_scan, Experiment, ExperimentConfig, Grid, ReportFlag,
    RunMode,
};
use hamsearch::spectra::{eigs_low, energy_variance, EigenOptions};
use hamsearch::{Boundary, ModelSpec, SparseMatrix, SpinBasis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

/// Criteria run one at a time so the timed ones are not slowed by the others.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn config(toml: &str) -> ExperimentConfig {
    let cfg = ExperimentConfig::from_toml_str(toml).unwrap();
    cfg.validate().unwrap();
    cfg
}

// ---------------------------------------------------------------- criterion 1

const PLANTED_SUPPORT: &str = r#"["X", "ZZ", "XIX", "XZZ", "YZY", "ZXZ", "ZZX"]"#;

fn planted_recovery_config(seed: u64) -> ExperimentConfig {
    config(&format!(
        r#"
schema_version = 1
seed = {seed}

[system]
model = {{ name = "pauli_strings_k_local", k = 3 }}
train_sizes = [8]

[reference]
kind = "planted"
support = {PLANTED_SUPPORT}
seed = {seed}

[loss]
gauge = {{ kind = "freeze_one", index = 0, value = 1.0 }}

[[loss.terms]]
kind = "overlap"
weight = 1.0

[[loss.terms]]
kind = "kl"
weight = 0.2

[[loss.terms]]
kind = "energy_variance"
weight = 1.0

# The loss is close to a quadratic form here; resetting to steepest descent every
# 25 steps (the default) throws away the conjugacy that makes it converge.
[optimizer]
max_iters = 600
restart_period = 200
target_loss = 5e-10
seed = {seed}
"#
    ))
}

#[test]
fn criterion_1_planted_exact_recovery() {
    let _serial = serial();
    let mut failures = Vec::new();
    let mut worst = (1.0f64, 0.0f64, 0.0f64, Duration::ZERO);
    for seed in 0..10 {
        let cfg = planted_recovery_config(seed);
        let t = Instant::now();
        let run = run_recover(&cfg, None).unwrap();
        let elapsed = t.elapsed();
        let r = &run.report;
        assert_eq!(r.coefficients.len(), 26);
        let train = &r.train[0];
        let off = r.support.as_ref().unwrap().off_support_l1;
        worst.0 = worst.0.min(train.overlap);
        worst.1 = worst.1.max(train.energy_variance);
        worst.2 = worst.2.max(off);
        worst.3 = worst.3.max(elapsed);
        let ok = train.overlap >= 0.9999999
            && train.energy_variance <= 1e-9
            && off < 1e-2
            && elapsed <= Duration::from_secs(300);
        if !ok {
            failures.push(format!(
                "seed {seed}: overlap {:.12}, variance {:.3e}, off-support {:.3e}, {:.0?}",
                train.overlap, train.energy_variance, off, elapsed
            ));
        }
    }
    let pass = failures.is_empty();
    verdict(
        1,
        pass,
        &format!(
            "{}/10 seeds; worst overlap {:.12}, variance {:.3e}, off-support {:.3e}, runtime {:.0?}",
            10 - failures.len(),
            worst.0,
            worst.1,
            worst.2,
            worst.3
        ),
    );
    assert!(pass, "{failures:#?}");
}

// ---------------------------------------------------------------- criterion 2

const AKLT_N6: &str = r#"
schema_version = 1
seed = 1

[system]
model = { name = "heisenberg_bilinear_biquadratic", spin = 1.0 }
twice_sz = 0
train_sizes = [6]

[reference]
kind = "named"
state = "aklt_periodic"

[loss]
gauge = { kind = "freeze_one", index = 0, value = 1.0 }

[search]
start_box = [[0.5, 1.5], [-1.0, 1.0]]

[optimizer]
n_starts = 2
"#;

const MG_N8: &str = r#"
schema_version = 1
seed = 1

[system]
model = { name = "j1_j2", spin = 0.5 }
twice_sz = 0
train_sizes = [8]

[reference]
kind = "named"
state = "majumdar_ghosh_dimer"

[loss]
gauge = { kind = "freeze_one", index = 0, value = 1.0 }

[search]
start_box = [[0.5, 1.5], [0.0, 1.0]]

[optimizer]
n_starts = 2
"#;

#[test]
fn criterion_2_known_parents() {
    let _serial = serial();
    let t = Instant::now();
    let aklt = run_recover(&config(AKLT_N6), None).unwrap();
    let t_aklt = t.elapsed();
    let t = Instant::now();
    let mg = run_recover(&config(MG_N8), None).unwrap();
    let t_mg = t.elapsed();
    let bq = aklt.report.coefficient("biquadratic").unwrap();
    let j2 = mg.report.coefficient("J2").unwrap();
    let pass = aklt.report.coefficient("bilinear") == Some(1.0)
        && mg.report.coefficient("J1") == Some(1.0)
        && (bq - 0.3333).abs() <= 1e-3
        && (j2 - 0.5).abs() <= 1e-3
        && t_aklt <= Duration::from_secs(120)
        && t_mg <= Duration::from_secs(120);
    verdict(
        2,
        pass,
        &format!(
            "AKLT biquadratic {bq:.6} ({t_aklt:.1?}); MG J2 {j2:.6} ({t_mg:.1?}, ground degeneracy {})",
            mg.report.train[0].ground_degeneracy
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 3

/// Two-body spin-1 couplings only: the biquadratic operator is absent.
const AKLT_TWO_BODY: &str = r#"
schema_version = 1
seed = 1

[system]
model = { name = "j1_j2", spin = 1.0 }
twice_sz = 0
train_sizes = [6]
test_sizes = [8]

[reference]
kind = "named"
state = "aklt_periodic"

[loss]
gauge = { kind = "freeze_one", index = 0, value = 1.0 }

[search]
start_box = [[0.5, 1.5], [-0.5, 0.5]]

[optimizer]
n_starts = 3
"#;

#[test]
fn criterion_3_restricted_basis() {
    let _serial = serial();
    let run = run_recover(&config(AKLT_TWO_BODY), None).unwrap();
    let r = &run.report;
    let ov6 = r.size(6).unwrap().overlap;
    let ov8 = r.size(8).unwrap().overlap;
    let pass = r.final_loss.is_finite()
        && r.final_loss > 0.0
        && ov6 < 1.0
        && ov6 >= 0.9
        && (ov8 - ov6).abs() <= 0.05
        && r.has_flag(ReportFlag::ApproximateFit);
    verdict(
        3,
        pass,
        &format!(
            "J2/J1 {:.4}, loss {:.3e}, overlap N=6 {ov6:.6}, N=8 {ov8:.6}",
            r.coefficient("J2").unwrap(),
            r.final_loss
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 4

fn extrapolation_config(exclude: &str) -> ExperimentConfig {
    config(&format!(
        r#"
schema_version = 1
seed = 2

[system]
model = {{ name = "pauli_strings_k_local", k = 2 }}
train_sizes = [6, 8]
test_sizes = [10, 12]
exclude = [{exclude}]

[reference]
kind = "planted"
support = ["X", "Z", "XX", "ZZ"]
seed = 2

[loss]
gauge = {{ kind = "freeze_one", index = 0, value = 1.0 }}

[[loss.terms]]
kind = "overlap"
weight = 1.0

[[loss.terms]]
kind = "kl"
weight = 0.2

[[loss.terms]]
kind = "energy_variance"
weight = 1.0

[optimizer]
max_iters = 300
"#
    ))
}

#[test]
fn criterion_4_extrapolation() {
    let _serial = serial();
    let full = run_extrapolate(&extrapolation_config(""), None).unwrap();
    let under = run_extrapolate(&extrapolation_config("\"ZZ\""), None).unwrap();
    let f = &full.report;
    let u = &under.report;
    let test_ov = |r: &hamsearch::RecoveryReport| [r.size(10).unwrap().overlap, r.size(12).unwrap().overlap];
    let [f10, f12] = test_ov(f);
    let [u10, u12] = test_ov(u);
    let pass = f10 >= 0.9999
        && f12 >= 0.9999
        && !f.has_flag(ReportFlag::DegradedTestOverlap)
        && u10.min(u12) < 0.9999
        && u.has_flag(ReportFlag::UnderSpannedBasis)
        && u.has_flag(ReportFlag::DegradedTestOverlap);
    verdict(
        4,
        pass,
        &format!(
            "full basis test overlap N=10 {f10:.8}, N=12 {f12:.8}; without ZZ N=10 {u10:.6}, N=12 {u12:.6}, flags {:?}",
            u.flags
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 5

const VALLEY_MIN: [f64; 2] = [0.7, -0.4];
const VALLEY_KAPPA: f64 = 100.0;

/// Valley axes: `(cos 30deg, sin 30deg)` is the shallow one.
fn valley_axes() -> ([f64; 2], [f64; 2]) {
    let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    ([c, s], [-s, c])
}

/// `0.5 (u^2 + kappa v^2)` in the valley's own coordinates.
fn valley(x: &[f64]) -> f64 {
    let (eu, ev) = valley_axes();
    let (dx, dy) = (x[0] - VALLEY_MIN[0], x[1] - VALLEY_MIN[1]);
    let u = eu[0] * dx + eu[1] * dy;
    let v = ev[0] * dx + ev[1] * dy;
    0.5 * (u * u + VALLEY_KAPPA * v * v)
}

type Closed = (&'static str, fn(&[f64]) -> f64, fn(&[f64]) -> Vec<f64>);

fn closed_form() -> Vec<Closed> {
    vec![
        (
            "quadratic",
            |x| 3.0 * x[0] * x[0] + x[0] * x[1] + 2.0 * x[1] * x[1],
            |x| vec![6.0 * x[0] + x[1], x[0] + 4.0 * x[1]],
        ),
        (
            "rosenbrock",
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            |x| {
                vec![
                    -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                    200.0 * (x[1] - x[0] * x[0]),
                ]
            },
        ),
        (
            "sin-cos",
            |x| x[0].sin() * x[1].cos() + x[2],
            |x| vec![x[0].cos() * x[1].cos(), -x[0].sin() * x[1].sin(), 1.0],
        ),
        (
            "exponential",
            |x| (x[0] + 2.0 * x[1]).exp(),
            |x| {
                let e = (x[0] + 2.0 * x[1]).exp();
                vec![e, 2.0 * e]
            },
        ),
        (
            "log-sum",
            |x| (1.0 + x[0] * x[0] + x[1].powi(4)).ln(),
            |x| {
                let d = 1.0 + x[0] * x[0] + x[1].powi(4);
                vec![2.0 * x[0] / d, 4.0 * x[1].powi(3) / d]
            },
        ),
    ]
}

#[test]
fn criterion_5_optimizer_correctness() {
    let _serial = serial();
    let target = VALLEY_MIN;
    let dist = |x: &[f64]| ((x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2)).sqrt();
    let f = FnObjective::new(2, valley);
    // Start with u = kappa v, where steepest descent zigzags at its slowest rate.
    let (eu, ev) = valley_axes();
    let (u0, v0) = (1.5, 1.5 / VALLEY_KAPPA);
    let start = [
        VALLEY_MIN[0] + u0 * eu[0] + v0 * ev[0],
        VALLEY_MIN[1] + u0 * eu[1] + v0 * ev[1],
    ];
    let cfg = CgdConfig {
        record_timing: false,
        ..CgdConfig::default()
    };
    let cg = minimize(&f, &start, &cfg, Method::ConjugateGradient, 0).unwrap();
    let cg_best = cg
        .rows()
        .iter()
        .filter(|r| r.step <= 3)
        .map(|r| dist(&r.params))
        .fold(f64::INFINITY, f64::min);
    let sd_cfg = CgdConfig {
        max_iters: 24,
        perturbation: hamsearch::optimizer::PerturbationConfig {
            enabled: false,
            ..Default::default()
        },
        loss_change_tol: f64::MIN_POSITIVE,
        ..cfg.clone()
    };
    let sd = minimize(&f, &start, &sd_cfg, Method::SteepestDescent, 0).unwrap();
    let sd_dist = dist(sd.final_row().params.as_slice());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_rel: f64 = 0.0;
    for (_, func, grad) in closed_form() {
        let dim = grad(&[0.0; 3]).len();
        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fd = fd_gradient(&FnObjective::new(dim, func), &x, 1e-5).unwrap();
            let exact = grad(&x);
            let num: f64 = fd.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            worst_rel = worst_rel.max(num / den);
        }
    }
    let pass = cg_best < 1e-6 && sd.iterations() == 24 && sd_dist > 10.0 * cg_best && sd_dist > 1e-5 && worst_rel <= 1e-6;
    verdict(
        5,
        pass,
        &format!(
            "CG distance after <= 3 iterations {cg_best:.2e}; steepest descent after 24 iterations {sd_dist:.2e}; worst FD relative error {worst_rel:.2e}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 6

const SCAN: &str = r#"
schema_version = 1
seed = 0

[system]
model = { name = "transverse_field_ising" }
train_sizes = [8]

[parametrization]
kind = "polynomial"
n_params = 2
bounds = [[0.5, 1.5], [0.0, 2.0]]
outputs = [
  [{ coefficient = 1.0, powers = [1, 0] }],
  [{ coefficient = 1.0, powers = [1, 1] }],
]

[reference]
kind = "point"
params = [0.83, 0.61]

[[loss.terms]]
kind = "overlap"
weight = 1.0

[[loss.terms]]
kind = "energy_variance"
weight = 1.0

[[loss.terms]]
kind = "target_value"
weight = 1.0
observable = "ground_energy"
target = TARGET

[optimizer]
record_timing = false

[scan]
n1 = 10
n2 = 11
start = [1.3, 1.7]
"#;

#[test]
fn criterion_6_scan_protocol() {
    let _serial = serial();
    // Pin the scale with the ground energy at the reference point, so the minimum is unique.
    let probe = config(&SCAN.replace("TARGET", "0.0"));
    let e = Experiment::prepare(&probe, RunMode::Scan, None).unwrap();
    let e0 = e.loss.spectra(&[0.83, 0.61]).unwrap()[0].e0();
    let cfg = config(&SCAN.replace("TARGET", &format!("{e0:?}")));
    let result = run_scan(&cfg, None).unwrap();
    let s = result.summary();
    let dir = tempfile::tempdir().unwrap();
    persist_scan(&cfg, &result, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let grid = Grid::read_csv(text.as_bytes(), 10, 11).unwrap();
    let header = text.lines().next().unwrap().to_string();
    let layers_ok = ["overlap_n8", "kl_n8", "energy_variance_n8", "e0_n8", "gap_n8"]
        .iter()
        .all(|l| grid.layer_names.iter().any(|n| n == l))
        && grid.rows.len() == 110
        && grid == result.grid;
    let cgd = &s.conjugate_gradient;
    let beats_all = result.grid.rows.iter().all(|r| cgd.loss < r.total);
    let near = ((cgd.endpoint[0] - 0.83).powi(2) + (cgd.endpoint[1] - 0.61).powi(2)).sqrt();
    let pass = layers_ok && beats_all && cgd.loss <= s.grid_best_loss + 1e-9 && cgd.evaluations > 0 && near < 1e-4;
    verdict(
        6,
        pass,
        &format!(
            "CG: {} evaluations vs {} grid points, loss {:.3e} at ({:.8}, {:.8}); best grid loss {:.3e}; steepest descent {} evaluations, loss {:.3e}; header {header}",
            cgd.evaluations,
            s.grid_evaluations,
            cgd.loss,
            cgd.endpoint[0],
            cgd.endpoint[1],
            s.grid_best_loss,
            s.steepest_descent.evaluations,
            s.steepest_descent.loss
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 7

fn random_state(basis: &Arc<SpinBasis>, rng: &mut ChaCha8Rng) -> WaveFunction {
    let amps = (0..basis.dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    WaveFunction::normalized(basis.clone(), amps).unwrap()
}

/// Random sparse Hermitian matrix with about `2 * per_row + 1` entries per row.
fn random_sparse_hermitian(dim: usize, per_row: usize, complex: bool, rng: &mut ChaCha8Rng) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..dim {
        triplets.push((r, r, Complex64::new(rng.random_range(-2.0..2.0), 0.0)));
        for _ in 0..per_row {
            let c = rng.random_range(0..dim);
            let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
            let v = Complex64::new(rng.random_range(-1.0..1.0), im);
            triplets.push((r, c, v));
            triplets.push((c, r, v.conj()));
        }
    }
    let m = CsrMatrix::from_triplets(dim, triplets);
    if complex {
        SparseMatrix::Complex(m)
    } else {
        SparseMatrix::Real(CsrMatrix::from_triplets(dim, m.iter().map(|(r, c, v)| (r, c, v.re)).collect()))
    }
}

fn tfim(n: usize, field: f64) -> (SparseMatrix, Arc<SpinBasis>) {
    let basis = Arc::new(SpinBasis::full(n, 2, Boundary::Periodic).unwrap());
    let ansatz = hamsearch::HamiltonianAnsatz::from_model(
        ModelSpec::TransverseFieldIsing {},
        &[],
        hamsearch::ParametrizationMap::linear(2),
    )
    .unwrap();
    (ansatz.hamiltonian_at(&[1.0, field], &basis).unwrap(), basis)
}

#[test]
fn criterion_7_invariants() {
    let _serial = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();

    // Energy variance: non-negative on random states, zero on eigenstates.
    let mut var_ok = true;
    let mut worst_eig_var: f64 = 0.0;
    for field in [0.3, 1.0, 2.5] {
        let (h, basis) = tfim(8, field);
        for _ in 0..20 {
            var_ok &= energy_variance(&h, &random_state(&basis, &mut rng)).unwrap() >= 0.0;
        }
        let ev = eigs_low(&h, &basis, 3, &EigenOptions::default()).unwrap();
        for v in &ev.eigenvectors {
            worst_eig_var = worst_eig_var.max(energy_variance(&h, v).unwrap());
        }
    }
    var_ok &= worst_eig_var <= 1e-12;
    notes.push(format!("eigenstate variance {worst_eig_var:.1e}"));

    // KL: non-negative, zero against phase-flipped copies.
    let basis = Arc::new(SpinBasis::full(6, 2, Boundary::Periodic).unwrap());
    let mut kl_ok = true;
    let mut worst_flip: f64 = 0.0;
    for _ in 0..50 {
        let a = random_state(&basis, &mut rng);
        let b = random_state(&basis, &mut rng);
        kl_ok &= kl_divergence(&a, &b).unwrap() >= 0.0;
        let flipped: Vec<Complex64> = a
            .amplitudes()
            .iter()
            .map(|z| z * Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let f = WaveFunction::new(basis.clone(), flipped).unwrap();
        worst_flip = worst_flip.max(kl_divergence(&a, &f).unwrap().abs());
    }
    kl_ok &= worst_flip <= 1e-12;
    notes.push(format!("KL on phase flips {worst_flip:.1e}"));

    // Lanczos against a dense solver on 20 random matrices of dimension 512 to 2048,
    // complex Hermitian up to 1024.
    let mut worst_eig: f64 = 0.0;
    let shapes = [(9, 2), (6, 3), (10, 2), (11, 2)];
    for i in 0..20 {
        let (n, d) = shapes[i % shapes.len()];
        let basis = Arc::new(SpinBasis::full(n, d, Boundary::Open).unwrap());
        let complex = i % 2 == 1 && basis.dim() <= 1024;
        let h = random_sparse_hermitian(basis.dim(), 4, complex, &mut rng);
        let lanczos = eigs_low(
            &h,
            &basis,
            4,
            &EigenOptions {
                dense_threshold: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let mut exact: Vec<f64> = match &h {
            SparseMatrix::Real(m) => m.to_dense().symmetric_eigenvalues().iter().copied().collect(),
            SparseMatrix::Complex(m) => m.to_dense().symmetric_eigenvalues().iter().copied().collect(),
        };
        exact.sort_by(f64::total_cmp);
        for (l, e) in lanczos.eigenvalues.iter().zip(&exact) {
            worst_eig = worst_eig.max((l - e).abs());
        }
    }
    let eig_ok = worst_eig <= 1e-8;
    notes.push(format!("sparse/dense eigenvalues {worst_eig:.1e}"));

    // Deterministic traces under a fixed seed.
    let mut cfg = config(AKLT_N6);
    cfg.optimizer.record_timing = false;
    cfg.optimizer.max_iters = 15;
    let a = run_recover(&cfg, None).unwrap().best_trace().to_csv_string().unwrap();
    let b = run_recover(&cfg, None).unwrap().best_trace().to_csv_string().unwrap();
    let det_ok = a == b;

    // Breakdown totals match the sum of their contributions.
    let e = Experiment::prepare(&config(AKLT_TWO_BODY), RunMode::Recover, None).unwrap();
    let mut worst_sum: f64 = 0.0;
    for _ in 0..20 {
        let p = [1.0, rng.random_range(-1.0..1.0)];
        let br = e.loss.evaluate_full(&p).unwrap();
        let sum: f64 = br.contributions.iter().map(|c| c.contribution).sum();
        let per: f64 = br.per_term.iter().sum();
        worst_sum = worst_sum.max((sum - br.total).abs()).max((per - br.total).abs());
    }
    let sum_ok = worst_sum <= 1e-12;
    notes.push(format!("breakdown totals {worst_sum:.1e}"));

    let pass = var_ok && kl_ok && eig_ok && det_ok && sum_ok;
    verdict(
        7,
        pass,
        &format!(
            "variance {var_ok}, KL {kl_ok}, eigen {eig_ok}, determinism {det_ok}, totals {sum_ok}; {}",
            notes.join(", ")
        ),
    );
    assert!(pass);
}

//! Nonlinear conjugate gradient descent with finite-difference gradients.

mod linesearch;
mod trace;

use crate::error::{Error, Result};
use crate::operators::ParamBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

pub use linesearch::{golden_section, LineSearchConfig, LineSearchOutcome, LineSearchStatus};
pub use trace::{OptimizationTrace, Termination, TraceRow};

/// Loss value and its named components.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub total: f64,
    pub terms: Vec<f64>,
}

/// Function minimized by the optimizers. Must be safe to evaluate concurrently.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;
    fn term_names(&self) -> Vec<String> {
        Vec::new()
    }
    /// Maps a point back onto the feasible surface after an accepted step.
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
    /// A copy specialized for evaluations in a small neighbourhood of `x`, used by
    /// [`fd_gradient`]. It must agree with `self` up to solver tolerance.
    fn anchored(&self, _x: &[f64]) -> Result<Option<Box<dyn Objective + '_>>> {
        Ok(None)
    }
}

/// Plain closure objective without named terms.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation {
            total: (self.f)(x),
            terms: Vec::new(),
        })
    }
}

/// Counts evaluations passed through to the inner objective.
pub struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    count: AtomicUsize,
}

/// Anchored copy of a [`Counted`] objective that adds to the same counter.
struct CountedAnchor<'a> {
    inner: Box<dyn Objective + 'a>,
    count: &'a AtomicUsize,
}

impl Objective for CountedAnchor<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(x)
    }

    fn term_names(&self) -> Vec<String> {
        self.inner.term_names()
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.project(x)
    }
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl<O: Objective + ?Sized> Objective for Counted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(x)
    }

    fn term_names(&self) -> Vec<String> {
        self.inner.term_names()
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.project(x)
    }

    fn anchored(&self, x: &[f64]) -> Result<Option<Box<dyn Objective + '_>>> {
        Ok(self.inner.anchored(x)?.map(|inner| {
            Box::new(CountedAnchor {
                inner,
                count: &self.count,
            }) as Box<dyn Objective + '_>
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaScheme {
    #[default]
    HestenesStiefel,
    PolakRibiere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub enabled: bool,
    /// Steps without relative improvement above `loss_change_tol` before escaping.
    pub patience: usize,
    /// Kick radius relative to `max(||x||, 1e-3)`.
    pub scale: f64,
    pub max_escapes: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            patience: 10,
            scale: 0.1,
            max_escapes: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgdConfig {
    pub beta_scheme: BetaScheme,
    /// Steps between resets to steepest descent; the domain dimension when absent.
    pub restart_period: Option<usize>,
    /// Finite-difference step relative to `max(1, |x_m|)`.
    pub fd_step: f64,
    pub line_search: LineSearchConfig,
    pub max_iters: usize,
    /// Stop when the gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative loss decrease over one restart period drops below this.
    pub loss_change_tol: f64,
    /// Stop as soon as the loss reaches this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_loss: Option<f64>,
    pub n_starts: usize,
    pub perturbation: PerturbationConfig,
    pub seed: u64,
    /// When false the trace's `seconds` column is written as 0 so traces are
    /// bitwise reproducible.
    pub record_timing: bool,
}

impl Default for CgdConfig {
    fn default() -> Self {
        Self {
            beta_scheme: BetaScheme::default(),
            restart_period: None,
            fd_step: 1e-5,
            line_search: LineSearchConfig::default(),
            max_iters: 200,
            grad_tol: 1e-8,
            loss_change_tol: 1e-10,
            target_loss: None,
            n_starts: 1,
            perturbation: PerturbationConfig::default(),
            seed: 0,
            record_timing: true,
        }
    }
}

impl CgdConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fd_step", self.fd_step),
            ("grad_tol", self.grad_tol),
            ("loss_change_tol", self.loss_change_tol),
            ("line_search.rel_tol", self.line_search.rel_tol),
            ("line_search.initial_scale", self.line_search.initial_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.line_search.growth <= 1.0 || !self.line_search.growth.is_finite() {
            return Err(Error::Config("line_search.growth must exceed 1".into()));
        }
        if self.line_search.max_evals < 3 {
            return Err(Error::Config("line_search.max_evals must be at least 3".into()));
        }
        if self.target_loss.is_some_and(|t| !t.is_finite()) {
            return Err(Error::Config("target_loss must be finite".into()));
        }
        if self.restart_period == Some(0) {
            return Err(Error::Config("restart_period must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("n_starts must be at least 1".into()));
        }
        if self.perturbation.scale < 0.0 || !self.perturbation.scale.is_finite() {
            return Err(Error::Config("perturbation.scale must be non-negative".into()));
        }
        if self.perturbation.enabled && self.perturbation.patience == 0 {
            return Err(Error::Config("perturbation.patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ConjugateGradient,
    SteepestDescent,
}

fn is_nonfinite(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_))
}

fn central_difference<O: Objective + ?Sized>(obj: &O, x: &[f64], m: usize, h: f64) -> Result<f64> {
    let mut xp = x.to_vec();
    xp[m] = x[m] + h;
    let fp = obj.evaluate(&xp)?.total;
    xp[m] = x[m] - h;
    let fm = obj.evaluate(&xp)?.total;
    let d = (fp - fm) / (2.0 * h);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite(format!("finite difference along coordinate {m}")))
    }
}

/// Central-difference gradient with step `fd_step * max(1, |x_m|)` per coordinate.
/// A non-finite evaluation shrinks that coordinate's step tenfold once. Evaluations go
/// through the objective's anchored copy at `x` when it has one.
pub fn fd_gradient<O: Objective + ?Sized>(obj: &O, x: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    match obj.anchored(x)? {
        Some(a) => central_gradient(a.as_ref(), x, fd_step),
        None => central_gradient(obj, x, fd_step),
    }
}

fn central_gradient<O: Objective + ?Sized>(obj: &O, x: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    (0..x.len())
        .into_par_iter()
        .map(|m| {
            let h = fd_step * x[m].abs().max(1.0);
            match central_difference(obj, x, m, h) {
                Err(e) if is_nonfinite(&e) => central_difference(obj, x, m, h / 10.0),
                other => other,
            }
        })
        .collect()
}

/// `x + scale * u` with `u` uniform in the unit ball.
pub fn perturb_escape<R: Rng + ?Sized>(x: &[f64], scale: f64, rng: &mut R) -> Vec<f64> {
    let n = x.len();
    if n == 0 || scale == 0.0 {
        return x.to_vec();
    }
    // Rejection-free: Gaussian direction, radius u^(1/n).
    let dir: Vec<f64> = (0..n)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random::<f64>();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = rng.random::<f64>().powf(1.0 / n as f64);
    x.iter().zip(&dir).map(|(xi, di)| xi + scale * r * di / dn).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradient minimization from `x0`.
pub fn cgd_minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], config: &CgdConfig) -> Result<OptimizationTrace> {
    minimize(obj, x0, config, Method::ConjugateGradient, config.seed)
}

/// Same loop with the conjugation coefficient forced to zero.
pub fn steepest_descent_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    config: &CgdConfig,
) -> Result<OptimizationTrace> {
    minimize(obj, x0, config, Method::SteepestDescent, config.seed)
}

pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    config: &CgdConfig,
    method: Method,
    seed: u64,
) -> Result<OptimizationTrace> {
    config.validate()?;
    let n = obj.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let counted = Counted::new(obj);
    let obj = &counted;
    let clock = Instant::now();
    let seconds = || {
        if config.record_timing {
            clock.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = config.restart_period.unwrap_or(n).max(1);

    let mut x = obj.project(x0)?;
    let first = obj.evaluate(&x)?;
    if !first.total.is_finite() {
        return Err(Error::NonFinite("loss at the starting point".into()));
    }
    let mut f = first.total;
    let mut g = fd_gradient(obj, &x, config.fd_step)?;
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut trace = OptimizationTrace::new(obj.term_names());
    trace.push(TraceRow {
        step: 0,
        params: x.clone(),
        loss: f,
        terms: first.terms.clone(),
        grad_norm: inf_norm(&g),
        step_len: 0.0,
        beta: 0.0,
        reset: true,
        escape: false,
        seconds: seconds(),
    });

    let mut since_restart = 0usize;
    let mut escapes = 0usize;
    let mut stalled_since = 0usize;
    let mut termination = Termination::MaxIterations;
    let mut step = 0usize;
    let reached = |f: f64| config.target_loss.is_some_and(|t| f <= t);
    while step < config.max_iters {
        if reached(f) {
            termination = Termination::TargetLoss;
            break;
        }
        if inf_norm(&g) < config.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut reset = false;
        if dot(&g, &d) >= 0.0 {
            d = g.iter().map(|v| -v).collect();
            reset = true;
            since_restart = 0;
        }
        let mut ls = golden_section(obj, &x, f, &d, &config.line_search)?;
        if ls.step == 0.0 && !reset {
            d = g.iter().map(|v| -v).collect();
            reset = true;
            since_restart = 0;
            ls = golden_section(obj, &x, f, &d, &config.line_search)?;
        }
        let pert = &config.perturbation;
        if ls.step == 0.0 {
            if pert.enabled && escapes < pert.max_escapes && inf_norm(&g) >= config.grad_tol {
                escapes += 1;
                step += 1;
                let e = escape(obj, &x, pert.scale, &mut rng)?;
                x = e.0;
                f = e.1.total;
                g = fd_gradient(obj, &x, config.fd_step)?;
                d = g.iter().map(|v| -v).collect();
                since_restart = 0;
                stalled_since = step;
                trace.push(TraceRow {
                    step,
                    params: x.clone(),
                    loss: f,
                    terms: e.1.terms,
                    grad_norm: inf_norm(&g),
                    step_len: e.2,
                    beta: 0.0,
                    reset: true,
                    escape: true,
                    seconds: seconds(),
                });
                continue;
            }
            termination = Termination::LineSearchFailed;
            break;
        }
        step += 1;
        let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + ls.step * di).collect();
        let x_new = obj.project(&trial)?;
        let eval_new = ls.evaluation;
        let step_len = l2(&x_new.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let g_new = fd_gradient(obj, &x_new, config.fd_step)?;

        since_restart += 1;
        let mut beta = match method {
            Method::SteepestDescent => 0.0,
            Method::ConjugateGradient => {
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let num = dot(&g_new, &y);
                let den = match config.beta_scheme {
                    BetaScheme::HestenesStiefel => dot(&d, &y),
                    BetaScheme::PolakRibiere => dot(&g, &g),
                };
                let b = num / den;
                if b.is_finite() {
                    b.max(0.0)
                } else {
                    0.0
                }
            }
        };
        let mut next_reset = false;
        if since_restart >= period {
            beta = 0.0;
            since_restart = 0;
            next_reset = true;
        }
        d = g_new.iter().zip(&d).map(|(gi, di)| -gi + beta * di).collect();
        x = x_new;
        f = eval_new.total;
        g = g_new;
        trace.push(TraceRow {
            step,
            params: x.clone(),
            loss: f,
            terms: eval_new.terms.clone(),
            grad_norm: inf_norm(&g),
            step_len,
            beta,
            reset: reset || next_reset,
            escape: false,
            seconds: seconds(),
        });

        let rel_change = |window: usize| -> Option<f64> {
            let rows = trace.rows();
            if rows.len() <= window {
                return None;
            }
            let old = rows[rows.len() - 1 - window].loss;
            Some((old - f) / (old.abs() + 1e-300))
        };
        let stop = rel_change(period).is_some_and(|c| c < config.loss_change_tol);
        let stalled = pert.enabled
            && step - stalled_since >= pert.patience
            && rel_change(pert.patience).is_some_and(|c| c < config.loss_change_tol);
        if (stop || stalled) && pert.enabled && escapes < pert.max_escapes && inf_norm(&g) >= config.grad_tol {
            escapes += 1;
            step += 1;
            let (kicked, e, jump) = escape(obj, &x, pert.scale, &mut rng)?;
            x = kicked;
            f = e.total;
            g = fd_gradient(obj, &x, config.fd_step)?;
            d = g.iter().map(|v| -v).collect();
            since_restart = 0;
            stalled_since = step;
            trace.push(TraceRow {
                step,
                params: x.clone(),
                loss: f,
                terms: e.terms,
                grad_norm: inf_norm(&g),
                step_len: jump,
                beta: 0.0,
                reset: true,
                escape: true,
                seconds: seconds(),
            });
            continue;
        }
        if stop {
            termination = Termination::LossChange;
            break;
        }
    }
    trace.finish(termination, counted.count());
    Ok(trace)
}

/// Random kick of relative size `scale`; returns the new point, its evaluation and
/// the jump length. Retries a few times if the kicked point is not finite.
fn escape<O: Objective + ?Sized, R: Rng + ?Sized>(
    obj: &O,
    x: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Evaluation, f64)> {
    let radius = scale * l2(x).max(1e-3);
    let mut last = None;
    for _ in 0..4 {
        let kicked = obj.project(&perturb_escape(x, radius, rng))?;
        match obj.evaluate(&kicked) {
            Ok(e) if e.total.is_finite() => {
                let jump = l2(&kicked.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
                return Ok((kicked, e, jump));
            }
            Ok(_) => last = Some(Error::NonFinite("loss after a perturbation".into())),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Uniform draws from `bounds`, reproducible from `seed`.
pub fn random_starts(bounds: &ParamBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| bounds.sample(&mut rng)).collect()
}

/// Outcome of independent runs from several starting points.
#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub traces: Vec<OptimizationTrace>,
    /// Index into `traces` of the run with the lowest final loss.
    pub best: usize,
    /// Standard deviation of the final losses of the successful runs.
    pub dispersion: f64,
    /// Start index and message of each failed run.
    pub failures: Vec<(usize, String)>,
}

impl MultistartResult {
    pub fn best_trace(&self) -> &OptimizationTrace {
        &self.traces[self.best]
    }
}

/// Runs `method` from every start in parallel; fails only if every run fails.
pub fn multistart<O: Objective + ?Sized>(
    obj: &O,
    starts: &[Vec<f64>],
    config: &CgdConfig,
    method: Method,
) -> Result<MultistartResult> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("multistart needs at least one start".into()));
    }
    let runs: Vec<Result<OptimizationTrace>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| minimize(obj, s, config, method, config.seed.wrapping_add(i as u64)))
        .collect();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut last_err = None;
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                failures.push((i, e.to_string()));
                last_err = Some(e);
            }
        }
    }
    if traces.is_empty() {
        return Err(last_err.expect("at least one start"));
    }
    let best = traces
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_loss().total_cmp(&b.1.best_loss()))
        .map(|(i, _)| i)
        .expect("non-empty");
    let losses: Vec<f64> = traces.iter().map(|t| t.best_loss()).collect();
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    let dispersion = (losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / losses.len() as f64).sqrt();
    Ok(MultistartResult {
        traces,
        best,
        dispersion,
        failures,
    })
}

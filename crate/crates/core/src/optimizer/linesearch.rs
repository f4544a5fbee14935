//! Bracketing plus golden-section line search, finished with one parabolic step.

use super::{Evaluation, Objective};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchConfig {
    /// First trial step is `initial_scale * (1 + ||x||) / ||d||`.
    pub initial_scale: f64,
    /// Factor by which the trial step grows while the loss keeps decreasing.
    pub growth: f64,
    /// Golden-section stops when the bracket is narrower than `rel_tol` times its midpoint.
    pub rel_tol: f64,
    pub max_evals: usize,
    /// Evaluate the vertex of a parabola through the best point and its neighbors.
    pub parabolic_refinement: bool,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            initial_scale: 1e-3,
            growth: 2.0,
            rel_tol: 1e-6,
            max_evals: 100,
            parabolic_refinement: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchStatus {
    Converged,
    /// No sampled step improved on the starting value.
    NonDescent,
    /// Evaluation budget ran out; the best sample so far is returned.
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    /// Best sampled step, or 0 when nothing beat the starting value.
    pub step: f64,
    /// Evaluation at `step` (the starting value when `step == 0`).
    pub evaluation: Evaluation,
    pub evals: usize,
    pub status: LineSearchStatus,
}

struct Sampler<'a, O: ?Sized> {
    obj: &'a O,
    x: &'a [f64],
    d: &'a [f64],
    max_evals: usize,
    samples: Vec<(f64, f64)>,
    best: Option<(f64, Evaluation)>,
}

impl<O: Objective + ?Sized> Sampler<'_, O> {
    fn exhausted(&self) -> bool {
        self.samples.len() >= self.max_evals
    }

    fn phi(&mut self, t: f64) -> Result<f64> {
        let p: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + t * di).collect();
        let value = match self.obj.evaluate(&p) {
            Ok(e) => {
                let v = if e.total.is_finite() { e.total } else { f64::INFINITY };
                if self.best.as_ref().is_none_or(|(_, b)| v < b.total) {
                    self.best = Some((t, e));
                }
                v
            }
            Err(Error::NonFinite(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        self.samples.push((t, value));
        Ok(value)
    }
}

/// Approximately minimizes `t -> f(x + t d)` over `t >= 0`, returning the best sampled step.
pub fn golden_section<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    f0: f64,
    d: &[f64],
    cfg: &LineSearchConfig,
) -> Result<LineSearchOutcome> {
    let start = Evaluation {
        total: f0,
        terms: Vec::new(),
    };
    let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dn == 0.0 || !dn.is_finite() {
        return Ok(LineSearchOutcome {
            step: 0.0,
            evaluation: start,
            evals: 0,
            status: LineSearchStatus::NonDescent,
        });
    }
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut s = Sampler {
        obj,
        x,
        d,
        max_evals: cfg.max_evals,
        samples: Vec::new(),
        best: None,
    };

    let t0 = cfg.initial_scale * (1.0 + xn) / dn;
    let f1 = s.phi(t0)?;
    let (mut lo, mut hi) = (0.0, t0);
    if f1 < f0 {
        let (mut a, mut b, mut fb) = (0.0, t0, f1);
        loop {
            if s.exhausted() {
                break;
            }
            let c = b * cfg.growth;
            let fc = s.phi(c)?;
            if fc >= fb {
                lo = a;
                hi = c;
                break;
            }
            a = b;
            b = c;
            fb = fc;
            lo = a;
            hi = b;
        }
    }

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = if s.exhausted() { f64::INFINITY } else { s.phi(x1)? };
    let mut f2 = if s.exhausted() { f64::INFINITY } else { s.phi(x2)? };
    while !s.exhausted() && (hi - lo) > cfg.rel_tol * 0.5 * (hi + lo) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = s.phi(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = s.phi(x2)?;
        }
    }

    if cfg.parabolic_refinement && !s.exhausted() {
        if let Some(tv) = parabola_vertex(&s.samples, f0) {
            s.phi(tv)?;
        }
    }

    let evals = s.samples.len();
    let budget_hit = s.exhausted() && (hi - lo) > cfg.rel_tol * 0.5 * (hi + lo);
    match s.best {
        Some((t, e)) if e.total < f0 => Ok(LineSearchOutcome {
            step: t,
            evaluation: e,
            evals,
            status: if budget_hit {
                LineSearchStatus::BudgetExhausted
            } else {
                LineSearchStatus::Converged
            },
        }),
        _ => Ok(LineSearchOutcome {
            step: 0.0,
            evaluation: start,
            evals,
            status: LineSearchStatus::NonDescent,
        }),
    }
}

/// Vertex of the parabola through the best sample and its nearest neighbors on either
/// side (the origin counts as a sample with value `f0`), if it lies strictly between them.
fn parabola_vertex(samples: &[(f64, f64)], f0: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = samples.iter().copied().filter(|p| p.1.is_finite()).collect();
    pts.push((0.0, f0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let (i, _) = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    if i == 0 || i + 1 >= pts.len() {
        return None;
    }
    let (a, fa) = pts[i - 1];
    let (b, fb) = pts[i];
    let (c, fc) = pts[i + 1];
    let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
    let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
    if den == 0.0 || !den.is_finite() {
        return None;
    }
    let v = b - 0.5 * num / den;
    (v > a && v < c && v != b && v.is_finite()).then_some(v)
}

//! Loss landscapes over two-parameter boxes, and descent paths across them.
//!
//! Grid CSV layout: `p1,p2,total` followed by one column per layer. Rows run over
//! `p1` in the outer loop and `p2` in the inner loop, both including the box edges.

use super::config::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::operators::ParamBox;
use crate::optimizer::{minimize, CgdConfig, Method, Objective, OptimizationTrace, Termination};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub p1: f64,
    pub p2: f64,
    pub total: f64,
    pub layers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub layer_names: Vec<String>,
    pub rows: Vec<GridRow>,
}

/// Evenly spaced points covering the box, edges included.
pub fn grid_points(bounds: &ParamBox, n1: usize, n2: usize) -> Result<Vec<[f64; 2]>> {
    if bounds.dim() != 2 {
        return Err(Error::Config(format!(
            "a scan needs a two-parameter box, got {} parameters",
            bounds.dim()
        )));
    }
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidArgument("a scan grid needs at least two points per axis".into()));
    }
    let [a, b] = [bounds.bounds()[0], bounds.bounds()[1]];
    let axis = |[lo, hi]: [f64; 2], n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    Ok((0..n1)
        .flat_map(|i| (0..n2).map(move |j| [axis(a, n1, i), axis(b, n2, j)]))
        .collect())
}

/// Evaluates `f` (total and layer values) at every grid point.
pub fn scan_grid<F>(bounds: &ParamBox, n1: usize, n2: usize, layer_names: Vec<String>, f: F) -> Result<Grid>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync,
{
    let points = grid_points(bounds, n1, n2)?;
    let rows = points
        .par_iter()
        .map(|p| {
            let (total, layers) = f(p)?;
            if layers.len() != layer_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: layer_names.len(),
                    found: layers.len(),
                });
            }
            Ok(GridRow {
                p1: p[0],
                p2: p[1],
                total,
                layers,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid {
        n1,
        n2,
        layer_names,
        rows,
    })
}

impl Grid {
    /// Row with the smallest total.
    pub fn argmin(&self) -> &GridRow {
        self.rows
            .iter()
            .min_by(|a, b| a.total.total_cmp(&b.total))
            .expect("grid is never empty")
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["p1".to_string(), "p2".to_string(), "total".to_string()];
        h.extend(self.layer_names.iter().cloned());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.p1.to_string(), r.p2.to_string(), r.total.to_string()];
            rec.extend(r.layers.iter().map(f64::to_string));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, n1: usize, n2: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[..3] != ["p1", "p2", "total"] {
            return Err(Error::InvalidArgument("grid CSV must start with p1,p2,total".into()));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad grid value {s:?}")))
                })
                .collect::<Result<_>>()?;
            rows.push(GridRow {
                p1: vals[0],
                p2: vals[1],
                total: vals[2],
                layers: vals[3..].to_vec(),
            });
        }
        if rows.len() != n1 * n2 {
            return Err(Error::DimensionMismatch {
                expected: n1 * n2,
                found: rows.len(),
            });
        }
        Ok(Self {
            n1,
            n2,
            layer_names: header[3..].to_vec(),
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub endpoint: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    /// Objective evaluations, line searches and gradients included.
    pub evaluations: usize,
    pub termination: Termination,
}

impl PathSummary {
    pub fn of(trace: &OptimizationTrace) -> Self {
        Self {
            endpoint: trace.best_params().to_vec(),
            loss: trace.best_loss(),
            iterations: trace.iterations(),
            evaluations: trace.evaluations(),
            termination: trace.termination(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub schema_version: u32,
    pub n1: usize,
    pub n2: usize,
    pub grid_evaluations: usize,
    pub grid_best: [f64; 2],
    pub grid_best_loss: f64,
    pub start: Vec<f64>,
    pub conjugate_gradient: PathSummary,
    pub steepest_descent: PathSummary,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub grid: Grid,
    pub start: Vec<f64>,
    pub cgd: OptimizationTrace,
    pub steepest: OptimizationTrace,
}

impl ScanResult {
    pub fn summary(&self) -> ScanSummary {
        let best = self.grid.argmin();
        ScanSummary {
            schema_version: SCHEMA_VERSION,
            n1: self.grid.n1,
            n2: self.grid.n2,
            grid_evaluations: self.grid.rows.len(),
            grid_best: [best.p1, best.p2],
            grid_best_loss: best.total,
            start: self.start.clone(),
            conjugate_gradient: PathSummary::of(&self.cgd),
            steepest_descent: PathSummary::of(&self.steepest),
        }
    }
}

/// Runs conjugate gradient and steepest descent from the same start.
pub fn descent_paths<O: Objective + ?Sized>(
    obj: &O,
    start: &[f64],
    config: &CgdConfig,
) -> Result<(OptimizationTrace, OptimizationTrace)> {
    let cgd = minimize(obj, start, config, Method::ConjugateGradient, config.seed)?;
    let sd = minimize(obj, start, config, Method::SteepestDescent, config.seed)?;
    Ok((cgd, sd))
}

/// Grid of `obj` (layers are its term values) plus both descent paths.
pub fn scan_objective<O: Objective + ?Sized>(
    obj: &O,
    bounds: &ParamBox,
    n1: usize,
    n2: usize,
    start: Option<&[f64]>,
    config: &CgdConfig,
) -> Result<ScanResult> {
    if obj.dim() != 2 {
        return Err(Error::Config(format!("a scan needs two parameters, got {}", obj.dim())));
    }
    let grid = scan_grid(bounds, n1, n2, obj.term_names(), |p| {
        let e = obj.evaluate(p)?;
        Ok((e.total, e.terms))
    })?;
    let start = start.map_or_else(|| bounds.center(), <[f64]>::to_vec);
    let (cgd, steepest) = descent_paths(obj, &start, config)?;
    Ok(ScanResult {
        grid,
        start,
        cgd,
        steepest,
    })
}

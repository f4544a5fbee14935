//! Lanczos with full reorthogonalization, thick restarts, and locking of
//! converged eigenvectors so degenerate multiplets are resolved one vector at a time.

use super::tridiag::lowest_eigenpair;
use crate::error::{Error, Result};
use crate::operators::CsrMatrix;
use crate::scalar::{axpy, dot, norm, scale, Scalar};
use nalgebra::DMatrix;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LanczosParams {
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

pub(crate) struct RitzPair<T> {
    pub value: f64,
    pub vector: Vec<T>,
    pub residual: f64,
}

fn orthogonalize<T: Scalar>(w: &mut [T], against: &[Vec<T>]) {
    orthogonalize_both(w, against, &[]);
}

/// Classical Gram-Schmidt over both sets, repeated once when the first pass cancelled
/// most of `w`. Each pass must cover both: projecting out `basis` alone feeds the
/// locked components of its vectors back in, scaled up by roughly `alpha / beta` per
/// Lanczos step.
fn orthogonalize_both<T: Scalar>(w: &mut [T], locked: &[Vec<T>], basis: &[Vec<T>]) {
    for _ in 0..2 {
        let before = norm(w);
        for u in locked.iter().chain(basis) {
            let c = dot(u, w);
            axpy(-c, u, w);
        }
        if norm(w) > 0.5 * before {
            break;
        }
    }
}

pub(crate) fn random_vector<T: Scalar, R: Rng>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n)
        .map(|_| T::from_parts(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

/// `v` made orthogonal to both sets and normalized. When `v` lies inside their span
/// the first coordinate axis with a usable remainder is taken instead.
fn fresh_direction<T: Scalar>(mut v: Vec<T>, locked: &[Vec<T>], basis: &[Vec<T>]) -> Option<Vec<T>> {
    orthogonalize_both(&mut v, locked, basis);
    let nv = norm(&v);
    if nv > 1e-8 {
        scale(1.0 / nv, &mut v);
        return Some(v);
    }
    let n = v.len();
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        orthogonalize_both(&mut e, locked, basis);
        let en = norm(&e);
        if en > 1e-4 {
            scale(1.0 / en, &mut e);
            return Some(e);
        }
    }
    None
}

/// `sum_r coef[r] * vs[r]`
fn combine<T: Scalar>(vs: &[Vec<T>], coef: impl Iterator<Item = f64>, n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for (v, c) in vs.iter().zip(coef) {
        axpy(T::lift(c), v, &mut x);
    }
    x
}

/// Lowest eigenpair of `h` restricted to the orthogonal complement of `locked`.
///
/// Thick restart: each cycle keeps the lower half of the Ritz vectors plus the last
/// residual direction, so the projected matrix starts as an arrowhead and continues
/// tridiagonally. Near-degenerate neighbours of the wanted level then converge with
/// it instead of being thrown away at every restart.
pub(crate) fn lowest_deflated<T: Scalar>(
    h: &CsrMatrix<T>,
    locked: &[Vec<T>],
    start: Vec<T>,
    params: LanczosParams,
) -> Result<RitzPair<T>> {
    let n = h.dim();
    let avail = n.saturating_sub(locked.len());
    if avail == 0 {
        return Err(Error::InvalidArgument("no room left in the deflated space".into()));
    }
    let m = params.krylov_dim.max(2).min(avail);
    let first = fresh_direction(start, locked, &[])
        .ok_or_else(|| Error::InvalidArgument("locked vectors span the whole space".into()))?;
    let mut vs: Vec<Vec<T>> = vec![first];
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut kept = 0;
    let mut residuals = Vec::new();
    let mut w = vec![T::zero(); n];
    let mut hx = vec![T::zero(); n];
    for restart in 0..=params.max_restarts {
        let mut j = vs.len() - 1;
        let beta_end = loop {
            h.matvec_into(&vs[j], &mut w);
            let alpha = dot(&vs[j], &w).re();
            t[(j, j)] = alpha;
            orthogonalize_both(&mut w, locked, &vs);
            let beta = norm(&w);
            let prev = if j > 0 { t[(j - 1, j)].abs() } else { 0.0 };
            if beta <= 1e-13 * (alpha.abs() + prev + 1e-300) {
                break 0.0;
            }
            if j + 1 == m {
                break beta;
            }
            // Cheap residual estimate |beta * y_last| while the matrix is tridiagonal.
            if kept == 0 && (j + 1) % 4 == 0 {
                let (diag, off) = tridiagonal(&t, j + 1);
                let (theta, y) = lowest_eigenpair(&diag, &off);
                if beta * y[j].abs() <= 0.1 * params.tol * theta.abs().max(1.0) {
                    break beta;
                }
            }
            t[(j, j + 1)] = beta;
            t[(j + 1, j)] = beta;
            let mut next = w.clone();
            scale(1.0 / beta, &mut next);
            vs.push(next);
            j += 1;
        };
        let k = vs.len();

        let full = if kept == 0 {
            None
        } else {
            Some(sorted_eigen(&t, k))
        };
        let y0: Vec<f64> = match &full {
            Some((_, vecs)) => vecs.column(0).iter().copied().collect(),
            None => {
                let (diag, off) = tridiagonal(&t, k);
                lowest_eigenpair(&diag, &off).1
            }
        };
        let mut x = combine(&vs, y0.into_iter(), n);
        orthogonalize(&mut x, locked);
        let xn = norm(&x);
        scale(1.0 / xn, &mut x);
        h.matvec_into(&x, &mut hx);
        let theta = dot(&x, &hx).re();
        axpy(T::lift(-theta), &x, &mut hx);
        let residual = norm(&hx);
        residuals.push(residual);
        if residual <= params.tol * theta.abs().max(1.0) {
            return Ok(RitzPair {
                value: theta,
                vector: x,
                residual,
            });
        }
        if restart == params.max_restarts {
            break;
        }

        let (thetas, y) = full.unwrap_or_else(|| sorted_eigen(&t, k));
        let keep = (k / 2).clamp(1, m - 1);
        let mut next_vs: Vec<Vec<T>> = Vec::with_capacity(m);
        for i in 0..keep {
            let mut v = combine(&vs, y.column(i).iter().copied(), n);
            orthogonalize_both(&mut v, locked, &next_vs);
            let vn = norm(&v);
            scale(1.0 / vn, &mut v);
            next_vs.push(v);
        }
        t.fill(0.0);
        for (i, th) in thetas.iter().take(keep).enumerate() {
            t[(i, i)] = *th;
        }
        let continuation = if beta_end > 0.0 {
            for i in 0..keep {
                let s = beta_end * y[(k - 1, i)];
                t[(i, keep)] = s;
                t[(keep, i)] = s;
            }
            let mut v = w.clone();
            scale(1.0 / beta_end, &mut v);
            Some(v)
        } else {
            // Invariant subspace: continue from a new direction with no coupling.
            fresh_direction(vec![T::zero(); n], locked, &next_vs)
        };
        match continuation {
            Some(v) => next_vs.push(v),
            None => break,
        }
        vs = next_vs;
        kept = keep;
    }
    Err(Error::LanczosNonConvergence {
        restarts: params.max_restarts,
        residuals,
    })
}

/// Diagonal and first off-diagonal of the leading `k x k` block.
fn tridiagonal(t: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = (0..k).map(|i| t[(i, i)]).collect();
    let off = (0..k.saturating_sub(1)).map(|i| t[(i, i + 1)]).collect();
    (diag, off)
}

/// Ascending eigenvalues and matching eigenvector columns of the leading `k x k` block.
fn sorted_eigen(t: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = t.view((0, 0), (k, k)).into_owned().symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

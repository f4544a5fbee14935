//! Low-lying spectrum, expectation values and energy variance.
//!
//! Small matrices go through a dense Hermitian eigensolver; larger ones through a
//! restarted Lanczos iteration that locks converged vectors and keeps going until the
//! whole ground multiplet and the first level above it are resolved.

mod lanczos;
pub mod tridiag;

use crate::error::{Error, Result};
use crate::hilbert::{SpinBasis, WaveFunction};
use crate::operators::{CsrMatrix, SparseMatrix};
use crate::scalar::{axpy, norm, Scalar};
use lanczos::{lowest_deflated, random_vector, LanczosParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub use tridiag::tridiagonal_eigen;

/// Imaginary part of `<psi|H|psi>` tolerated before declaring `H` non-Hermitian.
pub const EXPECTATION_IM_TOL: f64 = 1e-10;

/// Solver knobs for [`eigs_low`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenOptions {
    /// Matrices up to this dimension use the dense solver.
    pub dense_threshold: usize,
    pub krylov_dim: usize,
    /// Residual target relative to `max(1, |lambda|)`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Two levels closer than `degeneracy_tol * max(1, |e0|)` count as degenerate.
    pub degeneracy_tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 96,
            krylov_dim: 60,
            tol: 1e-11,
            max_restarts: 50,
            degeneracy_tol: 1e-9,
            seed: 0x5eed_1e55,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

/// Lowest part of a spectrum.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    /// Ascending. At least `k` values, more when the `k`-th level is degenerate or when
    /// one extra level was needed to bound the ground multiplet.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<WaveFunction>,
    pub residuals: Vec<f64>,
    pub ground_degeneracy: usize,
    pub method: EigenMethod,
}

impl EvaluationReport {
    pub fn e0(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Distance from the ground multiplet to the next level, `0` when no level above
    /// the multiplet exists in the Hilbert space.
    pub fn gap(&self) -> f64 {
        self.eigenvalues
            .get(self.ground_degeneracy)
            .map(|e| e - self.eigenvalues[0])
            .unwrap_or(0.0)
    }

    pub fn ground_space(&self) -> &[WaveFunction] {
        &self.eigenvectors[..self.ground_degeneracy]
    }
}

fn degeneracy_width(e0: f64, opts: &EigenOptions) -> f64 {
    opts.degeneracy_tol * e0.abs().max(1.0)
}

/// True once the sorted values cover `k` levels, the full ground multiplet, and a
/// final level that is separated from its predecessor.
fn enough(values: &[f64], k: usize, dim: usize, opts: &EigenOptions) -> bool {
    let n = values.len();
    if n >= dim {
        return true;
    }
    if n < k + 1 || n < 2 {
        return false;
    }
    let tol = degeneracy_width(values[0], opts);
    values[n - 1] - values[n - 2] > tol && values[n - 1] - values[0] > tol
}

fn count_ground(values: &[f64], opts: &EigenOptions) -> usize {
    let tol = degeneracy_width(values[0], opts);
    values.iter().take_while(|&&e| e - values[0] <= tol).count()
}

fn residual<T: Scalar>(h: &CsrMatrix<T>, value: f64, v: &[T]) -> f64 {
    let mut hv = h.matvec(v).expect("dimensions checked");
    axpy(T::lift(-value), v, &mut hv);
    norm(&hv)
}

type Pairs<T> = (Vec<f64>, Vec<Vec<T>>, Vec<f64>);

fn dense_pairs<T: Scalar>(h: &CsrMatrix<T>, k: usize, opts: &EigenOptions) -> Result<Pairs<T>> {
    let dim = h.dim();
    let dense: DMatrix<T> = h.to_dense();
    // Symmetrize so the dense solver sees an exactly Hermitian input.
    let herm = (&dense + dense.adjoint()) * T::lift(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let all: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if all.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("dense eigenvalues".into()));
    }
    let mut take = k.min(dim);
    while !enough(&all[..take], k, dim, opts) {
        take += 1;
    }
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    let mut residuals = Vec::with_capacity(take);
    for &i in order.iter().take(take) {
        let v: Vec<T> = eig.eigenvectors.column(i).iter().copied().collect();
        let value = eig.eigenvalues[i];
        residuals.push(residual(h, value, &v));
        values.push(value);
        vectors.push(v);
    }
    Ok((values, vectors, residuals))
}

fn lanczos_pairs<T: Scalar>(
    h: &CsrMatrix<T>,
    k: usize,
    opts: &EigenOptions,
    guess: &[WaveFunction],
) -> Result<Pairs<T>> {
    let dim = h.dim();
    let params = LanczosParams {
        krylov_dim: opts.krylov_dim,
        tol: opts.tol,
        max_restarts: opts.max_restarts,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values: Vec<f64> = Vec::new();
    let mut vectors: Vec<Vec<T>> = Vec::new();
    let mut residuals = Vec::new();
    loop {
        let start = match guess.get(values.len()) {
            Some(g) => g.amplitudes().iter().map(|z| T::from_parts(z.re, z.im)).collect(),
            None => random_vector::<T, _>(dim, &mut rng),
        };
        let pair = lowest_deflated(h, &vectors, start, params)?;
        values.push(pair.value);
        vectors.push(pair.vector);
        residuals.push(pair.residual);
        // Deflation can return levels slightly out of order when a start vector was
        // nearly orthogonal to a lower eigenvector; keep the lists sorted.
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        if idx.windows(2).any(|w| w[0] > w[1]) {
            values = idx.iter().map(|&i| values[i]).collect();
            vectors = idx.iter().map(|&i| vectors[i].clone()).collect();
            residuals = idx.iter().map(|&i| residuals[i]).collect();
        }
        if enough(&values, k, dim, opts) {
            break;
        }
    }
    Ok((values, vectors, residuals))
}

/// Lowest eigenpairs of the Hermitian `h` acting on `basis`.
pub fn eigs_low(
    h: &SparseMatrix,
    basis: &Arc<SpinBasis>,
    k: usize,
    opts: &EigenOptions,
) -> Result<EvaluationReport> {
    eigs_low_from(h, basis, k, opts, &[])
}

/// As [`eigs_low`], with Lanczos started from `guess` (one vector per level, lowest
/// first) instead of random vectors. Meant for a small change of `h` from a matrix
/// whose full report supplied `guess`: a level absent from the guesses and missed by
/// the Krylov spaces they span is not found. The dense path ignores `guess`.
pub fn eigs_low_from(
    h: &SparseMatrix,
    basis: &Arc<SpinBasis>,
    k: usize,
    opts: &EigenOptions,
    guess: &[WaveFunction],
) -> Result<EvaluationReport> {
    let dim = h.dim();
    if dim != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: dim,
        });
    }
    if let Some(g) = guess.iter().find(|g| g.basis().dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: g.basis().dim(),
        });
    }
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {dim}-dimensional operator"
        )));
    }
    let method = if dim <= opts.dense_threshold {
        EigenMethod::Dense
    } else {
        EigenMethod::Lanczos
    };
    let (values, vectors, residuals) = match (h, method) {
        (SparseMatrix::Real(m), EigenMethod::Dense) => {
            let (v, x, r) = dense_pairs(m, k, opts)?;
            (v, to_complex(x), r)
        }
        (SparseMatrix::Real(m), EigenMethod::Lanczos) => {
            let (v, x, r) = lanczos_pairs(m, k, opts, guess)?;
            (v, to_complex(x), r)
        }
        (SparseMatrix::Complex(m), EigenMethod::Dense) => dense_pairs(m, k, opts)?,
        (SparseMatrix::Complex(m), EigenMethod::Lanczos) => lanczos_pairs(m, k, opts, guess)?,
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues".into()));
    }
    let ground_degeneracy = count_ground(&values, opts);
    let eigenvectors = vectors
        .into_iter()
        .map(|v| WaveFunction::new(basis.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        eigenvalues: values,
        eigenvectors,
        residuals,
        ground_degeneracy,
        method,
    })
}

fn to_complex(vs: Vec<Vec<f64>>) -> Vec<Vec<Complex64>> {
    vs.into_iter()
        .map(|v| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
        .collect()
}

fn check_dims(h: &SparseMatrix, psi: &WaveFunction) -> Result<()> {
    if h.dim() != psi.basis().dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.basis().dim(),
            found: h.dim(),
        });
    }
    Ok(())
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > EXPECTATION_IM_TOL * z.re.abs().max(1.0) {
        return Err(Error::NotHermitian { defect: z.im.abs() });
    }
    Ok(z.re)
}

/// `<psi|H|psi>`.
pub fn expectation(h: &SparseMatrix, psi: &WaveFunction) -> Result<f64> {
    check_dims(h, psi)?;
    let hpsi = h.apply(psi.amplitudes())?;
    let z: Complex64 = psi.amplitudes().iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
    real_part(z)
}

/// Mean, variance and relative variance of `H` in a normalized state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMoments {
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean^2`; absent when `|mean| < 1e-14`.
    pub relative: Option<f64>,
}

/// `<H^2> - <H>^2`, evaluated as `||(H - <H>) psi||^2` which is never negative and
/// does not cancel catastrophically near eigenstates.
pub fn energy_moments(h: &SparseMatrix, psi: &WaveFunction) -> Result<EnergyMoments> {
    check_dims(h, psi)?;
    let amps = psi.amplitudes();
    let mut hpsi = h.apply(amps)?;
    let z: Complex64 = amps.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
    let mean = real_part(z)?;
    for (r, a) in hpsi.iter_mut().zip(amps) {
        *r -= a * mean;
    }
    let variance = hpsi.iter().map(|c| c.norm_sqr()).sum::<f64>();
    if !variance.is_finite() || !mean.is_finite() {
        return Err(Error::NonFinite("energy moments".into()));
    }
    let relative = (mean.abs() >= 1e-14).then(|| variance / (mean * mean));
    Ok(EnergyMoments {
        mean,
        variance,
        relative,
    })
}

pub fn energy_variance(h: &SparseMatrix, psi: &WaveFunction) -> Result<f64> {
    Ok(energy_moments(h, psi)?.variance)
}

/// `None` when `|<H>| < 1e-14`.
pub fn relative_energy_variance(h: &SparseMatrix, psi: &WaveFunction) -> Result<Option<f64>> {
    Ok(energy_moments(h, psi)?.relative)
}

/// `<psi|G|psi>` for a symmetry generator `G` (zero on exact symmetry eigenstates with
/// eigenvalue zero, such as total spin singlets for the Casimir).
pub fn symmetry_expectation(g: &SparseMatrix, psi: &WaveFunction) -> Result<f64> {
    expectation(g, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Boundary;
    use crate::operators::{assemble_sparse, ModelSpec};

    fn basis(n: usize, d: usize, sector: Option<i64>) -> Arc<SpinBasis> {
        Arc::new(SpinBasis::new(n, d, sector, Boundary::Periodic).unwrap())
    }

    fn heisenberg(n: usize, sector: Option<i64>) -> (SparseMatrix, Arc<SpinBasis>) {
        let b = basis(n, 2, sector);
        let ops = ModelSpec::J1J2 { spin: 0.5 }.build(n, Boundary::Periodic).unwrap();
        let h = assemble_sparse(&ops.operators()[0], &b).unwrap();
        (h, b)
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let (h, b) = heisenberg(10, Some(0));
        let dense = eigs_low(
            &h,
            &b,
            3,
            &EigenOptions {
                dense_threshold: usize::MAX,
                ..Default::default()
            },
        )
        .unwrap();
        let lanczos = eigs_low(
            &h,
            &b,
            3,
            &EigenOptions {
                dense_threshold: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(dense.method, EigenMethod::Dense);
        assert_eq!(lanczos.method, EigenMethod::Lanczos);
        let n = dense.eigenvalues.len().min(lanczos.eigenvalues.len());
        assert!(n >= 3);
        for i in 0..n {
            assert!((dense.eigenvalues[i] - lanczos.eigenvalues[i]).abs() < 1e-9);
        }
        assert!(lanczos.residuals.iter().all(|r| *r < 1e-9));
        assert_eq!(dense.ground_degeneracy, lanczos.ground_degeneracy);
        assert!((dense.gap() - lanczos.gap()).abs() < 1e-9);
    }

    #[test]
    fn degenerate_ground_multiplet_is_resolved() {
        // Heisenberg ring of 3 spins (full space): ground level is fourfold degenerate.
        let (h, b) = heisenberg(3, None);
        for threshold in [0, usize::MAX] {
            let r = eigs_low(
                &h,
                &b,
                1,
                &EigenOptions {
                    dense_threshold: threshold,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(r.ground_degeneracy, 4, "threshold {threshold}");
            assert!((r.e0() + 0.75).abs() < 1e-10);
            assert!((r.gap() - 1.5).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_is_zero_without_excited_level() {
        let b = basis(2, 2, None);
        let h = SparseMatrix::identity(4);
        let r = eigs_low(&h, &b, 1, &EigenOptions::default()).unwrap();
        assert_eq!(r.ground_degeneracy, 4);
        assert_eq!(r.gap(), 0.0);
    }

    #[test]
    fn variance_vanishes_on_eigenstates() {
        let (h, b) = heisenberg(8, Some(0));
        let r = eigs_low(&h, &b, 1, &EigenOptions::default()).unwrap();
        let m = energy_moments(&h, &r.eigenvectors[0]).unwrap();
        assert!(m.variance < 1e-12);
        assert!((m.mean - r.e0()).abs() < 1e-10);
        assert!(m.relative.unwrap() < 1e-12);
        let plus = WaveFunction::normalized(b.clone(), vec![Complex64::new(1.0, 0.0); b.dim()]).unwrap();
        assert!(energy_variance(&h, &plus).unwrap() >= 0.0);
    }

    #[test]
    fn argument_errors() {
        let (h, _) = heisenberg(4, Some(0));
        let other = basis(4, 2, None);
        assert!(matches!(
            eigs_low(&h, &other, 1, &EigenOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = basis(4, 2, Some(0));
        assert!(eigs_low(&h, &b, 0, &EigenOptions::default()).is_err());
        assert!(eigs_low(&h, &b, 7, &EigenOptions::default()).is_err());
    }

    #[test]
    fn complex_hamiltonian_is_handled() {
        // Chiral term makes H complex; compare dense and Lanczos.
        let b = basis(7, 2, None);
        let mut triplets = Vec::new();
        let dim = b.dim();
        for i in 0..dim {
            triplets.push((i, i, Complex64::new((i % 5) as f64 * 0.3, 0.0)));
            let j = (i * 37 + 11) % dim;
            if i != j {
                let z = Complex64::new(0.2, 0.4 + (i % 3) as f64 * 0.1);
                triplets.push((i, j, z));
                triplets.push((j, i, z.conj()));
            }
        }
        let h = SparseMatrix::from_complex(CsrMatrix::from_triplets(dim, triplets));
        assert!(!h.is_real());
        let d = eigs_low(&h, &b, 2, &EigenOptions { dense_threshold: usize::MAX, ..Default::default() }).unwrap();
        let l = eigs_low(&h, &b, 2, &EigenOptions { dense_threshold: 0, ..Default::default() }).unwrap();
        assert!((d.e0() - l.e0()).abs() < 1e-9);
        assert!((d.eigenvalues[1] - l.eigenvalues[1]).abs() < 1e-9);
    }

    #[test]
    fn non_hermitian_expectation_is_rejected() {
        let b = basis(1, 2, None);
        let m = CsrMatrix::from_triplets(2, vec![(0, 1, Complex64::new(0.0, 1.0))]);
        let h = SparseMatrix::from_complex(m);
        let psi = WaveFunction::normalized(b, vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(expectation(&h, &psi), Err(Error::NotHermitian { .. })));
    }
}

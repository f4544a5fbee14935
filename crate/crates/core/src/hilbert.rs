//! Many-body bases for chains of `d`-level sites and the state-comparison metrics
//! built on them.
//!
//! Configurations are stored as base-`d` integer codes with site 0 as the most
//! significant digit, so index order is lexicographic order of the digit strings.
//! Digit `a` on a site carries `S_z = S - a` with `S = (d - 1) / 2`; for qubits the
//! digit 0 is spin up (`sigma_z = +1`).

use crate::error::{Error, Result};
use crate::scalar::dot;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Largest number of raw configurations we are willing to enumerate.
const MAX_RAW_CONFIGS: u64 = 1 << 32;

/// Probabilities below this floor are treated as zero by [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-30;

/// Gram-matrix tolerance accepted by [`subspace_overlap`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Enumerated basis of a chain, optionally restricted to one total-magnetization sector.
#[derive(Debug, Clone)]
pub struct SpinBasis {
    n_sites: usize,
    local_dim: usize,
    /// Sector label stored as `2 * S_z^total` so half-integer spins stay exact.
    sector: Option<i64>,
    boundary: Boundary,
    /// `place[s] = d^(N - 1 - s)`.
    place: Vec<u64>,
    /// Sorted configuration codes; `None` for the unrestricted space where index == code.
    codes: Option<Vec<u64>>,
    dim: usize,
}

impl PartialEq for SpinBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_sites == other.n_sites
            && self.local_dim == other.local_dim
            && self.sector == other.sector
            && self.boundary == other.boundary
    }
}

impl Eq for SpinBasis {}

impl SpinBasis {
    /// Enumerates the basis. `twice_sz` selects the sector with `2 * S_z^total = twice_sz`.
    pub fn new(
        n_sites: usize,
        local_dim: usize,
        twice_sz: Option<i64>,
        boundary: Boundary,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidArgument("n_sites must be at least 1".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidArgument("local_dim must be at least 2".into()));
        }
        let mut raw: u64 = 1;
        for _ in 0..n_sites {
            raw = raw
                .checked_mul(local_dim as u64)
                .filter(|&r| r <= MAX_RAW_CONFIGS)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "{local_dim}^{n_sites} configurations exceed the enumeration limit"
                    ))
                })?;
        }
        let mut place = vec![1u64; n_sites];
        for s in (0..n_sites.saturating_sub(1)).rev() {
            place[s] = place[s + 1] * local_dim as u64;
        }
        let mut basis = SpinBasis {
            n_sites,
            local_dim,
            sector: twice_sz,
            boundary,
            place,
            codes: None,
            dim: raw as usize,
        };
        if let Some(target) = twice_sz {
            let codes: Vec<u64> = (0..raw).filter(|&c| basis.twice_sz_of_code(c) == target).collect();
            if codes.is_empty() {
                return Err(Error::EmptySector {
                    n_sites,
                    local_dim,
                    twice_sz: target,
                });
            }
            basis.dim = codes.len();
            basis.codes = Some(codes);
        }
        Ok(basis)
    }

    /// Convenience wrapper for an unrestricted basis.
    pub fn full(n_sites: usize, local_dim: usize, boundary: Boundary) -> Result<Self> {
        Self::new(n_sites, local_dim, None, boundary)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// `2 * S_z^total` of the sector, if restricted.
    pub fn sector(&self) -> Option<i64> {
        self.sector
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Configuration code of basis state `index`.
    #[inline]
    pub fn code(&self, index: usize) -> u64 {
        match &self.codes {
            Some(codes) => codes[index],
            None => index as u64,
        }
    }

    #[inline]
    pub fn index_of_code(&self, code: u64) -> Option<usize> {
        match &self.codes {
            Some(codes) => codes.binary_search(&code).ok(),
            None => ((code as usize) < self.dim).then_some(code as usize),
        }
    }

    /// Local state (digit) of `site` in a configuration code.
    #[inline]
    pub fn digit(&self, code: u64, site: usize) -> usize {
        ((code / self.place[site]) % self.local_dim as u64) as usize
    }

    /// Returns `code` with the digit on `site` replaced.
    #[inline]
    pub fn with_digit(&self, code: u64, site: usize, digit: usize) -> u64 {
        let old = self.digit(code, site) as u64;
        code - old * self.place[site] + digit as u64 * self.place[site]
    }

    pub fn config_of(&self, index: usize) -> Vec<u8> {
        let code = self.code(index);
        (0..self.n_sites).map(|s| self.digit(code, s) as u8).collect()
    }

    pub fn index_of(&self, config: &[u8]) -> Option<usize> {
        if config.len() != self.n_sites || config.iter().any(|&a| a as usize >= self.local_dim) {
            return None;
        }
        let code = config
            .iter()
            .zip(&self.place)
            .map(|(&a, &p)| a as u64 * p)
            .sum();
        self.index_of_code(code)
    }

    pub fn twice_sz_of_code(&self, code: u64) -> i64 {
        let top = self.local_dim as i64 - 1;
        (0..self.n_sites)
            .map(|s| top - 2 * self.digit(code, s) as i64)
            .sum()
    }
}

/// Normalized amplitude vector over the configurations of a [`SpinBasis`].
#[derive(Debug, Clone)]
pub struct WaveFunction {
    basis: Arc<SpinBasis>,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    /// Wraps amplitudes as given; callers are responsible for normalization.
    pub fn new(basis: Arc<SpinBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(WaveFunction { basis, amplitudes })
    }

    /// Wraps and normalizes amplitudes.
    pub fn normalized(basis: Arc<SpinBasis>, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = crate::scalar::norm(&amplitudes);
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize a zero or non-finite vector".into()));
        }
        for a in &mut amplitudes {
            *a /= n;
        }
        Self::new(basis, amplitudes)
    }

    pub fn basis_state(basis: Arc<SpinBasis>, index: usize) -> Result<Self> {
        if index >= basis.dim() {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dim {}",
                basis.dim()
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(basis, amps)
    }

    pub fn basis(&self) -> &Arc<SpinBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        crate::scalar::norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        check_same_basis(self, other)?;
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }
}

fn check_same_basis(a: &WaveFunction, b: &WaveFunction) -> Result<()> {
    if Arc::ptr_eq(&a.basis, &b.basis) || *a.basis == *b.basis {
        Ok(())
    } else {
        Err(Error::BasisMismatch)
    }
}

/// `|<a|b>|`.
pub fn overlap(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}

/// Relative entropy of the configuration distributions `|alpha_i|^2` (reference)
/// and `|beta_i|^2` (candidate).
///
/// Terms with `|alpha_i|^2 < KL_FLOOR` contribute zero; candidate probabilities
/// below the floor are clamped to it so the result stays finite.
pub fn kl_divergence(reference: &WaveFunction, candidate: &WaveFunction) -> Result<f64> {
    check_same_basis(reference, candidate)?;
    let mut acc = 0.0;
    for (a, b) in reference.amplitudes.iter().zip(&candidate.amplitudes) {
        let p = a.norm_sqr();
        if p < KL_FLOOR {
            continue;
        }
        let q = b.norm_sqr().max(KL_FLOOR);
        acc += p * (p / q).ln();
    }
    Ok(acc)
}

/// Largest deviation of the Gram matrix of `span` from the identity.
pub fn orthonormality_defect(span: &[WaveFunction]) -> Result<f64> {
    let mut defect: f64 = 0.0;
    for (i, u) in span.iter().enumerate() {
        for (j, v) in span.iter().enumerate().skip(i) {
            let g = u.inner(v)?;
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((g - target).norm());
        }
    }
    Ok(defect)
}

/// Norm of the projection of `reference` onto the span of orthonormal `span` vectors.
pub fn subspace_overlap(reference: &WaveFunction, span: &[WaveFunction]) -> Result<f64> {
    if span.is_empty() {
        return Err(Error::InvalidArgument("span must contain at least one vector".into()));
    }
    let defect = orthonormality_defect(span)?;
    if defect > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { defect });
    }
    let mut acc = 0.0;
    for v in span {
        acc += v.inner(reference)?.norm_sqr();
    }
    Ok(acc.sqrt())
}

/// Normalized projection of `reference` onto `span`: the span vector of maximal
/// overlap with it. Falls back to the first span vector when the projection vanishes.
pub fn best_in_span(reference: &WaveFunction, span: &[WaveFunction]) -> Result<WaveFunction> {
    if span.is_empty() {
        return Err(Error::InvalidArgument("span must contain at least one vector".into()));
    }
    if span.len() == 1 {
        check_same_basis(reference, &span[0])?;
        return Ok(span[0].clone());
    }
    let mut proj = vec![Complex64::new(0.0, 0.0); reference.basis.dim()];
    for v in span {
        let c = v.inner(reference)?;
        for (p, a) in proj.iter_mut().zip(&v.amplitudes) {
            *p += c * a;
        }
    }
    if crate::scalar::norm(&proj) < 1e-14 {
        return Ok(span[0].clone());
    }
    WaveFunction::normalized(reference.basis.clone(), proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn wf(basis: &Arc<SpinBasis>, amps: &[f64]) -> WaveFunction {
        WaveFunction::new(basis.clone(), amps.iter().map(|&x| c(x)).collect()).unwrap()
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(SpinBasis::full(2, 2, Boundary::Open).unwrap().dim(), 4);
        assert_eq!(SpinBasis::new(4, 2, Some(0), Boundary::Open).unwrap().dim(), 6);
        assert_eq!(SpinBasis::full(6, 3, Boundary::Periodic).unwrap().dim(), 729);
        // spin-1, N = 6, Sz = 0: central trinomial-type count
        assert_eq!(SpinBasis::new(6, 3, Some(0), Boundary::Periodic).unwrap().dim(), 141);
    }

    #[test]
    fn empty_sector_is_an_error() {
        let err = SpinBasis::new(3, 2, Some(0), Boundary::Open).unwrap_err();
        assert!(matches!(err, Error::EmptySector { .. }));
        assert!(SpinBasis::new(2, 2, Some(6), Boundary::Open).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SpinBasis::full(0, 2, Boundary::Open).is_err());
        assert!(SpinBasis::full(3, 1, Boundary::Open).is_err());
        assert!(SpinBasis::full(64, 2, Boundary::Open).is_err());
    }

    #[test]
    fn lexicographic_order_and_roundtrip() {
        let b = SpinBasis::new(4, 2, Some(0), Boundary::Open).unwrap();
        let configs: Vec<Vec<u8>> = (0..b.dim()).map(|i| b.config_of(i)).collect();
        let mut sorted = configs.clone();
        sorted.sort();
        assert_eq!(configs, sorted);
        assert_eq!(configs[0], vec![0, 0, 1, 1]);
        for i in 0..b.dim() {
            assert_eq!(b.index_of(&b.config_of(i)), Some(i));
        }
        assert_eq!(b.index_of(&[0, 0, 0, 0]), None);
    }

    #[test]
    fn overlap_examples() {
        let b = Arc::new(SpinBasis::full(1, 2, Boundary::Open).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let up = wf(&b, &[1.0, 0.0]);
        let down = wf(&b, &[0.0, 1.0]);
        let plus = wf(&b, &[s, s]);
        assert!((overlap(&up, &up).unwrap() - 1.0).abs() < 1e-15);
        assert!(overlap(&up, &down).unwrap().abs() < 1e-15);
        assert!((overlap(&up, &plus).unwrap() - s).abs() < 1e-15);
    }

    #[test]
    fn overlap_rejects_other_basis() {
        let b1 = Arc::new(SpinBasis::full(1, 2, Boundary::Open).unwrap());
        let b2 = Arc::new(SpinBasis::full(1, 3, Boundary::Open).unwrap());
        let a = WaveFunction::basis_state(b1, 0).unwrap();
        let b = WaveFunction::basis_state(b2, 0).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::BasisMismatch)));
    }

    #[test]
    fn kl_examples() {
        let b = Arc::new(SpinBasis::full(1, 2, Boundary::Open).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let up = wf(&b, &[1.0, 0.0]);
        let plus = wf(&b, &[s, s]);
        let minus = wf(&b, &[-s, -s]);
        assert!(kl_divergence(&plus, &plus).unwrap().abs() < 1e-15);
        assert!((kl_divergence(&up, &plus).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(kl_divergence(&plus, &minus).unwrap().abs() < 1e-15);
        // disjoint support stays finite
        let down = wf(&b, &[0.0, 1.0]);
        let d = kl_divergence(&up, &down).unwrap();
        assert!(d.is_finite() && (d - (1.0 / KL_FLOOR).ln()).abs() < 1e-9);
    }

    #[test]
    fn subspace_overlap_examples() {
        let b = Arc::new(SpinBasis::full(1, 3, Boundary::Open).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = wf(&b, &[1.0, 0.0, 0.0]);
        let e1 = wf(&b, &[s, s, 0.0]);
        let e2 = wf(&b, &[s, -s, 0.0]);
        let e3 = wf(&b, &[0.0, 0.0, 1.0]);
        assert!((subspace_overlap(&r, &[r.clone()]).unwrap() - 1.0).abs() < 1e-15);
        assert!(subspace_overlap(&r, &[e3.clone()]).unwrap().abs() < 1e-15);
        assert!((subspace_overlap(&r, &[e1.clone(), e2.clone()]).unwrap() - 1.0).abs() < 1e-14);
        assert!(
            (subspace_overlap(&r, &[e1.clone()]).unwrap() - overlap(&r, &e1).unwrap()).abs() < 1e-15
        );
        let bad = wf(&b, &[1.0, 0.0, 0.0]);
        assert!(matches!(
            subspace_overlap(&r, &[e1.clone(), bad]),
            Err(Error::NotOrthonormal { .. })
        ));
        let best = best_in_span(&r, &[e1, e2]).unwrap();
        assert!((overlap(&best, &r).unwrap() - 1.0).abs() < 1e-14);
    }
}

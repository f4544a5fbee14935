//! Operator sums over chains, their sparse assembly, and the parametrized
//! Hamiltonian ansatz built on top of them.

mod ansatz;
pub mod local;
mod sparse;
pub mod zoo;

pub use ansatz::{HamiltonianAnsatz, Monomial, ParamBox, ParametrizationMap};
pub use local::LocalMatrix;
pub use sparse::{matvec, CsrMatrix, OperatorStack, SparseMatrix};
pub use zoo::{symmetry_generator, ModelSpec, SymmetryGenerator};

use crate::error::{Error, Result};
use crate::hilbert::SpinBasis;
use num_complex::Complex64;
use std::collections::{HashMap, HashSet};

/// Tolerance for the assembled-matrix hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Coefficient times a product of single-site matrices; no factors means identity.
#[derive(Debug, Clone)]
pub struct OperatorTerm {
    factors: Vec<(usize, LocalMatrix)>,
    coefficient: Complex64,
}

impl OperatorTerm {
    pub fn new(coefficient: Complex64, factors: Vec<(usize, LocalMatrix)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (site, m) in &factors {
            if !seen.insert(*site) {
                return Err(Error::InvalidArgument(format!("two factors act on site {site}")));
            }
            if m.nrows() != m.ncols() {
                return Err(Error::InvalidArgument("single-site factor must be square".into()));
            }
        }
        Ok(OperatorTerm {
            factors,
            coefficient,
        })
    }

    pub fn real(coefficient: f64, factors: Vec<(usize, LocalMatrix)>) -> Result<Self> {
        Self::new(Complex64::new(coefficient, 0.0), factors)
    }

    pub fn identity(coefficient: f64) -> Self {
        OperatorTerm {
            factors: Vec::new(),
            coefficient: Complex64::new(coefficient, 0.0),
        }
    }

    pub fn factors(&self) -> &[(usize, LocalMatrix)] {
        &self.factors
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    /// Applies the term to one configuration, pushing `(code', amplitude)` pairs.
    fn apply(&self, basis: &SpinBasis, code: u64, out: &mut Vec<(u64, Complex64)>) {
        out.clear();
        out.push((code, self.coefficient));
        let d = basis.local_dim();
        let mut next = Vec::new();
        for (site, m) in &self.factors {
            next.clear();
            for &(cfg, amp) in out.iter() {
                let a = basis.digit(cfg, *site);
                for b in 0..d {
                    let v = m[(b, a)];
                    if v.re != 0.0 || v.im != 0.0 {
                        next.push((basis.with_digit(cfg, *site, b), amp * v));
                    }
                }
            }
            std::mem::swap(out, &mut next);
        }
    }
}

/// Sum of [`OperatorTerm`]s with a name used in diagnostics.
#[derive(Debug, Clone)]
pub struct OperatorSum {
    name: String,
    terms: Vec<OperatorTerm>,
    hermitian: bool,
}

impl OperatorSum {
    /// An empty sum flagged hermitian; the flag is checked at assembly.
    pub fn new(name: impl Into<String>) -> Self {
        OperatorSum {
            name: name.into(),
            terms: Vec::new(),
            hermitian: true,
        }
    }

    pub fn with_terms(name: impl Into<String>, terms: Vec<OperatorTerm>) -> Self {
        OperatorSum {
            name: name.into(),
            terms,
            hermitian: true,
        }
    }

    /// Marks the sum as not necessarily hermitian, disabling the check.
    pub fn non_hermitian(mut self) -> Self {
        self.hermitian = false;
        self
    }

    pub fn push(&mut self, term: OperatorTerm) {
        self.terms.push(term);
    }

    pub fn extend(&mut self, other: &OperatorSum, scale: f64) {
        for t in &other.terms {
            let mut t = t.clone();
            t.coefficient *= scale;
            self.terms.push(t);
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn max_site(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|(s, _)| *s))
            .max()
    }
}

/// Ordered, labelled operator basis `{O_m}`.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    operators: Vec<OperatorSum>,
    labels: Vec<String>,
}

impl OperatorBasis {
    pub fn new(labels: Vec<String>, operators: Vec<OperatorSum>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidArgument("operator basis must contain at least one operator".into()));
        }
        if labels.len() != operators.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} operators",
                labels.len(),
                operators.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate operator label {l:?}")));
            }
        }
        Ok(OperatorBasis { operators, labels })
    }

    /// Builds a basis whose labels are the operator names.
    pub fn from_sums(operators: Vec<OperatorSum>) -> Result<Self> {
        let labels = operators.iter().map(|o| o.name().to_string()).collect();
        Self::new(labels, operators)
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn operators(&self) -> &[OperatorSum] {
        &self.operators
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Keeps the operators at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut ops = Vec::new();
        for &i in indices {
            let op = self
                .operators
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("operator index {i} out of range")))?;
            labels.push(self.labels[i].clone());
            ops.push(op.clone());
        }
        Self::new(labels, ops)
    }
}

/// Assembles `op` on `basis`, verifying sector preservation and (if flagged)
/// hermiticity.
pub fn assemble_sparse(op: &OperatorSum, basis: &SpinBasis) -> Result<SparseMatrix> {
    let d = basis.local_dim();
    for (t, term) in op.terms.iter().enumerate() {
        for (site, m) in &term.factors {
            if *site >= basis.n_sites() {
                return Err(Error::InvalidArgument(format!(
                    "term #{t} of {} acts on site {site} of a {}-site chain",
                    op.name,
                    basis.n_sites()
                )));
            }
            if m.nrows() != d {
                return Err(Error::InvalidArgument(format!(
                    "term #{t} of {} has a {}x{} factor on a {d}-level site",
                    op.name,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
    }

    let dim = basis.dim();
    let mut triplets = Vec::new();
    let mut scratch = Vec::new();
    let mut column: HashMap<u64, (Complex64, usize)> = HashMap::new();
    for j in 0..dim {
        let code = basis.code(j);
        column.clear();
        for (t, term) in op.terms.iter().enumerate() {
            term.apply(basis, code, &mut scratch);
            for &(target, amp) in &scratch {
                column
                    .entry(target)
                    .and_modify(|e| e.0 += amp)
                    .or_insert((amp, t));
            }
        }
        for (&target, &(amp, first_term)) in &column {
            match basis.index_of_code(target) {
                Some(i) => triplets.push((i, j, amp)),
                None => {
                    if amp.norm() > 1e-12 {
                        return Err(Error::SectorViolation {
                            term: format!("#{first_term} of {}", op.name),
                        });
                    }
                }
            }
        }
    }
    let m = SparseMatrix::from_complex(CsrMatrix::from_triplets(dim, triplets));
    if op.hermitian {
        let defect = m.hermitian_defect();
        if defect >= HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
    }
    Ok(m)
}

/// Bonds `(i, i + r)` of a chain; periodic chains wrap and contribute `N` bonds.
pub fn bonds(n_sites: usize, range: usize, boundary: crate::hilbert::Boundary) -> Vec<(usize, usize)> {
    use crate::hilbert::Boundary;
    if range == 0 || range >= n_sites {
        return Vec::new();
    }
    match boundary {
        Boundary::Open => (0..n_sites - range).map(|i| (i, i + range)).collect(),
        Boundary::Periodic => (0..n_sites).map(|i| (i, (i + range) % n_sites)).collect(),
    }
}

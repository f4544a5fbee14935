//! Named operator bases for spin chains, addressable from configuration files.

use super::local::{self, LocalMatrix};
use super::{bonds, OperatorBasis, OperatorSum, OperatorTerm};
use crate::error::{Error, Result};
use crate::hilbert::Boundary;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A model family whose operator basis can be built for any chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum ModelSpec {
    /// Translation-invariant sums of Pauli strings supported on windows of at most
    /// `k` consecutive sites. With `real_only` strings with an odd number of `Y`
    /// factors are skipped, so every basis operator is a real matrix.
    #[serde(rename = "pauli_strings_k_local")]
    PauliStringsKLocal {
        k: usize,
        #[serde(default = "default_true")]
        real_only: bool,
    },
    /// `{sum S_i.S_{i+1}, sum (S_i.S_{i+1})^2}`.
    #[serde(rename = "heisenberg_bilinear_biquadratic")]
    HeisenbergBilinearBiquadratic {
        #[serde(default = "default_spin_one")]
        spin: f64,
    },
    /// `{sum S_i.S_{i+1}, sum S_i.S_{i+2}}`.
    #[serde(rename = "j1_j2")]
    J1J2 {
        #[serde(default = "default_spin_half")]
        spin: f64,
    },
    /// `{sum Z_i Z_{i+1}, sum X_i}` in Pauli normalization.
    #[serde(rename = "transverse_field_ising")]
    TransverseFieldIsing {},
}

fn default_true() -> bool {
    true
}

fn default_spin_one() -> f64 {
    1.0
}

fn default_spin_half() -> f64 {
    0.5
}

fn local_dim_for_spin(spin: f64) -> Result<usize> {
    let twice = 2.0 * spin;
    if !(twice >= 1.0 && (twice - twice.round()).abs() < 1e-12 && twice <= 16.0) {
        return Err(Error::Config(format!("spin must be a positive half-integer, got {spin}")));
    }
    Ok(twice.round() as usize + 1)
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::PauliStringsKLocal { .. } => "pauli_strings_k_local",
            ModelSpec::HeisenbergBilinearBiquadratic { .. } => "heisenberg_bilinear_biquadratic",
            ModelSpec::J1J2 { .. } => "j1_j2",
            ModelSpec::TransverseFieldIsing {} => "transverse_field_ising",
        }
    }

    pub fn local_dim(&self) -> Result<usize> {
        match self {
            ModelSpec::PauliStringsKLocal { .. } | ModelSpec::TransverseFieldIsing {} => Ok(2),
            ModelSpec::HeisenbergBilinearBiquadratic { spin } | ModelSpec::J1J2 { spin } => {
                local_dim_for_spin(*spin)
            }
        }
    }

    /// Operator labels in basis order; independent of the chain length.
    pub fn labels(&self) -> Result<Vec<String>> {
        Ok(match self {
            ModelSpec::PauliStringsKLocal { k, real_only } => pauli_patterns(*k, *real_only)?,
            ModelSpec::HeisenbergBilinearBiquadratic { .. } => vec!["bilinear".into(), "biquadratic".into()],
            ModelSpec::J1J2 { .. } => vec!["J1".into(), "J2".into()],
            ModelSpec::TransverseFieldIsing {} => vec!["ZZ".into(), "X".into()],
        })
    }

    pub fn build(&self, n_sites: usize, boundary: Boundary) -> Result<OperatorBasis> {
        let d = self.local_dim()?;
        let ops = match self {
            ModelSpec::PauliStringsKLocal { k, real_only } => {
                if *k > n_sites {
                    return Err(Error::Config(format!("{k}-local strings need at least {k} sites, got {n_sites}")));
                }
                pauli_patterns(*k, *real_only)?
                    .iter()
                    .map(|p| pauli_string_sum(p, n_sites, boundary))
                    .collect::<Result<Vec<_>>>()?
            }
            ModelSpec::HeisenbergBilinearBiquadratic { .. } => vec![
                bond_sum("bilinear", n_sites, 1, boundary, |i, j, s| push_dot(s, d, i, j, 1.0))?,
                bond_sum("biquadratic", n_sites, 1, boundary, |i, j, s| push_dot_squared(s, d, i, j))?,
            ],
            ModelSpec::J1J2 { .. } => vec![
                bond_sum("J1", n_sites, 1, boundary, |i, j, s| push_dot(s, d, i, j, 1.0))?,
                bond_sum("J2", n_sites, 2, boundary, |i, j, s| push_dot(s, d, i, j, 1.0))?,
            ],
            ModelSpec::TransverseFieldIsing {} => vec![
                bond_sum("ZZ", n_sites, 1, boundary, |i, j, s| {
                    s.push(OperatorTerm::real(1.0, vec![(i, local::pauli_z()), (j, local::pauli_z())])?);
                    Ok(())
                })?,
                {
                    let mut s = OperatorSum::new("X");
                    for i in 0..n_sites {
                        s.push(OperatorTerm::real(1.0, vec![(i, local::pauli_x())])?);
                    }
                    s
                },
            ],
        };
        OperatorBasis::from_sums(ops)
    }
}

fn bond_sum(
    name: &str,
    n_sites: usize,
    range: usize,
    boundary: Boundary,
    mut push: impl FnMut(usize, usize, &mut OperatorSum) -> Result<()>,
) -> Result<OperatorSum> {
    let list = bonds(n_sites, range, boundary);
    if list.is_empty() {
        return Err(Error::Config(format!(
            "{name}: no bonds of range {range} on a {n_sites}-site chain"
        )));
    }
    let mut s = OperatorSum::new(name);
    for (i, j) in list {
        push(i, j, &mut s)?;
    }
    Ok(s)
}

/// `S_i.S_j = Sz Sz + (S+ S- + S- S+) / 2` as `(coefficient, A, B)` factor pairs.
fn dot_factors(d: usize) -> [(f64, LocalMatrix, LocalMatrix); 3] {
    [
        (1.0, local::sz(d), local::sz(d)),
        (0.5, local::splus(d), local::sminus(d)),
        (0.5, local::sminus(d), local::splus(d)),
    ]
}

fn push_dot(sum: &mut OperatorSum, d: usize, i: usize, j: usize, scale: f64) -> Result<()> {
    for (c, a, b) in dot_factors(d) {
        sum.push(OperatorTerm::real(scale * c, vec![(i, a), (j, b)])?);
    }
    Ok(())
}

fn push_dot_squared(sum: &mut OperatorSum, d: usize, i: usize, j: usize) -> Result<()> {
    let f = dot_factors(d);
    for (c1, a1, b1) in &f {
        for (c2, a2, b2) in &f {
            sum.push(OperatorTerm::real(c1 * c2, vec![(i, a1 * a2), (j, b1 * b2)])?);
        }
    }
    Ok(())
}

/// Pauli-string patterns of length `1..=k` with non-identity end letters, in
/// length-then-lexicographic order over `I < X < Y < Z`.
pub fn pauli_patterns(k: usize, real_only: bool) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > 6 {
        return Err(Error::Config(format!("k = {k} generates too many strings; use k <= 6")));
    }
    const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];
    let mut out = Vec::new();
    for len in 1..=k {
        let total = 4usize.pow(len as u32);
        for idx in 0..total {
            let s: Vec<char> = (0..len)
                .map(|p| LETTERS[(idx / 4usize.pow((len - 1 - p) as u32)) % 4])
                .collect();
            if s[0] == 'I' || s[len - 1] == 'I' {
                continue;
            }
            if real_only && s.iter().filter(|&&c| c == 'Y').count() % 2 == 1 {
                continue;
            }
            out.push(s.into_iter().collect());
        }
    }
    Ok(out)
}

/// `sum_i P_0(i) P_1(i+1) ... ` over all translations that fit (open) or wrap (periodic).
fn pauli_string_sum(pattern: &str, n_sites: usize, boundary: Boundary) -> Result<OperatorSum> {
    let letters: Vec<char> = pattern.chars().collect();
    let len = letters.len();
    let starts = match boundary {
        Boundary::Open => n_sites + 1 - len,
        Boundary::Periodic => n_sites,
    };
    let mut sum = OperatorSum::new(pattern);
    for start in 0..starts {
        let mut factors = Vec::new();
        for (offset, &l) in letters.iter().enumerate() {
            if l == 'I' {
                continue;
            }
            let m = local::pauli(l).ok_or_else(|| Error::Config(format!("bad Pauli letter {l}")))?;
            factors.push(((start + offset) % n_sites, m));
        }
        sum.push(OperatorTerm::new(Complex64::new(1.0, 0.0), factors)?);
    }
    Ok(sum)
}

/// Symmetry generators usable in penalty terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryGenerator {
    /// `(sum_i S^z_i)^2`
    TotalSzSquared,
    /// `S_tot^2 = (sum_i S_i)^2`
    TotalSpinCasimir,
}

pub fn symmetry_generator(generator: SymmetryGenerator, n_sites: usize, local_dim: usize) -> Result<OperatorSum> {
    let d = local_dim;
    let s = local::spin_of(d);
    let mut sum = OperatorSum::new(match generator {
        SymmetryGenerator::TotalSzSquared => "total_sz_squared",
        SymmetryGenerator::TotalSpinCasimir => "total_spin_casimir",
    });
    for i in 0..n_sites {
        match generator {
            SymmetryGenerator::TotalSzSquared => {
                let sz = local::sz(d);
                sum.push(OperatorTerm::real(1.0, vec![(i, &sz * &sz)])?);
            }
            SymmetryGenerator::TotalSpinCasimir => {
                sum.push(OperatorTerm::real(s * (s + 1.0), vec![(i, local::identity(d))])?);
            }
        }
        for j in (i + 1)..n_sites {
            match generator {
                SymmetryGenerator::TotalSzSquared => {
                    sum.push(OperatorTerm::real(2.0, vec![(i, local::sz(d)), (j, local::sz(d))])?);
                }
                SymmetryGenerator::TotalSpinCasimir => push_dot(&mut sum, d, i, j, 2.0)?,
            }
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_pattern_counts() {
        assert_eq!(pauli_patterns(1, false).unwrap(), vec!["X", "Y", "Z"]);
        assert_eq!(pauli_patterns(1, true).unwrap(), vec!["X", "Z"]);
        // length 2: 9 end pairs; real: XX XZ YY ZX ZZ
        assert_eq!(pauli_patterns(2, false).unwrap().len(), 3 + 9);
        assert_eq!(pauli_patterns(2, true).unwrap().len(), 2 + 5);
        // length 3 real: 12 + 4 + 3
        assert_eq!(pauli_patterns(3, true).unwrap().len(), 2 + 5 + 19);
        assert_eq!(pauli_patterns(3, false).unwrap().len(), 3 + 9 + 36);
    }

    #[test]
    fn model_labels_match_built_basis() {
        let models = [
            ModelSpec::PauliStringsKLocal { k: 3, real_only: true },
            ModelSpec::HeisenbergBilinearBiquadratic { spin: 1.0 },
            ModelSpec::J1J2 { spin: 0.5 },
            ModelSpec::TransverseFieldIsing {},
        ];
        for m in models {
            let basis = m.build(6, Boundary::Periodic).unwrap();
            assert_eq!(basis.labels(), m.labels().unwrap().as_slice());
        }
    }

    #[test]
    fn spin_validation() {
        assert_eq!(local_dim_for_spin(0.5).unwrap(), 2);
        assert_eq!(local_dim_for_spin(1.0).unwrap(), 3);
        assert!(local_dim_for_spin(0.3).is_err());
        assert!(local_dim_for_spin(0.0).is_err());
    }

    #[test]
    fn model_names_roundtrip_through_toml() {
        let m: ModelSpec = toml::from_str("name = \"pauli_strings_k_local\"\nk = 2\n").unwrap();
        assert_eq!(m, ModelSpec::PauliStringsKLocal { k: 2, real_only: true });
        let m: ModelSpec = toml::from_str("name = \"transverse_field_ising\"\n").unwrap();
        assert_eq!(m.name(), "transverse_field_ising");
        assert!(toml::from_str::<ModelSpec>("name = \"j1_j2\"\nbogus = 1\n").is_err());
        assert!(toml::from_str::<ModelSpec>("name = \"kitaev\"\n").is_err());
    }
}

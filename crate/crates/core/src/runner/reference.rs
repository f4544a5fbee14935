//! Closed-form reference states and the plain-text amplitude file format.
//!
//! Amplitude files hold one basis state per line as `index re im`, where `index` is the
//! position in the (sector-restricted, lexicographically ordered) basis. Blank lines and
//! lines starting with `#` are ignored. Amplitudes are normalized on load.

use crate::error::{Error, Result};
use crate::hilbert::{SpinBasis, WaveFunction};
use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    /// Spin-1 valence-bond solid on a ring, from its bond-dimension-2 matrix product form.
    AkltPeriodic,
    /// Spin-1/2 singlets on bonds (0,1), (2,3), ...
    MajumdarGhoshDimer,
    /// `(|0...0> + |d-1...d-1>) / sqrt 2`.
    Ghz,
}

impl NamedState {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "aklt_periodic" => Ok(Self::AkltPeriodic),
            "majumdar_ghosh_dimer" => Ok(Self::MajumdarGhoshDimer),
            "ghz" => Ok(Self::Ghz),
            other => Err(Error::UnknownName(format!("reference state '{other}'"))),
        }
    }
}

/// Builds the named state on `basis`.
pub fn make_reference_state(name: NamedState, basis: &Arc<SpinBasis>) -> Result<WaveFunction> {
    let n = basis.n_sites();
    let amps: Vec<Complex64> = match name {
        NamedState::AkltPeriodic => {
            if basis.local_dim() != 3 {
                return Err(Error::InvalidArgument("the AKLT state needs spin-1 sites".into()));
            }
            if n < 2 {
                return Err(Error::InvalidArgument("the AKLT ring needs at least two sites".into()));
            }
            let a = (2.0f64 / 3.0).sqrt();
            let b = (1.0f64 / 3.0).sqrt();
            // Digit 0, 1, 2 carry m = +1, 0, -1.
            let tensors = [
                Matrix2::new(0.0, a, 0.0, 0.0),
                Matrix2::new(-b, 0.0, 0.0, b),
                Matrix2::new(0.0, 0.0, -a, 0.0),
            ];
            (0..basis.dim())
                .map(|i| {
                    let code = basis.code(i);
                    let mut m = Matrix2::identity();
                    for site in 0..n {
                        m *= tensors[basis.digit(code, site)];
                    }
                    Complex64::new(m.trace(), 0.0)
                })
                .collect()
        }
        NamedState::MajumdarGhoshDimer => {
            if basis.local_dim() != 2 {
                return Err(Error::InvalidArgument("the dimer state needs spin-1/2 sites".into()));
            }
            if n % 2 != 0 || n == 0 {
                return Err(Error::InvalidArgument(format!(
                    "the dimer state needs an even number of sites, got {n}"
                )));
            }
            let s = std::f64::consts::FRAC_1_SQRT_2;
            (0..basis.dim())
                .map(|i| {
                    let code = basis.code(i);
                    let mut amp = 1.0;
                    for pair in 0..n / 2 {
                        amp *= match (basis.digit(code, 2 * pair), basis.digit(code, 2 * pair + 1)) {
                            (0, 1) => s,
                            (1, 0) => -s,
                            _ => 0.0,
                        };
                    }
                    Complex64::new(amp, 0.0)
                })
                .collect()
        }
        NamedState::Ghz => {
            let d = basis.local_dim() as u8;
            let low = basis.index_of(&vec![0u8; n]);
            let high = basis.index_of(&vec![d - 1; n]);
            let (Some(low), Some(high)) = (low, high) else {
                return Err(Error::InvalidArgument(
                    "the GHZ components are not both in the chosen sector".into(),
                ));
            };
            let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
            amps[low] = Complex64::new(1.0, 0.0);
            amps[high] = Complex64::new(1.0, 0.0);
            amps
        }
    };
    if amps.iter().all(|a| a.norm_sqr() == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name:?} has no weight in the chosen basis"
        )));
    }
    WaveFunction::normalized(basis.clone(), amps)
}

/// Reads an amplitude file for `basis`.
pub fn read_amplitudes<R: BufRead>(input: R, basis: &Arc<SpinBasis>) -> Result<WaveFunction> {
    let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::InvalidArgument(format!("amplitude file line {}: {what}", lineno + 1));
        let mut fields = t.split_whitespace();
        let idx: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("expected an integer index"))?;
        let re: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("expected a real part"))?;
        let im: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("expected an imaginary part"))?;
        if fields.next().is_some() {
            return Err(bad("trailing fields"));
        }
        if idx >= basis.dim() {
            return Err(bad(&format!("index {idx} outside a basis of dimension {}", basis.dim())));
        }
        if !re.is_finite() || !im.is_finite() {
            return Err(bad("non-finite amplitude"));
        }
        amps[idx] += Complex64::new(re, im);
    }
    if amps.iter().all(|a| a.norm_sqr() == 0.0) {
        return Err(Error::InvalidArgument("amplitude file describes the zero vector".into()));
    }
    WaveFunction::normalized(basis.clone(), amps)
}

/// Writes every nonzero amplitude of `psi` in the amplitude file format.
pub fn write_amplitudes<W: Write>(mut out: W, psi: &WaveFunction) -> Result<()> {
    let b = psi.basis();
    writeln!(
        out,
        "# n_sites={} local_dim={} twice_sz={} boundary={:?}",
        b.n_sites(),
        b.local_dim(),
        b.sector().map_or("none".to_string(), |s| s.to_string()),
        b.boundary()
    )?;
    for (i, a) in psi.amplitudes().iter().enumerate() {
        if a.norm_sqr() > 0.0 {
            writeln!(out, "{i} {:e} {:e}", a.re, a.im)?;
        }
    }
    Ok(())
}

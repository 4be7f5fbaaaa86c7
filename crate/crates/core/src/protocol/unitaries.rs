//! Unitary sources for the rocket channel: the single-qubit Clifford group
//! (an exact unitary 2-design) and Haar sampling.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QcapError, Result};
use crate::qmat::random::haar_unitary;
use crate::qmat::{ComplexMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitarySource {
    Clifford,
    Haar,
}

impl fmt::Display for UnitarySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitarySource::Clifford => "clifford",
            UnitarySource::Haar => "haar",
        })
    }
}

impl FromStr for UnitarySource {
    type Err = QcapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clifford" => Ok(UnitarySource::Clifford),
            "haar" => Ok(UnitarySource::Haar),
            other => Err(QcapError::InvalidParameter(format!("unknown unitary source '{other}'"))),
        }
    }
}

/// Multiplies by the phase that makes the first nonzero entry (row-major)
/// real and positive.
fn fix_phase(m: &ComplexMatrix) -> ComplexMatrix {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            if z.norm() > 1e-9 {
                return m.scale(z.conj() / z.norm());
            }
        }
    }
    m.clone()
}

fn phase_key(m: &ComplexMatrix) -> Vec<(i64, i64)> {
    let mut key = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            key.push(((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64));
        }
    }
    key
}

/// The 24 single-qubit Clifford unitaries modulo global phase, obtained as
/// the closure of `{H, S}` under multiplication.
pub fn clifford_group(d: usize) -> Result<Vec<ComplexMatrix>> {
    if d != 2 {
        return Err(QcapError::InvalidParameter(format!(
            "Clifford enumeration is implemented for d=2 only, got d={d}"
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let h = ComplexMatrix::from_row_slice(2, 2, &[r(s), r(s), r(s), r(-s)])?;
    let phase = ComplexMatrix::from_row_slice(2, 2, &[r(1.0), r(0.0), r(0.0), C64::new(0.0, 1.0)])?;
    let generators = [h, phase];

    let identity = ComplexMatrix::identity(2);
    let mut seen = HashSet::new();
    seen.insert(phase_key(&identity));
    let mut group = vec![identity.clone()];
    let mut queue = VecDeque::from([identity]);
    while let Some(g) = queue.pop_front() {
        for gen in &generators {
            let next = fix_phase(&(gen * &g));
            if seen.insert(phase_key(&next)) {
                group.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    Ok(group)
}

/// Unitary pairs defining a flagged rocket channel: every Clifford pair
/// (576 at d=2, `samples` ignored) or `samples` Haar pairs drawn from `seed`.
pub fn unitary_pairs(
    d: usize,
    source: UnitarySource,
    samples: usize,
    seed: u64,
) -> Result<Vec<(ComplexMatrix, ComplexMatrix)>> {
    match source {
        UnitarySource::Clifford => {
            let group = clifford_group(d)?;
            Ok(group
                .iter()
                .flat_map(|u| group.iter().map(move |v| (u.clone(), v.clone())))
                .collect())
        }
        UnitarySource::Haar => sample_unitary_pairs(d, source, samples, seed),
    }
}

/// `samples` independently drawn pairs (uniform over the Clifford group, or Haar).
pub fn sample_unitary_pairs(
    d: usize,
    source: UnitarySource,
    samples: usize,
    seed: u64,
) -> Result<Vec<(ComplexMatrix, ComplexMatrix)>> {
    if samples == 0 {
        return Err(QcapError::InvalidParameter("samples must be positive".into()));
    }
    if d < 2 {
        return Err(QcapError::InvalidParameter(format!("dimension {d} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match source {
        UnitarySource::Clifford => {
            let group = clifford_group(d)?;
            Ok((0..samples)
                .map(|_| {
                    let u = group[rng.random_range(0..group.len())].clone();
                    let v = group[rng.random_range(0..group.len())].clone();
                    (u, v)
                })
                .collect())
        }
        UnitarySource::Haar => Ok((0..samples)
            .map(|_| {
                let u = haar_unitary(d, &mut rng);
                let v = haar_unitary(d, &mut rng);
                (u, v)
            })
            .collect()),
    }
}

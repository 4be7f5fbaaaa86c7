//! Entanglement-assisted decoding of the rocket channel and of its
//! complement, simulated on explicit state vectors, and the coherent
//! information of rocket ⊗ erasure at the protocol input.
//!
//! Register layout of the simulation (each of dimension `d`):
//!
//! | index | direct variant                     | complement variant                 |
//! |-------|------------------------------------|------------------------------------|
//! | 0     | `R`, sender's kept reference       | `R`, sender's kept reference       |
//! | 1     | `A1`, reference partner, to B      | `A1`, shared pair half, to E       |
//! | 2     | `A2`, shared pair half, to E       | `A2`, reference partner, to B      |
//! | 3     | `S`, receiver's shared pair half   | `S`, receiver's shared pair half   |
//!
//! Pushing a local operator through a maximally entangled pair transposes it,
//! `(M ⊗ I)|Φ> = (I ⊗ Mᵀ)|Φ>`. The rocket output therefore equals
//! `Vᵀ_S P^Γ_{A1 S} U_{A1}` applied to the two initial pairs, and the
//! receiver undoes it with `U†_{A1} (P^Γ)†_{A1 S} conj(V)_S`. In the
//! complement variant the roles of `U` and `V` swap and the first factor of
//! `P` is transposed instead.

mod unitaries;

pub use unitaries::{clifford_group, sample_unitary_pairs, unitary_pairs, UnitarySource};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::{erasure, rocket_instance, ISOMETRY_TOL};
use crate::error::{QcapError, Result};
use crate::info::coherent_information;
use crate::par::{compensated_sum, map_slice, Execution};
use crate::qmat::{
    check_dim, checked_dim_product, fidelity_with_pure, join_index, kron, max_entangled, split_index,
    ComplexMatrix, DensityMatrix, C64,
};

/// Which output of the rocket carries the decoded pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RocketVariant {
    /// Decoding the rocket channel itself (output `B = A1`).
    Direct,
    /// Decoding the complementary channel (output `E = A2`).
    Complement,
}

impl RocketVariant {
    pub fn other(self) -> Self {
        match self {
            RocketVariant::Direct => RocketVariant::Complement,
            RocketVariant::Complement => RocketVariant::Direct,
        }
    }
}

impl fmt::Display for RocketVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RocketVariant::Direct => "direct",
            RocketVariant::Complement => "complement",
        })
    }
}

impl FromStr for RocketVariant {
    type Err = QcapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(RocketVariant::Direct),
            "complement" => Ok(RocketVariant::Complement),
            other => Err(QcapError::InvalidParameter(format!("unknown variant '{other}'"))),
        }
    }
}

/// A named simulation register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub dim: usize,
    pub role: String,
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub d: usize,
    pub variant: RocketVariant,
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
    /// Overlap of the decoded pair with `|Φ_d>`.
    pub fidelity: f64,
    /// Deviation of the receiver's correction from unitarity, and of the
    /// state norm across the correction.
    pub correction_error: f64,
    pub register_trace: Vec<Register>,
}

fn register_trace(d: usize, variant: RocketVariant) -> Vec<Register> {
    let reg = |name: &str, role: &str| Register { name: name.into(), dim: d, role: role.into() };
    match variant {
        RocketVariant::Direct => vec![
            reg("R", "sender reference, paired with A1"),
            reg("A1", "rocket input 1, delivered to the receiver"),
            reg("A2", "rocket input 2, shared pair half, sent to the environment"),
            reg("S", "receiver half of the shared pair"),
        ],
        RocketVariant::Complement => vec![
            reg("R", "sender reference, paired with A2"),
            reg("A1", "rocket input 1, shared pair half, sent away"),
            reg("A2", "rocket input 2, delivered to the receiver"),
            reg("S", "receiver half of the shared pair"),
        ],
    }
}

/// Applies `op` to the registers `targets` (in that factor order) of `state`.
fn apply_local(state: &mut [C64], dims: &[usize], targets: &[usize], op: &ComplexMatrix) {
    let sub_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let sub: usize = sub_dims.iter().product();
    debug_assert_eq!(op.rows(), sub);
    let mut digits = vec![0usize; dims.len()];
    let mut sub_digits = vec![0usize; targets.len()];
    let mut indices = vec![0usize; sub];
    let mut buf = vec![C64::new(0.0, 0.0); sub];
    for base in 0..state.len() {
        split_index(base, dims, &mut digits);
        // visit each orbit once, from the member with all target digits zero
        if targets.iter().any(|&t| digits[t] != 0) {
            continue;
        }
        for (k, slot) in indices.iter_mut().enumerate() {
            split_index(k, &sub_dims, &mut sub_digits);
            for (&t, &s) in targets.iter().zip(&sub_digits) {
                digits[t] = s;
            }
            *slot = join_index(&digits, dims);
        }
        for (b, &idx) in buf.iter_mut().zip(&indices) {
            *b = state[idx];
        }
        let out = op.apply_to(&buf);
        for (&idx, val) in indices.iter().zip(out) {
            state[idx] = val;
        }
    }
}

/// `P = Σ ω^{ij} |i><i| ⊗ |j><j|`.
fn phase_coupling(d: usize) -> ComplexMatrix {
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let diag: Vec<C64> = (0..d * d).map(|k| C64::from_polar(1.0, omega * (((k / d) * (k % d)) % d) as f64)).collect();
    ComplexMatrix::from_fn(d * d, d * d, |r, c| if r == c { diag[r] } else { C64::new(0.0, 0.0) })
}

/// Transpose of one factor of an operator on `C^d ⊗ C^d`.
fn partial_transpose(m: &ComplexMatrix, d: usize, first: bool) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (c / d, c % d);
        if first {
            m[(k * d + j, i * d + l)]
        } else {
            m[(i * d + l, k * d + j)]
        }
    })
}

fn validate_unitaries(d: usize, u: &ComplexMatrix, v: &ComplexMatrix) -> Result<()> {
    for m in [u, v] {
        if m.rows() != d || m.cols() != d {
            return Err(QcapError::ShapeMismatch(format!("protocol unitaries must be {d}x{d}")));
        }
        let err = m.isometry_error();
        if err > ISOMETRY_TOL {
            return Err(QcapError::NotUnitary(err));
        }
    }
    Ok(())
}

fn norm(state: &[C64]) -> f64 {
    state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Simulates the noiseless rocket branch with known `(u, v)` and the
/// receiver's correction; returns the fidelity of the decoded pair.
pub fn run_rocket_protocol(
    d: usize,
    u: &ComplexMatrix,
    v: &ComplexMatrix,
    variant: RocketVariant,
) -> Result<ProtocolRun> {
    if d < 2 {
        return Err(QcapError::InvalidParameter(format!("dimension {d} < 2")));
    }
    check_dim(d)?;
    let dims = [d; 4];
    let total = checked_dim_product(&dims)?;
    validate_unitaries(d, u, v)?;

    // (R, partner) and (shared, S) pairs
    let partner = match variant {
        RocketVariant::Direct => 1,
        RocketVariant::Complement => 2,
    };
    let shared = 3 - partner;
    let amp = C64::new(1.0 / d as f64, 0.0);
    let mut state = vec![C64::new(0.0, 0.0); total];
    let mut digits = [0usize; 4];
    for (idx, slot) in state.iter_mut().enumerate() {
        split_index(idx, &dims, &mut digits);
        if digits[0] == digits[partner] && digits[shared] == digits[3] {
            *slot = amp;
        }
    }

    let p = phase_coupling(d);
    apply_local(&mut state, &dims, &[1], u);
    apply_local(&mut state, &dims, &[2], v);
    apply_local(&mut state, &dims, &[1, 2], &p);

    let (targets, correction) = match variant {
        RocketVariant::Direct => {
            let id = ComplexMatrix::identity(d);
            let undo_v = kron(&id, &v.conj())?;
            let undo_p = partial_transpose(&p, d, false).adjoint();
            let undo_u = kron(&u.adjoint(), &id)?;
            ([1usize, 3usize], &(&undo_u * &undo_p) * &undo_v)
        }
        RocketVariant::Complement => {
            let id = ComplexMatrix::identity(d);
            let undo_u = kron(&u.conj(), &id)?;
            let undo_p = partial_transpose(&p, d, true).adjoint();
            let undo_v = kron(&id, &v.adjoint())?;
            ([3usize, 2usize], &(&undo_v * &undo_p) * &undo_u)
        }
    };
    let before = norm(&state);
    apply_local(&mut state, &dims, &targets, &correction);
    let correction_error = correction.isometry_error().max((norm(&state) - before).abs());

    let rho = DensityMatrix::new_unchecked(ComplexMatrix::outer(&state, &state));
    let pair = rho.partial_trace(&dims, &[0, partner])?;
    let fidelity = fidelity_with_pure(&max_entangled(d), &pair)?;
    Ok(ProtocolRun {
        d,
        variant,
        u: u.clone(),
        v: v.clone(),
        fidelity,
        correction_error,
        register_trace: register_trace(d, variant),
    })
}

/// Fidelity statistics of the protocol over a batch of unitary pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSweep {
    pub d: usize,
    pub variant: RocketVariant,
    pub unitaries: UnitarySource,
    pub samples: usize,
    pub seed: u64,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    pub max_correction_error: f64,
    pub registers: Vec<Register>,
}

/// Runs the protocol for `samples` pairs drawn from `source`.
pub fn protocol_sweep(
    d: usize,
    variant: RocketVariant,
    source: UnitarySource,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<ProtocolSweep> {
    checked_dim_product(&[d; 4])?;
    let pairs = sample_unitary_pairs(d, source, samples, seed)?;
    let runs = map_slice(exec, &pairs, |(u, v)| run_rocket_protocol(d, u, v, variant))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let fids: Vec<f64> = runs.iter().map(|r| r.fidelity).collect();
    Ok(ProtocolSweep {
        d,
        variant,
        unitaries: source,
        samples,
        seed,
        min_fidelity: fids.iter().copied().fold(f64::INFINITY, f64::min),
        mean_fidelity: compensated_sum(fids.iter().copied()) / fids.len() as f64,
        max_correction_error: runs.iter().map(|r| r.correction_error).fold(0.0, f64::max),
        registers: register_trace(d, variant),
    })
}

/// Pure input for rocket ⊗ erasure on registers `(R, A1, A2, A3)`.
#[derive(Debug, Clone)]
pub struct ProtocolInput {
    pub d: usize,
    pub variant: RocketVariant,
    /// Global pure state, `R` most significant.
    pub purification: Vec<C64>,
    /// Marginal on `A1 A2 A3`, the channel input.
    pub state: DensityMatrix,
    pub registers: Vec<Register>,
}

/// Direct-variant input: `R` entangled with `A1`, `A2` with `A3`.
pub fn protocol_input_state(d: usize) -> Result<ProtocolInput> {
    protocol_input_state_for(d, RocketVariant::Direct)
}

/// Protocol input for either variant; for the complement `R` pairs with
/// `A2` and `A1` with `A3`.
pub fn protocol_input_state_for(d: usize, variant: RocketVariant) -> Result<ProtocolInput> {
    if d < 2 {
        return Err(QcapError::InvalidParameter(format!("dimension {d} < 2")));
    }
    let n = checked_dim_product(&[d, d, d])?;
    let dims = [d; 4];
    let total = checked_dim_product(&dims)?;
    let (partner, other) = match variant {
        RocketVariant::Direct => (1, 2),
        RocketVariant::Complement => (2, 1),
    };
    let amp = C64::new(1.0 / d as f64, 0.0);
    let mut psi = vec![C64::new(0.0, 0.0); total];
    let mut digits = [0usize; 4];
    for (idx, slot) in psi.iter_mut().enumerate() {
        split_index(idx, &dims, &mut digits);
        if digits[0] == digits[partner] && digits[other] == digits[3] {
            *slot = amp;
        }
    }
    // trace out R: ρ[x, y] = Σ_r ψ[r, x] conj(ψ[r, y])
    let mut rho = ComplexMatrix::zeros(n, n);
    for r in 0..d {
        let block = &psi[r * n..(r + 1) * n];
        for x in 0..n {
            if block[x] == C64::new(0.0, 0.0) {
                continue;
            }
            for y in 0..n {
                rho[(x, y)] += block[x] * block[y].conj();
            }
        }
    }
    let reg = |name: &str, role: &str| Register { name: name.into(), dim: d, role: role.into() };
    let registers = match variant {
        RocketVariant::Direct => vec![
            reg("R", "reference, paired with A1"),
            reg("A1", "rocket input 1"),
            reg("A2", "rocket input 2, paired with A3"),
            reg("A3", "erasure input"),
        ],
        RocketVariant::Complement => vec![
            reg("R", "reference, paired with A2"),
            reg("A1", "rocket input 1, paired with A3"),
            reg("A2", "rocket input 2"),
            reg("A3", "erasure input"),
        ],
    };
    Ok(ProtocolInput { d, variant, purification: psi, state: DensityMatrix::new_unchecked(rho), registers })
}

/// Coherent information of rocket ⊗ erasure at the protocol input, per flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq7Report {
    pub d: usize,
    pub p: f64,
    pub variant: RocketVariant,
    pub mode: UnitarySource,
    pub n_flags: usize,
    pub value_bits: f64,
    /// `(1 − p) log₂ d`.
    pub target_bits: f64,
    /// Standard error of the flag average (zero for exhaustive enumeration).
    pub stderr_bits: f64,
    pub seed: u64,
}

/// Per-flag coherent information of `R_{u,v} ⊗ E_{p,d}` (or of the rocket
/// complement ⊗ erasure) at the protocol input of the matching variant.
pub fn eq7_flag_values(
    d: usize,
    p: f64,
    variant: RocketVariant,
    pairs: &[(ComplexMatrix, ComplexMatrix)],
    exec: Execution,
) -> Result<Vec<f64>> {
    let input = protocol_input_state_for(d, variant)?;
    let eras = erasure(p, d)?;
    checked_dim_product(&[d, d + 1])?;
    map_slice(exec, pairs, |(u, v)| {
        let rocket = rocket_instance(d, u, v)?;
        let rocket = match variant {
            RocketVariant::Direct => rocket,
            RocketVariant::Complement => rocket.complement(),
        };
        coherent_information(&rocket.tensor(&eras)?, &input.state)
    })
    .into_iter()
    .collect()
}

/// Flag-averaged coherent information for one variant. Clifford mode
/// enumerates all 576 pairs at `d = 2`; Haar mode averages `samples` pairs.
pub fn evaluate_eq7_variant(
    d: usize,
    p: f64,
    variant: RocketVariant,
    mode: UnitarySource,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Eq7Report> {
    checked_dim_product(&[d, d, d])?;
    let pairs = unitary_pairs(d, mode, samples, seed)?;
    let values = eq7_flag_values(d, p, variant, &pairs, exec)?;
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let stderr_bits = match mode {
        UnitarySource::Clifford => 0.0,
        UnitarySource::Haar if values.len() > 1 => {
            let var = compensated_sum(values.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
            (var / n).sqrt()
        }
        UnitarySource::Haar => 0.0,
    };
    Ok(Eq7Report {
        d,
        p,
        variant,
        mode,
        n_flags: values.len(),
        value_bits: mean,
        target_bits: (1.0 - p) * (d as f64).log2(),
        stderr_bits,
        seed,
    })
}

/// Both variants: the rocket ⊗ erasure rate and the complementary one.
pub fn evaluate_eq7(
    d: usize,
    p: f64,
    mode: UnitarySource,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<[Eq7Report; 2]> {
    Ok([
        evaluate_eq7_variant(d, p, RocketVariant::Direct, mode, samples, seed, exec)?,
        evaluate_eq7_variant(d, p, RocketVariant::Complement, mode, samples, seed, exec)?,
    ])
}

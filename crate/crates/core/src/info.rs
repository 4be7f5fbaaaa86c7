//! One-shot information functionals in bits.
//!
//! For a [`FlaggedChannel`] the branch label reaches both the receiver and
//! the environment. The output states are then block diagonal in the label,
//! the label entropy contributes equally to `S(B)` and `S(E)`, and every
//! functional below reduces to the probability-weighted average over
//! branches. [`coherent_information_explicit_register`] keeps the label as a
//! real register and serves as the reference for that reduction.

use nalgebra::DMatrix;

use crate::channels::{FlaggedChannel, StinespringChannel};
use crate::error::{QcapError, Result};
use crate::par::compensated_sum;
use crate::qmat::{eigvalsh, entropy_of_spectrum, von_neumann_entropy, DensityMatrix, C64};

/// Finite classical-quantum ensemble `{p_x, ρ_x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    members: Vec<(f64, DensityMatrix)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let dim = members
            .first()
            .ok_or_else(|| QcapError::InvalidParameter("ensemble needs at least one member".into()))?
            .1
            .dim();
        let mut total = 0.0;
        for (p, rho) in &members {
            if p.is_nan() || *p <= 0.0 {
                return Err(QcapError::InvalidParameter(format!("ensemble probability {p} must be positive")));
            }
            if rho.dim() != dim {
                return Err(QcapError::ShapeMismatch("ensemble members differ in dimension".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(QcapError::InvalidParameter(format!("ensemble probabilities sum to {total}")));
        }
        Ok(Ensemble { members })
    }

    /// Equal weights over the given states.
    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        Self::new(states.into_iter().map(|s| (w, s)).collect())
    }

    pub fn members(&self) -> &[(f64, DensityMatrix)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].1.dim()
    }

    /// `Σ p_x ρ_x`.
    pub fn average(&self) -> DensityMatrix {
        let n = self.dim();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for (p, rho) in &self.members {
            acc += rho.matrix().as_dmatrix() * C64::new(*p, 0.0);
        }
        DensityMatrix::new_unchecked(crate::qmat::ComplexMatrix::from_dmatrix(acc))
    }
}

fn check_input(ch: &StinespringChannel, dim: usize) -> Result<()> {
    if dim != ch.input_dim() {
        return Err(QcapError::ShapeMismatch(format!(
            "input of dimension {dim} for a channel with dA = {}",
            ch.input_dim()
        )));
    }
    Ok(())
}

pub(crate) fn entropy_raw(m: &DMatrix<C64>) -> Result<f64> {
    entropy_of_spectrum(&eigvalsh(m))
}

/// `S(N(ρ)) − S(N^c(ρ))`.
pub fn coherent_information(ch: &StinespringChannel, rho: &DensityMatrix) -> Result<f64> {
    check_input(ch, rho.dim())?;
    let m = rho.matrix().as_dmatrix();
    Ok(entropy_raw(&ch.apply_raw(m))? - entropy_raw(&ch.apply_complement_raw(m))?)
}

/// `Σ_i p_i [S(N_i(ρ)) − S(N_i^c(ρ))]`.
pub fn coherent_information_flagged(fch: &FlaggedChannel, rho: &DensityMatrix) -> Result<f64> {
    let terms = fch
        .branches()
        .iter()
        .map(|(p, ch)| Ok(p * coherent_information(ch, rho)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(terms))
}

/// Coherent information with the label materialized as a classical register
/// on both outputs: `S(F B) − S(F E)` on the block-diagonal output states.
pub fn coherent_information_explicit_register(fch: &FlaggedChannel, rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != fch.input_dim() {
        return Err(QcapError::ShapeMismatch("input dimension".into()));
    }
    let fb = fch.apply_with_register(rho)?;
    let fe = fch.apply_complement_with_register(rho)?;
    Ok(von_neumann_entropy(&fb)? - von_neumann_entropy(&fe)?)
}

fn holevo_generic(ens: &Ensemble, apply: impl Fn(&DMatrix<C64>) -> DMatrix<C64>) -> Result<f64> {
    let outputs: Vec<(f64, DMatrix<C64>)> =
        ens.members.iter().map(|(p, rho)| (*p, apply(rho.matrix().as_dmatrix()))).collect();
    let n = outputs[0].1.nrows();
    let mut avg = DMatrix::<C64>::zeros(n, n);
    for (p, out) in &outputs {
        avg += out * C64::new(*p, 0.0);
    }
    let member_terms = outputs
        .iter()
        .map(|(p, out)| Ok(p * entropy_raw(out)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(entropy_raw(&avg)? - compensated_sum(member_terms))
}

/// `S(Σ p_x N(ρ_x)) − Σ p_x S(N(ρ_x))`.
pub fn holevo_information(ch: &StinespringChannel, ens: &Ensemble) -> Result<f64> {
    check_input(ch, ens.dim())?;
    holevo_generic(ens, |m| ch.apply_raw(m))
}

/// Holevo information of the complementary channel.
pub fn holevo_information_complement(ch: &StinespringChannel, ens: &Ensemble) -> Result<f64> {
    check_input(ch, ens.dim())?;
    holevo_generic(ens, |m| ch.apply_complement_raw(m))
}

/// `I(X:B) − I(X:E)`; may be negative.
pub fn private_information_value(ch: &StinespringChannel, ens: &Ensemble) -> Result<f64> {
    Ok(holevo_information(ch, ens)? - holevo_information_complement(ch, ens)?)
}

/// Holevo information with the label on the output. The label is
/// independent of `X`, so `I(X:FB) = Σ_i p_i I(X:B)_i`.
pub fn holevo_information_flagged(fch: &FlaggedChannel, ens: &Ensemble) -> Result<f64> {
    let terms = fch
        .branches()
        .iter()
        .map(|(p, ch)| Ok(p * holevo_information(ch, ens)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(terms))
}

pub fn private_information_flagged(fch: &FlaggedChannel, ens: &Ensemble) -> Result<f64> {
    let terms = fch
        .branches()
        .iter()
        .map(|(p, ch)| Ok(p * private_information_value(ch, ens)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(terms))
}

/// `(max(a, b), a + b)` for a quantity evaluated on a channel and its complement.
pub fn q1_max_tot(val_n: f64, val_nc: f64) -> (f64, f64) {
    (val_n.max(val_nc), val_n + val_nc)
}

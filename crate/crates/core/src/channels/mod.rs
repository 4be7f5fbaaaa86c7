//! Channels as Stinespring isometries.
//!
//! A [`StinespringChannel`] stores `V: A -> B ⊗ E` as a dense
//! `(dB·dE) × dA` matrix with B-major output rows (`row = b·dE + e`). The
//! channel is `Tr_E(V ρ V†)` and its complement `Tr_B(V ρ V†)`, so taking the
//! complement is a row permutation. A sparse copy of the nonzero entries,
//! grouped by environment and by output index, backs every channel
//! evaluation; the cost of applying a channel therefore scales with the
//! number of nonzero isometry entries rather than with `dB·dE·dA`.
//!
//! [`FlaggedChannel`] is a finite mixture of isometries whose classical label
//! is handed to both the receiver and the environment.

mod spec;

pub use spec::{build, parse_channel_spec, ChannelSpec, DEFAULT_ROCKET_SAMPLES};

use std::borrow::Cow;

use nalgebra::DMatrix;

use crate::error::{QcapError, Result};
use crate::qmat::{check_dim, checked_dim_product, ComplexMatrix, DensityMatrix, C64};

/// Tolerance on `V†V = I` for externally supplied isometries and unitaries.
pub const ISOMETRY_TOL: f64 = 1e-12;

/// Nonzero entry `(output index, input index, amplitude)` of one Kraus operator.
type Entry = (usize, usize, C64);

#[derive(Clone, Debug)]
struct SparseIsometry {
    /// `by_env[e]` holds `(b, a, V[(b,e),a])`, i.e. the Kraus operator for `e`.
    by_env: Vec<Vec<Entry>>,
    /// `by_out[b]` holds `(e, a, V[(b,e),a])`, the complementary Kraus operator.
    by_out: Vec<Vec<Entry>>,
}

impl SparseIsometry {
    fn from_dense(v: &ComplexMatrix, db: usize, de: usize) -> Self {
        let mut by_env = vec![Vec::new(); de];
        let mut by_out = vec![Vec::new(); db];
        for a in 0..v.cols() {
            for row in 0..v.rows() {
                let amp = v[(row, a)];
                if amp != C64::new(0.0, 0.0) {
                    let (b, e) = (row / de, row % de);
                    by_env[e].push((b, a, amp));
                    by_out[b].push((e, a, amp));
                }
            }
        }
        SparseIsometry { by_env, by_out }
    }

    fn nnz(&self) -> usize {
        self.by_env.iter().map(Vec::len).sum()
    }
}

/// `Σ_k K_k ρ K_k†` for Kraus operators given as entry groups.
fn kraus_apply(groups: &[Vec<Entry>], out_dim: usize, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(out_dim, out_dim);
    for g in groups {
        for &(x, a, v) in g {
            for &(y, a2, w) in g {
                out[(x, y)] += v * rho[(a, a2)] * w.conj();
            }
        }
    }
    out
}

/// `Σ_k K_k† X K_k`.
fn kraus_adjoint(groups: &[Vec<Entry>], in_dim: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(in_dim, in_dim);
    for g in groups {
        for &(p, a, v) in g {
            let vc = v.conj();
            for &(q, a2, w) in g {
                out[(a, a2)] += vc * x[(p, q)] * w;
            }
        }
    }
    out
}

/// True if `label` is exactly `comp(<inner>)` with the outer parentheses matching.
fn strip_complement(label: &str) -> Option<&str> {
    let inner = label.strip_prefix("comp(")?.strip_suffix(')')?;
    let mut depth = 0i64;
    for ch in inner.chars() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    (depth == 0).then_some(inner)
}

#[derive(Clone, Debug)]
pub struct StinespringChannel {
    isometry: ComplexMatrix,
    da: usize,
    db: usize,
    de: usize,
    label: String,
    sparse: SparseIsometry,
}

impl PartialEq for StinespringChannel {
    fn eq(&self, other: &Self) -> bool {
        self.da == other.da
            && self.db == other.db
            && self.de == other.de
            && self.label == other.label
            && self.isometry == other.isometry
    }
}

impl StinespringChannel {
    /// Wraps a user-supplied isometry after checking shape, the dimension cap
    /// and `V†V = I` within [`ISOMETRY_TOL`].
    pub fn from_isometry(
        isometry: ComplexMatrix,
        da: usize,
        db: usize,
        de: usize,
        label: impl Into<String>,
    ) -> Result<Self> {
        for d in [da, db, de] {
            if d == 0 {
                return Err(QcapError::InvalidParameter("dimensions must be positive".into()));
            }
            check_dim(d)?;
        }
        if isometry.rows() != db * de || isometry.cols() != da {
            return Err(QcapError::ShapeMismatch(format!(
                "isometry is {}x{}, expected {}x{da}",
                isometry.rows(),
                isometry.cols(),
                db * de
            )));
        }
        let err = isometry.isometry_error();
        if err > ISOMETRY_TOL {
            return Err(QcapError::NotIsometry(err));
        }
        Ok(Self::trusted(isometry, da, db, de, label.into()))
    }

    fn trusted(isometry: ComplexMatrix, da: usize, db: usize, de: usize, label: String) -> Self {
        let sparse = SparseIsometry::from_dense(&isometry, db, de);
        StinespringChannel { isometry, da, db, de, label, sparse }
    }

    fn from_entries(entries: &[(usize, usize, C64)], da: usize, db: usize, de: usize, label: String) -> Result<Self> {
        for d in [da, db, de] {
            check_dim(d)?;
        }
        let mut v = ComplexMatrix::zeros(db * de, da);
        for &(row, col, amp) in entries {
            v[(row, col)] += amp;
        }
        Ok(Self::trusted(v, da, db, de, label))
    }

    /// Noiseless channel on `d` levels with a trivial environment.
    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(QcapError::InvalidParameter("d must be positive".into()));
        }
        check_dim(d)?;
        Ok(Self::trusted(ComplexMatrix::identity(d), d, d, 1, format!("id:d={d}")))
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.isometry
    }

    pub fn input_dim(&self) -> usize {
        self.da
    }

    pub fn output_dim(&self) -> usize {
        self.db
    }

    pub fn env_dim(&self) -> usize {
        self.de
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of nonzero isometry entries.
    pub fn nnz(&self) -> usize {
        self.sparse.nnz()
    }

    /// Same isometry with the roles of B and E exchanged.
    pub fn complement(&self) -> StinespringChannel {
        let (db, de) = (self.db, self.de);
        let v = ComplexMatrix::from_fn(db * de, self.da, |row, a| {
            let (e, b) = (row / db, row % db);
            self.isometry[(b * de + e, a)]
        });
        let label = match strip_complement(&self.label) {
            Some(inner) => inner.to_string(),
            None => format!("comp({})", self.label),
        };
        StinespringChannel {
            isometry: v,
            da: self.da,
            db: de,
            de: db,
            label,
            sparse: SparseIsometry {
                by_env: self.sparse.by_out.clone(),
                by_out: self.sparse.by_env.clone(),
            },
        }
    }

    /// `self ⊗ other`, with outputs ordered `(B1 B2)` and environments `(E1 E2)`.
    pub fn tensor(&self, other: &StinespringChannel) -> Result<StinespringChannel> {
        let da = checked_dim_product(&[self.da, other.da])?;
        let db = checked_dim_product(&[self.db, other.db])?;
        let de = checked_dim_product(&[self.de, other.de])?;
        let mut entries = Vec::with_capacity(self.nnz() * other.nnz());
        for (e1, g1) in self.sparse.by_env.iter().enumerate() {
            for &(b1, a1, v1) in g1 {
                for (e2, g2) in other.sparse.by_env.iter().enumerate() {
                    for &(b2, a2, v2) in g2 {
                        let b = b1 * other.db + b2;
                        let e = e1 * other.de + e2;
                        entries.push((b * de + e, a1 * other.da + a2, v1 * v2));
                    }
                }
            }
        }
        Self::from_entries(&entries, da, db, de, format!("tensor({}, {})", self.label, other.label))
    }

    /// Block-diagonal direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &StinespringChannel) -> Result<StinespringChannel> {
        let da = self.da + other.da;
        let db = self.db + other.db;
        let de = self.de + other.de;
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for (e, g) in self.sparse.by_env.iter().enumerate() {
            for &(b, a, v) in g {
                entries.push((b * de + e, a, v));
            }
        }
        for (e, g) in other.sparse.by_env.iter().enumerate() {
            for &(b, a, v) in g {
                entries.push(((self.db + b) * de + self.de + e, self.da + a, v));
            }
        }
        Self::from_entries(&entries, da, db, de, format!("dsum({}, {})", self.label, other.label))
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.da {
            return Err(QcapError::ShapeMismatch(format!(
                "input of dimension {dim} for a channel with input dimension {}",
                self.da
            )));
        }
        Ok(())
    }

    /// `Tr_E(V X V†)` for an arbitrary square operator `X`.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !x.is_square() {
            return Err(QcapError::ShapeMismatch("operator must be square".into()));
        }
        self.check_input(x.rows())?;
        Ok(ComplexMatrix::from_dmatrix(self.apply_raw(x.as_dmatrix())))
    }

    /// `Tr_B(V X V†)` for an arbitrary square operator `X`.
    pub fn apply_complement_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !x.is_square() {
            return Err(QcapError::ShapeMismatch("operator must be square".into()));
        }
        self.check_input(x.rows())?;
        Ok(ComplexMatrix::from_dmatrix(self.apply_complement_raw(x.as_dmatrix())))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_input(rho.dim())?;
        Ok(DensityMatrix::new_unchecked(ComplexMatrix::from_dmatrix(
            self.apply_raw(rho.matrix().as_dmatrix()),
        )))
    }

    pub fn apply_complement(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_input(rho.dim())?;
        Ok(DensityMatrix::new_unchecked(ComplexMatrix::from_dmatrix(
            self.apply_complement_raw(rho.matrix().as_dmatrix()),
        )))
    }

    /// Heisenberg-picture map `V†(X ⊗ I_E)V`.
    pub fn adjoint_apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.db || x.cols() != self.db {
            return Err(QcapError::ShapeMismatch("operator must act on the output".into()));
        }
        Ok(ComplexMatrix::from_dmatrix(self.adjoint_raw(x.as_dmatrix())))
    }

    pub(crate) fn apply_raw(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        kraus_apply(&self.sparse.by_env, self.db, rho)
    }

    pub(crate) fn apply_complement_raw(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        kraus_apply(&self.sparse.by_out, self.de, rho)
    }

    pub(crate) fn adjoint_raw(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        kraus_adjoint(&self.sparse.by_env, self.da, x)
    }

    pub(crate) fn adjoint_complement_raw(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        kraus_adjoint(&self.sparse.by_out, self.da, x)
    }

    /// Normalized Choi state `(id ⊗ N)(|Φ><Φ|)` on `A ⊗ B`.
    pub fn choi(&self) -> Result<ComplexMatrix> {
        let n = checked_dim_product(&[self.da, self.db])?;
        let scale = 1.0 / self.da as f64;
        let mut out = ComplexMatrix::zeros(n, n);
        for g in &self.sparse.by_env {
            for &(b, a, v) in g {
                for &(b2, a2, w) in g {
                    out[(a * self.db + b, a2 * self.db + b2)] += v * w.conj() * scale;
                }
            }
        }
        Ok(out)
    }
}

/// Erasure channel `E_{p,d}`: `V|ψ> = √(1-p)|ψ>_B|e>_E + √p|e>_B|ψ>_E`,
/// with the flag `|e>` as the extra basis vector of index `d`.
pub fn erasure(p: f64, d: usize) -> Result<StinespringChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QcapError::InvalidParameter(format!("erasure probability {p} outside [0, 1]")));
    }
    if d < 2 {
        return Err(QcapError::InvalidParameter(format!("erasure dimension {d} < 2")));
    }
    let n = d + 1;
    check_dim(n)?;
    let keep = C64::new((1.0 - p).sqrt(), 0.0);
    let lose = C64::new(p.sqrt(), 0.0);
    let mut entries = Vec::with_capacity(2 * d);
    for a in 0..d {
        entries.push((a * n + d, a, keep));
        entries.push((d * n + a, a, lose));
    }
    entries.retain(|e| e.2 != C64::new(0.0, 0.0));
    StinespringChannel::from_entries(&entries, d, n, n, format!("erasure:p={p},d={d}"))
}

/// Platypus channel `M_d`: `V|0> = Σ_{j<d-1} |j>|j>/√(d-1)`, `V|i> = |d-1>|i-1>`.
pub fn platypus(d: usize) -> Result<StinespringChannel> {
    if d < 2 {
        return Err(QcapError::InvalidParameter(format!("platypus dimension {d} < 2")));
    }
    check_dim(d)?;
    let de = d - 1;
    let amp = C64::new(1.0 / (de as f64).sqrt(), 0.0);
    let mut entries = Vec::with_capacity(2 * de);
    for j in 0..de {
        entries.push((j * de + j, 0, amp));
    }
    for i in 1..d {
        entries.push(((d - 1) * de + (i - 1), i, C64::new(1.0, 0.0)));
    }
    StinespringChannel::from_entries(&entries, d, d, de, format!("platypus:d={d}"))
}

/// One rocket instance for known local unitaries: `|ij> ↦ P (u ⊗ v)|ij>`
/// with `P = Σ ω^{ij} |i><i| ⊗ |j><j|`, the first register routed to B and
/// the second to E.
pub fn rocket_instance(d: usize, u: &ComplexMatrix, v: &ComplexMatrix) -> Result<StinespringChannel> {
    if d < 2 {
        return Err(QcapError::InvalidParameter(format!("rocket dimension {d} < 2")));
    }
    checked_dim_product(&[d, d])?;
    for m in [u, v] {
        if m.rows() != d || m.cols() != d {
            return Err(QcapError::ShapeMismatch(format!("rocket unitaries must be {d}x{d}")));
        }
        let err = m.isometry_error();
        if err > ISOMETRY_TOL {
            return Err(QcapError::NotUnitary(err));
        }
    }
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let w = ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (i, j) = (row / d, row % d);
        let (k, l) = (col / d, col % d);
        C64::from_polar(1.0, omega * ((i * j) % d) as f64) * u[(i, k)] * v[(j, l)]
    });
    Ok(StinespringChannel::trusted(w, d * d, d, d, format!("rocket:d={d}")))
}

/// Uniform mixture of rocket instances, one branch per `(u, v)` pair.
pub fn rocket_flagged(d: usize, pairs: &[(ComplexMatrix, ComplexMatrix)]) -> Result<FlaggedChannel> {
    if pairs.is_empty() {
        return Err(QcapError::InvalidParameter("rocket needs at least one unitary pair".into()));
    }
    let branches = pairs
        .iter()
        .map(|(u, v)| rocket_instance(d, u, v))
        .collect::<Result<Vec<_>>>()?;
    FlaggedChannel::uniform(branches)
}

/// Probability-weighted family of isometries sharing `dA`, `dB`, `dE`, whose
/// branch label is copied to both outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct FlaggedChannel {
    branches: Vec<(f64, StinespringChannel)>,
}

impl FlaggedChannel {
    pub fn new(branches: Vec<(f64, StinespringChannel)>) -> Result<Self> {
        let first = branches
            .first()
            .ok_or_else(|| QcapError::InvalidParameter("flagged channel needs a branch".into()))?;
        let dims = (first.1.da, first.1.db, first.1.de);
        let mut total = 0.0;
        for (p, ch) in &branches {
            if p.is_nan() || *p <= 0.0 {
                return Err(QcapError::InvalidParameter(format!("branch probability {p} must be positive")));
            }
            if (ch.da, ch.db, ch.de) != dims {
                return Err(QcapError::ShapeMismatch("branches must share dA, dB, dE".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(QcapError::InvalidParameter(format!("branch probabilities sum to {total}")));
        }
        Ok(FlaggedChannel { branches })
    }

    pub fn uniform(channels: Vec<StinespringChannel>) -> Result<Self> {
        let w = 1.0 / channels.len().max(1) as f64;
        Self::new(channels.into_iter().map(|c| (w, c)).collect())
    }

    pub fn single(ch: StinespringChannel) -> Self {
        FlaggedChannel { branches: vec![(1.0, ch)] }
    }

    pub fn branches(&self) -> &[(f64, StinespringChannel)] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.branches[0].1.da
    }

    pub fn output_dim(&self) -> usize {
        self.branches[0].1.db
    }

    pub fn env_dim(&self) -> usize {
        self.branches[0].1.de
    }

    pub fn complement(&self) -> FlaggedChannel {
        FlaggedChannel {
            branches: self.branches.iter().map(|(p, c)| (*p, c.complement())).collect(),
        }
    }

    fn combine(
        &self,
        other: &FlaggedChannel,
        op: impl Fn(&StinespringChannel, &StinespringChannel) -> Result<StinespringChannel>,
    ) -> Result<FlaggedChannel> {
        checked_dim_product(&[self.len(), other.len()])?;
        let mut branches = Vec::with_capacity(self.len() * other.len());
        for (p, a) in &self.branches {
            for (q, b) in &other.branches {
                branches.push((p * q, op(a, b)?));
            }
        }
        Ok(FlaggedChannel { branches })
    }

    /// Branchwise tensor product; the joint flag is the pair of flags.
    pub fn tensor(&self, other: &FlaggedChannel) -> Result<FlaggedChannel> {
        self.combine(other, StinespringChannel::tensor)
    }

    pub fn direct_sum(&self, other: &FlaggedChannel) -> Result<FlaggedChannel> {
        self.combine(other, StinespringChannel::direct_sum)
    }

    /// Per-branch outputs on B.
    pub fn apply_branches(&self, rho: &DensityMatrix) -> Result<Vec<(f64, DensityMatrix)>> {
        self.branches.iter().map(|(p, c)| Ok((*p, c.apply(rho)?))).collect()
    }

    /// Per-branch outputs on E.
    pub fn apply_complement_branches(&self, rho: &DensityMatrix) -> Result<Vec<(f64, DensityMatrix)>> {
        self.branches.iter().map(|(p, c)| Ok((*p, c.apply_complement(rho)?))).collect()
    }

    /// Output on `F ⊗ B` with an explicit flag register `F` (flag-major):
    /// the block-diagonal state `Σ_i p_i |i><i| ⊗ N_i(ρ)`.
    pub fn apply_with_register(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Self::block_diagonal(&self.apply_branches(rho)?)
    }

    /// Output on `F ⊗ E`, the flag copied to the environment.
    pub fn apply_complement_with_register(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Self::block_diagonal(&self.apply_complement_branches(rho)?)
    }

    fn block_diagonal(blocks: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
        let m = blocks[0].1.dim();
        let n = checked_dim_product(&[blocks.len(), m])?;
        let mut out = ComplexMatrix::zeros(n, n);
        for (f, (p, block)) in blocks.iter().enumerate() {
            for i in 0..m {
                for j in 0..m {
                    out[(f * m + i, f * m + j)] = block.matrix()[(i, j)] * *p;
                }
            }
        }
        Ok(DensityMatrix::new_unchecked(out))
    }
}

impl From<StinespringChannel> for FlaggedChannel {
    fn from(ch: StinespringChannel) -> Self {
        FlaggedChannel::single(ch)
    }
}

/// Borrowed view of any channel as a flagged family (a plain isometry is a
/// single branch).
pub trait AsFlagged {
    fn as_flagged(&self) -> Cow<'_, FlaggedChannel>;
}

impl AsFlagged for FlaggedChannel {
    fn as_flagged(&self) -> Cow<'_, FlaggedChannel> {
        Cow::Borrowed(self)
    }
}

impl AsFlagged for StinespringChannel {
    fn as_flagged(&self) -> Cow<'_, FlaggedChannel> {
        Cow::Owned(FlaggedChannel::single(self.clone()))
    }
}

impl AsFlagged for Channel {
    fn as_flagged(&self) -> Cow<'_, FlaggedChannel> {
        match self {
            Channel::Plain(c) => Cow::Owned(FlaggedChannel::single(c.clone())),
            Channel::Flagged(f) => Cow::Borrowed(f),
        }
    }
}

/// Result of building a channel expression: a plain isometry, or a flagged
/// family when a rocket leaf is involved.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Plain(StinespringChannel),
    Flagged(FlaggedChannel),
}

impl Channel {
    pub fn to_flagged(&self) -> FlaggedChannel {
        match self {
            Channel::Plain(c) => FlaggedChannel::single(c.clone()),
            Channel::Flagged(f) => f.clone(),
        }
    }

    pub fn into_flagged(self) -> FlaggedChannel {
        match self {
            Channel::Plain(c) => FlaggedChannel::single(c),
            Channel::Flagged(f) => f,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Channel::Plain(c) => c.input_dim(),
            Channel::Flagged(f) => f.input_dim(),
        }
    }

    pub fn complement(&self) -> Channel {
        match self {
            Channel::Plain(c) => Channel::Plain(c.complement()),
            Channel::Flagged(f) => Channel::Flagged(f.complement()),
        }
    }

    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        match (self, other) {
            (Channel::Plain(a), Channel::Plain(b)) => Ok(Channel::Plain(a.tensor(b)?)),
            _ => Ok(Channel::Flagged(self.to_flagged().tensor(&other.to_flagged())?)),
        }
    }

    pub fn direct_sum(&self, other: &Channel) -> Result<Channel> {
        match (self, other) {
            (Channel::Plain(a), Channel::Plain(b)) => Ok(Channel::Plain(a.direct_sum(b)?)),
            _ => Ok(Channel::Flagged(self.to_flagged().direct_sum(&other.to_flagged())?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::random::{ginibre, haar_unitary, random_density_matrix};
    use crate::qmat::{ket, kron, partial_trace, permute_subsystems};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn proj(d: usize, i: usize) -> DensityMatrix {
        DensityMatrix::pure(&ket(d, i)).unwrap()
    }

    /// Random channel with the given dimensions from a Haar unitary's first columns.
    fn random_channel(da: usize, db: usize, de: usize, rng: &mut ChaCha8Rng) -> StinespringChannel {
        let u = haar_unitary(db * de, rng);
        let v = ComplexMatrix::from_fn(db * de, da, |i, j| u[(i, j)]);
        StinespringChannel::from_isometry(v, da, db, de, "random").unwrap()
    }

    /// Dense reference: Tr_E(V ρ V†) via the generic partial trace.
    fn dense_apply(ch: &StinespringChannel, rho: &ComplexMatrix) -> ComplexMatrix {
        let v = ch.isometry();
        let full = &(v * rho) * &v.adjoint();
        partial_trace(&full, &[ch.output_dim(), ch.env_dim()], &[0]).unwrap()
    }

    #[test]
    fn erasure_on_maximally_mixed() {
        let ch = erasure(0.25, 2).unwrap();
        let out = ch.apply(&DensityMatrix::maximally_mixed(2)).unwrap();
        let expected = ComplexMatrix::from_diagonal(&[0.375, 0.375, 0.25]);
        assert!(out.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn erasure_without_loss_is_identity_on_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(2, &mut rng);
        let out = erasure(0.0, 2).unwrap().apply(&rho).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i < 2 && j < 2 { rho.matrix()[(i, j)] } else { C64::new(0.0, 0.0) };
                assert!((out.matrix()[(i, j)] - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn erasure_complement_is_erasure_with_flipped_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density_matrix(2, &mut rng);
        let comp = erasure(0.25, 2).unwrap().apply_complement(&rho).unwrap();
        let flipped = erasure(0.75, 2).unwrap().apply(&rho).unwrap();
        assert!(comp.matrix().max_abs_diff(flipped.matrix()) < 1e-12);
    }

    #[test]
    fn erasure_rejects_bad_probability() {
        assert!(erasure(1.5, 2).is_err());
        assert!(erasure(-0.1, 2).is_err());
        assert!(erasure(0.5, 1).is_err());
    }

    #[test]
    fn platypus_examples() {
        let ch = platypus(3).unwrap();
        assert!(ch.isometry().isometry_error() < 1e-15);
        let out = ch.apply(&proj(3, 1)).unwrap();
        assert!(out.matrix().max_abs_diff(proj(3, 2).matrix()) < 1e-15);
        let env = ch.apply_complement(&proj(3, 0)).unwrap();
        assert!(env.matrix().max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        assert!(platypus(1).is_err());
    }

    #[test]
    fn rocket_with_identity_unitaries() {
        let id = ComplexMatrix::identity(2);
        let ch = rocket_instance(2, &id, &id).unwrap();
        assert_eq!((ch.input_dim(), ch.output_dim(), ch.env_dim()), (4, 2, 2));
        let out = ch.apply(&proj(4, 0)).unwrap();
        assert!(out.matrix().max_abs_diff(proj(2, 0).matrix()) < 1e-15);
        let out = ch.apply(&proj(4, 3)).unwrap();
        assert!(out.matrix().max_abs_diff(proj(2, 1).matrix()) < 1e-15);
    }

    #[test]
    fn rocket_complement_matches_role_swapped_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 2;
        let u = haar_unitary(d, &mut rng);
        let v = haar_unitary(d, &mut rng);
        let comp = rocket_instance(d, &u, &v).unwrap().complement();
        // oracle: the same coupling with the second register delivered
        let omega = 2.0 * std::f64::consts::PI / d as f64;
        let mut choi = ComplexMatrix::zeros(d * d * d, d * d * d);
        for a in 0..d * d {
            for a2 in 0..d * d {
                let col = |x: usize| -> Vec<C64> {
                    (0..d * d)
                        .map(|row| {
                            let (i, j) = (row / d, row % d);
                            C64::from_polar(1.0, omega * ((i * j) % d) as f64) * u[(i, x / d)] * v[(j, x % d)]
                        })
                        .collect()
                };
                let (c1, c2) = (col(a), col(a2));
                for j in 0..d {
                    for j2 in 0..d {
                        let mut acc = C64::new(0.0, 0.0);
                        for i in 0..d {
                            acc += c1[i * d + j] * c2[i * d + j2].conj();
                        }
                        choi[(a * d + j, a2 * d + j2)] = acc / (d * d) as f64;
                    }
                }
            }
        }
        assert!(comp.choi().unwrap().max_abs_diff(&choi) < 1e-12);
    }

    #[test]
    fn rocket_rejects_non_unitary() {
        let id = ComplexMatrix::identity(2);
        let bad = id.scale_real(2.0);
        assert!(matches!(rocket_instance(2, &bad, &id), Err(QcapError::NotUnitary(_))));
    }

    #[test]
    fn flagged_rocket_weights() {
        let id = ComplexMatrix::identity(2);
        let one = rocket_flagged(2, &[(id.clone(), id.clone())]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.branches()[0].0, 1.0);
        let two = rocket_flagged(2, &[(id.clone(), id.clone()), (id.clone(), id.clone())]).unwrap();
        assert!(two.branches().iter().all(|(p, _)| *p == 0.5));
        assert!(rocket_flagged(2, &[]).is_err());
    }

    #[test]
    fn complement_is_an_involution() {
        let ch = erasure(0.3, 3).unwrap().tensor(&platypus(3).unwrap()).unwrap();
        assert_eq!(ch.complement().complement(), ch);
        assert_eq!(platypus(3).unwrap().complement().output_dim(), 2);
    }

    #[test]
    fn tensor_on_product_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_density_matrix(2, &mut rng);
        let sigma = random_density_matrix(2, &mut rng);
        let ch = erasure(0.0, 2).unwrap().tensor(&erasure(1.0, 2).unwrap()).unwrap();
        let out = ch.apply(&rho.kron(&sigma).unwrap()).unwrap();
        let flag = proj(3, 2);
        let rho_ext = ComplexMatrix::from_fn(3, 3, |i, j| if i < 2 && j < 2 { rho.matrix()[(i, j)] } else { C64::new(0.0, 0.0) });
        let expected = kron(&rho_ext, flag.matrix()).unwrap();
        assert!(out.matrix().max_abs_diff(&expected) < 1e-14);
        let dims = platypus(3).unwrap().tensor(&erasure(0.5, 2).unwrap()).unwrap();
        assert_eq!(dims.input_dim(), 6);
    }

    #[test]
    fn tensor_choi_is_permuted_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c1 = random_channel(2, 2, 3, &mut rng);
        let c2 = random_channel(3, 2, 2, &mut rng);
        let joint = c1.tensor(&c2).unwrap().choi().unwrap();
        let k = kron(&c1.choi().unwrap(), &c2.choi().unwrap()).unwrap();
        // (A1 B1 A2 B2) -> (A1 A2 B1 B2)
        let expected = permute_subsystems(&k, &[2, 2, 3, 2], &[0, 2, 1, 3]).unwrap();
        assert!(joint.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn direct_sum_block_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n1 = erasure(0.25, 2).unwrap();
        let n2 = platypus(3).unwrap();
        let sum = n1.direct_sum(&n2).unwrap();
        assert_eq!((sum.input_dim(), sum.output_dim(), sum.env_dim()), (5, 6, 5));
        let rho = random_density_matrix(2, &mut rng);
        let embedded = ComplexMatrix::from_fn(5, 5, |i, j| if i < 2 && j < 2 { rho.matrix()[(i, j)] } else { C64::new(0.0, 0.0) });
        let out = sum.apply_operator(&embedded).unwrap();
        let inner = n1.apply(&rho).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i < 3 && j < 3 { inner.matrix()[(i, j)] } else { C64::new(0.0, 0.0) };
                assert!((out[(i, j)] - expected).norm() < 1e-15);
            }
        }
        // purely off-diagonal input gives vanishing off-diagonal output blocks
        let g = ginibre(5, 5, &mut rng);
        let off = ComplexMatrix::from_fn(5, 5, |i, j| if (i < 2) != (j < 2) { g[(i, j)] } else { C64::new(0.0, 0.0) });
        let out = sum.apply_operator(&off).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if (i < 3) != (j < 3) {
                    assert!(out[(i, j)].norm() < 1e-15);
                }
            }
        }
        let sigma = random_density_matrix(3, &mut rng);
        let mixed = ComplexMatrix::from_fn(5, 5, |i, j| match (i < 2, j < 2) {
            (true, true) => rho.matrix()[(i, j)] * 0.5,
            (false, false) => sigma.matrix()[(i - 2, j - 2)] * 0.5,
            _ => C64::new(0.0, 0.0),
        });
        let out = sum.apply(&DensityMatrix::new(mixed).unwrap()).unwrap();
        assert!((out.matrix().trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sparse_evaluation_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ch = random_channel(3, 2, 4, &mut rng).tensor(&platypus(3).unwrap()).unwrap();
        let rho = random_density_matrix(9, &mut rng);
        let out = ch.apply(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(&dense_apply(&ch, rho.matrix())) < 1e-13);
        let env = ch.apply_complement(&rho).unwrap();
        assert!(env.matrix().max_abs_diff(&dense_apply(&ch.complement(), rho.matrix())) < 1e-13);
    }

    #[test]
    fn adjoint_is_hilbert_schmidt_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ch = random_channel(3, 4, 2, &mut rng);
        let x = ginibre(3, 3, &mut rng);
        let y = ginibre(4, 4, &mut rng);
        let lhs = (&y.adjoint() * &ch.apply_operator(&x).unwrap()).trace();
        let rhs = (&ch.adjoint_apply(&y).unwrap().adjoint() * &x).trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn identity_channel_choi_and_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ch = StinespringChannel::identity(3).unwrap();
        let rho = random_density_matrix(3, &mut rng);
        assert!(ch.apply(&rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let phi = DensityMatrix::pure(&crate::qmat::max_entangled(3)).unwrap();
        assert!(ch.choi().unwrap().max_abs_diff(phi.matrix()) < 1e-15);
    }

    #[test]
    fn erasure_choi_matches_formula() {
        // Choi = (1/d)[(1-p) Σ|aa><a'a'| + p Σ_a |a><a| ⊗ |e><e|] on A ⊗ B
        let (p, d) = (0.5, 2);
        let choi = erasure(p, d).unwrap().choi().unwrap();
        assert_eq!(choi.rows(), 6);
        let mut expected = ComplexMatrix::zeros(6, 6);
        for a in 0..d {
            for a2 in 0..d {
                expected[(a * 3 + a, a2 * 3 + a2)] += C64::new((1.0 - p) / d as f64, 0.0);
            }
            expected[(a * 3 + 2, a * 3 + 2)] += C64::new(p / d as f64, 0.0);
        }
        assert!(choi.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn flagged_register_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let f = FlaggedChannel::new(vec![
            (0.25, random_channel(2, 2, 2, &mut rng)),
            (0.75, random_channel(2, 2, 2, &mut rng)),
        ])
        .unwrap();
        let rho = random_density_matrix(2, &mut rng);
        let out = f.apply_with_register(&rho).unwrap();
        assert_eq!(out.dim(), 4);
        assert!((out.matrix().trace().re - 1.0).abs() < 1e-14);
        assert!(out.matrix()[(0, 2)].norm() == 0.0);
        assert!(FlaggedChannel::new(vec![(0.5, random_channel(2, 2, 2, &mut rng))]).is_err());
    }

    #[test]
    fn tensor_respects_dimension_cap() {
        let big = erasure(0.5, 70).unwrap();
        assert!(matches!(big.tensor(&big), Err(QcapError::DimensionTooLarge { .. })));
    }
}

//! Closed-form capacity bounds for `N = R_d^{⊗n} ⊕ E_{p,d}` with
//! `log₂ d = n^α`, evaluated in bits.
//!
//! The dimension `d = 2^{n^α}` itself is never formed. `n^α` is computed in
//! 128-bit integer arithmetic when it fits (and converted to `f64` once),
//! otherwise with `powi`, whose relative error stays below 1e-12 for every
//! exponent in range.
//!
//! Non-strict inequalities in the parameter predicates are tested with a
//! relative slack of [`BOUNDARY_EPS`] so that boundary points written as
//! decimals (`p = 0.4999`) are accepted.

use serde::{Deserialize, Serialize};

use crate::error::{QcapError, Result};
use crate::numfmt::format_number;
use crate::par::{map_slice, Execution};

/// Relative slack for non-strict comparisons at parameter boundaries.
pub const BOUNDARY_EPS: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + BOUNDARY_EPS * a.abs().max(b.abs()).max(1.0)
}

/// `n^e` for a possibly negative exponent.
fn pow_signed(n: u64, e: i64) -> f64 {
    if e >= 0 {
        match u32::try_from(e).ok().and_then(|e| (n as u128).checked_pow(e)) {
            Some(v) => v as f64,
            None => (n as f64).powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32),
        }
    } else {
        1.0 / pow_signed(n, -e)
    }
}

/// Parameters `(n, p, α)` with the derived `log₂ d = n^α` and the validity
/// predicates of the three theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: u64,
    pub p: f64,
    pub alpha: u32,
    /// `n^α`, the number of qubits in one rocket input.
    pub log2_d: f64,
    /// `p = 1/2 ∧ n^{α−2} > 8`.
    pub thm1_ok: bool,
    /// `1/3 < p ≤ 1/2 − 1/n^{α−1} ∧ n^{α−2} > 12`.
    pub thm2_ok: bool,
    /// `4/n^{α−1} ≤ p ≤ 1/2 − 1/n^{α−1}`.
    pub lemma_b_ok: bool,
}

impl BoundParams {
    pub fn new(n: u64, p: f64, alpha: u32) -> Result<Self> {
        if n == 0 {
            return Err(QcapError::InvalidParameter("n must be positive".into()));
        }
        if alpha == 0 {
            return Err(QcapError::InvalidParameter("alpha must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(QcapError::InvalidParameter(format!("p = {p} is not a probability")));
        }
        let a = alpha as i64;
        let n_am1 = pow_signed(n, a - 1);
        let n_am2 = pow_signed(n, a - 2);
        let upper = 0.5 - 1.0 / n_am1;
        Ok(BoundParams {
            n,
            p,
            alpha,
            log2_d: pow_signed(n, a),
            thm1_ok: p == 0.5 && n_am2 > 8.0,
            thm2_ok: p > 1.0 / 3.0 && le(p, upper) && n_am2 > 12.0,
            lemma_b_ok: le(4.0 / n_am1, p) && le(p, upper),
        })
    }

    /// `n^{α−1}`.
    pub fn n_alpha_minus_1(&self) -> f64 {
        pow_signed(self.n, self.alpha as i64 - 1)
    }

    /// `n^{α−2}`.
    pub fn n_alpha_minus_2(&self) -> f64 {
        pow_signed(self.n, self.alpha as i64 - 2)
    }

    fn describe(&self) -> String {
        format!("n={}, p={}, alpha={}", self.n, self.p, self.alpha)
    }

    pub fn require_thm1(&self) -> Result<()> {
        if self.thm1_ok {
            Ok(())
        } else {
            Err(QcapError::Validity(format!(
                "thm1_ok requires p = 1/2 and n^(alpha-2) > 8; got {} with n^(alpha-2) = {}",
                self.describe(),
                self.n_alpha_minus_2()
            )))
        }
    }

    pub fn require_thm2(&self) -> Result<()> {
        if self.thm2_ok {
            Ok(())
        } else {
            Err(QcapError::Validity(format!(
                "thm2_ok requires 1/3 < p <= 1/2 - 1/n^(alpha-1) = {} and n^(alpha-2) = {} > 12; got {}",
                0.5 - 1.0 / self.n_alpha_minus_1(),
                self.n_alpha_minus_2(),
                self.describe()
            )))
        }
    }

    pub fn require_lemma_b(&self) -> Result<()> {
        if self.lemma_b_ok {
            Ok(())
        } else {
            Err(QcapError::Validity(format!(
                "lemmaB_ok requires 4/n^(alpha-1) = {} <= p <= 1/2 - 1/n^(alpha-1) = {}; got {}",
                4.0 / self.n_alpha_minus_1(),
                0.5 - 1.0 / self.n_alpha_minus_1(),
                self.describe()
            )))
        }
    }

    fn require_k(&self, k: u64, lo: u64) -> Result<()> {
        if k < lo || k > self.n {
            Err(QcapError::Validity(format!("k = {k} outside {lo} <= k <= n = {}", self.n)))
        } else {
            Ok(())
        }
    }

    fn frac(k: u64) -> f64 {
        (k as f64 - 1.0) / k as f64
    }

    /// `U(k) = 2n/k + ((k−1)/k)(1−p) n^α`.
    pub fn u(&self, k: u64) -> f64 {
        2.0 * self.n as f64 / k as f64 + Self::frac(k) * (1.0 - self.p) * self.log2_d
    }

    /// `L(j) = ((j−1)/j)(1−p) n^α`, the lower bound on `Q^{(j)}(N)`.
    pub fn l(&self, j: u64) -> f64 {
        Self::frac(j) * (1.0 - self.p) * self.log2_d
    }

    /// `U^c(k) = 2n/k + ((k−1)/k) p n^α`.
    pub fn uc(&self, k: u64) -> f64 {
        2.0 * self.n as f64 / k as f64 + Self::frac(k) * self.p * self.log2_d
    }

    /// `L^c(j) = ((j−1)/j) p n^α`.
    pub fn lc(&self, j: u64) -> f64 {
        Self::frac(j) * self.p * self.log2_d
    }

    /// `U′(k) = (1−2p) n^α + 2n/k + ((k−1)/k) p n^α`.
    pub fn u_prime(&self, k: u64) -> f64 {
        (1.0 - 2.0 * self.p) * self.log2_d + self.uc(k)
    }

    /// `U″(k) = 4n/k + ((k−1)/k) n^α`.
    pub fn u_double_prime(&self, k: u64) -> f64 {
        4.0 * self.n as f64 / k as f64 + Self::frac(k) * self.log2_d
    }

    /// `(n^α(1−p) − 2n(k+1)) / (k(k+1))`, unchecked.
    pub fn f_raw(&self, k: u64) -> f64 {
        let kf = k as f64;
        (self.log2_d * (1.0 - self.p) - 2.0 * self.n as f64 * (kf + 1.0)) / (kf * (kf + 1.0))
    }

    /// `(n^α p − 2n(k+1)) / (k(k+1))`, unchecked.
    pub fn fc_raw(&self, k: u64) -> f64 {
        let kf = k as f64;
        (self.log2_d * self.p - 2.0 * self.n as f64 * (kf + 1.0)) / (kf * (kf + 1.0))
    }
}

/// Named bound values at one `k`, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub k: u64,
    pub u: f64,
    pub l: f64,
    pub uc: f64,
    pub lc: f64,
    pub u_prime: f64,
    pub u_double_prime: f64,
    /// Defined for `2 ≤ k ≤ n` when `thm2_ok`.
    pub f: Option<f64>,
    /// Defined for `1 ≤ k ≤ n` when `thm2_ok`.
    pub fc: Option<f64>,
    /// Upper bound on `P^{(k)}(N)`: `(1−2p) n^α` if `k ≤ k₀`, else `U(k)`.
    pub private_upper: f64,
    /// Upper bound on `P^{(k)}(N^c)`: `U^c(k)`.
    pub private_upper_complement: f64,
    /// Lower bound on `Q^{(k+1)}(N)`: `L(k+1)`, for `k ≤ n`.
    pub quantum_lower_next: Option<f64>,
    /// Lower bound on `Q^{(k+1)}(N^c)`: `L^c(k+1)`, for `k ≤ n`.
    pub quantum_lower_next_complement: Option<f64>,
}

/// `k₀ = (1 − p − 2/n^{α−1}) / p`.
pub fn k0(params: &BoundParams) -> Result<f64> {
    if params.p == 0.0 {
        return Err(QcapError::InvalidParameter("k0 is undefined at p = 0".into()));
    }
    Ok((1.0 - params.p - 2.0 / params.n_alpha_minus_1()) / params.p)
}

/// All bounds of the upper/lower bound lemma at `k`.
pub fn lemma_b1(params: &BoundParams, k: u64) -> Result<BoundTable> {
    params.require_lemma_b()?;
    if k == 0 {
        return Err(QcapError::Validity("k must be at least 1".into()));
    }
    let k0v = k0(params)?;
    let in_range = k <= params.n;
    let thm2 = params.thm2_ok && in_range;
    Ok(BoundTable {
        k,
        u: params.u(k),
        l: params.l(k),
        uc: params.uc(k),
        lc: params.lc(k),
        u_prime: params.u_prime(k),
        u_double_prime: params.u_double_prime(k),
        f: (thm2 && k >= 2).then(|| params.f_raw(k)),
        fc: thm2.then(|| params.fc_raw(k)),
        private_upper: if le(k as f64, k0v) { (1.0 - 2.0 * params.p) * params.log2_d } else { params.u(k) },
        private_upper_complement: params.uc(k),
        quantum_lower_next: in_range.then(|| params.l(k + 1)),
        quantum_lower_next_complement: in_range.then(|| params.lc(k + 1)),
    })
}

/// `(n^α − 4n(k+1)) / (2k(k+1))` at `p = 1/2`.
pub fn theorem1_gap(n: u64, alpha: u32, k: u64) -> Result<f64> {
    let params = BoundParams::new(n, 0.5, alpha)?;
    params.require_thm1()?;
    params.require_k(k, 1)?;
    let kf = k as f64;
    Ok((params.log2_d - 4.0 * n as f64 * (kf + 1.0)) / (2.0 * kf * (kf + 1.0)))
}

/// The gaps `f(k)` (defined for `k ≥ 2`) and `f^c(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Gaps {
    pub f: Option<f64>,
    pub fc: f64,
}

pub fn theorem2_gaps(params: &BoundParams, k: u64) -> Result<Theorem2Gaps> {
    params.require_thm2()?;
    params.require_k(k, 1)?;
    Ok(Theorem2Gaps { f: (k >= 2).then(|| params.f_raw(k)), fc: params.fc_raw(k) })
}

/// Right-hand side `(2 + n^α p) / ((1−p)(n+1) n^{α−1})`.
pub fn eq24_rhs(params: &BoundParams) -> f64 {
    (2.0 + params.log2_d * params.p) / ((1.0 - params.p) * (params.n as f64 + 1.0) * params.n_alpha_minus_1())
}

/// Smallest `k ≤ n` with `(k−1)/k ≥ eq24_rhs`, or `None`.
pub fn eq24_min_k(params: &BoundParams) -> Result<Option<u64>> {
    params.require_thm2()?;
    Ok(eq24_search(params))
}

fn eq24_search(params: &BoundParams) -> Option<u64> {
    let rhs = eq24_rhs(params);
    (1..=params.n).find(|&k| le(rhs, BoundParams::frac(k)))
}

/// `c(k) = (1−p) k / (p − 2/n^{α−1})`.
pub fn theorem3_c(params: &BoundParams, k: u64) -> Result<f64> {
    params.require_lemma_b()?;
    let denom = params.p - 2.0 / params.n_alpha_minus_1();
    if denom <= 0.0 {
        return Err(QcapError::Validity(format!("c(k) requires p > 2/n^(alpha-1); got p = {}", params.p)));
    }
    Ok((1.0 - params.p) * k as f64 / denom)
}

/// Largest `k ≤ k₀` with `c(k) < j_max` (default `j_max = n + 1`).
pub fn theorem3_max_k(params: &BoundParams, j_max: Option<u64>) -> Result<Option<u64>> {
    params.require_lemma_b()?;
    let j_max = j_max.unwrap_or(params.n + 1) as f64;
    let k0v = k0(params)?;
    let mut best = None;
    let mut k = 1u64;
    while le(k as f64, k0v) {
        if theorem3_c(params, k)? < j_max {
            best = Some(k);
        }
        k += 1;
    }
    Ok(best)
}

/// The extra clause of the two-sided theorem at `k = 1`: the lower bound
/// `L(2)` on `Q^{(2)}(N)` against the larger of the one-shot private upper
/// bounds on `N` and `N^c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub lower_q2: f64,
    pub upper_p1_max: f64,
    pub holds: bool,
}

pub fn theorem2_clause_k1(params: &BoundParams) -> Result<ClauseCheck> {
    params.require_thm2()?;
    let table = lemma_b1(params, 1)?;
    let upper = table.private_upper.max(table.private_upper_complement);
    let lower = params.l(2);
    Ok(ClauseCheck { lower_q2: lower, upper_p1_max: upper, holds: lower > upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub k: u64,
    pub log2_f: Option<f64>,
    pub log2_fc: Option<f64>,
}

/// Rows `k = 1..=k_max` of `(log₂ f, log₂ f^c)`; cells with an undefined or
/// non-positive gap are `None`.
pub fn figure1_rows(params: &BoundParams, k_max: u64) -> Result<Vec<Figure1Row>> {
    params.require_thm2()?;
    if k_max == 0 {
        return Err(QcapError::Validity("k_max must be at least 1".into()));
    }
    params.require_k(k_max, 1)?;
    let pos_log = |x: f64| (x > 0.0).then(|| x.log2());
    Ok((1..=k_max)
        .map(|k| Figure1Row {
            k,
            log2_f: if k >= 2 { pos_log(params.f_raw(k)) } else { None },
            log2_fc: pos_log(params.fc_raw(k)),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure2Row {
    pub k: u64,
    pub u_k: f64,
    pub q_max: f64,
}

/// Rows `k = 1..=n` of `U_k` (`U′` for `k ≤ k₀`, `U″` beyond) against the
/// constant `Q_max = L(n+1)`.
pub fn figure2_rows(params: &BoundParams) -> Result<Vec<Figure2Row>> {
    params.require_lemma_b()?;
    let k0v = k0(params)?;
    let q_max = params.l(params.n + 1);
    Ok((1..=params.n)
        .map(|k| Figure2Row {
            k,
            u_k: if le(k as f64, k0v) { params.u_prime(k) } else { params.u_double_prime(k) },
            q_max,
        })
        .collect())
}

/// Consecutive rows where `U_k` first reaches `Q_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub below: u64,
    pub above: u64,
}

pub fn figure2_crossing(rows: &[Figure2Row]) -> Option<Crossing> {
    rows.windows(2)
        .find(|w| w[0].u_k < w[0].q_max && w[1].u_k >= w[1].q_max)
        .map(|w| Crossing { below: w[0].k, above: w[1].k })
}

fn cell(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn figure1_csv(rows: &[Figure1Row]) -> String {
    let mut out = String::from("k,log2_f,log2_fc\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.k, cell(r.log2_f), cell(r.log2_fc)));
    }
    out
}

pub fn figure2_csv(rows: &[Figure2Row]) -> String {
    let mut out = String::from("k,U_k,Qmax\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.k, format_number(r.u_k), format_number(r.q_max)));
    }
    out
}

/// Whether the `p = 1/2` gap is positive for every `1 ≤ k ≤ n`.
pub fn theorem1_positive(n: u64, alpha: u32) -> Result<bool> {
    for k in 1..=n {
        if theorem1_gap(n, alpha, k)? <= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `f > 0` on `2..=n` and `f^c > 0` on `1..=n`.
pub fn theorem2_positive(params: &BoundParams) -> Result<bool> {
    params.require_thm2()?;
    Ok((1..=params.n).all(|k| params.fc_raw(k) > 0.0 && (k < 2 || params.f_raw(k) > 0.0)))
}

/// Brute-force check of `U(k) ≤ (1−2p) n^α ⇔ k ≤ k₀` for `k = 1..=n`.
pub fn branch_switch_holds(params: &BoundParams) -> Result<bool> {
    params.require_lemma_b()?;
    let k0v = k0(params)?;
    let flat = (1.0 - 2.0 * params.p) * params.log2_d;
    // both sides carry rounding of order 1e-16·n^α from the cancellation in 1 − 2p
    let slack = BOUNDARY_EPS * params.log2_d;
    Ok((1..=params.n).all(|k| (params.u(k) <= flat + slack) == le(k as f64, k0v)))
}

/// [`theorem1_positive`] over many `(n, α)` tuples.
pub fn theorem1_sweep(exec: Execution, tuples: &[(u64, u32)]) -> Result<Vec<bool>> {
    map_slice(exec, tuples, |&(n, a)| theorem1_positive(n, a)).into_iter().collect()
}

/// [`theorem2_positive`] over many parameter sets.
pub fn theorem2_sweep(exec: Execution, params: &[BoundParams]) -> Result<Vec<bool>> {
    map_slice(exec, params, theorem2_positive).into_iter().collect()
}

/// [`branch_switch_holds`] over many parameter sets.
pub fn branch_switch_sweep(exec: Execution, params: &[BoundParams]) -> Result<Vec<bool>> {
    map_slice(exec, params, branch_switch_holds).into_iter().collect()
}

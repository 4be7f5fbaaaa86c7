//! Multi-restart gradient ascent for lower bounds on `Q(1)` and `P(1)`.
//!
//! States are parameterized as `ρ = G G† / tr(G G†)` with an unconstrained
//! complex factor `G` (`dA × rank`); ensembles add softmax logits for the
//! weights and one factor per member. The ascent uses analytic gradients,
//! Armijo backtracking (constant 1e-4, shrink 0.5) and an initial step that
//! doubles after every accepted move.
//!
//! Entropy gradients use `-log₂ σ` with eigenvalues floored at
//! [`LOG_FLOOR`]. The gradient of a trace function has no eigenvalue-gap
//! denominator, so degenerate spectra need no special treatment; the floor
//! only matters on directions the channel output can never reach.
//!
//! Restart `i` draws from the sub-seed `seed ^ i`. Restart 0 starts at the
//! maximally mixed state (for ensembles: uniform weights over computational
//! basis states), restart 1 at a random pure state (a rank-one factor stays
//! rank one, so this restart explores the boundary), later restarts at
//! Ginibre-induced random states. Every reported value is recomputed from
//! the returned argmax with the functions in [`crate::info`].

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{AsFlagged, FlaggedChannel};
use crate::error::{QcapError, Result};
use crate::info::{coherent_information_flagged, private_information_flagged, Ensemble};
use crate::par::{map_indexed, Execution};
use crate::qmat::random::{ginibre, random_pure_state};
use crate::qmat::{check_dim, ComplexMatrix, DensityMatrix, C64};

/// Eigenvalue floor inside `log₂` for gradient evaluation.
pub const LOG_FLOOR: f64 = 1e-14;
const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;
/// Window (iterations) for the improvement-based stopping rule.
const STALL_WINDOW: usize = 25;

/// Column count of the state factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    #[default]
    Full,
    Fixed(usize),
}

impl Rank {
    fn columns(self, da: usize) -> usize {
        match self {
            Rank::Full => da,
            Rank::Fixed(r) => r.clamp(1, da),
        }
    }
}

impl std::str::FromStr for Rank {
    type Err = QcapError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(Rank::Full);
        }
        match s.parse::<usize>() {
            Ok(r) if r >= 1 => Ok(Rank::Fixed(r)),
            _ => Err(QcapError::InvalidParameter(format!("rank must be 'full' or a positive integer, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once the objective improves by less than this over 25 iterations.
    pub tol: f64,
    pub seed: u64,
    pub rank: Rank,
    /// Ensemble size for private information; `None` means `2·dA`.
    pub ensemble_size: Option<usize>,
    pub execution: Execution,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 20,
            max_iters: 2000,
            tol: 1e-7,
            seed: 0,
            rank: Rank::Full,
            ensemble_size: None,
            execution: Execution::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        OptimizerConfig { seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(QcapError::InvalidParameter("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(QcapError::InvalidParameter("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(QcapError::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.ensemble_size == Some(0) || self.rank == Rank::Fixed(0) {
            return Err(QcapError::InvalidParameter("ensemble size and rank must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Argmax {
    State(DensityMatrix),
    Ensemble(Ensemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    /// Functional re-evaluated at `argmax`.
    pub value: f64,
    pub argmax: Argmax,
    pub best_restart: usize,
    pub restarts_summary: Vec<RestartSummary>,
    /// Iterations of the winning restart.
    pub iterations_used: usize,
    pub converged: bool,
}

/// Which functional an objective or self-check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Coherent,
    Private,
}

/// `V diag(-log₂ max(λ, LOG_FLOOR)) V†` for a Hermitian `m`.
fn neg_log(m: &DMatrix<C64>) -> DMatrix<C64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = -lam.max(LOG_FLOOR).log2();
        scaled.column_mut(k).scale_mut(s);
    }
    scaled * eig.eigenvectors.adjoint()
}

fn entropy(m: &DMatrix<C64>) -> f64 {
    crate::qmat::eigvalsh(m).into_iter().filter(|&l| l > 0.0).map(|l| -l * l.log2()).sum()
}

fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    // Tr(AB) for Hermitian A, B
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum::<C64>().re
}

/// Factor stored as interleaved (re, im) pairs in column-major order.
fn factor_from(x: &[f64], rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_iterator(rows, cols, x.chunks_exact(2).map(|c| C64::new(c[0], c[1])))
}

fn write_factor(g: &DMatrix<C64>, out: &mut [f64]) {
    for (slot, z) in out.chunks_exact_mut(2).zip(g.iter()) {
        slot[0] = z.re;
        slot[1] = z.im;
    }
}

fn gram(g: &DMatrix<C64>) -> (DMatrix<C64>, f64) {
    let m = g * g.adjoint();
    let t = m.trace().re;
    (m / C64::new(t, 0.0), t)
}

fn normalize_block(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

fn softmax(a: &[f64]) -> Vec<f64> {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Smooth objective over a flat real parameter vector.
trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
    fn normalize(&self, x: &mut [f64]);
    fn initial(&self, restart: usize, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

struct CoherentObjective<'a> {
    fch: &'a FlaggedChannel,
    da: usize,
    rank: usize,
}

impl CoherentObjective<'_> {
    fn state(&self, x: &[f64]) -> DensityMatrix {
        DensityMatrix::from_factor(&ComplexMatrix::from_dmatrix(factor_from(x, self.da, self.rank)))
    }
}

impl Objective for CoherentObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let (rho, _) = gram(&factor_from(x, self.da, self.rank));
        self.fch
            .branches()
            .iter()
            .map(|(p, ch)| p * (entropy(&ch.apply_raw(&rho)) - entropy(&ch.apply_complement_raw(&rho))))
            .sum()
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let g = factor_from(x, self.da, self.rank);
        let (rho, t) = gram(&g);
        let mut value = 0.0;
        let mut xop = DMatrix::<C64>::zeros(self.da, self.da);
        for (p, ch) in self.fch.branches() {
            let sb = ch.apply_raw(&rho);
            let se = ch.apply_complement_raw(&rho);
            value += p * (entropy(&sb) - entropy(&se));
            let term = ch.adjoint_raw(&neg_log(&sb)) - ch.adjoint_complement_raw(&neg_log(&se));
            xop += term * C64::new(*p, 0.0);
        }
        let shift = trace_product(&xop, &rho);
        for i in 0..self.da {
            xop[(i, i)] -= C64::new(shift, 0.0);
        }
        let grad = (xop * &g) * C64::new(2.0 / t, 0.0);
        let mut out = vec![0.0; x.len()];
        write_factor(&grad, &mut out);
        (value, out)
    }

    fn normalize(&self, x: &mut [f64]) {
        normalize_block(x);
    }

    fn initial(&self, restart: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (da, r) = (self.da, self.rank);
        let g = match restart {
            0 => DMatrix::from_fn(da, r, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }),
            1 => {
                let psi = random_pure_state(da, rng);
                DMatrix::from_fn(da, r, |i, j| if j == 0 { psi[i] } else { C64::new(0.0, 0.0) })
            }
            _ => ginibre(da, r, rng).into_dmatrix(),
        };
        let mut x = vec![0.0; 2 * da * r];
        write_factor(&g, &mut x);
        normalize_block(&mut x);
        x
    }
}

struct PrivateObjective<'a> {
    fch: &'a FlaggedChannel,
    da: usize,
    rank: usize,
    members: usize,
}

impl PrivateObjective<'_> {
    fn block(&self) -> usize {
        2 * self.da * self.rank
    }

    fn decode(&self, x: &[f64]) -> (Vec<f64>, Vec<DMatrix<C64>>) {
        let m = self.members;
        let probs = softmax(&x[..m]);
        let factors = (0..m)
            .map(|k| factor_from(&x[m + k * self.block()..m + (k + 1) * self.block()], self.da, self.rank))
            .collect();
        (probs, factors)
    }

    fn ensemble(&self, x: &[f64]) -> Result<Ensemble> {
        let (probs, factors) = self.decode(x);
        let kept: Vec<(f64, DensityMatrix)> = probs
            .iter()
            .zip(&factors)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, g)| (*p, DensityMatrix::from_factor(&ComplexMatrix::from_dmatrix(g.clone()))))
            .collect();
        let total: f64 = kept.iter().map(|(p, _)| p).sum();
        Ensemble::new(kept.into_iter().map(|(p, r)| (p / total, r)).collect())
    }

    fn evaluate(&self, x: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let m = self.members;
        let (probs, factors) = self.decode(x);
        let states: Vec<(DMatrix<C64>, f64)> = factors.iter().map(gram).collect();
        let mut value = 0.0;
        let mut logit_g = vec![0.0; m];
        let mut xops = vec![DMatrix::<C64>::zeros(self.da, self.da); if want_grad { m } else { 0 }];
        for (q, ch) in self.fch.branches() {
            for (sign, complement) in [(1.0, false), (-1.0, true)] {
                let outs: Vec<DMatrix<C64>> = states
                    .iter()
                    .map(|(rho, _)| if complement { ch.apply_complement_raw(rho) } else { ch.apply_raw(rho) })
                    .collect();
                let mut avg = DMatrix::<C64>::zeros(outs[0].nrows(), outs[0].nrows());
                for (p, o) in probs.iter().zip(&outs) {
                    avg += o * C64::new(*p, 0.0);
                }
                let member_s: f64 = probs.iter().zip(&outs).map(|(p, o)| p * entropy(o)).sum();
                value += sign * q * (entropy(&avg) - member_s);
                if !want_grad {
                    continue;
                }
                let l_avg = neg_log(&avg);
                for k in 0..m {
                    let l_k = neg_log(&outs[k]);
                    let diff = &l_avg - &l_k;
                    // D(σ_k || σ̄) = Tr σ_k (log σ_k − log σ̄) = Tr σ_k (L̄ − L_k)
                    logit_g[k] += sign * q * trace_product(&outs[k], &diff);
                    let back = if complement { ch.adjoint_complement_raw(&diff) } else { ch.adjoint_raw(&diff) };
                    xops[k] += back * C64::new(sign * q * probs[k], 0.0);
                }
            }
        }
        if !want_grad {
            return (value, Vec::new());
        }
        let mut grad = vec![0.0; x.len()];
        let mean: f64 = probs.iter().zip(&logit_g).map(|(p, g)| p * g).sum();
        for k in 0..m {
            grad[k] = probs[k] * (logit_g[k] - mean);
        }
        for k in 0..m {
            let (rho, t) = &states[k];
            let mut y = xops[k].clone();
            let shift = trace_product(&y, rho);
            for i in 0..self.da {
                y[(i, i)] -= C64::new(shift, 0.0);
            }
            let gk = (y * &factors[k]) * C64::new(2.0 / t, 0.0);
            write_factor(&gk, &mut grad[m + k * self.block()..m + (k + 1) * self.block()]);
        }
        (value, grad)
    }
}

impl Objective for PrivateObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x, false).0
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(x, true)
    }

    fn normalize(&self, x: &mut [f64]) {
        let m = self.members;
        let top = x[..m].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        x[..m].iter_mut().for_each(|a| *a -= top);
        for block in x[m..].chunks_exact_mut(self.block()) {
            normalize_block(block);
        }
    }

    fn initial(&self, restart: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (da, r, m) = (self.da, self.rank, self.members);
        let mut x = vec![0.0; m + m * self.block()];
        for k in 0..m {
            let g = match restart {
                0 => DMatrix::from_fn(da, r, |i, j| {
                    if i == k % da && j == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
                }),
                1 => {
                    let psi = random_pure_state(da, rng);
                    DMatrix::from_fn(da, r, |i, j| if j == 0 { psi[i] } else { C64::new(0.0, 0.0) })
                }
                _ => ginibre(da, r, rng).into_dmatrix(),
            };
            write_factor(&g, &mut x[m + k * self.block()..m + (k + 1) * self.block()]);
        }
        self.normalize(&mut x);
        x
    }
}

struct AscentOutcome {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn ascend(obj: &dyn Objective, mut x: Vec<f64>, cfg: &OptimizerConfig) -> AscentOutcome {
    let mut history = Vec::with_capacity(cfg.max_iters + 1);
    let mut step = 1.0;
    let mut trial = vec![0.0; x.len()];
    for iter in 0..cfg.max_iters {
        let (f, g) = obj.value_grad(&x);
        history.push(f);
        if iter >= STALL_WINDOW && f - history[iter - STALL_WINDOW] < cfg.tol {
            return AscentOutcome { x, iterations: iter, converged: true };
        }
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg.is_nan() || gg <= 1e-28 {
            return AscentOutcome { x, iterations: iter, converged: true };
        }
        let mut accepted = false;
        while step >= MIN_STEP {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *t = xi + step * gi;
            }
            let ft = obj.value(&trial);
            if ft >= f + ARMIJO * step * gg {
                accepted = true;
                break;
            }
            step *= SHRINK;
        }
        if !accepted {
            return AscentOutcome { x, iterations: iter, converged: true };
        }
        std::mem::swap(&mut x, &mut trial);
        obj.normalize(&mut x);
        step *= 2.0;
    }
    AscentOutcome { x, iterations: cfg.max_iters, converged: false }
}

fn sub_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ restart as u64)
}

/// Best restart: highest value, ties within 1e-12 go to the lowest index.
fn pick_best(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + 1e-12 {
            best = i;
        }
    }
    best
}

fn run_restarts<F>(obj: &dyn Objective, cfg: &OptimizerConfig, reevaluate: F) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> Result<(f64, Argmax)> + Sync,
{
    let outcomes = map_indexed(cfg.execution, cfg.restarts, |i| {
        let mut rng = sub_rng(cfg.seed, i);
        let x0 = obj.initial(i, &mut rng);
        let out = ascend(obj, x0, cfg);
        let evaluated = reevaluate(&out.x);
        (out, evaluated)
    });
    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut values = Vec::with_capacity(outcomes.len());
    let mut argmaxes = Vec::with_capacity(outcomes.len());
    for (i, (out, evaluated)) in outcomes.into_iter().enumerate() {
        let (value, argmax) = evaluated?;
        summaries.push(RestartSummary { index: i, value, iterations: out.iterations, converged: out.converged });
        values.push(value);
        argmaxes.push(argmax);
    }
    let best = pick_best(&values);
    Ok(OptimizeResult {
        value: values[best],
        argmax: argmaxes.swap_remove(best),
        best_restart: best,
        iterations_used: summaries[best].iterations,
        converged: summaries[best].converged,
        restarts_summary: summaries,
    })
}

/// Lower bound on `Q(1)`: maximizes the (flag-averaged) coherent information.
pub fn maximize_coherent_information<C: AsFlagged + ?Sized>(ch: &C, cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    let fch = ch.as_flagged();
    let da = fch.input_dim();
    check_dim(da)?;
    let obj = CoherentObjective { fch: &fch, da, rank: cfg.rank.columns(da) };
    run_restarts(&obj, cfg, |x| {
        let rho = obj.state(x);
        Ok((coherent_information_flagged(&fch, &rho)?, Argmax::State(rho)))
    })
}

/// Lower bound on `P(1)`: maximizes private information over ensembles of
/// `cfg.ensemble_size` members (default `2·dA`).
pub fn maximize_private_information<C: AsFlagged + ?Sized>(ch: &C, cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    let fch = ch.as_flagged();
    let da = fch.input_dim();
    check_dim(da)?;
    let members = cfg.ensemble_size.unwrap_or(2 * da);
    let obj = PrivateObjective { fch: &fch, da, rank: cfg.rank.columns(da), members };
    run_restarts(&obj, cfg, |x| {
        let ens = obj.ensemble(x)?;
        Ok((private_information_flagged(&fch, &ens)?, Argmax::Ensemble(ens)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub objective: ObjectiveKind,
    pub points: usize,
    pub step: f64,
    /// `‖g_analytic − g_fd‖∞ / max(‖g_fd‖∞, 1e-12)` per point.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

/// Compares the analytic gradient with central finite differences (step
/// 1e-5) at 5 random interior points drawn from `cfg.seed`.
pub fn gradient_selfcheck<C: AsFlagged + ?Sized>(
    ch: &C,
    cfg: &OptimizerConfig,
    kind: ObjectiveKind,
) -> Result<GradientCheck> {
    const POINTS: usize = 5;
    const STEP: f64 = 1e-5;
    cfg.validate()?;
    let fch = ch.as_flagged();
    let da = fch.input_dim();
    check_dim(da)?;
    let rank = cfg.rank.columns(da);
    let coherent = CoherentObjective { fch: &fch, da, rank };
    let private = PrivateObjective { fch: &fch, da, rank, members: cfg.ensemble_size.unwrap_or(2 * da) };
    let obj: &dyn Objective = match kind {
        ObjectiveKind::Coherent => &coherent,
        ObjectiveKind::Private => &private,
    };
    let relative_errors = map_indexed(cfg.execution, POINTS, |pt| {
        // Ginibre start (restart index ≥ 2) with random logits
        let mut rng = sub_rng(cfg.seed, pt + 2);
        let mut x = obj.initial(2, &mut rng);
        if kind == ObjectiveKind::Private {
            for (k, a) in x[..private.members].iter_mut().enumerate() {
                *a = ((k * 7 + pt * 3) % 5) as f64 * 0.3 - 0.6;
            }
        }
        let (_, analytic) = obj.value_grad(&x);
        let mut probe = x.clone();
        let mut fd = vec![0.0; x.len()];
        for i in 0..x.len() {
            probe[i] = x[i] + STEP;
            let up = obj.value(&probe);
            probe[i] = x[i] - STEP;
            let down = obj.value(&probe);
            probe[i] = x[i];
            fd[i] = (up - down) / (2.0 * STEP);
        }
        let diff = analytic.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
        diff / scale
    });
    let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradientCheck { objective: kind, points: POINTS, step: STEP, relative_errors, max_relative_error })
}

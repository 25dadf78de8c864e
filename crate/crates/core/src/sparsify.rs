//! Sparsest AND-OR split of a masked-output table.
//!
//! The output is split as
//! `v_and(x_T) = 0.5 (v(x_T) - δ_T) + γ_T` and
//! `v_or(x_T)  = 0.5 (v(x_T) - δ_T) - γ_T`, with `|δ_T| <= ζ`, and `(γ, δ)`
//! are chosen to minimise `sum_{S != ∅} |I_and(S)| + |I_or(S)|`.
//!
//! The objective is an L1 norm of an affine map of `(γ, δ)` over a box, so
//! it is solved with a diagonally preconditioned primal-dual iteration
//! (Chambolle-Pock). Every primal iterate is feasible, and the returned
//! decomposition is the best iterate seen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interactions::{AndOrInteractions, MaskedOutputTable};
use crate::subsets::{mobius_in_place, superset_mobius_in_place, SubsetTable};

/// Fraction of `|v(x_N) - v(x_∅)|` that bounds the removable noise `δ`.
pub const DEFAULT_ZETA_FACTOR: f64 = 0.02;

/// Learned split parameters `γ`, `δ` and the bound `ζ` on `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    gamma: SubsetTable,
    delta: SubsetTable,
    zeta_bound: f64,
}

impl Decomposition {
    pub fn new(gamma: SubsetTable, delta: SubsetTable, zeta_bound: f64) -> Result<Self> {
        gamma.ensure_same_n(&delta)?;
        if !(zeta_bound >= 0.0) || !zeta_bound.is_finite() {
            return Err(Error::Config(format!("ζ must be finite and >= 0, got {zeta_bound}")));
        }
        Ok(Self {
            gamma,
            delta,
            zeta_bound,
        })
    }

    /// The even split `γ = δ = 0`.
    pub fn even(n: usize, zeta_bound: f64) -> Result<Self> {
        Self::new(SubsetTable::zeros(n)?, SubsetTable::zeros(n)?, zeta_bound)
    }

    pub fn n(&self) -> usize {
        self.gamma.n()
    }

    pub fn gamma(&self) -> &SubsetTable {
        &self.gamma
    }

    pub fn delta(&self) -> &SubsetTable {
        &self.delta
    }

    pub fn zeta_bound(&self) -> f64 {
        self.zeta_bound
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.delta.values().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    fn check_against(&self, v: &MaskedOutputTable) -> Result<()> {
        self.gamma.ensure_same_n(v.values())?;
        if self.max_abs_delta() > self.zeta_bound {
            return Err(Error::Contract(format!(
                "|δ| = {} exceeds ζ = {}",
                self.max_abs_delta(),
                self.zeta_bound
            )));
        }
        Ok(())
    }

    /// `v_and(x_T) = 0.5 (v(x_T) - δ_T) + γ_T`.
    pub fn v_and(&self, v: &MaskedOutputTable) -> Result<SubsetTable> {
        self.split(v, 1.0)
    }

    /// `v_or(x_T) = 0.5 (v(x_T) - δ_T) - γ_T`.
    pub fn v_or(&self, v: &MaskedOutputTable) -> Result<SubsetTable> {
        self.split(v, -1.0)
    }

    fn split(&self, v: &MaskedOutputTable, sign: f64) -> Result<SubsetTable> {
        self.gamma.ensure_same_n(v.values())?;
        let vals = v
            .values()
            .values()
            .iter()
            .zip(self.delta.values())
            .zip(self.gamma.values())
            .map(|((&x, &d), &g)| 0.5 * (x - d) + sign * g)
            .collect();
        SubsetTable::new(v.n(), vals)
    }

    /// AND and OR interactions of the decomposed table.
    pub fn interactions(&self, v: &MaskedOutputTable) -> Result<AndOrInteractions> {
        AndOrInteractions::from_split(&self.v_and(v)?, &self.v_or(v)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifyConfig {
    pub max_iters: usize,
    /// Primal/dual step balance; primal steps scale with `learning_rate * max|v|`.
    pub learning_rate: f64,
    /// Relative improvement of the best loss over a window below which the
    /// iteration counts as converged.
    pub convergence_tol: f64,
    /// Reserved for randomized restarts; the default initialisation is deterministic.
    pub seed: u64,
    pub zeta_factor: f64,
}

impl Default for SparsifyConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            learning_rate: 1.0,
            convergence_tol: 1e-7,
            seed: 0,
            zeta_factor: DEFAULT_ZETA_FACTOR,
        }
    }
}

impl SparsifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence_tol must be >= 0".into()));
        }
        if !(self.zeta_factor >= 0.0) {
            return Err(Error::Config("zeta_factor must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifyDiagnostics {
    /// Loss of the best iterate after each iteration, starting with the
    /// loss of the initial even split.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
}

/// `ζ = 0.02 |v(x_N) - v(x_∅)|`.
pub fn delta_bound(v: &MaskedOutputTable) -> f64 {
    delta_bound_with(v, DEFAULT_ZETA_FACTOR)
}

pub fn delta_bound_with(v: &MaskedOutputTable, factor: f64) -> f64 {
    factor * (v.v_full() - v.v_empty()).abs()
}

/// `sum_{S != ∅} |I_and(S)| + |I_or(S)|` for the split described by `dec`.
pub fn sparsify_loss(dec: &Decomposition, v: &MaskedOutputTable) -> Result<f64> {
    dec.check_against(v)?;
    let both = dec.interactions(v)?;
    Ok(both.and.l1_norm() + both.or.l1_norm())
}

/// Raw-slice evaluation of the objective's linear parts.
struct Objective {
    len: usize,
    /// Constant part of the AND and OR effects (the even split with δ = 0).
    offset_and: Vec<f64>,
    offset_or: Vec<f64>,
}

impl Objective {
    fn new(v: &[f64]) -> Self {
        let len = v.len();
        let mut offset_and: Vec<f64> = v.iter().map(|x| 0.5 * x).collect();
        mobius_in_place(&mut offset_and);
        let mut offset_or: Vec<f64> = v.iter().rev().map(|x| -0.5 * x).collect();
        mobius_in_place(&mut offset_or);
        offset_and[0] = 0.0;
        offset_or[0] = 0.0;
        Self {
            len,
            offset_and,
            offset_or,
        }
    }

    /// Effects `(I_and, I_or)` at `(γ, δ)`, with the ∅ entries zeroed.
    fn effects(&self, gamma: &[f64], delta: &[f64], and: &mut [f64], or: &mut [f64]) {
        let full = self.len - 1;
        for t in 0..self.len {
            and[t] = gamma[t] - 0.5 * delta[t];
            // MF applied to (γ + δ/2): reindex by complement first.
            or[t] = gamma[full ^ t] + 0.5 * delta[full ^ t];
        }
        mobius_in_place(and);
        mobius_in_place(or);
        for t in 0..self.len {
            and[t] += self.offset_and[t];
            or[t] += self.offset_or[t];
        }
        and[0] = 0.0;
        or[0] = 0.0;
    }

    fn loss(&self, gamma: &[f64], delta: &[f64], and: &mut [f64], or: &mut [f64]) -> f64 {
        self.effects(gamma, delta, and, or);
        and.iter().chain(or.iter()).map(|x| x.abs()).sum()
    }

    /// Adjoint of the linear part: maps dual `(y_and, y_or)` to `(γ, δ)`
    /// gradients. Consumes the dual buffers as scratch space.
    fn adjoint(&self, y_and: &mut [f64], y_or: &mut [f64], g_gamma: &mut [f64], g_delta: &mut [f64]) {
        let full = self.len - 1;
        y_and[0] = 0.0;
        y_or[0] = 0.0;
        superset_mobius_in_place(y_and);
        superset_mobius_in_place(y_or);
        for t in 0..self.len {
            let a = y_and[t];
            let o = y_or[full ^ t];
            g_gamma[t] = a + o;
            g_delta[t] = -0.5 * a + 0.5 * o;
        }
    }
}

/// Learns `(γ, δ)` minimising the AND-OR L1 objective, starting from the
/// even split.
pub fn optimize_decomposition(
    v: &MaskedOutputTable,
    cfg: &SparsifyConfig,
) -> Result<(Decomposition, SparsifyDiagnostics)> {
    cfg.validate()?;
    let n = v.n();
    let len = 1usize << n;
    let full = len - 1;
    let zeta = delta_bound_with(v, cfg.zeta_factor);
    let obj = Objective::new(v.values().values());

    let scale = v.values().values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let balance = cfg.learning_rate * scale;

    // Diagonal preconditioners from the absolute row/column sums of the
    // linear map: |M| has the zeta pattern, so the sums are powers of two.
    let order = |t: usize| t.count_ones() as i32;
    let col_sum = |t: usize| -> f64 {
        let and_col = 2f64.powi(n as i32 - order(t)) - (t == 0) as u8 as f64;
        let or_col = 2f64.powi(order(t)) - (t == full) as u8 as f64;
        and_col + or_col
    };
    let tau_gamma: Vec<f64> = (0..len).map(|t| balance / col_sum(t)).collect();
    let tau_delta: Vec<f64> = (0..len).map(|t| balance / (0.5 * col_sum(t))).collect();
    let sigma: Vec<f64> = (0..len)
        .map(|s| 1.0 / (balance * 1.5 * 2f64.powi(order(s))))
        .collect();

    let mut gamma = vec![0.0; len];
    let mut delta = vec![0.0; len];
    let mut gamma_bar = gamma.clone();
    let mut delta_bar = delta.clone();
    let mut y_and = vec![0.0; len];
    let mut y_or = vec![0.0; len];
    let mut buf_and = vec![0.0; len];
    let mut buf_or = vec![0.0; len];
    let mut g_gamma = vec![0.0; len];
    let mut g_delta = vec![0.0; len];

    let initial = obj.loss(&gamma, &delta, &mut buf_and, &mut buf_or);
    if !initial.is_finite() {
        return Err(Error::Numeric("initial loss is not finite".into()));
    }
    let mut best = initial;
    let mut best_gamma = gamma.clone();
    let mut best_delta = delta.clone();
    let mut history = vec![initial];
    let mut converged = initial == 0.0;
    let mut iterations = 0;
    const WINDOW: usize = 100;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;

        // Dual ascent on the L1 conjugate: clip to the unit box.
        obj.effects(&gamma_bar, &delta_bar, &mut buf_and, &mut buf_or);
        for s in 1..len {
            y_and[s] = (y_and[s] + sigma[s] * buf_and[s]).clamp(-1.0, 1.0);
            y_or[s] = (y_or[s] + sigma[s] * buf_or[s]).clamp(-1.0, 1.0);
        }

        buf_and.copy_from_slice(&y_and);
        buf_or.copy_from_slice(&y_or);
        obj.adjoint(&mut buf_and, &mut buf_or, &mut g_gamma, &mut g_delta);
        if g_gamma.iter().chain(&g_delta).any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient at iteration {iterations}"
            )));
        }

        let mut step = 0.0f64;
        for t in 0..len {
            let g_new = gamma[t] - tau_gamma[t] * g_gamma[t];
            let d_new = (delta[t] - tau_delta[t] * g_delta[t]).clamp(-zeta, zeta);
            gamma_bar[t] = 2.0 * g_new - gamma[t];
            delta_bar[t] = 2.0 * d_new - delta[t];
            step = step.max((g_new - gamma[t]).abs()).max((d_new - delta[t]).abs());
            gamma[t] = g_new;
            delta[t] = d_new;
        }

        let loss = obj.loss(&gamma, &delta, &mut buf_and, &mut buf_or);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss at iteration {iterations}")));
        }
        if loss < best {
            best = loss;
            best_gamma.copy_from_slice(&gamma);
            best_delta.copy_from_slice(&delta);
        }
        history.push(best);

        if iterations >= WINDOW {
            let earlier = history[iterations - WINDOW];
            let improvement = (earlier - best) / earlier.max(f64::MIN_POSITIVE);
            if improvement <= cfg.convergence_tol && step <= 1e-9 * scale {
                converged = true;
            }
        }
        if best == 0.0 {
            converged = true;
        }
    }

    let dec = Decomposition::new(
        SubsetTable::new(n, best_gamma)?,
        SubsetTable::new(n, best_delta)?,
        zeta,
    )?;
    Ok((
        dec,
        SparsifyDiagnostics {
            loss_history: history,
            iterations,
            converged,
            final_loss: best,
        },
    ))
}

//! Learning dynamics of interactions under triggering noise.
//!
//! Interactions are modelled as a linear regression of the converged outputs
//! `y = J w*` on the triggering matrix `J[S, T] = 1(T ⊆ S)`, with additive
//! noise of variance `c_T = 2^|T| σ²` on each trigger. The expected loss has
//! the closed-form minimiser `ŵ = (JᵀJ + 2ⁿ diag(c))⁻¹ JᵀJ w*`.
//!
//! `JᵀJ[T, T'] = 2^(n - |T ∪ T'|)` is assembled directly, and `Jw`, `Jᵀr`
//! are the zeta and superset-zeta sweeps, so the dense matrices are only
//! built where a factorization is needed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interactions::MaskedOutputTable;
use crate::metrics::{theo_distribution, OrderDistribution};
use crate::subsets::{
    check_n, mobius_in_place, superset_zeta_in_place, zeta_in_place, SubsetTable,
};

/// Largest `n` for which dense `2ⁿ × 2ⁿ` matrices are materialised.
pub const DENSE_CAP: usize = 12;

/// Default σ² grid: 11 log-spaced points over `[1e-3, 1e2]`.
pub fn default_sigma2_grid() -> Vec<f64> {
    log_grid(1e-3, 1e2, 11)
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

fn check_dense(n: usize) -> Result<()> {
    check_n(n)?;
    if n > DENSE_CAP {
        return Err(Error::Capacity(format!(
            "dense matrices are limited to n <= {DENSE_CAP}, got {n}"
        )));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Config(format!("σ² must be finite and >= 0, got {sigma2}")));
    }
    Ok(())
}

/// The fixed binary triggering matrix `J[S, T] = 1(T ⊆ S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggeringMatrix {
    n: usize,
}

pub fn build_j(n: usize) -> Result<TriggeringMatrix> {
    check_n(n)?;
    Ok(TriggeringMatrix { n })
}

impl TriggeringMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        1 << self.n
    }

    pub fn get(&self, s: usize, t: usize) -> bool {
        t & s == t
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        check_dense(self.n)?;
        let size = self.size();
        Ok(DMatrix::from_fn(size, size, |s, t| self.get(s, t) as u8 as f64))
    }

    /// `J w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = w.to_vec();
        zeta_in_place(&mut out);
        out
    }

    /// `Jᵀ r`.
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = r.to_vec();
        superset_zeta_in_place(&mut out);
        out
    }

    /// `JᵀJ`, assembled entrywise as `2^(n - |T ∪ T'|)`.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        check_dense(self.n)?;
        let size = self.size();
        let n = self.n as i32;
        Ok(DMatrix::from_fn(size, size, |t, u| {
            2f64.powi(n - (t | u).count_ones() as i32)
        }))
    }
}

/// Trigger-noise variances `c_T = 2^|T| σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub c: SubsetTable,
}

impl NoiseSpec {
    pub fn n(&self) -> usize {
        self.c.n()
    }
}

pub fn noise_variance_vector(n: usize, sigma2: f64) -> Result<NoiseSpec> {
    check_sigma2(sigma2)?;
    let c = SubsetTable::from_fn(n, |t| 2f64.powi(t.count_ones() as i32) * sigma2)?;
    Ok(NoiseSpec { sigma2, c })
}

/// `JᵀJ + 2ⁿ diag(c)`.
pub fn system_matrix(n: usize, sigma2: f64) -> Result<DMatrix<f64>> {
    let noise = noise_variance_vector(n, sigma2)?;
    let mut a = build_j(n)?.gram()?;
    let scale = (1usize << n) as f64;
    for (t, &c) in noise.c.values().iter().enumerate() {
        a[(t, t)] += scale * c;
    }
    Ok(a)
}

fn factor(n: usize, sigma2: f64) -> Result<Cholesky<f64, Dyn>> {
    let a = system_matrix(n, sigma2)?;
    Cholesky::new(a).ok_or_else(|| {
        Error::Numeric(format!(
            "JᵀJ + 2ⁿdiag(c) is not positive definite (n = {n}, σ² = {sigma2})"
        ))
    })
}

/// The dense solution operator `M̂ = (JᵀJ + 2ⁿ diag(c))⁻¹ JᵀJ` and its row norms.
#[derive(Debug, Clone)]
pub struct SolutionMatrix {
    pub n: usize,
    pub sigma2: f64,
    pub m: DMatrix<f64>,
    /// `‖m̂_T‖₂` for every mask `T`.
    pub row_norms: Vec<f64>,
    /// Mean row norm for each order `0..=n`.
    pub order_norms: Vec<f64>,
}

/// Builds `M̂` through the identity `M̂ = I - A⁻¹ 2ⁿ diag(c)`, where `A` is
/// the Cholesky-factored system matrix. This is algebraically the same
/// operator and keeps the `σ² → 0` limit free of the `cond(JᵀJ)` error.
pub fn solution_matrix(n: usize, sigma2: f64) -> Result<SolutionMatrix> {
    check_dense(n)?;
    let chol = factor(n, sigma2)?;
    let noise = noise_variance_vector(n, sigma2)?;
    let size = 1usize << n;
    let scale = size as f64;

    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        size,
        noise.c.values().iter().map(|c| scale * c),
    ));
    let mut m = -chol.solve(&d);
    for t in 0..size {
        m[(t, t)] += 1.0;
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("solution matrix has non-finite entries".into()));
    }

    let row_norms: Vec<f64> = m.row_iter().map(|r| r.norm()).collect();
    let mut order_norms = vec![0.0; n + 1];
    let mut counts = vec![0usize; n + 1];
    for (t, &norm) in row_norms.iter().enumerate() {
        let k = t.count_ones() as usize;
        order_norms[k] += norm;
        counts[k] += 1;
    }
    for (s, c) in order_norms.iter_mut().zip(counts) {
        *s /= c as f64;
    }
    Ok(SolutionMatrix {
        n,
        sigma2,
        m,
        row_norms,
        order_norms,
    })
}

/// `M̂` computed literally as `A⁻¹ (JᵀJ)` from the Cholesky factor of `A`.
pub fn solution_matrix_direct(n: usize, sigma2: f64) -> Result<DMatrix<f64>> {
    check_dense(n)?;
    let chol = factor(n, sigma2)?;
    let gram = build_j(n)?.gram()?;
    Ok(chol.solve(&gram))
}

/// Ground-truth interactions `w*`, with `w*_∅ = v(x_∅)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthWeights {
    w_star: SubsetTable,
}

impl GroundTruthWeights {
    pub fn new(w_star: SubsetTable) -> Self {
        Self { w_star }
    }

    pub fn n(&self) -> usize {
        self.w_star.n()
    }

    pub fn table(&self) -> &SubsetTable {
        &self.w_star
    }

    pub fn values(&self) -> &[f64] {
        self.w_star.values()
    }

    pub fn w_empty(&self) -> f64 {
        self.w_star.get(0)
    }

    /// `y = J w*`, the converged outputs on all masked samples.
    pub fn outputs(&self) -> Vec<f64> {
        let mut y = self.w_star.values().to_vec();
        zeta_in_place(&mut y);
        y
    }
}

/// `ŵ = M̂ w*`, evaluated as `w* - A⁻¹ 2ⁿ diag(c) w*` with one Cholesky solve.
pub fn solve_optimal_weights(w_star: &GroundTruthWeights, sigma2: f64) -> Result<SubsetTable> {
    let n = w_star.n();
    check_dense(n)?;
    let chol = factor(n, sigma2)?;
    let noise = noise_variance_vector(n, sigma2)?;
    let scale = (1usize << n) as f64;
    let rhs = DVector::from_iterator(
        1 << n,
        w_star
            .values()
            .iter()
            .zip(noise.c.values())
            .map(|(&w, &c)| scale * c * w),
    );
    let correction = chol.solve(&rhs);
    SubsetTable::new(
        n,
        w_star
            .values()
            .iter()
            .zip(correction.iter())
            .map(|(&w, &d)| w - d)
            .collect(),
    )
}

/// `ŵ = A⁻¹ (JᵀJ w*)` as written, with `JᵀJ w*` evaluated by the sweeps.
pub fn solve_optimal_weights_direct(
    w_star: &GroundTruthWeights,
    sigma2: f64,
) -> Result<SubsetTable> {
    let n = w_star.n();
    check_dense(n)?;
    let chol = factor(n, sigma2)?;
    let j = build_j(n)?;
    let rhs = j.apply_transpose(&j.apply(w_star.values()));
    let w = chol.solve(&DVector::from_vec(rhs));
    SubsetTable::new(n, w.iter().copied().collect())
}

/// Expected noisy loss `(1/2ⁿ)‖y − Jw‖² + wᵀ diag(c) w` with `y = J w*`.
pub fn noisy_loss(w: &SubsetTable, w_star: &GroundTruthWeights, sigma2: f64) -> Result<f64> {
    w.ensure_same_n(w_star.table())?;
    let noise = noise_variance_vector(w.n(), sigma2)?;
    Ok(noisy_loss_raw(w.values(), &w_star.outputs(), noise.c.values()))
}

fn noisy_loss_raw(w: &[f64], y: &[f64], c: &[f64]) -> f64 {
    let mut jw = w.to_vec();
    zeta_in_place(&mut jw);
    let fit: f64 = jw.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() / w.len() as f64;
    let penalty: f64 = w.iter().zip(c).map(|(w, c)| c * w * w).sum();
    fit + penalty
}

/// Gradient `(2/2ⁿ)(JᵀJw − Jᵀy) + 2 diag(c) w`, written into `grad`.
fn noisy_loss_gradient(w: &[f64], y: &[f64], c: &[f64], grad: &mut [f64]) {
    grad.copy_from_slice(w);
    zeta_in_place(grad);
    for (g, yi) in grad.iter_mut().zip(y) {
        *g -= yi;
    }
    superset_zeta_in_place(grad);
    let scale = 2.0 / w.len() as f64;
    for ((g, wi), ci) in grad.iter_mut().zip(w).zip(c) {
        *g = scale * *g + 2.0 * ci * wi;
    }
}

/// Upper bound on the Hessian eigenvalues of the noisy loss:
/// `2 (φ²/2)ⁿ + 2ⁿ⁺¹ σ²`, using `λ_max(JᵀJ) = φ^{2n}`.
pub fn lipschitz_bound(n: usize, sigma2: f64) -> f64 {
    let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
    2.0 * (phi2 / 2.0).powi(n as i32) + 2f64.powi(n as i32 + 1) * sigma2
}

/// Row norms grouped by order, after checking that rows of equal order agree
/// to within `1e-8` relative.
pub fn row_norms_by_order(m: &SolutionMatrix) -> Result<Vec<f64>> {
    let n = m.n;
    let mut lo = vec![f64::INFINITY; n + 1];
    let mut hi = vec![f64::NEG_INFINITY; n + 1];
    for (t, &norm) in m.row_norms.iter().enumerate() {
        let k = t.count_ones() as usize;
        lo[k] = lo[k].min(norm);
        hi[k] = hi[k].max(norm);
    }
    for k in 0..=n {
        let spread = (hi[k] - lo[k]) / m.order_norms[k].abs().max(f64::MIN_POSITIVE);
        if spread > 1e-8 {
            return Err(Error::InvariantViolation(format!(
                "order-{k} row norms spread {spread:e} (n = {n}, σ² = {})",
                m.sigma2
            )));
        }
    }
    Ok(m.order_norms.clone())
}

/// `r^(k)(σ²) = ‖m̂_T‖ / ‖m̂_T'‖` with `|T| = k`, `|T'| = k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub n: usize,
    pub sigma2: Vec<f64>,
    /// `ratios[i][k - 1]` is `r^(k)` at `sigma2[i]`, `k = 1..n-1`.
    pub ratios: Vec<Vec<f64>>,
}

impl RatioCurve {
    /// `r^(k)` along the grid.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.ratios.iter().map(|row| row[k - 1]).collect()
    }

    /// Checks `r^(k) > 1` wherever `σ² > 0` and that every column is
    /// non-decreasing along an ascending grid.
    pub fn check_monotone(&self) -> Result<()> {
        for k in 1..self.n {
            let col = self.column(k);
            for (i, (&s, &r)) in self.sigma2.iter().zip(&col).enumerate() {
                if s > 0.0 && !(r > 1.0) {
                    return Err(Error::InvariantViolation(format!(
                        "r^({k}) = {r} <= 1 at σ² = {s} (grid index {i})"
                    )));
                }
            }
            for w in col.windows(2) {
                if w[1] < w[0] {
                    return Err(Error::InvariantViolation(format!(
                        "r^({k}) decreases from {} to {} along the grid",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn order_ratio_curve(n: usize, sigma2_grid: &[f64]) -> Result<RatioCurve> {
    check_dense(n)?;
    if n < 2 {
        return Err(Error::Config("order ratios need n >= 2".into()));
    }
    if sigma2_grid.is_empty() {
        return Err(Error::Config("σ² grid is empty".into()));
    }
    for &s in sigma2_grid {
        check_sigma2(s)?;
    }
    if sigma2_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("σ² grid must be ascending".into()));
    }
    let ratios = sigma2_grid
        .par_iter()
        .map(|&s| {
            let m = solution_matrix(n, s)?;
            let norms = row_norms_by_order(&m)?;
            Ok((1..n).map(|k| norms[k] / norms[k + 1]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(RatioCurve {
        n,
        sigma2: sigma2_grid.to_vec(),
        ratios,
    })
}

/// Per-mask Monte-Carlo statistics of the interaction noise `ΔI_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStats {
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample variance.
    pub variance: Vec<f64>,
}

impl NoiseStats {
    /// The predicted variance `2^|T| σ²`.
    pub fn expected_variance(&self, mask: usize) -> f64 {
        2f64.powi(mask.count_ones() as i32) * self.sigma * self.sigma
    }
}

const MC_CHUNK: usize = 4096;

/// Adds i.i.d. `N(0, σ²)` noise to every masked output and accumulates the
/// induced change of the Möbius coefficients `ΔI_T` over `trials` draws.
///
/// Trials are split into fixed chunks, each drawing from its own ChaCha8
/// stream of `seed`, so results do not depend on the thread count.
pub fn simulate_noisy_interaction(
    v: &MaskedOutputTable,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<NoiseStats> {
    if trials < 2 {
        return Err(Error::Config(format!("need at least 2 trials, got {trials}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("σ must be finite and >= 0, got {sigma}")));
    }
    let n = v.n();
    let len = 1usize << n;
    let base = {
        let mut b = v.values().values().to_vec();
        mobius_in_place(&mut b);
        b
    };
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let chunks = trials.div_ceil(MC_CHUNK);

    // (count, mean, M2) per mask for each chunk, merged in chunk order.
    let partials: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let mut mean = vec![0.0; len];
            let mut m2 = vec![0.0; len];
            let mut noisy = vec![0.0; len];
            for i in 0..count {
                for (x, &orig) in noisy.iter_mut().zip(v.values().values()) {
                    *x = orig + normal.sample(&mut rng);
                }
                mobius_in_place(&mut noisy);
                let k = (i + 1) as f64;
                for t in 0..len {
                    let d = noisy[t] - base[t];
                    let delta = d - mean[t];
                    mean[t] += delta / k;
                    m2[t] += delta * (d - mean[t]);
                }
            }
            (count as f64, mean, m2)
        })
        .collect();

    let mut total = 0.0;
    let mut mean = vec![0.0; len];
    let mut m2 = vec![0.0; len];
    for (count, cm, cm2) in partials {
        let new_total = total + count;
        for t in 0..len {
            let delta = cm[t] - mean[t];
            mean[t] += delta * count / new_total;
            m2[t] += cm2[t] + delta * delta * total * count / new_total;
        }
        total = new_total;
    }
    let variance = m2.iter().map(|m| m / (total - 1.0)).collect();
    Ok(NoiseStats {
        n,
        sigma,
        trials,
        mean,
        variance,
    })
}

/// One piecewise-constant stage of the σ² schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSegment {
    pub sigma2: f64,
    pub steps: usize,
    /// Initial step size; `None` uses `1 / lipschitz_bound(n, σ²)`.
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub sigma2: f64,
    pub learning_rate: f64,
    pub steps_run: usize,
    pub losses: Vec<f64>,
    pub weights: SubsetTable,
    pub distribution: OrderDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub initial_distribution: OrderDistribution,
    pub segments: Vec<SegmentRecord>,
}

impl TrajectoryRecord {
    pub fn final_weights(&self) -> Option<&SubsetTable> {
        self.segments.last().map(|s| &s.weights)
    }
}

/// Gradient descent on the noisy loss through a non-increasing σ² schedule.
///
/// Each step starts from the segment's learning rate and halves it until the
/// loss does not increase. A segment ends early once the gradient vanishes
/// to `1e-13` relative to the weights.
pub fn simulate_training_trajectory(
    w_init: &SubsetTable,
    w_star: &GroundTruthWeights,
    schedule: &[TrainingSegment],
) -> Result<TrajectoryRecord> {
    let n = w_star.n();
    w_init.ensure_same_n(w_star.table())?;
    check_dense(n)?;
    if schedule.is_empty() {
        return Err(Error::Config("empty training schedule".into()));
    }
    for seg in schedule {
        check_sigma2(seg.sigma2)?;
        if let Some(lr) = seg.learning_rate {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
            }
        }
    }
    if schedule.windows(2).any(|w| w[1].sigma2 > w[0].sigma2) {
        return Err(Error::Config("σ² schedule must be non-increasing".into()));
    }

    let y = w_star.outputs();
    let len = 1usize << n;
    let mut w = w_init.values().to_vec();
    let mut grad = vec![0.0; len];
    let mut candidate = vec![0.0; len];
    let initial_distribution = theo_distribution(w_init)?;
    let mut segments = Vec::with_capacity(schedule.len());

    for seg in schedule {
        let c = noise_variance_vector(n, seg.sigma2)?.c.into_values();
        let lr = seg
            .learning_rate
            .unwrap_or_else(|| 1.0 / lipschitz_bound(n, seg.sigma2));
        let mut loss = noisy_loss_raw(&w, &y, &c);
        let mut losses = vec![loss];
        let mut steps_run = 0;
        while steps_run < seg.steps {
            noisy_loss_gradient(&w, &y, &c, &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric("non-finite gradient in trajectory".into()));
            }
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let wmax = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if gmax <= 1e-13 * wmax.max(1.0) {
                break;
            }
            let mut step = lr;
            let accepted = loop {
                for ((cand, wi), g) in candidate.iter_mut().zip(&w).zip(&grad) {
                    *cand = wi - step * g;
                }
                let new_loss = noisy_loss_raw(&candidate, &y, &c);
                if new_loss <= loss {
                    break Some(new_loss);
                }
                step *= 0.5;
                if step < lr * 1e-12 {
                    break None;
                }
            };
            steps_run += 1;
            match accepted {
                Some(new_loss) => {
                    std::mem::swap(&mut w, &mut candidate);
                    loss = new_loss;
                    losses.push(loss);
                }
                None => break,
            }
        }
        let weights = SubsetTable::new(n, w.clone())?;
        segments.push(SegmentRecord {
            sigma2: seg.sigma2,
            learning_rate: lr,
            steps_run,
            losses,
            distribution: theo_distribution(&weights)?,
            weights,
        });
    }
    Ok(TrajectoryRecord {
        initial_distribution,
        segments,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn j_small_cases() {
        let j1 = build_j(1).unwrap().to_dense().unwrap();
        assert_eq!(j1, DMatrix::from_row_slice(2, 2, &[1., 0., 1., 1.]));
        let j2 = build_j(2).unwrap().to_dense().unwrap();
        assert_eq!(
            j2,
            DMatrix::from_row_slice(
                4,
                4,
                &[1., 0., 0., 0., 1., 1., 0., 0., 1., 0., 1., 0., 1., 1., 1., 1.]
            )
        );
        let j6 = build_j(6).unwrap().to_dense().unwrap();
        assert!(j6.column(0).iter().all(|&x| x == 1.0));
        assert!(matches!(build_j(13).unwrap().to_dense(), Err(Error::Capacity(_))));
        assert!(build_j(16).unwrap().get(0xffff, 0x00ff));
    }

    #[test]
    fn gram_matches_dense_product() {
        for n in 1..=5 {
            let j = build_j(n).unwrap();
            let d = j.to_dense().unwrap();
            assert_eq!(j.gram().unwrap(), d.transpose() * &d);
        }
    }

    #[test]
    fn noise_vector_examples() {
        let c = noise_variance_vector(2, 1.0).unwrap();
        assert_eq!(c.c.values(), &[1.0, 2.0, 2.0, 4.0]);
        assert!(noise_variance_vector(3, 0.0).unwrap().c.values().iter().all(|&x| x == 0.0));
        assert_eq!(noise_variance_vector(3, 0.25).unwrap().c.get(7), 2.0);
        assert!(matches!(noise_variance_vector(2, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn solution_matrix_n1() {
        let m = solution_matrix(1, 1.0).unwrap();
        // A = [[4,1],[1,5]], A⁻¹ = [[5,-1],[-1,4]]/19, A⁻¹ JᵀJ = [[9,4],[2,3]]/19.
        let want = [[9.0 / 19.0, 4.0 / 19.0], [2.0 / 19.0, 3.0 / 19.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(approx(m.m[(i, j)], want[i][j], 1e-14), "({i},{j})");
            }
        }
        let direct = solution_matrix_direct(1, 1.0).unwrap();
        assert!((direct - &m.m).abs().max() < 1e-14);
        let norms = row_norms_by_order(&m).unwrap();
        assert!(approx(norms[0], (81f64 + 16.0).sqrt() / 19.0, 1e-14));
        assert!(approx(norms[1], 13f64.sqrt() / 19.0, 1e-14));
    }

    #[test]
    fn zero_noise_is_identity() {
        for n in [2, 5, 8] {
            let m = solution_matrix(n, 0.0).unwrap();
            let eye = DMatrix::<f64>::identity(1 << n, 1 << n);
            assert!((&m.m - eye).abs().max() < 1e-8);
            assert!(m.order_norms.iter().all(|&x| approx(x, 1.0, 1e-12)));
        }
    }

    #[test]
    fn large_noise_shrinks_everything() {
        let m = solution_matrix(2, 1e6).unwrap();
        assert!(m.m.abs().max() < 1e-5);
    }

    #[test]
    fn optimal_weights_n1() {
        let w_star = GroundTruthWeights::new(SubsetTable::new(1, vec![0.0, 1.0]).unwrap());
        let w = solve_optimal_weights(&w_star, 1.0).unwrap();
        assert!(approx(w.get(0), 4.0 / 19.0, 1e-15));
        assert!(approx(w.get(1), 3.0 / 19.0, 1e-15));
        let zero = GroundTruthWeights::new(SubsetTable::zeros(3).unwrap());
        assert!(solve_optimal_weights(&zero, 0.3).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noisy_loss_examples() {
        let w_star = GroundTruthWeights::new(SubsetTable::new(2, vec![0.5, 1.0, -2.0, 0.25]).unwrap());
        assert_eq!(noisy_loss(w_star.table(), &w_star, 0.0).unwrap(), 0.0);
        let zero = SubsetTable::zeros(2).unwrap();
        let y = w_star.outputs();
        let want = y.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(approx(noisy_loss(&zero, &w_star, 0.7).unwrap(), want, 1e-14));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w_star = GroundTruthWeights::new(SubsetTable::new(3, vec![0.2, 1.0, -0.5, 0.3, 0.0, 0.7, -1.1, 0.4]).unwrap());
        let c = noise_variance_vector(3, 0.3).unwrap().c.into_values();
        let y = w_star.outputs();
        let w: Vec<f64> = (0..8).map(|t| 0.1 * t as f64 - 0.35).collect();
        let mut g = vec![0.0; 8];
        noisy_loss_gradient(&w, &y, &c, &mut g);
        let h = 1e-6;
        for t in 0..8 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[t] += h;
            wm[t] -= h;
            let fd = (noisy_loss_raw(&wp, &y, &c) - noisy_loss_raw(&wm, &y, &c)) / (2.0 * h);
            assert!(approx(fd, g[t], 1e-7), "t={t}: {fd} vs {}", g[t]);
        }
    }

    #[test]
    fn lipschitz_bound_dominates_spectrum() {
        for n in 1..=6 {
            let sigma2 = 0.1;
            let a = system_matrix(n, sigma2).unwrap() * (2.0 / (1 << n) as f64);
            let eig = a.symmetric_eigenvalues();
            let max = eig.iter().fold(0.0f64, |m, &x| m.max(x));
            assert!(max <= lipschitz_bound(n, sigma2) * (1.0 + 1e-12), "n={n}");
        }
    }

    #[test]
    fn ratio_examples() {
        let curve = order_ratio_curve(3, &[0.0]).unwrap();
        assert!(curve.ratios[0].iter().all(|&r| approx(r, 1.0, 1e-12)));
        let curve = order_ratio_curve(2, &[1.0]).unwrap();
        assert!(curve.ratios[0][0] > 1.0);
        assert!(matches!(order_ratio_curve(2, &[]), Err(Error::Config(_))));
        assert!(matches!(order_ratio_curve(1, &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn monte_carlo_is_deterministic_and_silent_without_noise() {
        let v = MaskedOutputTable::new("s", SubsetTable::from_fn(3, |m| m as f64).unwrap());
        let zero = simulate_noisy_interaction(&v, 0.0, 10, 3).unwrap();
        assert!(zero.variance.iter().chain(&zero.mean).all(|&x| x == 0.0));
        let a = simulate_noisy_interaction(&v, 0.5, 5000, 9).unwrap();
        let b = simulate_noisy_interaction(&v, 0.5, 5000, 9).unwrap();
        assert_eq!(a, b);
        assert!(matches!(simulate_noisy_interaction(&v, 0.5, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn trajectory_rejects_increasing_schedule() {
        let w = GroundTruthWeights::new(SubsetTable::zeros(2).unwrap());
        let seg = |s| TrainingSegment {
            sigma2: s,
            steps: 1,
            learning_rate: None,
        };
        let err = simulate_training_trajectory(w.table(), &w, &[seg(0.1), seg(1.0)]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn trajectory_at_minimizer_stays_put() {
        let w_star = GroundTruthWeights::new(SubsetTable::new(3, vec![0.0, 1.0, 0.5, -0.8, 0.3, 0.0, 0.2, 1.5]).unwrap());
        let w_hat = solve_optimal_weights(&w_star, 0.5).unwrap();
        let rec = simulate_training_trajectory(
            &w_hat,
            &w_star,
            &[TrainingSegment {
                sigma2: 0.5,
                steps: 100,
                learning_rate: None,
            }],
        )
        .unwrap();
        let seg = &rec.segments[0];
        let first = seg.losses[0];
        assert!(seg.losses.iter().all(|&l| approx(l, first, 1e-12)));
        let moved = seg
            .weights
            .values()
            .iter()
            .zip(w_hat.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(moved < 1e-10);
    }
}

//! Per-order strength of salient interactions and σ² fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{solve_optimal_weights, GroundTruthWeights};
use crate::error::{Error, Result};
use crate::interactions::{is_salient, InteractionVector, MaskedOutputTable};
use crate::subsets::SubsetTable;

/// Fraction of the mean output range used as the salience threshold.
pub const DEFAULT_TAU_FACTOR: f64 = 0.03;

/// Normalized strength of salient interactions per order `k = 1..=n`.
///
/// `Z` is the mean over orders of the un-normalized strengths, so a
/// non-empty distribution averages to one across orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDistribution {
    pub n: usize,
    /// `strength[k - 1]` is the normalized strength of order `k`.
    pub strength: Vec<f64>,
    pub tau: f64,
    pub z: f64,
    /// Set when no salient interaction was found (`Z = 0`).
    pub empty: bool,
}

impl OrderDistribution {
    pub fn strength_of(&self, k: usize) -> f64 {
        self.strength[k - 1]
    }

    /// `sum_k k I^(k) / sum_k I^(k)`, or `None` for an empty distribution.
    pub fn mean_order(&self) -> Option<f64> {
        let total: f64 = self.strength.iter().sum();
        if self.empty || total == 0.0 {
            return None;
        }
        let weighted: f64 = self
            .strength
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1) as f64 * s)
            .sum();
        Some(weighted / total)
    }
}

/// `τ = 0.03 · mean_x |v(x_N) − v(x_∅)|`.
pub fn salience_threshold(samples: &[MaskedOutputTable]) -> Result<f64> {
    salience_threshold_with(samples, DEFAULT_TAU_FACTOR)
}

pub fn salience_threshold_with(samples: &[MaskedOutputTable], factor: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("salience threshold needs at least one sample".into()));
    }
    if !(factor >= 0.0) {
        return Err(Error::Config(format!("τ factor must be >= 0, got {factor}")));
    }
    let mean = samples
        .iter()
        .map(|s| (s.v_full() - s.v_empty()).abs())
        .sum::<f64>()
        / samples.len() as f64;
    Ok(factor * mean)
}

/// Per-order strength of salient effects, averaged over samples and
/// normalized by its mean over orders.
///
/// Each element of `samples` holds the interaction vectors of one sample
/// (typically its AND and OR vectors); their salient masses are summed.
pub fn order_distribution<S: AsRef<[InteractionVector]>>(
    samples: &[S],
    tau: f64,
) -> Result<OrderDistribution> {
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("threshold must be >= 0, got {tau}")));
    }
    let n = samples
        .iter()
        .flat_map(|s| s.as_ref().first())
        .map(|v| v.n())
        .next()
        .ok_or_else(|| Error::Config("no interaction vectors given".into()))?;

    let mut mass = vec![0.0; n];
    for sample in samples {
        for vector in sample.as_ref() {
            if vector.n() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: vector.n(),
                });
            }
            for (s, e) in vector.iter_nonempty() {
                if is_salient(e, tau) {
                    mass[s.order() - 1] += e.abs();
                }
            }
        }
    }
    let count = samples.len() as f64;
    for m in &mut mass {
        *m /= count;
    }
    let z = mass.iter().sum::<f64>() / n as f64;
    let empty = z == 0.0;
    if !empty {
        for m in &mut mass {
            *m /= z;
        }
    }
    Ok(OrderDistribution {
        n,
        strength: mass,
        tau,
        z,
        empty,
    })
}

/// Distribution of the weights `ŵ` viewed as one sample of AND effects, with
/// `τ_theo = 0.03 |sum_S ŵ_S − ŵ_∅|`.
pub fn theo_distribution(w_hat: &SubsetTable) -> Result<OrderDistribution> {
    theo_distribution_with(w_hat, DEFAULT_TAU_FACTOR)
}

pub fn theo_distribution_with(w_hat: &SubsetTable, factor: f64) -> Result<OrderDistribution> {
    let w_empty = w_hat.get(0);
    let v_theo: f64 = w_hat.values().iter().sum();
    let tau = factor * (v_theo - w_empty).abs();
    let mut effects = w_hat.values().to_vec();
    effects[0] = 0.0;
    let vector = InteractionVector::new(
        crate::interactions::InteractionKind::And,
        SubsetTable::new(w_hat.n(), effects)?,
    )?;
    order_distribution(&[[vector]], tau)
}

/// Euclidean distance between two strength profiles.
pub fn distribution_distance(a: &OrderDistribution, b: &OrderDistribution) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::Dimension {
            expected: a.n,
            actual: b.n,
        });
    }
    Ok(a.strength
        .iter()
        .zip(&b.strength)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sigma2: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    pub sigma2_star: f64,
    pub distance: f64,
    pub curve: Vec<CurvePoint>,
}

/// Grid search for the σ² whose theoretical distribution best matches `real`.
/// Ties resolve toward the smaller σ².
pub fn fit_sigma(
    real: &OrderDistribution,
    w_star: &GroundTruthWeights,
    grid: &[f64],
) -> Result<SigmaFit> {
    if grid.is_empty() {
        return Err(Error::Config("σ² grid is empty".into()));
    }
    if real.n != w_star.n() {
        return Err(Error::Dimension {
            expected: w_star.n(),
            actual: real.n,
        });
    }
    let curve = grid
        .par_iter()
        .map(|&sigma2| {
            let w_hat = solve_optimal_weights(w_star, sigma2)?;
            let theo = theo_distribution(&w_hat)?;
            Ok(CurvePoint {
                sigma2,
                distance: distribution_distance(real, &theo)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = curve
        .iter()
        .min_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.sigma2.total_cmp(&b.sigma2))
        })
        .expect("non-empty grid");
    Ok(SigmaFit {
        sigma2_star: best.sigma2,
        distance: best.distance,
        curve,
    })
}

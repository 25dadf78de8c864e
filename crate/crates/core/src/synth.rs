//! Synthetic ground-truth interactions and converged outputs.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha),
//! with Gaussian draws from `rand_distr::Normal` and uniform draws from
//! `rand::Rng::random_range`. The same seed always yields the same tables.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::GroundTruthWeights;
use crate::error::{Error, Result};
use crate::interactions::MaskedOutputTable;
use crate::subsets::{binomial, check_n, zeta_transform, SubsetTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignPolicy {
    Random,
    Positive,
}

/// How many non-zero effects of one order to draw, and their magnitude range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSupport {
    pub order: usize,
    pub count: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub n: usize,
    pub orders: Vec<OrderSupport>,
    pub sign: SignPolicy,
    /// `w*_∅ = v(x_∅)`.
    #[serde(default)]
    pub empty_value: f64,
    pub seed: u64,
}

impl GroundTruthSpec {
    /// `count` effects at every order `1..=n` (clamped to `C(n, k)`), with
    /// magnitudes uniform in `[lo, hi]`.
    pub fn spread(n: usize, count: usize, lo: f64, hi: f64, sign: SignPolicy, seed: u64) -> Self {
        let orders = (1..=n)
            .map(|k| OrderSupport {
                order: k,
                count: count.min(binomial(n, k) as usize),
                min_magnitude: lo,
                max_magnitude: hi,
            })
            .collect();
        Self {
            n,
            orders,
            sign,
            empty_value: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_n(self.n)?;
        let mut seen = vec![false; self.n + 1];
        for o in &self.orders {
            if o.order == 0 || o.order > self.n {
                return Err(Error::Config(format!("order {} outside 1..={}", o.order, self.n)));
            }
            if std::mem::replace(&mut seen[o.order], true) {
                return Err(Error::Config(format!("order {} listed twice", o.order)));
            }
            let available = binomial(self.n, o.order);
            if o.count as u64 > available {
                return Err(Error::Config(format!(
                    "{} effects requested at order {} but only C({}, {}) = {available} subsets exist",
                    o.count, o.order, self.n, o.order
                )));
            }
            if !(o.min_magnitude > 0.0 && o.min_magnitude <= o.max_magnitude)
                || !o.max_magnitude.is_finite()
            {
                return Err(Error::Config(format!(
                    "magnitude range [{}, {}] at order {} must satisfy 0 < min <= max < inf",
                    o.min_magnitude, o.max_magnitude, o.order
                )));
            }
        }
        if !self.empty_value.is_finite() {
            return Err(Error::Config("empty_value must be finite".into()));
        }
        Ok(())
    }
}

pub fn generate_ground_truth(spec: &GroundTruthSpec) -> Result<GroundTruthWeights> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = vec![0.0; 1 << n];
    values[0] = spec.empty_value;

    let mut orders = spec.orders.clone();
    orders.sort_by_key(|o| o.order);
    for o in orders {
        let masks: Vec<usize> = (1..1usize << n)
            .filter(|m| m.count_ones() as usize == o.order)
            .collect();
        for i in index::sample(&mut rng, masks.len(), o.count) {
            let magnitude = if o.min_magnitude == o.max_magnitude {
                o.min_magnitude
            } else {
                rng.random_range(o.min_magnitude..=o.max_magnitude)
            };
            let sign = match spec.sign {
                SignPolicy::Positive => 1.0,
                SignPolicy::Random if rng.random::<bool>() => 1.0,
                SignPolicy::Random => -1.0,
            };
            values[masks[i]] = sign * magnitude;
        }
    }
    Ok(GroundTruthWeights::new(SubsetTable::new(n, values)?))
}

/// `y_S = v(x_∅) + sum_{∅ != T ⊆ S} w*_T` on every mask.
pub fn converged_outputs(w_star: &GroundTruthWeights) -> Result<MaskedOutputTable> {
    Ok(MaskedOutputTable::new("synthetic", zeta_transform(w_star.table())?))
}

/// Adds i.i.d. `N(0, σ²)` noise to each masked output.
pub fn add_output_noise(v: &MaskedOutputTable, sigma: f64, seed: u64) -> Result<MaskedOutputTable> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("σ must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = v.values().map(|x| x + normal.sample(&mut rng))?;
    Ok(MaskedOutputTable::new(v.sample_id(), noisy))
}

/// Random initial interactions with every `w_T ~ N(0, 1)` i.i.d., including
/// `w_∅`. Their per-order strength follows the binomial counts `C(n, k)`.
pub fn spindle_initialization(n: usize, seed: u64) -> Result<SubsetTable> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SubsetTable::from_fn(n, |_| rng.sample(StandardNormal))
}

/// `sum_{|T| = k} |w_T|` for `k = 0..=n`.
pub fn order_mass(w: &SubsetTable) -> Vec<f64> {
    let mut mass = vec![0.0; w.n() + 1];
    for (t, x) in w.values().iter().enumerate() {
        mass[t.count_ones() as usize] += x.abs();
    }
    mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::and_interactions;

    fn single(n: usize, order: usize, count: usize, seed: u64) -> GroundTruthSpec {
        GroundTruthSpec {
            n,
            orders: vec![OrderSupport {
                order,
                count,
                min_magnitude: 1.0,
                max_magnitude: 1.0,
            }],
            sign: SignPolicy::Positive,
            empty_value: 0.0,
            seed,
        }
    }

    #[test]
    fn one_second_order_effect() {
        let w = generate_ground_truth(&single(4, 2, 1, 17)).unwrap();
        let nonzero: Vec<_> = (0..16).filter(|&t| w.values()[t] != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].count_ones(), 2);
        assert_eq!(w.values()[nonzero[0]], 1.0);
    }

    #[test]
    fn empty_spec_is_zero() {
        let spec = GroundTruthSpec {
            orders: vec![],
            ..single(5, 1, 0, 0)
        };
        let w = generate_ground_truth(&spec).unwrap();
        assert!(w.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let spec = GroundTruthSpec::spread(6, 3, 0.5, 2.0, SignPolicy::Random, 99);
        assert_eq!(generate_ground_truth(&spec).unwrap(), generate_ground_truth(&spec).unwrap());
        let other = GroundTruthSpec { seed: 100, ..spec.clone() };
        assert_ne!(generate_ground_truth(&spec).unwrap(), generate_ground_truth(&other).unwrap());
    }

    #[test]
    fn counts_per_order_are_exact() {
        let spec = GroundTruthSpec::spread(6, 4, 0.5, 2.0, SignPolicy::Random, 5);
        let w = generate_ground_truth(&spec).unwrap();
        for k in 1..=6 {
            let count = (1..64usize)
                .filter(|t| t.count_ones() as usize == k && w.values()[*t] != 0.0)
                .count();
            assert_eq!(count, 4.min(binomial(6, k) as usize), "order {k}");
        }
    }

    #[test]
    fn over_requested_order_is_rejected() {
        assert!(matches!(
            generate_ground_truth(&single(4, 2, 7, 0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn converged_output_examples() {
        let w = GroundTruthWeights::new(SubsetTable::new(2, vec![0.0, 1.0, 0.0, 0.0]).unwrap());
        assert_eq!(converged_outputs(&w).unwrap().values().values(), &[0.0, 1.0, 0.0, 1.0]);

        let c = GroundTruthWeights::new(SubsetTable::new(2, vec![5.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(converged_outputs(&c).unwrap().values().values().iter().all(|&x| x == 5.0));
    }

    #[test]
    fn and_extraction_recovers_ground_truth() {
        let spec = GroundTruthSpec::spread(8, 10, 0.1, 3.0, SignPolicy::Random, 1);
        let w = generate_ground_truth(&spec).unwrap();
        let y = converged_outputs(&w).unwrap();
        let i = and_interactions(y.values()).unwrap();
        for t in 1..256 {
            assert!((i.effect(t) - w.values()[t]).abs() < 1e-10);
        }
    }

    #[test]
    fn output_noise_examples() {
        let v = converged_outputs(&generate_ground_truth(&GroundTruthSpec::spread(10, 5, 0.1, 1.0, SignPolicy::Random, 3)).unwrap()).unwrap();
        assert_eq!(add_output_noise(&v, 0.0, 1).unwrap(), v);
        let a = add_output_noise(&v, 1.0, 42).unwrap();
        assert_eq!(a, add_output_noise(&v, 1.0, 42).unwrap());

        let diffs: Vec<f64> = a
            .values()
            .values()
            .iter()
            .zip(v.values().values())
            .map(|(x, y)| x - y)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "sample variance {var}");
        assert!(matches!(add_output_noise(&v, -1.0, 0), Err(Error::Config(_))));
    }
}

//! AND and OR interaction extraction, reconstruction and salient sets.
//!
//! For a table of masked outputs `v(x_T)` the AND interactions are the
//! Möbius transform of `v_and`, and the OR interactions are the negated
//! Möbius transform of `v_or` read on complemented masks. The empty-set
//! entry of every [`InteractionVector`] is stored as `0`; the output on the
//! fully masked sample is carried separately as `v_empty`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsets::{
    flip_complement, mobius_transform, zeta_in_place, SubsetTable, VariableSet,
};

/// The outputs `v(x_S)` of one sample under all `2^n` maskings.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedOutputTable {
    sample_id: String,
    v: SubsetTable,
}

impl MaskedOutputTable {
    pub fn new(sample_id: impl Into<String>, v: SubsetTable) -> Self {
        Self {
            sample_id: sample_id.into(),
            v,
        }
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn values(&self) -> &SubsetTable {
        &self.v
    }

    pub fn into_values(self) -> SubsetTable {
        self.v
    }

    /// `v(x_∅)`, the output with every variable masked.
    pub fn v_empty(&self) -> f64 {
        self.v.get(0)
    }

    /// `v(x_N)`, the output on the unmasked sample.
    pub fn v_full(&self) -> f64 {
        self.v.full_value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    And,
    Or,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::And => "and",
            InteractionKind::Or => "or",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(InteractionKind::And),
            "or" => Ok(InteractionKind::Or),
            other => Err(Error::InvalidData(format!(
                "unknown interaction kind {other:?}"
            ))),
        }
    }
}

/// Interaction effects `I(S|x)` of one kind, indexed by mask.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionVector {
    kind: InteractionKind,
    effects: SubsetTable,
}

impl InteractionVector {
    /// Wraps `effects`; the entry at the empty set must be zero.
    pub fn new(kind: InteractionKind, effects: SubsetTable) -> Result<Self> {
        if effects.get(0) != 0.0 {
            return Err(Error::InvalidData(
                "interaction vectors carry I(∅) = 0".into(),
            ));
        }
        Ok(Self { kind, effects })
    }

    fn with_empty_zeroed(kind: InteractionKind, effects: SubsetTable) -> Result<Self> {
        let mut values = effects.into_values();
        values[0] = 0.0;
        let n = values.len().trailing_zeros() as usize;
        Self::new(kind, SubsetTable::new(n, values)?)
    }

    pub fn kind(&self) -> InteractionKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.effects.n()
    }

    pub fn effects(&self) -> &SubsetTable {
        &self.effects
    }

    pub fn effect(&self, mask: usize) -> f64 {
        self.effects.get(mask)
    }

    /// `(S, I(S))` for every non-empty `S`.
    pub fn iter_nonempty(&self) -> impl Iterator<Item = (VariableSet, f64)> + '_ {
        let n = self.n();
        self.effects
            .values()
            .iter()
            .enumerate()
            .skip(1)
            .map(move |(mask, &e)| (VariableSet::new(mask, n).expect("mask in range"), e))
    }

    /// `sum_S |I(S)|`.
    pub fn l1_norm(&self) -> f64 {
        self.effects.values().iter().map(|e| e.abs()).sum()
    }
}

/// `I_and(S) = sum_{T subset S} (-1)^{|S|-|T|} v_and(x_T)` for `S != ∅`.
pub fn and_interactions(v_and: &SubsetTable) -> Result<InteractionVector> {
    InteractionVector::with_empty_zeroed(InteractionKind::And, mobius_transform(v_and)?)
}

/// `I_or(S) = -sum_{T subset S} (-1)^{|S|-|T|} v_or(x_{N \ T})` for `S != ∅`.
pub fn or_interactions(v_or: &SubsetTable) -> Result<InteractionVector> {
    let negated = mobius_transform(&flip_complement(v_or))?.map(|x| -x)?;
    InteractionVector::with_empty_zeroed(InteractionKind::Or, negated)
}

/// Both interaction vectors of one sample together with `v(x_∅)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AndOrInteractions {
    pub and: InteractionVector,
    pub or: InteractionVector,
    pub v_empty: f64,
}

impl AndOrInteractions {
    /// Extracts both kinds from a split `v = v_and + v_or`.
    pub fn from_split(v_and: &SubsetTable, v_or: &SubsetTable) -> Result<Self> {
        v_and.ensure_same_n(v_or)?;
        Ok(Self {
            and: and_interactions(v_and)?,
            or: or_interactions(v_or)?,
            v_empty: v_and.get(0) + v_or.get(0),
        })
    }

    /// Outputs predicted by the interactions on every mask, using the
    /// superset sweep for the OR part.
    pub fn reconstruct_all(&self) -> Result<SubsetTable> {
        let n = self.and.n();
        if self.or.n() != n {
            return Err(Error::dimension(n, self.or.n()));
        }
        let mut and_part = self.and.effects().values().to_vec();
        zeta_in_place(&mut and_part);
        // Sum of I_or(T) over T disjoint from S is the zeta sum at N \ S.
        let mut or_disjoint = self.or.effects().values().to_vec();
        zeta_in_place(&mut or_disjoint);
        let or_total = or_disjoint[or_disjoint.len() - 1];
        let full = or_disjoint.len() - 1;
        SubsetTable::from_fn(n, |s| {
            self.v_empty + and_part[s] + (or_total - or_disjoint[full ^ s])
        })
    }
}

/// `v(x_∅) + sum_{∅ != T subset S} I_and(T) + sum_{T ∩ S != ∅} I_or(T)`.
pub fn reconstruct_output(
    i_and: &InteractionVector,
    i_or: &InteractionVector,
    v_empty: f64,
    s: VariableSet,
) -> Result<f64> {
    let n = i_and.n();
    if i_or.n() != n {
        return Err(Error::dimension(n, i_or.n()));
    }
    if s.n() != n {
        return Err(Error::dimension(n, s.n()));
    }
    let s = s.bits();
    let mut out = v_empty;
    for t in 1..1usize << n {
        if t & s == t {
            out += i_and.effect(t);
        }
        if t & s != 0 {
            out += i_or.effect(t);
        }
    }
    Ok(out)
}

/// The salient interactions `Ω = {S : |I(S)| >= τ}` of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SalientSet {
    pub tau: f64,
    pub kind: InteractionKind,
    pub members: Vec<(VariableSet, f64)>,
    /// `counts_by_order[k]` is the number of members of order `k`, `k = 0..=n`.
    pub counts_by_order: Vec<usize>,
}

impl SalientSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// True when `effect` counts as salient under threshold `tau`. Exact zeros
/// never count, so `tau = 0` selects the non-zero effects.
pub fn is_salient(effect: f64, tau: f64) -> bool {
    let a = effect.abs();
    a >= tau && a > 0.0
}

pub fn salient_set(i: &InteractionVector, tau: f64) -> Result<SalientSet> {
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("threshold must be >= 0, got {tau}")));
    }
    let mut counts_by_order = vec![0; i.n() + 1];
    let members: Vec<_> = i
        .iter_nonempty()
        .filter(|&(_, e)| is_salient(e, tau))
        .inspect(|(s, _)| counts_by_order[s.order()] += 1)
        .collect();
    Ok(SalientSet {
        tau,
        kind: i.kind(),
        members,
        counts_by_order,
    })
}

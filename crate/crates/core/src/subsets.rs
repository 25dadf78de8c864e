//! Bitmask subsets of `N = {0, .., n-1}` and the subset-lattice transforms.
//!
//! Every table in the crate is indexed by bitmask in ascending order: bit `i`
//! set means variable `i` is present. The transforms here are the
//! `O(n 2^n)` lattice sweeps; everything else (interaction extraction, the
//! triggering matrix, the sparsity gradients) is expressed through them.

use std::fmt;

use crate::error::{Error, Result};

/// Hard cap on the number of variables a [`SubsetTable`] may describe.
pub const MAX_VARIABLES: usize = 16;

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_VARIABLES {
        return Err(Error::Config(format!(
            "variable count {n} outside [1, {MAX_VARIABLES}]"
        )));
    }
    Ok(())
}

/// A subset `S` of `N`, stored as a bitmask together with `n = |N|`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableSet {
    bits: u32,
    n: u8,
}

impl VariableSet {
    pub fn new(bits: usize, n: usize) -> Result<Self> {
        check_n(n)?;
        if bits >= 1 << n {
            return Err(Error::InvalidData(format!(
                "mask {bits} does not fit in {n} variables"
            )));
        }
        Ok(Self {
            bits: bits as u32,
            n: n as u8,
        })
    }

    /// Builds a set from variable indices.
    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        check_n(n)?;
        let mut bits = 0usize;
        for &i in indices {
            if i >= n {
                return Err(Error::InvalidData(format!(
                    "variable {i} out of range for n = {n}"
                )));
            }
            bits |= 1 << i;
        }
        Self::new(bits, n)
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    pub fn full(n: usize) -> Result<Self> {
        check_n(n)?;
        Self::new((1 << n) - 1, n)
    }

    pub fn bits(self) -> usize {
        self.bits as usize
    }

    pub fn n(self) -> usize {
        self.n as usize
    }

    /// `|S|`.
    pub fn order(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < self.n() && self.bits & (1 << i) != 0
    }

    pub fn is_subset_of(self, other: VariableSet) -> bool {
        self.bits & other.bits == self.bits
    }

    pub fn intersects(self, other: VariableSet) -> bool {
        self.bits & other.bits != 0
    }

    /// `N \ S`.
    pub fn complement(self) -> Self {
        Self {
            bits: !self.bits & ((1u32 << self.n) - 1),
            n: self.n,
        }
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.bits;
        (0..self.n as usize).filter(move |i| bits & (1 << i) != 0)
    }
}

impl fmt::Debug for VariableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for VariableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// All `2^n` subsets in ascending bitmask order.
pub fn enumerate_subsets(n: usize) -> Result<Vec<VariableSet>> {
    check_n(n)?;
    Ok((0..1usize << n)
        .map(|bits| VariableSet {
            bits: bits as u32,
            n: n as u8,
        })
        .collect())
}

/// Binomial coefficient `C(n, k)` as an exact integer.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// A dense map `S -> f64` over all `2^n` subsets.
#[derive(Clone, PartialEq)]
pub struct SubsetTable {
    n: usize,
    values: Vec<f64>,
}

impl fmt::Debug for SubsetTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubsetTable")
            .field("n", &self.n)
            .field("values", &self.values)
            .finish()
    }
}

impl SubsetTable {
    /// Wraps `values`, which must hold exactly `2^n` finite entries.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if values.len() != 1 << n {
            return Err(Error::dimension(1 << n, values.len()));
        }
        if let Some(mask) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at mask {mask}"
            )));
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self {
            n,
            values: vec![0.0; 1 << n],
        })
    }

    /// Tabulates `f(mask)` over every mask.
    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        check_n(n)?;
        Self::new(n, (0..1usize << n).map(f).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    pub fn at(&self, set: VariableSet) -> f64 {
        self.values[set.bits()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at the full set `N`.
    pub fn full_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn ensure_same_n(&self, other: &SubsetTable) -> Result<()> {
        if self.n != other.n {
            return Err(Error::dimension(self.n, other.n));
        }
        Ok(())
    }

    /// Entrywise `f(self[S], other[S])`.
    pub fn zip_with(
        &self,
        other: &SubsetTable,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<SubsetTable> {
        self.ensure_same_n(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        SubsetTable::new(self.n, values)
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<SubsetTable> {
        SubsetTable::new(self.n, self.values.iter().copied().map(f).collect())
    }
}

fn sweep(values: &mut [f64], op: impl Fn(&mut f64, f64), superset: bool) {
    let len = values.len();
    debug_assert!(len.is_power_of_two());
    let mut bit = 1;
    while bit < len {
        for block in values.chunks_exact_mut(bit * 2) {
            let (lo, hi) = block.split_at_mut(bit);
            if superset {
                for (l, h) in lo.iter_mut().zip(hi.iter()) {
                    op(l, *h);
                }
            } else {
                for (l, h) in lo.iter().zip(hi.iter_mut()) {
                    op(h, *l);
                }
            }
        }
        bit <<= 1;
    }
}

/// In place `g(S) = sum_{T subset S} f(T)`.
pub fn zeta_in_place(values: &mut [f64]) {
    sweep(values, |x, y| *x += y, false);
}

/// In place `f(S) = sum_{T subset S} (-1)^{|S|-|T|} g(T)`.
pub fn mobius_in_place(values: &mut [f64]) {
    sweep(values, |x, y| *x -= y, false);
}

/// In place `g(S) = sum_{T superset S} f(T)`; the transpose of the zeta sweep.
pub fn superset_zeta_in_place(values: &mut [f64]) {
    sweep(values, |x, y| *x += y, true);
}

/// In place `f(S) = sum_{T superset S} (-1)^{|T|-|S|} g(T)`; the transpose of
/// the Möbius sweep.
pub fn superset_mobius_in_place(values: &mut [f64]) {
    sweep(values, |x, y| *x -= y, true);
}

fn transformed(f: &SubsetTable, op: fn(&mut [f64])) -> Result<SubsetTable> {
    let mut values = f.values.clone();
    op(&mut values);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "transform overflowed to a non-finite value".into(),
        ));
    }
    Ok(SubsetTable { n: f.n, values })
}

/// `g(S) = sum_{T subset S} f(T)`.
pub fn zeta_transform(f: &SubsetTable) -> Result<SubsetTable> {
    transformed(f, zeta_in_place)
}

/// Inverse of [`zeta_transform`].
pub fn mobius_transform(g: &SubsetTable) -> Result<SubsetTable> {
    transformed(g, mobius_in_place)
}

/// `g(S) = f(N \ S)`.
pub fn flip_complement(f: &SubsetTable) -> SubsetTable {
    let mut values = f.values.clone();
    values.reverse();
    SubsetTable { n: f.n, values }
}

//! Sparse real vectors indexed by node id.

use rustc_hash::FxHashMap;

use crate::graph::{Graph, NodeId};

/// Map from node id to value. Absent ids are exactly zero and no stored
/// entry is ever exactly zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: FxHashMap<NodeId, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            entries: FxHashMap::with_capacity_and_hasher(cap, Default::default()),
        }
    }

    /// `value * e_i`.
    pub fn unit(i: NodeId, value: f64) -> Self {
        let mut v = Self::new();
        v.set(i, value);
        v
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let mut v = Self::new();
        for (i, &x) in values.iter().enumerate() {
            v.set(i as NodeId, x);
        }
        v
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &x) in &self.entries {
            out[i as usize] = x;
        }
        out
    }

    #[inline]
    pub fn get(&self, i: NodeId) -> f64 {
        self.entries.get(&i).copied().unwrap_or(0.0)
    }

    /// Stores `value`, removing the entry when it is exactly zero.
    #[inline]
    pub fn set(&mut self, i: NodeId, value: f64) {
        if value == 0.0 {
            self.entries.remove(&i);
        } else {
            self.entries.insert(i, value);
        }
    }

    /// Adds `delta` to entry `i`; returns `(old, new)`.
    #[inline]
    pub fn add(&mut self, i: NodeId, delta: f64) -> (f64, f64) {
        use std::collections::hash_map::Entry;
        match self.entries.entry(i) {
            Entry::Occupied(mut e) => {
                let old = *e.get();
                let new = old + delta;
                if new == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = new;
                }
                (old, new)
            }
            Entry::Vacant(e) => {
                if delta != 0.0 {
                    e.insert(delta);
                }
                (0.0, delta)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.entries.iter().map(|(&i, &x)| (i, x))
    }

    /// Entries sorted by node id.
    pub fn sorted_entries(&self) -> Vec<(NodeId, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|&(i, _)| i);
        v
    }

    pub fn support(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn l1(&self) -> f64 {
        self.entries.values().map(|x| x.abs()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.entries.values().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.entries.values().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `‖D^{1/2} x‖₁`.
    pub fn scaled_l1(&self, g: &Graph) -> f64 {
        self.iter().map(|(i, x)| g.sqrt_degree(i) * x.abs()).sum()
    }

    /// `‖D^{-1/2} x‖∞`.
    pub fn inv_scaled_linf(&self, g: &Graph) -> f64 {
        self.iter()
            .fold(0.0, |m, (i, x)| m.max(x.abs() / g.sqrt_degree(i)))
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SparseVector) {
        for (i, x) in other.iter() {
            self.add(i, a * x);
        }
    }

    /// `self - other` as a new vector.
    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `D^{1/2} x`, mapping a solution of the symmetric system back to PPR
    /// scale.
    pub fn scale_by_sqrt_degree(&self, g: &Graph) -> SparseVector {
        let mut out = SparseVector::with_capacity(self.len());
        for (i, x) in self.iter() {
            out.set(i, x * g.sqrt_degree(i));
        }
        out
    }

    /// `D^{-1/2} x`.
    pub fn scale_by_inv_sqrt_degree(&self, g: &Graph) -> SparseVector {
        let mut out = SparseVector::with_capacity(self.len());
        for (i, x) in self.iter() {
            out.set(i, x / g.sqrt_degree(i));
        }
        out
    }

    /// Largest absolute entry-wise difference.
    pub fn linf_distance(&self, other: &SparseVector) -> f64 {
        let a = self
            .iter()
            .fold(0.0f64, |m, (i, x)| m.max((x - other.get(i)).abs()));
        other
            .iter()
            .filter(|(i, _)| !self.entries.contains_key(i))
            .fold(a, |m, (_, x)| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|x| x.is_finite())
    }
}

impl FromIterator<(NodeId, f64)> for SparseVector {
    fn from_iter<I: IntoIterator<Item = (NodeId, f64)>>(iter: I) -> Self {
        let mut v = SparseVector::new();
        for (i, x) in iter {
            v.add(i, x);
        }
        v
    }
}

/// Neumaier-compensated running sum; keeps incrementally maintained norms
/// close to their from-scratch values over millions of updates.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn new(x: f64) -> Self {
        Self { sum: x, comp: 0.0 }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

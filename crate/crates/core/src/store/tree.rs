//! Flat-array segment trees over leaf values.
//!
//! Layout: `2 * width - 1` slots, root at 0, children of `i` at `2i + 1` and
//! `2i + 2`, leaves at `width - 1 ..`. `width` is the requested capacity
//! rounded up to a power of two; unused leaves hold the operator identity.

use std::marker::PhantomData;

pub trait Combine {
    const IDENTITY: f64;
    fn combine(a: f64, b: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Sum;

impl Combine for Sum {
    const IDENTITY: f64 = 0.0;
    #[inline]
    fn combine(a: f64, b: f64) -> f64 {
        a + b
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Min;

impl Combine for Min {
    const IDENTITY: f64 = f64::INFINITY;
    #[inline]
    fn combine(a: f64, b: f64) -> f64 {
        a.min(b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Max;

impl Combine for Max {
    const IDENTITY: f64 = f64::NEG_INFINITY;
    #[inline]
    fn combine(a: f64, b: f64) -> f64 {
        a.max(b)
    }
}

#[derive(Debug, Clone)]
pub struct SegmentTree<C: Combine> {
    width: usize,
    nodes: Vec<f64>,
    _op: PhantomData<C>,
}

impl<C: Combine> SegmentTree<C> {
    pub fn new(capacity: usize) -> Self {
        let width = capacity.max(1).next_power_of_two();
        Self {
            width,
            nodes: vec![C::IDENTITY; 2 * width - 1],
            _op: PhantomData,
        }
    }

    /// Number of leaves (a power of two).
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn root(&self) -> f64 {
        self.nodes[0]
    }

    #[inline]
    pub fn leaf(&self, index: usize) -> f64 {
        self.nodes[self.width - 1 + index]
    }

    /// Sets a leaf and recomputes every ancestor from its two children, so
    /// internal nodes are exact combinations rather than accumulated deltas.
    pub fn set(&mut self, index: usize, value: f64) {
        debug_assert!(index < self.width);
        let mut node = self.width - 1 + index;
        self.nodes[node] = value;
        while node > 0 {
            node = (node - 1) / 2;
            self.nodes[node] = C::combine(self.nodes[2 * node + 1], self.nodes[2 * node + 2]);
        }
    }

    pub fn clear(&mut self, index: usize) {
        self.set(index, C::IDENTITY);
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

impl SegmentTree<Sum> {
    /// Prefix-sum descent: the leaf whose cumulative interval contains `mass`.
    ///
    /// A right subtree holding zero mass is never entered, so the result is
    /// always a leaf with positive value when the root is positive.
    pub fn find_prefix(&self, mass: f64) -> usize {
        let mut node = 0;
        let mut remaining = mass.max(0.0);
        while node < self.width - 1 {
            let left = 2 * node + 1;
            let right = left + 1;
            if remaining < self.nodes[left] || self.nodes[right] <= 0.0 {
                node = left;
            } else {
                remaining -= self.nodes[left];
                node = right;
            }
        }
        node - (self.width - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_rounds_up() {
        assert_eq!(SegmentTree::<Sum>::new(5).width(), 8);
        assert_eq!(SegmentTree::<Sum>::new(8).width(), 8);
        assert_eq!(SegmentTree::<Sum>::new(1).width(), 1);
    }

    #[test]
    fn sum_min_max_roots() {
        let mut s = SegmentTree::<Sum>::new(4);
        let mut lo = SegmentTree::<Min>::new(4);
        let mut hi = SegmentTree::<Max>::new(4);
        for (i, v) in [3.0, 1.0, 4.0, 1.5].into_iter().enumerate() {
            s.set(i, v);
            lo.set(i, v);
            hi.set(i, v);
        }
        assert_eq!(s.root(), 9.5);
        assert_eq!(lo.root(), 1.0);
        assert_eq!(hi.root(), 4.0);
        lo.clear(1);
        assert_eq!(lo.root(), 1.5);
    }

    #[test]
    fn single_leaf_tree() {
        let mut s = SegmentTree::<Sum>::new(1);
        s.set(0, 2.0);
        assert_eq!(s.root(), 2.0);
        assert_eq!(s.find_prefix(1.99), 0);
    }

    #[test]
    fn descent_skips_empty_right_subtrees() {
        let mut s = SegmentTree::<Sum>::new(8);
        s.set(0, 1.0);
        s.set(1, 1.0);
        // mass at (or numerically past) the root must not land on an empty leaf
        assert_eq!(s.find_prefix(2.0), 1);
        assert_eq!(s.find_prefix(5.0), 1);
    }
}

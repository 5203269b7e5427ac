//! Replay storage: the prioritized buffer with its segment trees and the
//! mirror buffer used for uniform sampling.
//!
//! Both buffers are rings of the same capacity and are always pushed in
//! lockstep through [`StorePair`], so slot `i` holds the same transition in
//! each. Every push is stamped with a monotonically increasing serial; a
//! [`SlotId`] carries both the slot and the serial so handles that outlive an
//! overwrite are detected instead of silently touching a newer transition.

mod tree;

use std::fmt;
use std::sync::Arc;

pub use tree::{Combine, Max, Min, SegmentTree, Sum};

use crate::error::{Error, Result};

/// One `(s, a, r, γ-flag, s')` tuple plus its replay priority.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// `false` at a true terminal, where the bootstrap term is dropped.
    pub discount_active: bool,
    pub next_state: Vec<f64>,
    /// Raw priority `p_i`, assigned by the store on push.
    pub priority: f64,
    /// Episode the transition was generated in; encouragement never crosses it.
    pub episode: u64,
}

impl Transition {
    pub fn new(
        state: Vec<f64>,
        action: usize,
        reward: f64,
        discount_active: bool,
        next_state: Vec<f64>,
        episode: u64,
    ) -> Self {
        Self {
            state,
            action,
            reward,
            discount_active,
            next_state,
            priority: 0.0,
            episode,
        }
    }
}

/// Handle to a stored transition: ring slot plus the serial of the push that
/// filled it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotId {
    pub slot: usize,
    pub serial: u64,
}

/// Maps a raw priority onto the value stored in the sum tree.
pub trait PriorityTransform: Send + Sync + fmt::Debug {
    fn apply(&self, priority: f64) -> f64;
}

/// Stores raw priorities untransformed.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl PriorityTransform for Identity {
    fn apply(&self, priority: f64) -> f64 {
        priority
    }
}

fn check_dims(t: &Transition, obs_dim: usize) -> Result<()> {
    if t.state.len() != obs_dim {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: obs_dim,
            actual: t.state.len(),
        });
    }
    if t.next_state.len() != obs_dim {
        return Err(Error::DimensionMismatch {
            what: "next_state",
            expected: obs_dim,
            actual: t.next_state.len(),
        });
    }
    Ok(())
}

/// Ring buffer `D` with a sum tree over transformed priorities, a min tree
/// over the same values (for weight normalization) and a max tree over raw
/// priorities (for the entry priority of new pushes).
#[derive(Debug, Clone)]
pub struct PrioritizedStore {
    capacity: usize,
    obs_dim: usize,
    epsilon: f64,
    transform: Arc<dyn PriorityTransform>,
    entries: Vec<Transition>,
    serials: Vec<u64>,
    sums: SegmentTree<Sum>,
    mins: SegmentTree<Min>,
    maxes: SegmentTree<Max>,
    write_cursor: usize,
    count: usize,
    next_serial: u64,
}

impl PrioritizedStore {
    pub fn new(
        capacity: usize,
        obs_dim: usize,
        epsilon: f64,
        transform: Arc<dyn PriorityTransform>,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("capacity", "must be positive"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::config("priority_epsilon", "must be a positive finite real"));
        }
        Ok(Self {
            capacity,
            obs_dim,
            epsilon,
            transform,
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            serials: Vec::with_capacity(capacity.min(1 << 16)),
            sums: SegmentTree::new(capacity),
            mins: SegmentTree::new(capacity),
            maxes: SegmentTree::new(capacity),
            write_cursor: 0,
            count: 0,
            next_serial: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sum of transformed priorities over stored entries.
    pub fn total(&self) -> f64 {
        self.sums.root()
    }

    /// Smallest transformed priority among stored entries.
    pub fn min_transformed(&self) -> Option<f64> {
        (self.count > 0).then(|| self.mins.root())
    }

    /// Largest raw priority among stored entries.
    pub fn max_priority(&self) -> Option<f64> {
        (self.count > 0).then(|| self.maxes.root())
    }

    pub fn transformed(&self, slot: usize) -> f64 {
        self.sums.leaf(slot)
    }

    pub fn sum_tree(&self) -> &SegmentTree<Sum> {
        &self.sums
    }

    /// Oldest serial still live in the ring.
    fn oldest_serial(&self) -> u64 {
        self.next_serial - self.count as u64
    }

    pub fn push(&mut self, mut t: Transition) -> Result<SlotId> {
        check_dims(&t, self.obs_dim)?;
        t.priority = self.max_priority().unwrap_or(1.0);
        let slot = self.write_cursor;
        let serial = self.next_serial;
        let leaf = self.transform.apply(t.priority);
        if slot < self.entries.len() {
            self.entries[slot] = t;
            self.serials[slot] = serial;
        } else {
            self.entries.push(t);
            self.serials.push(serial);
        }
        self.set_leaves(slot, leaf);
        self.write_cursor = (slot + 1) % self.capacity;
        self.count = (self.count + 1).min(self.capacity);
        self.next_serial += 1;
        Ok(SlotId { slot, serial })
    }

    fn set_leaves(&mut self, slot: usize, transformed: f64) {
        let raw = self.entries[slot].priority;
        self.sums.set(slot, transformed);
        self.mins.set(slot, transformed);
        self.maxes.set(slot, raw);
    }

    /// Rejects handles whose slot was overwritten or never filled.
    pub fn validate(&self, id: SlotId) -> Result<()> {
        let stored = self.serials.get(id.slot).copied();
        if id.slot >= self.count || stored != Some(id.serial) {
            return Err(Error::StaleIndex {
                slot: id.slot,
                requested: id.serial,
                stored,
            });
        }
        Ok(())
    }

    pub fn get(&self, id: SlotId) -> Result<&Transition> {
        self.validate(id)?;
        Ok(&self.entries[id.slot])
    }

    /// Live handle for a raw slot index.
    pub fn id_at(&self, slot: usize) -> Option<SlotId> {
        (slot < self.count).then(|| SlotId {
            slot,
            serial: self.serials[slot],
        })
    }

    pub fn priority(&self, id: SlotId) -> Result<f64> {
        Ok(self.get(id)?.priority)
    }

    /// Sets `p_i = max(new_priority, ε)` and refreshes all three trees.
    pub fn update_priority(&mut self, id: SlotId, new_priority: f64) -> Result<()> {
        self.validate(id)?;
        if !new_priority.is_finite() {
            return Err(Error::NonFinite {
                what: "priority",
                step: id.serial,
                detail: format!("{new_priority}"),
            });
        }
        let p = new_priority.max(self.epsilon);
        self.entries[id.slot].priority = p;
        let leaf = self.transform.apply(p);
        self.set_leaves(id.slot, leaf);
        Ok(())
    }

    /// The slot whose cumulative transformed-priority interval contains
    /// `u * total()`.
    pub fn sample_mass(&self, u: f64) -> Result<SlotId> {
        if self.count == 0 {
            return Err(Error::EmptyStore);
        }
        let total = self.total();
        assert!(total > 0.0, "sum tree root must be positive once non-empty");
        let slot = self.sums.find_prefix(u * total).min(self.count - 1);
        Ok(SlotId {
            slot,
            serial: self.serials[slot],
        })
    }

    /// The transition pushed `steps` pushes before `id`, if still live.
    pub fn predecessor(&self, id: SlotId, steps: usize) -> Option<SlotId> {
        let serial = id.serial.checked_sub(steps as u64)?;
        if serial < self.oldest_serial() || steps >= self.capacity {
            return None;
        }
        let slot = (id.slot + self.capacity - steps) % self.capacity;
        debug_assert_eq!(self.serials[slot], serial);
        Some(SlotId { slot, serial })
    }

    /// Iterates over live `(handle, transition)` pairs in slot order.
    pub fn iter(&self) -> impl Iterator<Item = (SlotId, &Transition)> {
        self.entries[..self.count]
            .iter()
            .zip(&self.serials)
            .enumerate()
            .map(|(slot, (t, &serial))| (SlotId { slot, serial }, t))
    }

    pub fn priorities(&self) -> Vec<f64> {
        self.entries[..self.count].iter().map(|t| t.priority).collect()
    }

    /// Checks every internal node against its children. Test support.
    pub fn tree_consistent(&self, tol: f64) -> bool {
        let nodes = self.sums.nodes();
        let internal = self.sums.width() - 1;
        (0..internal).all(|i| (nodes[i] - (nodes[2 * i + 1] + nodes[2 * i + 2])).abs() <= tol)
    }
}

/// Ring buffer `D*` holding the same transitions as the prioritized store,
/// sampled uniformly.
#[derive(Debug, Clone)]
pub struct MirrorStore {
    capacity: usize,
    entries: Vec<Transition>,
    write_cursor: usize,
    count: usize,
}

impl MirrorStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            write_cursor: 0,
            count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> usize {
        let slot = self.write_cursor;
        if slot < self.entries.len() {
            self.entries[slot] = t;
        } else {
            self.entries.push(t);
        }
        self.write_cursor = (slot + 1) % self.capacity;
        self.count = (self.count + 1).min(self.capacity);
        slot
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.entries[..self.count].get(slot)
    }

    /// `floor(u * count)`, clamped into range.
    pub fn sample_uniform_index(&self, u: f64) -> Result<usize> {
        if self.count == 0 {
            return Err(Error::EmptyStore);
        }
        let idx = (u * self.count as f64).floor() as usize;
        Ok(idx.min(self.count - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries[..self.count].iter()
    }
}

/// The prioritized store and its mirror, pushed together.
#[derive(Debug, Clone)]
pub struct StorePair {
    pub main: PrioritizedStore,
    pub mirror: MirrorStore,
}

impl StorePair {
    pub fn new(
        capacity: usize,
        obs_dim: usize,
        epsilon: f64,
        transform: Arc<dyn PriorityTransform>,
    ) -> Result<Self> {
        Ok(Self {
            main: PrioritizedStore::new(capacity, obs_dim, epsilon, transform)?,
            mirror: MirrorStore::new(capacity),
        })
    }

    pub fn push(&mut self, t: Transition) -> Result<SlotId> {
        let id = self.main.push(t)?;
        let stored = self.main.entries[id.slot].clone();
        let mirror_slot = self.mirror.push(stored);
        debug_assert_eq!(mirror_slot, id.slot);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }
}

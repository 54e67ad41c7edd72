// SPDX-License-Identifier: MIT OR Apache-2.0

//! Double heap for order statistics under single-element replacement.
//!
//! A max-ordered tree holds the `r - 1` smallest elements, a min-ordered tree
//! holds the elements above the root, and the shared root is the `r`-th order
//! statistic. Replacing one element walks at most one branch of each tree.
//!
//! Elements carry an integer id so that a replacement targets one specific
//! occurrence even when values tie. Ids are mapped to tree positions through a
//! slot table indexed by `id % capacity`; every live id must be distinct
//! modulo the capacity (true for sliding windows of length `capacity` and for
//! ids `< capacity`).

use crate::error::{MqsError, Result};
use crate::scalar::{cmp_scalar, Scalar};

#[derive(Debug, Clone, Copy)]
struct Entry<T> {
    value: T,
    id: u32,
}

const SLOT_EMPTY: u32 = 0;
const TAG_BELOW: u32 = 1;
const TAG_ROOT: u32 = 2;
const TAG_ABOVE: u32 = 3;

#[inline]
fn encode(tag: u32, pos: usize) -> u32 {
    ((pos as u32) << 2) | tag
}

#[derive(Debug, Clone)]
struct Tree<T> {
    items: Vec<Entry<T>>,
    /// max-ordered when true
    max: bool,
    tag: u32,
}

impl<T: Scalar> Tree<T> {
    fn new(max: bool, tag: u32) -> Self {
        Self {
            items: Vec::new(),
            max,
            tag,
        }
    }

    #[inline]
    fn prior(&self, a: T, b: T) -> bool {
        if self.max {
            a > b
        } else {
            a < b
        }
    }

    #[inline]
    fn top(&self) -> Option<T> {
        self.items.first().map(|e| e.value)
    }

    #[inline]
    fn place(&mut self, pos: usize, e: Entry<T>, slots: &mut [u32]) {
        let cap = slots.len();
        slots[e.id as usize % cap] = encode(self.tag, pos);
        self.items[pos] = e;
    }

    fn sift_up(&mut self, mut pos: usize, slots: &mut [u32], levels: &mut u64) -> usize {
        let e = self.items[pos];
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if !self.prior(e.value, self.items[parent].value) {
                break;
            }
            let p = self.items[parent];
            self.place(pos, p, slots);
            pos = parent;
            *levels += 1;
        }
        self.place(pos, e, slots);
        pos
    }

    fn sift_down(&mut self, mut pos: usize, slots: &mut [u32], levels: &mut u64) -> usize {
        let e = self.items[pos];
        let len = self.items.len();
        loop {
            let left = 2 * pos + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len && self.prior(self.items[right].value, self.items[left].value) {
                right
            } else {
                left
            };
            if !self.prior(self.items[child].value, e.value) {
                break;
            }
            let c = self.items[child];
            self.place(pos, c, slots);
            pos = child;
            *levels += 1;
        }
        self.place(pos, e, slots);
        pos
    }

    /// Overwrites position `pos` and restores the heap order.
    fn set(&mut self, pos: usize, e: Entry<T>, slots: &mut [u32], levels: &mut u64) {
        self.items[pos] = e;
        let moved = self.sift_up(pos, slots, levels);
        if moved == pos {
            self.sift_down(pos, slots, levels);
        }
    }

    fn push(&mut self, e: Entry<T>, slots: &mut [u32], levels: &mut u64) {
        self.items.push(e);
        let pos = self.items.len() - 1;
        self.sift_up(pos, slots, levels);
    }

    fn pop(&mut self, slots: &mut [u32], levels: &mut u64) -> Option<Entry<T>> {
        let last = self.items.pop()?;
        if self.items.is_empty() {
            return Some(last);
        }
        let top = self.items[0];
        self.items[0] = last;
        self.sift_down(0, slots, levels);
        Some(top)
    }

    /// Replaces the top and returns the previous top.
    fn replace_top(&mut self, e: Entry<T>, slots: &mut [u32], levels: &mut u64) -> Entry<T> {
        let old = self.items[0];
        self.items[0] = e;
        self.sift_down(0, slots, levels);
        old
    }

    fn heapify(&mut self, slots: &mut [u32]) {
        let mut sink = 0;
        for pos in (0..self.items.len() / 2).rev() {
            self.sift_down(pos, slots, &mut sink);
        }
        for pos in 0..self.items.len() {
            let e = self.items[pos];
            self.place(pos, e, slots);
        }
    }

    fn is_ordered(&self) -> bool {
        (1..self.items.len()).all(|k| !self.prior(self.items[k].value, self.items[(k - 1) / 2].value))
    }
}

/// Maintains the `rank`-th smallest element of a multiset.
#[derive(Debug, Clone)]
pub struct DoubleHeap<T> {
    rank: usize,
    below: Tree<T>,
    root: Option<Entry<T>>,
    above: Tree<T>,
    slots: Vec<u32>,
    levels: u64,
}

impl<T: Scalar> DoubleHeap<T> {
    /// Builds a heap over `initial` with ids `0..initial.len()`.
    pub fn new(target_rank: usize, initial: &[T]) -> Result<Self> {
        if !initial.is_empty() && (target_rank == 0 || target_rank > initial.len()) {
            return Err(MqsError::domain(format!(
                "target rank {target_rank} outside 1..={}",
                initial.len()
            )));
        }
        Self::with_ids(
            target_rank,
            initial.len().max(1),
            initial.iter().copied().enumerate(),
        )
    }

    /// Builds a heap whose elements carry explicit ids.
    pub fn with_ids(
        target_rank: usize,
        capacity: usize,
        entries: impl IntoIterator<Item = (usize, T)>,
    ) -> Result<Self> {
        if target_rank == 0 {
            return Err(MqsError::domain("target rank must be positive"));
        }
        let mut heap = Self::empty(target_rank, capacity);
        heap.rebuild(entries);
        Ok(heap)
    }

    /// An empty heap; fill it with [`push`](Self::push) or [`rebuild`](Self::rebuild).
    pub fn empty(target_rank: usize, capacity: usize) -> Self {
        Self {
            rank: target_rank.max(1),
            below: Tree::new(true, TAG_BELOW),
            root: None,
            above: Tree::new(false, TAG_ABOVE),
            slots: vec![SLOT_EMPTY; capacity.max(1)],
            levels: 0,
        }
    }

    /// Discards the contents and refills from `entries` in `O(m log m)`.
    pub fn rebuild(&mut self, entries: impl IntoIterator<Item = (usize, T)>) {
        self.slots.fill(SLOT_EMPTY);
        let mut all: Vec<Entry<T>> = entries
            .into_iter()
            .map(|(id, value)| Entry { value, id: id as u32 })
            .collect();
        all.sort_unstable_by(|a, b| cmp_scalar(&a.value, &b.value));
        let split = (self.rank - 1).min(all.len());
        self.above.items.clear();
        self.below.items.clear();
        self.root = None;
        if all.len() > split {
            self.above.items.extend_from_slice(&all[split + 1..]);
            self.root = Some(all[split]);
        }
        all.truncate(split);
        self.below.items = all;
        // Sorted input is already heap-ordered for the min tree; the max tree
        // needs reversing.
        self.below.items.reverse();
        self.below.heapify(&mut self.slots);
        self.above.heapify(&mut self.slots);
        if let Some(r) = self.root {
            let cap = self.slots.len();
            self.slots[r.id as usize % cap] = TAG_ROOT;
        }
    }

    /// Removes every element, keeping the allocation.
    pub fn clear(&mut self) {
        let cap = self.slots.len();
        for e in self.below.items.iter().chain(&self.above.items).chain(self.root.iter()) {
            self.slots[e.id as usize % cap] = SLOT_EMPTY;
        }
        self.below.items.clear();
        self.above.items.clear();
        self.root = None;
    }

    pub fn target_rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.below.items.len() + self.above.items.len() + self.root.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `rank`-th order statistic.
    pub fn root(&self) -> Result<T> {
        self.root.map(|e| e.value).ok_or_else(|| {
            MqsError::domain(format!(
                "heap holds {} elements, fewer than its target rank {}",
                self.len(),
                self.rank
            ))
        })
    }

    #[inline]
    pub fn peek(&self) -> Option<T> {
        self.root.map(|e| e.value)
    }

    /// Cumulative number of tree levels traversed by sift operations.
    pub fn levels_touched(&self) -> u64 {
        self.levels
    }

    /// Replaces the element with id `out_id` by `in_value` carrying `in_id`.
    ///
    /// `in_id` must map to the same slot as `out_id` (same residue modulo the
    /// capacity) or to a free slot.
    pub fn replace(&mut self, out_id: usize, in_id: usize, in_value: T) -> Result<()> {
        let cap = self.slots.len();
        let code = self.slots[out_id % cap];
        let located = match code & 3 {
            TAG_ROOT => self.root.map(|e| e.id as usize == out_id).unwrap_or(false),
            TAG_BELOW => self.below.items.get((code >> 2) as usize).map(|e| e.id as usize == out_id).unwrap_or(false),
            TAG_ABOVE => self.above.items.get((code >> 2) as usize).map(|e| e.id as usize == out_id).unwrap_or(false),
            _ => false,
        };
        if !located {
            return Err(MqsError::domain(format!("element id {out_id} is not stored in the heap")));
        }
        self.slots[out_id % cap] = SLOT_EMPTY;
        let e = Entry {
            value: in_value,
            id: in_id as u32,
        };
        let pos = (code >> 2) as usize;
        let slots = &mut self.slots;
        let levels = &mut self.levels;
        match code & 3 {
            TAG_ROOT => {
                if self.below.top().is_some_and(|t| e.value < t) {
                    let t = self.below.replace_top(e, slots, levels);
                    self.root = Some(t);
                } else if self.above.top().is_some_and(|t| e.value > t) {
                    let t = self.above.replace_top(e, slots, levels);
                    self.root = Some(t);
                } else {
                    self.root = Some(e);
                }
                if let Some(r) = self.root {
                    slots[r.id as usize % cap] = TAG_ROOT;
                }
            }
            TAG_BELOW => match self.root {
                Some(r) if e.value > r.value => {
                    // the root moves down into the vacated position
                    self.below.set(pos, r, slots, levels);
                    let next = if self.above.top().is_some_and(|t| t < e.value) {
                        self.above.replace_top(e, slots, levels)
                    } else {
                        e
                    };
                    slots[next.id as usize % cap] = TAG_ROOT;
                    self.root = Some(next);
                }
                _ => self.below.set(pos, e, slots, levels),
            },
            TAG_ABOVE => match self.root {
                Some(r) if e.value < r.value => {
                    self.above.set(pos, r, slots, levels);
                    let next = if self.below.top().is_some_and(|t| t > e.value) {
                        self.below.replace_top(e, slots, levels)
                    } else {
                        e
                    };
                    slots[next.id as usize % cap] = TAG_ROOT;
                    self.root = Some(next);
                }
                _ => self.above.set(pos, e, slots, levels),
            },
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Replaces one stored occurrence of `out_value` by `in_value`.
    ///
    /// Finding the occurrence is a linear scan; hot paths should use
    /// [`replace`](Self::replace) with ids.
    pub fn replace_value(&mut self, out_value: T, in_value: T) -> Result<()> {
        let found = self
            .root
            .iter()
            .chain(&self.below.items)
            .chain(&self.above.items)
            .find(|e| e.value == out_value)
            .map(|e| e.id as usize);
        match found {
            Some(id) => self.replace(id, id, in_value),
            None => Err(MqsError::domain(format!("value {out_value} is not stored in the heap"))),
        }
    }

    /// Inserts an element, keeping the target rank.
    pub fn push(&mut self, id: usize, value: T) {
        let e = Entry { value, id: id as u32 };
        let slots = &mut self.slots;
        let levels = &mut self.levels;
        match self.root {
            Some(r) if value >= r.value => self.above.push(e, slots, levels),
            _ => self.below.push(e, slots, levels),
        }
        self.rebalance();
    }

    /// Changes the target rank, moving `|delta|` elements across the root.
    pub fn set_rank(&mut self, rank: usize) {
        self.rank = rank.max(1);
        self.rebalance();
    }

    fn rebalance(&mut self) {
        let cap = self.slots.len();
        let want = self.rank - 1;
        loop {
            let slots = &mut self.slots;
            let levels = &mut self.levels;
            if self.below.items.len() > want {
                let top = self.below.pop(slots, levels).expect("nonempty");
                if let Some(old) = self.root.take() {
                    self.above.push(old, slots, levels);
                }
                slots[top.id as usize % cap] = TAG_ROOT;
                self.root = Some(top);
            } else if self.root.is_none() {
                if let Some(top) = self.above.pop(slots, levels) {
                    slots[top.id as usize % cap] = TAG_ROOT;
                    self.root = Some(top);
                    continue;
                }
                break;
            } else if self.below.items.len() < want {
                match self.above.pop(slots, levels) {
                    Some(next) => {
                        let old = self.root.take().expect("root present");
                        self.below.push(old, slots, levels);
                        slots[next.id as usize % cap] = TAG_ROOT;
                        self.root = Some(next);
                    }
                    None => {
                        // underfull: everything sits below
                        let old = self.root.take().expect("root present");
                        self.below.push(old, slots, levels);
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Structural audit: tree orders, root separation, rank bookkeeping and
    /// slot table consistency.
    pub fn check_invariants(&self) -> bool {
        if !self.below.is_ordered() || !self.above.is_ordered() {
            return false;
        }
        if let Some(r) = self.root {
            if self.below.top().is_some_and(|t| t > r.value) || self.above.top().is_some_and(|t| t < r.value) {
                return false;
            }
            if self.below.items.len() != self.rank - 1 {
                return false;
            }
        } else if !self.above.items.is_empty() || self.below.items.len() >= self.rank {
            return false;
        }
        let cap = self.slots.len();
        let slot_ok = |e: &Entry<T>, code: u32| self.slots[e.id as usize % cap] == code;
        self.below.items.iter().enumerate().all(|(p, e)| slot_ok(e, encode(TAG_BELOW, p)))
            && self.above.items.iter().enumerate().all(|(p, e)| slot_ok(e, encode(TAG_ABOVE, p)))
            && self.root.iter().all(|e| slot_ok(e, TAG_ROOT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kth(values: &[f64], k: usize) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[k - 1]
    }

    #[test]
    fn construction_examples() {
        assert_eq!(DoubleHeap::new(2, &[3.0, 1.0, 2.0]).unwrap().root().unwrap(), 2.0);
        assert_eq!(DoubleHeap::new(1, &[5.0]).unwrap().root().unwrap(), 5.0);
        assert_eq!(DoubleHeap::new(3, &[4.0, 4.0, 4.0, 1.0]).unwrap().root().unwrap(), 4.0);
        assert_eq!(DoubleHeap::new(4, &[4.0, 9.0, 2.0, 1.0]).unwrap().root().unwrap(), 9.0);
        assert!(DoubleHeap::new(4, &[1.0, 2.0]).is_err());
        assert!(DoubleHeap::new(0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn replacement_examples() {
        let mut h = DoubleHeap::new(2, &[3.0, 1.0, 2.0]).unwrap();
        h.replace_value(1.0, 10.0).unwrap();
        assert_eq!(h.root().unwrap(), kth(&[2.0, 3.0, 10.0], 2));
        assert_eq!(h.root().unwrap(), 3.0);

        let before = h.root().unwrap();
        h.replace_value(3.0, 3.0).unwrap();
        assert_eq!(h.root().unwrap(), before);
        assert!(h.check_invariants());

        let mut h = DoubleHeap::new(3, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        h.replace_value(5.0, 0.0).unwrap();
        assert_eq!(h.root().unwrap(), 2.0);

        assert!(h.replace_value(42.0, 1.0).is_err());
        assert!(h.replace(17, 17, 1.0).is_err());
    }

    #[test]
    fn root_errors_when_underfull() {
        let mut h: DoubleHeap<f64> = DoubleHeap::empty(3, 8);
        h.push(0, 1.0);
        h.push(1, 2.0);
        assert!(h.root().is_err());
        h.push(2, 0.5);
        assert_eq!(h.root().unwrap(), 2.0);
        assert!(h.check_invariants());
    }

    #[test]
    fn two_replaces_match_sort_oracle() {
        let mut data = vec![5.0, -1.0, 3.5, 3.5, 8.0];
        let mut h = DoubleHeap::new(3, &data).unwrap();
        h.replace(1, 1, 9.0).unwrap();
        data[1] = 9.0;
        h.replace(3, 3, -4.0).unwrap();
        data[3] = -4.0;
        assert_eq!(h.root().unwrap(), kth(&data, 3));
    }

    #[test]
    fn push_and_retarget_track_order_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h: DoubleHeap<f64> = DoubleHeap::empty(1, 300);
        let mut data = Vec::new();
        for id in 0..300 {
            let v = (rng.random_range(0..40) as f64) * 0.25;
            data.push(v);
            h.push(id, v);
            let r = rng.random_range(1..=data.len());
            h.set_rank(r);
            assert_eq!(h.root().unwrap(), kth(&data, r));
            assert!(h.check_invariants());
        }
    }

    #[test]
    fn sliding_window_matches_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stream: Vec<f64> = (0..3000).map(|_| (rng.random_range(0..50) as f64) - 25.0).collect();
        for &w in &[1usize, 2, 7, 64] {
            for rank in [1, w.div_ceil(2), w] {
                let mut h = DoubleHeap::with_ids(rank, w, stream[..w].iter().copied().enumerate()).unwrap();
                for end in w..stream.len() {
                    h.replace(end - w, end, stream[end]).unwrap();
                    assert_eq!(h.root().unwrap(), kth(&stream[end + 1 - w..=end], rank));
                }
                assert!(h.check_invariants());
            }
        }
    }

    #[test]
    fn replacement_touches_logarithmic_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &size in &[15usize, 100, 512] {
            let data: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
            let mut h = DoubleHeap::new(rng.random_range(1..=size), &data).unwrap();
            let bound = 2 * (size as f64).log2().ceil() as u64 + 4;
            for _ in 0..2000 {
                let id = rng.random_range(0..size);
                let before = h.levels_touched();
                h.replace(id, id, rng.random::<f64>() * 2.0 - 0.5).unwrap();
                assert!(h.levels_touched() - before <= bound);
            }
        }
    }

    #[test]
    fn works_for_f32() {
        let mut h = DoubleHeap::new(2, &[3.0f32, 1.0, 2.0]).unwrap();
        h.replace_value(1.0, 10.0).unwrap();
        assert_eq!(h.root().unwrap(), 3.0f32);
    }
}

//! Proportional prioritized experience replay backed by a sum tree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};

/// One environment transition. `action` is the index into the action space.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<O = Observation> {
    pub obs: O,
    pub action: usize,
    pub reward: f64,
    pub next_obs: O,
    pub terminal: bool,
}

/// Complete binary tree whose internal nodes hold the sum of their children.
///
/// Leaves live at `nodes[size..size + capacity]` with `size` the next power
/// of two; `nodes[1]` is the root.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("sum tree capacity must be positive"));
        }
        let size = capacity.next_power_of_two();
        Ok(SumTree {
            capacity,
            size,
            nodes: vec![0.0; 2 * size],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.size + leaf]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.size..self.size + self.capacity]
    }

    pub fn set(&mut self, leaf: usize, value: f64) -> Result<()> {
        if leaf >= self.capacity {
            return Err(Error::invalid(format!(
                "leaf {leaf} out of range for capacity {}",
                self.capacity
            )));
        }
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::invalid(format!("priority {value} must be finite and non-negative")));
        }
        let mut i = self.size + leaf;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            // recompute from the children so rounding never drifts
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
        Ok(())
    }

    /// Leaf whose cumulative range contains `mass`. Only ever descends into
    /// subtrees with positive sum, so zero-priority leaves are never returned
    /// while the total is positive.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut i = 1;
        while i < self.size {
            let left = 2 * i;
            if mass < self.nodes[left] || self.nodes[left + 1] <= 0.0 {
                i = left;
            } else {
                mass -= self.nodes[left];
                i = left + 1;
            }
        }
        (i - self.size).min(self.capacity - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerConfig {
    pub capacity: usize,
    /// Priority exponent.
    pub alpha: f64,
    /// Floor added to |TD error| before exponentiation.
    pub epsilon: f64,
    /// Importance-sampling exponent at the start of training...
    pub beta_start: f64,
    /// ...annealed linearly to this value by the end.
    pub beta_end: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        PerConfig {
            capacity: 20_000,
            alpha: 0.6,
            epsilon: 0.01,
            beta_start: 0.4,
            beta_end: 1.0,
        }
    }
}

impl PerConfig {
    /// Importance exponent after `progress ∈ [0, 1]` of training.
    pub fn beta_at(&self, progress: f64) -> f64 {
        let t = progress.clamp(0.0, 1.0);
        self.beta_start + (self.beta_end - self.beta_start) * t
    }
}

#[derive(Debug)]
pub struct Sample<'a, T> {
    pub index: usize,
    pub item: &'a T,
    pub probability: f64,
    /// `(N * P(i))^-beta`, divided by the batch maximum.
    pub weight: f64,
}

/// Ring buffer of items with proportional prioritized sampling.
#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T> {
    cfg: PerConfig,
    tree: SumTree,
    items: Vec<T>,
    next: usize,
    max_priority: f64,
}

impl<T> PrioritizedReplay<T> {
    pub fn new(cfg: PerConfig) -> Result<Self> {
        if !(cfg.alpha >= 0.0) || !(cfg.epsilon > 0.0) {
            return Err(Error::invalid("PER needs alpha >= 0 and epsilon > 0"));
        }
        Ok(PrioritizedReplay {
            tree: SumTree::new(cfg.capacity)?,
            cfg,
            items: Vec::with_capacity(cfg.capacity.min(1 << 16)),
            next: 0,
            max_priority: 1.0,
        })
    }

    pub fn config(&self) -> &PerConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cfg.capacity
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    /// Slot the next insert will write.
    pub fn cursor(&self) -> usize {
        self.next
    }

    /// Largest raw priority seen so far (starts at 1).
    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    /// Stores `item` in the next ring slot with leaf value `priority^alpha`,
    /// overwriting the oldest item once full. Returns the slot.
    pub fn insert(&mut self, item: T, priority: f64) -> Result<usize> {
        if !(priority > 0.0) || !priority.is_finite() {
            return Err(Error::invalid(format!("insert priority {priority} must be positive")));
        }
        let slot = self.next;
        if slot < self.items.len() {
            self.items[slot] = item;
        } else {
            self.items.push(item);
        }
        self.tree.set(slot, priority.powf(self.cfg.alpha))?;
        self.max_priority = self.max_priority.max(priority);
        self.next = (self.next + 1) % self.cfg.capacity;
        Ok(slot)
    }

    /// Inserts with the largest priority seen so far, so new items get
    /// sampled soon.
    pub fn insert_max(&mut self, item: T) -> usize {
        self.insert(item, self.max_priority).expect("max priority is positive")
    }

    /// Sets the slot's leaf to `(|td_error| + epsilon)^alpha`.
    pub fn update(&mut self, index: usize, td_error: f64) -> Result<()> {
        if index >= self.items.len() {
            return Err(Error::invalid(format!(
                "replay index {index} out of range (len {})",
                self.items.len()
            )));
        }
        if !td_error.is_finite() {
            return Err(Error::TrainingDiverged(format!("non-finite TD error {td_error}")));
        }
        let raw = td_error.abs() + self.cfg.epsilon;
        self.tree.set(index, raw.powf(self.cfg.alpha))?;
        self.max_priority = self.max_priority.max(raw);
        Ok(())
    }

    /// Stratified proportional sampling: `[0, total]` is cut into `batch`
    /// equal segments and one point is drawn uniformly from each.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<Vec<Sample<'_, T>>> {
        if self.items.is_empty() {
            return Err(Error::InvalidState("cannot sample from an empty replay buffer".into()));
        }
        if batch == 0 {
            return Err(Error::invalid("batch must be positive"));
        }
        let total = self.tree.total();
        let segment = total / batch as f64;
        let n = self.items.len() as f64;
        let mut out = Vec::with_capacity(batch);
        for i in 0..batch {
            let u: f64 = rng.random();
            let mass = ((i as f64 + u) * segment).min(total * (1.0 - f64::EPSILON));
            let index = self.tree.find(mass);
            let probability = self.tree.get(index) / total;
            out.push(Sample {
                index,
                item: &self.items[index],
                probability,
                weight: (n * probability).powf(-beta),
            });
        }
        let max_w = out.iter().map(|s| s.weight).fold(0.0, f64::max);
        for s in &mut out {
            s.weight /= max_w;
        }
        Ok(out)
    }

    /// Rebuilds a buffer from snapshot parts. `leaves[i]` is the stored leaf
    /// value (already exponentiated) of `items[i]`.
    pub fn from_parts(cfg: PerConfig, items: Vec<T>, leaves: &[f64], next: usize, max_priority: f64) -> Result<Self> {
        let mut replay = PrioritizedReplay::new(cfg)?;
        if items.len() > cfg.capacity || leaves.len() != items.len() || (next >= cfg.capacity) {
            return Err(Error::Format("inconsistent replay snapshot".into()));
        }
        for (i, &v) in leaves.iter().enumerate() {
            replay.tree.set(i, v).map_err(|e| Error::Format(e.to_string()))?;
        }
        replay.items = items;
        replay.next = next;
        replay.max_priority = max_priority;
        Ok(replay)
    }
}

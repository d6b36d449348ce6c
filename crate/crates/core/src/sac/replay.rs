//! FIFO ring replay buffer with uniform sampling.

use ndarray::{Array1, Array2};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Box<[f64]>,
    /// Raw policy action in `[-1, 1]^A`.
    pub action: Box<[f64]>,
    pub reward: f64,
    pub next_obs: Box<[f64]>,
    pub done: bool,
}

pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    head: usize,
}

/// A sampled minibatch in matrix form.
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub dones: Array1<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { storage: Vec::new(), capacity, head: 0 }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append, overwriting the oldest transition once at capacity.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    /// Uniform indices over the current contents.
    pub fn sample_indices<R: Rng>(&self, draws: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.is_empty(), "cannot sample from an empty buffer");
        (0..draws).map(|_| rng.random_range(0..self.len())).collect()
    }

    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Batch {
        assert!(self.len() >= batch, "not enough transitions to fill a batch");
        let idx = self.sample_indices(batch, rng);
        let obs_dim = self.storage[0].obs.len();
        let act_dim = self.storage[0].action.len();
        let mut obs = Array2::zeros((batch, obs_dim));
        let mut actions = Array2::zeros((batch, act_dim));
        let mut rewards = Array1::zeros(batch);
        let mut next_obs = Array2::zeros((batch, obs_dim));
        let mut dones = Array1::zeros(batch);
        for (row, &i) in idx.iter().enumerate() {
            let t = &self.storage[i];
            obs.row_mut(row).assign(&Array1::from_iter(t.obs.iter().copied()));
            actions.row_mut(row).assign(&Array1::from_iter(t.action.iter().copied()));
            next_obs.row_mut(row).assign(&Array1::from_iter(t.next_obs.iter().copied()));
            rewards[row] = t.reward;
            dones[row] = if t.done { 1.0 } else { 0.0 };
        }
        Batch { obs, actions, rewards, next_obs, dones }
    }
}

//! Bounded FIFO container of predicted lights.
//!
//! During training every abnormal image's predicted light is pushed here, and
//! the normal-to-abnormal branch draws a random prior from the current
//! contents. Draws are uniform, with replacement, and never mutate the queue.

use crate::error::{Error, Result};
use crate::light::LightVector;
use rand::Rng;
use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LightContainer {
    capacity: usize,
    items: VecDeque<LightVector>,
}

impl LightContainer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("light container capacity must be > 0".into()));
        }
        Ok(LightContainer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
    }

    /// Default capacity: a quarter of the dataset size, rounded up.
    pub fn with_default_capacity(dataset_size: usize) -> Result<Self> {
        Self::new(dataset_size.div_ceil(4).max(1))
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Append a light, evicting the oldest entry if the queue is full.
    pub fn push(&mut self, light: LightVector) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(light);
    }

    /// Uniform draw over the current contents; the item stays in the queue.
    pub fn sample_random<R: Rng>(&self, rng: &mut R) -> Result<LightVector> {
        if self.items.is_empty() {
            return Err(Error::Data(
                "light container is empty; push a predicted light before sampling".into(),
            ));
        }
        let idx = rng.random_range(0..self.items.len());
        Ok(self.items[idx])
    }

    /// Oldest-first snapshot of the contents.
    pub fn items(&self) -> impl Iterator<Item = &LightVector> {
        self.items.iter()
    }

    pub fn restore(capacity: usize, items: Vec<LightVector>) -> Result<Self> {
        let mut c = Self::new(capacity)?;
        for l in items {
            c.push(l);
        }
        Ok(c)
    }
}

//! Per-step tables indexed by `(step, state)` or `(step, state, action)`.
//!
//! States are addressed by their local index inside the layer of the step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::Shape;

/// Values over states, with the terminal layer (one state) at index `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTable {
    layers: Vec<Vec<f64>>,
}

impl StateTable {
    pub fn zeros(shape: &Shape) -> Self {
        Self::filled(shape, |_| 0.0)
    }

    /// Every non-terminal layer `h` filled with `value(h)`; terminal layer zero.
    pub fn filled(shape: &Shape, value: impl Fn(usize) -> f64) -> Self {
        let h_max = shape.horizon();
        let layers = (0..=h_max)
            .map(|h| {
                let v = if h == h_max { 0.0 } else { value(h) };
                vec![v; shape.layer_size(h)]
            })
            .collect();
        Self { layers }
    }

    /// Builds a table from explicit layers; a missing terminal layer is appended.
    pub fn from_layers(shape: &Shape, mut layers: Vec<Vec<f64>>) -> Result<Self> {
        if layers.len() == shape.horizon() {
            layers.push(vec![0.0]);
        }
        if layers.len() != shape.horizon() + 1 {
            return Err(Error::ShapeMismatch(alloc::format!(
                "state table has {} layers, expected {}",
                layers.len(),
                shape.horizon() + 1
            )));
        }
        for (h, layer) in layers.iter().enumerate() {
            if layer.len() != shape.layer_size(h) {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "state table layer {h} has {} entries, expected {}",
                    layer.len(),
                    shape.layer_size(h)
                )));
            }
        }
        Ok(Self { layers })
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.layers[h][s]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, v: f64) {
        self.layers[h][s] = v;
    }

    #[inline]
    pub fn layer(&self, h: usize) -> &[f64] {
        &self.layers[h]
    }

    #[inline]
    pub fn layer_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.layers[h]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    /// Number of layers including the terminal one.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn max_abs_diff(&self, other: &StateTable) -> f64 {
        self.layers
            .iter()
            .flatten()
            .zip(other.layers.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Values over `(state, action)` pairs for the `H` non-terminal steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionTable {
    actions: usize,
    layers: Vec<Vec<f64>>,
}

impl ActionTable {
    pub fn zeros(shape: &Shape) -> Self {
        Self::filled(shape, |_| 0.0)
    }

    pub fn filled(shape: &Shape, value: impl Fn(usize) -> f64) -> Self {
        let layers = (0..shape.horizon())
            .map(|h| vec![value(h); shape.layer_size(h) * shape.actions()])
            .collect();
        Self {
            actions: shape.actions(),
            layers,
        }
    }

    /// Builds a table from `layers[h][s * A + a]`.
    pub fn from_layers(shape: &Shape, layers: Vec<Vec<f64>>) -> Result<Self> {
        if layers.len() != shape.horizon() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "action table has {} layers, expected {}",
                layers.len(),
                shape.horizon()
            )));
        }
        for (h, layer) in layers.iter().enumerate() {
            if layer.len() != shape.layer_size(h) * shape.actions() {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "action table layer {h} has {} entries, expected {}",
                    layer.len(),
                    shape.layer_size(h) * shape.actions()
                )));
            }
        }
        Ok(Self {
            actions: shape.actions(),
            layers,
        })
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.layers[h][s * self.actions + a]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, a: usize, v: f64) {
        self.layers[h][s * self.actions + a] = v;
    }

    /// The action values of state `s` at step `h`.
    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        &self.layers[h][s * self.actions..(s + 1) * self.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        &mut self.layers[h][s * self.actions..(s + 1) * self.actions]
    }

    pub fn layer(&self, h: usize) -> &[f64] {
        &self.layers[h]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Row-wise maximum, producing a state table with a zero terminal layer.
    pub fn greedy_values(&self, shape: &Shape) -> StateTable {
        let mut v = StateTable::zeros(shape);
        for h in 0..shape.horizon() {
            for s in 0..shape.layer_size(h) {
                v.set(h, s, crate::math::max(self.row(h, s)));
            }
        }
        v
    }

    /// Row-wise argmax with lowest-index tie-breaking.
    pub fn greedy_policy(&self, shape: &Shape) -> DeterministicPolicy {
        let actions = (0..shape.horizon())
            .map(|h| {
                (0..shape.layer_size(h))
                    .map(|s| crate::math::argmax(self.row(h, s)))
                    .collect()
            })
            .collect();
        DeterministicPolicy { actions }
    }

    pub fn max_abs_diff(&self, other: &ActionTable) -> f64 {
        self.layers
            .iter()
            .flatten()
            .zip(other.layers.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One action per `(step, state)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterministicPolicy {
    actions: Vec<Vec<usize>>,
}

impl DeterministicPolicy {
    /// Validates that the policy is total over `shape` and names valid actions.
    pub fn new(shape: &Shape, actions: Vec<Vec<usize>>) -> Result<Self> {
        if actions.len() != shape.horizon() {
            return Err(Error::InvalidPolicy(alloc::format!(
                "policy covers {} steps, expected {}",
                actions.len(),
                shape.horizon()
            )));
        }
        for (h, layer) in actions.iter().enumerate() {
            if layer.len() != shape.layer_size(h) {
                return Err(Error::InvalidPolicy(alloc::format!(
                    "policy covers {} states at step {h}, expected {}",
                    layer.len(),
                    shape.layer_size(h)
                )));
            }
            if let Some(s) = layer.iter().position(|&a| a >= shape.actions()) {
                return Err(Error::InvalidPolicy(alloc::format!(
                    "action {} at step {h}, state {s} is out of range",
                    layer[s]
                )));
            }
        }
        Ok(Self { actions })
    }

    pub fn constant(shape: &Shape, action: usize) -> Result<Self> {
        let actions = (0..shape.horizon())
            .map(|h| vec![action; shape.layer_size(h)])
            .collect();
        Self::new(shape, actions)
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h][s]
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub(crate) fn set(&mut self, h: usize, s: usize, a: usize) {
        self.actions[h][s] = a;
    }
}

/// An action distribution per `(step, state)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPolicy {
    actions: usize,
    probs: Vec<Vec<f64>>,
}

impl StochasticPolicy {
    pub fn uniform(shape: &Shape) -> Self {
        let p = 1.0 / shape.actions() as f64;
        let probs = (0..shape.horizon())
            .map(|h| vec![p; shape.layer_size(h) * shape.actions()])
            .collect();
        Self {
            actions: shape.actions(),
            probs,
        }
    }

    /// `probs[h][s * A + a]`; every row must be a probability vector.
    pub fn new(shape: &Shape, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != shape.horizon() {
            return Err(Error::InvalidPolicy(alloc::format!(
                "policy covers {} steps, expected {}",
                probs.len(),
                shape.horizon()
            )));
        }
        let a_count = shape.actions();
        for (h, layer) in probs.iter().enumerate() {
            if layer.len() != shape.layer_size(h) * a_count {
                return Err(Error::InvalidPolicy(alloc::format!(
                    "step {h} has the wrong number of entries"
                )));
            }
            for (s, row) in layer.chunks(a_count).enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidPolicy(alloc::format!(
                        "action distribution at step {h}, state {s} is not a probability vector"
                    )));
                }
            }
        }
        Ok(Self {
            actions: a_count,
            probs,
        })
    }

    pub fn from_deterministic(shape: &Shape, policy: &DeterministicPolicy) -> Self {
        let a_count = shape.actions();
        let probs = (0..shape.horizon())
            .map(|h| {
                let mut layer = vec![0.0; shape.layer_size(h) * a_count];
                for s in 0..shape.layer_size(h) {
                    layer[s * a_count + policy.action(h, s)] = 1.0;
                }
                layer
            })
            .collect();
        Self {
            actions: a_count,
            probs,
        }
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        &self.probs[h][s * self.actions..(s + 1) * self.actions]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

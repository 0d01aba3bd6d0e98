//! The layered tabular MDP and its random instance generator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng;
use crate::table::ActionTable;

const ROW_TOL: f64 = 1e-12;

/// Layer sizes and action count of a layered MDP.
///
/// Global state ids number the layers consecutively: layer 0 holds ids
/// `0..n_0`, layer 1 holds `n_0..n_0 + n_1`, and so on. The terminal layer
/// `H` is a single absorbing symbol and has no global id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    layer_sizes: Vec<usize>,
    actions: usize,
    offsets: Vec<usize>,
}

impl Shape {
    pub fn new(layer_sizes: Vec<usize>, actions: usize) -> Result<Self> {
        if layer_sizes.is_empty() {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        if let Some(h) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidModel(format!("layer {h} is empty")));
        }
        if actions == 0 {
            return Err(Error::InvalidModel("action count must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len() + 1);
        let mut acc = 0;
        for &n in &layer_sizes {
            offsets.push(acc);
            acc += n;
        }
        offsets.push(acc);
        Ok(Self {
            layer_sizes,
            actions,
            offsets,
        })
    }

    pub fn uniform(horizon: usize, states_per_layer: usize, actions: usize) -> Result<Self> {
        Self::new(vec![states_per_layer; horizon], actions)
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.layer_sizes.len()
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.actions
    }

    /// States in layer `h`; the terminal layer `h == H` has one.
    #[inline]
    pub fn layer_size(&self, h: usize) -> usize {
        if h == self.horizon() {
            1
        } else {
            self.layer_sizes[h]
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Total number of non-terminal states.
    pub fn num_states(&self) -> usize {
        self.offsets[self.horizon()]
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states() * self.actions
    }

    /// Largest state count over the non-terminal layers.
    pub fn max_layer_size(&self) -> usize {
        self.layer_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Number of rewarded steps remaining when standing at step `h`.
    #[inline]
    pub fn steps_from(&self, h: usize) -> usize {
        self.horizon() - h
    }

    #[inline]
    pub fn global_id(&self, h: usize, s: usize) -> usize {
        self.offsets[h] + s
    }

    pub fn global_ids(&self, h: usize) -> Range<usize> {
        self.offsets[h]..self.offsets[h + 1]
    }

    /// Layer and local index of a global state id.
    pub fn locate(&self, id: usize) -> Option<(usize, usize)> {
        if id >= self.num_states() {
            return None;
        }
        let h = self.offsets.partition_point(|&o| o <= id) - 1;
        Some((h, id - self.offsets[h]))
    }
}

/// A finite-horizon MDP whose states are partitioned by step.
///
/// Transition rows at step `h` are distributions over layer `h + 1`; at the
/// last step they are the one-point distribution on the terminal symbol.
/// Rewards are deterministic and known.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredMdp {
    shape: Shape,
    transitions: Vec<Vec<f64>>,
    rewards: ActionTable,
    initial: Vec<f64>,
}

impl LayeredMdp {
    /// `transitions[h][(s * A + a) * n_{h+1} + s']`.
    pub fn new(
        shape: Shape,
        transitions: Vec<Vec<f64>>,
        rewards: ActionTable,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let h_max = shape.horizon();
        let a_count = shape.actions();
        if transitions.len() != h_max {
            return Err(Error::InvalidModel(format!(
                "{} transition layers for horizon {h_max}",
                transitions.len()
            )));
        }
        for (h, layer) in transitions.iter().enumerate() {
            let next = shape.layer_size(h + 1);
            if layer.len() != shape.layer_size(h) * a_count * next {
                return Err(Error::InvalidModel(format!(
                    "transition layer {h} has the wrong size"
                )));
            }
            for (i, row) in layer.chunks(next).enumerate() {
                check_distribution(row).map_err(|why| {
                    Error::InvalidModel(format!(
                        "transition row at step {h}, state {}, action {}: {why}",
                        i / a_count,
                        i % a_count
                    ))
                })?;
            }
        }
        if rewards.layers().len() != h_max || rewards.actions() != a_count {
            return Err(Error::InvalidModel(
                "reward table does not match the shape".into(),
            ));
        }
        for h in 0..h_max {
            if rewards.layer(h).len() != shape.layer_size(h) * a_count {
                return Err(Error::InvalidModel(format!(
                    "reward layer {h} has the wrong size"
                )));
            }
            if rewards.layer(h).iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                return Err(Error::InvalidModel(format!(
                    "reward outside [0, 1] at step {h}"
                )));
            }
        }
        if initial.len() != shape.layer_size(0) {
            return Err(Error::InvalidModel(
                "initial distribution must cover layer 0".into(),
            ));
        }
        check_distribution(&initial)
            .map_err(|why| Error::InvalidModel(format!("initial distribution: {why}")))?;
        Ok(Self {
            shape,
            transitions,
            rewards,
            initial,
        })
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.shape.horizon()
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.shape.actions()
    }

    /// Next-layer distribution of `(s, a)` at step `h`.
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let next = self.shape.layer_size(h + 1);
        let start = (s * self.shape.actions() + a) * next;
        &self.transitions[h][start..start + next]
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards.get(h, s, a)
    }

    pub fn rewards(&self) -> &ActionTable {
        &self.rewards
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }
}

fn check_distribution(row: &[f64]) -> core::result::Result<(), &'static str> {
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err("negative or non-finite entry");
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err("does not sum to one");
    }
    Ok(())
}

/// How rewards before the last step are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RewardMode {
    /// `r_h = 0` for every step but the last.
    Zero,
    /// `r_h ~ U[0, 1]` for every step but the last.
    #[default]
    Uniform,
}

/// Parameters of the random layered-MDP generator.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpGenSpec {
    pub horizon: usize,
    pub states_per_layer: usize,
    pub actions: usize,
    /// Last-step rewards are drawn from `U[r1, r2]`.
    pub terminal_reward_range: (f64, f64),
    pub intermediate_rewards: RewardMode,
    /// Symmetric Dirichlet concentration of every transition row.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for MdpGenSpec {
    fn default() -> Self {
        Self {
            horizon: 4,
            states_per_layer: 3,
            actions: 3,
            terminal_reward_range: (0.0, 1.0),
            intermediate_rewards: RewardMode::Uniform,
            concentration: 1.0,
            seed: 0,
        }
    }
}

impl MdpGenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.states_per_layer == 0 || self.actions == 0 {
            return Err(Error::InvalidSpec(
                "horizon, states per layer and actions must all be positive".into(),
            ));
        }
        let (r1, r2) = self.terminal_reward_range;
        if !(0.0 <= r1 && r1 <= r2 && r2 <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "terminal reward range [{r1}, {r2}] must satisfy 0 <= r1 <= r2 <= 1"
            )));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::InvalidSpec(
                "concentration must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Draws a random layered MDP; a deterministic function of `spec`.
///
/// Transition rows come from a symmetric Dirichlet, the initial distribution
/// is uniform over layer 0. Terminal rewards are `r1 + u (r2 - r1)` with
/// `u ~ U[0, 1]`, and the uniforms are drawn after the transitions, so specs
/// that differ only in their reward range share dynamics and reward ranks.
pub fn generate_mdp(spec: &MdpGenSpec) -> Result<LayeredMdp> {
    spec.validate()?;
    let shape = Shape::uniform(spec.horizon, spec.states_per_layer, spec.actions)?;
    let mut rng = rng::stream(spec.seed, rng::MDP_GEN, 0);
    let gamma = Gamma::new(spec.concentration, 1.0)
        .map_err(|_| Error::InvalidSpec("concentration rejected by the Gamma sampler".into()))?;

    let mut transitions = Vec::with_capacity(spec.horizon);
    for h in 0..spec.horizon {
        let next = shape.layer_size(h + 1);
        let mut layer = Vec::with_capacity(shape.layer_size(h) * spec.actions * next);
        for _ in 0..shape.layer_size(h) * spec.actions {
            if next == 1 {
                layer.push(1.0);
                continue;
            }
            let mut row: Vec<f64> = (0..next).map(|_| gamma.sample(&mut rng)).collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                row.iter_mut().for_each(|p| *p /= sum);
            } else {
                // every draw underflowed: degenerate to a random vertex
                let hot = rng.random_range(0..next);
                row.iter_mut()
                    .enumerate()
                    .for_each(|(i, p)| *p = if i == hot { 1.0 } else { 0.0 });
            }
            layer.extend_from_slice(&row);
        }
        transitions.push(layer);
    }

    let (r1, r2) = spec.terminal_reward_range;
    let mut rewards = ActionTable::zeros(&shape);
    for h in 0..spec.horizon {
        let last = h + 1 == spec.horizon;
        for s in 0..shape.layer_size(h) {
            for a in 0..spec.actions {
                let r = if last {
                    let u: f64 = rng.random();
                    (r1 + u * (r2 - r1)).clamp(r1, r2)
                } else {
                    match spec.intermediate_rewards {
                        RewardMode::Zero => 0.0,
                        RewardMode::Uniform => rng.random(),
                    }
                };
                rewards.set(h, s, a, r);
            }
        }
    }

    let n0 = shape.layer_size(0);
    let initial = vec![1.0 / n0 as f64; n0];
    LayeredMdp::new(shape, transitions, rewards, initial)
}

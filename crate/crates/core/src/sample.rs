//! Trajectory sampling and offline dataset collection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{LayeredMdp, Shape};
use crate::rng::categorical;
use crate::table::StochasticPolicy;

/// One `(state, action, reward)` transition; `state` is local to its layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// A full episode of `H` steps. Entry `h` lies in layer `h`; the episode
/// then moves to the terminal symbol.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    /// State reached after step `h`; `None` past the last step (terminal).
    pub fn next_state(&self, h: usize) -> Option<usize> {
        self.steps.get(h + 1).map(|st| st.state)
    }

    pub fn initial_state(&self) -> usize {
        self.steps[0].state
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn check_shape(&self, shape: &Shape) -> Result<()> {
        if self.steps.len() != shape.horizon() {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} steps, horizon is {}",
                self.steps.len(),
                shape.horizon()
            )));
        }
        for (h, st) in self.steps.iter().enumerate() {
            if st.state >= shape.layer_size(h) || st.action >= shape.actions() {
                return Err(Error::ShapeMismatch(format!(
                    "step {h} names state {} / action {} outside the model",
                    st.state, st.action
                )));
            }
        }
        Ok(())
    }
}

/// `K` trajectories gathered by one behaviour policy.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub behavior: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn check_shape(&self, shape: &Shape) -> Result<()> {
        self.trajectories
            .iter()
            .try_for_each(|t| t.check_shape(shape))
    }
}

/// Rolls `policy` through the true model once.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    policy: &StochasticPolicy,
    rng: &mut R,
) -> Trajectory {
    let mut steps = Vec::with_capacity(mdp.horizon());
    let mut s = categorical(rng, mdp.initial());
    for h in 0..mdp.horizon() {
        let a = categorical(rng, policy.row(h, s));
        steps.push(Step {
            state: s,
            action: a,
            reward: mdp.reward(h, s, a),
        });
        s = categorical(rng, mdp.row(h, s, a));
    }
    Trajectory { steps }
}

/// `k` independent trajectories under `behavior`.
pub fn collect_dataset<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    behavior: &StochasticPolicy,
    behavior_name: &str,
    k: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "dataset size K must be at least 1".into(),
        ));
    }
    let trajectories = (0..k)
        .map(|_| sample_trajectory(mdp, behavior, rng))
        .collect();
    Ok(Dataset {
        trajectories,
        behavior: behavior_name.into(),
    })
}

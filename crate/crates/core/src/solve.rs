//! Exact dynamic programming on the true model.

use alloc::vec::Vec;

use crate::error::Result;
use crate::math;
use crate::mdp::LayeredMdp;
use crate::table::{ActionTable, DeterministicPolicy, StateTable, StochasticPolicy};

/// `V*`, `Q*`, a greedy optimal policy and the per-layer spread of `V*`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalSolution {
    pub q: ActionTable,
    pub v: StateTable,
    pub policy: DeterministicPolicy,
    /// `max_s V*_h(s) - min_s V*_h(s)` for each non-terminal step.
    pub ranges: Vec<f64>,
}

impl OptimalSolution {
    /// `V*` at step 0 averaged over the initial distribution.
    pub fn initial_value(&self, mdp: &LayeredMdp) -> f64 {
        math::dot(mdp.initial(), self.v.layer(0))
    }
}

/// Backward induction; argmax ties go to the lowest action index.
pub fn solve_optimal(mdp: &LayeredMdp) -> OptimalSolution {
    let shape = mdp.shape();
    let mut q = ActionTable::zeros(shape);
    let mut v = StateTable::zeros(shape);
    for h in (0..shape.horizon()).rev() {
        for s in 0..shape.layer_size(h) {
            for a in 0..shape.actions() {
                let value = mdp.reward(h, s, a) + math::dot(mdp.row(h, s, a), v.layer(h + 1));
                q.set(h, s, a, value);
            }
            v.set(h, s, math::max(q.row(h, s)));
        }
    }
    let policy = q.greedy_policy(shape);
    let ranges = (0..shape.horizon())
        .map(|h| math::max(v.layer(h)) - math::min(v.layer(h)))
        .collect();
    OptimalSolution {
        q,
        v,
        policy,
        ranges,
    }
}

/// `V^π` by backward recursion along the policy's actions.
pub fn evaluate_policy(mdp: &LayeredMdp, policy: &DeterministicPolicy) -> Result<StateTable> {
    let shape = mdp.shape();
    // revalidate: a policy built for another shape is a partial policy here
    DeterministicPolicy::new(shape, policy.layers().to_vec())?;
    let mut v = StateTable::zeros(shape);
    evaluate_into(mdp, policy, &mut v);
    Ok(v)
}

/// Allocation-free evaluation for callers that already validated the policy.
pub(crate) fn evaluate_into(mdp: &LayeredMdp, policy: &DeterministicPolicy, v: &mut StateTable) {
    let shape = mdp.shape();
    for h in (0..shape.horizon()).rev() {
        for s in 0..shape.layer_size(h) {
            let a = policy.action(h, s);
            let value = mdp.reward(h, s, a) + math::dot(mdp.row(h, s, a), v.layer(h + 1));
            v.set(h, s, value);
        }
    }
}

/// Exact state-action occupancies `d_h(s, a)` of `policy` started from the
/// initial distribution, by forward propagation.
pub fn occupancy(mdp: &LayeredMdp, policy: &StochasticPolicy) -> ActionTable {
    let shape = mdp.shape();
    let mut pairs = ActionTable::zeros(shape);
    let mut states: Vec<f64> = mdp.initial().to_vec();
    for h in 0..shape.horizon() {
        let mut next = alloc::vec![0.0; shape.layer_size(h + 1)];
        for (s, &ds) in states.iter().enumerate() {
            for (a, &pa) in policy.row(h, s).iter().enumerate() {
                let d = ds * pa;
                pairs.set(h, s, a, d);
                if d > 0.0 {
                    for (n, &p) in next.iter_mut().zip(mdp.row(h, s, a)) {
                        *n += d * p;
                    }
                }
            }
        }
        states = next;
    }
    pairs
}

/// Exact state occupancies `d_h(s)` per step (terminal layer excluded).
pub fn state_occupancy(mdp: &LayeredMdp, policy: &StochasticPolicy) -> Vec<Vec<f64>> {
    let shape = mdp.shape();
    let pairs = occupancy(mdp, policy);
    (0..shape.horizon())
        .map(|h| {
            (0..shape.layer_size(h))
                .map(|s| pairs.row(h, s).iter().sum())
                .collect()
        })
        .collect()
}

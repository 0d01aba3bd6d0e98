//! Offline envelope construction from batch trajectories.
//!
//! The dataset is split into `H` disjoint parts; step `h` only sees counts
//! from part `h`, so the empirical model used at step `h` is independent of
//! the next-step envelope it is applied to. A backward recursion then adds
//! an empirical-Bernstein bonus to the upper Q-table and subtracts it from
//! the lower one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envelope::ValueEnvelope;
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{LayeredMdp, Shape};
use crate::sample::Dataset;
use crate::solve::occupancy;
use crate::table::{ActionTable, StochasticPolicy};
use crate::{C1, C2};

/// How trajectories are assigned to the `H` parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitStrategy {
    /// Shuffle, then deal trajectory `i` of the shuffled order to part `i mod H`.
    #[default]
    ShuffleRoundRobin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineConfig {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub split: SplitStrategy,
}

impl OfflineConfig {
    pub fn new(delta: f64) -> Result<Self> {
        let cfg = Self {
            delta,
            c1: C1,
            c2: C2,
            split: SplitStrategy::ShuffleRoundRobin,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::InvalidConfig(
                "bonus constants must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `ln(8 |S| |A| H / delta)`.
    pub fn log_term(&self, shape: &Shape) -> f64 {
        math::ln(8.0 * shape.num_pairs() as f64 * shape.horizon() as f64 / self.delta)
    }
}

/// The `H`-way split with per-step counts and empirical transition rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    shape: Shape,
    /// Dataset indices assigned to each step.
    pub splits: Vec<Vec<usize>>,
    counts: Vec<Vec<u64>>,
    next_counts: Vec<Vec<u64>>,
    rows: Vec<Vec<f64>>,
}

impl SplitDataset {
    #[inline]
    pub fn count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[h][s * self.shape.actions() + a]
    }

    #[inline]
    pub fn next_count(&self, h: usize, s: usize, a: usize, next: usize) -> u64 {
        let n = self.shape.layer_size(h + 1);
        self.next_counts[h][(s * self.shape.actions() + a) * n + next]
    }

    /// Empirical next-state row at step `h`; `None` when `(s, a)` is absent
    /// from part `h`.
    pub fn row(&self, h: usize, s: usize, a: usize) -> Option<&[f64]> {
        if self.count(h, s, a) == 0 {
            return None;
        }
        let n = self.shape.layer_size(h + 1);
        let start = (s * self.shape.actions() + a) * n;
        Some(&self.rows[h][start..start + n])
    }

    pub fn split_sizes(&self) -> Vec<usize> {
        self.splits.iter().map(Vec::len).collect()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }
}

/// Shuffles the dataset with `rng` and deals it round-robin over the steps.
pub fn split_dataset<R: Rng + ?Sized>(
    data: &Dataset,
    shape: &Shape,
    rng: &mut R,
) -> Result<SplitDataset> {
    let h_max = shape.horizon();
    let k = data.len();
    if k < h_max {
        return Err(Error::DatasetTooSmall { k, horizon: h_max });
    }
    data.check_shape(shape)?;

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut splits = vec![Vec::with_capacity(k / h_max + 1); h_max];
    for (pos, &idx) in order.iter().enumerate() {
        splits[pos % h_max].push(idx);
    }

    let a_count = shape.actions();
    let mut counts: Vec<Vec<u64>> = (0..h_max)
        .map(|h| vec![0; shape.layer_size(h) * a_count])
        .collect();
    let mut next_counts: Vec<Vec<u64>> = (0..h_max)
        .map(|h| vec![0; shape.layer_size(h) * a_count * shape.layer_size(h + 1)])
        .collect();
    for (h, part) in splits.iter().enumerate() {
        let n_next = shape.layer_size(h + 1);
        for &idx in part {
            let traj = &data.trajectories[idx];
            let st = traj.steps[h];
            let next = traj.next_state(h).unwrap_or(0);
            let pair = st.state * a_count + st.action;
            counts[h][pair] += 1;
            next_counts[h][pair * n_next + next] += 1;
        }
    }
    let rows = (0..h_max)
        .map(|h| {
            let n_next = shape.layer_size(h + 1);
            next_counts[h]
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let n = counts[h][i / n_next];
                    if n == 0 {
                        0.0
                    } else {
                        c as f64 / n as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(SplitDataset {
        shape: shape.clone(),
        splits,
        counts,
        next_counts,
        rows,
    })
}

/// Offline confidence bonus of `(s, a)` at step `h`.
///
/// `high_next` / `low_next` are the step-`h + 1` envelope values. With fewer
/// than two samples the bonus is the full remaining value scale.
pub fn offline_bonus(
    h: usize,
    s: usize,
    a: usize,
    split: &SplitDataset,
    high_next: &[f64],
    low_next: &[f64],
    cfg: &OfflineConfig,
) -> f64 {
    let shape = split.shape();
    let scale = (shape.horizon() - h - 1) as f64;
    let n = split.count(h, s, a);
    let row = match split.row(h, s, a) {
        Some(row) if n >= 2 => row,
        _ => return scale,
    };
    let var = math::variance(row, high_next).max(math::variance(row, low_next));
    let l1 = cfg.log_term(shape);
    let n = n as f64;
    let bonus = cfg.c1 * math::sqrt(var * l1 / n) + cfg.c2 * scale * l1 / n;
    bonus.min(scale)
}

/// Splits `data` and runs the upper/lower backward recursion.
///
/// Rewards are taken from `mdp` (they are known to the learner); nothing
/// else of the true model is read.
pub fn compute_envelopes<R: Rng + ?Sized>(
    data: &Dataset,
    mdp: &LayeredMdp,
    cfg: &OfflineConfig,
    rng: &mut R,
) -> Result<ValueEnvelope> {
    cfg.validate()?;
    let split = split_dataset(data, mdp.shape(), rng)?;
    envelopes_from_split(&split, mdp, cfg)
}

/// The backward recursion on an already split dataset.
pub fn envelopes_from_split(
    split: &SplitDataset,
    mdp: &LayeredMdp,
    cfg: &OfflineConfig,
) -> Result<ValueEnvelope> {
    let shape = mdp.shape();
    if split.shape() != shape {
        return Err(Error::ShapeMismatch(
            "split was built for a different model shape".into(),
        ));
    }
    let h_max = shape.horizon();
    let mut low_q = ActionTable::zeros(shape);
    let mut high_q = ActionTable::zeros(shape);
    let mut low_next = vec![0.0];
    let mut high_next = vec![0.0];
    for h in (0..h_max).rev() {
        let n_states = shape.layer_size(h);
        let mut low_cur = vec![f64::NEG_INFINITY; n_states];
        let mut high_cur = vec![f64::NEG_INFINITY; n_states];
        for s in 0..n_states {
            for a in 0..shape.actions() {
                let r = mdp.reward(h, s, a);
                let b = offline_bonus(h, s, a, split, &high_next, &low_next, cfg);
                let (hi_mean, lo_mean) = match split.row(h, s, a) {
                    Some(row) => (math::dot(row, &high_next), math::dot(row, &low_next)),
                    None => (0.0, 0.0),
                };
                let hi = r + hi_mean + b;
                let lo = r + lo_mean - b;
                high_q.set(h, s, a, hi);
                low_q.set(h, s, a, lo);
                high_cur[s] = high_cur[s].max(hi);
                low_cur[s] = low_cur[s].max(lo);
            }
        }
        high_next = high_cur;
        low_next = low_cur;
    }
    ValueEnvelope::from_q_tables(shape, low_q, high_q, cfg.delta)
}

/// Outcome of comparing the step-0 width with its closed-form bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthBoundReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// `max_s D_0(s) <= 2H^2 [c1 sqrt(2H L1 / (K d)) + c2 2H L1 / (K d)]` with
/// `d = d_b_min`. A high-probability statement, so this only reports.
pub fn width_bound_check(
    env: &ValueEnvelope,
    k: usize,
    d_b_min: f64,
    cfg: &OfflineConfig,
) -> Result<WidthBoundReport> {
    if !(d_b_min > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "d_b_min = {d_b_min} must be positive"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let shape = env.shape();
    let h = shape.horizon() as f64;
    let l1 = cfg.log_term(shape);
    let kd = k as f64 * d_b_min;
    let rhs = 2.0 * h * h * (cfg.c1 * math::sqrt(2.0 * h * l1 / kd) + cfg.c2 * 2.0 * h * l1 / kd);
    let lhs = math::max(env.width().layer(0));
    Ok(WidthBoundReport {
        holds: lhs <= rhs,
        lhs,
        rhs,
    })
}

/// Behaviour-policy coverage and the dataset size the minimum-count lemma
/// asks for.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    /// `floor(K / H) >= (8 / d_b_min) ln(H |S| |A| / delta)`.
    pub condition_met: bool,
    /// Smallest positive state-action occupancy.
    pub d_b_min: f64,
    /// `ceil(H (8 / d_b_min) ln(H |S| |A| / delta))`.
    pub required_k: usize,
    /// Exact occupancies `d_h(s, a)`.
    pub occupancy: ActionTable,
    /// Reachable `(h, s, a)` the behaviour policy never takes.
    pub uncovered: Vec<(usize, usize, usize)>,
}

pub fn coverage_check(
    mdp: &LayeredMdp,
    behavior: &StochasticPolicy,
    k: usize,
    delta: f64,
) -> Result<CoverageReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let shape = mdp.shape();
    let occ = occupancy(mdp, behavior);
    let mut d_b_min = f64::INFINITY;
    let mut uncovered = Vec::new();
    for h in 0..shape.horizon() {
        for s in 0..shape.layer_size(h) {
            let reachable = occ.row(h, s).iter().sum::<f64>() > 0.0;
            for a in 0..shape.actions() {
                let d = occ.get(h, s, a);
                if d > 0.0 {
                    d_b_min = d_b_min.min(d);
                } else if reachable {
                    uncovered.push((h, s, a));
                }
            }
        }
    }
    let h = shape.horizon() as f64;
    let per_split = 8.0 / d_b_min * math::ln(h * shape.num_pairs() as f64 / delta);
    let required_k = libm::ceil(h * per_split) as usize;
    let condition_met = (k / shape.horizon()) as f64 >= per_split;
    Ok(CoverageReport {
        condition_met,
        d_b_min,
        required_k,
        occupancy: occ,
        uncovered,
    })
}

//! Optimistic online learners sharing one backward value-iteration engine.
//!
//! All four learners build an empirical model from their own online counts,
//! add an exploration bonus and act greedily. They differ in the bonus and
//! in how the optimistic estimates are capped:
//!
//! | algorithm   | bonus shaped by                 | cap                          |
//! |-------------|---------------------------------|------------------------------|
//! | UCBVI       | trivial envelope `[0, H - h]`   | `Q <= H - h`                 |
//! | Q-shaping   | envelope width and midpoint     | `Q <= highQ`                 |
//! | V-shaping   | envelope width and midpoint     | `V <= highV`                 |
//! | upper-bonus | upper envelope only             | `Q <= H - h`                 |

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::envelope::ValueEnvelope;
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{LayeredMdp, Shape};
use crate::rng::categorical;
use crate::solve::{evaluate_into, solve_optimal, OptimalSolution};
use crate::table::{ActionTable, DeterministicPolicy, StateTable};
use crate::{C1, C2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "kebab-case")
)]
pub enum Algorithm {
    Ucbvi,
    QShaping,
    VShaping,
    UpperBonus,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Self::Ucbvi,
        Self::QShaping,
        Self::VShaping,
        Self::UpperBonus,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Ucbvi => "ucbvi",
            Self::QShaping => "q-shaping",
            Self::VShaping => "v-shaping",
            Self::UpperBonus => "upper-bonus",
        }
    }

    pub fn needs_envelope(self) -> bool {
        !matches!(self, Self::Ucbvi)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm tag `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineConfig {
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OnlineConfig {
    pub fn new(algorithm: Algorithm, episodes: usize, delta: f64) -> Result<Self> {
        let cfg = Self {
            algorithm,
            episodes,
            delta,
            c1: C1,
            c2: C2,
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

    /// `ln(8 |S| |A| H T / delta)`, with `T` floored at one.
    pub fn log_term(&self, shape: &Shape) -> f64 {
        let t = self.episodes.max(1) as f64;
        math::ln(8.0 * shape.num_pairs() as f64 * shape.horizon() as f64 * t / self.delta)
    }
}

/// Per-episode regret trace and final counts of one learner run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config: OnlineConfig,
    /// Seed the caller derived the run's stream from, when known.
    pub seed: Option<u64>,
    /// `V*_0(s) - V^{pi_t}_0(s)` at each episode's sampled initial state.
    pub inst_regret: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub final_counts: Vec<Vec<u64>>,
    /// Filled in by callers with a clock.
    pub wall_time_secs: Option<f64>,
}

impl RunRecord {
    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

/// Counts, empirical model and current optimistic tables of one learner.
#[derive(Clone, Debug)]
pub struct LearnerState {
    /// Episodes completed so far.
    pub episode: usize,
    counts: Vec<Vec<u64>>,
    next_counts: Vec<Vec<u64>>,
    rows: Vec<Vec<f64>>,
    pub q_hat: ActionTable,
    pub v_hat: StateTable,
    pub policy: DeterministicPolicy,
    shape: Shape,
}

impl LearnerState {
    pub fn new(shape: &Shape) -> Self {
        let a = shape.actions();
        let h_max = shape.horizon();
        let counts = (0..h_max)
            .map(|h| vec![0; shape.layer_size(h) * a])
            .collect();
        let next_counts = (0..h_max)
            .map(|h| vec![0; shape.layer_size(h) * a * shape.layer_size(h + 1)])
            .collect();
        let rows = (0..h_max)
            .map(|h| {
                let n = shape.layer_size(h + 1);
                vec![1.0 / n as f64; shape.layer_size(h) * a * n]
            })
            .collect();
        Self {
            episode: 0,
            counts,
            next_counts,
            rows,
            q_hat: ActionTable::zeros(shape),
            v_hat: StateTable::zeros(shape),
            policy: DeterministicPolicy::constant(shape, 0).expect("action 0 exists"),
            shape: shape.clone(),
        }
    }

    #[inline]
    pub fn count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[h][s * self.shape.actions() + a]
    }

    pub fn next_count(&self, h: usize, s: usize, a: usize, next: usize) -> u64 {
        let n = self.shape.layer_size(h + 1);
        self.next_counts[h][(s * self.shape.actions() + a) * n + next]
    }

    /// Empirical next-state row; uniform while `(s, a)` is unvisited.
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.shape.layer_size(h + 1);
        let start = (s * self.shape.actions() + a) * n;
        &self.rows[h][start..start + n]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    fn record(&mut self, h: usize, s: usize, a: usize, next: usize) {
        let pair = s * self.shape.actions() + a;
        let n_next = self.shape.layer_size(h + 1);
        self.counts[h][pair] += 1;
        self.next_counts[h][pair * n_next + next] += 1;
    }

    fn refresh_row(&mut self, h: usize, pair: usize) {
        let n_next = self.shape.layer_size(h + 1);
        let n = self.counts[h][pair] as f64;
        let start = pair * n_next;
        for i in start..start + n_next {
            self.rows[h][i] = self.next_counts[h][i] as f64 / n;
        }
    }
}

/// Bonus shaped by the envelope's midpoint variance and width second moment.
///
/// `h` is the step of `(s, a)`; the envelope is read at layer `h + 1`.
pub fn width_bonus(
    h: usize,
    row: &[f64],
    n: u64,
    env: &ValueEnvelope,
    log_term: f64,
    c1: f64,
    c2: f64,
) -> f64 {
    let range = env.range(h + 1);
    if n <= 1 {
        return range;
    }
    let mid = env.midpoint().layer(h + 1);
    let width = env.width().layer(h + 1);
    let width_sq: f64 = row.iter().zip(width).map(|(p, d)| p * d * d).sum();
    let sigma = math::sqrt(math::variance(row, mid)) + 0.5 * math::sqrt(width_sq);
    let n = n as f64;
    (c1 * sigma * math::sqrt(log_term / n) + c2 * range * log_term / n).min(range)
}

/// Bonus shaped by the upper envelope alone (lower envelope taken as zero).
pub fn upper_only_bonus(
    h: usize,
    row: &[f64],
    n: u64,
    env: &ValueEnvelope,
    log_term: f64,
    c1: f64,
    c2: f64,
) -> f64 {
    let high = env.high_v().layer(h + 1);
    let range = math::max(high).max(0.0);
    if n <= 1 {
        return range;
    }
    let second: f64 = row.iter().zip(high).map(|(p, v)| p * v * v).sum();
    let sigma = 0.5 * math::sqrt(math::variance(row, high)) + 0.5 * math::sqrt(second);
    let n = n as f64;
    (c1 * sigma * math::sqrt(log_term / n) + c2 * range * log_term / n).min(range)
}

/// The bonus `algorithm` would use for `(s, a)` at step `h` given `state`.
///
/// UCBVI ignores `env` and uses the trivial envelope.
pub fn online_bonus(
    h: usize,
    s: usize,
    a: usize,
    state: &LearnerState,
    env: &ValueEnvelope,
    cfg: &OnlineConfig,
) -> f64 {
    let shape = &state.shape;
    let l = cfg.log_term(shape);
    let (row, n) = (state.row(h, s, a), state.count(h, s, a));
    match cfg.algorithm {
        Algorithm::Ucbvi => {
            width_bonus(h, row, n, &ValueEnvelope::trivial(shape), l, cfg.c1, cfg.c2)
        }
        Algorithm::QShaping | Algorithm::VShaping => width_bonus(h, row, n, env, l, cfg.c1, cfg.c2),
        Algorithm::UpperBonus => upper_only_bonus(h, row, n, env, l, cfg.c1, cfg.c2),
    }
}

/// What one episode did.
#[derive(Clone, Debug)]
pub struct Episode<'a> {
    /// One-based episode index.
    pub index: usize,
    pub initial_state: usize,
    /// `(state, action)` executed at each step.
    pub path: &'a [(usize, usize)],
    pub inst_regret: f64,
}

/// A learner bound to a model, stepping one episode at a time.
pub struct Learner<'a> {
    mdp: &'a LayeredMdp,
    optimal: OptimalSolution,
    envelope: ValueEnvelope,
    cfg: OnlineConfig,
    log_term: f64,
    state: LearnerState,
    bonus: Vec<Vec<f64>>,
    dirty: Vec<(usize, usize)>,
    v_policy: StateTable,
    path: Vec<(usize, usize)>,
}

impl<'a> Learner<'a> {
    pub fn new(
        mdp: &'a LayeredMdp,
        env: Option<&ValueEnvelope>,
        cfg: OnlineConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let shape = mdp.shape();
        let envelope = match (cfg.algorithm, env) {
            (Algorithm::Ucbvi, _) => ValueEnvelope::trivial(shape),
            (_, Some(env)) if env.shape() == shape => env.clone(),
            (_, Some(_)) => {
                return Err(Error::ShapeMismatch(
                    "envelope was built for another shape".into(),
                ))
            }
            (alg, None) => {
                return Err(Error::InvalidConfig(format!(
                    "algorithm `{alg}` requires an envelope"
                )));
            }
        };
        let log_term = cfg.log_term(shape);
        let state = LearnerState::new(shape);
        let bonus = (0..shape.horizon())
            .map(|h| {
                (0..shape.layer_size(h) * shape.actions())
                    .map(|pair| {
                        let (s, a) = (pair / shape.actions(), pair % shape.actions());
                        Self::bonus_for(&cfg, &envelope, log_term, &state, h, s, a)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            mdp,
            optimal: solve_optimal(mdp),
            envelope,
            cfg,
            log_term,
            state,
            bonus,
            dirty: Vec::with_capacity(shape.horizon()),
            v_policy: StateTable::zeros(shape),
            path: Vec::with_capacity(shape.horizon()),
        })
    }

    fn bonus_for(
        cfg: &OnlineConfig,
        env: &ValueEnvelope,
        log_term: f64,
        state: &LearnerState,
        h: usize,
        s: usize,
        a: usize,
    ) -> f64 {
        let (row, n) = (state.row(h, s, a), state.count(h, s, a));
        match cfg.algorithm {
            Algorithm::UpperBonus => upper_only_bonus(h, row, n, env, log_term, cfg.c1, cfg.c2),
            _ => width_bonus(h, row, n, env, log_term, cfg.c1, cfg.c2),
        }
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    /// The envelope driving bonuses and caps (the trivial one for UCBVI).
    pub fn envelope(&self) -> &ValueEnvelope {
        &self.envelope
    }

    pub fn optimal(&self) -> &OptimalSolution {
        &self.optimal
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.cfg
    }

    /// Bonus currently in force for `(s, a)` at step `h`.
    pub fn bonus(&self, h: usize, s: usize, a: usize) -> f64 {
        self.bonus[h][s * self.mdp.actions() + a]
    }

    /// Refreshes rows touched by the last episode, then recomputes `Q̂`,
    /// `V̂` and the greedy policy by backward induction.
    pub fn plan(&mut self) {
        let a_count = self.mdp.actions();
        for (h, pair) in core::mem::take(&mut self.dirty) {
            self.state.refresh_row(h, pair);
            let (s, a) = (pair / a_count, pair % a_count);
            self.bonus[h][pair] = Self::bonus_for(
                &self.cfg,
                &self.envelope,
                self.log_term,
                &self.state,
                h,
                s,
                a,
            );
        }

        let shape = self.mdp.shape();
        let alg = self.cfg.algorithm;
        for h in (0..shape.horizon()).rev() {
            let cap = shape.steps_from(h) as f64;
            for s in 0..shape.layer_size(h) {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0;
                for a in 0..a_count {
                    let pre = self.mdp.reward(h, s, a)
                        + math::dot(self.state.row(h, s, a), self.state.v_hat.layer(h + 1))
                        + self.bonus[h][s * a_count + a];
                    let q = match alg {
                        Algorithm::Ucbvi | Algorithm::UpperBonus => pre.min(cap),
                        Algorithm::QShaping => pre.min(self.envelope.high_q().get(h, s, a)),
                        Algorithm::VShaping => pre,
                    };
                    self.state.q_hat.set(h, s, a, q);
                    if q > best {
                        best = q;
                        best_a = a;
                    }
                }
                let v = match alg {
                    Algorithm::VShaping => best.min(self.envelope.high_v().get(h, s)),
                    _ => best,
                };
                self.state.v_hat.set(h, s, v);
                self.state.policy.set(h, s, best_a);
            }
        }
    }

    /// Rolls the current greedy policy out once, updates the counts and
    /// returns the episode's exact regret.
    pub fn act<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Episode<'_> {
        let (initial_state, inst_regret) = self.roll_out(rng);
        Episode {
            index: self.state.episode,
            initial_state,
            path: &self.path,
            inst_regret,
        }
    }

    /// `(state, action)` pairs executed in the last episode.
    pub fn last_path(&self) -> &[(usize, usize)] {
        &self.path
    }

    fn roll_out<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, f64) {
        let mdp = self.mdp;
        let a_count = mdp.actions();
        self.path.clear();
        let s0 = categorical(rng, mdp.initial());
        let mut s = s0;
        for h in 0..mdp.horizon() {
            let a = self.state.policy.action(h, s);
            let next = categorical(rng, mdp.row(h, s, a));
            self.state.record(h, s, a, next);
            self.dirty.push((h, s * a_count + a));
            self.path.push((s, a));
            s = next;
        }
        self.state.episode += 1;

        evaluate_into(mdp, &self.state.policy, &mut self.v_policy);
        let inst_regret = self.optimal.v.get(0, s0) - self.v_policy.get(0, s0);
        (s0, inst_regret)
    }
}

/// Runs `cfg.episodes` episodes of `cfg.algorithm`.
pub fn run_learner<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    env: Option<&ValueEnvelope>,
    cfg: &OnlineConfig,
    rng: &mut R,
) -> Result<RunRecord> {
    run_learner_observed(mdp, env, cfg, rng, |_, _| {})
}

/// [`run_learner`] with a callback after every episode, seeing the learner
/// as planned for that episode and what it did.
pub fn run_learner_observed<R, F>(
    mdp: &LayeredMdp,
    env: Option<&ValueEnvelope>,
    cfg: &OnlineConfig,
    rng: &mut R,
    mut observe: F,
) -> Result<RunRecord>
where
    R: Rng + ?Sized,
    F: FnMut(&Learner<'_>, &Episode<'_>),
{
    let mut learner = Learner::new(mdp, env, cfg.clone())?;
    let mut inst_regret = Vec::with_capacity(cfg.episodes);
    let mut cum_regret = Vec::with_capacity(cfg.episodes);
    let mut total = 0.0;
    for _ in 0..cfg.episodes {
        learner.plan();
        let (initial_state, regret) = learner.roll_out(rng);
        total += regret;
        inst_regret.push(regret);
        cum_regret.push(total);
        let ep = Episode {
            index: learner.state.episode,
            initial_state,
            path: &learner.path,
            inst_regret: regret,
        };
        observe(&learner, &ep);
    }
    Ok(RunRecord {
        config: cfg.clone(),
        seed: None,
        inst_regret,
        cum_regret,
        final_counts: learner.state.counts,
        wall_time_secs: None,
    })
}

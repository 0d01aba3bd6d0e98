//! Lower/upper envelopes around `Q*` and `V*` and the quantities derived
//! from them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::mdp::Shape;
use crate::solve::OptimalSolution;
use crate::table::{ActionTable, StateTable};

/// Per-step lower and upper bounds on the optimal action values, together
/// with the state-value bounds, width, midpoint and per-layer range they
/// induce.
///
/// Every derived table is a function of the two Q-tables; [`from_q_tables`]
/// is the only constructor, so a deserialized envelope is always consistent.
///
/// [`from_q_tables`]: ValueEnvelope::from_q_tables
#[derive(Clone, Debug, PartialEq)]
pub struct ValueEnvelope {
    shape: Shape,
    low_q: ActionTable,
    high_q: ActionTable,
    low_v: StateTable,
    high_v: StateTable,
    width: StateTable,
    midpoint: StateTable,
    /// `max_s highV_h - min_s lowV_h` for `h` in `0..=H` (terminal entry 0).
    ranges: Vec<f64>,
    d_max: f64,
    r_max: f64,
    delta: f64,
}

impl ValueEnvelope {
    pub fn from_q_tables(
        shape: &Shape,
        low_q: ActionTable,
        high_q: ActionTable,
        delta: f64,
    ) -> Result<Self> {
        let h_max = shape.horizon();
        for (name, t) in [("lower", &low_q), ("upper", &high_q)] {
            if t.layers().len() != h_max
                || t.actions() != shape.actions()
                || (0..h_max).any(|h| t.layer(h).len() != shape.layer_size(h) * shape.actions())
            {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "{name} Q-table does not match the shape"
                )));
            }
        }
        let low_v = low_q.greedy_values(shape);
        let high_v = high_q.greedy_values(shape);
        let mut width = StateTable::zeros(shape);
        let mut midpoint = StateTable::zeros(shape);
        for h in 0..=h_max {
            for s in 0..shape.layer_size(h) {
                let (lo, hi) = (low_v.get(h, s), high_v.get(h, s));
                width.set(h, s, hi - lo);
                midpoint.set(h, s, 0.5 * (hi + lo));
            }
        }
        let ranges: Vec<f64> = (0..=h_max)
            .map(|h| math::max(high_v.layer(h)) - math::min(low_v.layer(h)))
            .collect();
        let d_max = (0..h_max)
            .map(|h| math::max(width.layer(h)))
            .fold(f64::NEG_INFINITY, f64::max);
        let r_max = ranges[..h_max]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            shape: shape.clone(),
            low_q,
            high_q,
            low_v,
            high_v,
            width,
            midpoint,
            ranges,
            d_max,
            r_max,
            delta,
        })
    }

    /// The uninformative envelope `lowQ = 0`, `highQ_h = H - h`.
    pub fn trivial(shape: &Shape) -> Self {
        let low = ActionTable::zeros(shape);
        let high = ActionTable::filled(shape, |h| shape.steps_from(h) as f64);
        Self::from_q_tables(shape, low, high, 0.0).expect("tables built from the shape")
    }

    /// The zero-width envelope `lowQ = highQ = Q*`.
    pub fn oracle(shape: &Shape, sol: &OptimalSolution) -> Self {
        Self::from_q_tables(shape, sol.q.clone(), sol.q.clone(), 0.0)
            .expect("solution matches its shape")
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn low_q(&self) -> &ActionTable {
        &self.low_q
    }

    pub fn high_q(&self) -> &ActionTable {
        &self.high_q
    }

    pub fn low_v(&self) -> &StateTable {
        &self.low_v
    }

    pub fn high_v(&self) -> &StateTable {
        &self.high_v
    }

    /// `D_h(s) = highV_h(s) - lowV_h(s)`.
    pub fn width(&self) -> &StateTable {
        &self.width
    }

    /// `M_h(s) = (highV_h(s) + lowV_h(s)) / 2`.
    pub fn midpoint(&self) -> &StateTable {
        &self.midpoint
    }

    /// `R_h` for `h` in `0..=H`.
    pub fn range(&self, h: usize) -> f64 {
        self.ranges[h]
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Confidence parameter the envelope was built with (0 for synthetic ones).
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

//! Explicit high-probability regret bound for Q-shaping.

use crate::error::{Error, Result};
use crate::math;
use crate::{C1, C2};

/// `bound = r_max * gamma_r + d_max * gamma_d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QBound {
    pub gamma_r: f64,
    pub gamma_d: f64,
    pub bound: f64,
}

/// Inputs of [`compute_q_bound`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QBoundInputs {
    pub episodes: usize,
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    pub delta: f64,
    pub r_max: f64,
    pub d_max: f64,
    /// `|PairEff|`.
    pub effective_pairs: usize,
}

/// Evaluates
///
/// ```text
/// L  = ln(8 S A H T / delta),  L3 = ln(T S A H / delta)
/// gamma_r = 2e c1 sqrt(L) sqrt(T H P) + 4e c2 L P ln(1 + T)
///           + (c1 sqrt(L) + 2 c2 L) sqrt(2 T ln(2 / delta))
/// gamma_d = 2e c1 sqrt(L) sqrt(T H P) + 6e S H P L3 ln(1 + T)
///           + (c1 sqrt(L) + 3 S H L3) sqrt(2 T ln(2 / delta))
/// ```
///
/// with `P = |PairEff|`, `c1 = 2`, `c2 = 14/3`.
pub fn compute_q_bound(inp: &QBoundInputs) -> Result<QBound> {
    if inp.episodes == 0 {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    if inp.horizon == 0 || inp.states == 0 || inp.actions == 0 {
        return Err(Error::InvalidArgument(
            "H, |S| and |A| must be positive".into(),
        ));
    }
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return Err(Error::InvalidArgument("delta must lie in (0, 1)".into()));
    }
    if inp.effective_pairs > inp.states * inp.actions {
        return Err(Error::InvalidArgument("|PairEff| exceeds |S| |A|".into()));
    }
    if !(inp.r_max >= 0.0 && inp.d_max >= 0.0) {
        return Err(Error::InvalidArgument(
            "R_max and D_max must be nonnegative".into(),
        ));
    }
    let e = core::f64::consts::E;
    let t = inp.episodes as f64;
    let h = inp.horizon as f64;
    let s = inp.states as f64;
    let sah = s * inp.actions as f64 * h;
    let p = inp.effective_pairs as f64;
    let l = math::ln(8.0 * sah * t / inp.delta);
    let l3 = math::ln(t * sah / inp.delta);
    let log1p_t = math::ln(1.0 + t);
    let mart = math::sqrt(2.0 * t * math::ln(2.0 / inp.delta));
    let lead = 2.0 * e * C1 * math::sqrt(l) * math::sqrt(t * h * p);

    let gamma_r =
        lead + 4.0 * e * C2 * l * p * log1p_t + (C1 * math::sqrt(l) + 2.0 * C2 * l) * mart;
    let gamma_d =
        lead + 6.0 * e * s * h * p * l3 * log1p_t + (C1 * math::sqrt(l) + 3.0 * s * h * l3) * mart;
    Ok(QBound {
        gamma_r,
        gamma_d,
        bound: inp.r_max * gamma_r + inp.d_max * gamma_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> QBoundInputs {
        QBoundInputs {
            episodes: 1000,
            horizon: 4,
            states: 12,
            actions: 3,
            delta: 0.1,
            r_max: 1.5,
            d_max: 0.4,
            effective_pairs: 20,
        }
    }

    #[test]
    fn zero_width_leaves_range_term_only() {
        let b = compute_q_bound(&QBoundInputs {
            d_max: 0.0,
            ..base()
        })
        .unwrap();
        assert_eq!(b.bound, 1.5 * b.gamma_r);
    }

    #[test]
    fn rejects_zero_episodes() {
        assert!(compute_q_bound(&QBoundInputs {
            episodes: 0,
            ..base()
        })
        .is_err());
        assert!(compute_q_bound(&QBoundInputs {
            effective_pairs: 37,
            ..base()
        })
        .is_err());
    }

    #[test]
    fn monotone_in_every_argument() {
        let grid_t = [1usize, 10, 100, 10_000];
        let grid_p = [0usize, 1, 10, 36];
        let grid_x = [0.0, 0.5, 2.0];
        let mut prev_t = 0.0;
        for &episodes in &grid_t {
            let b = compute_q_bound(&QBoundInputs { episodes, ..base() })
                .unwrap()
                .bound;
            assert!(b >= prev_t);
            prev_t = b;
        }
        let mut prev_p = 0.0;
        for &effective_pairs in &grid_p {
            let b = compute_q_bound(&QBoundInputs {
                effective_pairs,
                ..base()
            })
            .unwrap()
            .bound;
            assert!(b >= prev_p);
            prev_p = b;
        }
        let (mut pr, mut pd) = (0.0, 0.0);
        for &x in &grid_x {
            let br = compute_q_bound(&QBoundInputs { r_max: x, ..base() })
                .unwrap()
                .bound;
            let bd = compute_q_bound(&QBoundInputs { d_max: x, ..base() })
                .unwrap()
                .bound;
            assert!(br >= pr && bd >= pd);
            pr = br;
            pd = bd;
        }
    }
}

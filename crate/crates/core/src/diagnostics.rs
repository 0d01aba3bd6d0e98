//! Analysis sets and scalars computed from the true model plus an envelope.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::envelope::ValueEnvelope;
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{LayeredMdp, Shape};
use crate::solve::OptimalSolution;

/// Slack allowed when comparing envelope entries against the optimal values.
pub const SANDWICH_TOL: f64 = 1e-12;

fn check_shapes(shape: &Shape, sol: &OptimalSolution, env: &ValueEnvelope) -> Result<()> {
    if env.shape() != shape {
        return Err(Error::ShapeMismatch(
            "envelope was built for another shape".into(),
        ));
    }
    let h_max = shape.horizon();
    if sol.q.layers().len() != h_max
        || (0..h_max).any(|h| sol.q.layer(h).len() != shape.layer_size(h) * shape.actions())
    {
        return Err(Error::ShapeMismatch(
            "solution does not match the envelope shape".into(),
        ));
    }
    Ok(())
}

/// `(h, s, a)` with `highQ_h(s, a) >= V*_h(s)`, in lexicographic order.
pub fn pair_eff(sol: &OptimalSolution, env: &ValueEnvelope) -> Result<Vec<(usize, usize, usize)>> {
    let shape = env.shape();
    check_shapes(shape, sol, env)?;
    let mut out = Vec::new();
    for h in 0..shape.horizon() {
        for s in 0..shape.layer_size(h) {
            let v = sol.v.get(h, s);
            for a in 0..shape.actions() {
                if env.high_q().get(h, s, a) >= v {
                    out.push((h, s, a));
                }
            }
        }
    }
    Ok(out)
}

/// Effective pair and state sets for one gap threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveSets {
    pub delta_gap: f64,
    pub pair_eff: Vec<(usize, usize, usize)>,
    /// Triples whose one-step upper lookahead under the true kernel falls at
    /// least `delta_gap` below `V*`.
    pub ps: Vec<(usize, usize, usize)>,
    /// States not reachable from the initial support without passing
    /// through a triple in `ps`. Initial states are never included.
    pub pps: Vec<(usize, usize)>,
    /// Triples of `ps` located at a state of `pps`.
    pub bps: Vec<(usize, usize, usize)>,
}

impl EffectiveSets {
    pub fn pair_eff_len(&self) -> usize {
        self.pair_eff.len()
    }

    pub fn ps_len(&self) -> usize {
        self.ps.len()
    }

    pub fn pps_len(&self) -> usize {
        self.pps.len()
    }

    pub fn bps_len(&self) -> usize {
        self.bps.len()
    }

    pub fn in_pair_eff(&self, h: usize, s: usize, a: usize) -> bool {
        self.pair_eff.binary_search(&(h, s, a)).is_ok()
    }
}

/// Computes the pair-effective set and the pseudo-suboptimal family for gap
/// `delta_gap > 0`.
pub fn pseudo_sub_sets(
    mdp: &LayeredMdp,
    sol: &OptimalSolution,
    env: &ValueEnvelope,
    delta_gap: f64,
) -> Result<EffectiveSets> {
    if !(delta_gap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gap threshold {delta_gap} must be positive"
        )));
    }
    let shape = mdp.shape();
    if env.shape() != shape {
        return Err(Error::ShapeMismatch(
            "envelope was built for another shape".into(),
        ));
    }
    let pair_eff = pair_eff(sol, env)?;
    let (h_max, a_count) = (shape.horizon(), shape.actions());

    let mut is_ps: Vec<Vec<bool>> = Vec::with_capacity(h_max);
    let mut ps = Vec::new();
    for h in 0..h_max {
        let mut layer = vec![false; shape.layer_size(h) * a_count];
        let next = env.high_v().layer(h + 1);
        for s in 0..shape.layer_size(h) {
            let threshold = sol.v.get(h, s) - delta_gap;
            for a in 0..a_count {
                let lookahead = mdp.reward(h, s, a) + math::dot(mdp.row(h, s, a), next);
                if lookahead <= threshold {
                    layer[s * a_count + a] = true;
                    ps.push((h, s, a));
                }
            }
        }
        is_ps.push(layer);
    }

    let initial = mdp.initial();
    let mut reached: Vec<Vec<bool>> = (0..h_max)
        .map(|h| vec![false; shape.layer_size(h)])
        .collect();
    for (s, &p) in initial.iter().enumerate() {
        reached[0][s] = p > 0.0;
    }
    for h in 0..h_max.saturating_sub(1) {
        for s in 0..shape.layer_size(h) {
            if !reached[h][s] {
                continue;
            }
            for a in 0..a_count {
                if is_ps[h][s * a_count + a] {
                    continue;
                }
                for (next, &p) in mdp.row(h, s, a).iter().enumerate() {
                    if p > 0.0 {
                        reached[h + 1][next] = true;
                    }
                }
            }
        }
    }
    let pps: Vec<(usize, usize)> = (0..h_max)
        .flat_map(|h| (0..shape.layer_size(h)).map(move |s| (h, s)))
        .filter(|&(h, s)| !reached[h][s] && !(h == 0 && initial[s] > 0.0))
        .collect();
    let bps = ps
        .iter()
        .copied()
        .filter(|&(h, s, _)| !reached[h][s] && !(h == 0 && initial[s] > 0.0))
        .collect();
    Ok(EffectiveSets {
        delta_gap,
        pair_eff,
        ps,
        pps,
        bps,
    })
}

/// Which side of the sandwich an entry breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// One broken sandwich entry. `action` is `None` for state-value entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub state: usize,
    pub action: Option<usize>,
    pub side: Side,
    /// By how much the bound is on the wrong side.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub d_max: f64,
    pub r_max: f64,
    /// Envelope range for each non-terminal step.
    pub ranges: Vec<f64>,
    /// `max V*_h - min V*_h` for each non-terminal step.
    pub optimal_ranges: Vec<f64>,
    pub sandwich_holds: bool,
    pub violations: Vec<Violation>,
}

/// Scalars of `env` and the entrywise check `lowQ <= Q* <= highQ`,
/// `lowV <= V* <= highV`.
pub fn envelope_report(
    mdp: &LayeredMdp,
    sol: &OptimalSolution,
    env: &ValueEnvelope,
) -> Result<EnvelopeReport> {
    let shape = mdp.shape();
    check_shapes(shape, sol, env)?;
    let h_max = shape.horizon();
    let mut violations = Vec::new();
    let mut check = |step, state, action, low: f64, star: f64, high: f64| {
        if low > star + SANDWICH_TOL {
            violations.push(Violation {
                step,
                state,
                action,
                side: Side::Lower,
                excess: low - star,
            });
        }
        if high < star - SANDWICH_TOL {
            violations.push(Violation {
                step,
                state,
                action,
                side: Side::Upper,
                excess: star - high,
            });
        }
    };
    for h in 0..h_max {
        for s in 0..shape.layer_size(h) {
            for a in 0..shape.actions() {
                check(
                    h,
                    s,
                    Some(a),
                    env.low_q().get(h, s, a),
                    sol.q.get(h, s, a),
                    env.high_q().get(h, s, a),
                );
            }
            check(
                h,
                s,
                None,
                env.low_v().get(h, s),
                sol.v.get(h, s),
                env.high_v().get(h, s),
            );
        }
    }
    Ok(EnvelopeReport {
        d_max: env.d_max(),
        r_max: env.r_max(),
        ranges: env.ranges()[..h_max].to_vec(),
        optimal_ranges: sol.ranges[..h_max].to_vec(),
        sandwich_holds: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{generate_mdp, MdpGenSpec};
    use crate::solve::solve_optimal;

    #[test]
    fn trivial_envelope_keeps_every_pair() {
        let mdp = generate_mdp(&MdpGenSpec {
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let sol = solve_optimal(&mdp);
        let env = ValueEnvelope::trivial(mdp.shape());
        assert_eq!(pair_eff(&sol, &env).unwrap().len(), 36);
    }

    #[test]
    fn exact_envelope_keeps_optimal_actions() {
        let mdp = generate_mdp(&MdpGenSpec {
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        let sol = solve_optimal(&mdp);
        let env = ValueEnvelope::oracle(mdp.shape(), &sol);
        for (h, s, a) in pair_eff(&sol, &env).unwrap() {
            assert_eq!(sol.q.get(h, s, a), sol.v.get(h, s));
        }
        let rep = envelope_report(&mdp, &sol, &env).unwrap();
        assert!(rep.sandwich_holds);
        assert_eq!(rep.d_max, 0.0);
        assert_eq!(rep.ranges, rep.optimal_ranges);
    }

    #[test]
    fn huge_gap_empties_everything() {
        let mdp = generate_mdp(&MdpGenSpec {
            seed: 6,
            ..Default::default()
        })
        .unwrap();
        let sol = solve_optimal(&mdp);
        let env = ValueEnvelope::oracle(mdp.shape(), &sol);
        let sets = pseudo_sub_sets(&mdp, &sol, &env, 5.0).unwrap();
        assert_eq!((sets.ps_len(), sets.pps_len(), sets.bps_len()), (0, 0, 0));
        assert!(pseudo_sub_sets(&mdp, &sol, &env, 0.0).is_err());
    }

    #[test]
    fn broken_entry_is_reported() {
        let mdp = generate_mdp(&MdpGenSpec {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let sol = solve_optimal(&mdp);
        let mut high = sol.q.clone();
        for a in 0..3 {
            high.set(2, 1, a, sol.q.get(2, 1, a) - 0.5);
        }
        let env = ValueEnvelope::from_q_tables(mdp.shape(), sol.q.clone(), high, 0.1).unwrap();
        let rep = envelope_report(&mdp, &sol, &env).unwrap();
        assert!(!rep.sandwich_holds);
        assert!(rep
            .violations
            .iter()
            .all(|v| v.step == 2 && v.state == 1 && v.side == Side::Upper));
        assert_eq!(rep.violations.len(), 4);
    }
}

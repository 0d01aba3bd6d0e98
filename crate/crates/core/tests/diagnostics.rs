mod common;

use std::collections::BTreeSet;

use common::ragged_mdp;
use envshape_core::rng::stream;
use envshape_core::{
    collect_dataset, compute_envelopes, envelope_report, pair_eff, pseudo_sub_sets, solve_optimal,
    ActionTable, LayeredMdp, OfflineConfig, OptimalSolution, StochasticPolicy, ValueEnvelope,
};

fn envelope(mdp: &LayeredMdp, k: usize, seed: u64) -> ValueEnvelope {
    let beh = StochasticPolicy::uniform(mdp.shape());
    let data = collect_dataset(
        mdp,
        &beh,
        "uniform",
        k,
        &mut stream(seed, "offline-data", 0),
    )
    .unwrap();
    compute_envelopes(
        &data,
        mdp,
        &OfflineConfig::new(0.1).unwrap(),
        &mut stream(seed, "offline-split", 0),
    )
    .unwrap()
}

fn lookahead(mdp: &LayeredMdp, env: &ValueEnvelope, h: usize, s: usize, a: usize) -> f64 {
    let next = env.high_v().layer(h + 1);
    mdp.reward(h, s, a)
        + mdp
            .row(h, s, a)
            .iter()
            .zip(next)
            .map(|(p, v)| p * v)
            .sum::<f64>()
}

/// Every state visited by some positive-probability path from the initial
/// support that never takes a pseudo-suboptimal triple.
fn enumerate_paths(
    mdp: &LayeredMdp,
    sol: &OptimalSolution,
    env: &ValueEnvelope,
    gap: f64,
) -> BTreeSet<(usize, usize)> {
    fn walk(
        mdp: &LayeredMdp,
        sol: &OptimalSolution,
        env: &ValueEnvelope,
        gap: f64,
        h: usize,
        s: usize,
        seen: &mut BTreeSet<(usize, usize)>,
    ) {
        seen.insert((h, s));
        if h + 1 == mdp.horizon() {
            return;
        }
        for a in 0..mdp.actions() {
            if lookahead(mdp, env, h, s, a) <= sol.v.get(h, s) - gap {
                continue;
            }
            for (next, &p) in mdp.row(h, s, a).iter().enumerate() {
                if p > 0.0 {
                    walk(mdp, sol, env, gap, h + 1, next, seen);
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    for (s, &p) in mdp.initial().iter().enumerate() {
        if p > 0.0 {
            walk(mdp, sol, env, gap, 0, s, &mut seen);
        }
    }
    seen
}

fn instances() -> impl Iterator<Item = (LayeredMdp, ValueEnvelope)> {
    (0..30u64).map(|seed| {
        let mdp = ragged_mdp(300 + seed, 1 + seed as usize % 3, 3, 1 + seed as usize % 3);
        let env = envelope(&mdp, 30 + 60 * (seed as usize % 5), seed);
        (mdp, env)
    })
}

#[test]
fn pair_eff_matches_double_loop() {
    for (mdp, env) in instances() {
        let sol = solve_optimal(&mdp);
        let mut expected = Vec::new();
        for h in 0..mdp.horizon() {
            for s in 0..mdp.shape().layer_size(h) {
                for a in 0..mdp.actions() {
                    if !(env.high_q().get(h, s, a) < sol.v.get(h, s)) {
                        expected.push((h, s, a));
                    }
                }
            }
        }
        assert_eq!(pair_eff(&sol, &env).unwrap(), expected);
    }
}

#[test]
fn pps_matches_path_enumeration() {
    for (mdp, env) in instances() {
        let sol = solve_optimal(&mdp);
        for gap in [0.01, 0.1, 0.3, 1.0] {
            let sets = pseudo_sub_sets(&mdp, &sol, &env, gap).unwrap();
            let reached = enumerate_paths(&mdp, &sol, &env, gap);
            let mut expected = Vec::new();
            for h in 0..mdp.horizon() {
                for s in 0..mdp.shape().layer_size(h) {
                    let initial = h == 0 && mdp.initial()[s] > 0.0;
                    if !initial && !reached.contains(&(h, s)) {
                        expected.push((h, s));
                    }
                }
            }
            assert_eq!(sets.pps, expected);
            assert!(sets
                .bps
                .iter()
                .all(|t| sets.ps.contains(t) && sets.pps.contains(&(t.0, t.1))));
        }
    }
}

#[test]
fn ps_shrinks_as_the_gap_grows() {
    for (mdp, env) in instances() {
        let sol = solve_optimal(&mdp);
        let mut prev: Option<BTreeSet<(usize, usize, usize)>> = None;
        for i in 1..=10 {
            let gap = 0.05 * i as f64;
            let ps: BTreeSet<_> = pseudo_sub_sets(&mdp, &sol, &env, gap)
                .unwrap()
                .ps
                .into_iter()
                .collect();
            if let Some(p) = &prev {
                assert!(ps.is_subset(p));
            }
            prev = Some(ps);
        }
    }
}

#[test]
fn loose_upper_envelope_only_flags_last_step_gaps() {
    for (mdp, _) in instances() {
        let sol = solve_optimal(&mdp);
        let shape = mdp.shape();
        let last = shape.horizon() - 1;
        // one unit above the remaining horizon: before the last step every
        // lookahead reaches V*
        let env = ValueEnvelope::from_q_tables(
            shape,
            ActionTable::zeros(shape),
            ActionTable::filled(shape, |h| shape.steps_from(h) as f64 + 1.0),
            0.1,
        )
        .unwrap();
        let sets = pseudo_sub_sets(&mdp, &sol, &env, 0.01).unwrap();
        assert!(sets.ps.iter().all(|&(h, _, _)| h == last));
        // the terminal layer is worth zero, so the last step compares rewards
        let expected = (0..shape.layer_size(last))
            .flat_map(|s| (0..shape.actions()).map(move |a| (s, a)))
            .filter(|&(s, a)| mdp.reward(last, s, a) <= sol.v.get(last, s) - 0.01)
            .count();
        assert_eq!(sets.ps_len(), expected);
    }
}

#[test]
fn report_matches_table_scans() {
    for (mdp, env) in instances() {
        let sol = solve_optimal(&mdp);
        let rep = envelope_report(&mdp, &sol, &env).unwrap();
        let h_max = mdp.horizon();
        let mut d_max = f64::NEG_INFINITY;
        let mut r_max = f64::NEG_INFINITY;
        let mut holds = true;
        for h in 0..h_max {
            let n = mdp.shape().layer_size(h);
            let hi = (0..n)
                .map(|s| env.high_v().get(h, s))
                .fold(f64::NEG_INFINITY, f64::max);
            let lo = (0..n)
                .map(|s| env.low_v().get(h, s))
                .fold(f64::INFINITY, f64::min);
            r_max = r_max.max(hi - lo);
            assert_eq!(rep.ranges[h], hi - lo);
            let vmax = (0..n)
                .map(|s| sol.v.get(h, s))
                .fold(f64::NEG_INFINITY, f64::max);
            let vmin = (0..n)
                .map(|s| sol.v.get(h, s))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(rep.optimal_ranges[h], vmax - vmin);
            for s in 0..n {
                d_max = d_max.max(env.high_v().get(h, s) - env.low_v().get(h, s));
                holds &= env.low_v().get(h, s) <= sol.v.get(h, s) + 1e-12
                    && sol.v.get(h, s) <= env.high_v().get(h, s) + 1e-12;
                for a in 0..mdp.actions() {
                    let q = sol.q.get(h, s, a);
                    holds &= env.low_q().get(h, s, a) <= q + 1e-12
                        && q <= env.high_q().get(h, s, a) + 1e-12;
                }
            }
        }
        assert_eq!(rep.d_max, d_max);
        assert_eq!(rep.r_max, r_max);
        assert_eq!(rep.sandwich_holds, holds);
        assert_eq!(rep.violations.is_empty(), holds);
    }
}

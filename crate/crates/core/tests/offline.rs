use envshape_core::offline::envelopes_from_split;
use envshape_core::rng::stream;
use envshape_core::sample::Step;
use envshape_core::{
    collect_dataset, compute_envelopes, coverage_check, envelope_report, generate_mdp,
    offline_bonus, solve_optimal, split_dataset, width_bound_check, Dataset, MdpGenSpec,
    OfflineConfig, StochasticPolicy, Trajectory,
};
use proptest::prelude::*;

fn fixed_step_dataset(k: usize) -> Dataset {
    hand_dataset(k, |_| 0)
}

// step 1 is always action 0 -> state 2, from the state chosen by `second`
fn hand_dataset(k: usize, second: impl Fn(usize) -> usize) -> Dataset {
    let trajectories = (0..k)
        .map(|i| Trajectory {
            steps: vec![
                Step {
                    state: i % 3,
                    action: i % 2,
                    reward: 0.0,
                },
                Step {
                    state: second(i),
                    action: 0,
                    reward: 0.0,
                },
                Step {
                    state: 2,
                    action: (i / 3) % 3,
                    reward: 0.0,
                },
                Step {
                    state: i % 3,
                    action: 1,
                    reward: 0.0,
                },
            ],
        })
        .collect();
    Dataset {
        trajectories,
        behavior: "hand".into(),
    }
}

#[test]
fn bonus_closed_form_with_constant_next_values() {
    let mdp = generate_mdp(&MdpGenSpec::default()).unwrap();
    let cfg = OfflineConfig::new(0.1).unwrap();
    let split = split_dataset(
        &fixed_step_dataset(200),
        mdp.shape(),
        &mut stream(0, "s", 0),
    )
    .unwrap();
    assert_eq!(split.count(1, 0, 0), 50);
    let l1 = (8.0f64 * 12.0 * 3.0 * 4.0 / 0.1).ln();
    let expected = (14.0 / 3.0 * 2.0 * l1 / 50.0f64).min(2.0);
    let b = offline_bonus(1, 0, 0, &split, &[0.7; 3], &[0.2; 3], &cfg);
    assert!((b - expected).abs() < 1e-12, "{b} vs {expected}");
    assert!((expected - 1.7456).abs() < 1e-3);
}

#[test]
fn bonus_variance_branch_by_hand() {
    let mdp = generate_mdp(&MdpGenSpec::default()).unwrap();
    let cfg = OfflineConfig::new(0.1).unwrap();
    let data = hand_dataset(4000, |i| (i / 7 + i / 5) % 3);
    let split = split_dataset(&data, mdp.shape(), &mut stream(1, "s", 0)).unwrap();
    let n = split.count(0, 0, 0) as f64;
    let row = split.row(0, 0, 0).unwrap().to_vec();
    assert!(row.iter().filter(|&&p| p > 0.0).count() > 1);
    let high = [1.0, 2.5, 0.5];
    let low = [0.0, 0.0, 3.0];
    let var = |v: &[f64]| {
        let m: f64 = row.iter().zip(v).map(|(p, x)| p * x).sum();
        row.iter()
            .zip(v)
            .map(|(p, x)| p * (x - m) * (x - m))
            .sum::<f64>()
    };
    let l1 = (8.0f64 * 36.0 * 4.0 / 0.1).ln();
    let expected =
        (2.0 * (var(&high).max(var(&low)) * l1 / n).sqrt() + 14.0 / 3.0 * 3.0 * l1 / n).min(3.0);
    let b = offline_bonus(0, 0, 0, &split, &high, &low, &cfg);
    assert!((b - expected).abs() < 1e-12);
}

#[test]
fn last_step_bonus_is_zero() {
    let mdp = generate_mdp(&MdpGenSpec::default()).unwrap();
    let cfg = OfflineConfig::new(0.1).unwrap();
    let split =
        split_dataset(&fixed_step_dataset(40), mdp.shape(), &mut stream(0, "s", 0)).unwrap();
    for s in 0..3 {
        for a in 0..3 {
            assert_eq!(offline_bonus(3, s, a, &split, &[0.0], &[0.0], &cfg), 0.0);
        }
    }
    // unseen pair at step 0 gets the full next-layer scale
    assert_eq!(
        offline_bonus(0, 2, 2, &split, &[0.0; 3], &[0.0; 3], &cfg),
        3.0
    );
}

#[test]
fn sandwich_holds_in_most_draws() {
    let mdp = generate_mdp(&MdpGenSpec {
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let sol = solve_optimal(&mdp);
    let beh = StochasticPolicy::uniform(mdp.shape());
    let cfg = OfflineConfig::new(0.1).unwrap();
    let draws = 200;
    let held = (0..draws)
        .filter(|&d| {
            let data = collect_dataset(
                &mdp,
                &beh,
                "uniform",
                6000,
                &mut stream(d, "offline-data", 0),
            )
            .unwrap();
            let env =
                compute_envelopes(&data, &mdp, &cfg, &mut stream(d, "offline-split", 0)).unwrap();
            envelope_report(&mdp, &sol, &env).unwrap().sandwich_holds
        })
        .count();
    assert!(held as f64 >= 0.9 * draws as f64, "{held}/{draws}");
}

#[test]
fn median_width_is_nonincreasing_in_k() {
    let mdp = generate_mdp(&MdpGenSpec {
        seed: 0,
        ..Default::default()
    })
    .unwrap();
    let beh = StochasticPolicy::uniform(mdp.shape());
    let cfg = OfflineConfig::new(0.1).unwrap();
    let mut medians = Vec::new();
    for k in [250, 1000, 4000, 16000] {
        let mut widths: Vec<f64> = (0..20)
            .map(|seed| {
                let data = collect_dataset(
                    &mdp,
                    &beh,
                    "uniform",
                    k,
                    &mut stream(seed, "offline-data", 0),
                )
                .unwrap();
                compute_envelopes(&data, &mdp, &cfg, &mut stream(seed, "offline-split", 0))
                    .unwrap()
                    .d_max()
            })
            .collect();
        widths.sort_by(f64::total_cmp);
        medians.push(0.5 * (widths[9] + widths[10]));
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
    assert!(medians[3] < medians[0]);
}

#[test]
fn width_bound_rhs_by_hand() {
    let mdp = generate_mdp(&MdpGenSpec::default()).unwrap();
    let beh = StochasticPolicy::uniform(mdp.shape());
    let cfg = OfflineConfig::new(0.1).unwrap();
    let data = collect_dataset(
        &mdp,
        &beh,
        "uniform",
        6000,
        &mut stream(0, "offline-data", 0),
    )
    .unwrap();
    let env = compute_envelopes(&data, &mdp, &cfg, &mut stream(0, "offline-split", 0)).unwrap();
    let d_min = coverage_check(&mdp, &beh, 6000, 0.1).unwrap().d_b_min;
    let rep = width_bound_check(&env, 6000, d_min, &cfg).unwrap();
    let l1 = (11520.0f64).ln();
    let x = 2.0 * 4.0 * l1 / (6000.0 * d_min);
    let rhs = 2.0 * 16.0 * (2.0 * x.sqrt() + 14.0 / 3.0 * x);
    assert!((rep.rhs - rhs).abs() < 1e-9 * rhs);
    let lhs = env
        .width()
        .layer(0)
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(rep.lhs, lhs);
}

#[test]
fn coverage_of_uniform_behaviour() {
    let mdp = generate_mdp(&MdpGenSpec::default()).unwrap();
    let beh = StochasticPolicy::uniform(mdp.shape());
    let rep = coverage_check(&mdp, &beh, 100, 0.1).unwrap();
    let x = 8.0 / rep.d_b_min * (4.0f64 * 36.0 / 0.1).ln();
    assert_eq!(rep.required_k, (4.0 * x).ceil() as usize);
    assert!(!rep.condition_met);
    assert!(
        coverage_check(&mdp, &beh, rep.required_k + 4, 0.1)
            .unwrap()
            .condition_met
    );
    assert!(rep.uncovered.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_partitions_and_counts_its_own_part(k in 4usize..400, seed in 0u64..1000) {
        let mdp = generate_mdp(&MdpGenSpec { seed, ..Default::default() }).unwrap();
        let beh = StochasticPolicy::uniform(mdp.shape());
        let data = collect_dataset(&mdp, &beh, "uniform", k, &mut stream(seed, "d", 0)).unwrap();
        let split = split_dataset(&data, mdp.shape(), &mut stream(seed, "s", 0)).unwrap();
        let sizes = split.split_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), k);
        prop_assert!(sizes.iter().all(|&n| n >= k / 4));
        let mut seen = vec![false; k];
        for part in &split.splits {
            for &i in part {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        for (h, part) in split.splits.iter().enumerate() {
            let mut counts = [0u64; 9];
            for &i in part {
                let st = data.trajectories[i].steps[h];
                counts[st.state * 3 + st.action] += 1;
            }
            for s in 0..3 {
                for a in 0..3 {
                    prop_assert_eq!(split.count(h, s, a), counts[s * 3 + a]);
                    if let Some(row) = split.row(h, s, a) {
                        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn envelope_invariants(k in 8usize..2000, seed in 0u64..1000) {
        let mdp = generate_mdp(&MdpGenSpec { seed, ..Default::default() }).unwrap();
        let beh = StochasticPolicy::uniform(mdp.shape());
        let data = collect_dataset(&mdp, &beh, "uniform", k, &mut stream(seed, "d", 0)).unwrap();
        let cfg = OfflineConfig::new(0.1).unwrap();
        let split = split_dataset(&data, mdp.shape(), &mut stream(seed, "s", 0)).unwrap();
        let env = envelopes_from_split(&split, &mdp, &cfg).unwrap();
        for h in 0..4 {
            let mut max_width = 0.0f64;
            for s in 0..3 {
                let hi = (0..3).map(|a| env.high_q().get(h, s, a)).fold(f64::NEG_INFINITY, f64::max);
                let lo = (0..3).map(|a| env.low_q().get(h, s, a)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(env.high_v().get(h, s), hi);
                prop_assert_eq!(env.low_v().get(h, s), lo);
                prop_assert!(env.width().get(h, s) >= 0.0);
                max_width = max_width.max(env.width().get(h, s));
            }
            prop_assert!(env.range(h) >= max_width);
        }
    }
}

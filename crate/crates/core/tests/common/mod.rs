#![allow(dead_code)]

use envshape_core::rng::stream;
use envshape_core::{ActionTable, LayeredMdp, Shape};
use rand::Rng;

/// Random model with ragged layers, sparse rows and a non-uniform initial
/// distribution. Built without the crate's generator so tests do not share
/// its code path.
pub fn ragged_mdp(seed: u64, horizon: usize, max_states: usize, actions: usize) -> LayeredMdp {
    let mut rng = stream(seed, "test-ragged", 0);
    let sizes: Vec<usize> = (0..horizon)
        .map(|_| rng.random_range(1..=max_states))
        .collect();
    let shape = Shape::new(sizes.clone(), actions).unwrap();
    let transitions = (0..horizon)
        .map(|h| {
            let next = shape.layer_size(h + 1);
            let mut layer = Vec::new();
            for _ in 0..sizes[h] * actions {
                let mut row: Vec<f64> = (0..next)
                    .map(|_| {
                        if rng.random::<f64>() < 0.3 {
                            0.0
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect();
                if row.iter().all(|&p| p == 0.0) {
                    row[rng.random_range(0..next)] = 1.0;
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                layer.extend(row);
            }
            layer
        })
        .collect();
    let rewards = ActionTable::from_layers(
        &shape,
        (0..horizon)
            .map(|h| {
                (0..sizes[h] * actions)
                    .map(|_| rng.random::<f64>())
                    .collect()
            })
            .collect(),
    )
    .unwrap();
    let mut initial: Vec<f64> = (0..sizes[0]).map(|_| rng.random::<f64>()).collect();
    let sum: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|p| *p /= sum);
    LayeredMdp::new(shape, transitions, rewards, initial).unwrap()
}

/// Every deterministic policy as `actions[h][s]`.
pub fn all_policies(shape: &Shape) -> Vec<Vec<Vec<usize>>> {
    let slots: Vec<(usize, usize)> = (0..shape.horizon())
        .flat_map(|h| (0..shape.layer_size(h)).map(move |s| (h, s)))
        .collect();
    let total = shape.actions().pow(slots.len() as u32);
    (0..total)
        .map(|mut code| {
            let mut pol: Vec<Vec<usize>> = (0..shape.horizon())
                .map(|h| vec![0; shape.layer_size(h)])
                .collect();
            for &(h, s) in &slots {
                pol[h][s] = code % shape.actions();
                code /= shape.actions();
            }
            pol
        })
        .collect()
}

/// Value of following `pol` from `(h, s)`, by explicit recursion over paths.
pub fn path_value(mdp: &LayeredMdp, pol: &[Vec<usize>], h: usize, s: usize) -> f64 {
    if h == mdp.horizon() {
        return 0.0;
    }
    let a = pol[h][s];
    let mut v = mdp.reward(h, s, a);
    if h + 1 < mdp.horizon() {
        for (next, &p) in mdp.row(h, s, a).iter().enumerate() {
            if p > 0.0 {
                v += p * path_value(mdp, pol, h + 1, next);
            }
        }
    }
    v
}

use std::collections::BTreeSet;

use cruise_core::planner::is_complete;
use cruise_core::{
    best_path_beam, best_path_exhaustive, build_grid, enumerate_paths, evaluate_path, BeamWidth,
    FluidTrajectory, ForecastSeries, PlanOptions, RoadNetwork,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every edge sequence of 1..=max_edges edges, kept when it chains from
/// `start` without revisiting a node.
fn brute_force_paths(net: &RoadNetwork, start: usize, max_edges: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut seqs: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_edges {
        let mut next = Vec::new();
        for s in &seqs {
            for e in 0..net.edge_count() {
                let mut cand = s.clone();
                cand.push(e);
                next.push(cand);
            }
        }
        for s in &next {
            let mut nodes = vec![start];
            let ok = s.iter().all(|&e| {
                let edge = net.edge(e);
                let chained = edge.tail == *nodes.last().unwrap() && !nodes.contains(&edge.head);
                nodes.push(edge.head);
                chained
            });
            if ok {
                out.insert(s.clone());
            }
        }
        seqs = next;
    }
    out
}

#[test]
fn enumeration_matches_brute_force_on_small_grids() {
    for (rows, cols) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        let net = build_grid(rows, cols, 1.0).unwrap();
        for max_edges in 1..=4 {
            let oracle = brute_force_paths(&net, 0, max_edges);
            for start in 0..net.node_count() {
                let oracle = if start == 0 {
                    oracle.clone()
                } else {
                    brute_force_paths(&net, start, max_edges)
                };
                let paths = enumerate_paths(&net, start, max_edges).unwrap();
                let got: Vec<Vec<usize>> = paths.iter().map(|p| p.edges().to_vec()).collect();
                assert_eq!(got.len(), oracle.len(), "{rows}x{cols} L={max_edges} v0={start}");
                assert_eq!(got.iter().cloned().collect::<BTreeSet<_>>(), oracle);
            }
        }
    }
}

fn random_trajectory(net: &RoadNetwork, dt: f64, horizon: f64, seed: u64) -> FluidTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (horizon / dt).round() as usize + 1;
    let ne = net.edge_count();
    // Piecewise-constant levels over blocks of 50 steps.
    let mut queue = Vec::with_capacity(steps * ne);
    let mut idle = Vec::with_capacity(steps * ne);
    let mut q_level = vec![0.0; ne];
    let mut d_level = vec![0.0; ne];
    for k in 0..steps {
        if k % 50 == 0 {
            for e in 0..ne {
                q_level[e] = rng.random_range(0.0..2.0);
                d_level[e] = rng.random_range(0.0..4.0);
            }
        }
        queue.extend_from_slice(&q_level);
        idle.extend_from_slice(&d_level);
    }
    FluidTrajectory::from_series(ForecastSeries {
        dt,
        start_time: 0.0,
        eps_d: 1e-9,
        edge_count: ne,
        node_count: net.node_count(),
        queue,
        idle_on_edge: idle,
        idle_at_node: vec![0.0; steps * net.node_count()],
        occupied: vec![0.0; steps],
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhaustive_is_the_argmin_over_complete_paths(seed in any::<u64>(), start in 0usize..9) {
        let net = build_grid(3, 3, 2.0).unwrap();
        let traj = random_trajectory(&net, 0.1, 8.0, seed);
        let opts = PlanOptions::default();
        let best = best_path_exhaustive(&net, start, 3, &traj, opts).unwrap();
        for path in enumerate_paths(&net, start, 3).unwrap() {
            if !is_complete(&net, &path, 3) {
                continue;
            }
            let ev = evaluate_path(&net, &path, &traj, opts).unwrap();
            prop_assert!(
                best.expected_time < ev.expected_time
                    || (best.expected_time == ev.expected_time && best.path.edges() <= path.edges())
            );
        }
    }

    #[test]
    fn unbounded_beam_equals_exhaustive(seed in any::<u64>(), start in 0usize..9, max_edges in 1usize..=4) {
        let net = build_grid(3, 3, 2.0).unwrap();
        let traj = random_trajectory(&net, 0.1, 8.0, seed);
        let opts = PlanOptions::default();
        let ex = best_path_exhaustive(&net, start, max_edges, &traj, opts).unwrap();
        let beam = best_path_beam(&net, start, max_edges, &traj, opts, BeamWidth::Unbounded).unwrap();
        prop_assert_eq!(ex.path.edges(), beam.path.edges());
        prop_assert_eq!(ex.expected_time, beam.expected_time);
    }
}

use cruise_core::network::return_delays;
use cruise_core::{build_grid, PopularityWeights, RoadNetwork};
use proptest::prelude::*;

/// Floyd-Warshall over the edge list.
fn all_pairs(net: &RoadNetwork) -> Vec<Vec<f64>> {
    let n = net.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0.0;
    }
    for (e, edge) in net.edges().iter().enumerate() {
        let w = net.travel_time(e);
        if w < d[edge.tail][edge.head] {
            d[edge.tail][edge.head] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

fn random_network() -> impl Strategy<Value = RoadNetwork> {
    (2usize..=25).prop_flat_map(|n| {
        prop::collection::vec(((0..n), (0..n), 1u32..50), 1..4 * n).prop_filter_map("no edges", move |raw| {
            let mut seen = std::collections::BTreeSet::new();
            let edges: Vec<_> = raw
                .into_iter()
                .filter(|&(a, b, _)| a != b && seen.insert((a, b)))
                .map(|(a, b, w)| (a, b, w as f64 * 0.5))
                .collect();
            RoadNetwork::new(n, &edges).ok()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn return_delays_match_all_pairs_oracle(net in random_network()) {
        let oracle = all_pairs(&net);
        let delays = return_delays(&net);
        for (e, edge) in net.edges().iter().enumerate() {
            for u in 0..net.node_count() {
                let expected = net.travel_time(e) + oracle[edge.head][u];
                if expected.is_finite() {
                    prop_assert!((delays[e][u] - expected).abs() < 1e-9);
                } else {
                    prop_assert!(delays[e][u].is_infinite());
                }
            }
        }
    }

    #[test]
    fn transition_and_destination_rows_are_stochastic(net in random_network()) {
        for u in 0..net.node_count() {
            let out = net.out_edges(u);
            if !out.is_empty() {
                let s: f64 = out.iter().map(|&e| net.transition(e)).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
        for e in 0..net.edge_count() {
            let row = net.destination_row(e);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (u, &p) in row.iter().enumerate() {
                if net.trip_time(e, u).is_infinite() {
                    prop_assert_eq!(p, 0.0);
                }
            }
        }
    }
}

#[test]
fn grid_serialization_is_deterministic() {
    let a = build_grid(4, 5, 10.0).unwrap().to_json();
    let b = build_grid(4, 5, 10.0).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn seeded_popularity_rows_stay_stochastic() {
    let net = build_grid(3, 3, 1.0)
        .unwrap()
        .with_popularity(&PopularityWeights::Random { seed: 7 })
        .unwrap();
    for e in 0..net.edge_count() {
        assert!((net.destination_row(e).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

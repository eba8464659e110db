//! Shared fixtures for the benchmarks under `benches/`.

use cruise_core::{build_grid, sample_profile, DemandParams, DemandProfile, FluidState, RoadNetwork};

/// A `rows x cols` grid with 10 s edges and the default demand profile.
pub fn grid_fixture(rows: usize, cols: usize) -> (RoadNetwork, DemandProfile) {
    let net = build_grid(rows, cols, 10.0).expect("valid grid");
    let profile = sample_profile(&net, &DemandParams::default(), 1).expect("valid demand");
    (net, profile)
}

/// `drivers` idle drivers spread evenly over the edges.
pub fn spread_on_edges(net: &RoadNetwork, drivers: f64) -> FluidState {
    let mut s = FluidState::zeros(net.edge_count(), net.node_count());
    let share = drivers / net.edge_count() as f64;
    s.idle_on_edge.iter_mut().for_each(|d| *d = share);
    s
}

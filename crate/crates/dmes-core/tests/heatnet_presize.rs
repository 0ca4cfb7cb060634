//! Pre-sizing against hand-solved transport problems.

use dmes_core::fixtures::{transport_pair_scenario, transport_star_scenario};
use dmes_core::heatnet::{presize_network, pipe_loss, PresizeConfig};
use dmes_core::model::EtaWeight;

#[test]
fn forced_single_path_transport_sizes_from_peak_demand() {
    let s = transport_pair_scenario(4);
    let cfg = PresizeConfig::default();
    let net = presize_network(&s, &[0, 1], &[0], EtaWeight::new(0.0).unwrap(), &cfg).unwrap();
    assert_eq!(net.pipes.len(), 1);
    let pipe = &net.pipes[0];
    // Hand balance: b1's peak demand is served entirely over the pipe; with
    // losses split half per endpoint, the pipe carries peak + loss/2.
    let peak = s.buildings[1]
        .thermal_demand_by_ir[0]
        .series
        .iter()
        .fold(0.0_f64, |a, b| a.max(*b));
    let provisional_loss = pipe_loss(
        &s.dhn_pipe_classes[0],
        s.route_graph.edges[0].length,
        net.flow_temperature,
        net.return_temperature,
        &s.earth_temperature,
    );
    let expected = peak + provisional_loss[0] / 2.0;
    assert!(
        (pipe.max_heat_flow_kw - expected).abs() < 1e-4,
        "pipe flow {} vs hand balance {}",
        pipe.max_heat_flow_kw,
        expected
    );
    // Flow temperature: hottest consumer (70) + 20, spread 25.
    assert_eq!(net.flow_temperature, 90.0);
    assert_eq!(net.return_temperature, 65.0);
    // Small flows land in the smallest class.
    assert_eq!(pipe.class_index, 0);
    assert_eq!(pipe.loss_series_kw.len(), s.steps());
}

#[test]
fn star_flows_match_per_leaf_demands() {
    let s = transport_star_scenario(3);
    let cfg = PresizeConfig::default();
    let net =
        presize_network(&s, &[0, 1, 2], &[0, 1], EtaWeight::new(0.0).unwrap(), &cfg).unwrap();
    assert_eq!(net.pipes.len(), 2);
    // Each leaf pipe carries exactly that leaf's peak demand plus half its
    // own provisional loss (single degree of freedom in the star).
    for (pipe, leaf) in net.pipes.iter().zip([1usize, 2usize]) {
        let peak = s.buildings[leaf]
            .thermal_demand_by_ir[0]
            .series
            .iter()
            .fold(0.0_f64, |a, b| a.max(*b));
        let loss = pipe_loss(
            &s.dhn_pipe_classes[0],
            s.route_graph.edges[pipe.edge_index].length,
            net.flow_temperature,
            net.return_temperature,
            &s.earth_temperature,
        );
        let expected = peak + loss[0] / 2.0;
        assert!(
            (pipe.max_heat_flow_kw - expected).abs() < 1e-4,
            "pipe {} flow {} vs {}",
            pipe.edge_index,
            pipe.max_heat_flow_kw,
            expected
        );
    }
}

#[test]
fn sizing_is_monotone_in_demand() {
    let base = transport_pair_scenario(4);
    let cfg = PresizeConfig::default();
    let eta = EtaWeight::new(0.0).unwrap();
    let net1 = presize_network(&base, &[0, 1], &[0], eta, &cfg).unwrap();
    let mut scaled = base.clone();
    for ir in &mut scaled.buildings[1].thermal_demand_by_ir {
        for v in &mut ir.series {
            *v *= 30.0;
        }
    }
    let net2 = presize_network(&scaled, &[0, 1], &[0], eta, &cfg).unwrap();
    assert!(net2.pipes[0].class_index >= net1.pipes[0].class_index);
    assert!(net2.pipes[0].max_heat_flow_kw > net1.pipes[0].max_heat_flow_kw);
}

#[test]
fn presize_is_deterministic() {
    let s = transport_star_scenario(3);
    let cfg = PresizeConfig::default();
    let eta = EtaWeight::new(0.5).unwrap();
    let a = presize_network(&s, &[0, 1, 2], &[0, 1], eta, &cfg).unwrap();
    let b = presize_network(&s, &[0, 1, 2], &[0, 1], eta, &cfg).unwrap();
    assert_eq!(a, b);
}

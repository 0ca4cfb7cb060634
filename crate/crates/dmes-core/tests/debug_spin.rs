use dmes_core::benders::{Benders, BendersConfig};
use dmes_core::fixtures::transport_pair_scenario;
use dmes_core::heatnet::pipe_loss;
use dmes_core::model::*;

#[test]
#[ignore]
fn trace_presize_benders() {
    let s = transport_pair_scenario(4);
    let t_fl = 90.0;
    let t_rf = 65.0;
    let pipes = vec![SizedPipe {
        edge_index: 0,
        class_index: 0,
        max_heat_flow_kw: 0.0,
        max_mass_flow_tph: 0.0,
        loss_series_kw: pipe_loss(&s.dhn_pipe_classes[0], 40.0, t_fl, t_rf, &s.earth_temperature),
    }];
    let structure = StructureDecision {
        buildings: vec![0, 1],
        groups: vec![vec![0], vec![1]],
        networks: vec![NetworkDecision { members: vec![0, 1], pipes, flow_temperature: t_fl, return_temperature: t_rf }],
    };
    let cfg = ModelConfig { heat_only: true, with_pipe_flows: true, ..ModelConfig::default() };
    let gp = build_group_problem(&s, &structure, EtaWeight::new(0.0).unwrap(), &cfg).unwrap();
    eprintln!("problem: {} vars {} rows", gp.milp.variables.len(), gp.milp.constraints.len());
    let mut engine = Benders::new(&gp.milp, BendersConfig::default()).unwrap();
    for i in 0..12 {
        let t0 = std::time::Instant::now();
        let done = engine.iterate().unwrap();
        let row = engine.trace.last().unwrap();
        eprintln!(
            "iter {i}: done={done} lb={:.4} ub={:.4} gap={:.3e} cuts={} dt={:.2}s",
            row.lower_bound, row.upper_bound, row.gap, row.cuts_added, t0.elapsed().as_secs_f64()
        );
        if done { break; }
    }
}

#[test]
#[ignore]
fn isolate_master_at_iter3() {
    use dmes_core::milp::*;
    let s = transport_pair_scenario(4);
    let t_fl = 90.0;
    let t_rf = 65.0;
    let pipes = vec![SizedPipe {
        edge_index: 0,
        class_index: 0,
        max_heat_flow_kw: 0.0,
        max_mass_flow_tph: 0.0,
        loss_series_kw: pipe_loss(&s.dhn_pipe_classes[0], 40.0, t_fl, t_rf, &s.earth_temperature),
    }];
    let structure = StructureDecision {
        buildings: vec![0, 1],
        groups: vec![vec![0], vec![1]],
        networks: vec![NetworkDecision { members: vec![0, 1], pipes, flow_temperature: t_fl, return_temperature: t_rf }],
    };
    let cfg = ModelConfig { heat_only: true, with_pipe_flows: true, ..ModelConfig::default() };
    let gp = build_group_problem(&s, &structure, EtaWeight::new(0.0).unwrap(), &cfg).unwrap();
    let mut engine = Benders::new(&gp.milp, BendersConfig::default()).unwrap();
    for i in 0..3 {
        engine.iterate().unwrap();
        eprintln!("done iter {i}");
    }
    let master = engine.master_problem().clone();
    eprintln!("master: {} vars {} rows", master.variables.len(), master.constraints.len());
    let mut buf = Vec::new();
    write_lp(&master, &mut buf).unwrap();
    eprintln!("{}", String::from_utf8(buf).unwrap());
    let mut cfg2 = MilpConfig::default();
    cfg2.max_nodes = 2000;
    let m = solve_milp(&master, &cfg2).unwrap();
    eprintln!("master status {:?} obj {} nodes {}", m.status, m.objective, m.node_count);
}

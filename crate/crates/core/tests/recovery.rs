mod common;

use std::time::Duration;

use proptest::prelude::*;

use common::*;
use vrpsa::instance::Customer;
use vrpsa::pipeline::{
    check_budget, ordinary_intervals, reroute, reschedule, route_value, tsp_upper_bound, Recovery, Report, Trace,
};
use vrpsa::roadnet::{brute_force_stsp, WeightMode};
use vrpsa::solve::Backend;
use vrpsa::{solve_vrpsa, validate, PipelineConfig, RoadType, VrpSaInstance};

/// Two customers each reached by a slow ordinary spoke or an AV-enabled
/// detour through node 3; both spokes fill the horizon, budget 1.
fn spoke_instance(fixed_cost_hdv: f64) -> VrpSaInstance {
    use RoadType::{AvEnabled as A, Ordinary as O};
    let arcs = [
        (0, 1, O, 1.0, 2.0),
        (1, 0, O, 1.0, 2.0),
        (0, 2, O, 1.0, 2.0),
        (2, 0, O, 1.0, 2.0),
        (0, 3, A, 1.4, 1.0),
        (3, 0, A, 1.4, 1.0),
        (3, 1, A, 1.4, 1.0),
        (1, 3, A, 1.4, 1.0),
        (3, 2, A, 1.4, 1.0),
        (2, 3, A, 1.4, 1.0),
    ];
    VrpSaInstance {
        name: "spokes".into(),
        network: net_from_arcs(4, &arcs),
        depot: 0,
        customers: vec![Customer { node: 1, demand: 1.0, label: 1 }, Customer { node: 2, demand: 1.0, label: 2 }],
        capacity: 1.0,
        av_count: 2,
        hdv_count: 2,
        fixed_cost_av: 1.0,
        fixed_cost_hdv,
        eta1: 0.5,
        eta2: 1.2,
        horizon: 4.0,
        budget: 1,
        intervals: 4,
        layers: 2,
    }
}

#[test]
fn rebuilt_route_takes_the_detour() {
    let inst = spoke_instance(2.0);
    let sol = solve_vrpsa(&inst, &PipelineConfig::default()).unwrap();
    assert_eq!(sol.recovery, Recovery::Rerouted);
    assert!(sol.unserved.is_empty() && sol.fallback.is_empty());
    assert_eq!(sol.routes.len(), 2);
    assert!(sol.routes.iter().any(|r| r.nodes.contains(&3)));
    // one direct spoke at 2.4 plus one detour at 2.8, two AVs
    assert!((sol.routing_cost - 5.2).abs() < 1e-9);
    assert_eq!(sol.fixed_cost, 2.0);
    assert!(validate(&inst, &sol).passed());
    assert!(sol.trace.rows.iter().any(|r| r.step == "accept" && r.note == "rebuilt"));
}

#[test]
fn expensive_rebuild_falls_back_to_an_hdv() {
    let inst = spoke_instance(1.0);
    let sol = solve_vrpsa(&inst, &PipelineConfig::default()).unwrap();
    assert_eq!(sol.recovery, Recovery::Rerouted);
    assert_eq!(sol.unserved.len(), 1);
    assert_eq!(sol.fallback, vec![2]);
    let hdv = sol.routes.iter().find(|r| r.vehicle == 2).unwrap();
    assert_eq!(hdv.customers, sol.unserved);
    // AV spoke 2.4 plus HDV spoke 2
    assert!((sol.routing_cost - 4.4).abs() < 1e-9);
    assert!(validate(&inst, &sol).passed());
}

#[test]
fn no_hdv_left_is_infeasible() {
    let inst = VrpSaInstance { hdv_count: 0, ..spoke_instance(1.0) };
    assert!(matches!(solve_vrpsa(&inst, &PipelineConfig::default()), Err(vrpsa::Error::Infeasible(_))));
}

#[test]
fn random_order_is_seeded() {
    let inst = spoke_instance(2.0);
    let cfg = PipelineConfig { priority: false, seed: 7, ..PipelineConfig::default() };
    let a = solve_vrpsa(&inst, &cfg).unwrap();
    let b = solve_vrpsa(&inst, &cfg).unwrap();
    assert_eq!(a.routes, b.routes);
    assert!(validate(&inst, &a).passed());
}

#[test]
fn reroute_outcome_partitions_customers() {
    let inst = spoke_instance(1.0);
    let routes = vrpsa::pipeline::phase1_routes(&inst, vrpsa::pipeline::FleetMode::AvOnly, 0).unwrap();
    let mut trace = Trace::default();
    let out = reroute(&inst, &routes, &PipelineConfig::default(), &mut trace).unwrap();
    let mut all: Vec<usize> = out.accepted.iter().flat_map(|r| r.customers.clone()).chain(out.unserved.clone()).collect();
    all.sort();
    assert_eq!(all, vec![1, 2]);
    assert!(check_budget(&ordinary_intervals(&out.accepted, &inst.network), inst.budget).is_feasible());
    assert_eq!(trace.rows.iter().filter(|r| r.step == "pop").count(), 2);
}

#[test]
fn route_value_by_hand() {
    let inst = spoke_instance(1.0);
    let net = &inst.network;
    let detour = net.path_edges(&[0, 3, 1, 3, 0]).unwrap();
    // four AV-enabled edges at 1.4: AV cost 2.8, weight (1 - 0.5) / 0.5
    assert!((route_value(net, &detour, 0.5, 1.2) - 2.8).abs() < 1e-12);
    let spoke = net.path_edges(&[0, 1, 0]).unwrap();
    // two ordinary edges: AV cost 2.4, weight (1 - 1.2) / 1.2
    assert!((route_value(net, &spoke, 0.5, 1.2) + 0.4).abs() < 1e-12);
}

#[test]
fn tsp_bound_matches_exhaustive_tour() {
    for seed in 0..10 {
        let inst = random_toy(
            300 + seed,
            &ToySpec {
                max_nodes: 6,
                max_customers: 3,
                av: 1,
                max_hdv: 1,
                max_intervals: 1,
                horizon_factor: 1.0,
                capacity: 10.0,
                unit_grid: false,
            },
        );
        let cs = inst.customer_nodes();
        let ub = tsp_upper_bound(&cs, &inst).unwrap();
        let mut required = cs.clone();
        required.push(inst.depot);
        let (_, opt) = brute_force_stsp(&inst.network, &required, inst.depot, WeightMode::HdvCost).unwrap();
        // three customers: nearest neighbour plus 2-opt is exact
        assert!((ub - opt).abs() < 1e-9, "seed {seed}: bound {ub}, optimum {opt}");
    }
}

fn solved() -> (VrpSaInstance, vrpsa::Solution) {
    let inst = spoke_instance(2.0);
    let sol = solve_vrpsa(&inst, &PipelineConfig::default()).unwrap();
    (inst, sol)
}

fn fails_with(inst: &VrpSaInstance, sol: &vrpsa::Solution, needle: &str) {
    match validate(inst, sol) {
        Report::Fail(why) => assert!(why.iter().any(|w| w.contains(needle)), "{why:?} lacks {needle}"),
        Report::Pass => panic!("expected a failure mentioning {needle}"),
    }
}

#[test]
fn validate_rejects_late_return() {
    let (inst, mut sol) = solved();
    for t in &mut sol.routes[0].times {
        *t += inst.horizon;
    }
    fails_with(&inst, &sol, "horizon");
}

#[test]
fn validate_rejects_budget_excess() {
    let (inst, sol) = solved();
    let tight = VrpSaInstance { budget: 0, ..inst };
    fails_with(&tight, &sol, "budget");
}

#[test]
fn validate_rejects_double_service() {
    let (inst, mut sol) = solved();
    let c = sol.routes[0].customers[0];
    sol.routes[1].customers.push(c);
    assert!(!validate(&inst, &sol).passed());
}

#[test]
fn validate_rejects_wrong_cost() {
    let (inst, mut sol) = solved();
    sol.routing_cost += 1.0;
    fails_with(&inst, &sol, "cost");
}

#[test]
fn validate_rejects_broken_walk() {
    let (inst, mut sol) = solved();
    sol.routes[0].edges.reverse();
    assert!(!validate(&inst, &sol).passed());
}

fn chain_strategy() -> impl Strategy<Value = (Vec<Vec<(bool, u8)>>, usize, u8, bool)> {
    (
        prop::collection::vec(prop::collection::vec((any::<bool>(), 1u8..5), 1..5), 2..4),
        1usize..3,
        0u8..10,
        any::<bool>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescheduling_keeps_routes_and_cost((segs, budget, slack, flexible) in chain_strategy()) {
        let per: Vec<Vec<(RoadType, f64)>> = segs
            .iter()
            .map(|s| s.iter().map(|&(o, d)| (if o { RoadType::Ordinary } else { RoadType::AvEnabled }, d as f64)).collect())
            .collect();
        let (net, routes) = chains(&per, (0.8, 1.25));
        let horizon = routes.iter().map(|r| r.return_time()).fold(0.0, f64::max) + slack as f64;
        let out = reschedule(&routes, &net, budget, horizon, flexible, &Backend::default(), Duration::from_secs(10)).unwrap();
        if let Some(out) = out {
            prop_assert_eq!(out.len(), routes.len());
            for (a, b) in out.iter().zip(&routes) {
                prop_assert_eq!(&a.edges, &b.edges);
                prop_assert_eq!(&a.nodes, &b.nodes);
                prop_assert!(a.return_time() <= horizon + 1e-9);
                prop_assert!(a.departure() >= -1e-9);
                if !flexible {
                    let shift = a.departure() - b.departure();
                    for (x, y) in a.times.iter().zip(&b.times) {
                        prop_assert!((x - y - shift).abs() < 1e-9);
                    }
                }
            }
            prop_assert!(check_budget(&ordinary_intervals(&out, &net), budget).is_feasible());
        }
    }
}

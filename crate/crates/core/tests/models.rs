mod common;

use std::collections::BTreeMap;
use std::time::Duration;

use proptest::prelude::*;

use common::*;
use vrpsa::expand::{expand_graph, prune_network, ArcKind, PrunedNetwork};
use vrpsa::model::{build_exact_milp, build_resource_allocation_milp, export_lp, ExactOptions, MilpModel, Sense, VarKind};
use vrpsa::roadnet::{shortest_path, WeightMode};
use vrpsa::solve::{decode_solution, solve, Backend, SolveStatus};
use vrpsa::VrpSaInstance;

fn spec() -> ToySpec {
    ToySpec {
        max_nodes: 6,
        max_customers: 3,
        av: 2,
        max_hdv: 1,
        max_intervals: 4,
        horizon_factor: 1.0,
        capacity: 2.0,
        unit_grid: false,
    }
}

fn graph(inst: &VrpSaInstance) -> vrpsa::ExpandedGraph {
    expand_graph(&PrunedNetwork::whole(&inst.network), inst.layers, &inst.customer_nodes(), inst.depot).unwrap()
}

/// Parsed LP document: objective, rows by name, bounds, binaries.
#[derive(Debug, Default)]
struct LpDoc {
    objective: BTreeMap<String, f64>,
    rows: BTreeMap<String, (BTreeMap<String, f64>, String, f64)>,
    bounds: BTreeMap<String, (f64, f64)>,
    binaries: Vec<String>,
}

fn num(tok: &str) -> Option<f64> {
    match tok {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn terms(tokens: &[&str]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &t in tokens {
        match t {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => match num(t) {
                Some(c) => coef = Some(c),
                None => {
                    let (s, name) = match t.strip_prefix('-') {
                        Some(rest) => (-sign, rest),
                        None => (sign, t),
                    };
                    *out.entry(name.to_string()).or_insert(0.0) += s * coef.unwrap_or(1.0);
                    sign = 1.0;
                    coef = None;
                }
            },
        }
    }
    out
}

fn read_lp(text: &str) -> LpDoc {
    let mut doc = LpDoc::default();
    let mut section = "";
    let mut statements: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if !line.starts_with(' ') {
            section = match line {
                "Minimize" => "obj",
                "Subject To" => "rows",
                "Bounds" => "bounds",
                "Binaries" => "bin",
                "End" => "end",
                other => panic!("unexpected section {other}"),
            };
            continue;
        }
        if line.starts_with("    ") {
            let last = statements.last_mut().expect("continuation follows a statement");
            last.1.push(' ');
            last.1.push_str(line.trim());
        } else {
            statements.push((section.to_string(), line.trim().to_string()));
        }
    }
    for (section, s) in statements {
        let toks: Vec<&str> = s.split_whitespace().collect();
        match section.as_str() {
            "obj" => doc.objective = terms(&toks[1..]),
            "rows" => {
                let name = toks[0].trim_end_matches(':').to_string();
                let op = toks.iter().position(|t| ["<=", ">=", "="].contains(t)).expect("row sense");
                doc.rows.insert(name, (terms(&toks[1..op]), toks[op].to_string(), num(toks[op + 1]).unwrap()));
            }
            "bounds" => {
                let b = if toks.len() == 5 {
                    (toks[2], (num(toks[0]).unwrap(), num(toks[4]).unwrap()))
                } else if toks[1] == "=" {
                    (toks[0], (num(toks[2]).unwrap(), num(toks[2]).unwrap()))
                } else if toks[1] == "free" {
                    (toks[0], (f64::NEG_INFINITY, f64::INFINITY))
                } else {
                    (toks[0], (num(toks[2]).unwrap(), f64::INFINITY))
                };
                doc.bounds.insert(b.0.to_string(), b.1);
            }
            "bin" => doc.binaries.extend(toks.iter().map(|t| t.to_string())),
            _ => {}
        }
    }
    doc
}

fn assert_round_trip(model: &MilpModel) {
    let doc = read_lp(&export_lp(model).unwrap());
    let name = |j: usize| model.vars[j].name.clone();
    let obj: BTreeMap<String, f64> = model.objective.iter().filter(|t| t.1 != 0.0).map(|&(j, a)| (name(j), a)).collect();
    assert_eq!(doc.objective, obj);
    assert_eq!(doc.rows.len(), model.constraints.len());
    for c in &model.constraints {
        let (t, op, rhs) = &doc.rows[&c.name];
        let want: BTreeMap<String, f64> = c.terms.iter().map(|&(j, a)| (name(j), a)).collect();
        assert_eq!(t, &want, "row {}", c.name);
        let sense = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        assert_eq!((op.as_str(), *rhs), (sense, c.rhs), "row {}", c.name);
    }
    let bins: Vec<String> = model.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.clone()).collect();
    assert_eq!(doc.binaries, bins);
    for v in model.vars.iter().filter(|v| v.kind == VarKind::Continuous) {
        let b = doc.bounds.get(&v.name).copied().unwrap_or((0.0, f64::INFINITY));
        assert_eq!(b, (v.lb, v.ub), "bounds of {}", v.name);
    }
}

#[test]
fn lp_export_round_trips() {
    for seed in 0..8 {
        let inst = random_toy(seed, &spec());
        let ge = graph(&inst);
        assert_round_trip(&build_exact_milp(&inst, &ge, &inst.time_grid(), ExactOptions::default()));
        assert_round_trip(&build_resource_allocation_milp(&inst, &ge, ExactOptions::default()));
        let flex = ExactOptions { flexible_time: true, soft_transition: false, budget: true };
        assert_round_trip(&build_exact_milp(&inst, &ge, &inst.time_grid(), flex));
    }
}

#[test]
fn decoded_toys_are_walks() {
    let mut decoded = 0;
    for seed in 0..12 {
        let inst = random_toy(seed, &spec());
        let ge = graph(&inst);
        let model = build_exact_milp(&inst, &ge, &inst.time_grid(), ExactOptions::default());
        let res = solve(&model, &Backend::default(), Duration::from_secs(30)).unwrap();
        if res.status != SolveStatus::Optimal {
            assert_eq!(res.status, SolveStatus::Infeasible);
            continue;
        }
        decoded += 1;
        let sol = decode_solution(&res, &model, &ge, &inst).unwrap();
        assert!((sol.total() - res.objective.unwrap()).abs() < 1e-6);
        let mut served: Vec<usize> = sol.routes.iter().flat_map(|r| r.served.clone()).collect();
        served.sort();
        assert_eq!(served, inst.customer_nodes());
        for r in &sol.routes {
            assert_eq!((r.nodes[0], *r.nodes.last().unwrap()), (inst.depot, inst.depot));
            assert!(inst.network.path_edges(&r.nodes).is_some());
            assert_eq!(r.times.len(), r.nodes.len());
            for (w, t) in r.nodes.windows(2).zip(r.times.windows(2)) {
                let e = inst.network.edge(inst.network.find_edge(w[0], w[1]).unwrap());
                assert!((t[1] - t[0] - e.time).abs() < 1e-6);
            }
            assert!(r.times.iter().all(|&t| t >= -1e-9 && t <= inst.horizon + 1e-6));
            let load: f64 = r.served.iter().map(|&c| inst.demand_of(c).unwrap()).sum();
            assert!(load <= inst.capacity);
        }
    }
    assert!(decoded >= 6, "only {decoded} feasible toys");
}

#[test]
fn budget_free_relaxation_is_a_lower_bound() {
    for seed in 0..10 {
        let inst = random_toy(seed, &spec());
        let ge = graph(&inst);
        let grid = inst.time_grid();
        let tight = brute_force_exact(&inst, &ge, &grid);
        let free = solve(
            &build_exact_milp(&inst, &ge, &grid, ExactOptions { budget: false, ..Default::default() }),
            &Backend::default(),
            Duration::from_secs(30),
        )
        .unwrap();
        if let Some(t) = tight {
            assert!(free.objective.unwrap() <= t + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_model_matches_enumeration(seed in 1000u64..100_000) {
        let inst = random_toy(seed, &spec());
        let ge = graph(&inst);
        let grid = inst.time_grid();
        let res = solve(&build_exact_milp(&inst, &ge, &grid, ExactOptions::default()), &Backend::default(), Duration::from_secs(30)).unwrap();
        let want = brute_force_exact(&inst, &ge, &grid);
        match (res.status, want) {
            (SolveStatus::Optimal, Some(w)) => prop_assert!((res.objective.unwrap() - w).abs() < 1e-6),
            (SolveStatus::Infeasible, None) => {}
            (s, w) => prop_assert!(false, "solver {:?} vs enumeration {:?}", s, w),
        }
    }

    #[test]
    fn expanded_graph_shape(seed in 0u64..100_000) {
        let inst = random_toy(seed, &spec());
        let ge = graph(&inst);
        let n = inst.network.num_nodes();
        let m = inst.network.num_edges();
        let l = inst.layers;
        prop_assert_eq!(ge.num_nodes(), l * n + 1);
        prop_assert_eq!(ge.arcs().len(), l * m + (l - 1) * inst.customers.len() + l);
        prop_assert!(ge.out_arcs(ge.sink()).is_empty());
        prop_assert!(ge.in_arcs(ge.source()).is_empty());
        for a in ge.arcs() {
            match (a.kind, ge.split(a.tail), ge.split(a.head)) {
                (ArcKind::Road { .. }, Some((lt, _)), Some((lh, _))) => prop_assert_eq!(lt, lh),
                (ArcKind::Road { .. }, Some((0, _)), None) => {}
                (ArcKind::CustomerTransition, Some((lt, vt)), Some((lh, vh))) => {
                    prop_assert_eq!((lh, vh), (lt + 1, vt));
                    prop_assert!(inst.demand_of(ge.project(a.tail)).is_some());
                }
                (ArcKind::DepotToSink, Some((_, v)), None) => prop_assert_eq!(ge.base.original(v), inst.depot),
                other => prop_assert!(false, "unexpected arc {:?}", other),
            }
        }
    }

    #[test]
    fn pruning_keeps_shortest_paths(seed in 0u64..100_000) {
        let inst = random_toy(seed, &spec());
        let pn = prune_network(&inst.network, &inst.customer_nodes(), inst.depot, inst.eta1, inst.eta2).unwrap();
        let mut req = inst.customer_nodes();
        req.push(inst.depot);
        for mode in [WeightMode::HdvCost, inst.av_mode()] {
            for &a in &req {
                for &b in &req {
                    if a == b {
                        continue;
                    }
                    let (_, full) = shortest_path(&inst.network, a, b, mode).unwrap();
                    let (_, kept) = shortest_path(&pn.network, pn.local(a).unwrap(), pn.local(b).unwrap(), mode).unwrap();
                    prop_assert!((full - kept).abs() < 1e-9);
                }
            }
        }
    }
}

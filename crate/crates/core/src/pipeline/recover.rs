//! Feasibility recovery: shifting schedules, then rebuilding single routes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expand::{expand_graph, prune_network, ExpandedGraph};
use crate::instance::{VehicleKind, VrpSaInstance};
use crate::model::{build_rerouting_milp, build_rescheduling_milp, MilpModel};
use crate::roadnet::{compute_k, EdgeId, NodeId, RoadNetwork, RoadType, WeightMode};
use crate::solve::{decode_solution, solve, Backend, SolveResult};

use super::budget::{check_budget, derive_subroutes, infeasible_intervals, ordinary_intervals, SubRoute};
use super::phase1::Closure;
use super::{PipelineConfig, Route, Trace};

/// Priority of an AV route: what it saves on AV-enabled roads minus what it
/// loses on ordinary ones, relative to an HDV.
pub fn route_value(net: &RoadNetwork, edges: &[EdgeId], eta1: f64, eta2: f64) -> f64 {
    let (mut c1, mut c2) = (0.0, 0.0);
    for &e in edges {
        let edge = net.edge(e);
        match edge.road {
            RoadType::AvEnabled => c1 += edge.av_cost(eta1, eta2),
            RoadType::Ordinary => c2 += edge.av_cost(eta1, eta2),
        }
    }
    (1.0 - eta1) / eta1 * c1 + (1.0 - eta2) / eta2 * c2
}

/// HDV-cost closed tour over `customers` by nearest neighbour and 2-opt.
pub fn tsp_upper_bound(customers: &[NodeId], inst: &VrpSaInstance) -> Result<f64> {
    let cl = Closure::new(&inst.network, inst.depot, customers, WeightMode::HdvCost)?;
    let n = cl.nodes.len();
    let tour_cost = |seq: &[usize]| -> f64 {
        let mut at = 0;
        let mut total = 0.0;
        for &c in seq.iter().chain(std::iter::once(&0)) {
            total += cl.cost[at][c];
            at = c;
        }
        total
    };
    let mut left: Vec<usize> = (1..n).collect();
    let mut seq = Vec::with_capacity(n - 1);
    let mut at = 0;
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| cl.cost[at][*a.1].total_cmp(&cl.cost[at][*b.1]))
            .expect("customers left");
        at = left.remove(k);
        seq.push(at);
    }
    let mut best = tour_cost(&seq);
    loop {
        let mut improved = false;
        for i in 0..seq.len() {
            for j in i + 1..seq.len() {
                let mut s = seq.clone();
                s[i..=j].reverse();
                let c = tour_cost(&s);
                if c < best - 1e-9 {
                    best = c;
                    seq = s;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}

/// Re-times a route so sub-route `r` spans `bounds[r]`. Edge times inside a
/// sub-route are nominal, or interpolated within their stretch bounds.
fn retime(route: &Route, subs: &[SubRoute], bounds: &[(f64, f64)], net: &RoadNetwork, flexible: bool) -> Route {
    let mut times = Vec::with_capacity(route.times.len());
    times.push(bounds.first().map_or(route.times[0], |b| b.0));
    for (sr, &(ts, te)) in subs.iter().zip(bounds) {
        let lo: f64 = sr.edges.iter().map(|&e| net.edge(e).gamma_min * net.edge(e).time).sum();
        let hi: f64 = sr.edges.iter().map(|&e| net.edge(e).gamma_max * net.edge(e).time).sum();
        let lambda = if flexible && hi > lo {
            ((te - ts - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut t = ts;
        for (k, &e) in sr.edges.iter().enumerate() {
            let edge = net.edge(e);
            t += if flexible {
                edge.time * (edge.gamma_min + lambda * (edge.gamma_max - edge.gamma_min))
            } else {
                edge.time
            };
            times.push(if k + 1 == sr.edges.len() { te } else { t });
        }
    }
    Route { times, ..route.clone() }
}

fn value(model: &MilpModel, res: &SolveResult, name: &str) -> f64 {
    res.values[model.var_id(name).expect("model variable")]
}

fn run(model: &MilpModel, cfg: &PipelineConfig) -> Result<Option<SolveResult>> {
    match solve(model, &cfg.backend, cfg.time_limit) {
        Ok(res) if res.status.has_solution() => Ok(Some(res)),
        Ok(_) => Ok(None),
        Err(Error::ModelTooLarge { binaries, limit }) => {
            log::warn!("{}: {binaries} binaries exceed the limit {limit}", model.name);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// First-fit departure shifts: each route in turn takes the smallest delay
/// that keeps the budget and the horizon given the routes before it.
fn greedy_shifts(routes: &[Route], net: &RoadNetwork, budget: usize, horizon: f64) -> Option<Vec<Route>> {
    let mut held: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::with_capacity(routes.len());
    for route in routes {
        let own = ordinary_intervals(std::slice::from_ref(route), net);
        let mut shifts = vec![0.0];
        for &(s, _) in &own {
            shifts.extend(held.iter().map(|&(_, e)| e - s).filter(|&d| d > 0.0));
        }
        shifts.sort_by(f64::total_cmp);
        shifts.dedup();
        let slack = horizon - route.return_time();
        let delay = shifts.into_iter().take_while(|&d| d <= slack).find(|&d| {
            let mut trial = held.clone();
            trial.extend(own.iter().map(|&(s, e)| (s + d, e + d)));
            check_budget(&trial, budget).is_feasible()
        })?;
        held.extend(own.iter().map(|&(s, e)| (s + delay, e + delay)));
        let times = route.times.iter().map(|t| t + delay).collect();
        out.push(Route { times, ..route.clone() });
    }
    Some(out)
}

/// Shift (or re-time) AV schedules so the controller budget holds.
/// `None` when the rescheduling model has no solution.
///
/// First-fit shifting is tried before the model; its result is a feasible
/// point of the same model.
pub fn reschedule(
    routes: &[Route],
    net: &RoadNetwork,
    budget: usize,
    horizon: f64,
    flexible: bool,
    backend: &Backend,
    time_limit: std::time::Duration,
) -> Result<Option<Vec<Route>>> {
    if check_budget(&ordinary_intervals(routes, net), budget).is_feasible() {
        return Ok(Some(routes.to_vec()));
    }
    if let Some(shifted) = greedy_shifts(routes, net, budget, horizon) {
        return Ok(Some(shifted));
    }
    let subs: Vec<Vec<SubRoute>> = routes.iter().map(|r| derive_subroutes(r, net)).collect();
    let model = build_rescheduling_milp(&subs, budget, horizon, flexible);
    let cfg = PipelineConfig {
        backend: backend.clone(),
        time_limit,
        ..PipelineConfig::default()
    };
    let Some(res) = run(&model, &cfg)? else {
        return Ok(None);
    };
    let mut out = Vec::with_capacity(routes.len());
    let mut r = 0;
    for (route, rs) in routes.iter().zip(&subs) {
        let bounds: Vec<(f64, f64)> = (r..r + rs.len())
            .map(|i| (value(&model, &res, &format!("ts_r{i}")), value(&model, &res, &format!("te_r{i}"))))
            .collect();
        r += rs.len();
        out.push(if rs.is_empty() {
            route.clone()
        } else {
            retime(route, rs, &bounds, net, flexible)
        });
    }
    let late = out.iter().any(|r| r.return_time() > horizon + 1e-9 * horizon.max(1.0));
    if late || !check_budget(&ordinary_intervals(&out, net), budget).is_feasible() {
        log::warn!("rescheduling solution fails the budget or horizon check; discarded");
        return Ok(None);
    }
    Ok(Some(out))
}

pub struct RerouteOutcome {
    /// Accepted AV routes in acceptance order.
    pub accepted: Vec<Route>,
    /// Customers whose route could not be kept or rebuilt.
    pub unserved: Vec<NodeId>,
}

/// Rebuilding model for `route`'s customers, avoiding the stretches where
/// `accepted` holds every controller.
pub fn rerouting_model(inst: &VrpSaInstance, route: &Route, accepted: &[Route]) -> Result<(ExpandedGraph, MilpModel)> {
    let net = &inst.network;
    let d = &route.customers;
    let pn = prune_network(net, d, inst.depot, inst.eta1, inst.eta2)?;
    let demands: Vec<f64> = d.iter().map(|&c| inst.demand_of(c).expect("instance customer")).collect();
    let layers = inst.layers.min(compute_k(&demands, inst.capacity) + 1).max(1);
    let ge = expand_graph(&pn, layers, d, inst.depot)?;
    let blocked = infeasible_intervals(accepted, net, inst.budget, inst.horizon);
    let model = build_rerouting_milp(&ge, inst.eta1, inst.eta2, &blocked, inst.horizon);
    Ok((ge, model))
}

/// Rebuild one AV route around the exhausted stretches of `accepted`.
fn rebuild(inst: &VrpSaInstance, route: &Route, accepted: &[Route], cfg: &PipelineConfig) -> Result<Option<Route>> {
    let net = &inst.network;
    let (ge, model) = rerouting_model(inst, route, accepted)?;
    let Some(res) = run(&model, cfg)? else {
        return Ok(None);
    };
    let dec = decode_solution(&res, &model, &ge, inst)?;
    let Some(r) = dec.routes.into_iter().next() else {
        return Ok(None);
    };
    let edges = net
        .path_edges(&r.nodes)
        .ok_or_else(|| Error::Decode("rebuilt route leaves the network".into()))?;
    Ok(Some(Route {
        vehicle: route.vehicle,
        kind: VehicleKind::Av,
        customers: r.served,
        nodes: r.nodes,
        edges,
        times: r.times,
    }))
}

pub fn reroute(inst: &VrpSaInstance, routes: &[Route], cfg: &PipelineConfig, trace: &mut Trace) -> Result<RerouteOutcome> {
    let net = &inst.network;
    let mut queue: Vec<(f64, &Route)> = routes
        .iter()
        .map(|r| (route_value(net, &r.edges, inst.eta1, inst.eta2), r))
        .collect();
    if cfg.priority {
        queue.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.vehicle.cmp(&b.1.vehicle)));
    } else {
        queue.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    }
    let mut accepted: Vec<Route> = Vec::new();
    let mut unserved = Vec::new();
    for (v, route) in queue {
        trace.push("pop", Some(route.vehicle), Some(v), "");
        let mut trial = accepted.clone();
        trial.push(route.clone());
        if check_budget(&ordinary_intervals(&trial, net), inst.budget).is_feasible() {
            trace.push("accept", Some(route.vehicle), Some(v), "unchanged");
            accepted = trial;
            continue;
        }
        let ub = tsp_upper_bound(&route.customers, inst)?;
        let rebuilt = rebuild(inst, route, &accepted, cfg)?;
        let keep = rebuilt.filter(|r| {
            let rc = r.routing_cost(inst);
            let cheap = rc + inst.fixed_cost_av <= ub + inst.fixed_cost_hdv + 1e-9;
            let mut trial = accepted.clone();
            trial.push(r.clone());
            let fits = check_budget(&ordinary_intervals(&trial, net), inst.budget).is_feasible()
                && r.return_time() <= inst.horizon * (1.0 + 1e-9);
            trace.push("rebuild", Some(route.vehicle), Some(rc), &format!("bound {ub} fits {fits}"));
            cheap && fits
        });
        match keep {
            Some(r) => {
                trace.push("accept", Some(route.vehicle), Some(v), "rebuilt");
                accepted.push(r);
            }
            None => {
                trace.push("reject", Some(route.vehicle), Some(v), "customers to fallback");
                unserved.extend_from_slice(&route.customers);
            }
        }
    }
    Ok(RerouteOutcome { accepted, unserved })
}

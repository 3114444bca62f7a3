//! Relax-then-recover pipeline: budget-free routing, then rescheduling or
//! route-by-route rebuilding, with HDVs covering whatever is left.

mod budget;
pub mod phase1;
mod recover;

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use budget::{
    check_budget, derive_subroutes, infeasible_intervals, max_concurrency, ordinary_intervals, BudgetCheck, SubRoute,
    Violation, OVERLAP_EPS,
};
pub use phase1::{phase1_routes, plan_routes, FleetMode, Plan, PlanInput, PlannedRoute};
pub use recover::{reroute, rerouting_model, reschedule, route_value, tsp_upper_bound, RerouteOutcome};

use crate::error::{Error, Result};
use crate::instance::{VehicleKind, VrpSaInstance};
use crate::roadnet::{EdgeId, NodeId};
use crate::solve::Backend;

/// One vehicle's route and schedule on the original network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vehicle: usize,
    pub kind: VehicleKind,
    /// Customers in service order.
    pub customers: Vec<NodeId>,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    /// Arrival time at each entry of `nodes`; the first is the departure.
    pub times: Vec<f64>,
}

impl Route {
    pub fn departure(&self) -> f64 {
        self.times[0]
    }

    pub fn return_time(&self) -> f64 {
        *self.times.last().expect("route has timestamps")
    }

    pub fn routing_cost(&self, inst: &VrpSaInstance) -> f64 {
        let mode = inst.cost_mode(self.kind);
        self.edges.iter().map(|&e| mode.weight(inst.network.edge(e)).0).sum()
    }

    pub fn load(&self, inst: &VrpSaInstance) -> f64 {
        self.customers.iter().filter_map(|&c| inst.demand_of(c)).sum()
    }
}

/// Routing plus fixed cost of a route set.
pub fn total_cost(inst: &VrpSaInstance, routes: &[Route]) -> (f64, f64) {
    let rc = routes.iter().map(|r| r.routing_cost(inst)).sum();
    let fc = routes.iter().map(|r| inst.fixed_cost(r.kind)).sum();
    (rc, fc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Rebuild order by route value; random (seeded) otherwise.
    pub priority: bool,
    /// AV travel times may stretch within the edge bounds when rescheduling.
    pub flexible: bool,
    pub seed: u64,
    pub backend: Backend,
    /// Per MILP solve.
    pub time_limit: Duration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            priority: true,
            flexible: false,
            seed: 0,
            backend: Backend::default(),
            time_limit: Duration::from_secs(10),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    /// The budget-free routes already respect the budget.
    None,
    Rescheduled,
    Rerouted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Cost of the budget-free phase-1 routes.
    pub f1: f64,
    /// Cost of an HDV-only fleet.
    pub f2: f64,
    /// Cost of the returned solution.
    pub fp: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: String,
    pub vehicle: Option<usize>,
    pub value: Option<f64>,
    pub note: String,
}

/// Step log of a pipeline run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, step: &str, vehicle: Option<usize>, value: Option<f64>, note: &str) {
        self.rows.push(TraceRow {
            step: step.into(),
            vehicle,
            value,
            note: note.into(),
        });
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
    /// Customers moved off their AV; served by the fallback routes.
    pub unserved: Vec<NodeId>,
    /// Vehicles of the fallback routes.
    pub fallback: Vec<usize>,
    pub recovery: Recovery,
    pub fleet_mode: FleetMode,
    pub flexible: bool,
    pub priority: bool,
    pub routing_cost: f64,
    pub fixed_cost: f64,
    pub metrics: Metrics,
    #[serde(default)]
    pub trace: Trace,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Report {
    Pass,
    Fail(Vec<String>),
}

impl Report {
    pub fn passed(&self) -> bool {
        matches!(self, Report::Pass)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

pub fn validate(inst: &VrpSaInstance, sol: &Solution) -> Report {
    let mut why = Vec::new();
    let net = &inst.network;
    let tol = 1e-6 * inst.horizon.max(1.0);
    let mut served: HashMap<NodeId, usize> = HashMap::new();
    let mut vehicles = Vec::new();
    for r in &sol.routes {
        let m = r.vehicle;
        if m >= inst.num_vehicles() || inst.vehicle_kind(m) != r.kind {
            why.push(format!("vehicle {m}: not a {:?} of the fleet", r.kind));
        }
        if vehicles.contains(&m) {
            why.push(format!("vehicle {m}: used twice"));
        }
        vehicles.push(m);
        for &c in &r.customers {
            *served.entry(c).or_default() += 1;
        }
        if r.load(inst) > inst.capacity + 1e-9 {
            why.push(format!("vehicle {m}: load {} exceeds capacity", r.load(inst)));
        }
        if r.nodes.first() != Some(&inst.depot) || r.nodes.last() != Some(&inst.depot) {
            why.push(format!("vehicle {m}: route does not start and end at the depot"));
        }
        if r.edges.len() + 1 != r.nodes.len() || r.times.len() != r.nodes.len() {
            why.push(format!("vehicle {m}: inconsistent route lengths"));
            continue;
        }
        let chained = r.edges.iter().enumerate().all(|(i, &e)| {
            e < net.num_edges() && net.edge(e).tail == r.nodes[i] && net.edge(e).head == r.nodes[i + 1]
        });
        if !chained {
            why.push(format!("vehicle {m}: edges do not follow the node walk"));
            continue;
        }
        let mut pos = 0;
        for &c in &r.customers {
            match r.nodes[pos..].iter().position(|&v| v == c) {
                Some(k) => pos += k,
                None => why.push(format!("vehicle {m}: customer {c} not on the walk in service order")),
            }
        }
        if r.departure() < -tol {
            why.push(format!("vehicle {m}: departs before time zero"));
        }
        let flexible = sol.flexible && r.kind == VehicleKind::Av;
        for (i, &e) in r.edges.iter().enumerate() {
            let edge = net.edge(e);
            let dt = r.times[i + 1] - r.times[i];
            let (lo, hi) = if flexible {
                (edge.gamma_min * edge.time, edge.gamma_max * edge.time)
            } else {
                (edge.time, edge.time)
            };
            if dt < lo - tol || dt > hi + tol {
                why.push(format!("vehicle {m}: travel time {dt} on edge {e} outside [{lo}, {hi}]"));
                break;
            }
        }
        if r.return_time() > inst.horizon + tol {
            why.push(format!("vehicle {m}: returns at {} after the horizon {}", r.return_time(), inst.horizon));
        }
    }
    for c in &inst.customers {
        match served.get(&c.node).copied().unwrap_or(0) {
            1 => {}
            k => why.push(format!("customer {} served {k} times", c.node)),
        }
    }
    if served.keys().any(|&c| inst.demand_of(c).is_none()) {
        why.push("a route serves a node that is not a customer".into());
    }
    let av: Vec<Route> = sol.routes.iter().filter(|r| r.kind == VehicleKind::Av).cloned().collect();
    if why.iter().all(|w| !w.contains("inconsistent")) {
        if let BudgetCheck::Violations(v) = check_budget(&ordinary_intervals(&av, net), inst.budget) {
            why.push(format!(
                "budget exceeded: {} controllers needed in [{}, {}]",
                v[0].usage, v[0].start, v[0].end
            ));
        }
    }
    let (rc, fc) = total_cost(inst, &sol.routes);
    if !close(rc, sol.routing_cost) || !close(fc, sol.fixed_cost) || !close(rc + fc, sol.metrics.fp) {
        why.push(format!(
            "reported cost {} + {} (total {}) differs from recomputed {rc} + {fc}",
            sol.routing_cost, sol.fixed_cost, sol.metrics.fp
        ));
    }
    if why.is_empty() {
        Report::Pass
    } else {
        Report::Fail(why)
    }
}

/// Cost of serving every customer with HDVs only, fleet size unlimited.
pub fn hdv_baseline(inst: &VrpSaInstance, seed: u64) -> Result<f64> {
    Ok(phase1::plan_class(inst, &inst.customer_nodes(), VehicleKind::Hdv, None, seed)?.total)
}

/// Phase 1 without the budget, then recovery, then HDV fallback.
pub fn solve_vrpsa(inst: &VrpSaInstance, cfg: &PipelineConfig) -> Result<Solution> {
    inst.validate()?;
    let net = &inst.network;
    let mut trace = Trace::default();
    let (routes, fleet_mode) = match phase1_routes(inst, FleetMode::AvOnly, cfg.seed) {
        Ok(r) => (r, FleetMode::AvOnly),
        Err(Error::FleetExhausted { needed, available }) => {
            trace.push("phase1", None, None, &format!("av fleet exhausted ({needed} > {available}); mixed"));
            (phase1_routes(inst, FleetMode::Mixed, cfg.seed)?, FleetMode::Mixed)
        }
        Err(e) => return Err(e),
    };
    let (rc1, fc1) = total_cost(inst, &routes);
    let f1 = rc1 + fc1;
    trace.push("phase1", None, Some(f1), &format!("{} routes", routes.len()));
    let f2 = hdv_baseline(inst, cfg.seed)?;
    trace.push("hdv_only", None, Some(f2), "");

    let (av, mut hdv): (Vec<Route>, Vec<Route>) = routes.into_iter().partition(|r| r.kind == VehicleKind::Av);
    let mut unserved = Vec::new();
    let mut fallback = Vec::new();
    let (final_av, recovery) = if check_budget(&ordinary_intervals(&av, net), inst.budget).is_feasible() {
        trace.push("check", None, None, "feasible");
        (av, Recovery::None)
    } else if let Some(shifted) =
        reschedule(&av, net, inst.budget, inst.horizon, cfg.flexible, &cfg.backend, cfg.time_limit)?
    {
        trace.push("reschedule", None, None, "feasible");
        (shifted, Recovery::Rescheduled)
    } else {
        trace.push("reschedule", None, None, "failed");
        let out = reroute(inst, &av, cfg, &mut trace)?;
        unserved = out.unserved;
        (out.accepted, Recovery::Rerouted)
    };
    if !unserved.is_empty() {
        let left = inst.hdv_count - hdv.len();
        let plan = match phase1::plan_class(inst, &unserved, VehicleKind::Hdv, Some(left), cfg.seed) {
            Ok(p) => p,
            Err(Error::FleetExhausted { needed, available }) => {
                return Err(Error::Infeasible(format!(
                    "{} unserved customers need {needed} HDVs, {available} left",
                    unserved.len()
                )))
            }
            Err(e) => return Err(e),
        };
        let used: Vec<usize> = hdv.iter().map(|r| r.vehicle).collect();
        let mut free = (inst.av_count..inst.num_vehicles()).filter(|m| !used.contains(m));
        for p in plan.routes {
            let vehicle = free.next().expect("fleet size checked");
            fallback.push(vehicle);
            trace.push("fallback", Some(vehicle), Some(p.cost), "");
            hdv.push(Route {
                vehicle,
                kind: VehicleKind::Hdv,
                customers: p.customers,
                nodes: p.nodes,
                times: phase1::timed(net, &p.edges, 0.0),
                edges: p.edges,
            });
        }
    }
    let mut routes = final_av;
    routes.extend(hdv);
    routes.sort_by_key(|r| r.vehicle);
    let (rc, fc) = total_cost(inst, &routes);
    trace.push("done", None, Some(rc + fc), "");
    let sol = Solution {
        routes,
        unserved,
        fallback,
        recovery,
        fleet_mode,
        flexible: cfg.flexible,
        priority: cfg.priority,
        routing_cost: rc,
        fixed_cost: fc,
        metrics: Metrics { f1, f2, fp: rc + fc },
        trace,
    };
    match validate(inst, &sol) {
        Report::Pass => Ok(sol),
        Report::Fail(why) => Err(Error::ValidationFailed(why.join("; "))),
    }
}

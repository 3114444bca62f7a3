//! Budget-free fleet routing: directed Clarke-Wright savings followed by
//! relocate / swap / 2-opt local search on the metric closure.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{VehicleKind, VrpSaInstance};
use crate::roadnet::{EdgeId, NodeId, PathTree, RoadNetwork, WeightMode};

use super::{route_value, Route};

const EPS: f64 = 1e-9;

pub struct PlanInput<'a> {
    pub net: &'a RoadNetwork,
    pub depot: NodeId,
    pub customers: &'a [NodeId],
    pub demands: &'a [f64],
    pub capacity: f64,
    /// Route duration limit; `f64::INFINITY` for none.
    pub horizon: f64,
    pub fixed_cost: f64,
    pub mode: WeightMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedRoute {
    /// Customers in service order.
    pub customers: Vec<NodeId>,
    /// Full node walk from depot to depot.
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    /// Routing cost under the plan's weight mode.
    pub cost: f64,
    pub duration: f64,
    pub load: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub routes: Vec<PlannedRoute>,
    /// Routing cost plus fixed cost per route.
    pub total: f64,
}

/// Shortest legs between the required nodes; index 0 is the depot.
pub(crate) struct Closure {
    pub nodes: Vec<NodeId>,
    pub cost: Vec<Vec<f64>>,
    pub time: Vec<Vec<f64>>,
    pub path: Vec<Vec<Vec<NodeId>>>,
}

impl Closure {
    pub fn new(net: &RoadNetwork, depot: NodeId, customers: &[NodeId], mode: WeightMode) -> Result<Self> {
        let mut nodes = vec![depot];
        nodes.extend_from_slice(customers);
        let n = nodes.len();
        let mut cost = vec![vec![0.0; n]; n];
        let mut time = vec![vec![0.0; n]; n];
        let mut path = vec![vec![Vec::new(); n]; n];
        for j in 0..n {
            let tree = PathTree::to_target(net, nodes[j], mode);
            for i in 0..n {
                if i == j {
                    path[i][j] = vec![nodes[i]];
                    continue;
                }
                let p = tree.path_from(nodes[i]).ok_or(Error::Disconnected(nodes[i], nodes[j]))?;
                let edges = net.path_edges(&p).expect("tree path uses network edges");
                cost[i][j] = edges.iter().map(|&e| mode.weight(net.edge(e)).0).sum();
                time[i][j] = edges.iter().map(|&e| net.edge(e).time).sum();
                path[i][j] = p;
            }
        }
        Ok(Closure { nodes, cost, time, path })
    }

    fn seq_cost(&self, seq: &[usize]) -> f64 {
        self.walk(seq, &self.cost)
    }

    fn seq_time(&self, seq: &[usize]) -> f64 {
        self.walk(seq, &self.time)
    }

    fn walk(&self, seq: &[usize], w: &[Vec<f64>]) -> f64 {
        if seq.is_empty() {
            return 0.0;
        }
        let mut total = w[0][seq[0]] + w[seq[seq.len() - 1]][0];
        for p in seq.windows(2) {
            total += w[p[0]][p[1]];
        }
        total
    }

    /// Node walk of the closed tour through `seq` (closure indices).
    pub fn expand(&self, seq: &[usize]) -> Vec<NodeId> {
        let mut nodes = vec![self.nodes[0]];
        let mut at = 0;
        for &c in seq.iter().chain(std::iter::once(&0)) {
            nodes.extend_from_slice(&self.path[at][c][1..]);
            at = c;
        }
        nodes
    }
}

struct Search<'a> {
    cl: &'a Closure,
    demand: Vec<f64>,
    capacity: f64,
    horizon: f64,
    fixed: f64,
}

impl Search<'_> {
    fn load(&self, seq: &[usize]) -> f64 {
        seq.iter().map(|&c| self.demand[c]).sum()
    }

    fn ok(&self, seq: &[usize]) -> bool {
        self.load(seq) <= self.capacity + EPS && self.cl.seq_time(seq) <= self.horizon * (1.0 + EPS)
    }

    /// Cost of a route including its fixed cost; empty routes are free.
    fn value(&self, seq: &[usize]) -> f64 {
        if seq.is_empty() {
            0.0
        } else {
            self.cl.seq_cost(seq) + self.fixed
        }
    }

    fn savings(&self, routes: &mut Vec<Vec<usize>>) {
        let n = self.cl.nodes.len();
        let c = &self.cl.cost;
        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for i in 1..n {
            for j in 1..n {
                if i != j {
                    cand.push((c[i][0] + c[0][j] - c[i][j] + self.fixed, i, j));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut owner: Vec<usize> = vec![usize::MAX; n];
        for (r, seq) in routes.iter().enumerate() {
            for &c in seq {
                owner[c] = r;
            }
        }
        for (s, i, j) in cand {
            if s <= EPS {
                break;
            }
            let (ri, rj) = (owner[i], owner[j]);
            if ri == rj || routes[ri].last() != Some(&i) || routes[rj].first() != Some(&j) {
                continue;
            }
            let mut merged = routes[ri].clone();
            merged.extend_from_slice(&routes[rj]);
            if !self.ok(&merged) {
                continue;
            }
            for &c in &routes[rj] {
                owner[c] = ri;
            }
            routes[ri] = merged;
            routes[rj].clear();
        }
        routes.retain(|r| !r.is_empty());
    }

    fn improve(&self, routes: &mut Vec<Vec<usize>>, rng: &mut ChaCha8Rng) {
        let mut order: Vec<usize> = (1..self.cl.nodes.len()).collect();
        loop {
            order.shuffle(rng);
            let improved = self.relocate(routes, &order) || self.swap(routes, &order) || self.two_opt(routes);
            routes.retain(|r| !r.is_empty());
            if !improved {
                break;
            }
        }
    }

    fn locate(routes: &[Vec<usize>], c: usize) -> (usize, usize) {
        for (r, seq) in routes.iter().enumerate() {
            if let Some(p) = seq.iter().position(|&x| x == c) {
                return (r, p);
            }
        }
        unreachable!("customer {c} is routed")
    }

    fn relocate(&self, routes: &mut [Vec<usize>], order: &[usize]) -> bool {
        for &c in order {
            let (ra, pa) = Self::locate(routes, c);
            let mut from = routes[ra].clone();
            from.remove(pa);
            for rb in 0..routes.len() {
                let base = if rb == ra { from.clone() } else { routes[rb].clone() };
                let before = if rb == ra {
                    self.value(&routes[ra])
                } else {
                    self.value(&routes[ra]) + self.value(&routes[rb])
                };
                for pos in 0..=base.len() {
                    if rb == ra && pos == pa {
                        continue;
                    }
                    let mut to = base.clone();
                    to.insert(pos, c);
                    let after = if rb == ra {
                        self.value(&to)
                    } else {
                        self.value(&from) + self.value(&to)
                    };
                    if after < before - EPS && self.ok(&to) {
                        if rb != ra {
                            routes[ra] = from;
                        }
                        routes[rb] = to;
                        return true;
                    }
                }
            }
        }
        false
    }

    fn swap(&self, routes: &mut [Vec<usize>], order: &[usize]) -> bool {
        for (k, &a) in order.iter().enumerate() {
            for &b in &order[k + 1..] {
                let (ra, pa) = Self::locate(routes, a);
                let (rb, pb) = Self::locate(routes, b);
                if ra == rb {
                    let mut s = routes[ra].clone();
                    s.swap(pa, pb);
                    if self.value(&s) < self.value(&routes[ra]) - EPS && self.ok(&s) {
                        routes[ra] = s;
                        return true;
                    }
                    continue;
                }
                let (mut sa, mut sb) = (routes[ra].clone(), routes[rb].clone());
                sa[pa] = b;
                sb[pb] = a;
                let before = self.value(&routes[ra]) + self.value(&routes[rb]);
                if self.value(&sa) + self.value(&sb) < before - EPS && self.ok(&sa) && self.ok(&sb) {
                    routes[ra] = sa;
                    routes[rb] = sb;
                    return true;
                }
            }
        }
        false
    }

    fn two_opt(&self, routes: &mut [Vec<usize>]) -> bool {
        for seq in routes.iter_mut() {
            let cur = self.value(seq);
            for i in 0..seq.len() {
                for j in i + 1..seq.len() {
                    let mut s = seq.clone();
                    s[i..=j].reverse();
                    if self.value(&s) < cur - EPS && self.ok(&s) {
                        *seq = s;
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Routes serving every customer once; deterministic for a given seed.
pub fn plan_routes(input: &PlanInput, seed: u64) -> Result<Plan> {
    if input.customers.len() != input.demands.len() {
        return Err(Error::InfeasibleInstance("one demand per customer required".into()));
    }
    let cl = Closure::new(input.net, input.depot, input.customers, input.mode)?;
    let mut demand = vec![0.0];
    demand.extend_from_slice(input.demands);
    let search = Search {
        cl: &cl,
        demand,
        capacity: input.capacity,
        horizon: input.horizon,
        fixed: input.fixed_cost,
    };
    let mut routes: Vec<Vec<usize>> = Vec::new();
    for c in 1..cl.nodes.len() {
        if !search.ok(&[c]) {
            return Err(Error::InfeasibleInstance(format!(
                "customer at node {} cannot be served by a single route",
                cl.nodes[c]
            )));
        }
        routes.push(vec![c]);
    }
    search.savings(&mut routes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    search.improve(&mut routes, &mut rng);

    let mut planned = Vec::new();
    let mut total = 0.0;
    for seq in &routes {
        let nodes = cl.expand(seq);
        let edges = input.net.path_edges(&nodes).expect("closure legs are network paths");
        let cost: f64 = edges.iter().map(|&e| input.mode.weight(input.net.edge(e)).0).sum();
        let duration: f64 = edges.iter().map(|&e| input.net.edge(e).time).sum();
        total += cost + input.fixed_cost;
        planned.push(PlannedRoute {
            customers: seq.iter().map(|&c| cl.nodes[c]).collect(),
            nodes,
            edges,
            cost,
            duration,
            load: search.load(seq),
        });
    }
    Ok(Plan { routes: planned, total })
}

/// Which vehicles phase 1 may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FleetMode {
    AvOnly,
    HdvOnly,
    Mixed,
}

/// Schedule a route departing at `departure` with nominal travel times.
pub(crate) fn timed(net: &RoadNetwork, edges: &[EdgeId], departure: f64) -> Vec<f64> {
    let mut times = vec![departure];
    let mut t = departure;
    for &e in edges {
        t += net.edge(e).time;
        times.push(t);
    }
    times
}

fn to_route(net: &RoadNetwork, p: PlannedRoute, vehicle: usize, kind: VehicleKind) -> Route {
    let times = timed(net, &p.edges, 0.0);
    Route {
        vehicle,
        kind,
        customers: p.customers,
        nodes: p.nodes,
        edges: p.edges,
        times,
    }
}

/// Plan for a customer subset with one vehicle class; `limit` caps the routes.
pub(crate) fn plan_class(
    inst: &VrpSaInstance,
    customers: &[NodeId],
    kind: VehicleKind,
    limit: Option<usize>,
    seed: u64,
) -> Result<Plan> {
    let demands: Vec<f64> = customers
        .iter()
        .map(|&c| inst.demand_of(c).expect("customer of the instance"))
        .collect();
    let plan = plan_routes(
        &PlanInput {
            net: &inst.network,
            depot: inst.depot,
            customers,
            demands: &demands,
            capacity: inst.capacity,
            horizon: inst.horizon,
            fixed_cost: inst.fixed_cost(kind),
            mode: inst.cost_mode(kind),
        },
        seed,
    )?;
    if let Some(available) = limit {
        if plan.routes.len() > available {
            return Err(Error::FleetExhausted {
                needed: plan.routes.len(),
                available,
            });
        }
    }
    Ok(plan)
}

/// Budget-free routes for the whole instance with departures at zero.
///
/// `Mixed` plans with AV costs, keeps the most valuable routes on AVs and hands
/// the rest to HDVs, re-pathed with HDV costs in the same customer order.
pub fn phase1_routes(inst: &VrpSaInstance, mode: FleetMode, seed: u64) -> Result<Vec<Route>> {
    let customers = inst.customer_nodes();
    let net = &inst.network;
    match mode {
        FleetMode::AvOnly => {
            let plan = plan_class(inst, &customers, VehicleKind::Av, Some(inst.av_count), seed)?;
            Ok(plan
                .routes
                .into_iter()
                .enumerate()
                .map(|(m, p)| to_route(net, p, m, VehicleKind::Av))
                .collect())
        }
        FleetMode::HdvOnly => {
            let plan = plan_class(inst, &customers, VehicleKind::Hdv, Some(inst.hdv_count), seed)?;
            Ok(plan
                .routes
                .into_iter()
                .enumerate()
                .map(|(m, p)| to_route(net, p, inst.av_count + m, VehicleKind::Hdv))
                .collect())
        }
        FleetMode::Mixed => {
            let plan = plan_class(inst, &customers, VehicleKind::Av, None, seed)?;
            let available = inst.av_count + inst.hdv_count;
            if plan.routes.len() > available {
                return Err(Error::FleetExhausted {
                    needed: plan.routes.len(),
                    available,
                });
            }
            let mut ranked: Vec<(f64, usize)> = plan
                .routes
                .iter()
                .enumerate()
                .map(|(i, p)| (route_value(net, &p.edges, inst.eta1, inst.eta2), i))
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut routes: Vec<Option<Route>> = vec![None; plan.routes.len()];
            let hdv_cl = Closure::new(net, inst.depot, &customers, WeightMode::HdvCost)?;
            for (rank, &(_, i)) in ranked.iter().enumerate() {
                let p = plan.routes[i].clone();
                routes[i] = Some(if rank < inst.av_count {
                    to_route(net, p, rank, VehicleKind::Av)
                } else {
                    let seq: Vec<usize> = p
                        .customers
                        .iter()
                        .map(|c| 1 + customers.iter().position(|x| x == c).expect("known customer"))
                        .collect();
                    let nodes = hdv_cl.expand(&seq);
                    let edges = net.path_edges(&nodes).expect("closure legs are network paths");
                    let p = PlannedRoute { nodes, edges, ..p };
                    to_route(net, p, rank, VehicleKind::Hdv)
                });
            }
            let mut out: Vec<Route> = routes.into_iter().flatten().collect();
            out.sort_by_key(|r| r.vehicle);
            Ok(out)
        }
    }
}

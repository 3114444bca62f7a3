//! Shared toy builders and test-only oracles.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vrpsa::expand::{ArcKind, ExpandedGraph};
use vrpsa::instance::{Customer, VehicleKind};
use vrpsa::model::TimeGrid;
use vrpsa::pipeline::Route;
use vrpsa::roadnet::{Edge, Node};
use vrpsa::{RoadNetwork, RoadType, VrpSaInstance};

pub fn net_from_arcs(n: usize, arcs: &[(usize, usize, RoadType, f64, f64)]) -> RoadNetwork {
    let nodes = (0..n).map(|id| Node { id, x: id as f64, y: 0.0 }).collect();
    let edges = arcs.iter().map(|&(a, b, k, c, t)| Edge::new(a, b, k, c, t)).collect();
    RoadNetwork::new(nodes, edges).expect("valid toy network")
}

pub fn star_network() -> RoadNetwork {
    let mut arcs = Vec::new();
    for leaf in 1..=5 {
        arcs.push((0, leaf, RoadType::Ordinary, 1.0, 1.0));
        arcs.push((leaf, 0, RoadType::Ordinary, 1.0, 1.0));
    }
    net_from_arcs(6, &arcs)
}

pub fn one_way_network() -> RoadNetwork {
    let arcs = [
        (0, 1), (1, 0), (1, 2), (2, 3), (3, 4), (2, 6), (6, 5), (5, 1), (3, 8), (8, 7), (7, 5),
        (4, 10), (10, 9), (9, 7),
    ];
    let arcs: Vec<_> = arcs.iter().map(|&(a, b)| (a, b, RoadType::Ordinary, 1.0, 1.0)).collect();
    net_from_arcs(11, &arcs)
}

pub struct ToySpec {
    pub max_nodes: usize,
    pub max_customers: usize,
    pub av: usize,
    pub max_hdv: usize,
    pub max_intervals: usize,
    /// Horizon as a multiple of the total edge time.
    pub horizon_factor: f64,
    pub capacity: f64,
    /// One interval per time unit instead of a random count.
    pub unit_grid: bool,
}

/// Random connected toy: a bidirectional spanning tree plus a one-way chord,
/// integer costs and times, depot 0, two layers.
pub fn random_toy(seed: u64, spec: &ToySpec) -> VrpSaInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=spec.max_nodes);
    let mut arcs = Vec::new();
    let road = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { RoadType::Ordinary } else { RoadType::AvEnabled };
    for v in 1..n {
        let u = rng.gen_range(0..v);
        let k = road(&mut rng);
        let c = rng.gen_range(1..=3) as f64;
        let t = rng.gen_range(1..=2) as f64;
        arcs.push((u, v, k, c, t));
        arcs.push((v, u, k, c, t));
    }
    let a = rng.gen_range(1..n);
    let b = (a + 1 + rng.gen_range(0..n - 1)) % n;
    if a != b && !arcs.iter().any(|x| x.0 == a && x.1 == b) {
        arcs.push((a, b, road(&mut rng), rng.gen_range(1..=3) as f64, 1.0));
    }
    let total_time: f64 = arcs.iter().map(|x| x.4).sum();
    let net = net_from_arcs(n, &arcs);
    let nc = rng.gen_range(1..=spec.max_customers.min(n - 1));
    let mut pool: Vec<usize> = (1..n).collect();
    let mut customers = Vec::new();
    for _ in 0..nc {
        let node = pool.remove(rng.gen_range(0..pool.len()));
        customers.push(Customer { node, demand: rng.gen_range(1..=2) as f64, label: node });
    }
    customers.sort_by_key(|c| c.node);
    let hdv = rng.gen_range(0..=spec.max_hdv);
    let inst = VrpSaInstance {
        name: format!("toy{seed}"),
        network: net,
        depot: 0,
        customers,
        capacity: spec.capacity,
        av_count: spec.av,
        hdv_count: hdv,
        fixed_cost_av: 1.0,
        fixed_cost_hdv: 1.0,
        eta1: 0.5,
        eta2: 1.5,
        horizon: (spec.horizon_factor * total_time).ceil(),
        budget: 1,
        intervals: rng.gen_range(1..=spec.max_intervals),
        layers: 2,
    };
    let k = vrpsa::roadnet::compute_k(&inst.demands(), inst.capacity);
    let intervals = if spec.unit_grid { inst.horizon as usize } else { inst.intervals };
    VrpSaInstance { layers: 2.min(k + 1), intervals, ..inst }
}

/// Least and greatest departure making a fixed path's timestamps consistent
/// with every timestamp row of the model, including the relaxed rows of
/// unused arcs. `offset[v]` is the path offset of node v, `None` off the path.
fn departure_range(ge: &ExpandedGraph, offset: &[Option<f64>], horizon: f64) -> Option<(f64, f64)> {
    let n = ge.num_nodes();
    // difference rows t_head - t_tail >= w over all expanded nodes
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..ge.arcs().len() {
        let arc = ge.arc(a);
        let dt = ge.time(a);
        let on = matches!((offset[arc.tail], offset[arc.head]), (Some(x), Some(y)) if y - x == dt);
        if on {
            rows.push((arc.tail, arc.head, dt));
            rows.push((arc.head, arc.tail, -dt));
        } else {
            rows.push((arc.tail, arc.head, dt - horizon));
        }
    }
    let src = ge.source();
    for v in 0..n {
        if let Some(o) = offset[v] {
            rows.push((src, v, o));
            rows.push((v, src, -o));
        }
    }
    // least solution from below
    let mut lo = vec![0.0f64; n];
    for round in 0..=n + 1 {
        let mut changed = false;
        for &(i, j, w) in &rows {
            if lo[i] + w > lo[j] {
                lo[j] = lo[i] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if round == n + 1 {
            return None;
        }
    }
    if lo.iter().any(|&t| t > horizon) {
        return None;
    }
    let mut hi = vec![horizon; n];
    for _ in 0..=n + 1 {
        let mut changed = false;
        for &(i, j, w) in &rows {
            if hi[j] - w < hi[i] {
                hi[i] = hi[j] - w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if hi.iter().any(|&t| t < 0.0) {
        return None;
    }
    Some((lo[src], hi[src]))
}

/// Intervals a path holds a controller in when leaving at `d`: an ordinary
/// arc counts for `[a, b]` iff it is left after `a` and entered before `b`.
fn usage_pattern(ord: &[(f64, f64)], grid: &TimeGrid, d: f64) -> u32 {
    let mut mask = 0;
    for (q, (a, b)) in grid.intervals().enumerate() {
        if ord.iter().any(|&(ti, tj)| d + tj > a && d + ti < b) {
            mask |= 1 << q;
        }
    }
    mask
}

fn all_paths(ge: &ExpandedGraph, at: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if at == ge.sink() {
        out.push(path.clone());
        return;
    }
    for &a in ge.out_arcs(at) {
        let h = ge.arc(a).head;
        if seen[h] {
            continue;
        }
        seen[h] = true;
        path.push(a);
        all_paths(ge, h, seen, path, out);
        path.pop();
        seen[h] = false;
    }
}

/// Cheapest cost per (served customers, controller usage) for one vehicle.
fn vehicle_options(inst: &VrpSaInstance, ge: &ExpandedGraph, grid: &TimeGrid, kind: VehicleKind) -> HashMap<(u32, u32), f64> {
    let cidx: HashMap<usize, usize> = ge.customers.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut paths = Vec::new();
    let mut seen = vec![false; ge.num_nodes()];
    seen[ge.source()] = true;
    all_paths(ge, ge.source(), &mut seen, &mut Vec::new(), &mut paths);

    let mut best: HashMap<(u32, u32), f64> = HashMap::new();
    best.insert((0, 0), 0.0);
    for path in paths {
        let mut offset = vec![None; ge.num_nodes()];
        let mut t = 0.0;
        offset[ge.source()] = Some(0.0);
        let mut cost = inst.fixed_cost(kind);
        let mut ord = Vec::new();
        let mut visited = Vec::new();
        let mut forced = Vec::new();
        for &a in &path {
            let arc = ge.arc(a);
            let t0 = t;
            t += ge.time(a);
            offset[arc.head] = Some(t);
            cost += match kind {
                VehicleKind::Av => ge.av_cost(a, inst.eta1, inst.eta2),
                VehicleKind::Hdv => ge.hdv_cost(a),
            };
            if ge.is_ordinary(a) {
                ord.push((t0, t));
            }
            if arc.kind == ArcKind::CustomerTransition {
                forced.push(arc.tail);
            }
            if let Some((_, local)) = ge.split(arc.head) {
                if cidx.contains_key(&local) {
                    visited.push(arc.head);
                }
            }
        }
        let Some((lo, hi)) = departure_range(ge, &offset, inst.horizon) else {
            continue;
        };
        if lo > hi {
            continue;
        }
        let patterns: Vec<u32> = if kind == VehicleKind::Av {
            let mut cand = vec![lo, hi];
            for (a, b) in grid.intervals() {
                for &(ti, tj) in &ord {
                    cand.extend([a - tj, b - ti].into_iter().filter(|&d| lo <= d && d <= hi));
                }
            }
            cand.sort_by(f64::total_cmp);
            cand.dedup();
            let mids: Vec<f64> = cand.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            cand.extend(mids);
            let mut p: Vec<u32> = cand.iter().map(|&d| usage_pattern(&ord, grid, d)).collect();
            p.sort_unstable();
            p.dedup();
            p
        } else {
            vec![0]
        };
        // serve any subset of visited copies that keeps the forced ones
        for sub in 0u32..(1 << visited.len()) {
            let chosen: Vec<usize> = (0..visited.len()).filter(|&i| sub >> i & 1 == 1).map(|i| visited[i]).collect();
            if forced.iter().any(|f| !chosen.contains(f)) {
                continue;
            }
            let mut mask = 0u32;
            let mut load = 0.0;
            let mut dup = false;
            for &v in &chosen {
                let c = cidx[&ge.split(v).expect("copy").1];
                dup |= mask >> c & 1 == 1;
                mask |= 1 << c;
                load += inst.demand_of(ge.project(v)).expect("demand");
            }
            if dup || load > inst.capacity {
                continue;
            }
            for &p in &patterns {
                let e = best.entry((mask, p)).or_insert(f64::INFINITY);
                *e = e.min(cost);
            }
        }
    }
    best
}

/// Optimum of the time-discretized model by enumeration of routes, served
/// sets, and departures; `None` when infeasible.
pub fn brute_force_exact(inst: &VrpSaInstance, ge: &ExpandedGraph, grid: &TimeGrid) -> Option<f64> {
    let nv = inst.num_vehicles();
    let nc = ge.customers.len();
    let opts: Vec<HashMap<(u32, u32), f64>> =
        (0..nv).map(|m| vehicle_options(inst, ge, grid, inst.vehicle_kind(m))).collect();
    let by_mask: Vec<HashMap<u32, Vec<(u32, f64)>>> = opts
        .iter()
        .map(|o| {
            let mut g: HashMap<u32, Vec<(u32, f64)>> = HashMap::new();
            for (&(mask, p), &c) in o {
                g.entry(mask).or_default().push((p, c));
            }
            g
        })
        .collect();
    let mut best: Option<f64> = None;
    let combos = nv.pow(nc as u32);
    for code in 0..combos {
        let mut masks = vec![0u32; nv];
        let mut x = code;
        for c in 0..nc {
            masks[x % nv] |= 1 << c;
            x /= nv;
        }
        let lists: Vec<&Vec<(u32, f64)>> = match (0..nv).map(|m| by_mask[m].get(&masks[m])).collect::<Option<Vec<_>>>() {
            Some(l) => l,
            None => continue,
        };
        let mut pick = vec![0usize; nv];
        loop {
            let mut usage = vec![0usize; grid.len()];
            let mut cost = 0.0;
            for m in 0..nv {
                let (p, c) = lists[m][pick[m]];
                cost += c;
                if m < inst.av_count {
                    for (q, u) in usage.iter_mut().enumerate() {
                        *u += (p >> q & 1) as usize;
                    }
                }
            }
            if usage.iter().all(|&u| u <= inst.budget) && best.map_or(true, |b| cost < b) {
                best = Some(cost);
            }
            let mut m = 0;
            while m < nv {
                pick[m] += 1;
                if pick[m] < lists[m].len() {
                    break;
                }
                pick[m] = 0;
                m += 1;
            }
            if m == nv {
                break;
            }
        }
    }
    best
}

/// Several vehicles, each running its own chain of segments; all chains are
/// laid out in one network and every route starts at `departure`.
pub fn chains(per_vehicle: &[Vec<(RoadType, f64)>], gamma: (f64, f64)) -> (RoadNetwork, Vec<Route>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut routes = Vec::new();
    for (m, segs) in per_vehicle.iter().enumerate() {
        let base = nodes.len();
        for i in 0..=segs.len() {
            nodes.push(Node { id: base + i, x: i as f64, y: m as f64 });
        }
        let mut route_edges = Vec::new();
        let mut times = vec![0.0];
        for (i, &(k, d)) in segs.iter().enumerate() {
            let mut e = Edge::new(base + i, base + i + 1, k, d, d);
            let (lo, hi) = if k == RoadType::AvEnabled { gamma } else { (1.0, 1.0) };
            e.gamma_min = lo;
            e.gamma_max = hi;
            route_edges.push(edges.len());
            edges.push(e);
            times.push(times[i] + d);
        }
        routes.push(Route {
            vehicle: m,
            kind: VehicleKind::Av,
            customers: vec![],
            nodes: (base..=base + segs.len()).collect(),
            edges: route_edges,
            times,
        });
    }
    (RoadNetwork::new(nodes, edges).expect("valid chains"), routes)
}

/// Ordinary stretches of each vehicle in the rescheduling figures, as
/// alternating segments starting at time 0 with the given first kind.
pub fn segments_from_intervals(ordinary: &[(f64, f64)], end: f64) -> Vec<(RoadType, f64)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    for &(s, e) in ordinary {
        if s > t {
            out.push((RoadType::AvEnabled, s - t));
        }
        out.push((RoadType::Ordinary, e - s));
        t = e;
    }
    if end > t {
        out.push((RoadType::AvEnabled, end - t));
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

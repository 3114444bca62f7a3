//! Directed road network with AV-enabled and ordinary segments.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

pub const DEFAULT_GAMMA_MIN: f64 = 0.8;
pub const DEFAULT_GAMMA_MAX: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadType {
    AvEnabled,
    Ordinary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub road: RoadType,
    pub cost: f64,
    pub time: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl Edge {
    pub fn new(tail: NodeId, head: NodeId, road: RoadType, cost: f64, time: f64) -> Self {
        Edge {
            tail,
            head,
            road,
            cost,
            time,
            gamma_min: DEFAULT_GAMMA_MIN,
            gamma_max: DEFAULT_GAMMA_MAX,
        }
    }

    /// Cost of an AV traversing this edge.
    pub fn av_cost(&self, eta1: f64, eta2: f64) -> f64 {
        match self.road {
            RoadType::AvEnabled => eta1 * self.cost,
            RoadType::Ordinary => eta2 * self.cost,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkData {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Immutable directed graph. Undirected roads are two antiparallel edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkData", into = "NetworkData")]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
}

impl TryFrom<NetworkData> for RoadNetwork {
    type Error = Error;
    fn try_from(d: NetworkData) -> Result<Self> {
        RoadNetwork::new(d.nodes, d.edges)
    }
}

impl From<RoadNetwork> for NetworkData {
    fn from(n: RoadNetwork) -> Self {
        NetworkData {
            nodes: n.nodes,
            edges: n.edges,
        }
    }
}

impl RoadNetwork {
    /// Node ids must be `0..nodes.len()` in order.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidNetwork(format!(
                    "node at position {i} has id {}",
                    n.id
                )));
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(Error::InvalidNetwork(format!("node {i} has non-finite coordinates")));
            }
        }
        let n = nodes.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge {id} ({}, {}) references an undeclared node",
                    e.tail, e.head
                )));
            }
            if e.tail == e.head {
                return Err(Error::InvalidNetwork(format!("edge {id} is a self-loop")));
            }
            if !(e.cost > 0.0 && e.cost.is_finite()) || !(e.time > 0.0 && e.time.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "edge {id} needs positive finite cost and time"
                )));
            }
            if !(e.gamma_min > 0.0 && e.gamma_min <= 1.0 && e.gamma_max >= 1.0 && e.gamma_max.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "edge {id} needs 0 < gamma_min <= 1 <= gamma_max"
                )));
            }
            out_adj[e.tail].push(id);
            in_adj[e.head].push(id);
        }
        for list in out_adj.iter_mut() {
            list.sort_by_key(|&e| edges[e].head);
            if let Some(w) = list.windows(2).find(|w| edges[w[0]].head == edges[w[1]].head) {
                let e = &edges[w[0]];
                return Err(Error::InvalidNetwork(format!(
                    "parallel edges between {} and {}",
                    e.tail, e.head
                )));
            }
        }
        for list in in_adj.iter_mut() {
            list.sort_by_key(|&e| edges[e].tail);
        }
        Ok(RoadNetwork {
            nodes,
            edges,
            out_adj,
            in_adj,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    /// Outgoing edges of `v`, sorted by head.
    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_adj[v]
    }

    /// Incoming edges of `v`, sorted by tail.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_adj[v]
    }

    pub fn find_edge(&self, tail: NodeId, head: NodeId) -> Option<EdgeId> {
        let list = self.out_adj.get(tail)?;
        list.binary_search_by_key(&head, |&e| self.edges[e].head)
            .ok()
            .map(|i| list[i])
    }

    /// Edge ids along a node sequence, or `None` if some hop has no edge.
    pub fn path_edges(&self, path: &[NodeId]) -> Option<Vec<EdgeId>> {
        path.windows(2).map(|w| self.find_edge(w[0], w[1])).collect()
    }

    pub fn path_weight(&self, path: &[NodeId], mode: WeightMode) -> Option<f64> {
        let edges = self.path_edges(path)?;
        Some(edges.iter().map(|&e| mode.weight(&self.edges[e]).0).sum())
    }
}

/// Which per-edge weight a shortest-path query minimises.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightMode {
    HdvCost,
    AvCost { eta1: f64, eta2: f64 },
    /// Time spent on ordinary roads, ties broken by AV cost.
    RemoteDuration { eta1: f64, eta2: f64 },
}

impl WeightMode {
    /// (primary, secondary) weight; secondary only breaks ties.
    pub fn weight(&self, e: &Edge) -> (f64, f64) {
        match *self {
            WeightMode::HdvCost => (e.cost, 0.0),
            WeightMode::AvCost { eta1, eta2 } => (e.av_cost(eta1, eta2), 0.0),
            WeightMode::RemoteDuration { eta1, eta2 } => {
                let primary = match e.road {
                    RoadType::Ordinary => e.time,
                    RoadType::AvEnabled => 0.0,
                };
                (primary, e.av_cost(eta1, eta2))
            }
        }
    }
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn lex_eq(a: (f64, f64), b: (f64, f64)) -> bool {
    approx_eq(a.0, b.0) && approx_eq(a.1, b.1)
}

fn lex_less(a: (f64, f64), b: (f64, f64)) -> bool {
    if !approx_eq(a.0, b.0) {
        a.0 < b.0
    } else {
        !approx_eq(a.1, b.1) && a.1 < b.1
    }
}

#[derive(PartialEq)]
struct HeapItem {
    key: (f64, f64),
    node: NodeId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .0
            .total_cmp(&self.key.0)
            .then(other.key.1.total_cmp(&self.key.1))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from every node to one target, plus lexicographic path extraction.
#[derive(Clone, Debug)]
pub struct PathTree<'a> {
    net: &'a RoadNetwork,
    mode: WeightMode,
    target: NodeId,
    dist: Vec<Option<(f64, f64)>>,
}

impl<'a> PathTree<'a> {
    pub fn to_target(net: &'a RoadNetwork, target: NodeId, mode: WeightMode) -> Self {
        let mut dist: Vec<Option<(f64, f64)>> = vec![None; net.num_nodes()];
        let mut done = vec![false; net.num_nodes()];
        let mut heap = BinaryHeap::new();
        dist[target] = Some((0.0, 0.0));
        heap.push(HeapItem {
            key: (0.0, 0.0),
            node: target,
        });
        while let Some(HeapItem { key, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            for &e in net.in_edges(node) {
                let edge = net.edge(e);
                let w = mode.weight(edge);
                let cand = (key.0 + w.0, key.1 + w.1);
                let better = match dist[edge.tail] {
                    None => true,
                    Some(old) => lex_less(cand, old),
                };
                if better && !done[edge.tail] {
                    dist[edge.tail] = Some(cand);
                    heap.push(HeapItem {
                        key: cand,
                        node: edge.tail,
                    });
                }
            }
        }
        PathTree {
            net,
            mode,
            target,
            dist,
        }
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    /// Primary distance from `src` to the target.
    pub fn dist(&self, src: NodeId) -> Option<f64> {
        self.dist[src].map(|d| d.0)
    }

    /// Lexicographically smallest minimum-weight path from `src` to the target.
    pub fn path_from(&self, src: NodeId) -> Option<Vec<NodeId>> {
        self.dist[src]?;
        let mut path = vec![src];
        let mut u = src;
        while u != self.target {
            let du = self.dist[u]?;
            let next = self.net.out_edges(u).iter().find_map(|&e| {
                let edge = self.net.edge(e);
                let dv = self.dist[edge.head]?;
                let w = self.mode.weight(edge);
                lex_eq((w.0 + dv.0, w.1 + dv.1), du).then_some(edge.head)
            })?;
            path.push(next);
            u = next;
            if path.len() > self.net.num_nodes() {
                return None;
            }
        }
        Some(path)
    }
}

/// Minimum-weight path with lexicographic tie-break on node sequences.
pub fn shortest_path(
    net: &RoadNetwork,
    src: NodeId,
    dst: NodeId,
    mode: WeightMode,
) -> Result<(Vec<NodeId>, f64)> {
    if src >= net.num_nodes() || dst >= net.num_nodes() {
        return Err(Error::InvalidNetwork(format!("node {src} or {dst} not in network")));
    }
    let tree = PathTree::to_target(net, dst, mode);
    match (tree.path_from(src), tree.dist(src)) {
        (Some(p), Some(d)) => Ok((p, d)),
        _ => Err(Error::Unreachable { src, dst }),
    }
}

/// Largest j such that the j smallest demands fit into capacity `w`.
pub fn compute_k(demands: &[f64], w: f64) -> usize {
    let mut sorted = demands.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut k = 0;
    for d in sorted {
        total += d;
        if total > w {
            break;
        }
        k += 1;
    }
    k
}

/// Strongly connected components of the AV-enabled subgraph, singletons included.
/// Components are sorted internally and ordered by their smallest node.
pub fn av_sccs(net: &RoadNetwork) -> Vec<Vec<NodeId>> {
    let n = net.num_nodes();
    let succ: Vec<Vec<NodeId>> = (0..n)
        .map(|v| {
            net.out_edges(v)
                .iter()
                .map(|&e| net.edge(e))
                .filter(|e| e.road == RoadType::AvEnabled)
                .map(|e| e.head)
                .collect()
        })
        .collect();
    let mut comps = tarjan(&succ);
    for c in comps.iter_mut() {
        c.sort_unstable();
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

fn tarjan(succ: &[Vec<NodeId>]) -> Vec<Vec<NodeId>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(NodeId, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, pos)) = call.last() {
            if pos < succ[v].len() {
                let w = succ[v][pos];
                call.last_mut().expect("frame").1 += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Exhaustive minimum-cost closed walk from `depot` through all `required` nodes.
///
/// Visits per node are capped at n and traversals per edge at n - 1, where n
/// counts the required nodes including the depot. Among optimal walks the one
/// whose first-visit order of required nodes is lexicographically smallest is
/// returned, then the lexicographically smallest walk.
pub fn brute_force_stsp(
    net: &RoadNetwork,
    required: &[NodeId],
    depot: NodeId,
    mode: WeightMode,
) -> Result<(Vec<NodeId>, f64)> {
    let mut req: Vec<NodeId> = required.iter().copied().filter(|&r| r != depot).collect();
    req.sort_unstable();
    req.dedup();
    if req.is_empty() {
        return Ok((vec![depot], 0.0));
    }
    let n = req.len() + 1;
    let to_depot = PathTree::to_target(net, depot, mode);
    let trees: Vec<PathTree> = req
        .iter()
        .map(|&r| PathTree::to_target(net, r, mode))
        .collect();
    for (i, &r) in req.iter().enumerate() {
        if trees[i].dist(depot).is_none() || to_depot.dist(r).is_none() {
            return Err(Error::InfeasibleStsp(r));
        }
    }
    let mut search = StspSearch {
        net,
        mode,
        depot,
        req: &req,
        trees: &trees,
        to_depot: &to_depot,
        cap_visits: n,
        cap_edges: n - 1,
        visits: vec![0; net.num_nodes()],
        traversals: vec![0; net.num_edges()],
        walk: vec![depot],
        order: Vec::new(),
        best: None,
    };
    search.visits[depot] = 1;
    search.dfs(depot, 0.0, 0u64);
    let (cost, _, walk) = search.best.ok_or(Error::InfeasibleStsp(req[0]))?;
    Ok((walk, cost))
}

struct StspSearch<'a> {
    net: &'a RoadNetwork,
    mode: WeightMode,
    depot: NodeId,
    req: &'a [NodeId],
    trees: &'a [PathTree<'a>],
    to_depot: &'a PathTree<'a>,
    cap_visits: usize,
    cap_edges: usize,
    visits: Vec<usize>,
    traversals: Vec<usize>,
    walk: Vec<NodeId>,
    order: Vec<NodeId>,
    best: Option<(f64, Vec<NodeId>, Vec<NodeId>)>,
}

impl StspSearch<'_> {
    fn lower_bound(&self, at: NodeId, covered: u64) -> f64 {
        let back = self.to_depot.dist(at).unwrap_or(f64::INFINITY);
        let mut lb = back;
        for (i, &r) in self.req.iter().enumerate() {
            if covered & (1 << i) == 0 {
                let via = self.trees[i].dist(at).unwrap_or(f64::INFINITY)
                    + self.to_depot.dist(r).unwrap_or(f64::INFINITY);
                lb = lb.max(via);
            }
        }
        lb
    }

    fn better(&self, cost: f64) -> bool {
        match &self.best {
            None => true,
            Some((bc, bo, bw)) => {
                if !approx_eq(cost, *bc) {
                    cost < *bc
                } else {
                    (&self.order, &self.walk) < (bo, bw)
                }
            }
        }
    }

    fn dfs(&mut self, at: NodeId, cost: f64, covered: u64) {
        let all = (1u64 << self.req.len()) - 1;
        if at == self.depot && covered == all && self.walk.len() > 1 {
            if self.better(cost) {
                self.best = Some((cost, self.order.clone(), self.walk.clone()));
            }
            return;
        }
        if let Some((bc, _, _)) = &self.best {
            let lb = cost + self.lower_bound(at, covered);
            if lb > *bc && !approx_eq(lb, *bc) {
                return;
            }
        }
        for &e in self.net.out_edges(at) {
            let edge = self.net.edge(e);
            let v = edge.head;
            if self.visits[v] >= self.cap_visits || self.traversals[e] >= self.cap_edges {
                continue;
            }
            let w = self.mode.weight(edge).0;
            let hit = self.req.iter().position(|&r| r == v);
            let newly = matches!(hit, Some(i) if covered & (1 << i) == 0);
            self.visits[v] += 1;
            self.traversals[e] += 1;
            self.walk.push(v);
            if newly {
                self.order.push(v);
            }
            let cov = match hit {
                Some(i) => covered | (1 << i),
                None => covered,
            };
            self.dfs(v, cost + w, cov);
            if newly {
                self.order.pop();
            }
            self.walk.pop();
            self.traversals[e] -= 1;
            self.visits[v] -= 1;
        }
    }
}

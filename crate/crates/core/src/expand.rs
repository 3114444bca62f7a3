//! Network pruning around the required nodes and the layered expanded graph.
//!
//! Layer `l` (0-based) holds a copy of every pruned node; expanded node ids are
//! `l * n + v` and the sink is `layers * n`. Road arcs into the depot on the
//! base layer lead to the sink, since the base-layer depot is the source.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::roadnet::{av_sccs, Edge, EdgeId, NodeId, PathTree, RoadNetwork, RoadType, WeightMode};

/// Subgraph of a road network kept for a set of required nodes.
///
/// Node and edge ids of `network` are compact; `node_map` / `edge_map` give the
/// ids in the source network. Compaction preserves id order.
#[derive(Clone, Debug, PartialEq)]
pub struct PrunedNetwork {
    pub network: RoadNetwork,
    pub node_map: Vec<NodeId>,
    pub edge_map: Vec<EdgeId>,
    /// Source-network edges on min-cost paths (HDV and AV costs).
    pub p1: BTreeSet<EdgeId>,
    pub v1: BTreeSet<NodeId>,
    /// Source-network edges on min-remote-duration paths.
    pub p2: BTreeSet<EdgeId>,
    pub v2: BTreeSet<NodeId>,
    /// Edges of AV-enabled SCCs touching `v1 ∪ v2`.
    pub p3: BTreeSet<EdgeId>,
    pub v3: BTreeSet<NodeId>,
}

impl PrunedNetwork {
    /// Identity pruning: keeps the whole network.
    pub fn whole(net: &RoadNetwork) -> Self {
        PrunedNetwork {
            network: net.clone(),
            node_map: (0..net.num_nodes()).collect(),
            edge_map: (0..net.num_edges()).collect(),
            p1: BTreeSet::new(),
            v1: BTreeSet::new(),
            p2: BTreeSet::new(),
            v2: BTreeSet::new(),
            p3: BTreeSet::new(),
            v3: BTreeSet::new(),
        }
    }

    /// Compact id of a source-network node, if kept.
    pub fn local(&self, orig: NodeId) -> Option<NodeId> {
        self.node_map.binary_search(&orig).ok()
    }

    pub fn original(&self, local: NodeId) -> NodeId {
        self.node_map[local]
    }
}

pub fn prune_network(
    net: &RoadNetwork,
    customers: &[NodeId],
    depot: NodeId,
    eta1: f64,
    eta2: f64,
) -> Result<PrunedNetwork> {
    let mut required: Vec<NodeId> = customers.to_vec();
    required.push(depot);
    required.sort_unstable();
    required.dedup();
    if let Some(&bad) = required.iter().find(|&&v| v >= net.num_nodes()) {
        return Err(Error::InvalidNetwork(format!("required node {bad} not in network")));
    }

    let mut p1 = BTreeSet::new();
    let mut v1 = BTreeSet::new();
    let mut p2 = BTreeSet::new();
    let mut v2 = BTreeSet::new();
    let cost_modes = [WeightMode::HdvCost, WeightMode::AvCost { eta1, eta2 }];
    let remote = WeightMode::RemoteDuration { eta1, eta2 };
    for &dst in &required {
        for (k, mode) in [cost_modes[0], cost_modes[1], remote].into_iter().enumerate() {
            let (edges, nodes) = if k < 2 { (&mut p1, &mut v1) } else { (&mut p2, &mut v2) };
            let tree = PathTree::to_target(net, dst, mode);
            for &src in &required {
                if src == dst {
                    continue;
                }
                let path = tree.path_from(src).ok_or(Error::Disconnected(src, dst))?;
                nodes.extend(path.iter().copied());
                for w in path.windows(2) {
                    edges.insert(net.find_edge(w[0], w[1]).expect("path edge"));
                }
            }
        }
    }

    let touched: BTreeSet<NodeId> = v1.union(&v2).copied().collect();
    let mut comp_of = vec![usize::MAX; net.num_nodes()];
    let comps = av_sccs(net);
    for (k, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = k;
        }
    }
    let mut keep_comp = vec![false; comps.len()];
    for &v in &touched {
        keep_comp[comp_of[v]] = true;
    }
    let mut p3 = BTreeSet::new();
    let mut v3 = BTreeSet::new();
    for (k, comp) in comps.iter().enumerate() {
        if keep_comp[k] {
            v3.extend(comp.iter().copied());
        }
    }
    for (id, e) in net.edges().iter().enumerate() {
        if e.road == RoadType::AvEnabled
            && comp_of[e.tail] == comp_of[e.head]
            && keep_comp[comp_of[e.tail]]
        {
            p3.insert(id);
        }
    }

    let mut nodes: BTreeSet<NodeId> = touched.union(&v3).copied().collect();
    nodes.extend(required.iter().copied());
    let edge_set: BTreeSet<EdgeId> = p1.iter().chain(&p2).chain(&p3).copied().collect();
    let node_map: Vec<NodeId> = nodes.into_iter().collect();
    let edge_map: Vec<EdgeId> = edge_set.into_iter().collect();
    let local = |v: NodeId| node_map.binary_search(&v).expect("kept node");
    let sub_nodes = node_map
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut n = net.node(v).clone();
            n.id = i;
            n
        })
        .collect();
    let sub_edges = edge_map
        .iter()
        .map(|&e| {
            let src = net.edge(e);
            Edge {
                tail: local(src.tail),
                head: local(src.head),
                ..src.clone()
            }
        })
        .collect();
    Ok(PrunedNetwork {
        network: RoadNetwork::new(sub_nodes, sub_edges)?,
        node_map,
        edge_map,
        p1,
        v1,
        p2,
        v2,
        p3,
        v3,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArcKind {
    /// Copy of a pruned-network edge.
    Road { edge: EdgeId },
    /// Customer copy to the same customer one layer up.
    CustomerTransition,
    /// Depot copy to the sink.
    DepotToSink,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub kind: ArcKind,
    pub layer: usize,
}

#[derive(Clone, Debug)]
pub struct ExpandedGraph {
    pub base: PrunedNetwork,
    pub layers: usize,
    /// Local ids of the customers, ascending.
    pub customers: Vec<NodeId>,
    pub depot: NodeId,
    arcs: Vec<Arc>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

/// Build the `layers`-layer expanded graph. Customers and depot are given by
/// source-network id and must be kept by the pruning.
pub fn expand_graph(
    pn: &PrunedNetwork,
    layers: usize,
    customers: &[NodeId],
    depot: NodeId,
) -> Result<ExpandedGraph> {
    if layers == 0 {
        return Err(Error::InvalidNetwork("need at least one layer".into()));
    }
    let find = |v: NodeId| {
        pn.local(v)
            .ok_or_else(|| Error::InvalidNetwork(format!("node {v} was pruned away")))
    };
    let mut cust = customers.iter().map(|&c| find(c)).collect::<Result<Vec<_>>>()?;
    cust.sort_unstable();
    cust.dedup();
    let depot = find(depot)?;
    let net = &pn.network;
    let n = net.num_nodes();
    let sink = layers * n;
    let mut arcs = Vec::new();
    for l in 0..layers {
        for (id, e) in net.edges().iter().enumerate() {
            let head = if l == 0 && e.head == depot {
                sink
            } else {
                l * n + e.head
            };
            arcs.push(Arc {
                tail: l * n + e.tail,
                head,
                kind: ArcKind::Road { edge: id },
                layer: l,
            });
        }
        if l + 1 < layers {
            for &c in &cust {
                arcs.push(Arc {
                    tail: l * n + c,
                    head: (l + 1) * n + c,
                    kind: ArcKind::CustomerTransition,
                    layer: l,
                });
            }
        }
        arcs.push(Arc {
            tail: l * n + depot,
            head: sink,
            kind: ArcKind::DepotToSink,
            layer: l,
        });
    }
    let mut out_adj = vec![Vec::new(); sink + 1];
    let mut in_adj = vec![Vec::new(); sink + 1];
    for (k, a) in arcs.iter().enumerate() {
        out_adj[a.tail].push(k);
        in_adj[a.head].push(k);
    }
    Ok(ExpandedGraph {
        base: pn.clone(),
        layers,
        customers: cust,
        depot,
        arcs,
        out_adj,
        in_adj,
    })
}

impl ExpandedGraph {
    pub fn base_nodes(&self) -> usize {
        self.base.network.num_nodes()
    }

    pub fn num_nodes(&self) -> usize {
        self.layers * self.base_nodes() + 1
    }

    pub fn node(&self, layer: usize, v: NodeId) -> usize {
        layer * self.base_nodes() + v
    }

    pub fn source(&self) -> usize {
        self.depot
    }

    pub fn sink(&self) -> usize {
        self.layers * self.base_nodes()
    }

    /// (layer, local node) of an expanded node; `None` for the sink.
    pub fn split(&self, v: usize) -> Option<(usize, NodeId)> {
        (v < self.sink()).then(|| (v / self.base_nodes(), v % self.base_nodes()))
    }

    /// Source-network node an expanded node stands for (the depot for the sink).
    pub fn project(&self, v: usize) -> NodeId {
        match self.split(v) {
            Some((_, local)) => self.base.original(local),
            None => self.base.original(self.depot),
        }
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, a: usize) -> &Arc {
        &self.arcs[a]
    }

    pub fn out_arcs(&self, v: usize) -> &[usize] {
        &self.out_adj[v]
    }

    pub fn in_arcs(&self, v: usize) -> &[usize] {
        &self.in_adj[v]
    }

    pub fn edge_of(&self, a: usize) -> Option<&Edge> {
        match self.arcs[a].kind {
            ArcKind::Road { edge } => Some(self.base.network.edge(edge)),
            _ => None,
        }
    }

    pub fn road(&self, a: usize) -> Option<RoadType> {
        self.edge_of(a).map(|e| e.road)
    }

    pub fn is_ordinary(&self, a: usize) -> bool {
        self.road(a) == Some(RoadType::Ordinary)
    }

    pub fn time(&self, a: usize) -> f64 {
        self.edge_of(a).map_or(0.0, |e| e.time)
    }

    pub fn hdv_cost(&self, a: usize) -> f64 {
        self.edge_of(a).map_or(0.0, |e| e.cost)
    }

    pub fn av_cost(&self, a: usize, eta1: f64, eta2: f64) -> f64 {
        self.edge_of(a).map_or(0.0, |e| e.av_cost(eta1, eta2))
    }

    /// Expanded copies of a customer (local id), one per layer.
    pub fn copies(&self, c: NodeId) -> impl Iterator<Item = usize> + '_ {
        (0..self.layers).map(move |l| self.node(l, c))
    }

    /// Every customer copy, layer-major.
    pub fn customer_copies(&self) -> Vec<usize> {
        (0..self.layers)
            .flat_map(|l| self.customers.iter().map(move |&c| (l, c)))
            .map(|(l, c)| self.node(l, c))
            .collect()
    }

    pub fn num_dummy_arcs(&self) -> usize {
        self.arcs
            .iter()
            .filter(|a| !matches!(a.kind, ArcKind::Road { .. }))
            .count()
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph expanded {\n  rankdir=LR;\n");
        for v in 0..self.num_nodes() {
            let label = match self.split(v) {
                Some((l, local)) => format!("{}@{}", self.base.original(local), l + 1),
                None => "s".to_string(),
            };
            let _ = writeln!(s, "  n{v} [label=\"{label}\"];");
        }
        for a in &self.arcs {
            let style = match a.kind {
                ArcKind::Road { edge } => match self.base.network.edge(edge).road {
                    RoadType::AvEnabled => "color=blue",
                    RoadType::Ordinary => "color=black",
                },
                _ => "style=dashed",
            };
            let _ = writeln!(s, "  n{} -> n{} [{style}];", a.tail, a.head);
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::{Node, RoadNetwork};

    fn undirected(n: usize, roads: &[(usize, usize, RoadType, f64)]) -> RoadNetwork {
        let nodes = (0..n).map(|id| Node { id, x: id as f64, y: 0.0 }).collect();
        let mut edges = Vec::new();
        for &(a, b, kind, c) in roads {
            edges.push(Edge::new(a, b, kind, c, c));
            edges.push(Edge::new(b, a, kind, c, c));
        }
        RoadNetwork::new(nodes, edges).unwrap()
    }

    #[test]
    fn triangle_keeps_everything() {
        use RoadType::AvEnabled as A;
        let net = undirected(3, &[(0, 1, A, 1.0), (1, 2, A, 1.0), (0, 2, A, 1.0)]);
        let pn = prune_network(&net, &[1, 2], 0, 0.5, 1.2).unwrap();
        assert_eq!(pn.network.num_edges(), 6);
        assert_eq!(pn.network.num_nodes(), 3);
    }

    #[test]
    fn dead_end_spur_removed() {
        use RoadType::Ordinary as O;
        // o=0 - a=1 - c=2, spur a - x=3
        let net = undirected(4, &[(0, 1, O, 1.0), (1, 2, O, 1.0), (1, 3, O, 1.0)]);
        let pn = prune_network(&net, &[2], 0, 0.5, 1.2).unwrap();
        assert_eq!(pn.node_map, vec![0, 1, 2]);
        assert_eq!(pn.network.num_edges(), 4);
        assert!(pn.local(3).is_none());
    }

    #[test]
    fn disconnected_required_pair() {
        let nodes = (0..2).map(|id| Node { id, x: 0.0, y: id as f64 }).collect();
        let net = RoadNetwork::new(nodes, vec![Edge::new(0, 1, RoadType::Ordinary, 1.0, 1.0)]).unwrap();
        assert!(matches!(prune_network(&net, &[1], 0, 0.5, 1.2), Err(Error::Disconnected(1, 0))));
    }

    fn fig2_like() -> RoadNetwork {
        use RoadType::{AvEnabled as A, Ordinary as O};
        // depot 0, customers 2 and 3
        undirected(4, &[(0, 1, A, 1.0), (1, 2, O, 1.0), (1, 3, A, 2.0), (2, 3, O, 1.0)])
    }

    #[test]
    fn single_layer_has_one_dummy() {
        let net = fig2_like();
        let pn = PrunedNetwork::whole(&net);
        let ge = expand_graph(&pn, 1, &[2, 3], 0).unwrap();
        assert_eq!(ge.num_nodes(), 5);
        assert_eq!(ge.num_dummy_arcs(), 1);
    }

    #[test]
    fn three_layers_two_customers() {
        let net = fig2_like();
        let pn = PrunedNetwork::whole(&net);
        let ge = expand_graph(&pn, 3, &[2, 3], 0).unwrap();
        let count = |k: ArcKind| ge.arcs().iter().filter(|a| a.kind == k).count();
        assert_eq!(count(ArcKind::CustomerTransition), 4);
        assert_eq!(count(ArcKind::DepotToSink), 3);
        assert_eq!(ge.num_nodes(), 3 * 4 + 1);
        // no arc goes down a layer; dummies have zero cost and time
        for (k, a) in ge.arcs().iter().enumerate() {
            if let (Some((lt, _)), Some((lh, _))) = (ge.split(a.tail), ge.split(a.head)) {
                assert!(lh >= lt);
            }
            if !matches!(a.kind, ArcKind::Road { .. }) {
                assert_eq!(ge.time(k), 0.0);
                assert_eq!(ge.hdv_cost(k), 0.0);
            }
        }
        // base-layer arcs into the depot end at the sink
        assert!(ge.in_arcs(ge.source()).is_empty());
    }

    #[test]
    fn road_arcs_copy_edge_attributes() {
        let net = fig2_like();
        let pn = prune_network(&net, &[2, 3], 0, 0.5, 1.2).unwrap();
        let ge = expand_graph(&pn, 2, &[2, 3], 0).unwrap();
        for (k, a) in ge.arcs().iter().enumerate() {
            if let ArcKind::Road { edge } = a.kind {
                let orig = net.edge(pn.edge_map[edge]);
                assert_eq!(ge.hdv_cost(k).to_bits(), orig.cost.to_bits());
                assert_eq!(ge.time(k).to_bits(), orig.time.to_bits());
                assert_eq!(ge.project(a.tail), orig.tail);
                assert_eq!(ge.project(a.head), orig.head);
            }
        }
    }

    #[test]
    fn dot_mentions_every_arc() {
        let net = fig2_like();
        let ge = expand_graph(&PrunedNetwork::whole(&net), 2, &[2, 3], 0).unwrap();
        let dot = ge.to_dot();
        assert_eq!(dot.matches("->").count(), ge.arcs().len());
    }
}

//! Full-fleet formulations on the expanded graph: time-discretized budget rows
//! or pairwise controller allocation.

use super::{MilpModel, Sense, Tag, TimeGrid, VarId};
use crate::expand::{ArcKind, ExpandedGraph};
use crate::instance::{VehicleKind, VrpSaInstance};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactOptions {
    /// Layer transition after serving is optional (`x <= y`) instead of forced.
    pub soft_transition: bool,
    /// AV travel times may stretch within the per-edge gamma bounds.
    pub flexible_time: bool,
    /// Emit the controller-budget rows; off gives the budget-free relaxation.
    pub budget: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            soft_transition: true,
            flexible_time: false,
            budget: true,
        }
    }
}

/// Per-vehicle routing variables.
struct Routing {
    x: Vec<VarId>,
    /// Indexed like `ExpandedGraph::customer_copies`.
    y: Vec<VarId>,
    t: Vec<VarId>,
}

fn arc_cost(inst: &VrpSaInstance, ge: &ExpandedGraph, kind: VehicleKind, a: usize) -> f64 {
    match kind {
        VehicleKind::Av => ge.av_cost(a, inst.eta1, inst.eta2),
        VehicleKind::Hdv => ge.hdv_cost(a),
    }
}

fn routing_core(inst: &VrpSaInstance, ge: &ExpandedGraph, opts: ExactOptions) -> (MilpModel, Vec<Routing>) {
    let mut model = MilpModel::new(format!("{}-exact", inst.name));
    let big_t = inst.horizon;
    let copies = ge.customer_copies();
    let mut copy_slot = vec![usize::MAX; ge.num_nodes()];
    for (k, &v) in copies.iter().enumerate() {
        copy_slot[v] = k;
    }
    let (src, sink) = (ge.source(), ge.sink());
    let mut all = Vec::new();
    let mut objective = Vec::new();

    for m in 0..inst.num_vehicles() {
        let kind = inst.vehicle_kind(m);
        let yo = model.binary(format!("yo_m{m}"), Some(Tag::Dispatch { vehicle: m }));
        objective.push((yo, inst.fixed_cost(kind)));
        let x: Vec<VarId> = (0..ge.arcs().len())
            .map(|a| model.binary(format!("x_m{m}_a{a}"), Some(Tag::RouteArc { vehicle: m, arc: a })))
            .collect();
        for (a, &xa) in x.iter().enumerate() {
            objective.push((xa, arc_cost(inst, ge, kind, a)));
        }
        let y: Vec<VarId> = copies
            .iter()
            .map(|&v| model.binary(format!("y_m{m}_n{v}"), Some(Tag::Serve { vehicle: m, node: v })))
            .collect();
        let t: Vec<VarId> = (0..ge.num_nodes())
            .map(|v| model.continuous(format!("t_m{m}_n{v}"), 0.0, big_t, Some(Tag::Timestamp { vehicle: m, node: v })))
            .collect();

        for v in 0..ge.num_nodes() {
            if v == src || v == sink {
                continue;
            }
            let (outs, ins) = (ge.out_arcs(v), ge.in_arcs(v));
            if outs.is_empty() && ins.is_empty() {
                continue;
            }
            let terms = outs.iter().map(|&a| (x[a], 1.0)).chain(ins.iter().map(|&a| (x[a], -1.0)));
            model.add_row(format!("flow_m{m}_n{v}"), "flow", terms, Sense::Eq, 0.0);
            if ins.len() > 1 {
                model.add_row(format!("inflow_m{m}_n{v}"), "inflow", ins.iter().map(|&a| (x[a], 1.0)), Sense::Le, 1.0);
            }
        }
        let out_terms = ge.out_arcs(src).iter().map(|&a| (x[a], 1.0)).chain([(yo, -1.0)]);
        model.add_row(format!("out_m{m}"), "dispatch", out_terms, Sense::Eq, 0.0);
        let in_terms = ge.in_arcs(sink).iter().map(|&a| (x[a], 1.0)).chain([(yo, -1.0)]);
        model.add_row(format!("in_m{m}"), "dispatch", in_terms, Sense::Eq, 0.0);

        let cap_terms = copies.iter().enumerate().map(|(k, &v)| {
            let d = inst.demand_of(ge.project(v)).expect("customer copy has a demand");
            (y[k], d)
        });
        model.add_row(format!("cap_m{m}"), "capacity", cap_terms, Sense::Le, inst.capacity);
        for (k, &v) in copies.iter().enumerate() {
            let terms = ge.in_arcs(v).iter().map(|&a| (x[a], 1.0)).chain([(y[k], -1.0)]);
            model.add_row(format!("visit_m{m}_n{v}"), "visit", terms, Sense::Ge, 0.0);
        }
        for (a, arc) in ge.arcs().iter().enumerate() {
            if arc.kind == ArcKind::CustomerTransition {
                let sense = if opts.soft_transition { Sense::Le } else { Sense::Eq };
                let yk = y[copy_slot[arc.tail]];
                model.add_row(format!("trans_m{m}_a{a}"), "transition", [(x[a], 1.0), (yk, -1.0)], sense, 0.0);
            }
        }
        let flexible = opts.flexible_time && kind == VehicleKind::Av;
        for (a, arc) in ge.arcs().iter().enumerate() {
            let dt = ge.time(a);
            let (gmin, gmax) = match ge.edge_of(a) {
                Some(e) if flexible => (e.gamma_min, e.gamma_max),
                _ => (1.0, 1.0),
            };
            let (ti, tj) = (t[arc.tail], t[arc.head]);
            model.add_row(
                format!("mtz_m{m}_a{a}"),
                "mtz",
                [(tj, 1.0), (ti, -1.0), (x[a], -big_t)],
                Sense::Ge,
                gmin * dt - big_t,
            );
            if flexible {
                model.add_row(
                    format!("mtzup_m{m}_a{a}"),
                    "mtz_upper",
                    [(tj, 1.0), (ti, -1.0), (x[a], big_t)],
                    Sense::Le,
                    gmax * dt + big_t,
                );
            }
        }
        if !flexible {
            let terms = [(t[sink], 1.0), (t[src], -1.0)]
                .into_iter()
                .chain((0..ge.arcs().len()).map(|a| (x[a], -ge.time(a))));
            model.add_row(format!("dur_m{m}"), "duration", terms, Sense::Eq, 0.0);
        }
        all.push(Routing { x, y, t });
    }

    for &c in &ge.customers {
        let orig = ge.base.original(c);
        let mut terms = Vec::new();
        for r in &all {
            for (k, &v) in copies.iter().enumerate() {
                if v % ge.base_nodes() == c {
                    terms.push((r.y[k], 1.0));
                }
            }
        }
        model.add_row(format!("serve_c{orig}"), "serve", terms, Sense::Eq, 1.0);
    }
    model.set_objective(objective, 0.0);
    (model, all)
}

fn ordinary_arcs(ge: &ExpandedGraph) -> Vec<usize> {
    (0..ge.arcs().len()).filter(|&a| ge.is_ordinary(a)).collect()
}

/// Time-discretized formulation: per-interval controller usage capped by the budget.
pub fn build_exact_milp(inst: &VrpSaInstance, ge: &ExpandedGraph, grid: &TimeGrid, opts: ExactOptions) -> MilpModel {
    let (mut model, routing) = routing_core(inst, ge, opts);
    if !opts.budget || inst.av_count == 0 {
        return model;
    }
    let big_t = inst.horizon;
    let ord = ordinary_arcs(ge);
    let mut usage: Vec<Vec<VarId>> = vec![Vec::new(); grid.len()];
    for (m, r) in routing.iter().enumerate().take(inst.av_count) {
        for (q, (aq, bq)) in grid.intervals().enumerate() {
            let u = model.binary(format!("u_q{q}_m{m}"), Some(Tag::ControllerUse { vehicle: m, interval: q }));
            usage[q].push(u);
            for &a in &ord {
                let arc = *ge.arc(a);
                let (ti, tj) = (r.t[arc.tail], r.t[arc.head]);
                let idx = (q * ge.arcs().len() + a) * inst.av_count + m;
                let al = model.binary(format!("alpha_q{q}_a{a}_m{m}"), Some(Tag::Overlap { after: true, index: idx }));
                let be = model.binary(format!("beta_q{q}_a{a}_m{m}"), Some(Tag::Overlap { after: false, index: idx }));
                let sfx = format!("q{q}_a{a}_m{m}");
                model.add_row(format!("exitle_{sfx}"), "overlap", [(tj, 1.0), (al, -big_t)], Sense::Le, aq);
                model.add_row(format!("exitge_{sfx}"), "overlap", [(tj, 1.0), (al, -big_t)], Sense::Ge, aq - big_t);
                model.add_row(format!("entryge_{sfx}"), "overlap", [(ti, 1.0), (be, big_t)], Sense::Ge, bq);
                model.add_row(format!("entryle_{sfx}"), "overlap", [(ti, 1.0), (be, big_t)], Sense::Le, bq + big_t);
                model.add_row(
                    format!("use_{sfx}"),
                    "usage",
                    [(u, 1.0), (al, -1.0 / 3.0), (be, -1.0 / 3.0), (r.x[a], -1.0 / 3.0)],
                    Sense::Ge,
                    -2.0 / 3.0,
                );
            }
        }
    }
    for (q, us) in usage.into_iter().enumerate() {
        model.add_row(format!("budget_q{q}"), "budget", us.into_iter().map(|u| (u, 1.0)), Sense::Le, inst.budget as f64);
    }
    model
}

/// Pairwise formulation: each controller serves at most one AV-arc at a time.
pub fn build_resource_allocation_milp(inst: &VrpSaInstance, ge: &ExpandedGraph, opts: ExactOptions) -> MilpModel {
    let (mut model, routing) = routing_core(inst, ge, opts);
    model.name = format!("{}-resource", inst.name);
    if !opts.budget || inst.av_count == 0 {
        return model;
    }
    let big_t = inst.horizon;
    let ord = ordinary_arcs(ge);
    let n_av = inst.av_count;
    let n_b = inst.budget;
    // u[b][m][k] for the k-th ordinary arc
    let mut u = vec![vec![Vec::with_capacity(ord.len()); n_av]; n_b];
    for (b, per_b) in u.iter_mut().enumerate() {
        for (m, per_m) in per_b.iter_mut().enumerate() {
            for &a in &ord {
                let idx = m * ge.arcs().len() + a;
                per_m.push(model.binary(format!("ua_b{b}_m{m}_a{a}"), Some(Tag::ControllerAssign { controller: b, index: idx })));
            }
        }
    }
    for m in 0..n_av {
        for (k, &a) in ord.iter().enumerate() {
            let terms = (0..n_b).map(|b| (u[b][m][k], 1.0)).chain([(routing[m].x[a], -1.0)]);
            model.add_row(format!("assign_m{m}_a{a}"), "assign", terms, Sense::Eq, 0.0);
        }
    }
    let mut pair = 0;
    for m1 in 0..n_av {
        for m2 in 0..n_av {
            if m1 == m2 {
                continue;
            }
            for (k1, &w1) in ord.iter().enumerate() {
                for (k2, &w2) in ord.iter().enumerate() {
                    let (a1, a2) = (*ge.arc(w1), *ge.arc(w2));
                    let enter1 = routing[m1].t[a1.tail];
                    let exit1 = routing[m1].t[a1.head];
                    let enter2 = routing[m2].t[a2.tail];
                    let exit2 = routing[m2].t[a2.head];
                    let sfx = format!("m{m1}_a{w1}_m{m2}_a{w2}");
                    let al = model.binary(format!("palpha_{sfx}"), Some(Tag::Overlap { after: true, index: pair }));
                    let be = model.binary(format!("pbeta_{sfx}"), Some(Tag::Overlap { after: false, index: pair }));
                    pair += 1;
                    model.add_row(format!("pa_le_{sfx}"), "pair_overlap", [(exit2, 1.0), (enter1, -1.0), (al, -big_t)], Sense::Le, 0.0);
                    model.add_row(format!("pa_ge_{sfx}"), "pair_overlap", [(exit2, 1.0), (enter1, -1.0), (al, -big_t)], Sense::Ge, -big_t);
                    model.add_row(format!("pb_le_{sfx}"), "pair_overlap", [(exit1, 1.0), (enter2, -1.0), (be, -big_t)], Sense::Le, 0.0);
                    model.add_row(format!("pb_ge_{sfx}"), "pair_overlap", [(exit1, 1.0), (enter2, -1.0), (be, -big_t)], Sense::Ge, -big_t);
                    let (x1, x2) = (routing[m1].x[w1], routing[m2].x[w2]);
                    for (b, ub) in u.iter().enumerate() {
                        model.add_row(
                            format!("excl_b{b}_{sfx}"),
                            "exclusive",
                            [(ub[m1][k1], 1.0), (ub[m2][k2], 1.0), (x1, 0.25), (x2, 0.25), (al, 0.25), (be, 0.25)],
                            Sense::Le,
                            11.0 / 4.0,
                        );
                    }
                }
            }
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expand::{expand_graph, PrunedNetwork};
    use crate::instance::Customer;
    use crate::roadnet::{Edge, Node, RoadNetwork, RoadType};

    /// Path 0 - 1 - 2, depot 0, customer 2, all ordinary.
    fn path_instance(av: usize, hdv: usize, intervals: usize) -> VrpSaInstance {
        let nodes = (0..3).map(|id| Node { id, x: id as f64, y: 0.0 }).collect();
        let mut edges = Vec::new();
        for (a, b) in [(0, 1), (1, 2)] {
            edges.push(Edge::new(a, b, RoadType::Ordinary, 1.0, 1.0));
            edges.push(Edge::new(b, a, RoadType::Ordinary, 1.0, 1.0));
        }
        VrpSaInstance {
            name: "path".into(),
            network: RoadNetwork::new(nodes, edges).unwrap(),
            depot: 0,
            customers: vec![Customer { node: 2, demand: 1.0, label: 2 }],
            capacity: 1.0,
            av_count: av,
            hdv_count: hdv,
            fixed_cost_av: 1.0,
            fixed_cost_hdv: 1.0,
            eta1: 0.5,
            eta2: 1.2,
            horizon: 10.0,
            budget: 1,
            intervals,
            layers: 1,
        }
    }

    #[test]
    fn hand_counted_variables() {
        let inst = path_instance(1, 0, 2);
        let ge = expand_graph(&PrunedNetwork::whole(&inst.network), 1, &[2], 0).unwrap();
        let m = build_exact_milp(&inst, &ge, &inst.time_grid(), ExactOptions::default());
        // yo + 5 arcs (4 roads, 1 depot dummy) + 1 serve + 4 timestamps
        // + 2 intervals * (u + 4 ordinary arcs * (alpha, beta))
        assert_eq!(m.vars.len(), 1 + 5 + 1 + 4 + 2 * (1 + 4 * 2));
        assert_eq!(m.vars.len(), 29);
        m.lint().unwrap();
    }

    #[test]
    fn no_avs_means_no_budget_variables() {
        let inst = path_instance(0, 2, 4);
        let ge = expand_graph(&PrunedNetwork::whole(&inst.network), 1, &[2], 0).unwrap();
        let m = build_exact_milp(&inst, &ge, &inst.time_grid(), ExactOptions::default());
        assert!(m.vars.iter().all(|v| !v.name.starts_with('u') && !v.name.starts_with("alpha")));
        let r = build_resource_allocation_milp(&inst, &ge, ExactOptions::default());
        assert_eq!(r.vars.len(), m.vars.len());
    }

    #[test]
    fn single_av_has_no_pair_rows() {
        let inst = path_instance(1, 1, 4);
        let ge = expand_graph(&PrunedNetwork::whole(&inst.network), 1, &[2], 0).unwrap();
        let r = build_resource_allocation_milp(&inst, &ge, ExactOptions::default());
        assert!(r.constraints.iter().all(|c| c.family != "pair_overlap" && c.family != "exclusive"));
        assert!(r.vars.iter().any(|v| v.name.starts_with("ua_")));
        r.lint().unwrap();
    }

    #[test]
    fn flexible_drops_av_duration_row() {
        let inst = path_instance(1, 1, 2);
        let ge = expand_graph(&PrunedNetwork::whole(&inst.network), 1, &[2], 0).unwrap();
        let opts = ExactOptions { flexible_time: true, ..Default::default() };
        let m = build_exact_milp(&inst, &ge, &inst.time_grid(), opts);
        let dur: Vec<_> = m.constraints.iter().filter(|c| c.family == "duration").map(|c| c.name.clone()).collect();
        assert_eq!(dur, vec!["dur_m1".to_string()]);
        assert_eq!(m.constraints.iter().filter(|c| c.family == "mtz_upper").count(), ge.arcs().len());
    }
}

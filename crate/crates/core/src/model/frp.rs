//! Feasibility-recovery models: departure/sub-route rescheduling and
//! single-vehicle rerouting around exhausted-budget intervals.

use super::{MilpModel, Sense, Tag, VarId};
use crate::expand::{ArcKind, ExpandedGraph};
use crate::pipeline::SubRoute;
use crate::roadnet::RoadType;

/// Feasibility model (zero objective) shifting each vehicle's schedule so that
/// at most `budget` ordinary sub-routes overlap. `routes[k]` lists vehicle k's
/// sub-routes in travel order; sub-routes are numbered route by route.
pub fn build_rescheduling_milp(routes: &[Vec<SubRoute>], budget: usize, horizon: f64, flexible: bool) -> MilpModel {
    let mut model = MilpModel::new("rescheduling");
    let big_t = horizon;
    // (route index, start var, end var, sub-route)
    let mut subs: Vec<(usize, VarId, VarId, &SubRoute)> = Vec::new();
    for (k, route) in routes.iter().enumerate() {
        let tbar = model.continuous(format!("tbar_v{k}"), 0.0, big_t, Some(Tag::Departure { vehicle: k }));
        let mut lo_off = 0.0;
        let mut hi_off = 0.0;
        let mut prev_end: Option<VarId> = None;
        for sr in route {
            let r = subs.len();
            let ts = model.continuous(format!("ts_r{r}"), 0.0, big_t, Some(Tag::SubRouteStart { r }));
            let te = model.continuous(format!("te_r{r}"), 0.0, big_t, Some(Tag::SubRouteEnd { r }));
            if flexible {
                model.add_row(format!("startup_r{r}"), "start", [(ts, 1.0), (tbar, -1.0)], Sense::Le, hi_off);
                model.add_row(format!("startlo_r{r}"), "start", [(ts, 1.0), (tbar, -1.0)], Sense::Ge, lo_off);
                model.add_row(format!("lenup_r{r}"), "length", [(te, 1.0), (ts, -1.0)], Sense::Le, sr.gamma_max * sr.duration);
                model.add_row(format!("lenlo_r{r}"), "length", [(te, 1.0), (ts, -1.0)], Sense::Ge, sr.gamma_min * sr.duration);
                if let Some(pe) = prev_end {
                    model.add_row(format!("abut_r{r}"), "abut", [(ts, 1.0), (pe, -1.0)], Sense::Eq, 0.0);
                }
            } else {
                model.add_row(format!("start_r{r}"), "start", [(ts, 1.0), (tbar, -1.0)], Sense::Eq, lo_off);
                model.add_row(format!("len_r{r}"), "length", [(te, 1.0), (ts, -1.0)], Sense::Eq, sr.duration);
            }
            lo_off += if flexible { sr.gamma_min * sr.duration } else { sr.duration };
            hi_off += if flexible { sr.gamma_max * sr.duration } else { sr.duration };
            prev_end = Some(te);
            subs.push((k, ts, te, sr));
        }
        if let Some(pe) = prev_end {
            model.add_row(format!("end_v{k}"), "end", [(pe, 1.0)], Sense::Le, big_t);
        }
    }

    let ordinary: Vec<usize> = (0..subs.len()).filter(|&r| subs[r].3.kind == RoadType::Ordinary).collect();
    // u[b][i] for the i-th ordinary sub-route
    let mut u = vec![Vec::with_capacity(ordinary.len()); budget];
    for (b, ub) in u.iter_mut().enumerate() {
        for &r in &ordinary {
            ub.push(model.binary(format!("uc_b{b}_r{r}"), Some(Tag::ControllerAssign { controller: b, index: r })));
        }
    }
    for (i, &r) in ordinary.iter().enumerate() {
        model.add_row(format!("assign_r{r}"), "assign", (0..budget).map(|b| (u[b][i], 1.0)), Sense::Eq, 1.0);
    }
    let mut pair = 0;
    for (i1, &r1) in ordinary.iter().enumerate() {
        for (i2, &r2) in ordinary.iter().enumerate() {
            if subs[r1].0 == subs[r2].0 {
                continue;
            }
            let (s1, e1) = (subs[r1].1, subs[r1].2);
            let (s2, e2) = (subs[r2].1, subs[r2].2);
            let sfx = format!("r{r1}_r{r2}");
            let al = model.binary(format!("ralpha_{sfx}"), Some(Tag::Overlap { after: true, index: pair }));
            let be = model.binary(format!("rbeta_{sfx}"), Some(Tag::Overlap { after: false, index: pair }));
            pair += 1;
            model.add_row(format!("oa_le_{sfx}"), "overlap", [(e2, 1.0), (s1, -1.0), (al, -big_t)], Sense::Le, 0.0);
            model.add_row(format!("oa_ge_{sfx}"), "overlap", [(e2, 1.0), (s1, -1.0), (al, -big_t)], Sense::Ge, -big_t);
            model.add_row(format!("ob_le_{sfx}"), "overlap", [(e1, 1.0), (s2, -1.0), (be, -big_t)], Sense::Le, 0.0);
            model.add_row(format!("ob_ge_{sfx}"), "overlap", [(e1, 1.0), (s2, -1.0), (be, -big_t)], Sense::Ge, -big_t);
            for (b, ub) in u.iter().enumerate() {
                model.add_row(
                    format!("excl_b{b}_{sfx}"),
                    "exclusive",
                    [(ub[i1], 1.0), (ub[i2], 1.0), (al, 0.5), (be, 0.5)],
                    Sense::Le,
                    2.5,
                );
            }
        }
    }
    model
}

/// Single-AV model rebuilding one route on its own expanded graph while
/// keeping off ordinary arcs during each interval of `infeasible`.
pub fn build_rerouting_milp(ge: &ExpandedGraph, eta1: f64, eta2: f64, infeasible: &[(f64, f64)], horizon: f64) -> MilpModel {
    let mut model = MilpModel::new("rerouting");
    let big_t = horizon;
    let (src, sink) = (ge.source(), ge.sink());
    let copies = ge.customer_copies();
    let mut copy_slot = vec![usize::MAX; ge.num_nodes()];
    for (k, &v) in copies.iter().enumerate() {
        copy_slot[v] = k;
    }
    let x: Vec<VarId> = (0..ge.arcs().len())
        .map(|a| model.binary(format!("x_a{a}"), Some(Tag::RouteArc { vehicle: 0, arc: a })))
        .collect();
    let y: Vec<VarId> = copies
        .iter()
        .map(|&v| model.binary(format!("y_n{v}"), Some(Tag::Serve { vehicle: 0, node: v })))
        .collect();
    let t: Vec<VarId> = (0..ge.num_nodes())
        .map(|v| model.continuous(format!("t_n{v}"), 0.0, big_t, Some(Tag::Timestamp { vehicle: 0, node: v })))
        .collect();
    model.set_objective((0..x.len()).map(|a| (x[a], ge.av_cost(a, eta1, eta2))), 0.0);

    for v in 0..ge.num_nodes() {
        if v == src || v == sink {
            continue;
        }
        let (outs, ins) = (ge.out_arcs(v), ge.in_arcs(v));
        if outs.is_empty() && ins.is_empty() {
            continue;
        }
        let terms = outs.iter().map(|&a| (x[a], 1.0)).chain(ins.iter().map(|&a| (x[a], -1.0)));
        model.add_row(format!("flow_n{v}"), "flow", terms, Sense::Eq, 0.0);
        if ins.len() > 1 {
            model.add_row(format!("inflow_n{v}"), "inflow", ins.iter().map(|&a| (x[a], 1.0)), Sense::Le, 1.0);
        }
    }
    let outs = ge.out_arcs(src).iter().map(|&a| (x[a], 1.0));
    let ins = ge.in_arcs(sink).iter().map(|&a| (x[a], -1.0));
    model.add_row("dispatch".into(), "dispatch", outs.clone().chain(ins), Sense::Eq, 0.0);
    model.add_row("dispatch_cap".into(), "dispatch", outs, Sense::Le, 1.0);
    for &c in &ge.customers {
        let terms = ge.copies(c).map(|v| (y[copy_slot[v]], 1.0));
        model.add_row(format!("serve_c{}", ge.base.original(c)), "serve", terms, Sense::Eq, 1.0);
    }
    for (k, &v) in copies.iter().enumerate() {
        let terms = ge.in_arcs(v).iter().map(|&a| (x[a], 1.0)).chain([(y[k], -1.0)]);
        model.add_row(format!("visit_n{v}"), "visit", terms, Sense::Ge, 0.0);
    }
    for (a, arc) in ge.arcs().iter().enumerate() {
        if arc.kind == ArcKind::CustomerTransition {
            model.add_row(format!("trans_a{a}"), "transition", [(x[a], 1.0), (y[copy_slot[arc.tail]], -1.0)], Sense::Le, 0.0);
        }
    }
    for (a, arc) in ge.arcs().iter().enumerate() {
        model.add_row(
            format!("mtz_a{a}"),
            "mtz",
            [(t[arc.head], 1.0), (t[arc.tail], -1.0), (x[a], -big_t)],
            Sense::Ge,
            ge.time(a) - big_t,
        );
    }
    let terms = [(t[sink], 1.0), (t[src], -1.0)]
        .into_iter()
        .chain((0..x.len()).map(|a| (x[a], -ge.time(a))));
    model.add_row("dur".into(), "duration", terms, Sense::Eq, 0.0);

    let ord: Vec<usize> = (0..ge.arcs().len()).filter(|&a| ge.is_ordinary(a)).collect();
    for (q, &(aq, bq)) in infeasible.iter().enumerate() {
        for &a in &ord {
            let arc = *ge.arc(a);
            let (ti, tj) = (t[arc.tail], t[arc.head]);
            let idx = q * ge.arcs().len() + a;
            let al = model.binary(format!("alpha_q{q}_a{a}"), Some(Tag::Overlap { after: true, index: idx }));
            let be = model.binary(format!("beta_q{q}_a{a}"), Some(Tag::Overlap { after: false, index: idx }));
            let sfx = format!("q{q}_a{a}");
            model.add_row(format!("exitle_{sfx}"), "overlap", [(tj, 1.0), (al, -big_t)], Sense::Le, aq);
            model.add_row(format!("exitge_{sfx}"), "overlap", [(tj, 1.0), (al, -big_t)], Sense::Ge, aq - big_t);
            model.add_row(format!("entryge_{sfx}"), "overlap", [(ti, 1.0), (be, big_t)], Sense::Ge, bq);
            model.add_row(format!("entryle_{sfx}"), "overlap", [(ti, 1.0), (be, big_t)], Sense::Le, bq + big_t);
            model.add_row(format!("avoid_{sfx}"), "avoid", [(al, 1.0), (be, 1.0), (x[a], 1.0)], Sense::Le, 2.0);
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sr(vehicle: usize, kind: RoadType, start: f64, end: f64) -> SubRoute {
        SubRoute {
            vehicle,
            kind,
            start,
            end,
            duration: end - start,
            edges: Vec::new(),
            gamma_min: 0.8,
            gamma_max: 1.25,
        }
    }

    #[test]
    fn counts_for_two_vehicles() {
        use RoadType::{AvEnabled as A, Ordinary as O};
        let routes = vec![
            vec![sr(0, O, 0.0, 2.0), sr(0, A, 2.0, 3.0)],
            vec![sr(1, A, 0.0, 1.0), sr(1, O, 1.0, 3.0)],
        ];
        let m = build_rescheduling_milp(&routes, 1, 10.0, false);
        // 2 departures + 4 * 2 sub-route times + 2 assignments + 2 ordered pairs * 2
        assert_eq!(m.vars.len(), 2 + 8 + 2 + 4);
        assert_eq!(m.num_binaries(), 6);
        m.lint().unwrap();
        assert!(m.objective.is_empty());
    }

    #[test]
    fn same_vehicle_pairs_skipped() {
        use RoadType::{AvEnabled as A, Ordinary as O};
        let routes = vec![vec![sr(0, O, 0.0, 1.0), sr(0, A, 1.0, 2.0), sr(0, O, 2.0, 3.0)]];
        let m = build_rescheduling_milp(&routes, 1, 10.0, true);
        assert!(m.vars.iter().all(|v| !v.name.starts_with("ralpha")));
        assert_eq!(m.constraints.iter().filter(|c| c.family == "abut").count(), 2);
    }
}

//! Turning a solved routing model back into routes on the original network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expand::{ArcKind, ExpandedGraph};
use crate::instance::{VehicleKind, VrpSaInstance};
use crate::model::{MilpModel, Tag};
use crate::roadnet::NodeId;

use super::SolveResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedRoute {
    pub vehicle: usize,
    pub kind: VehicleKind,
    /// Original node ids from depot to depot.
    pub nodes: Vec<NodeId>,
    /// Arrival time at each entry of `nodes`.
    pub times: Vec<f64>,
    pub departure: f64,
    /// Customers served, in visiting order.
    pub served: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedSolution {
    pub routes: Vec<DecodedRoute>,
    pub routing_cost: f64,
    pub fixed_cost: f64,
}

impl DecodedSolution {
    pub fn total(&self) -> f64 {
        self.routing_cost + self.fixed_cost
    }
}

/// Follows the selected arcs of every vehicle from source to sink.
///
/// The recomputed cost must match the reported objective; vehicles without a
/// dispatch variable (rerouting models) carry no fixed cost.
pub fn decode_solution(
    result: &SolveResult,
    model: &MilpModel,
    ge: &ExpandedGraph,
    inst: &VrpSaInstance,
) -> Result<DecodedSolution> {
    if !result.status.has_solution() || result.values.len() != model.vars.len() {
        return Err(Error::Decode(format!("no solution to decode ({:?})", result.status)));
    }
    let vals = &result.values;
    let on = |j: usize| vals[j] > 0.5;
    let nv = model
        .vars
        .iter()
        .filter_map(|v| match v.tag {
            Some(Tag::RouteArc { vehicle, .. }) => Some(vehicle + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut arcs: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut times: Vec<Vec<f64>> = vec![vec![f64::NAN; ge.num_nodes()]; nv];
    let mut serve: Vec<Vec<bool>> = vec![vec![false; ge.num_nodes()]; nv];
    let mut dispatched = vec![false; nv];
    for (j, v) in model.vars.iter().enumerate() {
        match v.tag {
            Some(Tag::RouteArc { vehicle, arc }) if on(j) => arcs[vehicle].push(arc),
            Some(Tag::Timestamp { vehicle, node }) if vehicle < nv => times[vehicle][node] = vals[j],
            Some(Tag::Serve { vehicle, node }) if on(j) && vehicle < nv => serve[vehicle][node] = true,
            Some(Tag::Dispatch { vehicle }) if on(j) && vehicle < nv => dispatched[vehicle] = true,
            _ => {}
        }
    }

    let mut routes = Vec::new();
    let (mut rc, mut fc) = (0.0, 0.0);
    for m in 0..nv {
        if arcs[m].is_empty() {
            continue;
        }
        let kind = inst.vehicle_kind(m);
        let mut used = vec![false; arcs[m].len()];
        let mut at = ge.source();
        let departure = times[m][at];
        let mut nodes = vec![ge.project(at)];
        let mut when = vec![departure];
        let mut served = Vec::new();
        if serve[m][at] {
            served.push(ge.project(at));
        }
        while at != ge.sink() {
            let next = (0..arcs[m].len()).find(|&k| !used[k] && ge.arc(arcs[m][k]).tail == at);
            let Some(k) = next else {
                return Err(Error::Decode(format!("vehicle {m} route breaks off at expanded node {at}")));
            };
            used[k] = true;
            let a = arcs[m][k];
            let arc = ge.arc(a);
            rc += match kind {
                VehicleKind::Av => ge.av_cost(a, inst.eta1, inst.eta2),
                VehicleKind::Hdv => ge.hdv_cost(a),
            };
            at = arc.head;
            if let ArcKind::Road { .. } = arc.kind {
                nodes.push(ge.project(at));
                when.push(times[m][at]);
            }
            if serve[m][at] {
                served.push(ge.project(at));
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Error::Decode(format!("vehicle {m} selects arcs off its route")));
        }
        if dispatched[m] {
            fc += inst.fixed_cost(kind);
        }
        routes.push(DecodedRoute {
            vehicle: m,
            kind,
            nodes,
            times: when,
            departure,
            served,
        });
    }
    if let Some(obj) = result.objective {
        if (rc + fc - obj).abs() > 1e-6 * obj.abs().max(1.0) {
            return Err(Error::Decode(format!("recomputed cost {} differs from objective {obj}", rc + fc)));
        }
    }
    Ok(DecodedSolution {
        routes,
        routing_cost: rc,
        fixed_cost: fc,
    })
}

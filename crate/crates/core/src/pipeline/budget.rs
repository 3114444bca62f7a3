//! Sub-route extraction and controller-usage accounting.
//!
//! An AV holds a controller on an ordinary sub-route `[start, end]`. Two such
//! intervals conflict only if they share more than an endpoint, so one
//! controller can be handed over at the instant a sub-route ends.

use serde::{Deserialize, Serialize};

use crate::roadnet::{EdgeId, RoadNetwork, RoadType};

use super::Route;

/// Maximal run of same-type road segments on one vehicle's route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubRoute {
    pub vehicle: usize,
    pub kind: RoadType,
    pub start: f64,
    pub end: f64,
    /// Nominal travel time.
    pub duration: f64,
    pub edges: Vec<EdgeId>,
    /// Time-weighted stretch bounds of the edges.
    pub gamma_min: f64,
    pub gamma_max: f64,
}

pub fn derive_subroutes(route: &Route, net: &RoadNetwork) -> Vec<SubRoute> {
    let mut out: Vec<SubRoute> = Vec::new();
    for (i, &e) in route.edges.iter().enumerate() {
        let edge = net.edge(e);
        let (t0, t1) = (route.times[i], route.times[i + 1]);
        match out.last_mut() {
            Some(sr) if sr.kind == edge.road => {
                sr.end = t1;
                sr.edges.push(e);
                sr.gamma_min = (sr.gamma_min * sr.duration + edge.gamma_min * edge.time) / (sr.duration + edge.time);
                sr.gamma_max = (sr.gamma_max * sr.duration + edge.gamma_max * edge.time) / (sr.duration + edge.time);
                sr.duration += edge.time;
            }
            _ => out.push(SubRoute {
                vehicle: route.vehicle,
                kind: edge.road,
                start: t0,
                end: t1,
                duration: edge.time,
                edges: vec![e],
                gamma_min: edge.gamma_min,
                gamma_max: edge.gamma_max,
            }),
        }
    }
    out
}

/// Controller-holding intervals of a set of AV routes.
pub fn ordinary_intervals(routes: &[Route], net: &RoadNetwork) -> Vec<(f64, f64)> {
    routes
        .iter()
        .flat_map(|r| derive_subroutes(r, net))
        .filter(|sr| sr.kind == RoadType::Ordinary)
        .map(|sr| (sr.start, sr.end))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub start: f64,
    pub end: f64,
    /// Peak number of controllers in use within the interval.
    pub usage: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BudgetCheck {
    Feasible,
    Violations(Vec<Violation>),
}

impl BudgetCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, BudgetCheck::Feasible)
    }
}

/// Overlaps shorter than this are treated as touching; absorbs rounding in
/// schedules rebuilt from solver output.
pub const OVERLAP_EPS: f64 = 1e-7;

/// Sweep over interval endpoints; ends are processed before starts at equal times.
fn events(intervals: &[(f64, f64)]) -> Vec<(f64, i32)> {
    let mut ev: Vec<(f64, i32)> = Vec::with_capacity(2 * intervals.len());
    for &(s, e) in intervals {
        if e - OVERLAP_EPS > s {
            ev.push((s, 1));
            ev.push((e - OVERLAP_EPS, -1));
        }
    }
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ev
}

/// Largest number of intervals sharing an open stretch of time.
pub fn max_concurrency(intervals: &[(f64, f64)]) -> usize {
    let mut cur = 0i32;
    let mut best = 0i32;
    for (_, d) in events(intervals) {
        cur += d;
        best = best.max(cur);
    }
    best as usize
}

pub fn check_budget(intervals: &[(f64, f64)], budget: usize) -> BudgetCheck {
    let mut out: Vec<Violation> = Vec::new();
    let mut cur = 0usize;
    let mut open: Option<Violation> = None;
    for (t, d) in events(intervals) {
        if d > 0 {
            cur += 1;
        } else {
            cur -= 1;
        }
        match open.as_mut() {
            Some(v) if cur > budget => v.usage = v.usage.max(cur),
            Some(v) => {
                v.end = t + OVERLAP_EPS;
                out.push(open.take().expect("open violation"));
            }
            None if cur > budget => {
                open = Some(Violation {
                    start: t,
                    end: t,
                    usage: cur,
                })
            }
            None => {}
        }
    }
    // merge violations separated by a zero-length dip
    let mut merged: Vec<Violation> = Vec::new();
    for v in out {
        match merged.last_mut() {
            Some(last) if last.end == v.start => {
                last.end = v.end;
                last.usage = last.usage.max(v.usage);
            }
            _ => merged.push(v),
        }
    }
    if merged.is_empty() {
        BudgetCheck::Feasible
    } else {
        BudgetCheck::Violations(merged)
    }
}

/// Stretches of `[0, horizon]` where accepted schedules already hold every
/// controller. The horizon is cut at all transition timestamps; adjacent
/// exhausted pieces are merged.
pub fn infeasible_intervals(accepted: &[Route], net: &RoadNetwork, budget: usize, horizon: f64) -> Vec<(f64, f64)> {
    let subs: Vec<SubRoute> = accepted.iter().flat_map(|r| derive_subroutes(r, net)).collect();
    let mut cuts = vec![0.0, horizon];
    for sr in &subs {
        cuts.push(sr.start);
        cuts.push(sr.end);
    }
    cuts.retain(|&t| (0.0..=horizon).contains(&t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let ordinary: Vec<(f64, f64)> = subs
        .iter()
        .filter(|sr| sr.kind == RoadType::Ordinary)
        .map(|sr| (sr.start, sr.end))
        .collect();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let usage = ordinary.iter().filter(|&&(s, e)| s < mid && mid < e).count();
        if usage >= budget {
            match out.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => out.push((a, b)),
            }
        }
    }
    out
}

//! Stratified-grid road network generator.
//!
//! A primary lattice of AV-enabled roads spans the bounding box of the points.
//! Inside every cell, each contained point adds one horizontal and one vertical
//! ordinary road clipped to the cell, so every point sits on an intersection.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::roadnet::{Edge, Node, NodeId, RoadNetwork, RoadType};

fn cmp_xy(a: &(f64, f64), b: &(f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

fn divisions(lo: f64, hi: f64, g: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=g).map(|k| lo + (hi - lo) * k as f64 / g as f64).collect();
    v[0] = lo;
    v[g] = hi;
    v
}

/// Index of the cell whose half-open span contains `x`; the last cell is closed.
fn cell_of(lines: &[f64], x: f64) -> usize {
    let g = lines.len() - 1;
    (0..g).rev().find(|&k| lines[k] <= x).unwrap_or(0)
}

fn inside(lo: f64, hi: f64, x: f64) -> bool {
    lo < x && x < hi
}

/// Build the network and the placement of each input point (by index).
pub fn generate_network(
    coords: &[(f64, f64)],
    gx: usize,
    gy: usize,
) -> Result<(RoadNetwork, Vec<NodeId>)> {
    if coords.is_empty() || gx == 0 || gy == 0 {
        return Err(Error::InvalidNetwork("need at least one point and one division".into()));
    }
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| cmp_xy(&coords[a], &coords[b]).then(a.cmp(&b)));
    for w in order.windows(2) {
        if cmp_xy(&coords[w[0]], &coords[w[1]]) == Ordering::Equal {
            return Err(Error::DuplicateCoordinates(w[0].min(w[1]), w[0].max(w[1])));
        }
    }

    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&(f64, f64)) -> f64| {
        coords.iter().map(sel).fold(init, f)
    };
    let (mut x0, mut x1) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (mut y0, mut y1) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
    // degenerate box: widen by a unit margin
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y0 == y1 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let xs = divisions(x0, x1, gx);
    let ys = divisions(y0, y1, gy);

    // local lines per cell
    let mut local_x: Vec<Vec<f64>> = vec![Vec::new(); gx * gy];
    let mut local_y: Vec<Vec<f64>> = vec![Vec::new(); gx * gy];
    for &(x, y) in coords {
        let (i, j) = (cell_of(&xs, x), cell_of(&ys, y));
        let c = j * gx + i;
        if inside(xs[i], xs[i + 1], x) {
            local_x[c].push(x);
        }
        if inside(ys[j], ys[j + 1], y) {
            local_y[c].push(y);
        }
    }
    for v in local_x.iter_mut().chain(local_y.iter_mut()) {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }

    let mut points: Vec<(f64, f64)> = Vec::new();
    for &x in &xs {
        for &y in &ys {
            points.push((x, y));
        }
    }
    for j in 0..gy {
        for i in 0..gx {
            let c = j * gx + i;
            for &lx in &local_x[c] {
                points.push((lx, ys[j]));
                points.push((lx, ys[j + 1]));
                for &ly in &local_y[c] {
                    points.push((lx, ly));
                }
            }
            for &ly in &local_y[c] {
                points.push((xs[i], ly));
                points.push((xs[i + 1], ly));
            }
        }
    }
    points.sort_by(cmp_xy);
    points.dedup_by(|a, b| cmp_xy(a, b) == Ordering::Equal);
    let id_of = |p: (f64, f64)| -> NodeId {
        points
            .binary_search_by(|q| cmp_xy(q, &p))
            .expect("generated point registered")
    };

    let mut edges: Vec<Edge> = Vec::new();
    let mut road = |a: NodeId, b: NodeId, kind: RoadType, len: f64| {
        edges.push(Edge::new(a, b, kind, len, len));
        edges.push(Edge::new(b, a, kind, len, len));
    };
    let chain = |on_line: &mut Vec<(f64, NodeId)>, kind: RoadType, road: &mut dyn FnMut(NodeId, NodeId, RoadType, f64)| {
        on_line.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in on_line.windows(2) {
            road(w[0].1, w[1].1, kind, w[1].0 - w[0].0);
        }
    };
    // primary lines
    for &x in &xs {
        let mut on: Vec<(f64, NodeId)> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0 == x)
            .map(|(id, p)| (p.1, id))
            .collect();
        chain(&mut on, RoadType::AvEnabled, &mut road);
    }
    for &y in &ys {
        let mut on: Vec<(f64, NodeId)> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 == y)
            .map(|(id, p)| (p.0, id))
            .collect();
        chain(&mut on, RoadType::AvEnabled, &mut road);
    }
    // local lines, clipped to their cell
    for j in 0..gy {
        for i in 0..gx {
            let c = j * gx + i;
            for &lx in &local_x[c] {
                let mut on: Vec<(f64, NodeId)> = std::iter::once(ys[j])
                    .chain(local_y[c].iter().copied())
                    .chain(std::iter::once(ys[j + 1]))
                    .map(|y| (y, id_of((lx, y))))
                    .collect();
                chain(&mut on, RoadType::Ordinary, &mut road);
            }
            for &ly in &local_y[c] {
                let mut on: Vec<(f64, NodeId)> = std::iter::once(xs[i])
                    .chain(local_x[c].iter().copied())
                    .chain(std::iter::once(xs[i + 1]))
                    .map(|x| (x, id_of((x, ly))))
                    .collect();
                chain(&mut on, RoadType::Ordinary, &mut road);
            }
        }
    }

    let nodes = points
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| Node { id, x, y })
        .collect();
    let placement = coords.iter().map(|&p| id_of(p)).collect();
    Ok((RoadNetwork::new(nodes, edges)?, placement))
}

//! Problem data: the mixed-fleet routing instance, benchmark parsing,
//! grid network generation and canonical JSON documents.

mod generator;
mod io;
mod tsplib;

use serde::{Deserialize, Serialize};

pub use generator::generate_network;
pub use io::{load_instance, save_instance, FORMAT_VERSION};
pub use tsplib::{parse_cvrp, CvrpInstance};

use crate::error::{Error, Result};
use crate::model::TimeGrid;
use crate::pipeline::phase1::{plan_routes, PlanInput};
use crate::roadnet::{compute_k, NodeId, RoadNetwork, WeightMode};

/// A customer placed on a network node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Customer {
    pub node: NodeId,
    pub demand: f64,
    /// Identifier from the source benchmark, kept for reporting.
    pub label: usize,
}

/// Vehicle class. AVs are numbered before HDVs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Av,
    Hdv,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VrpSaInstance {
    pub name: String,
    pub network: RoadNetwork,
    pub depot: NodeId,
    pub customers: Vec<Customer>,
    pub capacity: f64,
    pub av_count: usize,
    pub hdv_count: usize,
    pub fixed_cost_av: f64,
    pub fixed_cost_hdv: f64,
    /// AV cost factor on AV-enabled roads (< 1).
    pub eta1: f64,
    /// AV cost factor on ordinary roads (> 1).
    pub eta2: f64,
    pub horizon: f64,
    /// Number of remote controllers.
    pub budget: usize,
    /// Number of intervals of the time-discretized model.
    pub intervals: usize,
    /// Layers of the expanded graph.
    pub layers: usize,
}

impl VrpSaInstance {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(m));
        let n = self.network.num_nodes();
        if self.depot >= n {
            return bad(format!("depot {} is not a network node", self.depot));
        }
        let mut seen = vec![false; n];
        for c in &self.customers {
            if c.node >= n {
                return bad(format!("customer node {} is not a network node", c.node));
            }
            if c.node == self.depot {
                return bad("the depot cannot be a customer".into());
            }
            if seen[c.node] {
                return bad(format!("node {} holds two customers", c.node));
            }
            seen[c.node] = true;
            if !(c.demand > 0.0) {
                return bad(format!("customer {} needs a positive demand", c.node));
            }
            if c.demand > self.capacity {
                return bad(format!("demand of customer {} exceeds capacity", c.node));
            }
        }
        if !(self.capacity > 0.0) {
            return bad("capacity must be positive".into());
        }
        if !(self.eta1 > 0.0 && self.eta1 < 1.0) {
            return bad(format!("eta1 = {} must lie in (0, 1)", self.eta1));
        }
        if !(self.eta2 > 1.0) {
            return bad(format!("eta2 = {} must exceed 1", self.eta2));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive".into());
        }
        if !(self.fixed_cost_av >= 0.0 && self.fixed_cost_hdv >= 0.0) {
            return bad("fixed costs must be nonnegative".into());
        }
        if self.intervals == 0 || self.layers == 0 {
            return bad("intervals and layers must be positive".into());
        }
        let k = compute_k(&self.demands(), self.capacity);
        if self.layers > k + 1 {
            return bad(format!("{} layers exceed the useful maximum {}", self.layers, k + 1));
        }
        Ok(())
    }

    pub fn customer_nodes(&self) -> Vec<NodeId> {
        self.customers.iter().map(|c| c.node).collect()
    }

    pub fn demands(&self) -> Vec<f64> {
        self.customers.iter().map(|c| c.demand).collect()
    }

    pub fn demand_of(&self, node: NodeId) -> Option<f64> {
        self.customers.iter().find(|c| c.node == node).map(|c| c.demand)
    }

    pub fn num_vehicles(&self) -> usize {
        self.av_count + self.hdv_count
    }

    pub fn vehicle_kind(&self, m: usize) -> VehicleKind {
        if m < self.av_count {
            VehicleKind::Av
        } else {
            VehicleKind::Hdv
        }
    }

    pub fn fixed_cost(&self, kind: VehicleKind) -> f64 {
        match kind {
            VehicleKind::Av => self.fixed_cost_av,
            VehicleKind::Hdv => self.fixed_cost_hdv,
        }
    }

    pub fn av_mode(&self) -> WeightMode {
        WeightMode::AvCost {
            eta1: self.eta1,
            eta2: self.eta2,
        }
    }

    pub fn cost_mode(&self, kind: VehicleKind) -> WeightMode {
        match kind {
            VehicleKind::Av => self.av_mode(),
            VehicleKind::Hdv => WeightMode::HdvCost,
        }
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::uniform(self.horizon, self.intervals)
    }
}

/// Knobs of the benchmark generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub gx: usize,
    pub gy: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub t_factor: f64,
    pub b_factor: f64,
    pub fixed_cost: f64,
    pub layers: usize,
    pub intervals: usize,
    /// Seed of the routing heuristic that sizes the fleet and horizon.
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            gx: 5,
            gy: 5,
            eta1: 0.5,
            eta2: 1.2,
            t_factor: 1.2,
            b_factor: 1.0 / 3.0,
            fixed_cost: 1.0,
            layers: 2,
            intervals: 64,
            seed: 0,
        }
    }
}

/// Controller budget for a fleet of `av_count` AVs.
pub fn budget_for(av_count: usize, b_factor: f64) -> usize {
    ((av_count as f64 * b_factor).round() as usize).max(1)
}

/// Place a CVRP benchmark on a generated grid network and size fleet, horizon
/// and budget from an HDV-only heuristic solution.
pub fn build_instance(cvrp: &CvrpInstance, params: &GenParams) -> Result<VrpSaInstance> {
    for i in cvrp.customers() {
        if cvrp.demands[i] > cvrp.capacity {
            return Err(Error::InfeasibleInstance(format!(
                "demand {} of node {} exceeds capacity {}",
                cvrp.demands[i], cvrp.labels[i], cvrp.capacity
            )));
        }
    }
    if !(params.t_factor >= 1.0) || !(params.b_factor > 0.0 && params.b_factor <= 1.0) {
        return Err(Error::InfeasibleInstance(
            "t_factor must be >= 1 and b_factor in (0, 1]".into(),
        ));
    }
    let (network, placement) = generate_network(&cvrp.coords, params.gx, params.gy)?;
    let depot = placement[cvrp.depot];
    let customers: Vec<Customer> = cvrp
        .customers()
        .map(|i| Customer {
            node: placement[i],
            demand: cvrp.demands[i],
            label: cvrp.labels[i],
        })
        .collect();
    let nodes: Vec<NodeId> = customers.iter().map(|c| c.node).collect();
    let demands: Vec<f64> = customers.iter().map(|c| c.demand).collect();
    let plan = plan_routes(
        &PlanInput {
            net: &network,
            depot,
            customers: &nodes,
            demands: &demands,
            capacity: cvrp.capacity,
            horizon: f64::INFINITY,
            fixed_cost: params.fixed_cost,
            mode: WeightMode::HdvCost,
        },
        params.seed,
    )?;
    let fleet = plan.routes.len().max(1);
    let longest = plan.routes.iter().map(|r| r.duration).fold(0.0, f64::max);
    let horizon = if longest > 0.0 { params.t_factor * longest } else { 1.0 };
    let k = compute_k(&demands, cvrp.capacity);
    let inst = VrpSaInstance {
        name: cvrp.name.clone(),
        network,
        depot,
        customers,
        capacity: cvrp.capacity,
        av_count: fleet,
        hdv_count: fleet,
        fixed_cost_av: params.fixed_cost,
        fixed_cost_hdv: params.fixed_cost,
        eta1: params.eta1,
        eta2: params.eta2,
        horizon,
        budget: budget_for(fleet, params.b_factor),
        intervals: params.intervals,
        layers: params.layers.clamp(1, k + 1),
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_rounding() {
        assert_eq!(budget_for(5, 1.0 / 3.0), 2);
        assert_eq!(budget_for(1, 1.0 / 3.0), 1);
        assert_eq!(budget_for(6, 0.5), 3);
        assert_eq!(budget_for(3, 2.0 / 3.0), 2);
    }

    fn tiny_cvrp() -> CvrpInstance {
        CvrpInstance {
            name: "tiny".into(),
            labels: vec![1, 2, 3, 4],
            coords: vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (4.0, 6.0)],
            demands: vec![0.0, 3.0, 3.0, 3.0],
            depot: 0,
            capacity: 6.0,
        }
    }

    #[test]
    fn build_is_deterministic_and_valid() {
        let p = GenParams {
            gx: 2,
            gy: 2,
            ..GenParams::default()
        };
        let a = build_instance(&tiny_cvrp(), &p).unwrap();
        let b = build_instance(&tiny_cvrp(), &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.av_count, 2);
        assert_eq!(a.av_count, a.hdv_count);
        assert_eq!(a.budget, 1);
        assert_eq!(a.customers.len(), 3);
    }

    #[test]
    fn unit_time_factor_keeps_heuristic_feasible() {
        let p = GenParams {
            gx: 2,
            gy: 2,
            t_factor: 1.0,
            ..GenParams::default()
        };
        let inst = build_instance(&tiny_cvrp(), &p).unwrap();
        let nodes = inst.customer_nodes();
        let demands = inst.demands();
        let plan = plan_routes(
            &PlanInput {
                net: &inst.network,
                depot: inst.depot,
                customers: &nodes,
                demands: &demands,
                capacity: inst.capacity,
                horizon: f64::INFINITY,
                fixed_cost: p.fixed_cost,
                mode: WeightMode::HdvCost,
            },
            p.seed,
        )
        .unwrap();
        let longest = plan.routes.iter().map(|r| r.duration).fold(0.0, f64::max);
        assert_eq!(longest, inst.horizon);
    }

    #[test]
    fn oversized_demand_rejected() {
        let mut c = tiny_cvrp();
        c.demands[2] = 7.0;
        assert!(matches!(
            build_instance(&c, &GenParams::default()),
            Err(Error::InfeasibleInstance(_))
        ));
    }
}

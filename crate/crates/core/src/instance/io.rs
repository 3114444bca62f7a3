//! Canonical `.vrpsa.json` documents.

use serde::{Deserialize, Serialize};

use super::{Customer, VrpSaInstance};
use crate::error::{Error, Result};
use crate::roadnet::{NodeId, RoadNetwork};

pub const FORMAT_VERSION: u32 = 1;

/// Field order here is the canonical key order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    format_version: u32,
    name: String,
    network: RoadNetwork,
    depot: NodeId,
    customers: Vec<Customer>,
    capacity: f64,
    av_count: usize,
    hdv_count: usize,
    fixed_cost_av: f64,
    fixed_cost_hdv: f64,
    eta1: f64,
    eta2: f64,
    horizon: f64,
    budget: usize,
    intervals: usize,
    layers: usize,
}

pub fn save_instance(inst: &VrpSaInstance) -> String {
    let doc = InstanceDoc {
        format_version: FORMAT_VERSION,
        name: inst.name.clone(),
        network: inst.network.clone(),
        depot: inst.depot,
        customers: inst.customers.clone(),
        capacity: inst.capacity,
        av_count: inst.av_count,
        hdv_count: inst.hdv_count,
        fixed_cost_av: inst.fixed_cost_av,
        fixed_cost_hdv: inst.fixed_cost_hdv,
        eta1: inst.eta1,
        eta2: inst.eta2,
        horizon: inst.horizon,
        budget: inst.budget,
        intervals: inst.intervals,
        layers: inst.layers,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance serializes");
    s.push('\n');
    s
}

pub fn load_instance(text: &str) -> Result<VrpSaInstance> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(Error::Schema(format!("unsupported format_version {v}"))),
        None => return Err(Error::Schema("missing field `format_version`".into())),
    }
    // re-parse from text: going through Value would lose float round-tripping
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let inst = VrpSaInstance {
        name: doc.name,
        network: doc.network,
        depot: doc.depot,
        customers: doc.customers,
        capacity: doc.capacity,
        av_count: doc.av_count,
        hdv_count: doc.hdv_count,
        fixed_cost_av: doc.fixed_cost_av,
        fixed_cost_hdv: doc.fixed_cost_hdv,
        eta1: doc.eta1,
        eta2: doc.eta2,
        horizon: doc.horizon,
        budget: doc.budget,
        intervals: doc.intervals,
        layers: doc.layers,
    };
    inst.validate()?;
    Ok(inst)
}

//! Vehicle routing for mixed autonomous / human-driven fleets on road networks
//! where autonomous vehicles need a remote controller on ordinary roads.
//!
//! The crate is organised bottom-up:
//!
//! - [`roadnet`]: typed road graph, shortest paths, SCCs, brute-force Steiner TSP.
//! - [`instance`]: problem data, CVRP parsing, grid network generator, JSON I/O.
//! - [`expand`]: network pruning and the layered expanded graph.
//! - [`model`]: MILP intermediate representation, builders, LP export.
//! - [`solve`]: built-in branch-and-bound, external solver adapter, decoding.
//! - [`pipeline`]: relax-then-recover heuristic with rescheduling and rerouting.

pub mod error;
pub mod expand;
pub mod instance;
pub mod model;
pub mod pipeline;
pub mod roadnet;
pub mod solve;

pub use error::{Error, Result};
pub use expand::{expand_graph, prune_network, ExpandedGraph, PrunedNetwork};
pub use instance::{
    build_instance, generate_network, load_instance, parse_cvrp, save_instance, CvrpInstance,
    GenParams, VrpSaInstance,
};
pub use model::{MilpModel, TimeGrid};
pub use pipeline::{solve_vrpsa, validate, PipelineConfig, Solution};
pub use roadnet::{NodeId, RoadNetwork, RoadType, WeightMode};
pub use solve::{solve, Backend, SolveResult, SolveStatus};

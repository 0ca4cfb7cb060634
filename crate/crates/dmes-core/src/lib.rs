//! Pareto-optimal design and operation of decentral multi-energy districts.
//!
//! The crate searches the space of district heating layouts and energy-sharing
//! communities with a multi-objective genetic algorithm. Every candidate
//! structure is priced by a nested exact pipeline: Benders decomposition
//! separates investment from operation, and a Lagrange-relaxation market
//! clearing separates coupled buildings inside each Benders subproblem. An
//! embedded MILP solver (revised simplex plus branch and bound) backs all
//! stages and doubles as the monolithic correctness oracle.
//!
//! Module map:
//! - [`scenario`]: district data model and JSON/CSV ingestion
//! - [`milp`]: generic MILP representation, simplex/branch-and-bound solver
//! - [`model`]: translation of a scenario plus structure into the block-angular MILP
//! - [`heatnet`]: heat-network pre-sizing (max flows, pipe classes, losses)
//! - [`ga`]: NSGA-style evolution over pipe routing and sharing groups
//! - [`benders`]: master/subproblem iteration with optimality and Pareto-optimal cuts
//! - [`lagrange`]: price-coordinated per-building decomposition of coupled dispatch
//! - [`orchestrator`]: clustering, fitness evaluation, caching, worker pool
//! - [`pareto`]: archive point and design payload types shared by ga/orchestrator

// modules added as they are built
pub mod benders;
pub mod fixtures;
pub mod heatnet;
pub mod lagrange;
pub mod milp;
pub mod model;
pub mod scenario;

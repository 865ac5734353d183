//! Security-constrained unit commitment with relax-and-cut temporal
//! decomposition, lazy N-1 security cuts and a sliding-window refiner.

pub mod benchmark;
pub mod cli;
pub mod decomposition;
pub mod formulation;
pub mod generate;
pub mod instance;
pub mod milp;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod refine;
pub mod schedule;
pub mod separation;
pub mod validate;

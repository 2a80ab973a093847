pub mod instances;
pub mod linalg;
pub mod rng;
pub mod solver;
pub mod relaxations;
pub mod cuts;
pub mod driver;
pub mod cli;

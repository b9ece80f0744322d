//! Most-probable paths of rare transitions in a mutation–selection model
//! of a finite population, with a matching stochastic simulator.

pub mod error;
pub mod model;
pub mod cost;
pub mod geodesic;
pub mod simulate;
pub mod validate;
pub mod config;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
pub use model::{Histogram, ModelParams, MutationMatrix};

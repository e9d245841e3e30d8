//! Classical opinion-dynamics models (French-DeGroot, Abelson, Taylor,
//! Friedkin-Johnsen): trajectory simulation, exact structural verdicts on
//! convergence, consensus and stability, and the centrality measures the
//! models induce.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod io;
pub mod matrix;

pub use error::{Error, Result};

//! Marked point data, the linear Hawkes model, and simulation.

mod kernel;
mod model;
mod points;
pub mod presets;
mod simulate;

pub use kernel::Kernel;
pub use model::{BranchingMatrix, HawkesModel};
pub use points::MarkedPointSet;
pub use simulate::{simulate_thinning, SimulationOptions, DEFAULT_POINT_CAP};

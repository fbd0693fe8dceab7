//! Katz-Lebowitz-Spohn exclusion process on the discrete torus.
pub mod dynamics;
pub mod error;
pub mod fluctuation;
pub mod gibbs;
pub mod lattice;
pub mod params;
pub mod path;
pub mod stats;

pub use dynamics::{simulate, stream_rng, CylinderFunction, Observer, RateTable, SimState};
pub use error::{Error, Result};
pub use fluctuation::{BgGap, Mode, TestFunction};
pub use gibbs::{BridgeSampler, SpectralData};
pub use lattice::{Configuration, Side};
pub use params::ModelParams;
pub use path::{build_swap_path, SwapPath};
pub use stats::ExperimentEstimate;

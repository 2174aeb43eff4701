mod density;
mod grid;
pub mod io;
mod quadrature;
mod rng;
mod sample;

pub use density::{DensityModel, OracleDensity, GAUSSIAN_CLIP};
pub use grid::Grid;
pub use quadrature::{QuadSpec, QuadratureRule, Scheme};
pub use rng::RngStream;
pub use sample::Sample;


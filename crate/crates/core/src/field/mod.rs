//! Fields on the periodic torus, transforms and `L^p` norms.

mod fft;
mod grid;
mod params;
mod spectral;

pub use grid::TorusGrid;
pub use params::{validate_params, ModelExponents, NonlinearTerms, SolverParams};
pub use spectral::{
    forward_transform, forward_transform_samples, inverse_transform, lp_norm, PhysicalField,
    SpectralField,
};

pub(crate) use spectral::is_upper_half;

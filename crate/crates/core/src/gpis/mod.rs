//! Gaussian-process implicit surface: fusion of surface observations into a
//! posterior field whose zero level set is the reconstructed object.

mod kernel;
mod model;

pub use kernel::{kernel_eval, Kernel, KernelSpec, DEFAULT_LENGTH_SCALE_FRACTION, DEFAULT_NOISE};
pub use model::{
    augment_off_surface, extract_surface, fit, max_variance_gap, GpisModel, ANCHOR_COUNT, ANCHOR_INFLATION,
    EXTERIOR_VALUE, INTERIOR_VALUE,
};

/// Marching-cubes resolution used for reconstructions unless configured otherwise.
pub const DEFAULT_GRID_CELLS: usize = 10;

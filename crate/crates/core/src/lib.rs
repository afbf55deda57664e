//! Volume functionals of pseudoconvex hypersurfaces in `C^n` and the
//! numerical checks around them.

pub mod affine;
pub mod alt_forms;
pub mod error;
pub mod forms5;
pub mod harmonics;
pub mod hypersurface;
pub mod jet;
pub mod quadrature;
pub mod reduction;
pub mod variation;

pub use error::{Error, Result};

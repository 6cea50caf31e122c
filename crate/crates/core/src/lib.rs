//! Exit-time moment spectra, Dirichlet spectral data and heat content for
//! domains in constant-curvature model spaces, with numerical checks of the
//! associated eigenvalue, comparison and isoperimetric inequalities.

pub mod comparison;
pub mod error;
pub mod grid_solver;
pub mod iso_radius;
pub mod model_space;
pub mod numerics;
pub mod radial_solver;
pub mod rearrange;
pub mod spectral;

pub use error::{Error, Result};
pub use model_space::{GeodesicBall, Geometry, ModelSpace};
pub use radial_solver::RadialField;
pub use spectral::{MomentSequence, SpectralData, SpectralPair};

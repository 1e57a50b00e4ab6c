//! Wavelet projection estimators of the ICA factorization contrast.
//!
//! The contrast of a density `f` on `[0,1]^d` at resolution `j` is the squared
//! L2 norm of the projection of `f - f*` on `V_j`, where `f*` is the product of
//! the marginals of `f`. It vanishes when the components are independent, so
//! minimizing an estimate of it over rotations of whitened data recovers a
//! demixing matrix.
//!
//! Modules:
//!
//! * [`wavelet`]: Daubechies filters, scaling function tables, `phi_jk`.
//! * [`coordinates`]: empirical wavelet coordinates as sparse maps.
//! * [`combinatorics`]: falling factorials, index matching, set partitions.
//! * [`estimators`]: plug-in, U-statistic and sample-split contrast estimators.
//! * [`demix`]: whitening, rotation grid search, Jacobi sweeps, Amari error.
//! * [`experiments`]: source generators and the Monte Carlo rate harness.

pub mod combinatorics;
pub mod coordinates;
pub mod demix;
mod error;
pub mod estimators;
pub mod experiments;
pub mod sample;
pub mod wavelet;

pub use coordinates::{CoordinateMap, KIndex};
pub use error::{Error, Result};
pub use estimators::{ContrastEstimate, EstimatorKind};
pub use sample::Sample;
pub use wavelet::{DaubechiesFilter, ScalingTable, WaveletSpec};

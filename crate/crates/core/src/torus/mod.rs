//! Periodic fields on the n-torus: grids, spectral calculus, Sobolev norms,
//! off-grid evaluation and snapshot I/O.

pub mod field;
pub mod grid;
pub mod interp;
pub mod io;
pub mod spectral;

pub use field::{operator_norm, PeriodicField, SpaceTimeField};
pub use grid::GridSpec;
pub use interp::{compose, eval_spacetime, InterpMode, Interpolant, SpaceTimeInterpolant};
pub use io::{load_field, load_spacetime, read_header, save_field, save_spacetime, write_field_csv, write_spacetime_csv, FieldHeader};
pub use spectral::{sobolev_norm, spectral_gradient, spectral_laplacian, Spectral, SpectralCoeffs};

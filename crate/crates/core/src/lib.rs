//! Two-dimensional multigroup discrete-ordinates transport with matrix-free
//! sweeps and GMRES, and a projection-based reduced-order model whose reduced
//! systems are assembled offline from sweeps and interpolated online.
//!
//! The pipeline, from the bottom up:
//!
//! * [`config`], [`mesh`], [`quadrature`], [`xs`]: the parametric checkerboard problem.
//! * [`dg`], [`transport`]: bilinear upwind DG sweeps and the operator `I - D L^-1 M S`.
//! * [`krylov`]: restarted GMRES on the operator action.
//! * [`oracle`]: dense assembly of the same operators for verification.
//! * [`pod`], [`reduced`], [`interp`], [`library`]: snapshots, POD basis,
//!   reduced systems, SPD/RBF interpolation and the offline library.
//! * [`fieldio`], [`sampling`], [`harness`]: files, parameter samplers and
//!   the end-to-end FOM / train / eval / compare workflows.

pub mod config;
pub mod dg;
pub mod error;
pub mod field;
pub mod fieldio;
pub mod harness;
pub mod interp;
pub mod krylov;
pub mod library;
pub mod mesh;
pub mod oracle;
pub mod pod;
pub mod quadrature;
pub mod reduced;
pub mod sampling;
pub mod transport;
pub mod xs;

pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use field::{AngularFlux, FieldLayout, MomentField};
pub use krylov::{gmres_solve, GmresOptions, GmresReport, LinearOperator};
pub use transport::TransportProblem;

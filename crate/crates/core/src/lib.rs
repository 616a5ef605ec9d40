//! Conservation-oriented building blocks for hyperbolic solvers.
//!
//! The crate revolves around one bookkeeping idea: every scheme update is a sum
//! of per-element *fluctuations* (residuals) attached to degrees of freedom,
//! and local conservation is the statement that those fluctuations sum to a
//! boundary flux integral. The modules cover
//!
//! - [`mesh`]: 1D grids, triangulations, polygonal meshes with corner/subface
//!   normals, and the small oriented graphs used for flux recovery;
//! - [`gas`]: ideal-gas thermodynamics, Euler fluxes in Eulerian and
//!   Lagrangian form, entropy pairs, and an exact Riemann solver used as a
//!   test oracle;
//! - [`riemann`]: 1D fluctuation machinery (simple three-wave solver, Roe,
//!   dissipative-form fluxes) and an explicit 1D finite-volume step;
//! - [`rd`]: residual-distribution schemes on triangulations (N scheme,
//!   graph-viscosity splitting, nonlinear blending);
//! - [`cornerfv`]: multidimensional finite volumes with corner fluxes and the
//!   node-based conservation condition;
//! - [`fluxrec`]: recovery of unique edge fluxes from residuals through the
//!   graph-Laplacian pseudoinverse;
//! - [`lagrange`]: cell-centered Lagrangian gas dynamics on moving polygonal
//!   meshes with a nodal solver and GCL-compatible geometry;
//! - [`entropy`]: entropy-stability diagnostics and the bounded conservative
//!   correction;
//! - [`io`]: legacy-VTK snapshots and CSV logs.

pub mod cornerfv;
pub mod entropy;
pub mod error;
pub mod fluxrec;
pub mod gas;
pub mod io;
pub mod lagrange;
pub mod mesh;
pub mod rd;
pub mod riemann;
mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;

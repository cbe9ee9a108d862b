//! Macroscopic coupling conditions for linear BGK models on star networks.
//!
//! The crate computes the extrapolation coefficient `delta` that closes the
//! wave-equation coupling condition `rho + delta * q = const` at a network node,
//! starting from a discrete velocity model whose velocities are Gauss points of
//! an orthonormal polynomial family (Legendre on `[-1, 1]`, Hermite on the real
//! line). The kinetic node layer is solved spectrally in moment space; the
//! stable manifold of the layer ODE is spanned by eigenvectors of a symmetric
//! tridiagonal matrix.
//!
//! Modules:
//!
//! * [`orthopoly`]: recursion coefficients, polynomial evaluation and Gauss rules.
//! * [`numerics`]: tridiagonal eigensolver and small dense kernels.
//! * [`layer`]: layer operator, `delta` extraction, node solve, reconstruction
//!   and the well-posedness audit.
//! * [`coupling`]: macroscopic coupling matrix, closed-form approximations of
//!   `delta` and the macroscopic node Riemann solve.
//! * [`netsim`]: kinetic and macroscopic solvers on a star network.
//! * [`cli`]: command line front end.

pub mod cli;
pub mod coupling;
mod error;
pub mod layer;
pub mod netsim;
pub mod numerics;
pub mod orthopoly;

pub use error::{Error, Result};
pub use layer::{EdgeCount, LayerOperator};
pub use orthopoly::{Family, OrthonormalBasis, QuadratureRule};

//! Chart-local calculus for general (possibly nonlinear) connections on fibre bundles.
//!
//! Everything here works inside a single trivialization `E ≅ M × F`, where the
//! base and the fibre are open axis-aligned boxes. A connection is stored by
//! its coefficient map `Γ(x, y)`, which makes the horizontal subspace at
//! `(x, y)` equal to `{(v, -Γ(x, y)·v)}`.
//!
//! Derivatives are exact: evaluators are generic over [`Scalar`], and the
//! forward-mode [`Dual`] type (nested for second order) carries tangents
//! through them.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod calculus;
pub mod catalog;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod transport;

pub use calculus::{CurveMap, ScalarMap, VectorMap};
pub use connection::{Connection, ConnectionKind, Point, Space, TotalTangent, TrivializedBundle};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::{Dual, Scalar};

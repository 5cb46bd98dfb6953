//! Spectral flow, partial signatures and Maslov indices for finite-dimensional
//! paths of Hermitian matrices and Lagrangian subspaces, plus a one-dimensional
//! Dirac model on a partitioned circle.

pub mod dirac1d;
pub mod error;
pub mod json;
pub mod lagrangian;
pub mod linalg;
pub mod maslov;
pub mod mollify;
pub mod path;
pub mod roots;
pub mod series;
pub mod sigflow;

pub use error::{Error, Result};

//! Elliptic Neumann problems on low-dimensional structures in R³.
//!
//! A structure is a finite union of flat segments and plates glued
//! transversally, carrying weighted Hausdorff measures. The crate builds
//! junction-conforming P1 discretisations of such structures, relaxes the
//! coefficient matrix onto the tangent bundle of the measure, solves the
//! weak Neumann problem with projected conjugate gradients, and provides
//! a set of numerical regularity diagnostics (generalized translations,
//! difference quotients, second differences, continuity moduli).

pub mod cli;
pub mod config;
pub mod error;
pub mod exprlang;
pub mod funcspace;
pub mod geometry;
pub mod linalg;
pub mod manufactured;
pub mod relaxation;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use exprlang::{EvalPoint, Expr, Var};
pub use funcspace::{FunctionSpace, MuFunction};
pub use geometry::{Component, Junction, Structure, StructureSpec, TangentFrame};

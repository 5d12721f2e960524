//! Tensor calculus of contact Riemannian manifolds on jets.
//!
//! The crate is `no_std` with `alloc`. Everything is generic over
//! [`scalar::Scalar`], so the same code runs in exact arithmetic over Q(√2)
//! and in binary floating point.
#![no_std]
extern crate alloc;

pub mod calculus;
pub mod connection;
pub mod geometry;
pub mod global;
pub mod jets;
pub mod linalg;
pub mod report;
pub mod scalar;

use alloc::string::String;
use core::fmt;

pub use jets::{CJet, Expr, Jet, Layout};
pub use report::Report;
pub use scalar::{Exact, Scalar, C};

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    DivisionByZero,
    NonPositiveSqrt,
    Unsupported(&'static str),
    InsufficientOrder { needed: usize, got: usize },
    OutsideChart,
    Degenerate(&'static str),
    Singular,
    AxiomCheck { family: String, residual: f64 },
    Precondition(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DivisionByZero => write!(f, "division by a jet with zero value"),
            Error::NonPositiveSqrt => write!(f, "square root of a nonpositive value"),
            Error::Unsupported(what) => write!(f, "unsupported operation: {what}"),
            Error::InsufficientOrder { needed, got } => {
                write!(f, "insufficient jet order: needed {needed}, got {got}")
            }
            Error::OutsideChart => write!(f, "point outside the chart domain"),
            Error::Degenerate(what) => write!(f, "degenerate structure: {what}"),
            Error::Singular => write!(f, "singular linear system"),
            Error::AxiomCheck { family, residual } => {
                write!(f, "axiom post-check failed for {family} (residual {residual:e})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
        }
    }
}

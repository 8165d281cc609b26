//! Explicit geometric-side objects of the Kuznetsov sum formula for Hilbert
//! modular groups over Q and real quadratic fields, with the numerical checks
//! that go with them.

pub mod arith;
pub mod bessel;
pub mod density;
pub mod gamma;
pub mod kloosterman;
pub mod numberfield;
pub mod quad;
pub mod rayclass;
pub mod sumformula;
pub mod testfn;
pub mod verify;

pub use num_complex::Complex64 as C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("D = {0} is not squarefree")]
    NotSquarefree(i64),
    #[error("integer overflow in field arithmetic")]
    Overflow,
    #[error("zero ideal or zero element where a nonzero one is required")]
    Zero,
    #[error("norm {0} is outside the supported range")]
    Range(u128),
    #[error("{0} is not in the inverse different")]
    NotDual(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("envelope violated: {0}")]
    Envelope(String),
}

pub type Result<T> = std::result::Result<T, Error>;

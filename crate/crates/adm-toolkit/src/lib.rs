//! Numerical toolkit for asymptotically flat initial data sets: constraint
//! operators and their linearizations, ADM charges, the modified
//! Regge–Teitelboim Hamiltonian, lapse-shift asymptotics and the strict
//! dominant-energy deformation.

pub mod asymptotics;
pub mod charges;
pub mod constraints;
pub mod data;
pub mod deform;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod hamiltonian;
pub mod linearized;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/charges.md")]
    mod charges {}
    #[doc = include_str!("../../../book/src/linearized.md")]
    mod linearized {}
    #[doc = include_str!("../../../book/src/hamiltonian.md")]
    mod hamiltonian {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/deform.md")]
    mod deform {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

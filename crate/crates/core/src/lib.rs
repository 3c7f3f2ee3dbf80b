//! Numerical toolkit for Ritt operators on the Schatten classes `S^p_n`.
//!
//! The crate computes column, row, Rademacher and split square functions of
//! Ritt operators acting on matrix algebras, reproduces the growth of the
//! column/row ratio for left multiplication by `a = diag(1 - 2^{-k})`, and
//! builds explicit column/row decompositions `x = x_1 + x_2`.
//!
//! Module map:
//!
//! * [`matcore`]: singular values, Schatten norms, spectra, matrix functions.
//! * [`superop`]: linear maps on matrices (multiplications, Schur
//!   multipliers, unitary mixtures, explicit `n^2 x n^2` maps) and their
//!   operator norms.
//! * [`blocknorm`]: column/row/Rademacher norms of finite matrix sequences.
//! * [`ritt`]: Ritt constants, Col/Row bound sampling, Stolz domains,
//!   fractional powers and functional-calculus bounds.
//! * [`sqfun`]: square functions with certified truncation.
//! * [`stolzexample`]: the diagonal counterexample and its closed forms.
//! * [`decomp`]: the constructive column/row decomposition.
//! * [`markov`]: Markov maps on `M_n`.
//!
//! The guide in `book/` walks through the same material with runnable
//! snippets; those snippets are compiled and run as doc-tests of this crate.

// `!(x < y)` is the NaN-rejecting form used for input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocknorm;
pub mod decomp;
pub mod error;
pub mod markov;
pub mod matcore;
pub mod quadrature;
pub mod ritt;
pub mod sampling;
pub mod sqfun;
pub mod stolzexample;
pub mod superop;

pub use error::{Error, Result};
pub use matcore::{Exponent, Mat, C64};

// `cargo test --doc` runs every code block of the guide through rustdoc.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/schatten.md")]
    mod schatten {}
    #[doc = include_str!("../../../book/src/column-row.md")]
    mod column_row {}
    #[doc = include_str!("../../../book/src/ritt.md")]
    mod ritt {}
    #[doc = include_str!("../../../book/src/square-functions.md")]
    mod square_functions {}
    #[doc = include_str!("../../../book/src/counterexample.md")]
    mod counterexample {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/markov.md")]
    mod markov {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

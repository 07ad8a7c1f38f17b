//! Exact evaluators for free, conditionally free, cyclic-conditionally free,
//! ordered and indented products of moment functionals, together with a
//! Monte Carlo harness for deterministic matrix ensembles rotated by Haar
//! unitaries conditioned to stabilize fixed vectors.
//!
//! The crate is organized as follows:
//!
//! * [`word`] — noncommutative words and polynomials over indexed generator
//!   families, with the alternating-block decomposition used by every
//!   product evaluator.
//! * [`functionals`] — moment functionals on a single family (tables, closed
//!   forms, spiked diagonal models) and their linear extension to polynomials.
//! * [`nc`] — the noncrossing partition lattice, Kreweras complements and
//!   moment/free-cumulant transforms; serves as an independent route to
//!   free-product mixed moments.
//! * [`products`] — the product evaluators themselves, all configurations of
//!   one centering recursion, plus the second-order covariance functional.
//! * [`matrix`] — dense complex matrices, Haar and stabilizer-conditioned
//!   Haar sampling, and word/state evaluation on matrix ensembles.
//! * [`experiments`] — seeded, reproducible Monte Carlo drivers comparing
//!   matrix simulations against symbolic predictions, with CSV/JSON reports.

pub mod experiments;
pub mod functionals;
pub mod matrix;
pub mod nc;
pub mod products;
pub mod scalar;
pub mod word;

pub use functionals::{FunctionalPair, FunctionalTriple, MomentFunctional};
pub use matrix::{CMatrix, MatrixEnsemble, StabilizerHaarSampler, StateMode};
pub use nc::NoncrossingPartition;
pub use products::ProductContext;
pub use scalar::{CExact, Scalar, C64};
pub use word::{Block, Generator, Polynomial, Word};

//! Numerics for equivalence of statistical ensembles.
//!
//! The crate covers permutation-invariant coupling bounds and an exact
//! optimal-transport oracle ([`coupling`]), the discrete paramagnet and
//! Curie–Weiss split ([`paramagnet`]), the mean-field spherical model
//! ([`spherical`]), leading-order Laplace asymptotics ([`laplace`]) and the
//! experiment drivers that tie them together ([`experiments`]).

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod experiments;
pub mod laplace;
pub mod observable;
pub mod paramagnet;
pub mod quad;
pub mod seeding;
pub mod spherical;

pub use error::{Error, Result};
pub use observable::{LocalObservable, MomentIndex};

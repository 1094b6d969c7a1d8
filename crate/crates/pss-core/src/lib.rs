//! Sparse polynomial and reduced-basis surrogates for the parametric
//! diffusion problem `-(a(y) u')' = f` on `(0,1)`, with
//! `a(y) = abar + sum_j y_j psi_j` and `y` in `[-1,1]^J`.
//!
//! Three surrogate families are provided: truncated Taylor expansions
//! ([`taylor`]), sparse Leja interpolants ([`interp`]) and greedy reduced
//! bases ([`greedy`]). All of them are indexed by downward-closed sets of
//! multi-indices ([`multiindex`]) or by snapshots of the truth solver
//! ([`model`]).

pub mod error;
pub mod greedy;
pub mod interp;
pub mod legendre;
pub mod linalg;
pub mod model;
pub mod multiindex;
pub mod rate;
pub mod sampling;
pub mod taylor;

pub use error::{PssError, Result};

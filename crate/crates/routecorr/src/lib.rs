//! Route-choice models on small transport networks.
//!
//! The crate covers the closed-form side (multinomial logit, link-nested
//! logit, paired combinatorial logit, combination of nested logit), the
//! multinomial probit target model via Monte-Carlo simulation, and a
//! one-dimensional quadrature that recovers the covariance structure implied
//! by any GEV generating function. A benchmark layer compares every model
//! against the probit target with probability and correlation MSE grids.

pub mod bench;
pub mod conl;
pub mod error;
pub mod gev;
pub mod gevcov;
pub mod matrix;
pub mod mnp;
pub mod netgraph;
pub mod rng;
pub mod routegen;

pub use error::{Error, Result};

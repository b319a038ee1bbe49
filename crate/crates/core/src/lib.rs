//! Active preference learning for reward-model sign classification.
//!
//! Every query is an *arm*: the feature difference `z` between two candidate
//! responses to a prompt. Labels follow a monotone link of `zᵀθ*`, and the
//! learner's job is to recover `sign(zᵀθ*)` for every arm with as few labels as
//! possible.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core:
//!
//! - [`model`]: arm sets, link functions, datasets and Fisher information.
//! - [`estimator`]: regularized maximum likelihood and confidence widths.
//! - [`design`]: weighted min-max optimal designs and design rounding.
//! - [`algorithms`]: warm-up, elimination by experimental design, the greedy
//!   remaining-uncertainty rule and the baseline selection rules.
//! - [`complexity`]: instance complexities, the label-complexity bound and the
//!   information-theoretic lower bound.
//!
//! File formats, the experiment harness and the command line live in the
//! `prefdesign` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod algorithms;
pub mod complexity;
pub mod design;
mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod oracle;

pub use error::{CoreError, Result};

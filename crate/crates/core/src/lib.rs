// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod ftrl;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod paid;
pub mod pm;
pub mod rate;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/ftrl.md")]
    pub mod ftrl {}
    #[doc = include_str!("../../../book/src/learning-rate.md")]
    pub mod learning_rate {}
    #[doc = include_str!("../../../book/src/partial-monitoring.md")]
    pub mod partial_monitoring {}
    #[doc = include_str!("../../../book/src/graph-bandits.md")]
    pub mod graph_bandits {}
    #[doc = include_str!("../../../book/src/paid-observations.md")]
    pub mod paid_observations {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}

// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod cascade;
pub mod cli;
pub mod compiler;
pub mod cpwl;
pub mod error;
pub mod gadgets;
pub mod masks;
pub mod relu_net;

pub use error::{Error, Result};

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplify;
pub mod bits;
pub mod detrend;
pub mod error;
pub mod ingest;
pub mod leakage;
pub mod pipeline;
pub mod quantize;
pub mod randomness;
pub mod reconcile;
pub mod rng;

pub use bits::Bits;
pub use error::{Result, SkgError};

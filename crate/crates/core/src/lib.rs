#![allow(clippy::type_complexity)]

pub mod baseline;
pub mod bench;
pub mod circuit;
pub mod cwc;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod protocol;

pub use error::{Error, Result};

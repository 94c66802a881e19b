//! Joint relational learning over multiple knowledge graphs with entity
//! linkage scoring.

mod binio;
pub mod checkpoint;
pub mod config;
pub mod context;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod store;
pub mod testkit;
pub mod train;

pub use error::{Error, Result};

pub mod assignment;
pub mod decoders;
pub mod em;
pub mod error;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod synthdata;
pub mod theory;
pub mod vocab;

pub use error::{Error, Result};

pub mod error;
pub mod exec;
pub mod linalg;
pub mod schemes;
pub mod sparse;
pub mod splitting;
pub mod system;

pub use error::{Error, Result};

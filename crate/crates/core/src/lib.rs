pub mod dilation;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod nvcontrol;
pub mod tomolab;

pub use error::{Error, Result};

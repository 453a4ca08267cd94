pub mod channel;
pub mod coupling;
pub mod encoder;
pub mod error;
pub mod io;
pub mod linalg;
pub mod reference;
pub mod spinsys;
pub mod verify;

pub use error::{Error, Result};

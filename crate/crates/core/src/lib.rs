//! Texture-based stylization of binary text images and context-aware
//! embedding of the result into background photographs.

pub mod color;
pub mod embedding;
pub mod error;
pub mod fixtures;
pub mod guidance;
pub mod layout;
pub mod raster;
pub mod structure;
pub mod texture;

pub use error::{Error, Result};

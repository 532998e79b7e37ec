//! Tile-level track extraction for stationary video.
//!
//! Frames are cut into square tiles, relevant tiles are grouped into
//! polyominoes, redundant polyominoes are pruned under learned per-tile
//! maximum sampling gaps, and the survivors are packed into frame-sized
//! canvases so that one detector call covers many frames. Detections are
//! unpacked back to frame coordinates and tracked.

pub mod bbox;
pub mod engine;
pub mod error;
pub mod eval;
pub mod gaps;
pub mod grid;
pub mod pack;
pub mod prune;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};

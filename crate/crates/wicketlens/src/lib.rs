//! Batch analytics for cricket broadcast footage.
//!
//! The pipeline watches the scoreboard overlay: sampled frames are
//! cropped to the scorecard region, pushed through a preprocessing
//! chain (grayscale, gamma, inversion, closing, median), read by OCR,
//! and parsed into a debounced monotonic score timeline. Wicket
//! increments become clip specifications. Per-frame pitch/ball
//! detections inside those clips turn into pitch-plane trajectories,
//! heatmaps, and weak-zone rankings, and a standalone evaluator scores
//! detection files (precision/recall, mAP50, mAP50-95).
//!
//! Modules:
//! - [`raster`] — image model and preprocessing kernels
//! - [`pnm`] — PGM/PPM I/O (PNG behind the `png` feature)
//! - [`ocr`] — builtin template matcher + external engine adapter
//! - [`scoreparse`] — score parsing and the wicket tracker
//! - [`segmenter`] — frame timeline, clips, manifests
//! - [`detections`] — YOLO files, IoU matching, AP evaluator
//! - [`trajectory`] — pitch-plane trajectories and heatmaps
//! - [`fixtures`] — synthetic scoreboards and detection sets
//! - [`config`] — shared JSON configuration
//! - [`cli`] — subcommand implementations

pub mod cli;
pub mod config;
pub mod detections;
pub mod error;
pub mod fixtures;
pub mod ocr;
pub mod pnm;
pub mod raster;
pub mod scoreparse;
pub mod segmenter;
pub mod trajectory;

pub use error::{Error, Result};

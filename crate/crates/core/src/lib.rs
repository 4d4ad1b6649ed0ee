//! Multiscale fractal-dimension signatures for sound retrieval.
//!
//! Signals are analysed with Minkowski sausages of growing radius: short-range
//! profiles over 50 ms windows are histogrammed into EMFD / EMFD-KDE matrices,
//! and a very-long-range profile (MFD-VL) describes the amplitude envelope of
//! a whole sound. MFCC/log-mel baselines, synthetic test signals, tag metrics
//! and a k-NN retrieval pipeline sit alongside.

pub mod audio;
pub mod baseline;
pub mod error;
pub mod fractal;
pub mod metrics;
pub mod porter;
pub mod retrieval;
pub mod signature;
pub mod synth;

pub use audio::Signal;
pub use error::{Error, Result};

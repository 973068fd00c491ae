//! Smoothing filters for noisy touch traces.
//!
//! The crate provides a catalog of single-contact drag smoothers (modified
//! moving average/median, odd-one-removed averaging, kernel density
//! smoothing, windowed regression, polar smoothing, a constant-acceleration
//! Kalman filter, anisotropic diffusion and Savitzky-Golay), a composition
//! layer that chains them with feedforward and feedback wiring, and a
//! synthetic drag benchmark that scores pipelines against ground truth.
//!
//! Every filter implements [`FilterStage`]: a stateful, streaming
//! transformer that consumes one [`TracePoint`] per frame and emits the
//! estimate for an earlier frame once its lookahead is satisfied.
//!
//! ```
//! use touch_smooth::{pipeline, synth, bench};
//!
//! let truth = synth::generate_truth(&synth::DragSpec::linear(25.0, 0.0)).unwrap();
//! let noise = synth::NoiseSpec::new(1.0, 0.5, 7).unwrap();
//! let noisy = synth::add_noise(&truth, &noise, 0).unwrap();
//! let mut filter = pipeline::preset("three-stage").unwrap().compose().unwrap();
//! let filtered = pipeline::run(&mut filter, &noisy).unwrap();
//! let (r, f) = filtered.aligned_with(&truth).unwrap();
//! assert!(bench::measure1(&r, &f).unwrap() < bench::measure1(&truth, &noisy).unwrap());
//! ```

pub mod bench;
pub mod error;
pub mod kalman;
pub mod model;
pub mod pde;
pub mod pipeline;
pub mod stage;
pub mod synth;
pub mod trace;
pub mod window;

pub use error::{Error, Result};
pub use stage::FilterStage;
pub use trace::{DelayedOutput, Trace, TraceLabel, TracePoint};

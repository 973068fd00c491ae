//! Edge-stopping diffusion of 1-D signals, in batch form and as a streaming
//! stage with one frame of lookahead.
//!
//! Each explicit step moves an interior sample by
//! `dt * (d_f * c_f + d_b * c_b)` with `d_f = S[i-1] - S[i]`,
//! `d_b = S[i+1] - S[i]` and influence `c = 1 / (1 + (d / k)^2)`.
//! Endpoints are held fixed.

use crate::error::{Error, Result};
use crate::stage::{FilterStage, Window, WindowKernel, WindowedStage};
use crate::trace::TracePoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeConfig {
    /// Gradient influence constant, mm.
    pub k: f64,
    /// Diffusion step size.
    pub dt_step: f64,
    pub max_iters: usize,
    /// Early stop once no sample moves by more than this, mm.
    pub conv_tol: f64,
    /// Streaming window length: refined history, current and one future sample.
    pub stream_buffer: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            k: 100.0,
            dt_step: 0.25,
            max_iters: 1000,
            conv_tol: 1e-6,
            stream_buffer: 16,
        }
    }
}

impl PdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Config(format!(
                "pde k must be positive, got {}",
                self.k
            )));
        }
        if !(self.dt_step > 0.0 && self.dt_step <= 0.5) {
            return Err(Error::Config(format!(
                "pde dt-step must lie in (0, 0.5], got {}",
                self.dt_step
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("pde max-iters must be at least 1".into()));
        }
        if self.stream_buffer < 3 {
            return Err(Error::Config(format!(
                "pde buffer must hold at least 3 frames, got {}",
                self.stream_buffer
            )));
        }
        Ok(())
    }
}

#[inline]
fn influence(d: f64, k: f64) -> f64 {
    1.0 / (1.0 + (d / k) * (d / k))
}

/// One synchronous diffusion pass into `out`; returns the largest change.
fn step_into(signal: &[f64], out: &mut [f64], k: f64, dt: f64) -> f64 {
    out.copy_from_slice(signal);
    let mut max_change: f64 = 0.0;
    for i in 1..signal.len().saturating_sub(1) {
        let d_f = signal[i - 1] - signal[i];
        let d_b = signal[i + 1] - signal[i];
        let delta = dt * (d_f * influence(d_f, k) + d_b * influence(d_b, k));
        out[i] = signal[i] + delta;
        max_change = max_change.max(delta.abs());
    }
    max_change
}

/// A single explicit diffusion pass. Sequences shorter than 3 are returned
/// unchanged.
pub fn diffuse_step(signal: &[f64], k: f64, dt_step: f64) -> Vec<f64> {
    let mut out = vec![0.0; signal.len()];
    step_into(signal, &mut out, k, dt_step);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diffused {
    pub values: Vec<f64>,
    pub iterations: usize,
}

/// Repeats [`diffuse_step`] until the largest change falls below
/// `conv_tol` or `max_iters` passes have run.
pub fn diffuse_batch(signal: &[f64], config: &PdeConfig) -> Diffused {
    let mut cur = signal.to_vec();
    let mut next = vec![0.0; signal.len()];
    let mut iterations = 0;
    while iterations < config.max_iters {
        let change = step_into(&cur, &mut next, config.k, config.dt_step);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        if change < config.conv_tol {
            break;
        }
    }
    Diffused {
        values: cur,
        iterations,
    }
}

/// Streaming diffusion: the window is the refined history, the current input
/// and one future input; the diffused value at the current position is
/// emitted and becomes part of the refined history.
#[derive(Debug, Clone)]
pub(crate) struct PdeKernel {
    config: PdeConfig,
}

impl WindowKernel for PdeKernel {
    fn kind(&self) -> &'static str {
        "pde"
    }

    fn past(&self) -> usize {
        self.config.stream_buffer - 2
    }

    fn future(&self) -> usize {
        1
    }

    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint> {
        let span = w.smoothed_span();
        let at = w.history.len();
        let xs: Vec<f64> = span.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = span.iter().map(|p| p.y).collect();
        Ok(TracePoint::new(
            w.current.frame,
            diffuse_batch(&xs, &self.config).values[at],
            diffuse_batch(&ys, &self.config).values[at],
        ))
    }
}

pub fn pde_stage(config: PdeConfig) -> Result<impl FilterStage> {
    config.validate()?;
    Ok(WindowedStage::new(PdeKernel { config }))
}

/// Sum of absolute successive differences.
pub fn total_variation(signal: &[f64]) -> f64 {
    signal.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

//! The streaming stage contract shared by every filter, and the sliding
//! window driver used by the lookahead filters.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::trace::{DelayedOutput, TracePoint};

/// A stateful per-stream filter with a fixed group delay.
///
/// Inputs are pushed one frame at a time. A stage with group delay `d`
/// emits the estimate for frame `t` when the input for frame `t + d`
/// arrives, and emits the trailing `d` estimates from [`FilterStage::flush`].
/// Instances are single-stream; use [`FilterStage::reset`] before reusing
/// one on another trace.
pub trait FilterStage: Send {
    /// Stage kind, e.g. `mma` or `kalman`.
    fn name(&self) -> &str;

    fn group_delay(&self) -> usize;

    fn push(&mut self, input: TracePoint) -> Result<Option<DelayedOutput>>;

    fn flush(&mut self) -> Result<Vec<DelayedOutput>>;

    fn reset(&mut self);

    /// Called by [`crate::pipeline::run`] after `reset` with the full input
    /// trace, before any point is pushed.
    fn prepare(&mut self, _input: &crate::trace::Trace) {}

    /// Whether the stage reads a history of previous smoothed outputs that a
    /// downstream stage may overwrite.
    fn accepts_feedback(&self) -> bool {
        false
    }

    /// Replaces the smoothed history value for `point.frame`. Frames the
    /// stage no longer (or not yet) holds are ignored.
    fn feed_back(&mut self, _point: TracePoint) {}
}

/// The data a window kernel sees when evaluating one frame.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window<'a> {
    /// Previous smoothed outputs, oldest first.
    pub history: &'a [TracePoint],
    /// Previous raw inputs, oldest first.
    pub raw_past: &'a [TracePoint],
    pub current: TracePoint,
    /// Upcoming raw inputs, nearest first.
    pub future: &'a [TracePoint],
}

impl Window<'_> {
    /// history, current and future in frame order.
    pub fn smoothed_span(&self) -> Vec<TracePoint> {
        let mut v = Vec::with_capacity(self.history.len() + 1 + self.future.len());
        v.extend_from_slice(self.history);
        v.push(self.current);
        v.extend_from_slice(self.future);
        v
    }

    /// raw past, current and future in frame order.
    pub fn raw_span(&self) -> Vec<TracePoint> {
        let mut v = Vec::with_capacity(self.raw_past.len() + 1 + self.future.len());
        v.extend_from_slice(self.raw_past);
        v.push(self.current);
        v.extend_from_slice(self.future);
        v
    }
}

pub(crate) trait WindowKernel: Send {
    fn kind(&self) -> &'static str;
    /// Number of previous smoothed outputs the kernel reads.
    fn past(&self) -> usize;
    /// Number of previous raw inputs the kernel reads.
    fn raw_past(&self) -> usize {
        0
    }
    /// Lookahead, which is also the group delay.
    fn future(&self) -> usize;
    /// Shrink both sides of the window equally while the history is still
    /// filling, so the window stays centered on the current frame.
    fn symmetric_start(&self) -> bool {
        false
    }
    fn uses_history(&self) -> bool {
        self.past() > 0
    }
    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint>;
    fn reset(&mut self) {}
}

/// Drives a [`WindowKernel`] over a stream: buffers lookahead, keeps raw and
/// smoothed history and applies feedback.
pub(crate) struct WindowedStage<K> {
    kernel: K,
    pending: VecDeque<TracePoint>,
    raw_past: VecDeque<TracePoint>,
    history: VecDeque<TracePoint>,
}

impl<K: WindowKernel> WindowedStage<K> {
    pub fn new(kernel: K) -> Self {
        WindowedStage {
            kernel,
            pending: VecDeque::new(),
            raw_past: VecDeque::new(),
            history: VecDeque::new(),
        }
    }

    fn process_front(&mut self) -> Result<DelayedOutput> {
        let past = self.kernel.past();
        let future_len = self.kernel.future().min(self.pending.len() - 1);
        let pending = self.pending.make_contiguous();
        let current = pending[0];
        let mut future = &pending[1..1 + future_len];
        let history = self.history.make_contiguous();
        let raw_past = self.raw_past.make_contiguous();
        let mut hist: &[TracePoint] = history;
        let mut raw: &[TracePoint] = raw_past;
        if self.kernel.symmetric_start() {
            let filled = hist.len().max(raw.len());
            let need = past.max(self.kernel.raw_past());
            if filled < need {
                let h = filled.min(future.len());
                future = &future[..h];
                hist = &hist[hist.len().saturating_sub(h)..];
                raw = &raw[raw.len().saturating_sub(h)..];
            }
        }
        let window = Window {
            history: hist,
            raw_past: raw,
            current,
            future,
        };
        let out = self.kernel.evaluate(&window)?.with_frame(current.frame);
        if !out.is_finite() {
            return Err(Error::InvalidTrace(format!(
                "non-finite output at frame {}",
                current.frame
            )));
        }
        self.pending.pop_front();
        self.raw_past.push_back(current);
        while self.raw_past.len() > self.kernel.raw_past() {
            self.raw_past.pop_front();
        }
        self.history.push_back(out);
        while self.history.len() > past {
            self.history.pop_front();
        }
        Ok(DelayedOutput {
            point: out,
            group_delay: self.kernel.future(),
        })
    }
}

pub(crate) fn check_input(p: &TracePoint) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTrace(format!(
            "non-finite input at frame {}",
            p.frame
        )))
    }
}

impl<K: WindowKernel> FilterStage for WindowedStage<K> {
    fn name(&self) -> &str {
        self.kernel.kind()
    }

    fn group_delay(&self) -> usize {
        self.kernel.future()
    }

    fn push(&mut self, input: TracePoint) -> Result<Option<DelayedOutput>> {
        check_input(&input)?;
        if let Some(last) = self.pending.back().or(self.raw_past.back()) {
            if input.frame != last.frame + 1 {
                return Err(Error::InvalidTrace(format!(
                    "frame {} follows frame {}",
                    input.frame, last.frame
                )));
            }
        }
        self.pending.push_back(input);
        if self.pending.len() > self.kernel.future() {
            self.process_front().map(Some)
        } else {
            Ok(None)
        }
    }

    fn flush(&mut self) -> Result<Vec<DelayedOutput>> {
        let mut out = Vec::with_capacity(self.pending.len());
        while !self.pending.is_empty() {
            out.push(self.process_front()?);
        }
        Ok(out)
    }

    fn reset(&mut self) {
        self.pending.clear();
        self.raw_past.clear();
        self.history.clear();
        self.kernel.reset();
    }

    fn accepts_feedback(&self) -> bool {
        self.kernel.uses_history()
    }

    fn feed_back(&mut self, point: TracePoint) {
        if !self.kernel.uses_history() {
            return;
        }
        if let Some(first) = self.history.front().map(|p| p.frame) {
            if point.frame >= first {
                if let Some(slot) = self.history.get_mut((point.frame - first) as usize) {
                    *slot = point;
                }
            }
        }
    }
}

/// Per-axis arithmetic mean.
pub(crate) fn mean_point(points: &[TracePoint]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    (sx / n, sy / n)
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Population standard deviation.
pub(crate) fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

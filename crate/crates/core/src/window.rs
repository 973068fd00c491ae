//! Sliding-window smoothers: modified and plain moving average/median,
//! odd-one-removed averaging and Savitzky-Golay.
//!
//! All window filters look `n` frames ahead and report a group delay of `n`.
//! While the history is still filling at stream start the window shrinks
//! symmetrically around the current frame; at stream end only the future
//! side shrinks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stage::{mean_point, median, FilterStage, Window, WindowKernel, WindowedStage};
use crate::trace::TracePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Past side taken from the filter's own previous outputs.
    ModifiedAverage,
    ModifiedMedian,
    /// Past side taken from the raw inputs.
    PlainAverage,
    PlainMedian,
}

impl WindowMode {
    fn is_modified(self) -> bool {
        matches!(
            self,
            WindowMode::ModifiedAverage | WindowMode::ModifiedMedian
        )
    }

    fn is_median(self) -> bool {
        matches!(self, WindowMode::ModifiedMedian | WindowMode::PlainMedian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Half-width; the full window holds `2n + 1` values.
    pub n: usize,
    pub mode: WindowMode,
}

impl WindowConfig {
    pub fn new(n: usize, mode: WindowMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("window half-width must be at least 1".into()));
        }
        Ok(WindowConfig { n, mode })
    }

    pub fn modified_average(n: usize) -> Result<Self> {
        Self::new(n, WindowMode::ModifiedAverage)
    }

    pub fn modified_median(n: usize) -> Result<Self> {
        Self::new(n, WindowMode::ModifiedMedian)
    }
}

/// Mean of the previous smoothed outputs, the current input and the future
/// inputs, per axis.
pub fn modified_moving_average(
    previous_outputs: &[TracePoint],
    current: TracePoint,
    future: &[TracePoint],
) -> TracePoint {
    let mut all = Vec::with_capacity(previous_outputs.len() + 1 + future.len());
    all.extend_from_slice(previous_outputs);
    all.push(current);
    all.extend_from_slice(future);
    let (x, y) = mean_point(&all);
    TracePoint::new(current.frame, x, y)
}

/// Per-axis median over the same span as [`modified_moving_average`].
pub fn modified_moving_median(
    previous_outputs: &[TracePoint],
    current: TracePoint,
    future: &[TracePoint],
) -> TracePoint {
    let mut xs: Vec<f64> = previous_outputs.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = previous_outputs.iter().map(|p| p.y).collect();
    xs.push(current.x);
    ys.push(current.y);
    xs.extend(future.iter().map(|p| p.x));
    ys.extend(future.iter().map(|p| p.y));
    TracePoint::new(current.frame, median(&mut xs), median(&mut ys))
}

#[derive(Debug, Clone)]
pub(crate) struct MovingWindowKernel {
    config: WindowConfig,
}

impl WindowKernel for MovingWindowKernel {
    fn kind(&self) -> &'static str {
        match self.config.mode {
            WindowMode::ModifiedAverage => "mma",
            WindowMode::ModifiedMedian => "mmed",
            WindowMode::PlainAverage => "ma",
            WindowMode::PlainMedian => "med",
        }
    }

    fn past(&self) -> usize {
        if self.config.mode.is_modified() {
            self.config.n
        } else {
            0
        }
    }

    fn raw_past(&self) -> usize {
        if self.config.mode.is_modified() {
            0
        } else {
            self.config.n
        }
    }

    fn future(&self) -> usize {
        self.config.n
    }

    fn symmetric_start(&self) -> bool {
        true
    }

    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint> {
        let past = if self.config.mode.is_modified() {
            w.history
        } else {
            w.raw_past
        };
        Ok(if self.config.mode.is_median() {
            modified_moving_median(past, w.current, w.future)
        } else {
            modified_moving_average(past, w.current, w.future)
        })
    }
}

/// Builds a streaming moving average/median stage.
pub fn moving_window(config: WindowConfig) -> impl FilterStage {
    WindowedStage::new(MovingWindowKernel { config })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OddOneVariant {
    /// Reference: previous smoothed output; Euclidean distance.
    A,
    /// Reference: mean of previous smoothed outputs, current and future inputs.
    B,
    /// Variant A's reference, distances per axis.
    C,
    /// Variant B's reference, distances per axis.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OddOneRemovedConfig {
    pub n: usize,
    pub variant: OddOneVariant,
}

impl OddOneRemovedConfig {
    pub fn new(n: usize, variant: OddOneVariant) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("window half-width must be at least 1".into()));
        }
        if matches!(variant, OddOneVariant::C | OddOneVariant::D) {
            return Err(Error::Config(
                "odd-one variants C and D only flag samples; pair them with a regression stage"
                    .into(),
            ));
        }
        Ok(OddOneRemovedConfig { n, variant })
    }
}

/// Reference point for variants A and C: the most recent smoothed output,
/// falling back to the current input when there is none yet.
pub fn reference_previous(history: &[TracePoint], current: TracePoint) -> (f64, f64) {
    history
        .last()
        .map(|p| (p.x, p.y))
        .unwrap_or((current.x, current.y))
}

/// Reference point for variants B and D: mean of the smoothed history, the
/// current input and the future inputs.
pub fn reference_window_mean(
    history: &[TracePoint],
    current: TracePoint,
    future: &[TracePoint],
) -> (f64, f64) {
    let p = modified_moving_average(history, current, future);
    (p.x, p.y)
}

/// Index of the window point farthest (Euclidean) from `reference`; ties go
/// to the earliest point.
pub fn farthest_index(window: &[TracePoint], reference: (f64, f64)) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in window.iter().enumerate() {
        let d = (p.x - reference.0).powi(2) + (p.y - reference.1).powi(2);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Drops the point farthest from `reference` and averages the rest.
///
/// Windows of fewer than three points are averaged without removal.
pub fn odd_one_removed(window: &[TracePoint], reference: (f64, f64)) -> Result<(f64, f64)> {
    if window.is_empty() {
        return Err(Error::Config("empty window".into()));
    }
    if window.len() < 3 {
        return Ok(mean_point(window));
    }
    let drop = farthest_index(window, reference).expect("non-empty window");
    let n = (window.len() - 1) as f64;
    let (sx, sy) = window
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != drop)
        .fold((0.0, 0.0), |(sx, sy), (_, p)| (sx + p.x, sy + p.y));
    Ok((sx / n, sy / n))
}

fn farthest_scalar(values: impl Iterator<Item = f64>, reference: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        let d = (v - reference).abs();
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Per-axis index of the sample farthest from the reference coordinate.
/// Ties go to the earliest sample on each axis independently.
pub fn flag_odd_per_axis(window: &[TracePoint], reference: (f64, f64)) -> (usize, usize) {
    (
        farthest_scalar(window.iter().map(|p| p.x), reference.0),
        farthest_scalar(window.iter().map(|p| p.y), reference.1),
    )
}

#[derive(Debug, Clone)]
pub(crate) struct OddOneKernel {
    config: OddOneRemovedConfig,
}

impl WindowKernel for OddOneKernel {
    fn kind(&self) -> &'static str {
        match self.config.variant {
            OddOneVariant::A | OddOneVariant::C => "oor-a",
            OddOneVariant::B | OddOneVariant::D => "oor-b",
        }
    }

    fn past(&self) -> usize {
        self.config.n
    }

    fn future(&self) -> usize {
        self.config.n
    }

    fn symmetric_start(&self) -> bool {
        true
    }

    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint> {
        let reference = match self.config.variant {
            OddOneVariant::A | OddOneVariant::C => reference_previous(w.history, w.current),
            OddOneVariant::B | OddOneVariant::D => {
                reference_window_mean(w.history, w.current, w.future)
            }
        };
        let (x, y) = odd_one_removed(&w.smoothed_span(), reference)?;
        Ok(TracePoint::new(w.current.frame, x, y))
    }
}

pub fn odd_one_removed_stage(config: OddOneRemovedConfig) -> impl FilterStage {
    WindowedStage::new(OddOneKernel { config })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavitzkyGolayConfig {
    pub order: usize,
    pub taps: usize,
    weights: Vec<f64>,
}

impl SavitzkyGolayConfig {
    pub fn new(order: usize, taps: usize) -> Result<Self> {
        if taps.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "Savitzky-Golay taps must be odd, got {taps}"
            )));
        }
        if order >= taps {
            return Err(Error::Config(format!(
                "Savitzky-Golay order {order} must be below taps {taps}"
            )));
        }
        let half = taps / 2;
        let weights = savitzky_golay_weights(half, half, order)?;
        Ok(SavitzkyGolayConfig {
            order,
            taps,
            weights,
        })
    }

    /// Least-squares weights for the centered window, oldest sample first.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn group_delay(&self) -> usize {
        (self.taps - 1) / 2
    }
}

impl Default for SavitzkyGolayConfig {
    fn default() -> Self {
        SavitzkyGolayConfig::new(2, 5).expect("order 2 / 5 taps is valid")
    }
}

/// Weights that evaluate, at offset 0, the least-squares polynomial of
/// degree `order` fitted to samples at offsets `-left..=right`.
///
/// The degree is capped at `left + right` so short windows stay well posed.
pub fn savitzky_golay_weights(left: usize, right: usize, order: usize) -> Result<Vec<f64>> {
    let len = left + right + 1;
    let order = order.min(len - 1);
    let vander = DMatrix::from_fn(len, order + 1, |i, j| {
        (i as f64 - left as f64).powi(j as i32)
    });
    let normal = vander.transpose() * &vander;
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::Config("singular Savitzky-Golay design".into()))?;
    // weights = e0^T (V^T V)^-1 V^T
    let mut e0 = DVector::zeros(order + 1);
    e0[0] = 1.0;
    let row = chol.solve(&e0);
    Ok((&vander * row).iter().copied().collect())
}

/// Weighted sum of a scalar window.
pub fn savitzky_golay(window: &[f64], weights: &[f64]) -> Result<f64> {
    if window.len() != weights.len() {
        return Err(Error::Config(format!(
            "window of {} samples for {} weights",
            window.len(),
            weights.len()
        )));
    }
    Ok(window.iter().zip(weights).map(|(v, w)| v * w).sum())
}

#[derive(Debug, Clone)]
pub(crate) struct SavitzkyGolayKernel {
    config: SavitzkyGolayConfig,
}

impl WindowKernel for SavitzkyGolayKernel {
    fn kind(&self) -> &'static str {
        "sg"
    }

    fn past(&self) -> usize {
        0
    }

    fn raw_past(&self) -> usize {
        self.config.group_delay()
    }

    fn future(&self) -> usize {
        self.config.group_delay()
    }

    fn symmetric_start(&self) -> bool {
        true
    }

    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint> {
        let span = w.raw_span();
        let (left, right) = (w.raw_past.len(), w.future.len());
        let weights = if left == right && left == self.config.group_delay() {
            self.config.weights.clone()
        } else {
            savitzky_golay_weights(left, right, self.config.order)?
        };
        let xs: Vec<f64> = span.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = span.iter().map(|p| p.y).collect();
        Ok(TracePoint::new(
            w.current.frame,
            savitzky_golay(&xs, &weights)?,
            savitzky_golay(&ys, &weights)?,
        ))
    }
}

pub fn savitzky_golay_stage(config: SavitzkyGolayConfig) -> impl FilterStage {
    WindowedStage::new(SavitzkyGolayKernel { config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Trace, TraceLabel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<TracePoint> {
        coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TracePoint::new(i as u64, x, y))
            .collect()
    }

    fn run_stage(stage: &mut dyn FilterStage, input: &[TracePoint]) -> Vec<TracePoint> {
        let mut out: Vec<TracePoint> = Vec::new();
        for p in input {
            if let Some(o) = stage.push(*p).unwrap() {
                out.push(o.point);
            }
        }
        out.extend(stage.flush().unwrap().into_iter().map(|o| o.point));
        out
    }

    #[test]
    fn mma_three_term_example() {
        let prev = [TracePoint::new(0, 0.0, 0.0)];
        let out = modified_moving_average(
            &prev,
            TracePoint::new(1, 1.0, 0.3),
            &[TracePoint::new(2, 2.0, -0.3)],
        );
        assert_abs_diff_eq!(out.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mmed_rejects_outlier() {
        let out = modified_moving_median(
            &[TracePoint::new(0, 0.0, 0.0)],
            TracePoint::new(1, 100.0, 100.0),
            &[TracePoint::new(2, 2.0, 2.0)],
        );
        assert_eq!((out.x, out.y), (2.0, 2.0));
    }

    #[test]
    fn constant_input_is_fixed_point() {
        for mode in [
            WindowMode::ModifiedAverage,
            WindowMode::ModifiedMedian,
            WindowMode::PlainAverage,
            WindowMode::PlainMedian,
        ] {
            for n in 1..6 {
                let mut s = moving_window(WindowConfig::new(n, mode).unwrap());
                let input = pts(&vec![(5.0, 5.0); 40]);
                let out = run_stage(&mut s, &input);
                assert_eq!(out.len(), 40);
                assert!(out.iter().all(|p| p.x == 5.0 && p.y == 5.0));
            }
        }
    }

    #[test]
    fn stage_delay_and_emission_order() {
        let mut s = moving_window(WindowConfig::modified_average(3).unwrap());
        assert_eq!(s.group_delay(), 3);
        let input = pts(&(0..10).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        for (t, p) in input.iter().enumerate() {
            let o = s.push(*p).unwrap();
            if t < 3 {
                assert!(o.is_none());
            } else {
                let o = o.unwrap();
                assert_eq!(o.point.frame, t as u64 - 3);
                assert_eq!(o.group_delay, 3);
            }
        }
        let rest = s.flush().unwrap();
        assert_eq!(
            rest.iter().map(|o| o.point.frame).collect::<Vec<_>>(),
            [7, 8, 9]
        );
    }

    #[test]
    fn first_output_matches_plain_average() {
        let input = pts(&[(0.3, 1.0), (1.7, -2.0), (2.2, 0.5), (2.9, 4.0), (4.4, 1.0)]);
        let mut m = moving_window(WindowConfig::modified_average(2).unwrap());
        let mut p = moving_window(WindowConfig::new(2, WindowMode::PlainAverage).unwrap());
        let a = run_stage(&mut m, &input);
        let b = run_stage(&mut p, &input);
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn averages_preserve_noiseless_lines() {
        let line: Vec<_> = (0..60)
            .map(|i| (0.3 * i as f64 + 1.0, -0.2 * i as f64))
            .collect();
        let input = pts(&line);
        for mode in [WindowMode::ModifiedAverage, WindowMode::PlainAverage] {
            let mut s = moving_window(WindowConfig::new(5, mode).unwrap());
            let out = run_stage(&mut s, &input);
            // flush region (last 5) is excluded from metrics
            for (o, i) in out.iter().zip(&input).take(55) {
                assert!((o.x - i.x).abs() < 1e-9 && (o.y - i.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_zero_width() {
        assert!(WindowConfig::modified_average(0).is_err());
        assert!(OddOneRemovedConfig::new(0, OddOneVariant::A).is_err());
        assert!(OddOneRemovedConfig::new(2, OddOneVariant::C).is_err());
    }

    #[test]
    fn odd_one_removed_example() {
        let w = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 10.0), (0.0, 2.0), (0.0, 3.0)]);
        let (x, y) = odd_one_removed(&w, (0.0, 1.5)).unwrap();
        assert_abs_diff_eq!(x, 0.0);
        assert_abs_diff_eq!(y, 1.5);
    }

    #[test]
    fn odd_one_removed_identical_points() {
        let w = pts(&[(2.0, -1.0); 5]);
        assert_eq!(odd_one_removed(&w, (7.0, 7.0)).unwrap(), (2.0, -1.0));
    }

    #[test]
    fn odd_one_tie_removes_earliest() {
        // (0,-1) and (0,1) are both at distance 1 from the origin
        let w = pts(&[(0.0, -1.0), (0.0, 0.0), (0.0, 1.0)]);
        assert_eq!(farthest_index(&w, (0.0, 0.0)), Some(0));
        let (x, y) = odd_one_removed(&w, (0.0, 0.0)).unwrap();
        assert_eq!((x, y), (0.0, 0.5));
    }

    #[test]
    fn flag_per_axis_examples() {
        let w = pts(&[(0.0, 0.0), (0.0, 0.0), (9.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(flag_odd_per_axis(&w, (0.0, 0.0)).0, 2);
        let w = pts(&[(0.0, 0.0), (0.0, 0.0), (9.0, 0.0), (0.0, 0.0), (0.0, -7.0)]);
        assert_eq!(flag_odd_per_axis(&w, (0.0, 0.0)), (2, 4));
        let w = pts(&[(1.0, 1.0); 5]);
        assert_eq!(flag_odd_per_axis(&w, (1.0, 1.0)), (0, 0));
    }

    #[test]
    fn sg_weights_match_published_list() {
        let published = [-0.086, 0.343, 0.486, 0.343, -0.086];
        let cfg = SavitzkyGolayConfig::default();
        for (w, p) in cfg.weights().iter().zip(published) {
            assert!((w - p).abs() < 5e-4, "{w} vs {p}");
        }
        assert_abs_diff_eq!(cfg.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(cfg.group_delay(), 2);
    }

    #[test]
    fn sg_published_weights_on_probes() {
        let w = [-0.086, 0.343, 0.486, 0.343, -0.086];
        assert_abs_diff_eq!(savitzky_golay(&[1.0; 5], &w).unwrap(), 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(
            savitzky_golay(&[0.0, 1.0, 2.0, 3.0, 4.0], &w).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let quad = savitzky_golay(&[4.0, 1.0, 0.0, 1.0, 4.0], &w).unwrap();
        assert_abs_diff_eq!(quad, -0.002, epsilon = 1e-12);
    }

    #[test]
    fn sg_rejects_bad_config() {
        assert!(SavitzkyGolayConfig::new(2, 4).is_err());
        assert!(SavitzkyGolayConfig::new(5, 5).is_err());
        assert!(savitzky_golay(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn sg_stage_preserves_quadratics() {
        let input = pts(&(0..30)
            .map(|i| {
                let t = i as f64;
                (0.1 * t * t - t, 3.0 - 0.5 * t)
            })
            .collect::<Vec<_>>());
        let mut s = savitzky_golay_stage(SavitzkyGolayConfig::default());
        let out = run_stage(&mut s, &input);
        for (o, i) in out.iter().zip(&input) {
            assert!((o.x - i.x).abs() < 1e-9 && (o.y - i.y).abs() < 1e-9);
        }
    }

    #[test]
    fn window_stage_rejects_nan_and_gaps() {
        let mut s = moving_window(WindowConfig::modified_median(1).unwrap());
        assert!(s.push(TracePoint::new(0, f64::NAN, 0.0)).is_err());
        s.reset();
        s.push(TracePoint::new(0, 0.0, 0.0)).unwrap();
        assert!(s.push(TracePoint::new(2, 0.0, 0.0)).is_err());
        let _ = Trace::from_xy([(0.0, 0.0)], 0, 60.0, TraceLabel::Noisy).unwrap();
    }

    proptest! {
        #[test]
        fn odd_one_removed_permutation_invariant(
            coords in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..12),
            rx in -10.0..10.0f64, ry in -10.0..10.0f64,
            rot in 0usize..12,
        ) {
            let w = pts(&coords);
            let mut rotated = w.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            let a = odd_one_removed(&w, (rx, ry)).unwrap();
            let b = odd_one_removed(&rotated, (rx, ry)).unwrap();
            // continuous coordinates: ties have probability zero
            prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        }

        #[test]
        fn sg_reproduces_polynomials(
            c0 in -5.0..5.0f64, c1 in -5.0..5.0f64, c2 in -1.0..1.0f64,
            half in 2usize..6, order in 2usize..4,
        ) {
            let weights = savitzky_golay_weights(half, half, order).unwrap();
            let vals: Vec<f64> = (0..2 * half + 1)
                .map(|i| { let t = i as f64 - half as f64; c0 + c1 * t + c2 * t * t })
                .collect();
            prop_assert!((savitzky_golay(&vals, &weights).unwrap() - c0).abs() < 1e-9);
        }
    }
}

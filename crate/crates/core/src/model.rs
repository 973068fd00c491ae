//! Model-based smoothers: iterative Gaussian-kernel (KDE) smoothing,
//! windowed line fitting and polar-coordinate smoothing.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::stage::{median, std_dev, FilterStage, Window, WindowKernel, WindowedStage};
use crate::trace::{polar_to_cartesian, to_polar, wrap_angle, PolarPoint, TracePoint};
use crate::window::{flag_odd_per_axis, reference_previous, reference_window_mean, WindowConfig};

/// Bandwidths at or below this are treated as a degenerate window.
pub const MIN_BANDWIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Population standard deviation of the window, computed once per call.
    WindowSd,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub n: usize,
    pub bandwidth: Bandwidth,
    pub sd_tol: f64,
    pub move_tol: f64,
    pub max_iters: usize,
}

impl KdeConfig {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("KDE half-width must be at least 1".into()));
        }
        Ok(KdeConfig {
            n,
            bandwidth: Bandwidth::WindowSd,
            sd_tol: 1e-4,
            move_tol: 1e-4,
            max_iters: 50,
        })
    }
}

/// Result of one KDE smoothing call.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeOutcome {
    /// Converged value at the requested index.
    pub value: f64,
    pub iterations: usize,
    /// Window standard deviation before the first iteration and after each one.
    pub sd_history: Vec<f64>,
}

/// Iterated Gaussian-kernel weighted averaging of a scalar window.
///
/// Every iteration replaces each value `v_i` with
/// `sum_j w_ij v_j / sum_j w_ij`, `w_ij = exp(-(v_j - v_i)^2 / (2 h^2))`,
/// until the window SD change or the largest per-point move drops below
/// tolerance, or the iteration cap is hit.
pub fn kde_run(window: &[f64], center: usize, config: &KdeConfig) -> Result<KdeOutcome> {
    if center >= window.len() {
        return Err(Error::Config(format!(
            "center {center} outside window of {}",
            window.len()
        )));
    }
    let mut values = window.to_vec();
    let mut sd = std_dev(&values);
    let mut sd_history = vec![sd];
    let h = match config.bandwidth {
        Bandwidth::WindowSd => sd,
        Bandwidth::Fixed(h) => h,
    };
    if h <= MIN_BANDWIDTH {
        return Ok(KdeOutcome {
            value: values[center],
            iterations: 0,
            sd_history,
        });
    }
    let inv = 1.0 / (2.0 * h * h);
    let mut next = vec![0.0; values.len()];
    let mut iterations = 0;
    while iterations < config.max_iters {
        let mut max_move: f64 = 0.0;
        for (i, slot) in next.iter_mut().enumerate() {
            let vi = values[i];
            let (num, den) = values.iter().fold((0.0, 0.0), |(num, den), &vj| {
                let w = (-(vj - vi).powi(2) * inv).exp();
                (num + w * vj, den + w)
            });
            *slot = num / den;
            max_move = max_move.max((*slot - vi).abs());
        }
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
        let new_sd = std_dev(&values);
        sd_history.push(new_sd);
        let sd_change = (sd - new_sd).abs();
        sd = new_sd;
        if sd_change < config.sd_tol || max_move < config.move_tol {
            break;
        }
    }
    Ok(KdeOutcome {
        value: values[center],
        iterations,
        sd_history,
    })
}

/// Smoothed value of the window's middle sample.
pub fn kde_smooth(window: &[f64], config: &KdeConfig) -> Result<f64> {
    kde_run(window, window.len() / 2, config).map(|o| o.value)
}

#[derive(Debug, Clone)]
pub(crate) struct KdeKernel {
    config: KdeConfig,
}

impl WindowKernel for KdeKernel {
    fn kind(&self) -> &'static str {
        "kde"
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
        let span = w.smoothed_span();
        let center = w.history.len();
        let xs: Vec<f64> = span.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = span.iter().map(|p| p.y).collect();
        Ok(TracePoint::new(
            w.current.frame,
            kde_run(&xs, center, &self.config)?.value,
            kde_run(&ys, center, &self.config)?.value,
        ))
    }
}

/// Streaming KDE stage; the past side of the window is the smoothed history.
pub fn kde_stage(config: KdeConfig) -> impl FilterStage {
    WindowedStage::new(KdeKernel { config })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionMethod {
    LeastSquares,
    TheilSen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OddRemoval {
    None,
    /// Drop the per-axis sample farthest from the previous output.
    VariantC,
    /// Drop the per-axis sample farthest from the smoothed window mean.
    VariantD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressionConfig {
    /// Previous inputs in the window.
    pub m: usize,
    /// Future inputs in the window; also the group delay.
    pub n: usize,
    pub method: RegressionMethod,
    pub odd_removal: OddRemoval,
}

impl RegressionConfig {
    pub fn new(m: usize, n: usize, method: RegressionMethod) -> Result<Self> {
        if m + n == 0 {
            return Err(Error::Config(
                "regression window needs at least two samples".into(),
            ));
        }
        Ok(RegressionConfig {
            m,
            n,
            method,
            odd_removal: OddRemoval::None,
        })
    }

    pub fn with_odd_removal(mut self, odd_removal: OddRemoval) -> Self {
        self.odd_removal = odd_removal;
        self
    }
}

/// Fitted line `value = slope * t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineFit {
    Line {
        slope: f64,
        intercept: f64,
    },
    /// Fewer than two distinct abscissae: the fit is the sample mean.
    Degenerate {
        mean: f64,
    },
}

impl LineFit {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            LineFit::Line { slope, intercept } => slope * t + intercept,
            LineFit::Degenerate { mean } => mean,
        }
    }
}

fn distinct_abscissae(samples: &[(f64, f64)]) -> bool {
    samples.iter().any(|s| s.0 != samples[0].0)
}

fn mean_value(samples: &[(f64, f64)]) -> f64 {
    samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64
}

/// Ordinary least-squares line through `(t, value)` samples.
pub fn least_squares(samples: &[(f64, f64)]) -> Result<LineFit> {
    if samples.is_empty() {
        return Err(Error::Config("no samples to fit".into()));
    }
    if !distinct_abscissae(samples) {
        return Ok(LineFit::Degenerate {
            mean: mean_value(samples),
        });
    }
    let n = samples.len() as f64;
    let mt = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mv = mean_value(samples);
    let (sxy, sxx) = samples.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, v)| {
        (sxy + (t - mt) * (v - mv), sxx + (t - mt) * (t - mt))
    });
    let slope = sxy / sxx;
    Ok(LineFit::Line {
        slope,
        intercept: mv - slope * mt,
    })
}

/// Theil-Sen line: median pairwise slope, median residual intercept.
pub fn theil_sen(samples: &[(f64, f64)]) -> Result<LineFit> {
    if samples.is_empty() {
        return Err(Error::Config("no samples to fit".into()));
    }
    let mut slopes = Vec::with_capacity(samples.len() * samples.len() / 2);
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            if a.0 != b.0 {
                slopes.push((b.1 - a.1) / (b.0 - a.0));
            }
        }
    }
    if slopes.is_empty() {
        return Ok(LineFit::Degenerate {
            mean: mean_value(samples),
        });
    }
    let slope = median(&mut slopes);
    let mut offsets: Vec<f64> = samples.iter().map(|&(t, v)| v - slope * t).collect();
    Ok(LineFit::Line {
        slope,
        intercept: median(&mut offsets),
    })
}

pub fn fit_line(samples: &[(f64, f64)], method: RegressionMethod) -> Result<LineFit> {
    match method {
        RegressionMethod::LeastSquares => least_squares(samples),
        RegressionMethod::TheilSen => theil_sen(samples),
    }
}

/// Fits x(frame) and y(frame) separately over `window` and evaluates both at
/// `eval_frame`. `odd` names the per-axis sample to leave out of each fit.
pub fn windowed_regression(
    window: &[TracePoint],
    eval_frame: u64,
    method: RegressionMethod,
    odd: Option<(usize, usize)>,
) -> Result<TracePoint> {
    let axis_fit = |axis: usize, skip: Option<usize>| -> Result<f64> {
        let samples: Vec<(f64, f64)> = window
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, p)| (p.frame as f64 - eval_frame as f64, p.axis(axis)))
            .collect();
        Ok(fit_line(&samples, method)?.eval(0.0))
    };
    let (skip_x, skip_y) = match odd {
        Some((ix, iy)) if window.len() > 2 => (Some(ix), Some(iy)),
        _ => (None, None),
    };
    Ok(TracePoint::new(
        eval_frame,
        axis_fit(0, skip_x)?,
        axis_fit(1, skip_y)?,
    ))
}

#[derive(Debug, Clone)]
pub(crate) struct RegressionKernel {
    config: RegressionConfig,
}

impl WindowKernel for RegressionKernel {
    fn kind(&self) -> &'static str {
        match self.config.method {
            RegressionMethod::LeastSquares => "linreg",
            RegressionMethod::TheilSen => "theilsen",
        }
    }

    fn past(&self) -> usize {
        match self.config.odd_removal {
            OddRemoval::None => 0,
            OddRemoval::VariantC => 1,
            OddRemoval::VariantD => self.config.m,
        }
    }

    fn raw_past(&self) -> usize {
        self.config.m
    }

    fn future(&self) -> usize {
        self.config.n
    }

    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint> {
        let span = w.raw_span();
        let odd = match self.config.odd_removal {
            OddRemoval::None => None,
            OddRemoval::VariantC => Some(flag_odd_per_axis(
                &span,
                reference_previous(w.history, w.current),
            )),
            OddRemoval::VariantD => Some(flag_odd_per_axis(
                &span,
                reference_window_mean(w.history, w.current, w.future),
            )),
        };
        windowed_regression(&span, w.current.frame, self.config.method, odd)
    }
}

pub fn regression_stage(config: RegressionConfig) -> impl FilterStage {
    WindowedStage::new(RegressionKernel { config })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarConfig {
    pub r_window: WindowConfig,
    /// Exponential smoothing factor for the angle, in (0, 1].
    pub alpha: f64,
}

impl PolarConfig {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(PolarConfig {
            r_window: WindowConfig::modified_average(n)?,
            alpha,
        })
    }
}

/// Radius through a modified moving average, unwrapped angle through
/// first-order exponential smoothing, both about the stream's first point.
#[derive(Debug, Clone)]
pub(crate) struct PolarKernel {
    config: PolarConfig,
    origin: Option<TracePoint>,
    r_history: VecDeque<f64>,
    last_raw_theta: Option<f64>,
    unwrapped: f64,
    smoothed_theta: Option<f64>,
}

impl PolarKernel {
    fn new(config: PolarConfig) -> Self {
        PolarKernel {
            config,
            origin: None,
            r_history: VecDeque::new(),
            last_raw_theta: None,
            unwrapped: 0.0,
            smoothed_theta: None,
        }
    }
}

impl WindowKernel for PolarKernel {
    fn kind(&self) -> &'static str {
        "polar"
    }

    fn past(&self) -> usize {
        0
    }

    fn future(&self) -> usize {
        self.config.r_window.n
    }

    fn evaluate(&mut self, w: &Window<'_>) -> Result<TracePoint> {
        let origin = *self.origin.get_or_insert(w.current);
        let n = self.config.r_window.n;
        let cur = to_polar(&origin, &w.current);

        // zero-radius samples leave the angle state untouched
        if cur.r > 0.0 {
            self.unwrapped = match self.last_raw_theta {
                Some(prev) => self.unwrapped + wrap_angle(cur.theta - prev),
                None => cur.theta,
            };
            self.last_raw_theta = Some(cur.theta);
            let a = self.config.alpha;
            self.smoothed_theta = Some(match self.smoothed_theta {
                Some(s) => a * self.unwrapped + (1.0 - a) * s,
                None => self.unwrapped,
            });
        }
        let theta = self.smoothed_theta.unwrap_or_else(|| {
            w.future
                .iter()
                .map(|p| to_polar(&origin, p))
                .find(|q| q.r > 0.0)
                .map_or(0.0, |q| q.theta)
        });

        let h = if self.r_history.len() < n {
            self.r_history.len().min(w.future.len())
        } else {
            n
        };
        let future = &w.future[..h.min(w.future.len())];
        let past_sum: f64 = self.r_history.iter().rev().take(h).sum();
        let past_len = h.min(self.r_history.len());
        let future_sum: f64 = future.iter().map(|p| to_polar(&origin, p).r).sum();
        let r = (past_sum + cur.r + future_sum) / (past_len + 1 + future.len()) as f64;
        self.r_history.push_back(r);
        while self.r_history.len() > n {
            self.r_history.pop_front();
        }
        let (x, y) = polar_to_cartesian((origin.x, origin.y), PolarPoint { r, theta });
        Ok(TracePoint::new(w.current.frame, x, y))
    }

    fn reset(&mut self) {
        *self = PolarKernel::new(self.config);
    }
}

pub fn polar_stage(config: PolarConfig) -> impl FilterStage {
    WindowedStage::new(PolarKernel::new(config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Independent fixed-point iteration of the Gaussian weighted-mean map,
    /// run for a fixed number of steps.
    fn kde_oracle(window: &[f64], h: f64, steps: usize) -> Vec<f64> {
        let mut v = window.to_vec();
        for _ in 0..steps {
            v = v
                .iter()
                .map(|&vi| {
                    let ws: Vec<f64> = v
                        .iter()
                        .map(|&vj| (-(vj - vi) * (vj - vi) / (2.0 * h * h)).exp())
                        .collect();
                    ws.iter().zip(&v).map(|(w, vj)| w * vj).sum::<f64>() / ws.iter().sum::<f64>()
                })
                .collect();
        }
        v
    }

    fn run_stage(stage: &mut dyn FilterStage, input: &[TracePoint]) -> Vec<TracePoint> {
        let mut out = Vec::new();
        for p in input {
            if let Some(o) = stage.push(*p).unwrap() {
                out.push(o.point);
            }
        }
        out.extend(stage.flush().unwrap().into_iter().map(|o| o.point));
        out
    }

    #[test]
    fn kde_degenerate_window() {
        let cfg = KdeConfig::new(2).unwrap();
        let o = kde_run(&[7.0; 5], 2, &cfg).unwrap();
        assert_eq!((o.value, o.iterations), (7.0, 0));
    }

    #[test]
    fn kde_symmetric_window_keeps_center() {
        let mut cfg = KdeConfig::new(1).unwrap();
        assert_abs_diff_eq!(
            kde_smooth(&[-1.0, 0.0, 1.0], &cfg).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        cfg.bandwidth = Bandwidth::Fixed(0.3);
        assert_abs_diff_eq!(
            kde_smooth(&[-1.0, 0.0, 1.0], &cfg).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kde_outlier_window_matches_oracle() {
        let window = [0.0, 0.0, 10.0, 0.0, 0.0];
        // population SD of this window is exactly 4
        let mut cfg = KdeConfig::new(2).unwrap();
        cfg.sd_tol = 0.0;
        cfg.move_tol = 1e-13;
        cfg.max_iters = 10_000;
        let got = kde_run(&window, 2, &cfg).unwrap();
        let oracle = kde_oracle(&window, 4.0, 5_000);
        assert!(got.value < 10.0);
        assert_abs_diff_eq!(got.value, oracle[2], epsilon = 1e-9);
        let default = kde_smooth(&window, &KdeConfig::new(2).unwrap()).unwrap();
        assert!(default < 10.0);
        assert_abs_diff_eq!(default, oracle[2], epsilon = 1e-2);
    }

    #[test]
    fn kde_center_out_of_range() {
        assert!(kde_run(&[1.0, 2.0], 2, &KdeConfig::new(1).unwrap()).is_err());
        assert!(KdeConfig::new(0).is_err());
    }

    #[test]
    fn least_squares_exact_line() {
        let samples: Vec<(f64, f64)> = (-3..5).map(|t| (t as f64, 2.0 * t as f64 + 1.0)).collect();
        let fit = least_squares(&samples).unwrap();
        assert_abs_diff_eq!(fit.eval(0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.eval(10.0), 21.0, epsilon = 1e-12);
    }

    #[test]
    fn variant_c_drops_outlier_before_fit() {
        let w: Vec<_> = [0.0, 1.0, 2.0, 300.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| TracePoint::new(i as u64, v, v))
            .collect();
        // reference on the line at frame 2
        let odd = flag_odd_per_axis(&w, (2.0, 2.0));
        assert_eq!(odd, (3, 3));
        let out = windowed_regression(&w, 2, RegressionMethod::LeastSquares, Some(odd)).unwrap();
        assert_abs_diff_eq!(out.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn theil_sen_matches_pairwise_oracle() {
        let samples = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 100.0)];
        let mut slopes = vec![];
        for i in 0..4 {
            for j in i + 1..4 {
                slopes.push((samples[j].1 - samples[i].1) / (samples[j].0 - samples[i].0));
            }
        }
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // six slopes, so the middle pair is averaged
        let expected = (slopes[2] + slopes[3]) / 2.0;
        match theil_sen(&samples).unwrap() {
            LineFit::Line { slope, .. } => assert_abs_diff_eq!(slope, expected, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_fit_is_mean() {
        let fit = least_squares(&[(1.0, 2.0), (1.0, 4.0)]).unwrap();
        assert_eq!(fit, LineFit::Degenerate { mean: 3.0 });
        let fit = theil_sen(&[(1.0, 2.0)]).unwrap();
        assert_eq!(fit, LineFit::Degenerate { mean: 2.0 });
    }

    #[test]
    fn regression_stage_tracks_lines() {
        let input: Vec<_> = (0..40)
            .map(|i| TracePoint::new(i, 2.0 * i as f64 + 1.0, -0.5 * i as f64))
            .collect();
        for method in [RegressionMethod::LeastSquares, RegressionMethod::TheilSen] {
            for odd in [OddRemoval::None, OddRemoval::VariantC, OddRemoval::VariantD] {
                let cfg = RegressionConfig::new(7, 3, method)
                    .unwrap()
                    .with_odd_removal(odd);
                let mut s = regression_stage(cfg);
                assert_eq!(s.group_delay(), 3);
                let out = run_stage(&mut s, &input);
                for (o, i) in out.iter().zip(&input) {
                    assert!((o.x - i.x).abs() < 1e-9 && (o.y - i.y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn polar_straight_drag_is_radius_smoothing() {
        let input: Vec<_> = (0..50)
            .map(|i| {
                let s = 0.4 * i as f64;
                TracePoint::new(i, 3.0 + s * 0.6, -1.0 + s * 0.8)
            })
            .collect();
        for alpha in [0.3, 1.0] {
            let mut s = polar_stage(PolarConfig::new(4, alpha).unwrap());
            let out = run_stage(&mut s, &input);
            for (o, i) in out.iter().zip(&input).take(46) {
                assert!((o.x - i.x).abs() < 1e-9 && (o.y - i.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn polar_alpha_one_keeps_angles() {
        let input: Vec<_> = (0..30)
            .map(|i| {
                let a = 0.1 * i as f64;
                TracePoint::new(i, 10.0 * a.cos(), 10.0 * a.sin())
            })
            .collect();
        let mut s = polar_stage(PolarConfig::new(2, 1.0).unwrap());
        let out = run_stage(&mut s, &input);
        let o = input[0];
        for (f, i) in out.iter().zip(&input).skip(1) {
            let ti = (i.y - o.y).atan2(i.x - o.x);
            let tf = (f.y - o.y).atan2(f.x - o.x);
            assert_abs_diff_eq!(wrap_angle(ti - tf), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn polar_unwraps_across_branch_cut() {
        // spiral out of the origin, sweeping through the +-pi cut
        let input: Vec<_> = (0..40)
            .map(|i| {
                if i == 0 {
                    return TracePoint::new(0, 0.0, 0.0);
                }
                let a = PI * 0.75 + 0.02 * i as f64;
                let r = i as f64;
                TracePoint::new(i, r * a.cos(), r * a.sin())
            })
            .collect();
        let mut s = polar_stage(PolarConfig::new(2, 0.3).unwrap());
        let out = run_stage(&mut s, &input);
        let mut prev: Option<f64> = None;
        for p in out.iter().skip(1) {
            let theta = p.y.atan2(p.x);
            if let Some(q) = prev {
                assert!(wrap_angle(theta - q).abs() < 0.5);
            }
            prev = Some(theta);
        }
    }

    #[test]
    fn polar_rejects_alpha() {
        assert!(PolarConfig::new(3, 0.0).is_err());
        assert!(PolarConfig::new(3, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn kde_sd_never_increases(window in prop::collection::vec(-20.0..20.0f64, 3..15)) {
            let cfg = KdeConfig::new(window.len() / 2).unwrap();
            let o = kde_run(&window, window.len() / 2, &cfg).unwrap();
            for pair in o.sd_history.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12, "{:?}", o.sd_history);
            }
        }

        #[test]
        fn least_squares_residuals_orthogonal(
            samples in prop::collection::vec((-10i32..10, -100.0..100.0f64), 3..20)
        ) {
            let samples: Vec<(f64, f64)> = samples.into_iter().map(|(t, v)| (t as f64, v)).collect();
            let fit = least_squares(&samples).unwrap();
            if let LineFit::Line { .. } = fit {
                let (s0, s1) = samples.iter().fold((0.0, 0.0), |(a, b), &(t, v)| {
                    let r = v - fit.eval(t);
                    (a + r, b + t * r)
                });
                prop_assert!(s0.abs() < 1e-9 && s1.abs() < 1e-9, "{} {}", s0, s1);
            }
        }

        #[test]
        fn theil_sen_single_outlier_breakdown(
            slope in -5.0..5.0f64, intercept in -10.0..10.0f64,
            len in 5usize..12, which in 0usize..12, outlier in -1e4..1e4f64,
        ) {
            let mut samples: Vec<(f64, f64)> =
                (0..len).map(|t| (t as f64, slope * t as f64 + intercept)).collect();
            samples[which % len].1 = outlier;
            match theil_sen(&samples).unwrap() {
                LineFit::Line { slope: s, .. } => prop_assert!((s - slope).abs() < 1e-9),
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }
}

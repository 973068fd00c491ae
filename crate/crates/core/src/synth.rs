//! Synthetic drags and anisotropic noise for benchmarking.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::measure1;
use crate::error::{Error, Result};
use crate::trace::{Trace, TraceLabel, TracePoint, DEFAULT_FRAME_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Linear,
    /// Constant-curvature arc.
    Nonlinear,
    /// Straight segments joined by sharp alternating corners.
    Zigzag,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Linear, Shape::Nonlinear, Shape::Zigzag];

    pub fn as_str(&self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::Nonlinear => "nonlinear",
            Shape::Zigzag => "zigzag",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Shape::Linear),
            "nonlinear" | "non-linear" => Ok(Shape::Nonlinear),
            "zigzag" => Ok(Shape::Zigzag),
            other => Err(Error::Config(format!("unknown drag shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    /// Initial heading, radians from the +x axis.
    pub heading: f64,
    pub start: (f64, f64),
    /// Total turning angle of the nonlinear arc, radians.
    pub arc_turn: f64,
    pub zigzag_segments: usize,
    /// Interior angle between consecutive zigzag segments, radians.
    pub zigzag_corner: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            heading: 0.0,
            start: (10.0, 10.0),
            arc_turn: FRAC_PI_2,
            zigzag_segments: 4,
            zigzag_corner: FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragSpec {
    pub shape: Shape,
    /// Initial speed, mm/s.
    pub velocity: f64,
    /// Constant tangential acceleration, mm/s^2.
    pub acceleration: f64,
    pub frame_rate: f64,
    /// Arc length covered by the drag, mm.
    pub extent: f64,
    pub params: ShapeParams,
}

impl DragSpec {
    pub fn new(shape: Shape, velocity: f64, acceleration: f64) -> Self {
        DragSpec {
            shape,
            velocity,
            acceleration,
            frame_rate: DEFAULT_FRAME_RATE,
            extent: 80.0,
            params: ShapeParams::default(),
        }
    }

    pub fn linear(velocity: f64, acceleration: f64) -> Self {
        Self::new(Shape::Linear, velocity, acceleration)
    }

    /// Position and unit tangent at arc length `s`.
    pub fn locate(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        let p = &self.params;
        let (x0, y0) = p.start;
        match self.shape {
            Shape::Linear => {
                let (c, sn) = (p.heading.cos(), p.heading.sin());
                ((x0 + s * c, y0 + s * sn), (c, sn))
            }
            Shape::Nonlinear => {
                let radius = self.extent / p.arc_turn;
                let phi = p.heading + s / radius;
                (
                    (
                        x0 + radius * (phi.sin() - p.heading.sin()),
                        y0 - radius * (phi.cos() - p.heading.cos()),
                    ),
                    (phi.cos(), phi.sin()),
                )
            }
            Shape::Zigzag => {
                let segs = p.zigzag_segments.max(1);
                let seg_len = self.extent / segs as f64;
                // alternate headings so consecutive segments meet at the corner angle
                let swing = (std::f64::consts::PI - p.zigzag_corner) / 2.0;
                let heading = |i: usize| {
                    if i.is_multiple_of(2) {
                        p.heading + swing
                    } else {
                        p.heading - swing
                    }
                };
                let (mut x, mut y) = (x0, y0);
                let mut rest = s;
                let mut i = 0;
                loop {
                    let h = heading(i);
                    if rest <= seg_len || i + 1 == segs {
                        return ((x + rest * h.cos(), y + rest * h.sin()), (h.cos(), h.sin()));
                    }
                    x += seg_len * h.cos();
                    y += seg_len * h.sin();
                    rest -= seg_len;
                    i += 1;
                }
            }
        }
    }

    /// Arc length travelled after `t` seconds.
    pub fn arc_length_at(&self, t: f64) -> f64 {
        self.velocity * t + 0.5 * self.acceleration * t * t
    }
}

/// Zigzag default swing is 45 degrees each side of the heading.
pub const ZIGZAG_DEFAULT_SWING: f64 = FRAC_PI_4;

/// Samples the drag at its frame rate until the extent is covered.
pub fn generate_truth(spec: &DragSpec) -> Result<Trace> {
    if !(spec.velocity > 0.0 && spec.velocity.is_finite()) {
        return Err(Error::Generation(format!(
            "velocity must be positive, got {}",
            spec.velocity
        )));
    }
    if !(spec.frame_rate > 0.0 && spec.extent > 0.0) {
        return Err(Error::Generation(
            "frame rate and extent must be positive".into(),
        ));
    }
    if spec.acceleration < 0.0 {
        // the drag must cover its extent before the speed reaches zero
        let stop_time = -spec.velocity / spec.acceleration;
        if spec.arc_length_at(stop_time) < spec.extent {
            return Err(Error::Generation(format!(
                "speed reaches zero after {:.2} mm of a {:.2} mm drag",
                spec.arc_length_at(stop_time),
                spec.extent
            )));
        }
    }
    let mut points = Vec::new();
    for frame in 0u64.. {
        let t = frame as f64 / spec.frame_rate;
        let s = spec.arc_length_at(t);
        if s > spec.extent + 1e-9 {
            break;
        }
        let ((x, y), _) = spec.locate(s);
        points.push(TracePoint::new(frame, x, y));
    }
    Trace::new(points, spec.frame_rate, TraceLabel::GroundTruth)
}

/// The twelve (velocity, acceleration) rows of the benchmark tables.
pub fn table_grid() -> Vec<(f64, f64)> {
    let mut rows: Vec<(f64, f64)> = [10.0, 25.0, 50.0, 100.0, 150.0, 200.0]
        .iter()
        .map(|&v| (v, 0.0))
        .collect();
    for v in [25.0, 100.0] {
        for a in [25.0, 50.0, 100.0] {
            rows.push((v, a));
        }
    }
    rows
}

/// Writes a grid as `velocity_mm_s,acceleration_mm_s2` CSV.
pub fn write_grid_csv<W: std::io::Write>(grid: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "velocity_mm_s,acceleration_mm_s2")?;
    for (v, a) in grid {
        writeln!(w, "{v},{a}")?;
    }
    Ok(())
}

/// Benchmark noise SDs, mm: the output of [`calibrate_noise`] for a noisy
/// Measure1 of 1.35 mm on a 25 mm/s linear drag, ratio 2, seed 1, 100 trials.
pub const BENCH_SIGMA_ALONG: f64 = 0.692_871;
pub const BENCH_SIGMA_PERP: f64 = 1.385_742;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// SD perpendicular to the drag, mm.
    pub sigma_perp: f64,
    /// SD along the drag, mm.
    pub sigma_along: f64,
    pub seed: u64,
    pub trials: usize,
}

impl NoiseSpec {
    pub fn new(sigma_perp: f64, sigma_along: f64, seed: u64) -> Result<Self> {
        if !(sigma_along >= 0.0 && sigma_perp >= sigma_along && sigma_perp.is_finite()) {
            return Err(Error::Config(format!(
                "noise SDs must satisfy perp >= along >= 0, got perp {sigma_perp}, along {sigma_along}"
            )));
        }
        Ok(NoiseSpec {
            sigma_perp,
            sigma_along,
            seed,
            trials: 100,
        })
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn zero(seed: u64) -> Self {
        NoiseSpec {
            sigma_perp: 0.0,
            sigma_along: 0.0,
            seed,
            trials: 100,
        }
    }
}

/// The random stream for one trial. Each `(seed, trial)` pair selects its own
/// ChaCha stream, so any trial can be regenerated on its own.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Unit tangents of a trace from central differences (one-sided at the ends).
pub fn tangents(trace: &Trace) -> Result<Vec<(f64, f64)>> {
    let pts = trace.points();
    if pts.len() < 2 {
        return Err(Error::InvalidTrace(
            "tangent needs at least two points".into(),
        ));
    }
    let last = pts.len() - 1;
    let mut prev = (1.0, 0.0);
    Ok((0..pts.len())
        .map(|i| {
            let (a, b) = (&pts[i.saturating_sub(1)], &pts[(i + 1).min(last)]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let norm = dx.hypot(dy);
            if norm > 0.0 {
                prev = (dx / norm, dy / norm);
            }
            prev
        })
        .collect())
}

/// Adds Gaussian noise with separate SDs along and across the local drag
/// direction.
pub fn add_noise(truth: &Trace, spec: &NoiseSpec, trial: u64) -> Result<Trace> {
    let tangent = tangents(truth)?;
    let mut rng = trial_rng(spec.seed, trial);
    let points = truth
        .points()
        .iter()
        .zip(tangent)
        .map(|(p, (tx, ty))| {
            let along: f64 = StandardNormal.sample(&mut rng);
            let perp: f64 = StandardNormal.sample(&mut rng);
            let (a, n) = (along * spec.sigma_along, perp * spec.sigma_perp);
            // normal is the tangent rotated by +90 degrees
            TracePoint::new(p.frame, p.x + a * tx - n * ty, p.y + a * ty + n * tx)
        })
        .collect();
    Trace::new(points, truth.frame_rate(), TraceLabel::Noisy)
}

/// Mean over trials of the noisy trace's Measure1 against the truth.
pub fn noisy_measure1(truth: &Trace, spec: &NoiseSpec) -> Result<f64> {
    let mut total = 0.0;
    for trial in 0..spec.trials as u64 {
        total += measure1(truth, &add_noise(truth, spec, trial)?)?;
    }
    Ok(total / spec.trials.max(1) as f64)
}

/// Finds noise SDs (perp = ratio * along) whose trial-averaged noisy
/// Measure1 on `drag` hits `target` within `rel_tol`, by bisection on the
/// along-track SD.
pub fn calibrate_noise(
    target: f64,
    drag: &DragSpec,
    ratio: f64,
    seed: u64,
    trials: usize,
    rel_tol: f64,
) -> Result<NoiseSpec> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::Calibration(format!(
            "target must be finite and >= 0, got {target}"
        )));
    }
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::Calibration(format!(
            "perp/along ratio must be >= 1, got {ratio}"
        )));
    }
    if trials == 0 {
        return Err(Error::Calibration("need at least one trial".into()));
    }
    if target == 0.0 {
        return Ok(NoiseSpec::zero(seed).with_trials(trials));
    }
    let truth = generate_truth(drag)?;
    let score = |s: f64| -> Result<f64> {
        let spec = NoiseSpec::new(ratio * s, s, seed)?.with_trials(trials);
        noisy_measure1(&truth, &spec)
    };
    let mut lo = 0.0;
    let mut hi = target.max(1e-6);
    let mut expansions = 0;
    while score(hi)? < target {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Calibration(format!("target {target} not bracketed")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = score(mid)?;
        if (m - target).abs() <= rel_tol * target {
            return Ok(NoiseSpec::new(ratio * mid, mid, seed)?.with_trials(trials));
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "bisection did not reach {target} within tolerance"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_step_length() {
        let t = generate_truth(&DragSpec::linear(10.0, 0.0)).unwrap();
        assert_eq!(t.len(), 481);
        for w in t.points().windows(2) {
            assert_abs_diff_eq!(w[0].distance(&w[1]), 1.0 / 6.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn uniform_speed_for_all_shapes() {
        for shape in Shape::ALL {
            let spec = DragSpec::new(shape, 50.0, 0.0);
            let t = generate_truth(&spec).unwrap();
            let step = 50.0 / 60.0;
            for (k, _) in t.points().iter().enumerate().skip(1) {
                let s0 = spec.arc_length_at((k - 1) as f64 / 60.0);
                let s1 = spec.arc_length_at(k as f64 / 60.0);
                assert_abs_diff_eq!(s1 - s0, step, epsilon = 1e-9);
            }
            if shape == Shape::Linear {
                for w in t.points().windows(2) {
                    assert_abs_diff_eq!(w[0].distance(&w[1]), step, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn accelerating_speed_profile() {
        let spec = DragSpec::linear(25.0, 100.0);
        let t = generate_truth(&spec).unwrap();
        for (k, w) in t.points().windows(2).enumerate() {
            let expected =
                spec.arc_length_at((k + 1) as f64 / 60.0) - spec.arc_length_at(k as f64 / 60.0);
            assert_abs_diff_eq!(w[0].distance(&w[1]), expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn arc_chords_follow_curvature() {
        let spec = DragSpec::new(Shape::Nonlinear, 100.0, 0.0);
        let t = generate_truth(&spec).unwrap();
        let radius = spec.extent / spec.params.arc_turn;
        let ds = 100.0 / 60.0;
        let chord = 2.0 * radius * (ds / (2.0 * radius)).sin();
        for w in t.points().windows(2) {
            assert_abs_diff_eq!(w[0].distance(&w[1]), chord, epsilon = 1e-9);
        }
    }

    #[test]
    fn zigzag_corners_are_equal() {
        let spec = DragSpec::new(Shape::Zigzag, 10.0, 0.0);
        let seg = spec.extent / 4.0;
        let mut angles = vec![];
        for i in 1..4 {
            let (_, before) = spec.locate(i as f64 * seg - 1e-6);
            let (_, after) = spec.locate(i as f64 * seg + 1e-6);
            let turn = (before.0 * after.0 + before.1 * after.1).acos();
            angles.push(std::f64::consts::PI - turn);
        }
        for a in angles {
            assert_abs_diff_eq!(a, spec.params.zigzag_corner, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(
            (std::f64::consts::PI - spec.params.zigzag_corner) / 2.0,
            ZIGZAG_DEFAULT_SWING,
            epsilon = 1e-12
        );
    }

    #[test]
    fn generation_errors() {
        assert!(generate_truth(&DragSpec::linear(0.0, 0.0)).is_err());
        // 10 mm/s decelerating at 5 mm/s^2 stops after 10 mm
        assert!(generate_truth(&DragSpec::linear(10.0, -5.0)).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let truth = generate_truth(&DragSpec::new(Shape::Zigzag, 25.0, 0.0)).unwrap();
        let noisy = add_noise(&truth, &NoiseSpec::zero(1), 4).unwrap();
        assert_eq!(noisy.points(), truth.points());
    }

    #[test]
    fn noise_is_deterministic_per_trial() {
        let truth = generate_truth(&DragSpec::linear(25.0, 0.0)).unwrap();
        let spec = NoiseSpec::new(1.0, 0.5, 42).unwrap();
        let a = add_noise(&truth, &spec, 7).unwrap();
        let _ = add_noise(&truth, &spec, 3).unwrap();
        let b = add_noise(&truth, &spec, 7).unwrap();
        assert_eq!(a, b);
        let c = add_noise(&truth, &spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_decomposes_along_and_across() {
        let truth = generate_truth(&DragSpec::new(Shape::Nonlinear, 10.0, 0.0)).unwrap();
        let spec = NoiseSpec::new(1.2, 0.6, 9).unwrap();
        let tang = tangents(&truth).unwrap();
        let (mut sa, mut sp, mut n) = (0.0, 0.0, 0.0);
        for trial in 0..25 {
            let noisy = add_noise(&truth, &spec, trial).unwrap();
            for ((t, q), (tx, ty)) in truth.points().iter().zip(noisy.points()).zip(&tang) {
                let (dx, dy) = (q.x - t.x, q.y - t.y);
                let along = dx * tx + dy * ty;
                let perp = -dx * ty + dy * tx;
                sa += along * along;
                sp += perp * perp;
                n += 1.0;
            }
        }
        assert!(n >= 10_000.0);
        let (sd_a, sd_p) = ((sa / n).sqrt(), (sp / n).sqrt());
        assert!((sd_a / 0.6 - 1.0).abs() < 0.05, "{sd_a}");
        assert!((sd_p / 1.2 - 1.0).abs() < 0.05, "{sd_p}");
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::new(0.5, 1.0, 0).is_err());
        assert!(NoiseSpec::new(1.0, -0.1, 0).is_err());
        assert!(NoiseSpec::new(1.0, 1.0, 0).is_ok());
    }

    #[test]
    fn calibration_boundary_and_monotonicity() {
        let drag = DragSpec::linear(25.0, 0.0);
        let zero = calibrate_noise(0.0, &drag, 2.0, 1, 20, 0.01).unwrap();
        assert_eq!((zero.sigma_perp, zero.sigma_along), (0.0, 0.0));
        let sigmas: Vec<f64> = [0.5, 1.0, 1.5]
            .iter()
            .map(|&t| {
                calibrate_noise(t, &drag, 2.0, 1, 20, 0.01)
                    .unwrap()
                    .sigma_along
            })
            .collect();
        assert!(sigmas[0] < sigmas[1] && sigmas[1] < sigmas[2]);
        assert!(calibrate_noise(1.0, &drag, 0.5, 1, 20, 0.01).is_err());
        assert!(calibrate_noise(f64::NAN, &drag, 2.0, 1, 20, 0.01).is_err());
    }

    #[test]
    fn grid_has_twelve_rows() {
        let g = table_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], (10.0, 0.0));
        assert_eq!(g[11], (100.0, 100.0));
        let mut buf = Vec::new();
        write_grid_csv(&g, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("velocity_mm_s,acceleration_mm_s2\n10,0\n"));
    }
}

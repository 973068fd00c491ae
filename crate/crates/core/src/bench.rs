//! Error metrics and the repeated-trial benchmark runner.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pipeline::{run, PipelineSpec};
use crate::synth::{add_noise, generate_truth, DragSpec, NoiseSpec, Shape};
use crate::trace::{Trace, TracePoint};

/// Euclidean distance per index between two equal-length traces.
pub fn pointwise_errors(reference: &Trace, filtered: &Trace) -> Result<Vec<f64>> {
    if reference.len() != filtered.len() {
        return Err(Error::IncompatibleTraces(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            filtered.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::InvalidTrace(
            "metric needs at least one point".into(),
        ));
    }
    Ok(reference
        .points()
        .iter()
        .zip(filtered.points())
        .map(|(a, b): (&TracePoint, &TracePoint)| a.distance(b))
        .collect())
}

/// Mean Euclidean distance over one trial (the tables' "MSE" column).
pub fn measure1(reference: &Trace, filtered: &Trace) -> Result<f64> {
    let e = pointwise_errors(reference, filtered)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Largest pointwise distance over every point of every trial.
pub fn measure2(trials: &[(Trace, Trace)]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::InvalidTrace(
            "measure2 needs at least one trial".into(),
        ));
    }
    let mut max: f64 = 0.0;
    for (r, f) in trials {
        for e in pointwise_errors(r, f)? {
            max = max.max(e);
        }
    }
    Ok(max)
}

fn max_error(reference: &Trace, filtered: &Trace) -> Result<f64> {
    Ok(pointwise_errors(reference, filtered)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Trial-averaged Measure1 and all-trial Measure2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mse: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetResult {
    pub preset: String,
    /// Delay used to align the estimates with the truth.
    pub group_delay: usize,
    pub stats: Stats,
    pub per_trial: Vec<f64>,
    /// Mean filtering time per trace. Not part of the deterministic output.
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub shape: Shape,
    pub velocity: f64,
    pub acceleration: f64,
    pub trials: usize,
    pub noisy: Stats,
    pub noisy_per_trial: Vec<f64>,
    pub filtered: Vec<PresetResult>,
}

impl BenchReport {
    pub fn preset(&self, name: &str) -> Option<&PresetResult> {
        self.filtered.iter().find(|p| p.preset == name)
    }

    /// Equality ignoring wall-clock timings.
    pub fn same_metrics(&self, other: &BenchReport) -> bool {
        let strip = |r: &BenchReport| {
            let mut r = r.clone();
            r.filtered
                .iter_mut()
                .for_each(|p| p.wall_time = Duration::ZERO);
            r
        };
        strip(self) == strip(other)
    }
}

struct TrialOutcome {
    noisy_mse: f64,
    noisy_max: f64,
    /// Per preset: (delay, mse, max, elapsed).
    filtered: Vec<(usize, f64, f64, Duration)>,
}

fn run_trial(
    truth: &Trace,
    presets: &[PipelineSpec],
    noise: &NoiseSpec,
    trial: u64,
) -> Result<TrialOutcome> {
    let noisy = add_noise(truth, noise, trial)?;
    let mut filtered = Vec::with_capacity(presets.len());
    for spec in presets {
        let mut pipe = spec.compose()?;
        let start = Instant::now();
        let out = run(&mut pipe, &noisy)?;
        let elapsed = start.elapsed();
        let (r, f) = out.aligned_with(truth)?;
        filtered.push((
            out.group_delay,
            measure1(&r, &f)?,
            max_error(&r, &f)?,
            elapsed,
        ));
    }
    Ok(TrialOutcome {
        noisy_mse: measure1(truth, &noisy)?,
        noisy_max: max_error(truth, &noisy)?,
        filtered,
    })
}

/// Runs `noise.trials` noisy realisations of one drag through every preset.
/// Trials run in parallel; the reduction is in trial order, so the report is
/// independent of thread scheduling.
pub fn run_row(
    drag: &DragSpec,
    presets: &[PipelineSpec],
    noise: &NoiseSpec,
) -> Result<BenchReport> {
    if noise.trials == 0 {
        return Err(Error::Config("benchmark needs at least one trial".into()));
    }
    let truth = generate_truth(drag)?;
    let outcomes = (0..noise.trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(&truth, presets, noise, trial))
        .collect::<Result<Vec<_>>>()?;
    let n = outcomes.len() as f64;
    let noisy_per_trial: Vec<f64> = outcomes.iter().map(|o| o.noisy_mse).collect();
    let noisy = Stats {
        mse: noisy_per_trial.iter().sum::<f64>() / n,
        max: outcomes.iter().map(|o| o.noisy_max).fold(0.0, f64::max),
    };
    let filtered = presets
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let per_trial: Vec<f64> = outcomes.iter().map(|o| o.filtered[i].1).collect();
            let delays: Vec<usize> = outcomes.iter().map(|o| o.filtered[i].0).collect();
            // a gated pipeline may report different delays on different trials
            let group_delay = delays[0];
            let wall: Duration = outcomes.iter().map(|o| o.filtered[i].3).sum();
            PresetResult {
                preset: spec.name.clone(),
                group_delay,
                stats: Stats {
                    mse: per_trial.iter().sum::<f64>() / n,
                    max: outcomes.iter().map(|o| o.filtered[i].2).fold(0.0, f64::max),
                },
                per_trial,
                wall_time: wall / outcomes.len() as u32,
            }
        })
        .collect();
    Ok(BenchReport {
        shape: drag.shape,
        velocity: drag.velocity,
        acceleration: drag.acceleration,
        trials: noise.trials,
        noisy,
        noisy_per_trial,
        filtered,
    })
}

/// One report per `(velocity, acceleration)` grid row.
pub fn run_table(
    shape: Shape,
    grid: &[(f64, f64)],
    presets: &[PipelineSpec],
    noise: &NoiseSpec,
) -> Result<Vec<BenchReport>> {
    grid.iter()
        .map(|&(v, a)| run_row(&DragSpec::new(shape, v, a), presets, noise))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Velocity,
    Acceleration,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Velocity => "velocity",
            SweepAxis::Acceleration => "acceleration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub fixed: DragSpec,
    pub rows: Vec<(f64, BenchReport)>,
}

impl SweepReport {
    /// `(swept value, mean error)` for one preset, or the noisy input when
    /// `preset` is `noisy`.
    pub fn series(&self, preset: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|(x, r)| {
                if preset == "noisy" {
                    Some((*x, r.noisy.mse))
                } else {
                    r.preset(preset).map(|p| (*x, p.stats.mse))
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},series,mse_mm,max_mm\n", self.axis.as_str());
        for (x, r) in &self.rows {
            let _ = writeln!(out, "{x},noisy,{},{}", r.noisy.mse, r.noisy.max);
            for p in &r.filtered {
                let _ = writeln!(out, "{x},{},{},{}", p.preset, p.stats.mse, p.stats.max);
            }
        }
        out
    }
}

/// Varies velocity or acceleration of `fixed` over `values`.
pub fn sweep(
    axis: SweepAxis,
    fixed: &DragSpec,
    values: &[f64],
    presets: &[PipelineSpec],
    noise: &NoiseSpec,
) -> Result<SweepReport> {
    let rows = values
        .iter()
        .map(|&x| {
            let mut drag = *fixed;
            match axis {
                SweepAxis::Velocity => drag.velocity = x,
                SweepAxis::Acceleration => drag.acceleration = x,
            }
            Ok((x, run_row(&drag, presets, noise)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        axis,
        fixed: *fixed,
        rows,
    })
}

/// Markdown table in the layout of the published tables, two decimals.
pub fn format_markdown(reports: &[BenchReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut out = String::new();
    let _ = write!(out, "| Velocity | Acceleration | Noisy MSE | Noisy Max |");
    for p in &first.filtered {
        let _ = write!(out, " {} MSE | {} Max |", p.preset, p.preset);
    }
    out.push('\n');
    out.push_str("|---:|---:|---:|---:|");
    for _ in &first.filtered {
        out.push_str("---:|---:|");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "| {} | {} | {:.2} | {:.2} |",
            r.velocity, r.acceleration, r.noisy.mse, r.noisy.max
        );
        for p in &r.filtered {
            let _ = write!(out, " {:.2} | {:.2} |", p.stats.mse, p.stats.max);
        }
        out.push('\n');
    }
    let delays: Vec<String> = first
        .filtered
        .iter()
        .map(|p| format!("{} {}", p.preset, p.group_delay))
        .collect();
    let _ = writeln!(
        out,
        "\n{} drags, {} trials per row; group delay in frames: {}",
        first.shape.as_str(),
        first.trials,
        delays.join(", ")
    );
    out
}

/// Long-format CSV with full precision, one line per row and series.
pub fn format_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(
        "shape,velocity_mm_s,acceleration_mm_s2,trials,series,group_delay,mse_mm,max_mm,wall_time_us\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},noisy,0,{},{},0",
            r.shape.as_str(),
            r.velocity,
            r.acceleration,
            r.trials,
            r.noisy.mse,
            r.noisy.max
        );
        for p in &r.filtered {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.shape.as_str(),
                r.velocity,
                r.acceleration,
                r.trials,
                p.preset,
                p.group_delay,
                p.stats.mse,
                p.stats.max,
                p.wall_time.as_micros()
            );
        }
    }
    out
}

/// Measured output lag of `filter` on a probe trace, in frames.
///
/// The probe is pushed one frame at a time and each output is indexed by
/// the push that produced it. The lag is the shift `s` in `0..=max_lag`
/// that best matches the outputs to the inputs `s` frames earlier (smallest
/// mean distance, earliest shift on ties). Pushes before `warmup` are
/// ignored so start-up transients do not count.
pub fn probe_lag<F: crate::FilterStage + ?Sized>(
    filter: &mut F,
    probe: &Trace,
    max_lag: usize,
    warmup: usize,
) -> Result<usize> {
    filter.reset();
    filter.prepare(probe);
    let inputs = probe.points();
    let mut emitted = Vec::with_capacity(inputs.len());
    for p in inputs {
        emitted.push(filter.push(*p)?.map(|o| o.point));
    }
    let mut best: Option<(f64, usize)> = None;
    for s in 0..=max_lag {
        let mut total = 0.0;
        let mut count = 0usize;
        for (t, e) in emitted.iter().enumerate().skip(warmup.max(s)) {
            if let Some(e) = e {
                total += e.distance(&inputs[t - s]);
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let score = total / count as f64;
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, s));
        }
    }
    best.map(|(_, s)| s).ok_or_else(|| Error::TraceTooShort {
        len: probe.len(),
        delay: max_lag,
    })
}

/// Median single-threaded time to filter `trace` with a fresh pipeline,
/// over `reps` repetitions.
pub fn time_filter(spec: &PipelineSpec, trace: &Trace, reps: usize) -> Result<Duration> {
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let mut pipe = spec.compose()?;
        let start = Instant::now();
        run(&mut pipe, trace)?;
        times.push(start.elapsed());
    }
    times.sort();
    Ok(times[times.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceLabel;
    use approx::assert_abs_diff_eq;

    fn tr(points: &[(f64, f64)]) -> Trace {
        Trace::from_xy(points.iter().copied(), 0, 60.0, TraceLabel::GroundTruth).unwrap()
    }

    #[test]
    fn measure1_examples() {
        let a = tr(&[(1.0, 2.0), (3.0, 4.0)]);
        assert_eq!(measure1(&a, &a).unwrap(), 0.0);
        assert_eq!(
            measure1(&tr(&[(0.0, 0.0)]), &tr(&[(3.0, 4.0)])).unwrap(),
            5.0
        );
        assert_eq!(
            measure1(
                &tr(&[(0.0, 0.0), (0.0, 0.0)]),
                &tr(&[(1.0, 0.0), (0.0, 1.0)])
            )
            .unwrap(),
            1.0
        );
        assert!(matches!(
            measure1(&tr(&[(0.0, 0.0)]), &a),
            Err(Error::IncompatibleTraces(_))
        ));
    }

    #[test]
    fn measure2_examples() {
        let a = tr(&[(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(
            measure2(&[(a.clone(), a.clone()), (a.clone(), a.clone())]).unwrap(),
            0.0
        );
        let b = tr(&[(0.0, 2.0), (1.0, 1.0)]);
        assert_eq!(
            measure2(&[(a.clone(), a.clone()), (a.clone(), b)]).unwrap(),
            2.0
        );
    }

    #[test]
    fn zero_noise_row() {
        let presets = vec![crate::pipeline::preset("mma5").unwrap()];
        let noise = NoiseSpec::zero(1).with_trials(3);
        let r = run_row(&DragSpec::linear(25.0, 0.0), &presets, &noise).unwrap();
        assert_eq!(r.noisy.mse, 0.0);
        assert!(r.filtered[0].stats.mse < 1e-3);
        assert_eq!(r.filtered[0].group_delay, 5);
    }

    #[test]
    fn formats() {
        let presets = vec![crate::pipeline::preset("mma5").unwrap()];
        let noise = NoiseSpec::new(1.0, 0.5, 3).unwrap().with_trials(4);
        let rows = run_table(
            Shape::Linear,
            &[(50.0, 0.0), (100.0, 25.0)],
            &presets,
            &noise,
        )
        .unwrap();
        let md = format_markdown(&rows);
        assert!(md.starts_with(
            "| Velocity | Acceleration | Noisy MSE | Noisy Max | mma5 MSE | mma5 Max |\n"
        ));
        assert_eq!(md.lines().filter(|l| l.starts_with("| ")).count(), 3);
        let csv = format_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
        let noisy_line = csv.lines().nth(1).unwrap();
        let mse: f64 = noisy_line.split(',').nth(6).unwrap().parse().unwrap();
        assert_abs_diff_eq!(mse, rows[0].noisy.mse, epsilon = 0.0);
    }
}

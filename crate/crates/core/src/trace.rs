//! Trace data model, metric alignment, polar conversion and the CSV format.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Default sampling rate for synthetic and imported traces, in frames per second.
pub const DEFAULT_FRAME_RATE: f64 = 60.0;

/// One frame's contact position in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

impl TracePoint {
    pub fn new(frame: u64, x: f64, y: f64) -> Self {
        TracePoint { frame, x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &TracePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Coordinate along `axis` (0 = x, 1 = y).
    pub fn axis(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }

    pub fn with_frame(self, frame: u64) -> Self {
        TracePoint { frame, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLabel {
    GroundTruth,
    Noisy,
    Filtered,
}

impl TraceLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceLabel::GroundTruth => "ground-truth",
            TraceLabel::Noisy => "noisy",
            TraceLabel::Filtered => "filtered",
        }
    }
}

/// An ordered run of points with contiguous frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    points: Vec<TracePoint>,
    frame_rate: f64,
    label: TraceLabel,
}

impl Trace {
    /// Builds a trace, checking finiteness, frame contiguity and the frame rate.
    pub fn new(points: Vec<TracePoint>, frame_rate: f64, label: TraceLabel) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::InvalidTrace(format!(
                "frame rate must be positive, got {frame_rate}"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "non-finite coordinate at frame {}",
                    p.frame
                )));
            }
            if i > 0 && p.frame != points[i - 1].frame + 1 {
                return Err(Error::InvalidTrace(format!(
                    "frame {} follows frame {}",
                    p.frame,
                    points[i - 1].frame
                )));
            }
        }
        Ok(Trace {
            points,
            frame_rate,
            label,
        })
    }

    /// Builds a trace from coordinates, numbering frames from `first_frame`.
    pub fn from_xy(
        coords: impl IntoIterator<Item = (f64, f64)>,
        first_frame: u64,
        frame_rate: f64,
        label: TraceLabel,
    ) -> Result<Self> {
        let points = coords
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| TracePoint::new(first_frame + i as u64, x, y))
            .collect();
        Trace::new(points, frame_rate, label)
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<TracePoint> {
        self.points
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn label(&self) -> TraceLabel {
        self.label
    }

    pub fn with_label(mut self, label: TraceLabel) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_frame(&self) -> Option<u64> {
        self.points.first().map(|p| p.frame)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    /// Writes the trace as `frame,x_mm,y_mm` CSV with LF line endings.
    ///
    /// Coordinates use the shortest decimal representation that round-trips
    /// exactly, so write followed by read reproduces the trace bit for bit.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["frame", "x_mm", "y_mm"])?;
        for p in &self.points {
            w.write_record([p.frame.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, frame_rate: f64, label: TraceLabel) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["frame", "x_mm", "y_mm"] {
            return Err(Error::Csv(format!(
                "expected header `frame,x_mm,y_mm`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |i: usize| -> Result<&str> {
                record
                    .get(i)
                    .ok_or_else(|| Error::Csv(format!("row {}: missing column {}", row + 2, i)))
            };
            let frame = field(0)?
                .parse::<u64>()
                .map_err(|e| Error::Csv(format!("row {}: frame: {e}", row + 2)))?;
            let x = field(1)?
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("row {}: x_mm: {e}", row + 2)))?;
            let y = field(2)?
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("row {}: y_mm: {e}", row + 2)))?;
            points.push(TracePoint::new(frame, x, y));
        }
        Trace::new(points, frame_rate, label)
    }
}

/// A filter emission: the estimate for `point.frame`, produced `group_delay`
/// frames after that frame's input arrived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedOutput {
    pub point: TracePoint,
    pub group_delay: usize,
}

/// Pairs a reference trace with an emission-indexed filtered trace.
///
/// `filtered` is indexed by emission time: its point at frame `t` is the
/// filter's estimate of frame `t - group_delay`. Reference frame `f` is
/// paired with filtered frame `f + group_delay`; reference points with no
/// partner at the end and filtered points with no partner at the start are
/// dropped. The returned filtered trace carries the reference frame numbers.
pub fn align_for_metric(
    reference: &Trace,
    filtered: &Trace,
    group_delay: usize,
) -> Result<(Trace, Trace)> {
    if (reference.frame_rate - filtered.frame_rate).abs() > 1e-9 * reference.frame_rate {
        return Err(Error::IncompatibleTraces(format!(
            "frame rates {} and {} differ",
            reference.frame_rate, filtered.frame_rate
        )));
    }
    let too_short = || Error::TraceTooShort {
        len: reference.len().min(filtered.len()),
        delay: group_delay,
    };
    let (Some(rf0), Some(ff0)) = (reference.first_frame(), filtered.first_frame()) else {
        return Err(too_short());
    };
    let mut refs = Vec::new();
    let mut outs = Vec::new();
    for r in &reference.points {
        let target = r.frame + group_delay as u64;
        if target < ff0 {
            continue;
        }
        let j = (target - ff0) as usize;
        match filtered.points.get(j) {
            Some(f) => {
                refs.push(*r);
                outs.push(f.with_frame(r.frame));
            }
            None => break,
        }
    }
    if refs.is_empty() {
        return Err(too_short());
    }
    debug_assert!(refs[0].frame >= rf0);
    Ok((
        Trace::new(refs, reference.frame_rate, reference.label)?,
        Trace::new(outs, filtered.frame_rate, filtered.label)?,
    ))
}

/// Radius and angle of a point relative to a trace's first point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

/// Converts a trace to polar coordinates about its first point.
///
/// The angle of a zero-length offset is 0.
pub fn shift_origin_polar(trace: &Trace) -> Result<Vec<PolarPoint>> {
    let origin = trace
        .points
        .first()
        .ok_or_else(|| Error::InvalidTrace("empty trace".into()))?;
    Ok(trace.points.iter().map(|p| to_polar(origin, p)).collect())
}

pub(crate) fn to_polar(origin: &TracePoint, p: &TracePoint) -> PolarPoint {
    let dx = p.x - origin.x;
    let dy = p.y - origin.y;
    let r = dx.hypot(dy);
    let theta = if r == 0.0 { 0.0 } else { dy.atan2(dx) };
    PolarPoint { r, theta }
}

/// Inverse of [`shift_origin_polar`] for a single point.
pub fn polar_to_cartesian(origin: (f64, f64), p: PolarPoint) -> (f64, f64) {
    (
        origin.0 + p.r * p.theta.cos(),
        origin.1 + p.r * p.theta.sin(),
    )
}

/// Wraps an angle difference into (-pi, pi].
pub(crate) fn wrap_angle(mut a: f64) -> f64 {
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

//! Multi-stage composition: stages chained feedforward, with feedback edges
//! that let a later stage's outputs populate an earlier stage's smoothed
//! history, an optional noise gate that bypasses one stage on quiet input,
//! and the shipped presets.
//!
//! Pipelines are described in a small key-value format:
//!
//! ```text
//! name = three-stage
//! max-delay = 5
//! feedback = kalman -> pde
//!
//! [pde]
//! buffer = 3
//!
//! [kalman]
//!
//! [mma]
//! n = 4
//! ```
//!
//! Top-level keys come before the first section. Each `[kind]` section adds
//! one stage in feedforward order; `[kind#tag]` distinguishes repeated kinds
//! and the full bracket text is the stage label used by `feedback` and
//! `gate`.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kalman::{KalmanConfig, KalmanFilter};
use crate::model::{
    kde_stage, polar_stage, regression_stage, Bandwidth, KdeConfig, OddRemoval, PolarConfig,
    RegressionConfig, RegressionMethod,
};
use crate::pde::{pde_stage, PdeConfig};
use crate::stage::{median, FilterStage};
use crate::trace::{align_for_metric, DelayedOutput, Trace, TraceLabel, TracePoint};
use crate::window::{
    moving_window, odd_one_removed_stage, savitzky_golay_stage, OddOneRemovedConfig, OddOneVariant,
    SavitzkyGolayConfig, WindowConfig, WindowMode,
};

/// Configured filter of one pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageKind {
    Window(WindowConfig),
    OddOne(OddOneRemovedConfig),
    SavitzkyGolay(SavitzkyGolayConfig),
    Kde(KdeConfig),
    Regression(RegressionConfig),
    Polar(PolarConfig),
    Kalman(KalmanConfig),
    Pde(PdeConfig),
}

/// Stage names accepted in spec files.
pub const STAGE_KINDS: &[&str] = &[
    "mma", "mmed", "ma", "med", "oor-a", "oor-b", "sg", "kde", "linreg", "theilsen", "polar",
    "kalman", "pde",
];

/// Typed access to a section's keys that rejects anything left unread.
struct Keys<'a> {
    kind: &'a str,
    map: &'a BTreeMap<String, String>,
    used: BTreeSet<&'a str>,
}

impl<'a> Keys<'a> {
    fn new(kind: &'a str, map: &'a BTreeMap<String, String>) -> Self {
        Keys {
            kind,
            map,
            used: BTreeSet::new(),
        }
    }

    fn get<T: FromStr>(&mut self, key: &'a str, default: T) -> Result<T> {
        self.used.insert(key);
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::Config(format!("{}: bad value `{raw}` for `{key}`", self.kind))
            }),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a str> {
        self.used.insert(key);
        self.map.get(key).map(String::as_str)
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(Error::Config(format!("{}: unknown key `{k}`", self.kind))),
            None => Ok(()),
        }
    }
}

impl StageKind {
    /// Builds a stage config from its spec-file name and keys; missing keys
    /// take defaults.
    pub fn from_keys(kind: &str, map: &BTreeMap<String, String>) -> Result<Self> {
        let mut keys = Keys::new(kind, map);
        let stage = match kind {
            "mma" | "mmed" | "ma" | "med" => {
                let mode = match kind {
                    "mma" => WindowMode::ModifiedAverage,
                    "mmed" => WindowMode::ModifiedMedian,
                    "ma" => WindowMode::PlainAverage,
                    _ => WindowMode::PlainMedian,
                };
                StageKind::Window(WindowConfig::new(keys.get("n", 2)?, mode)?)
            }
            "oor-a" | "oor-b" => {
                let variant = if kind == "oor-a" {
                    OddOneVariant::A
                } else {
                    OddOneVariant::B
                };
                StageKind::OddOne(OddOneRemovedConfig::new(keys.get("n", 2)?, variant)?)
            }
            "sg" => StageKind::SavitzkyGolay(SavitzkyGolayConfig::new(
                keys.get("order", 2)?,
                keys.get("taps", 5)?,
            )?),
            "kde" => {
                let mut cfg = KdeConfig::new(keys.get("n", 2)?)?;
                cfg.bandwidth = match keys.raw("bandwidth") {
                    None | Some("window-sd") => Bandwidth::WindowSd,
                    Some(v) => match v.parse::<f64>() {
                        Ok(h) if h > 0.0 => Bandwidth::Fixed(h),
                        _ => return Err(Error::Config(format!("kde: bad bandwidth `{v}`"))),
                    },
                };
                cfg.max_iters = keys.get("max-iters", cfg.max_iters)?;
                cfg.sd_tol = keys.get("sd-tol", cfg.sd_tol)?;
                cfg.move_tol = keys.get("move-tol", cfg.move_tol)?;
                StageKind::Kde(cfg)
            }
            "linreg" | "theilsen" => {
                let method = if kind == "linreg" {
                    RegressionMethod::LeastSquares
                } else {
                    RegressionMethod::TheilSen
                };
                let odd = match keys.raw("odd") {
                    None | Some("none") => OddRemoval::None,
                    Some("c") | Some("C") => OddRemoval::VariantC,
                    Some("d") | Some("D") => OddRemoval::VariantD,
                    Some(v) => return Err(Error::Config(format!("{kind}: bad odd `{v}`"))),
                };
                StageKind::Regression(
                    RegressionConfig::new(keys.get("m", 3)?, keys.get("n", 2)?, method)?
                        .with_odd_removal(odd),
                )
            }
            "polar" => StageKind::Polar(PolarConfig::new(
                keys.get("n", 2)?,
                keys.get("alpha", 0.5)?,
            )?),
            "kalman" => {
                let d = KalmanConfig::default();
                let cfg = KalmanConfig {
                    dt: keys.get("dt", d.dt)?,
                    noise_window: keys.get("noise-window", d.noise_window)?,
                    q_coeff: keys.get("q-coeff", d.q_coeff)?,
                    scale_fact: keys.get("scale-fact", d.scale_fact)?,
                };
                cfg.validate()?;
                StageKind::Kalman(cfg)
            }
            "pde" => {
                let d = PdeConfig::default();
                let cfg = PdeConfig {
                    k: keys.get("k", d.k)?,
                    dt_step: keys.get("dt-step", d.dt_step)?,
                    max_iters: keys.get("max-iters", d.max_iters)?,
                    conv_tol: keys.get("conv-tol", d.conv_tol)?,
                    stream_buffer: keys.get("buffer", d.stream_buffer)?,
                };
                cfg.validate()?;
                StageKind::Pde(cfg)
            }
            other => return Err(Error::UnknownStage(other.to_string())),
        };
        keys.finish()?;
        Ok(stage)
    }

    pub fn build(&self) -> Result<Box<dyn FilterStage>> {
        Ok(match self {
            StageKind::Window(c) => Box::new(moving_window(*c)),
            StageKind::OddOne(c) => Box::new(odd_one_removed_stage(*c)),
            StageKind::SavitzkyGolay(c) => Box::new(savitzky_golay_stage(c.clone())),
            StageKind::Kde(c) => Box::new(kde_stage(*c)),
            StageKind::Regression(c) => Box::new(regression_stage(*c)),
            StageKind::Polar(c) => Box::new(polar_stage(*c)),
            StageKind::Kalman(c) => Box::new(KalmanFilter::new(*c)?),
            StageKind::Pde(c) => Box::new(pde_stage(*c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    /// Unique label within the pipeline, e.g. `mma` or `mma#2`.
    pub label: String,
    pub kind: StageKind,
}

impl StageSpec {
    pub fn new(label: impl Into<String>, kind: StageKind) -> Self {
        StageSpec {
            label: label.into(),
            kind,
        }
    }

    /// Parses `kind` (or `kind#tag`) with `key=value` settings.
    pub fn parse(label: &str, settings: &[(&str, &str)]) -> Result<Self> {
        let map = settings
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(StageSpec::new(
            label,
            StageKind::from_keys(kind_of(label), &map)?,
        ))
    }
}

/// Drops a `#` comment that starts the line or follows whitespace, so tags
/// such as `mma#2` survive.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn kind_of(label: &str) -> &str {
    label.split('#').next().unwrap_or(label).trim()
}

/// Noise level below which a target stage is bypassed for a whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGate {
    /// Estimated noise SD threshold, mm.
    pub threshold: f64,
    pub target: String,
    /// Leading frames used for the estimate.
    pub window: usize,
}

impl NoiseGate {
    pub fn new(target: impl Into<String>) -> Self {
        NoiseGate {
            threshold: DEFAULT_GATE_THRESHOLD,
            target: target.into(),
            window: 32,
        }
    }
}

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.3;

/// Converts the median absolute deviation of second differences into a
/// noise SD. Second differences of i.i.d. N(0, s^2) samples have SD
/// `s * sqrt(6)`, and 1.4826 maps a normal MAD to its SD. A Monte-Carlo
/// run over 20,000 windows of 32 frames (see the `gate_factor_monte_carlo`
/// test) reproduces 0.6053 within 2%.
pub const MAD_SECOND_DIFF_FACTOR: f64 = 0.605_272;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Active,
    Bypassed,
}

/// Noise SD estimate from the MAD of per-axis second differences, averaged
/// over the axes. Needs at least 4 points; fewer gives 0.
pub fn estimate_noise(points: &[TracePoint]) -> f64 {
    if points.len() < 4 {
        return 0.0;
    }
    let mut total = 0.0;
    for axis in 0..2 {
        let mut d2: Vec<f64> = points
            .windows(3)
            .map(|w| w[0].axis(axis) - 2.0 * w[1].axis(axis) + w[2].axis(axis))
            .collect();
        let mid = median(&mut d2);
        let mut dev: Vec<f64> = d2.iter().map(|v| (v - mid).abs()).collect();
        total += median(&mut dev);
    }
    MAD_SECOND_DIFF_FACTOR * total / 2.0
}

pub fn noise_gate_decision(window: &[TracePoint], gate: &NoiseGate) -> GateDecision {
    if estimate_noise(window) < gate.threshold {
        GateDecision::Bypassed
    } else {
        GateDecision::Active
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub name: String,
    pub stages: Vec<StageSpec>,
    /// `(source, target)` stage labels; the source must come later.
    pub feedback: Vec<(String, String)>,
    pub max_delay: Option<usize>,
    pub gate: Option<NoiseGate>,
}

impl PipelineSpec {
    pub fn new(name: impl Into<String>) -> Self {
        PipelineSpec {
            name: name.into(),
            stages: Vec::new(),
            feedback: Vec::new(),
            max_delay: None,
            gate: None,
        }
    }

    pub fn stage(mut self, stage: StageSpec) -> Self {
        self.stages.push(stage);
        self
    }

    pub fn feedback(mut self, from: &str, to: &str) -> Self {
        self.feedback.push((from.to_string(), to.to_string()));
        self
    }

    pub fn max_delay(mut self, max: usize) -> Self {
        self.max_delay = Some(max);
        self
    }

    pub fn gate(mut self, gate: NoiseGate) -> Self {
        self.gate = Some(gate);
        self
    }

    /// Parses the spec-file format described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = PipelineSpec::new("custom");
        let mut sections: Vec<(usize, String, BTreeMap<String, String>)> = Vec::new();
        let mut gate_keys: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::SpecParse { line: line_no, msg };
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let label = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".into()))?
                    .trim();
                if label.is_empty() {
                    return Err(err("empty section header".into()));
                }
                sections.push((line_no, label.to_string(), BTreeMap::new()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some((_, _, map)) = sections.last_mut() {
                if map.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(err(format!("duplicate key `{key}`")));
                }
                continue;
            }
            match key {
                "name" => spec.name = value.to_string(),
                "max-delay" => {
                    spec.max_delay = Some(
                        value
                            .parse()
                            .map_err(|_| err(format!("bad max-delay `{value}`")))?,
                    )
                }
                "feedback" => {
                    let (from, to) = value
                        .split_once("->")
                        .ok_or_else(|| err(format!("expected `from -> to`, got `{value}`")))?;
                    spec.feedback
                        .push((from.trim().to_string(), to.trim().to_string()));
                }
                "gate" | "gate-threshold" | "gate-window" => {
                    gate_keys.insert(
                        match key {
                            "gate" => "gate",
                            "gate-threshold" => "gate-threshold",
                            _ => "gate-window",
                        },
                        (line_no, value.to_string()),
                    );
                }
                other => return Err(err(format!("unknown top-level key `{other}`"))),
            }
        }
        if let Some((line, target)) = gate_keys.get("gate") {
            let mut gate = NoiseGate::new(target.clone());
            if let Some((l, v)) = gate_keys.get("gate-threshold") {
                gate.threshold = v.parse().map_err(|_| Error::SpecParse {
                    line: *l,
                    msg: format!("bad gate-threshold `{v}`"),
                })?;
            }
            if let Some((l, v)) = gate_keys.get("gate-window") {
                gate.window = v.parse().map_err(|_| Error::SpecParse {
                    line: *l,
                    msg: format!("bad gate-window `{v}`"),
                })?;
            }
            let _ = line;
            spec.gate = Some(gate);
        } else if let Some((line, _)) = gate_keys.values().next() {
            return Err(Error::SpecParse {
                line: *line,
                msg: "gate settings without `gate = <stage>`".into(),
            });
        }
        for (line, label, map) in sections {
            let kind = StageKind::from_keys(kind_of(&label), &map).map_err(|e| match e {
                Error::UnknownStage(_) => e,
                other => Error::SpecParse {
                    line,
                    msg: other.to_string(),
                },
            })?;
            spec.stages.push(StageSpec::new(label, kind));
        }
        Ok(spec)
    }

    /// Validates the wiring and instantiates the stages.
    pub fn compose(&self) -> Result<Pipeline> {
        if self.stages.is_empty() {
            return Err(Error::Config("pipeline has no stages".into()));
        }
        let labels: Vec<String> = self.stages.iter().map(|s| s.label.clone()).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Config(format!("duplicate stage label `{l}`")));
            }
        }
        let index = |l: &str| labels.iter().position(|x| x == l);
        let stages = self
            .stages
            .iter()
            .map(|s| s.kind.build().map_err(|e| e.in_stage(&s.label)))
            .collect::<Result<Vec<_>>>()?;

        let mut feedback_targets = vec![Vec::new(); stages.len()];
        let mut fed: BTreeSet<usize> = BTreeSet::new();
        for (from, to) in &self.feedback {
            let edge_err = |reason: &str| Error::Feedback {
                from: from.clone(),
                to: to.clone(),
                reason: reason.to_string(),
            };
            let src = index(from).ok_or_else(|| edge_err("source is not in the chain"))?;
            let dst = index(to).ok_or_else(|| edge_err("target is not in the chain"))?;
            if src <= dst {
                return Err(edge_err(
                    "feedback must run from a later stage to an earlier one",
                ));
            }
            if !stages[dst].accepts_feedback() {
                return Err(edge_err("target keeps no smoothed history"));
            }
            if !fed.insert(dst) {
                return Err(edge_err("target already has a feedback source"));
            }
            feedback_targets[src].push(dst);
        }

        let gate = match &self.gate {
            Some(g) => {
                let target = index(&g.target).ok_or_else(|| {
                    Error::Config(format!("gate target `{}` is not in the chain", g.target))
                })?;
                if g.window < 4 {
                    return Err(Error::Config(
                        "gate window must hold at least 4 frames".into(),
                    ));
                }
                Some((g.clone(), target))
            }
            None => None,
        };

        let delay: usize = stages.iter().map(|s| s.group_delay()).sum();
        if let Some(max) = self.max_delay {
            if delay > max {
                return Err(Error::DelayBudget { delay, max });
            }
        }
        Ok(Pipeline {
            name: self.name.clone(),
            bypassed: vec![false; stages.len()],
            labels,
            stages,
            feedback_targets,
            gate,
        })
    }
}

/// A composed chain of stages that is itself a [`FilterStage`].
pub struct Pipeline {
    name: String,
    labels: Vec<String>,
    stages: Vec<Box<dyn FilterStage>>,
    /// For each stage, the earlier stages its outputs are fed back into.
    feedback_targets: Vec<Vec<usize>>,
    gate: Option<(NoiseGate, usize)>,
    bypassed: Vec<bool>,
}

impl Pipeline {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn stage_delays(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.group_delay()).collect()
    }

    /// Labels of the stages currently bypassed by the noise gate.
    pub fn bypassed(&self) -> Vec<&str> {
        self.labels
            .iter()
            .zip(&self.bypassed)
            .filter(|(_, b)| **b)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Sets the bypass state of the gated stage directly. Has no effect on
    /// a pipeline without a gate.
    pub fn set_gate(&mut self, decision: GateDecision) {
        if let Some((_, target)) = &self.gate {
            self.bypassed[*target] = decision == GateDecision::Bypassed;
        }
    }

    fn route_feedback(&mut self, src: usize, point: TracePoint) {
        for &dst in &self.feedback_targets[src] {
            if !self.bypassed[dst] {
                self.stages[dst].feed_back(point);
            }
        }
    }

    /// Pushes `point` through stages `start..`, returning the final output.
    fn push_from(&mut self, start: usize, point: TracePoint) -> Result<Option<TracePoint>> {
        let mut item = point;
        for i in start..self.stages.len() {
            if self.bypassed[i] {
                continue;
            }
            let out = self.stages[i]
                .push(item)
                .map_err(|e| e.in_stage(&self.labels[i]))?;
            match out {
                Some(o) => {
                    self.route_feedback(i, o.point);
                    item = o.point;
                }
                None => return Ok(None),
            }
        }
        Ok(Some(item))
    }
}

impl FilterStage for Pipeline {
    fn name(&self) -> &str {
        &self.name
    }

    fn group_delay(&self) -> usize {
        self.stages
            .iter()
            .zip(&self.bypassed)
            .filter(|(_, b)| !**b)
            .map(|(s, _)| s.group_delay())
            .sum()
    }

    fn push(&mut self, input: TracePoint) -> Result<Option<DelayedOutput>> {
        let delay = self.group_delay();
        Ok(self.push_from(0, input)?.map(|point| DelayedOutput {
            point,
            group_delay: delay,
        }))
    }

    fn flush(&mut self) -> Result<Vec<DelayedOutput>> {
        let delay = self.group_delay();
        let mut out = Vec::new();
        for i in 0..self.stages.len() {
            if self.bypassed[i] {
                continue;
            }
            let tail = self.stages[i]
                .flush()
                .map_err(|e| e.in_stage(&self.labels[i]))?;
            for o in tail {
                self.route_feedback(i, o.point);
                if let Some(point) = self.push_from(i + 1, o.point)? {
                    out.push(DelayedOutput {
                        point,
                        group_delay: delay,
                    });
                }
            }
        }
        Ok(out)
    }

    fn reset(&mut self) {
        for s in &mut self.stages {
            s.reset();
        }
        self.bypassed.iter_mut().for_each(|b| *b = false);
    }

    /// Freezes the gate decision for the whole trace from its leading frames.
    fn prepare(&mut self, input: &Trace) {
        if let Some((gate, _)) = &self.gate {
            let head = &input.points()[..gate.window.min(input.len())];
            let decision = if head.len() < 4 {
                GateDecision::Active
            } else {
                noise_gate_decision(head, gate)
            };
            self.set_gate(decision);
        }
        for s in &mut self.stages {
            s.prepare(input);
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("mma5", "max-delay = 5\n[mma]\nn = 5\n"),
    (
        "three-stage",
        "max-delay = 5\nfeedback = kalman -> pde\n[pde]\nbuffer = 3\n[kalman]\n[mma]\nn = 4\n",
    ),
    (
        "three-stage-adaptive",
        "max-delay = 5\nfeedback = kalman -> pde\ngate = pde\n[pde]\nbuffer = 3\n[kalman]\n[mma]\nn = 4\n",
    ),
    ("a", "max-delay = 5\nfeedback = oor-b -> mmed\n[mmed]\nn = 3\n[oor-b]\nn = 2\n"),
    ("b", "max-delay = 5\nfeedback = mma -> kde\n[kde]\nn = 2\n[mma]\nn = 3\n"),
    (
        "c",
        "max-delay = 5\nfeedback = mmed -> oor-b\n[oor-b]\nn = 1\n[linreg]\nm = 7\nn = 3\n[mmed]\nn = 1\n",
    ),
    (
        "d",
        "max-delay = 5\nfeedback = kalman -> pde\n[pde]\nbuffer = 3\n[kalman]\n[mma]\nn = 4\n",
    ),
    ("mma-sg", "max-delay = 5\n[mma]\nn = 3\n[sg]\ntaps = 5\n"),
];

/// Names of the shipped presets.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// The spec-file text of a shipped preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    let name = name.strip_prefix("preset:").unwrap_or(name);
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Looks up a shipped preset, with or without a `preset:` prefix.
pub fn preset(name: &str) -> Result<PipelineSpec> {
    let text =
        preset_text(name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
    let mut spec = PipelineSpec::parse(text)?;
    spec.name = name.strip_prefix("preset:").unwrap_or(name).to_string();
    Ok(spec)
}

/// The output of [`run`]: one estimate per input frame plus the group delay
/// the filter reported for this trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredTrace {
    /// Estimates indexed by the frame they estimate.
    pub estimates: Trace,
    pub group_delay: usize,
}

impl FilteredTrace {
    /// The outputs available in real time, indexed by emission frame: the
    /// point at frame `t` is the estimate of frame `t - group_delay`.
    /// Estimates emitted only by the end-of-stream flush are excluded.
    pub fn emitted(&self) -> Trace {
        let d = self.group_delay;
        let pts = self.estimates.points();
        let keep = pts.len().saturating_sub(d);
        let points = pts[..keep]
            .iter()
            .map(|p| p.with_frame(p.frame + d as u64))
            .collect();
        Trace::new(points, self.estimates.frame_rate(), TraceLabel::Filtered)
            .expect("shifted estimates stay contiguous")
    }

    /// Reference and real-time estimates paired frame by frame.
    pub fn aligned_with(&self, reference: &Trace) -> Result<(Trace, Trace)> {
        align_for_metric(reference, &self.emitted(), self.group_delay)
    }
}

/// Resets `filter`, streams `noisy` through it and collects every estimate,
/// including the flushed tail.
pub fn run<F: FilterStage + ?Sized>(filter: &mut F, noisy: &Trace) -> Result<FilteredTrace> {
    filter.reset();
    filter.prepare(noisy);
    let delay = filter.group_delay();
    let name = filter.name().to_string();
    let mut outs = Vec::with_capacity(noisy.len());
    for p in noisy.points() {
        if let Some(o) = filter.push(*p).map_err(|e| e.in_stage(&name))? {
            outs.push(o);
        }
    }
    outs.extend(filter.flush().map_err(|e| e.in_stage(&name))?);
    if outs.len() != noisy.len() {
        return Err(Error::Stage {
            stage: name,
            source: Box::new(Error::InvalidTrace(format!(
                "{} outputs for {} inputs",
                outs.len(),
                noisy.len()
            ))),
        });
    }
    for (o, i) in outs.iter().zip(noisy.points()) {
        if o.point.frame != i.frame || o.group_delay != delay {
            return Err(Error::Stage {
                stage: name,
                source: Box::new(Error::InvalidTrace(format!(
                    "output for frame {} (delay {}) where frame {} (delay {delay}) was due",
                    o.point.frame, o.group_delay, i.frame
                ))),
            });
        }
    }
    let estimates = Trace::new(
        outs.into_iter().map(|o| o.point).collect(),
        noisy.frame_rate(),
        TraceLabel::Filtered,
    )?;
    Ok(FilteredTrace {
        estimates,
        group_delay: delay,
    })
}

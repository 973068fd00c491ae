//! Constant-acceleration Kalman filter with noise covariances re-estimated
//! every frame from the spread of the most recent inputs.
//!
//! State layout is `(x, y, x', y', x'', y'')` in mm, mm/frame and
//! mm/frame^2. Only positions are observed.

use std::collections::VecDeque;

use nalgebra::{Matrix2, SMatrix, SVector, SymmetricEigen, Vector2};

use crate::error::{Error, Result};
use crate::stage::{check_input, std_dev, FilterStage};
use crate::trace::{DelayedOutput, TracePoint};

pub type StateVector = SVector<f64, 6>;
pub type StateMatrix = SMatrix<f64, 6, 6>;
type Observation = SMatrix<f64, 2, 6>;

/// Smallest per-axis noise SD used for the measurement covariance.
pub const SD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    /// Frame period in frames.
    pub dt: f64,
    /// Number of recent inputs used to estimate the per-axis noise SD.
    pub noise_window: usize,
    /// Process noise scale relative to the mean per-axis SD.
    pub q_coeff: f64,
    /// Initial covariance is `scale_fact * Q`.
    pub scale_fact: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            dt: 1.0,
            noise_window: 10,
            q_coeff: 0.01,
            scale_fact: 100.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "kalman dt must be positive, got {}",
                self.dt
            )));
        }
        if self.noise_window < 2 {
            return Err(Error::Config(
                "kalman noise-window must be at least 2".into(),
            ));
        }
        if !(self.q_coeff >= 0.0 && self.scale_fact > 0.0) {
            return Err(Error::Config(
                "kalman q_coeff and scale-fact must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub state: StateVector,
    pub covariance: StateMatrix,
}

/// Per-axis kinematics: position gains velocity and half the acceleration,
/// velocity gains acceleration.
pub fn build_transition(dt: f64) -> StateMatrix {
    let mut a = StateMatrix::identity();
    for axis in 0..2 {
        a[(axis, axis + 2)] = dt;
        a[(axis, axis + 4)] = 0.5 * dt * dt;
        a[(axis + 2, axis + 4)] = dt;
    }
    a
}

/// Discretized white-noise-jerk covariance, scaled by `q`.
pub fn build_process_noise(q: f64, dt: f64) -> StateMatrix {
    let block = [
        [dt.powi(5) / 20.0, dt.powi(4) / 8.0, dt.powi(3) / 6.0],
        [dt.powi(4) / 8.0, dt.powi(3) / 3.0, dt.powi(2) / 2.0],
        [dt.powi(3) / 6.0, dt.powi(2) / 2.0, dt],
    ];
    let mut m = StateMatrix::zeros();
    for axis in 0..2 {
        for (i, row) in block.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(axis + 2 * i, axis + 2 * j)] = q * v;
            }
        }
    }
    m
}

fn observation() -> Observation {
    let mut h = Observation::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h
}

/// Per-axis SD of recent inputs, floored at [`SD_FLOOR`].
pub fn noise_sds(recent: &[TracePoint]) -> (f64, f64) {
    let xs: Vec<f64> = recent.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = recent.iter().map(|p| p.y).collect();
    (std_dev(&xs).max(SD_FLOOR), std_dev(&ys).max(SD_FLOOR))
}

/// Process and measurement covariances for the given recent inputs.
pub fn noise_model(recent: &[TracePoint], config: &KalmanConfig) -> (StateMatrix, Matrix2<f64>) {
    let (sd_x, sd_y) = noise_sds(recent);
    let q = config.q_coeff * 0.5 * (sd_x + sd_y);
    (
        build_process_noise(q, config.dt),
        Matrix2::new(sd_x, 0.0, 0.0, sd_y),
    )
}

impl KalmanState {
    /// Position from the first measurement, zero velocity and acceleration.
    pub fn initial(measurement: &TracePoint, recent: &[TracePoint], config: &KalmanConfig) -> Self {
        let (q, _) = noise_model(recent, config);
        let mut state = StateVector::zeros();
        state[0] = measurement.x;
        state[1] = measurement.y;
        KalmanState {
            state,
            covariance: q * config.scale_fact,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.state[0], self.state[1])
    }
}

/// One predict/correct cycle.
///
/// `recent` holds the latest noisy inputs (including `measurement`) from
/// which the noise covariances are rebuilt. The covariance update uses the
/// Joseph form.
pub fn kalman_step(
    prior: &KalmanState,
    measurement: &TracePoint,
    recent: &[TracePoint],
    config: &KalmanConfig,
) -> Result<(KalmanState, DelayedOutput)> {
    let (q, r) = noise_model(recent, config);
    let a = build_transition(config.dt);
    let h = observation();

    let x_pred = a * prior.state;
    let p_pred = a * prior.covariance * a.transpose() + q;

    let innovation_cov = h * p_pred * h.transpose() + r;
    let inv = innovation_cov
        .try_inverse()
        .ok_or_else(|| Error::Config("singular innovation covariance".into()))?;
    let gain = p_pred * h.transpose() * inv;
    let z = Vector2::new(measurement.x, measurement.y);
    let state = x_pred + gain * (z - h * x_pred);

    let i_kh = StateMatrix::identity() - gain * h;
    let p = i_kh * p_pred * i_kh.transpose() + gain * r * gain.transpose();
    let covariance = (p + p.transpose()) * 0.5;

    let next = KalmanState { state, covariance };
    let out = DelayedOutput {
        point: TracePoint::new(measurement.frame, state[0], state[1]),
        group_delay: 0,
    };
    Ok((next, out))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &StateMatrix) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// Zero-delay streaming Kalman stage.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    config: KalmanConfig,
    recent: VecDeque<TracePoint>,
    state: Option<KalmanState>,
}

impl KalmanFilter {
    pub fn new(config: KalmanConfig) -> Result<Self> {
        config.validate()?;
        Ok(KalmanFilter {
            config,
            recent: VecDeque::with_capacity(config.noise_window),
            state: None,
        })
    }

    pub fn state(&self) -> Option<&KalmanState> {
        self.state.as_ref()
    }
}

impl FilterStage for KalmanFilter {
    fn name(&self) -> &str {
        "kalman"
    }

    fn group_delay(&self) -> usize {
        0
    }

    fn push(&mut self, input: TracePoint) -> Result<Option<DelayedOutput>> {
        check_input(&input)?;
        self.recent.push_back(input);
        while self.recent.len() > self.config.noise_window {
            self.recent.pop_front();
        }
        let recent = self.recent.make_contiguous();
        let out = match &self.state {
            None if recent.len() < 2 => {
                // position is known exactly from the first sample; the
                // covariance waits until a spread can be measured
                DelayedOutput {
                    point: input,
                    group_delay: 0,
                }
            }
            None => {
                let prior = KalmanState::initial(&recent[0], recent, &self.config);
                let (next, out) = kalman_step(&prior, &input, recent, &self.config)?;
                self.state = Some(next);
                out
            }
            Some(prior) => {
                let (next, out) = kalman_step(prior, &input, recent, &self.config)?;
                self.state = Some(next);
                out
            }
        };
        Ok(Some(out))
    }

    fn flush(&mut self) -> Result<Vec<DelayedOutput>> {
        Ok(Vec::new())
    }

    fn reset(&mut self) {
        self.recent.clear();
        self.state = None;
    }
}

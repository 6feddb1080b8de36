//! Binary resistive-switch model.
//!
//! Each device carries a hidden activation `w_prime` driven by the applied
//! bias and a binary conduction state `w` derived from it through a
//! hysteresis loop. Conductance follows a two-branch law:
//!
//! ```text
//! G(w, V) = (1 - w) * eps * (1 - exp(-theta*|V|)) / |V| + w * gamma * sinh(delta*|V|) / |V|
//! dw'/dt  = lambda * sinh(eta*V) - (w'/tau) * (1 - w')
//! ```
//!
//! Conductance is evaluated at `|V|` so the element is symmetric; the hidden
//! state sees the signed branch voltage.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this bias magnitude the conductance branches return their analytic
/// zero-bias limits.
const ZERO_BIAS: f64 = 1e-7;

/// Decay law for the hidden activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// `-(w'/tau) * (1 - w')`: slow decay near both saturated states.
    #[default]
    StateDependent,
    /// `-w'/tau`: plain exponential relaxation.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Off-branch conductance scale (S·V).
    pub epsilon: f64,
    /// Off-branch exponent (1/V).
    pub theta: f64,
    /// On-branch conductance scale (S·V).
    pub gamma: f64,
    /// On-branch sinh argument (1/V).
    pub delta: f64,
    /// Activation growth rate (1/s).
    pub lambda: f64,
    /// Activation sinh argument (1/V).
    pub eta: f64,
    /// Decay time constant (s).
    pub tau: f64,
    pub th_low: f64,
    pub th_high: f64,
    /// Minimum conductance (S) placed in parallel with the device.
    pub g_floor: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            theta: 4.0,
            gamma: 4e-4,
            delta: 2.0,
            lambda: 1.0,
            eta: 4.0,
            tau: 0.2,
            th_low: 0.4,
            th_high: 0.6,
            g_floor: 1e-9,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("theta", self.theta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("eta", self.eta),
            ("tau", self.tau),
            ("g_floor", self.g_floor),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.th_low > 0.0 && self.th_low < self.th_high && self.th_high < 1.0) {
            return Err(Error::param(format!(
                "thresholds must satisfy 0 < th_low < th_high < 1, got {} and {}",
                self.th_low, self.th_high
            )));
        }
        Ok(())
    }
}

/// Dynamic state of one device.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceState {
    pub w_prime: f64,
    pub on: bool,
}

impl DeviceState {
    pub fn w(&self) -> f64 {
        if self.on {
            1.0
        } else {
            0.0
        }
    }
}

/// Device conductance in siemens for binary state `on` at bias `volts`.
///
/// The result is floored at `p.g_floor`.
pub fn conductance(on: bool, volts: f64, p: &DeviceParams) -> Result<f64> {
    if !volts.is_finite() {
        return Err(Error::param(format!("bias must be finite, got {volts}")));
    }
    p.validate()?;
    Ok(conductance_unchecked(on, volts, p))
}

/// Hot-path variant of [`conductance`] for parameters that were validated
/// up front.
pub(crate) fn conductance_unchecked(on: bool, volts: f64, p: &DeviceParams) -> f64 {
    let v = volts.abs();
    let g = if on {
        if v < ZERO_BIAS {
            p.gamma * p.delta
        } else {
            p.gamma * (p.delta * v).sinh() / v
        }
    } else if v < ZERO_BIAS {
        p.epsilon * p.theta
    } else {
        -p.epsilon * (-p.theta * v).exp_m1() / v
    };
    g.max(p.g_floor)
}

/// Current through the device (A), odd in `volts`.
pub fn current(on: bool, volts: f64, p: &DeviceParams) -> Result<f64> {
    Ok(conductance(on, volts, p)? * volts)
}

/// One explicit Euler step of the hidden activation with state-dependent decay.
pub fn step_internal_state(s: DeviceState, volts: f64, dt: f64, p: &DeviceParams) -> Result<DeviceState> {
    step_internal_state_with(s, volts, dt, p, DecayMode::StateDependent)
}

pub fn step_internal_state_with(
    s: DeviceState,
    volts: f64,
    dt: f64,
    p: &DeviceParams,
    mode: DecayMode,
) -> Result<DeviceState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param(format!("dt must be finite and > 0, got {dt}")));
    }
    if !volts.is_finite() {
        return Err(Error::param(format!("bias must be finite, got {volts}")));
    }
    if !(0.0..=1.0).contains(&s.w_prime) {
        return Err(Error::param(format!("w_prime must lie in [0, 1], got {}", s.w_prime)));
    }
    p.validate()?;
    Ok(step_unchecked(s, volts, dt, p, mode))
}

pub(crate) fn step_unchecked(s: DeviceState, volts: f64, dt: f64, p: &DeviceParams, mode: DecayMode) -> DeviceState {
    let w = s.w_prime;
    let growth = p.lambda * (p.eta * volts).sinh();
    let decay = match mode {
        DecayMode::StateDependent => w / p.tau * (1.0 - w),
        DecayMode::Linear => w / p.tau,
    };
    let next = w + dt * (growth - decay);
    // sinh overflow at extreme bias yields +-inf; clamp maps it to a bound
    let w_prime = if next.is_nan() { w } else { next.clamp(0.0, 1.0) };
    DeviceState { w_prime, on: s.on }
}

/// Threshold the hidden activation into the binary conduction state.
pub fn apply_hysteresis(s: DeviceState, p: &DeviceParams) -> DeviceState {
    let on = if s.w_prime >= p.th_high {
        true
    } else if s.w_prime <= p.th_low {
        false
    } else {
        s.on
    };
    DeviceState { on, ..s }
}

/// Closed interval used for uniform parameter draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn point(value: f64) -> Self {
        Self { min: value, max: value }
    }

    /// `value * (1 - fraction) ..= value * (1 + fraction)`.
    pub fn around(value: f64, fraction: f64) -> Self {
        Self { min: value * (1.0 - fraction), max: value * (1.0 + fraction) }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // always consume one draw so the stream layout does not depend on widths
        let u: f64 = rng.random();
        if self.min == self.max {
            self.min
        } else {
            self.min + (self.max - self.min) * u
        }
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.min, i.max]
    }
}

/// Per-parameter ranges from which each device is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub epsilon: Interval,
    pub theta: Interval,
    pub gamma: Interval,
    pub delta: Interval,
    pub lambda: Interval,
    pub eta: Interval,
    pub tau: Interval,
    pub th_low: Interval,
    pub th_high: Interval,
    pub g_floor: Interval,
}

impl Default for ParamRanges {
    /// +-50% around the default model constants; thresholds and the
    /// conductance floor are held fixed.
    fn default() -> Self {
        Self::around(&DeviceParams::default(), 0.5)
    }
}

impl ParamRanges {
    /// Every field pinned to the value in `p`.
    pub fn fixed(p: &DeviceParams) -> Self {
        Self::around(p, 0.0)
    }

    /// Model constants varied by `fraction`; thresholds and floor fixed.
    pub fn around(p: &DeviceParams, fraction: f64) -> Self {
        Self {
            epsilon: Interval::around(p.epsilon, fraction),
            theta: Interval::around(p.theta, fraction),
            gamma: Interval::around(p.gamma, fraction),
            delta: Interval::around(p.delta, fraction),
            lambda: Interval::around(p.lambda, fraction),
            eta: Interval::around(p.eta, fraction),
            tau: Interval::around(p.tau, fraction),
            th_low: Interval::point(p.th_low),
            th_high: Interval::point(p.th_high),
            g_floor: Interval::point(p.g_floor),
        }
    }

    fn fields(&self) -> [(&'static str, Interval); 10] {
        [
            ("epsilon", self.epsilon),
            ("theta", self.theta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("tau", self.tau),
            ("th_low", self.th_low),
            ("th_high", self.th_high),
            ("g_floor", self.g_floor),
        ]
    }

    fn corner(&self, upper: bool) -> DeviceParams {
        let pick = |i: Interval| if upper { i.max } else { i.min };
        DeviceParams {
            epsilon: pick(self.epsilon),
            theta: pick(self.theta),
            gamma: pick(self.gamma),
            delta: pick(self.delta),
            lambda: pick(self.lambda),
            eta: pick(self.eta),
            tau: pick(self.tau),
            th_low: pick(self.th_low),
            th_high: pick(self.th_high),
            g_floor: pick(self.g_floor),
        }
    }

    /// Checks ordering of every interval and that any draw is a valid
    /// parameter set, including `th_low < th_high` for the worst pairing.
    pub fn validate(&self) -> Result<()> {
        for (name, i) in self.fields() {
            if !(i.min.is_finite() && i.max.is_finite()) || i.min > i.max {
                return Err(Error::param(format!("range for {name} is invalid: [{}, {}]", i.min, i.max)));
            }
        }
        self.corner(false).validate()?;
        self.corner(true).validate()?;
        if self.th_low.max >= self.th_high.min {
            return Err(Error::param(format!(
                "th_low range [{}, {}] overlaps th_high range [{}, {}]",
                self.th_low.min, self.th_low.max, self.th_high.min, self.th_high.max
            )));
        }
        Ok(())
    }
}

/// Draw one parameter set, each field independently and uniformly, in
/// declaration order.
pub fn sample_device_params<R: Rng + ?Sized>(r: &ParamRanges, rng: &mut R) -> Result<DeviceParams> {
    r.validate()?;
    Ok(sample_unchecked(r, rng))
}

pub(crate) fn sample_unchecked<R: Rng + ?Sized>(r: &ParamRanges, rng: &mut R) -> DeviceParams {
    DeviceParams {
        epsilon: r.epsilon.sample(rng),
        theta: r.theta.sample(rng),
        gamma: r.gamma.sample(rng),
        delta: r.delta.sample(rng),
        lambda: r.lambda.sample(rng),
        eta: r.eta.sample(rng),
        tau: r.tau.sample(rng),
        th_low: r.th_low.sample(rng),
        th_high: r.th_high.sample(rng),
        g_floor: r.g_floor.sample(rng),
    }
}

use serde::{Deserialize, Serialize};

use super::{GridState, SimError};

/// Which shedding estimate the relay applies once armed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    /// Per-substation amounts from local irradiance and load.
    Proposed,
    /// Fixed inertia taken from a benchmark operating point.
    Conventional { benchmark_inertia_s: f64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Conventional { .. } => "conventional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    pub threshold_hz: f64,
    /// Arming-to-actuation delay in cycles of nominal frequency, breaker time included.
    pub delay_cycles: u32,
    pub scheme: Scheme,
}

impl RelayConfig {
    pub fn validate(&self, nominal_frequency: f64) -> Result<(), SimError> {
        if !(self.threshold_hz.is_finite() && self.threshold_hz > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "relay threshold must be a positive frequency, got {}",
                self.threshold_hz
            )));
        }
        if self.threshold_hz >= nominal_frequency {
            return Err(SimError::InvalidConfig(format!(
                "relay threshold {} Hz must be below nominal {} Hz",
                self.threshold_hz, nominal_frequency
            )));
        }
        if let Scheme::Conventional {
            benchmark_inertia_s,
        } = self.scheme
        {
            if !(benchmark_inertia_s.is_finite() && benchmark_inertia_s > 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "benchmark inertia must be positive, got {benchmark_inertia_s}"
                )));
            }
        }
        Ok(())
    }

    pub fn delay_s(&self, nominal_frequency: f64) -> f64 {
        f64::from(self.delay_cycles) / nominal_frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelayEvent {
    /// First crossing below threshold; the shed amount is fixed now.
    Armed { arm_time: f64, actuation_time: f64 },
    /// The armed amount is applied.
    Actuate,
}

/// Slack when comparing the step clock to an actuation time.
const ACTUATION_EPS: f64 = 1e-9;

/// Inspects the state after a step and reports the relay event due, if any.
pub fn relay_check(
    state: &GridState,
    relay: &RelayConfig,
    nominal_frequency: f64,
) -> Option<RelayEvent> {
    if let Some(pending) = &state.pending_dr {
        return (state.t + ACTUATION_EPS >= pending.actuation_time).then_some(RelayEvent::Actuate);
    }
    if !state.triggered && state.frequency(nominal_frequency) < relay.threshold_hz {
        return Some(RelayEvent::Armed {
            arm_time: state.t,
            actuation_time: state.t + relay.delay_s(nominal_frequency),
        });
    }
    None
}

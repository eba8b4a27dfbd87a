//! Aggregate single-bus frequency simulator.
//!
//! The continuous state is the frequency deviation and the governor output.
//! Both are integrated with fixed-step RK4. Discrete inputs (the generation
//! trip and shed load) only change at step boundaries, and steps that cross
//! a governor kink (deadband edge or headroom saturation) are split at the
//! crossing so every RK4 sub-step sees a smooth right-hand side.

mod integrator;
mod relay;
mod rocof;
mod schemes;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{DrDecision, EstimationError, Substation, SystemParams};
use crate::pv_model::PvCurve;
use crate::scenario::ScenarioConfig;

pub use integrator::rk4_step;
pub use relay::{relay_check, RelayConfig, RelayEvent, Scheme};
pub use rocof::{measure_rocof, DEFAULT_ROCOF_WINDOW_S};
pub use schemes::{allocate_by_share, conventional_ufls_total, proposed_dr_total};

/// Largest step accepted by [`GridModel::step`].
pub const MAX_STEP_S: f64 = 0.01;

/// Deviation from nominal at which a run is declared unstable.
pub const BLOW_UP_DEVIATION_HZ: f64 = 5.0;

const MAX_SPLITS_PER_STEP: usize = 4;
const BISECTION_ITERS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("numerical blow-up at t={t:.4} s: frequency deviation {deviation:.3} Hz exceeds {BLOW_UP_DEVIATION_HZ} Hz")]
    NumericalBlowUp { t: f64, deviation: f64 },
    #[error("window underpopulated: {samples} sample(s) in the ROCOF window")]
    WindowUnderpopulated { samples: usize },
    #[error("invalid step: dt={0} s (must be in (0, {MAX_STEP_S}])")]
    InvalidStep(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

impl SimError {
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            SimError::NumericalBlowUp { .. } | SimError::WindowUnderpopulated { .. }
        )
    }
}

/// Deadbanded droop governor with a first-order lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorParams {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub droop_pu: f64,
    /// Half-width of the deadband around nominal.
    pub deadband_hz: f64,
    pub time_constant_s: f64,
    pub headroom_mw: f64,
}

fn default_true() -> bool {
    true
}

impl Default for GovernorParams {
    fn default() -> Self {
        Self {
            enabled: true,
            droop_pu: 0.05,
            deadband_hz: 0.036,
            time_constant_s: 8.0,
            headroom_mw: 300.0,
        }
    }
}

impl GovernorParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(format!("governor: {msg}")));
        if !(self.droop_pu.is_finite() && self.droop_pu > 0.0) {
            return bad(format!("droop_pu must be positive, got {}", self.droop_pu));
        }
        if !(self.deadband_hz.is_finite() && self.deadband_hz >= 0.0) {
            return bad(format!(
                "deadband_hz must be nonnegative, got {}",
                self.deadband_hz
            ));
        }
        if !(self.time_constant_s.is_finite() && self.time_constant_s > 0.0) {
            return bad(format!(
                "time_constant_s must be positive, got {}",
                self.time_constant_s
            ));
        }
        if !(self.headroom_mw.is_finite() && self.headroom_mw >= 0.0) {
            return bad(format!(
                "headroom_mw must be nonnegative, got {}",
                self.headroom_mw
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contingency {
    pub time_s: f64,
    pub generation_loss_mw: f64,
}

impl Contingency {
    pub fn validate(&self, horizon: f64) -> Result<(), SimError> {
        if !(self.generation_loss_mw.is_finite() && self.generation_loss_mw > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "contingency generation_loss_mw must be positive, got {}",
                self.generation_loss_mw
            )));
        }
        if !(self.time_s >= 0.0 && self.time_s < horizon) {
            return Err(SimError::InvalidConfig(format!(
                "contingency time {} s outside simulation horizon [0, {horizon}) s",
                self.time_s
            )));
        }
        Ok(())
    }
}

/// An armed relay waiting for its delay to elapse.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingDr {
    pub arm_time: f64,
    pub actuation_time: f64,
    pub decision: DrDecision,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridState {
    pub t: f64,
    /// Frequency minus nominal, in Hz.
    pub frequency_deviation: f64,
    pub governor_response: f64,
    pub shed_total: f64,
    pub pending_dr: Option<PendingDr>,
    pub triggered: bool,
}

impl GridState {
    pub fn frequency(&self, nominal_frequency: f64) -> f64 {
        nominal_frequency + self.frequency_deviation
    }

    pub fn validate(&self, nominal_frequency: f64) -> Result<(), SimError> {
        if !(self.shed_total >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "shed total must be nonnegative, got {}",
                self.shed_total
            )));
        }
        if !(self.frequency(nominal_frequency) > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "frequency must be positive, got {}",
                self.frequency(nominal_frequency)
            )));
        }
        if self.pending_dr.is_some() && !self.triggered {
            return Err(SimError::InvalidConfig(
                "pending shedding without a threshold crossing".into(),
            ));
        }
        Ok(())
    }
}

/// Physical constants of the aggregate bus for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    pub nominal_frequency: f64,
    /// True system inertia for the run, from the actual PV output.
    pub inertia: f64,
    pub system_load: f64,
    /// Load damping: per-unit power change per per-unit frequency change.
    pub damping_pu: f64,
    pub governor: GovernorParams,
    /// Droop gain in MW/Hz on the online conventional generation.
    pub governor_gain: f64,
    pub contingency: Option<Contingency>,
}

impl GridModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("nominal frequency", self.nominal_frequency)?;
        positive("system inertia", self.inertia)?;
        positive("system load", self.system_load)?;
        if !(self.damping_pu.is_finite() && self.damping_pu >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "damping must be nonnegative, got {}",
                self.damping_pu
            )));
        }
        if !(self.governor_gain.is_finite() && self.governor_gain >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "governor gain must be nonnegative, got {}",
                self.governor_gain
            )));
        }
        self.governor.validate()
    }

    /// Generation lost at a step starting at `t`.
    pub fn generation_loss(&self, t: f64) -> f64 {
        match self.contingency {
            Some(c) if t + 1e-9 >= c.time_s => c.generation_loss_mw,
            _ => 0.0,
        }
    }

    fn governor_active(&self) -> bool {
        self.governor.enabled && self.governor_gain > 0.0
    }

    /// Steady governor target for a deviation, before the lag.
    pub fn governor_demand(&self, deviation: f64) -> f64 {
        if !self.governor_active() {
            return 0.0;
        }
        let outside = (deviation.abs() - self.governor.deadband_hz).max(0.0);
        let demand = -deviation.signum() * self.governor_gain * outside;
        demand.clamp(-self.governor.headroom_mw, self.governor.headroom_mw)
    }

    /// Net power surplus (MW) on the bus.
    pub fn net_power(&self, deviation: f64, governor: f64, loss: f64, shed: f64) -> f64 {
        -loss + governor + shed
            - self.damping_pu * deviation / self.nominal_frequency * self.system_load
    }

    fn derivative(&self, y: &[f64; 2], loss: f64, shed: f64) -> [f64; 2] {
        let (deviation, governor) = (y[0], y[1]);
        let swing = self.nominal_frequency / (2.0 * self.inertia * self.system_load);
        let d_dev = swing * self.net_power(deviation, governor, loss, shed);
        let d_gov = if self.governor_active() {
            (self.governor_demand(deviation) - governor) / self.governor.time_constant_s
        } else {
            0.0
        };
        [d_dev, d_gov]
    }

    /// Smooth region of the governor characteristic containing `deviation`.
    fn regime(&self, deviation: f64) -> i8 {
        if !self.governor_active() {
            return 0;
        }
        let magnitude = deviation.abs();
        let band = if magnitude <= self.governor.deadband_hz {
            0
        } else if magnitude
            <= self.governor.deadband_hz + self.governor.headroom_mw / self.governor_gain
        {
            1
        } else {
            2
        };
        band * deviation.signum() as i8
    }

    /// Advances the continuous state by `dt`, holding the loss and shed fixed.
    pub fn step(&self, state: &GridState, dt: f64) -> Result<GridState, SimError> {
        if !(dt > 0.0 && dt <= MAX_STEP_S) {
            return Err(SimError::InvalidStep(dt));
        }
        let loss = self.generation_loss(state.t);
        let shed = state.shed_total;
        let f = |y: &[f64; 2]| self.derivative(y, loss, shed);

        let mut y = [state.frequency_deviation, state.governor_response];
        let mut remaining = dt;
        for _ in 0..=MAX_SPLITS_PER_STEP {
            let trial = rk4_step(y, remaining, f);
            let start_regime = self.regime(y[0]);
            if self.regime(trial[0]) == start_regime {
                y = trial;
                remaining = 0.0;
                break;
            }
            // bracket the first sub-step length that leaves the starting regime
            let (mut lo, mut hi) = (0.0, remaining);
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if self.regime(rk4_step(y, mid, f)[0]) == start_regime {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            y = rk4_step(y, hi, f);
            remaining -= hi;
            if remaining <= 0.0 {
                break;
            }
        }
        if remaining > 0.0 {
            y = rk4_step(y, remaining, f);
        }

        let t = state.t + dt;
        if !y[0].is_finite() || y[0].abs() > BLOW_UP_DEVIATION_HZ {
            return Err(SimError::NumericalBlowUp { t, deviation: y[0] });
        }
        Ok(GridState {
            t,
            frequency_deviation: y[0],
            governor_response: y[1],
            ..state.clone()
        })
    }
}

/// Everything a single run needs, resolved from a scenario.
#[derive(Debug, Clone)]
pub struct SimInput {
    pub id: String,
    pub params: SystemParams,
    pub model: GridModel,
    pub relay: RelayConfig,
    pub substations: Vec<Substation>,
    pub curve: PvCurve,
    /// Irradiance clock time at simulation time zero.
    pub series_offset_s: f64,
    pub rocof_window_s: f64,
    pub dt_s: f64,
    pub horizon_s: f64,
    pub output_interval_s: f64,
    pub true_pv_output_mw: f64,
    pub true_penetration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub frequency: f64,
    pub governor_mw: f64,
    pub shed_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub id: String,
    pub scheme: Scheme,
    pub trace: Vec<TracePoint>,
    pub nadir: f64,
    pub settling_frequency: f64,
    pub shed_total: f64,
    /// Net power deficit on the bus at arming (MW, positive for a deficit).
    pub true_imbalance_at_trigger: Option<f64>,
    /// Shed amount the scheme computed at arming.
    pub estimated_imbalance: Option<f64>,
    pub rocof_at_trigger: Option<f64>,
    pub trigger_time: Option<f64>,
    pub actuation_time: Option<f64>,
    pub decision: Option<DrDecision>,
    pub true_penetration: f64,
    pub true_inertia: f64,
    pub generation_loss_mw: f64,
}

impl SimResult {
    /// Imbalance used to score shedding accuracy: the deficit at arming, or
    /// the tripped generation when the relay never armed.
    pub fn reference_imbalance(&self) -> Option<f64> {
        self.true_imbalance_at_trigger
            .or((self.generation_loss_mw > 0.0).then_some(self.generation_loss_mw))
    }

    /// `(shed − |imbalance|) / |imbalance| × 100`.
    pub fn shed_error_pct(&self) -> Option<f64> {
        self.reference_imbalance()
            .map(|imb| (self.shed_total - imb.abs()) / imb.abs() * 100.0)
    }
}

impl SimResult {
    /// Checks the summary metrics against the trace they came from.
    pub fn validate(&self, horizon_s: f64) -> Result<(), SimError> {
        if self.trace.is_empty() {
            return Err(SimError::InvalidConfig("result has an empty trace".into()));
        }
        if self.nadir != trace_nadir(&self.trace) {
            return Err(SimError::InvalidConfig(format!(
                "nadir {} is not the trace minimum {}",
                self.nadir,
                trace_nadir(&self.trace)
            )));
        }
        let settling = settling(&self.trace, horizon_s);
        if (self.settling_frequency - settling).abs() > 1e-9 * settling.abs() {
            return Err(SimError::InvalidConfig(format!(
                "settling frequency {} differs from the final-10% mean {settling}",
                self.settling_frequency
            )));
        }
        if !(self.shed_total >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "shed total must be nonnegative, got {}",
                self.shed_total
            )));
        }
        Ok(())
    }
}

impl SimInput {
    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        self.model.validate()?;
        self.relay.validate(self.model.nominal_frequency)?;
        if !(self.dt_s > 0.0 && self.dt_s <= MAX_STEP_S) {
            return Err(SimError::InvalidStep(self.dt_s));
        }
        if !(self.horizon_s.is_finite() && self.horizon_s >= self.dt_s) {
            return Err(SimError::InvalidConfig(format!(
                "horizon {} s must be at least one step",
                self.horizon_s
            )));
        }
        if !(self.rocof_window_s > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "ROCOF window must be positive, got {}",
                self.rocof_window_s
            )));
        }
        if let Some(c) = self.model.contingency {
            c.validate(self.horizon_s)?;
        }
        Ok(())
    }

    /// Shed amount for the configured scheme given the ROCOF at arming.
    pub fn decide(&self, rocof: f64, arm_time: f64) -> Result<DrDecision, SimError> {
        let decision = match self.relay.scheme {
            Scheme::Proposed => proposed_dr_total(
                &self.substations,
                &self.params,
                &self.curve,
                rocof,
                self.series_offset_s + arm_time,
            )?,
            Scheme::Conventional {
                benchmark_inertia_s,
            } => {
                let total = conventional_ufls_total(
                    &self.params,
                    benchmark_inertia_s,
                    rocof,
                    self.model.system_load,
                )?;
                allocate_by_share(&self.substations, total)?
            }
        };
        Ok(decision)
    }
}

/// Runs one resolved scenario to the horizon.
pub fn simulate(input: &SimInput) -> Result<SimResult, SimError> {
    input.validate()?;
    let model = &input.model;
    let f_n = model.nominal_frequency;
    let dt = input.dt_s;
    let n_steps = (input.horizon_s / dt).round() as usize;
    let record_every = ((input.output_interval_s / dt).round() as usize).max(1);
    let window_steps = (input.rocof_window_s / dt).ceil() as usize + 2;

    let mut state = GridState::default();
    let mut history: Vec<(f64, f64)> = Vec::with_capacity(n_steps + 1);
    let mut trace = Vec::with_capacity(n_steps / record_every + 2);
    history.push((0.0, f_n));
    trace.push(trace_point(&state, f_n));

    let mut true_imbalance = None;
    let mut rocof_at_trigger = None;
    let mut trigger_time = None;
    let mut actuation_time = None;
    let mut decision_made = None;

    for k in 0..n_steps {
        state = model.step(&state, dt)?;
        state.t = (k + 1) as f64 * dt;
        history.push((state.t, state.frequency(f_n)));

        if let Some(RelayEvent::Armed {
            arm_time,
            actuation_time: due,
        }) = relay_check(&state, &input.relay, f_n)
        {
            let tail = &history[history.len().saturating_sub(window_steps)..];
            let rocof = measure_rocof(tail, arm_time, input.rocof_window_s)?;
            let decision = input.decide(rocof, arm_time)?;
            let net = model.net_power(
                state.frequency_deviation,
                state.governor_response,
                model.generation_loss(state.t),
                state.shed_total,
            );
            true_imbalance = Some(-net);
            rocof_at_trigger = Some(rocof);
            trigger_time = Some(arm_time);
            decision_made = Some(decision.clone());
            state.triggered = true;
            state.pending_dr = Some(PendingDr {
                arm_time,
                actuation_time: due,
                decision,
            });
        }
        if let Some(RelayEvent::Actuate) = relay_check(&state, &input.relay, f_n) {
            let pending = state
                .pending_dr
                .take()
                .expect("actuation requires a pending decision");
            state.shed_total += pending.decision.total;
            actuation_time = Some(state.t);
        }

        if (k + 1) % record_every == 0 || k + 1 == n_steps {
            trace.push(trace_point(&state, f_n));
        }
    }

    let nadir = trace_nadir(&trace);
    let settling_frequency = settling(&trace, input.horizon_s);
    Ok(SimResult {
        id: input.id.clone(),
        scheme: input.relay.scheme,
        nadir,
        settling_frequency,
        shed_total: state.shed_total,
        estimated_imbalance: decision_made.as_ref().map(|d| d.total),
        true_imbalance_at_trigger: true_imbalance,
        rocof_at_trigger,
        trigger_time,
        actuation_time,
        decision: decision_made,
        true_penetration: input.true_penetration,
        true_inertia: model.inertia,
        generation_loss_mw: model.contingency.map_or(0.0, |c| c.generation_loss_mw),
        trace,
    })
}

fn trace_nadir(trace: &[TracePoint]) -> f64 {
    trace
        .iter()
        .map(|p| p.frequency)
        .fold(f64::INFINITY, f64::min)
}

fn trace_point(state: &GridState, f_n: f64) -> TracePoint {
    TracePoint {
        t: state.t,
        frequency: state.frequency(f_n),
        governor_mw: state.governor_response,
        shed_mw: state.shed_total,
    }
}

/// Mean frequency over the final 10 % of the horizon.
fn settling(trace: &[TracePoint], horizon: f64) -> f64 {
    let cutoff = 0.9 * horizon - 1e-9;
    let tail: Vec<f64> = trace
        .iter()
        .filter(|p| p.t >= cutoff)
        .map(|p| p.frequency)
        .collect();
    if tail.is_empty() {
        return trace.last().map_or(f64::NAN, |p| p.frequency);
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Resolves and runs a scenario.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimResult, crate::Error> {
    let input = config.prepare()?;
    Ok(simulate(&input)?)
}

/// A scenario that failed inside a batch.
#[derive(Debug, Error)]
#[error("scenario `{id}` failed: {source}")]
pub struct BatchError {
    pub id: String,
    #[source]
    pub source: crate::Error,
}

/// Runs scenarios concurrently; results come back in input order.
pub fn run_batch(
    configs: &[ScenarioConfig],
    workers: Option<usize>,
) -> Result<Vec<SimResult>, BatchError> {
    let run = || {
        configs
            .par_iter()
            .map(|c| {
                run_simulation(c).map_err(|source| BatchError {
                    id: c.id.clone(),
                    source,
                })
            })
            .collect::<Vec<_>>()
    };
    let results = match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    };
    // report the first failure in scenario order
    results.into_iter().collect()
}

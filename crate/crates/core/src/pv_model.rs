//! Irradiance series, the per-unit PV output curve and plant output.
//!
//! Irradiance is smoothed with a trailing moving average (default ten
//! minutes) before it is mapped through the output curve, so short cloud
//! transients do not reach the estimator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default trailing averaging window for irradiance, in seconds.
pub const DEFAULT_AVERAGING_WINDOW_S: f64 = 600.0;

/// Upper plausibility bound for irradiance samples, in W/m².
pub const MAX_IRRADIANCE_WM2: f64 = 1500.0;

// Relative slack used when checking sample spacing and window edges.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PvError {
    #[error("no samples")]
    NoSamples,
    #[error("time out of range: t={t} s (series covers {first} s to {last} s)")]
    TimeOutOfRange { t: f64, first: f64, last: f64 },
    #[error("negative irradiance: {0} W/m²")]
    NegativeIrradiance(f64),
    #[error("irradiance {value} W/m² at t={t} s exceeds plausibility bound of {MAX_IRRADIANCE_WM2} W/m²")]
    ImplausibleIrradiance { t: f64, value: f64 },
    #[error("invalid irradiance series: {0}")]
    InvalidSeries(String),
    #[error("invalid PV curve: {0}")]
    InvalidCurve(String),
    #[error("invalid averaging window: {0} s")]
    InvalidWindow(f64),
    #[error("plant `{id}`: capacity must be positive, got {capacity_mw} MW")]
    InvalidCapacity { id: String, capacity_mw: f64 },
}

/// Uniformly sampled irradiance measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceSeries {
    start: f64,
    interval: f64,
    values: Vec<f64>,
}

impl IrradianceSeries {
    /// Builds a series from samples taken every `interval` seconds starting at `start`.
    pub fn uniform(start: f64, interval: f64, values: Vec<f64>) -> Result<Self, PvError> {
        if !(interval.is_finite() && interval > 0.0) {
            return Err(PvError::InvalidSeries(format!(
                "sample interval must be positive, got {interval}"
            )));
        }
        if !start.is_finite() {
            return Err(PvError::InvalidSeries("non-finite start time".into()));
        }
        for (k, &value) in values.iter().enumerate() {
            let t = start + k as f64 * interval;
            check_irradiance(t, value)?;
        }
        Ok(Self {
            start,
            interval,
            values,
        })
    }

    /// Builds a series from explicit `(time, irradiance)` pairs.
    ///
    /// Times must be strictly increasing with uniform spacing; the spacing of
    /// the first two samples sets the interval. A single sample gets
    /// `default_interval`.
    pub fn from_samples(samples: &[(f64, f64)], default_interval: f64) -> Result<Self, PvError> {
        let Some(&(start, _)) = samples.first() else {
            return Self::uniform(0.0, default_interval, Vec::new());
        };
        let interval = match samples.get(1) {
            Some(&(t1, _)) => t1 - start,
            None => default_interval,
        };
        if !(interval > 0.0) {
            return Err(PvError::InvalidSeries(
                "sample times must be strictly increasing".into(),
            ));
        }
        for (k, pair) in samples.windows(2).enumerate() {
            let dt = pair[1].0 - pair[0].0;
            if dt <= 0.0 {
                return Err(PvError::InvalidSeries(format!(
                    "sample times must be strictly increasing (row {})",
                    k + 1
                )));
            }
            if (dt - interval).abs() > 1e-6 * interval {
                return Err(PvError::InvalidSeries(format!(
                    "non-uniform spacing at row {}: {dt} s vs {interval} s",
                    k + 1
                )));
            }
        }
        Self::uniform(start, interval, samples.iter().map(|s| s.1).collect())
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn sample_interval(&self) -> f64 {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.interval
    }

    /// `(time, irradiance)` pairs in order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| (self.time_at(k), v))
    }

    pub fn last_time(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.time_at(self.values.len() - 1))
    }

    /// Copy of the series with every sample shifted by `bias` W/m², floored at zero.
    pub fn with_bias(&self, bias: f64) -> Result<Self, PvError> {
        let values = self.values.iter().map(|v| (v + bias).max(0.0)).collect();
        Self::uniform(self.start, self.interval, values)
    }

    /// Trailing arithmetic mean of the samples in `(t - window, t]`.
    ///
    /// Near the start of the series only the available samples are averaged.
    pub fn moving_average(&self, t: f64, window: f64) -> Result<f64, PvError> {
        if !(window.is_finite() && window > 0.0) {
            return Err(PvError::InvalidWindow(window));
        }
        let last = self.last_time().ok_or(PvError::NoSamples)?;
        let out_of_range = PvError::TimeOutOfRange {
            t,
            first: self.start,
            last,
        };
        let pos = (t - self.start) / self.interval;
        if !pos.is_finite() || pos < -TIME_EPS {
            return Err(out_of_range);
        }
        let hi = ((pos + TIME_EPS).floor() as usize).min(self.values.len() - 1);
        let lo_pos = (t - window - self.start) / self.interval;
        let lo = if lo_pos < 0.0 {
            0
        } else {
            (lo_pos + TIME_EPS).floor() as usize + 1
        };
        if lo > hi {
            return Err(out_of_range);
        }
        let window_samples = &self.values[lo..=hi];
        Ok(window_samples.iter().sum::<f64>() / window_samples.len() as f64)
    }
}

fn check_irradiance(t: f64, value: f64) -> Result<(), PvError> {
    if value.is_nan() || value < 0.0 {
        return Err(PvError::NegativeIrradiance(value));
    }
    if value > MAX_IRRADIANCE_WM2 {
        return Err(PvError::ImplausibleIrradiance { t, value });
    }
    Ok(())
}

/// Piecewise-linear per-unit PV output versus irradiance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvCurve {
    /// Irradiance at which output reaches 1.0 per unit.
    pub rated_irradiance_wm2: f64,
    /// `[irradiance_wm2, per_unit]` knots, starting at `[0, 0]` and ending at the rated point.
    pub knots: Vec<[f64; 2]>,
}

impl Default for PvCurve {
    fn default() -> Self {
        Self::linear(1000.0).expect("default curve is valid")
    }
}

impl PvCurve {
    /// Single segment from (0, 0) to (rated, 1).
    pub fn linear(rated_irradiance_wm2: f64) -> Result<Self, PvError> {
        Self::new(
            rated_irradiance_wm2,
            vec![[0.0, 0.0], [rated_irradiance_wm2, 1.0]],
        )
    }

    pub fn new(rated_irradiance_wm2: f64, knots: Vec<[f64; 2]>) -> Result<Self, PvError> {
        let curve = Self {
            rated_irradiance_wm2,
            knots,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), PvError> {
        let bad = |msg: String| Err(PvError::InvalidCurve(msg));
        let rated = self.rated_irradiance_wm2;
        if !(rated.is_finite() && rated > 0.0) {
            return bad(format!("rated irradiance must be positive, got {rated}"));
        }
        if self.knots.len() < 2 {
            return bad("at least two knots are required".into());
        }
        if self.knots[0] != [0.0, 0.0] {
            return bad(format!(
                "first knot must be [0, 0], got {:?}",
                self.knots[0]
            ));
        }
        let last = self.knots[self.knots.len() - 1];
        if last != [rated, 1.0] {
            return bad(format!(
                "last knot must be [{rated}, 1] (the rated point), got {last:?}"
            ));
        }
        for pair in self.knots.windows(2) {
            let ([x0, y0], [x1, y1]) = (pair[0], pair[1]);
            if !(x1 > x0) {
                return bad(format!("knot irradiance must increase: {x0} then {x1}"));
            }
            if !(y1 >= y0) {
                return bad(format!("curve must be nondecreasing: {y0} then {y1}"));
            }
            if !(0.0..=1.0).contains(&y1) {
                return bad(format!("per-unit output {y1} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Per-unit output at smoothed irradiance `r_bar`.
    pub fn per_unit_output(&self, r_bar: f64) -> Result<f64, PvError> {
        if r_bar.is_nan() || r_bar < 0.0 {
            return Err(PvError::NegativeIrradiance(r_bar));
        }
        if r_bar >= self.rated_irradiance_wm2 {
            return Ok(1.0);
        }
        let seg = self
            .knots
            .windows(2)
            .find(|pair| r_bar <= pair[1][0])
            .expect("r_bar below rated lies inside some segment");
        let ([x0, y0], [x1, y1]) = (seg[0], seg[1]);
        Ok(y0 + (y1 - y0) * (r_bar - x0) / (x1 - x0))
    }
}

/// Free-function form of [`PvCurve::per_unit_output`].
pub fn pv_per_unit_output(curve: &PvCurve, r_bar: f64) -> Result<f64, PvError> {
    curve.per_unit_output(r_bar)
}

/// Free-function form of [`IrradianceSeries::moving_average`].
pub fn moving_average(series: &IrradianceSeries, t: f64, window: f64) -> Result<f64, PvError> {
    series.moving_average(t, window)
}

/// A utility-scale PV plant and the irradiance it sees.
#[derive(Debug, Clone, PartialEq)]
pub struct PvPlant {
    pub id: String,
    pub capacity_mw: f64,
    pub irradiance: IrradianceSeries,
}

impl PvPlant {
    pub fn new(
        id: impl Into<String>,
        capacity_mw: f64,
        irradiance: IrradianceSeries,
    ) -> Result<Self, PvError> {
        let id = id.into();
        if !(capacity_mw.is_finite() && capacity_mw > 0.0) {
            return Err(PvError::InvalidCapacity { id, capacity_mw });
        }
        Ok(Self {
            id,
            capacity_mw,
            irradiance,
        })
    }

    /// Output in MW at time `t`, using the default averaging window.
    pub fn output(&self, curve: &PvCurve, t: f64) -> Result<f64, PvError> {
        plant_output(self, curve, t)
    }
}

/// `capacity × φ(r̄(t))` with the default ten-minute trailing average.
pub fn plant_output(plant: &PvPlant, curve: &PvCurve, t: f64) -> Result<f64, PvError> {
    let r_bar = plant
        .irradiance
        .moving_average(t, DEFAULT_AVERAGING_WINDOW_S)?;
    Ok(plant.capacity_mw * curve.per_unit_output(r_bar)?)
}

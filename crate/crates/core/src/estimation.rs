//! Inertia, imbalance and per-substation demand-response estimation.
//!
//! Every substation works from its own measurements only: its net load,
//! its irradiance sensor and a handful of system constants. The functions
//! here are pure; the simulator calls them at relay arming.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pv_model::{IrradianceSeries, PvCurve, PvError, DEFAULT_AVERAGING_WINDOW_S};

/// Tolerance on `Σ ρ_i = 1`.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("nonpositive system load: {0} MW")]
    NonPositiveSystemLoad(f64),
    #[error("PV output exceeds load: {pv_mw} MW of PV against {load_mw} MW of load")]
    PvExceedsLoad { pv_mw: f64, load_mw: f64 },
    #[error("penetration out of range: {0}")]
    PenetrationOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("demand-response shares must sum to 1 (got {sum}); substations: {ids}")]
    SharesDoNotSumToOne { sum: f64, ids: String },
    #[error(transparent)]
    Pv(#[from] PvError),
}

/// Static grid constants shared by every substation controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Average per-unit inertia constant of conventional generation.
    #[serde(rename = "generator_inertia_s")]
    pub generator_inertia: f64,
    /// Average per-unit inertia constant of load.
    #[serde(rename = "load_inertia_s")]
    pub load_inertia: f64,
    #[serde(rename = "nominal_frequency_hz")]
    pub nominal_frequency: f64,
    /// Installed PV capacity across the whole system (utility plus distributed).
    #[serde(rename = "installed_pv_mw")]
    pub installed_pv: f64,
}

impl SystemParams {
    pub fn new(
        generator_inertia: f64,
        load_inertia: f64,
        nominal_frequency: f64,
        installed_pv: f64,
    ) -> Result<Self, EstimationError> {
        let params = Self {
            generator_inertia,
            load_inertia,
            nominal_frequency,
            installed_pv,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad =
            |msg: &str, v: f64| Err(EstimationError::InvalidParameter(format!("{msg}, got {v}")));
        if !(self.generator_inertia.is_finite() && self.generator_inertia > 0.0) {
            return bad(
                "generator_inertia_s must be positive",
                self.generator_inertia,
            );
        }
        if !(self.load_inertia.is_finite() && self.load_inertia >= 0.0) {
            return bad("load_inertia_s must be nonnegative", self.load_inertia);
        }
        if !(self.nominal_frequency.is_finite() && self.nominal_frequency > 0.0) {
            return bad(
                "nominal_frequency_hz must be positive",
                self.nominal_frequency,
            );
        }
        if !(self.installed_pv.is_finite() && self.installed_pv >= 0.0) {
            return bad("installed_pv_mw must be nonnegative", self.installed_pv);
        }
        Ok(())
    }

    /// Inertia with no PV online: generators plus load.
    pub fn base_inertia(&self) -> f64 {
        self.generator_inertia + self.load_inertia
    }
}

/// The local view of one demand-response substation.
#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub id: String,
    /// Measured load, already offset by behind-the-substation PV. May be negative.
    pub net_load_mw: f64,
    pub dist_pv_mw: f64,
    /// The substation's own irradiance sensor.
    pub irradiance: IrradianceSeries,
    /// Share of system demand response carried here.
    pub rho: f64,
    /// System load ≈ `load_gain` × substation total load.
    pub load_gain: f64,
}

impl Substation {
    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |msg: String| {
            Err(EstimationError::InvalidParameter(format!(
                "substation `{}`: {msg}",
                self.id
            )))
        };
        if !self.net_load_mw.is_finite() {
            return bad(format!("net load must be finite, got {}", self.net_load_mw));
        }
        if !(self.dist_pv_mw.is_finite() && self.dist_pv_mw >= 0.0) {
            return bad(format!(
                "distributed PV must be nonnegative, got {}",
                self.dist_pv_mw
            ));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !(self.load_gain.is_finite() && self.load_gain > 0.0) {
            return bad(format!(
                "load gain must be positive, got {}",
                self.load_gain
            ));
        }
        Ok(())
    }
}

/// Checks that the demand-response shares of `ids`/`shares` sum to one.
pub fn validate_shares<'a>(
    shares: impl IntoIterator<Item = (&'a str, f64)>,
) -> Result<(), EstimationError> {
    let (ids, sum) = shares
        .into_iter()
        .fold((Vec::new(), 0.0), |(mut ids, sum), (id, rho)| {
            ids.push(id);
            (ids, sum + rho)
        });
    if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
        return Err(EstimationError::SharesDoNotSumToOne {
            sum,
            ids: ids.join(", "),
        });
    }
    Ok(())
}

/// Signed imbalance with the quantities used to compute it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceEstimate {
    /// Signed: negative for a generation deficit (negative ROCOF).
    pub value: f64,
    pub h_system: f64,
    pub mu_pv: f64,
    pub rocof: f64,
}

impl ImbalanceEstimate {
    /// Deficit to be covered by shedding, zero for surplus events.
    pub fn shed_requirement(&self) -> f64 {
        (-self.value).max(0.0)
    }
}

/// Per-substation shed amounts and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct DrDecision {
    pub per_substation: Vec<(String, f64)>,
    pub total: f64,
}

impl DrDecision {
    pub fn new(per_substation: Vec<(String, f64)>) -> Result<Self, EstimationError> {
        let total = per_substation.iter().map(|(_, mw)| mw).sum();
        let decision = Self {
            per_substation,
            total,
        };
        decision.validate()?;
        Ok(decision)
    }

    pub fn empty() -> Self {
        Self {
            per_substation: Vec::new(),
            total: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if let Some((id, mw)) = self
            .per_substation
            .iter()
            .find(|(_, mw)| !(mw.is_finite() && *mw >= 0.0))
        {
            return Err(EstimationError::InvalidParameter(format!(
                "shed at `{id}` must be nonnegative, got {mw}"
            )));
        }
        let sum: f64 = self.per_substation.iter().map(|(_, mw)| mw).sum();
        if (self.total - sum).abs() > 1e-9 * sum.abs().max(1.0) {
            return Err(EstimationError::InvalidParameter(format!(
                "decision total {} does not match sum of shares {sum}",
                self.total
            )));
        }
        Ok(())
    }
}

/// One substation's mapping residuals (true minus local estimate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub rho: f64,
    pub load_error_mw: f64,
    pub pv_error_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstationResidual {
    pub id: String,
    pub pv_error_mw: f64,
    pub load_error_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub per_substation: Vec<SubstationResidual>,
    pub total_error: f64,
}

impl ErrorReport {
    /// Re-derives the weighted total from the per-substation residuals.
    pub fn validate(
        &self,
        params: &SystemParams,
        rocof: f64,
        rhos: &[f64],
    ) -> Result<(), EstimationError> {
        if rhos.len() != self.per_substation.len() {
            return Err(EstimationError::InvalidParameter(
                "one share per substation residual is required".into(),
            ));
        }
        let residuals: Vec<Residual> = self
            .per_substation
            .iter()
            .zip(rhos)
            .map(|(r, &rho)| Residual {
                rho,
                load_error_mw: r.load_error_mw,
                pv_error_mw: r.pv_error_mw,
            })
            .collect();
        let expected = total_dr_error(params, rocof, &residuals);
        if (expected - self.total_error).abs() > 1e-9 * expected.abs().max(1e-9) {
            return Err(EstimationError::InvalidParameter(format!(
                "total error {} disagrees with weighted residual sum {expected}",
                self.total_error
            )));
        }
        Ok(())
    }
}

/// Instantaneous PV penetration: PV output over system load.
pub fn pv_penetration(total_pv_output: f64, system_load: f64) -> Result<f64, EstimationError> {
    if !(system_load > 0.0) {
        return Err(EstimationError::NonPositiveSystemLoad(system_load));
    }
    if !(total_pv_output >= 0.0) {
        return Err(EstimationError::InvalidParameter(format!(
            "PV output must be nonnegative, got {total_pv_output}"
        )));
    }
    let mu = total_pv_output / system_load;
    if mu > 1.0 {
        return Err(EstimationError::PvExceedsLoad {
            pv_mw: total_pv_output,
            load_mw: system_load,
        });
    }
    Ok(mu)
}

/// System inertia with a fraction `mu_pv` of load served by non-inertial PV.
pub fn system_inertia(params: &SystemParams, mu_pv: f64) -> Result<f64, EstimationError> {
    if !(0.0..=1.0).contains(&mu_pv) {
        return Err(EstimationError::PenetrationOutOfRange(mu_pv));
    }
    Ok(params.generator_inertia * (1.0 - mu_pv) + params.load_inertia)
}

/// Signed imbalance implied by a measured ROCOF at inertia `h_system`.
pub fn imbalance_from_rocof(
    params: &SystemParams,
    h_system: f64,
    rocof: f64,
    system_load: f64,
) -> Result<f64, EstimationError> {
    if !(system_load > 0.0) {
        return Err(EstimationError::NonPositiveSystemLoad(system_load));
    }
    if !(h_system > 0.0) {
        return Err(EstimationError::InvalidParameter(format!(
            "system inertia must be positive, got {h_system}"
        )));
    }
    Ok(2.0 * h_system * rocof / params.nominal_frequency * system_load)
}

/// Imbalance written directly in terms of load and PV output.
pub fn imbalance_expanded(
    params: &SystemParams,
    rocof: f64,
    system_load: f64,
    total_pv_output: f64,
) -> Result<f64, EstimationError> {
    if !(system_load > 0.0) {
        return Err(EstimationError::NonPositiveSystemLoad(system_load));
    }
    if !(total_pv_output >= 0.0) {
        return Err(EstimationError::InvalidParameter(format!(
            "PV output must be nonnegative, got {total_pv_output}"
        )));
    }
    let scale = 2.0 * rocof / params.nominal_frequency;
    Ok(scale * params.base_inertia() * system_load
        - scale * params.generator_inertia * total_pv_output)
}

/// Full composed estimate from true system quantities.
pub fn estimate_imbalance(
    params: &SystemParams,
    rocof: f64,
    system_load: f64,
    total_pv_output: f64,
) -> Result<ImbalanceEstimate, EstimationError> {
    let mu_pv = pv_penetration(total_pv_output, system_load)?;
    let h_system = system_inertia(params, mu_pv)?;
    let value = imbalance_from_rocof(params, h_system, rocof, system_load)?;
    Ok(ImbalanceEstimate {
        value,
        h_system,
        mu_pv,
        rocof,
    })
}

/// System PV output as seen from one substation's smoothed irradiance.
pub fn local_pv_estimate(
    params: &SystemParams,
    curve: &PvCurve,
    r_bar_i: f64,
) -> Result<f64, EstimationError> {
    Ok(curve.per_unit_output(r_bar_i)? * params.installed_pv)
}

/// Substation total load: net load plus the PV output hidden behind it.
pub fn substation_total_load(
    sub: &Substation,
    curve: &PvCurve,
    t: f64,
) -> Result<f64, EstimationError> {
    let r_bar = sub
        .irradiance
        .moving_average(t, DEFAULT_AVERAGING_WINDOW_S)?;
    Ok(sub.net_load_mw + sub.dist_pv_mw * curve.per_unit_output(r_bar)?)
}

/// System load mapped from one substation's total load.
pub fn local_system_load_estimate(
    sub: &Substation,
    total_load_i: f64,
) -> Result<f64, EstimationError> {
    if !total_load_i.is_finite() {
        return Err(EstimationError::InvalidParameter(format!(
            "substation total load must be finite, got {total_load_i}"
        )));
    }
    Ok(sub.load_gain * total_load_i)
}

/// Shed amount for one substation, computed from local measurements only.
///
/// Uses `|rocof|` and never returns a negative amount.
pub fn dr_amount(
    sub: &Substation,
    params: &SystemParams,
    curve: &PvCurve,
    rocof: f64,
    t: f64,
) -> Result<f64, EstimationError> {
    let r_bar = sub
        .irradiance
        .moving_average(t, DEFAULT_AVERAGING_WINDOW_S)?;
    let system_load = local_system_load_estimate(sub, substation_total_load(sub, curve, t)?)?;
    let system_pv = local_pv_estimate(params, curve, r_bar)?;
    Ok(dr_from_estimates(
        params,
        sub.rho,
        rocof,
        system_load,
        system_pv,
    ))
}

/// `ρ · 2|ROCOF|/f_N · (H_base · load − H_G0 · pv)`, clamped at zero.
pub fn dr_from_estimates(
    params: &SystemParams,
    rho: f64,
    rocof: f64,
    system_load: f64,
    system_pv: f64,
) -> f64 {
    let scale = 2.0 * rocof.abs() / params.nominal_frequency;
    let amount =
        rho * scale * (params.base_inertia() * system_load - params.generator_inertia * system_pv);
    amount.max(0.0)
}

/// Error in the summed shed amount caused by the per-substation residuals.
pub fn total_dr_error(params: &SystemParams, rocof: f64, residuals: &[Residual]) -> f64 {
    let weighted_load: f64 = residuals.iter().map(|r| r.rho * r.load_error_mw).sum();
    let weighted_pv: f64 = residuals.iter().map(|r| r.rho * r.pv_error_mw).sum();
    2.0 * rocof / params.nominal_frequency
        * (params.base_inertia() * weighted_load - params.generator_inertia * weighted_pv)
}

/// Residuals of every substation's local estimates against the true system state.
pub fn error_report(
    params: &SystemParams,
    curve: &PvCurve,
    substations: &[Substation],
    rocof: f64,
    t: f64,
    true_system_load: f64,
    true_system_pv: f64,
) -> Result<ErrorReport, EstimationError> {
    let mut per_substation = Vec::with_capacity(substations.len());
    let mut residuals = Vec::with_capacity(substations.len());
    for sub in substations {
        let r_bar = sub
            .irradiance
            .moving_average(t, DEFAULT_AVERAGING_WINDOW_S)?;
        let pv_error_mw = true_system_pv - local_pv_estimate(params, curve, r_bar)?;
        let load_error_mw = true_system_load
            - local_system_load_estimate(sub, substation_total_load(sub, curve, t)?)?;
        residuals.push(Residual {
            rho: sub.rho,
            load_error_mw,
            pv_error_mw,
        });
        per_substation.push(SubstationResidual {
            id: sub.id.clone(),
            pv_error_mw,
            load_error_mw,
        });
    }
    Ok(ErrorReport {
        per_substation,
        total_error: total_dr_error(params, rocof, &residuals),
    })
}

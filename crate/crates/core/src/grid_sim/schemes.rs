//! The two shedding estimates compared by the simulator.

use crate::estimation::{
    dr_amount, imbalance_from_rocof, DrDecision, EstimationError, Substation, SystemParams,
};
use crate::pv_model::PvCurve;

/// Per-substation amounts from local measurements, assembled in input order.
pub fn proposed_dr_total(
    substations: &[Substation],
    params: &SystemParams,
    curve: &PvCurve,
    rocof: f64,
    t: f64,
) -> Result<DrDecision, EstimationError> {
    let per_substation = substations
        .iter()
        .map(|sub| Ok((sub.id.clone(), dr_amount(sub, params, curve, rocof, t)?)))
        .collect::<Result<Vec<_>, EstimationError>>()?;
    DrDecision::new(per_substation)
}

/// Shed amount assuming the inertia of a fixed benchmark operating point.
pub fn conventional_ufls_total(
    params: &SystemParams,
    benchmark_inertia: f64,
    rocof: f64,
    system_load: f64,
) -> Result<f64, EstimationError> {
    Ok(imbalance_from_rocof(params, benchmark_inertia, rocof, system_load)?.abs())
}

/// Spreads a system-wide amount over the substations by their DR shares.
pub fn allocate_by_share(
    substations: &[Substation],
    total: f64,
) -> Result<DrDecision, EstimationError> {
    let share_sum: f64 = substations.iter().map(|s| s.rho).sum();
    if substations.is_empty() || share_sum <= 0.0 {
        return DrDecision::new(vec![("system".to_string(), total)]);
    }
    DrDecision::new(
        substations
            .iter()
            .map(|s| (s.id.clone(), total * s.rho / share_sum))
            .collect(),
    )
}

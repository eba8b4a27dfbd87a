//! Scenario files, synthetic irradiance fields and penetration sweeps.
//!
//! A scenario describes the world (loads, PV fleet, substations, relay,
//! contingency); [`ScenarioConfig::prepare`] resolves it into the local
//! measurements each substation would see and the true system state the
//! simulator integrates.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    pv_penetration, system_inertia, validate_shares, Substation, SystemParams,
};
use crate::grid_sim::{
    Contingency, GovernorParams, GridModel, RelayConfig, Scheme, SimInput, MAX_STEP_S,
};
use crate::pv_model::{
    IrradianceSeries, PvCurve, PvPlant, DEFAULT_AVERAGING_WINDOW_S, MAX_IRRADIANCE_WM2,
};

/// Plausible range for a PV curve's rated irradiance, in W/m².
pub const RATED_IRRADIANCE_RANGE: (f64, f64) = (50.0, MAX_IRRADIANCE_WM2);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unit-suffix mismatch: key `{found}` should be `{expected}`")]
    UnitSuffixMismatch { found: String, expected: String },
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("penetration unreachable: target {target} but at most {max:.4} is achievable")]
    PenetrationUnreachable { target: f64, max: f64 },
    #[error("irradiance CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl ScenarioError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ScenarioError::Invalid(vec![msg.into()])
    }

    pub fn is_io(&self) -> bool {
        matches!(self, ScenarioError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// True system load.
    pub load_mw: f64,
    /// Constant wind output; displaces conventional dispatch, adds no inertia.
    pub wind_mw: f64,
    pub damping_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub horizon_s: f64,
    pub rocof_window_s: f64,
    pub output_interval_s: f64,
    /// Irradiance clock time corresponding to simulation time zero.
    pub series_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSpec {
    /// Dips per site over the series.
    pub count: u32,
    /// Fractional irradiance reduction at the bottom of a dip.
    pub depth: f64,
    pub duration_s: f64,
}

/// Parameters of the synthetic irradiance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// Instantaneous PV penetration the fleet should hit at contingency time.
    pub target_penetration: f64,
    pub sample_interval_s: f64,
    /// Per-site static deviation from the shared clear-sky level, as a fraction.
    pub spatial_amplitude: f64,
    /// Standard deviation of the multiplicative temporal noise.
    pub noise_fraction: f64,
    /// AR(1) coefficient of the temporal noise.
    pub noise_correlation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clouds: Option<CloudSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum IrradianceSource {
    Synthetic(FieldSpec),
    /// One `<site id>.csv` per plant and substation, header `time_s,irradiance_wm2`.
    Csv {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub id: String,
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstationSpec {
    pub id: String,
    /// True load behind the substation, before PV offset.
    pub total_load_mw: f64,
    pub dist_pv_mw: f64,
    pub rho: f64,
    /// Mapping gain to system load; exact share of system load when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_gain: Option<f64>,
}

/// Declarative sensor errors, one entry per substation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorInjection {
    /// Fractional bias on each substation's load gain.
    #[serde(default)]
    pub load_gain_bias: Vec<f64>,
    /// Additive bias on each substation's irradiance sensor.
    #[serde(default)]
    pub irradiance_bias_wm2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub seed: u64,
    /// Rescale substation shares to sum to one instead of rejecting them.
    #[serde(default)]
    pub renormalize_shares: bool,
    pub system: SystemParams,
    pub grid: GridConfig,
    pub governor: GovernorParams,
    pub relay: RelayConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contingency: Option<Contingency>,
    pub sim: SimConfig,
    pub curve: PvCurve,
    pub irradiance: IrradianceSource,
    pub plants: Vec<PlantSpec>,
    pub substations: Vec<SubstationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_injection: Option<ErrorInjection>,
}

fn default_id() -> String {
    "scenario".to_string()
}

impl ScenarioConfig {
    /// Desk-scale system: 60 GW of load, five utility plants, ten DR
    /// substations, 45 % PV, and a 5 % generation trip at t = 1 s.
    pub fn desk_default() -> Self {
        let load_mw = 60_000.0;
        let sub_loads = [
            9000.0, 8000.0, 7500.0, 7000.0, 6500.0, 6000.0, 5000.0, 4500.0, 3500.0, 3000.0,
        ];
        let plants: Vec<PlantSpec> = (1..=5)
            .map(|k| PlantSpec {
                id: format!("plant-{k}"),
                capacity_mw: 6000.0,
            })
            .collect();
        let substations: Vec<SubstationSpec> = sub_loads
            .iter()
            .enumerate()
            .map(|(k, &l)| SubstationSpec {
                id: format!("sub-{:02}", k + 1),
                total_load_mw: l,
                dist_pv_mw: 0.3 * l,
                rho: l / load_mw,
                load_gain: None,
            })
            .collect();
        let installed: f64 = plants.iter().map(|p| p.capacity_mw).sum::<f64>()
            + substations.iter().map(|s| s.dist_pv_mw).sum::<f64>();
        Self {
            id: default_id(),
            seed: 2740,
            renormalize_shares: false,
            system: SystemParams {
                generator_inertia: 5.0,
                load_inertia: 1.0,
                nominal_frequency: 60.0,
                installed_pv: installed,
            },
            grid: GridConfig {
                load_mw,
                wind_mw: 0.15 * load_mw,
                damping_pu: 1.0,
            },
            governor: GovernorParams::default(),
            relay: RelayConfig {
                threshold_hz: 59.3,
                delay_cycles: 40,
                scheme: Scheme::Proposed,
            },
            contingency: Some(Contingency {
                time_s: 1.0,
                generation_loss_mw: 0.05 * load_mw,
            }),
            sim: SimConfig {
                dt_s: 0.001,
                horizon_s: 60.0,
                rocof_window_s: 0.25,
                output_interval_s: 0.01,
                series_offset_s: 1800.0,
            },
            curve: PvCurve::default(),
            irradiance: IrradianceSource::Synthetic(FieldSpec {
                target_penetration: 0.45,
                sample_interval_s: 5.0,
                spatial_amplitude: 0.03,
                noise_fraction: 0.02,
                noise_correlation: 0.9,
                clouds: None,
            }),
            plants,
            substations,
            error_injection: None,
        }
    }

    /// Checks every invariant that does not need the irradiance field.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        let mut check = |r: Result<(), String>| {
            if let Err(e) = r {
                problems.push(e);
            }
        };
        check(self.system.validate().map_err(|e| e.to_string()));
        check(self.governor.validate().map_err(|e| e.to_string()));
        check(
            self.relay
                .validate(self.system.nominal_frequency)
                .map_err(|e| e.to_string()),
        );
        if let Some(c) = &self.contingency {
            check(c.validate(self.sim.horizon_s).map_err(|e| e.to_string()));
        }
        check(self.curve.validate().map_err(|e| e.to_string()));
        check(self.validate_grid());
        check(self.validate_sim());
        check(self.validate_rated_irradiance());
        check(self.validate_sites());
        check(self.validate_injection());
        if let IrradianceSource::Synthetic(spec) = &self.irradiance {
            check(spec.validate());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(problems))
        }
    }

    fn validate_grid(&self) -> Result<(), String> {
        let g = &self.grid;
        if !(g.load_mw.is_finite() && g.load_mw > 0.0) {
            return Err(format!("grid.load_mw must be positive, got {}", g.load_mw));
        }
        if !(g.wind_mw.is_finite() && g.wind_mw >= 0.0) {
            return Err(format!(
                "grid.wind_mw must be nonnegative, got {}",
                g.wind_mw
            ));
        }
        if !(g.damping_pu.is_finite() && g.damping_pu >= 0.0) {
            return Err(format!(
                "grid.damping_pu must be nonnegative, got {}",
                g.damping_pu
            ));
        }
        Ok(())
    }

    fn validate_sim(&self) -> Result<(), String> {
        let s = &self.sim;
        if !(s.dt_s > 0.0 && s.dt_s <= MAX_STEP_S) {
            return Err(format!(
                "sim.dt_s must be in (0, {MAX_STEP_S}], got {}",
                s.dt_s
            ));
        }
        if !(s.horizon_s.is_finite() && s.horizon_s >= s.dt_s) {
            return Err(format!(
                "sim.horizon_s must cover at least one step, got {}",
                s.horizon_s
            ));
        }
        if !(s.rocof_window_s > 0.0 && s.rocof_window_s < s.horizon_s) {
            return Err(format!(
                "sim.rocof_window_s must be positive and shorter than the horizon, got {}",
                s.rocof_window_s
            ));
        }
        if !(s.output_interval_s >= s.dt_s && s.output_interval_s.is_finite()) {
            return Err(format!(
                "sim.output_interval_s must be at least dt_s, got {}",
                s.output_interval_s
            ));
        }
        if !(s.series_offset_s.is_finite() && s.series_offset_s >= 0.0) {
            return Err(format!(
                "sim.series_offset_s must be nonnegative, got {}",
                s.series_offset_s
            ));
        }
        Ok(())
    }

    fn validate_rated_irradiance(&self) -> Result<(), String> {
        let rated = self.curve.rated_irradiance_wm2;
        let (lo, hi) = RATED_IRRADIANCE_RANGE;
        if !(lo..=hi).contains(&rated) {
            return Err(format!(
                "curve.rated_irradiance_wm2 = {rated} is outside the plausibility bound [{lo}, {hi}] W/m² (value in kW/m²?)"
            ));
        }
        Ok(())
    }

    fn validate_sites(&self) -> Result<(), String> {
        let mut ids = BTreeSet::new();
        for id in self
            .plants
            .iter()
            .map(|p| &p.id)
            .chain(self.substations.iter().map(|s| &s.id))
        {
            if id.is_empty()
                || !id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
            {
                return Err(format!(
                    "site id `{id}` must be nonempty ASCII [A-Za-z0-9-_.]"
                ));
            }
            if !ids.insert(id.as_str()) {
                return Err(format!("duplicate site id `{id}`"));
            }
        }
        for p in &self.plants {
            if !(p.capacity_mw.is_finite() && p.capacity_mw > 0.0) {
                return Err(format!(
                    "plant `{}`: capacity_mw must be positive, got {}",
                    p.id, p.capacity_mw
                ));
            }
        }
        if self.substations.is_empty() {
            return Err("at least one substation is required".into());
        }
        for s in &self.substations {
            if !(s.total_load_mw.is_finite() && s.total_load_mw > 0.0) {
                return Err(format!(
                    "substation `{}`: total_load_mw must be positive, got {}",
                    s.id, s.total_load_mw
                ));
            }
            if !(s.dist_pv_mw.is_finite() && s.dist_pv_mw >= 0.0) {
                return Err(format!(
                    "substation `{}`: dist_pv_mw must be nonnegative, got {}",
                    s.id, s.dist_pv_mw
                ));
            }
            if !(0.0..=1.0).contains(&s.rho) {
                return Err(format!(
                    "substation `{}`: rho must lie in [0, 1], got {}",
                    s.id, s.rho
                ));
            }
            if let Some(g) = s.load_gain {
                if !(g.is_finite() && g > 0.0) {
                    return Err(format!(
                        "substation `{}`: load_gain must be positive (zero is forbidden), got {g}",
                        s.id
                    ));
                }
            }
        }
        let rho_sum: f64 = self.substations.iter().map(|s| s.rho).sum();
        if self.renormalize_shares {
            if !(rho_sum > 0.0) {
                return Err("substation shares sum to zero and cannot be renormalized".into());
            }
        } else {
            validate_shares(self.substations.iter().map(|s| (s.id.as_str(), s.rho)))
                .map_err(|e| e.to_string())?;
        }
        let fleet: f64 = self.plants.iter().map(|p| p.capacity_mw).sum::<f64>()
            + self.substations.iter().map(|s| s.dist_pv_mw).sum::<f64>();
        if (fleet - self.system.installed_pv).abs() > 1e-9 * fleet.max(1.0) {
            return Err(format!(
                "system.installed_pv_mw = {} does not match the fleet total {fleet} MW (plants plus distributed PV)",
                self.system.installed_pv
            ));
        }
        Ok(())
    }

    fn validate_injection(&self) -> Result<(), String> {
        let Some(inj) = &self.error_injection else {
            return Ok(());
        };
        let n = self.substations.len();
        for (name, list) in [
            ("load_gain_bias", &inj.load_gain_bias),
            ("irradiance_bias_wm2", &inj.irradiance_bias_wm2),
        ] {
            if !list.is_empty() && list.len() != n {
                return Err(format!(
                    "error_injection.{name} has {} entries for {n} substations",
                    list.len()
                ));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err(format!("error_injection.{name} must be finite"));
            }
        }
        if let Some(b) = inj.load_gain_bias.iter().find(|b| **b <= -1.0) {
            return Err(format!(
                "error_injection.load_gain_bias {b} would make a gain nonpositive"
            ));
        }
        Ok(())
    }

    /// Substation shares after optional renormalization.
    pub fn shares(&self) -> Vec<f64> {
        let sum: f64 = self.substations.iter().map(|s| s.rho).sum();
        self.substations
            .iter()
            .map(|s| {
                if self.renormalize_shares {
                    s.rho / sum
                } else {
                    s.rho
                }
            })
            .collect()
    }

    /// Irradiance clock time at which the true PV snapshot is taken.
    pub fn snapshot_time(&self) -> f64 {
        self.sim.series_offset_s + self.contingency.map_or(0.0, |c| c.time_s)
    }

    fn sites(&self) -> Vec<Site> {
        self.plants
            .iter()
            .map(|p| Site {
                id: p.id.clone(),
                capacity_mw: p.capacity_mw,
            })
            .chain(self.substations.iter().map(|s| Site {
                id: s.id.clone(),
                capacity_mw: s.dist_pv_mw,
            }))
            .collect()
    }

    /// Builds or loads the irradiance seen by every site, plants first.
    pub fn irradiance_field(&self) -> Result<IrradianceField, ScenarioError> {
        match &self.irradiance {
            IrradianceSource::Synthetic(spec) => generate_irradiance_field(
                spec,
                &FieldContext {
                    sites: self.sites(),
                    system_load_mw: self.grid.load_mw,
                    curve: self.curve.clone(),
                    snapshot_time_s: self.snapshot_time(),
                    duration_s: self.sim.series_offset_s + self.sim.horizon_s,
                },
                self.seed,
            ),
            IrradianceSource::Csv { dir } => {
                let sites = self
                    .sites()
                    .into_iter()
                    .map(|site| {
                        let path = dir.join(format!("{}.csv", site.id));
                        Ok((site.id, load_irradiance_csv(&path)?))
                    })
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                Ok(IrradianceField {
                    sites,
                    base_level_wm2: None,
                })
            }
        }
    }

    /// Resolves the scenario into simulator input.
    pub fn prepare(&self) -> Result<SimInput, ScenarioError> {
        self.validate()?;
        let field = self.irradiance_field()?;
        let t_snap = self.snapshot_time();
        let n_plants = self.plants.len();
        let series = |k: usize| field.sites[k].1.clone();
        let invalid = |e: &dyn std::fmt::Display| ScenarioError::invalid(e.to_string());

        let mut true_pv = 0.0;
        for (k, p) in self.plants.iter().enumerate() {
            let plant = PvPlant::new(&p.id, p.capacity_mw, series(k)).map_err(|e| invalid(&e))?;
            true_pv += plant.output(&self.curve, t_snap).map_err(|e| invalid(&e))?;
        }

        let shares = self.shares();
        let inj = self.error_injection.clone().unwrap_or_default();
        let mut substations = Vec::with_capacity(self.substations.len());
        for (k, spec) in self.substations.iter().enumerate() {
            let actual = series(n_plants + k);
            let r_bar = actual
                .moving_average(t_snap, DEFAULT_AVERAGING_WINDOW_S)
                .map_err(|e| invalid(&format!("substation `{}`: {e}", spec.id)))?;
            let dist_output =
                spec.dist_pv_mw * self.curve.per_unit_output(r_bar).map_err(|e| invalid(&e))?;
            true_pv += dist_output;

            let sensor = match inj.irradiance_bias_wm2.get(k) {
                Some(&bias) if bias != 0.0 => actual
                    .with_bias(bias)
                    .map_err(|e| invalid(&format!("substation `{}` sensor bias: {e}", spec.id)))?,
                _ => actual,
            };
            let exact_gain = self.grid.load_mw / spec.total_load_mw;
            let bias = inj.load_gain_bias.get(k).copied().unwrap_or(0.0);
            let sub = Substation {
                id: spec.id.clone(),
                net_load_mw: spec.total_load_mw - dist_output,
                dist_pv_mw: spec.dist_pv_mw,
                irradiance: sensor,
                rho: shares[k],
                load_gain: spec.load_gain.unwrap_or(exact_gain) * (1.0 + bias),
            };
            sub.validate().map_err(|e| invalid(&e))?;
            substations.push(sub);
        }

        let load = self.grid.load_mw;
        let mu = pv_penetration(true_pv, load).map_err(|e| invalid(&e))?;
        let inertia = system_inertia(&self.system, mu).map_err(|e| invalid(&e))?;
        let dispatch = load - true_pv - self.grid.wind_mw;
        if !(dispatch > 0.0) {
            return Err(ScenarioError::invalid(format!(
                "no conventional generation online: load {load} MW, PV {true_pv:.1} MW, wind {} MW",
                self.grid.wind_mw
            )));
        }
        let governor_gain = dispatch / (self.governor.droop_pu * self.system.nominal_frequency);

        Ok(SimInput {
            id: self.id.clone(),
            params: self.system,
            model: GridModel {
                nominal_frequency: self.system.nominal_frequency,
                inertia,
                system_load: load,
                damping_pu: self.grid.damping_pu,
                governor: self.governor,
                governor_gain,
                contingency: self.contingency,
            },
            relay: self.relay,
            substations,
            curve: self.curve.clone(),
            series_offset_s: self.sim.series_offset_s,
            rocof_window_s: self.sim.rocof_window_s,
            dt_s: self.sim.dt_s,
            horizon_s: self.sim.horizon_s,
            output_interval_s: self.sim.output_interval_s,
            true_pv_output_mw: true_pv,
            true_penetration: mu,
        })
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.target_penetration) {
            return Err(format!(
                "irradiance.target_penetration must lie in [0, 1], got {}",
                self.target_penetration
            ));
        }
        if !(self.sample_interval_s.is_finite() && self.sample_interval_s > 0.0) {
            return Err(format!(
                "irradiance.sample_interval_s must be positive, got {}",
                self.sample_interval_s
            ));
        }
        if !(0.0..1.0).contains(&self.spatial_amplitude) {
            return Err(format!(
                "irradiance.spatial_amplitude must lie in [0, 1), got {}",
                self.spatial_amplitude
            ));
        }
        if !(0.0..=0.3).contains(&self.noise_fraction) {
            return Err(format!(
                "irradiance.noise_fraction must lie in [0, 0.3], got {}",
                self.noise_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return Err(format!(
                "irradiance.noise_correlation must lie in [0, 1), got {}",
                self.noise_correlation
            ));
        }
        if let Some(c) = &self.clouds {
            if !(0.0..=1.0).contains(&c.depth) || !(c.duration_s > 0.0) {
                return Err(format!(
                    "irradiance.clouds needs depth in [0, 1] and positive duration, got {} / {}",
                    c.depth, c.duration_s
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    /// PV capacity exposed to this site's irradiance.
    pub capacity_mw: f64,
}

/// What the field generator needs to know about the system.
#[derive(Debug, Clone)]
pub struct FieldContext {
    pub sites: Vec<Site>,
    pub system_load_mw: f64,
    pub curve: PvCurve,
    /// Irradiance clock time at which the target penetration must hold.
    pub snapshot_time_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceField {
    /// Series per site, in the order the sites were given.
    pub sites: Vec<(String, IrradianceSeries)>,
    /// Shared clear-sky level chosen to hit the target, for synthetic fields.
    pub base_level_wm2: Option<f64>,
}

/// Seeded synthetic irradiance: a shared base level times per-site
/// perturbations, with the base solved so the fleet hits the target
/// penetration at the snapshot time.
pub fn generate_irradiance_field(
    spec: &FieldSpec,
    ctx: &FieldContext,
    seed: u64,
) -> Result<IrradianceField, ScenarioError> {
    spec.validate().map_err(ScenarioError::invalid)?;
    let interval = spec.sample_interval_s;
    let n = (ctx.duration_s / interval).ceil() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let shapes: Vec<Vec<f64>> = ctx
        .sites
        .iter()
        .map(|_| site_shape(spec, n, interval, ctx.duration_s, &mut rng))
        .collect();

    let target_mw = spec.target_penetration * ctx.system_load_mw;
    let installed: f64 = ctx.sites.iter().map(|s| s.capacity_mw).sum();
    if target_mw > installed {
        return Err(ScenarioError::PenetrationUnreachable {
            target: spec.target_penetration,
            max: installed / ctx.system_load_mw,
        });
    }

    // window indices of the snapshot moving average
    let hi = ((ctx.snapshot_time_s / interval + 1e-9).floor() as usize).min(n - 1);
    let lo_pos = (ctx.snapshot_time_s - DEFAULT_AVERAGING_WINDOW_S) / interval;
    let lo = if lo_pos < 0.0 {
        0
    } else {
        (lo_pos + 1e-9).floor() as usize + 1
    };
    let fleet_output = |base: f64| -> f64 {
        ctx.sites
            .iter()
            .zip(&shapes)
            .map(|(site, shape)| {
                let window = &shape[lo..=hi];
                let mean = window
                    .iter()
                    .map(|s| (base * s).clamp(0.0, MAX_IRRADIANCE_WM2))
                    .sum::<f64>()
                    / window.len() as f64;
                site.capacity_mw * ctx.curve.per_unit_output(mean).unwrap_or(0.0)
            })
            .sum()
    };

    let min_shape = shapes
        .iter()
        .flat_map(|s| s[lo..=hi].iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut upper = MAX_IRRADIANCE_WM2 / min_shape.max(1e-3);
    let max_output = fleet_output(upper);
    if max_output < target_mw * (1.0 - 1e-12) {
        return Err(ScenarioError::PenetrationUnreachable {
            target: spec.target_penetration,
            max: max_output / ctx.system_load_mw,
        });
    }
    let mut lower = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lower + upper);
        if fleet_output(mid) < target_mw {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    let base = 0.5 * (lower + upper);

    let sites = ctx
        .sites
        .iter()
        .zip(shapes)
        .map(|(site, shape)| {
            let values = shape
                .iter()
                .map(|s| (base * s).clamp(0.0, MAX_IRRADIANCE_WM2))
                .collect();
            let series = IrradianceSeries::uniform(0.0, interval, values)
                .map_err(|e| ScenarioError::invalid(e.to_string()))?;
            Ok((site.id.clone(), series))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(IrradianceField {
        sites,
        base_level_wm2: Some(base),
    })
}

/// Multiplicative shape of one site's irradiance relative to the base level.
fn site_shape(
    spec: &FieldSpec,
    n: usize,
    interval: f64,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let spatial = if spec.spatial_amplitude > 0.0 {
        rng.gen_range(-spec.spatial_amplitude..=spec.spatial_amplitude)
    } else {
        0.0
    };
    let rho = spec.noise_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x: f64 = 0.0;
    let mut shape = Vec::with_capacity(n);
    for _ in 0..n {
        let noise = if spec.noise_fraction > 0.0 {
            // unit-variance uniform innovations, clipped at three sigma
            let u = rng.gen_range(-3f64.sqrt()..=3f64.sqrt());
            x = (rho * x + innovation * u).clamp(-3.0, 3.0);
            spec.noise_fraction * x
        } else {
            0.0
        };
        shape.push((1.0 + spatial) * (1.0 + noise));
    }
    if let Some(clouds) = &spec.clouds {
        let half = 0.5 * clouds.duration_s;
        for _ in 0..clouds.count {
            let center = rng.gen_range(0.0..=duration);
            for (k, s) in shape.iter_mut().enumerate() {
                let d = k as f64 * interval - center;
                if d.abs() < half {
                    let bump = 0.5 * (1.0 + (std::f64::consts::PI * d / half).cos());
                    *s *= 1.0 - clouds.depth * bump;
                }
            }
        }
    }
    shape
}

/// Reads a `time_s,irradiance_wm2` CSV.
pub fn load_irradiance_csv(path: &Path) -> Result<IrradianceSeries, ScenarioError> {
    let csv_err = |message: String| ScenarioError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    let expected = ["time_s", "irradiance_wm2"];
    if headers.len() != 2 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(csv_err(format!(
            "expected header `time_s,irradiance_wm2`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, ScenarioError> {
            record[i]
                .parse::<f64>()
                .map_err(|e| csv_err(format!("row {}: column `{}`: {e}", row + 1, expected[i])))
        };
        samples.push((parse(0)?, parse(1)?));
    }
    IrradianceSeries::from_samples(&samples, 1.0).map_err(|e| csv_err(e.to_string()))
}

/// Writes a series in the format read by [`load_irradiance_csv`].
pub fn save_irradiance_csv(series: &IrradianceSeries, path: &Path) -> Result<(), ScenarioError> {
    let mut out = String::from("time_s,irradiance_wm2\n");
    for (t, r) in series.samples() {
        out.push_str(&format!("{t},{r}\n"));
    }
    fs::write(path, out).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses, resolves relative CSV paths against the file's directory, and validates.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_scenario(&text, path)?;
    resolve_relative(&mut config, path);
    config.validate()?;
    Ok(config)
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    toml::from_str(text).map_err(|e| parse_error(e, path))
}

fn resolve_relative(config: &mut ScenarioConfig, path: &Path) {
    if let IrradianceSource::Csv { dir } = &mut config.irradiance {
        if dir.is_relative() {
            if let Some(parent) = path.parent() {
                *dir = parent.join(&*dir);
            }
        }
    }
}

pub fn save_scenario(config: &ScenarioConfig, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, to_canonical_toml(config)?).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_canonical_toml(config: &ScenarioConfig) -> Result<String, ScenarioError> {
    toml::to_string(config)
        .map_err(|e| ScenarioError::invalid(format!("cannot serialize scenario: {e}")))
}

/// Turns a TOML error into either a unit-suffix diagnosis or a parse error.
fn parse_error(err: toml::de::Error, path: &Path) -> ScenarioError {
    let message = err.message().to_string();
    if let Some((found, expected)) = unit_suffix_mismatch(&message) {
        return ScenarioError::UnitSuffixMismatch { found, expected };
    }
    ScenarioError::Parse {
        path: path.to_path_buf(),
        message: err.to_string(),
    }
}

const UNIT_SUFFIXES: [&str; 17] = [
    "mw", "kw", "gw", "w", "hz", "khz", "mhz", "s", "ms", "min", "h", "wm2", "kwm2", "pu", "pct",
    "cycles", "hzps",
];

/// Splits `key` into its stem and unit suffix, if it has one.
fn split_unit(key: &str) -> (&str, Option<&str>) {
    match key.rsplit_once('_') {
        Some((stem, suffix)) if UNIT_SUFFIXES.contains(&suffix) => (stem, Some(suffix)),
        _ => (key, None),
    }
}

/// Matches serde's "unknown field `x`, expected ..." against the known keys.
fn unit_suffix_mismatch(message: &str) -> Option<(String, String)> {
    let rest = message.strip_prefix("unknown field `")?;
    let (found, rest) = rest.split_once('`')?;
    let (found_stem, _) = split_unit(found);
    rest.split('`')
        .skip(1)
        .step_by(2)
        .find(|c| {
            let (stem, suffix) = split_unit(c);
            suffix.is_some() && *c != found && stem == found_stem
        })
        .map(|c| (found.to_string(), c.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Proposed,
    Conventional,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Proposed => "proposed",
            SchemeKind::Conventional => "conventional",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim() {
            "proposed" => Some(SchemeKind::Proposed),
            "conventional" => Some(SchemeKind::Conventional),
            _ => None,
        }
    }
}

/// A penetration sweep over one base scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub penetration_levels: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    /// Operating point whose inertia the conventional scheme assumes.
    pub benchmark_penetration: f64,
}

/// On-disk sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    /// Base scenario file, relative to the sweep file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_file: Option<PathBuf>,
    pub penetration_levels: Vec<f64>,
    pub benchmark_penetration: f64,
    #[serde(default = "both_schemes")]
    pub schemes: Vec<SchemeKind>,
    /// Overrides the base scenario's seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Inline base scenario; the desk default is used when neither this nor `base_file` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<ScenarioConfig>,
}

impl SweepFile {
    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self)
            .map_err(|e| ScenarioError::invalid(format!("cannot serialize sweep: {e}")))
    }
}

fn both_schemes() -> Vec<SchemeKind> {
    vec![SchemeKind::Proposed, SchemeKind::Conventional]
}

impl SweepSpec {
    /// The four-level sweep around a 45 % benchmark.
    pub fn desk_default() -> Self {
        Self {
            base: ScenarioConfig::desk_default(),
            penetration_levels: vec![0.15, 0.30, 0.45, 0.60],
            schemes: both_schemes(),
            benchmark_penetration: 0.45,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        if self.penetration_levels.is_empty() {
            problems.push("penetration_levels must not be empty".to_string());
        }
        if let Some(l) = self
            .penetration_levels
            .iter()
            .find(|l| !(0.0..1.0).contains(*l))
        {
            problems.push(format!("penetration level {l} outside [0, 1)"));
        }
        let mut seen = BTreeSet::new();
        for l in &self.penetration_levels {
            if !seen.insert(level_label(*l)) {
                problems.push(format!("duplicate penetration level {l}"));
            }
        }
        if self.schemes.is_empty() {
            problems.push("at least one scheme is required".to_string());
        }
        let (lo, hi) = self
            .penetration_levels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
                (lo.min(l), hi.max(l))
            });
        if !(lo..=hi).contains(&self.benchmark_penetration) {
            problems.push(format!(
                "benchmark_penetration {} outside the swept range [{lo}, {hi}]",
                self.benchmark_penetration
            ));
        }
        if !matches!(self.base.irradiance, IrradianceSource::Synthetic(_)) {
            problems.push("sweeps need a synthetic irradiance source".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(problems))
        }
    }
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: SweepFile = toml::from_str(&text).map_err(|e| parse_error(e, path))?;
    let mut base = match (&file.base, &file.base_file) {
        (Some(_), Some(_)) => {
            return Err(ScenarioError::invalid(
                "set either `base` or `base_file`, not both",
            ))
        }
        (Some(inline), None) => {
            let mut base = inline.clone();
            resolve_relative(&mut base, path);
            base
        }
        (None, Some(rel)) => {
            let base_path = path.parent().map_or_else(|| rel.clone(), |p| p.join(rel));
            load_scenario(&base_path)?
        }
        (None, None) => ScenarioConfig::desk_default(),
    };
    if let Some(seed) = file.seed {
        base.seed = seed;
    }
    base.validate()?;
    let spec = SweepSpec {
        base,
        penetration_levels: file.penetration_levels,
        schemes: file.schemes,
        benchmark_penetration: file.benchmark_penetration,
    };
    spec.validate()?;
    Ok(spec)
}

/// Directory-safe label for a penetration level, e.g. `pv15.0`.
pub fn level_label(level: f64) -> String {
    format!("pv{:.1}", level * 100.0)
}

pub fn scenario_id(level: f64, scheme: SchemeKind) -> String {
    format!("{}_{}", level_label(level), scheme.name())
}

/// Seed for the `index`-th penetration level, shared by both schemes.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

/// One scenario per (level, scheme); both schemes at a level share the
/// same world and differ only in the relay scheme.
pub fn build_sweep(spec: &SweepSpec) -> Result<Vec<ScenarioConfig>, ScenarioError> {
    spec.validate()?;
    spec.base.validate()?;
    let benchmark_inertia_s = system_inertia(&spec.base.system, spec.benchmark_penetration)
        .map_err(|e| ScenarioError::invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(spec.penetration_levels.len() * spec.schemes.len());
    for (index, &level) in spec.penetration_levels.iter().enumerate() {
        let mut world = spec.base.clone();
        world.seed = derive_seed(spec.base.seed, index);
        if let IrradianceSource::Synthetic(field) = &mut world.irradiance {
            field.target_penetration = level;
        }
        // surface unreachable levels now rather than mid-batch
        world.irradiance_field()?;
        for &scheme in &spec.schemes {
            let mut config = world.clone();
            config.id = scenario_id(level, scheme);
            config.relay.scheme = match scheme {
                SchemeKind::Proposed => Scheme::Proposed,
                SchemeKind::Conventional => Scheme::Conventional {
                    benchmark_inertia_s,
                },
            };
            out.push(config);
        }
    }
    Ok(out)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use pvdr::estimation::{
    dr_amount, dr_from_estimates, error_report, estimate_imbalance, imbalance_expanded,
    system_inertia, total_dr_error, DrDecision, ErrorReport, Residual, Substation,
    SubstationResidual, SystemParams,
};
use pvdr::grid_sim::{
    run_batch, simulate, Contingency, GovernorParams, GridState, PendingDr, RelayConfig, SimResult,
};
use pvdr::pv_model::{IrradianceSeries, PvCurve, PvPlant};
use pvdr::report::{write_sweep_artifacts, ComparisonReport, ComparisonRow, SweepRun};
use pvdr::scenario::{build_sweep, IrradianceSource, ScenarioConfig, SchemeKind, SweepSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn flat(value: f64) -> IrradianceSeries {
    IrradianceSeries::uniform(0.0, 5.0, vec![value; 241]).unwrap()
}

fn identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f_n = if rng.gen_bool(0.5) { 50.0 } else { 60.0 };
        let params = SystemParams::new(
            rng.gen_range(1.0..10.0),
            rng.gen_range(0.0..3.0),
            f_n,
            rng.gen_range(0.0..1e5),
        )
        .unwrap();
        let load = rng.gen_range(1e2..1e5);
        let pv = rng.gen_range(0.0..0.95) * load;
        let rocof = rng.gen_range(-2.0..-1e-3) * if rng.gen_bool(0.9) { 1.0 } else { -1.0 };
        let composed = estimate_imbalance(&params, rocof, load, pv).unwrap().value;
        let expanded = imbalance_expanded(&params, rocof, load, pv).unwrap();
        worst = worst.max(rel_err(expanded, composed));
    }
    let elapsed = start.elapsed().as_secs_f64();
    Outcome {
        id: "1 inertia/imbalance identity",
        pass: worst <= 1e-12 && elapsed < 1.0,
        detail: format!("max rel err {worst:.2e} over 1000 tuples in {elapsed:.3} s"),
    }
}

fn closed_loop_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut notes = Vec::new();
    for level in [0.15, 0.30, 0.45, 0.60] {
        let mut c = ScenarioConfig::desk_default();
        c.governor.enabled = false;
        c.grid.damping_pu = 0.0;
        let loss = 0.05 * c.grid.load_mw;
        c.contingency = Some(Contingency {
            time_s: 1.0,
            generation_loss_mw: loss,
        });
        c.sim.horizon_s = 5.0;
        if let IrradianceSource::Synthetic(field) = &mut c.irradiance {
            field.target_penetration = level;
        }
        let start = Instant::now();
        let r = simulate(&c.prepare().unwrap()).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let err = r
            .estimated_imbalance
            .map_or(f64::INFINITY, |e| rel_err(e, loss));
        notes.push(format!(
            "{:.0}%: {:+.2}%",
            level * 100.0,
            100.0 * (r.estimated_imbalance.unwrap_or(0.0) - loss) / loss
        ));
        worst = worst.max(err);
    }
    Outcome {
        id: "2 closed-loop estimate vs injected loss",
        pass: worst <= 0.02 && slowest < 5.0,
        detail: format!(
            "[{}], max {:.2}% (limit 2%), slowest run {slowest:.2} s",
            notes.join(", "),
            worst * 100.0
        ),
    }
}

fn dr_sum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let curve = PvCurve::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=25);
        let loads: Vec<f64> = (0..n).map(|_| rng.gen_range(100.0..10_000.0)).collect();
        let system_load: f64 = loads.iter().sum();
        let mut rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|r| *r /= total);
        let irradiance = rng.gen_range(100.0..1000.0);
        let per_unit = curve.per_unit_output(irradiance).unwrap();
        let installed = rng.gen_range(0.0..0.9) * system_load / per_unit.max(1e-3);
        let params = SystemParams::new(
            rng.gen_range(2.0..8.0),
            rng.gen_range(0.0..2.0),
            60.0,
            installed,
        )
        .unwrap();
        let rocof = rng.gen_range(-1.0..-0.01);
        let sum: f64 = (0..n)
            .map(|i| {
                let dist = rng.gen_range(0.0..0.5) * loads[i];
                let sub = Substation {
                    id: format!("s{i}"),
                    net_load_mw: loads[i] - dist * per_unit,
                    dist_pv_mw: dist,
                    irradiance: flat(irradiance),
                    rho: rho[i],
                    load_gain: system_load / loads[i],
                };
                dr_amount(&sub, &params, &curve, rocof, 900.0).unwrap()
            })
            .sum();
        let global = estimate_imbalance(&params, rocof, system_load, per_unit * installed).unwrap();
        worst = worst.max(rel_err(sum, global.value.abs()));
    }
    Outcome {
        id: "3 substation amounts sum to global estimate",
        pass: worst <= 1e-9,
        detail: format!("max rel err {worst:.2e} over 100 partitions"),
    }
}

fn error_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let params = SystemParams::new(
            rng.gen_range(2.0..8.0),
            rng.gen_range(0.0..2.0),
            60.0,
            40_000.0,
        )
        .unwrap();
        let rocof = rng.gen_range(-1.0..-0.01);
        let load = rng.gen_range(20_000.0..80_000.0);
        let pv: f64 = rng.gen_range(0.0..0.6) * load;
        let n = rng.gen_range(2..=12);
        let mut rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|r| *r /= total);
        let mut perturbed = 0.0;
        let mut exact = 0.0;
        let residuals: Vec<Residual> = rho
            .iter()
            .map(|&rho| {
                let e_s = rng.gen_range(-0.1..0.1) * load;
                let e_pv = rng.gen_range(-0.1..0.1) * pv.max(1.0);
                perturbed += dr_from_estimates(&params, rho, rocof, load - e_s, pv - e_pv);
                exact += dr_from_estimates(&params, rho, rocof, load, pv);
                Residual {
                    rho,
                    load_error_mw: e_s,
                    pv_error_mw: e_pv,
                }
            })
            .collect();
        worst = worst.max(rel_err(
            total_dr_error(&params, rocof, &residuals),
            perturbed - exact,
        ));
    }

    // the same identity through sensors on a scenario with injected errors
    let mut c = ScenarioConfig::desk_default();
    let n = c.substations.len();
    let mut injection = c.error_injection.clone().unwrap_or_default();
    injection.load_gain_bias = (0..n).map(|i| 0.02 * (i as f64 - 4.5) / 4.5).collect();
    injection.irradiance_bias_wm2 = (0..n).map(|i| 15.0 * ((i % 3) as f64 - 1.0)).collect();
    c.error_injection = Some(injection);
    let input = c.prepare().unwrap();
    let t = c.snapshot_time();
    let rocof = -0.3;
    let report = error_report(
        &input.params,
        &input.curve,
        &input.substations,
        rocof,
        t,
        c.grid.load_mw,
        input.true_pv_output_mw,
    )
    .unwrap();
    let perturbed: f64 = input
        .substations
        .iter()
        .map(|s| dr_amount(s, &input.params, &input.curve, rocof, t).unwrap())
        .sum();
    let exact: f64 = input
        .substations
        .iter()
        .map(|s| {
            dr_from_estimates(
                &input.params,
                s.rho,
                rocof,
                c.grid.load_mw,
                input.true_pv_output_mw,
            )
        })
        .sum();
    let scenario_err = rel_err(report.total_error, perturbed - exact);
    worst = worst.max(scenario_err);
    Outcome {
        id: "4 residual decomposition of shed error",
        pass: worst <= 1e-9,
        detail: format!("max rel err {worst:.2e} over 200 random cases plus an injected-error scenario ({scenario_err:.2e})"),
    }
}

struct SweepOutcome {
    rows: BTreeMap<(u64, SchemeKind), (f64, SimResult)>,
    elapsed: f64,
    benchmark_inertia: f64,
}

fn run_default_sweep(workers: Option<usize>) -> (Vec<SweepRun>, f64) {
    let spec = SweepSpec::desk_default();
    let start = Instant::now();
    let configs = build_sweep(&spec).unwrap();
    let results = run_batch(&configs, workers).unwrap();
    let keys = spec
        .penetration_levels
        .iter()
        .flat_map(|&l| spec.schemes.iter().map(move |&s| (l, s)));
    let runs = keys
        .zip(results)
        .map(|((penetration, scheme), result)| SweepRun {
            penetration,
            scheme,
            result,
        })
        .collect();
    (runs, start.elapsed().as_secs_f64())
}

fn sweep_outcome() -> SweepOutcome {
    let spec = SweepSpec::desk_default();
    let benchmark_inertia = system_inertia(&spec.base.system, spec.benchmark_penetration).unwrap();
    let (runs, elapsed) = run_default_sweep(None);
    let rows = runs
        .into_iter()
        .map(|r| {
            (
                ((r.penetration * 1000.0).round() as u64, r.scheme),
                (r.penetration, r.result),
            )
        })
        .collect();
    SweepOutcome {
        rows,
        elapsed,
        benchmark_inertia,
    }
}

fn protocol(sweep: &SweepOutcome) -> Vec<Outcome> {
    let err = |level: u64, scheme| sweep.rows[&(level, scheme)].1.shed_error_pct().unwrap();
    let levels = [150u64, 300, 450, 600];

    // (a) direction and sign law
    let mut a_ok = err(150, SchemeKind::Conventional) < 0.0
        && err(300, SchemeKind::Conventional) < 0.0
        && err(600, SchemeKind::Conventional) > 0.0;
    let mut a_notes = Vec::new();
    for &l in &levels {
        let r = &sweep.rows[&(l, SchemeKind::Conventional)].1;
        let gap = sweep.benchmark_inertia - r.true_inertia;
        let e = err(l, SchemeKind::Conventional);
        if gap.abs() <= 1e-9 * sweep.benchmark_inertia {
            a_notes.push(format!("{}%: {e:+.2}% (benchmark level, see 5d)", l / 10));
            continue;
        }
        let agree = gap.signum() == e.signum();
        a_ok &= agree;
        a_notes.push(format!(
            "{}%: {e:+.2}% vs dH {gap:+.3} s{}",
            l / 10,
            if agree { "" } else { " MISMATCH" }
        ));
    }

    // (b) proposed accuracy
    let b: Vec<f64> = levels
        .iter()
        .map(|&l| err(l, SchemeKind::Proposed))
        .collect();
    let b_max = b.iter().fold(0.0f64, |m, e| m.max(e.abs()));

    // (c) nadir spread
    let spread = |scheme| {
        let n: Vec<f64> = levels
            .iter()
            .map(|&l| sweep.rows[&(l, scheme)].1.nadir)
            .collect();
        n.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - n.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (sp, sc) = (
        spread(SchemeKind::Proposed),
        spread(SchemeKind::Conventional),
    );

    // (d) agreement at the benchmark
    let gap45 = (err(450, SchemeKind::Proposed) - err(450, SchemeKind::Conventional)).abs();

    vec![
        Outcome {
            id: "5a conventional under/over-sheds with sign of inertia gap",
            pass: a_ok,
            detail: a_notes.join(", "),
        },
        Outcome {
            id: "5b proposed shed error within 5% at every level",
            pass: b_max <= 5.0,
            detail: format!(
                "errors [{}], max |err| {b_max:.2}%",
                b.iter()
                    .map(|e| format!("{e:+.2}%"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        },
        Outcome {
            id: "5c proposed nadir spread <= conventional",
            pass: sp <= sc,
            detail: format!("proposed {sp:.4} Hz, conventional {sc:.4} Hz"),
        },
        Outcome {
            id: "5d schemes agree within 1% at 45% penetration",
            pass: gap45 <= 1.0,
            detail: format!(
                "proposed {:+.2}%, conventional {:+.2}%, gap {gap45:.2} points",
                err(450, SchemeKind::Proposed),
                err(450, SchemeKind::Conventional)
            ),
        },
        Outcome {
            id: "5e default sweep runtime",
            pass: sweep.elapsed <= 60.0,
            detail: format!("8 scenarios in {:.2} s (limit 60 s)", sweep.elapsed),
        },
    ]
}

fn convergence() -> Outcome {
    // a fast governor lag keeps truncation error above the float64 floor
    let mut c = ScenarioConfig::desk_default();
    c.governor.time_constant_s = 0.1;
    c.sim.horizon_s = 6.0;
    c.sim.output_interval_s = 0.002;
    let contingency = c.contingency.unwrap().time_s;
    let run = |dt: f64| {
        let mut c = c.clone();
        c.sim.dt_s = dt;
        simulate(&c.prepare().unwrap()).unwrap()
    };
    let reference = run(0.000_25);
    let coarse = run(0.002);
    let fine = run(0.001);
    let end = [&reference, &coarse, &fine]
        .iter()
        .map(|r| r.actuation_time.unwrap_or(c.sim.horizon_s))
        .fold(f64::INFINITY, f64::min);
    let max_err = |r: &SimResult| {
        r.trace
            .iter()
            .zip(&reference.trace)
            .filter(|(p, _)| p.t >= contingency && p.t < end)
            .map(|(p, q)| {
                assert!((p.t - q.t).abs() < 1e-9);
                (p.frequency - q.frequency).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e2, e1) = (max_err(&coarse), max_err(&fine));
    let ratio = e2 / e1;
    Outcome {
        id: "6 RK4 step-halving convergence",
        pass: ratio >= 8.0 && e1 > 0.0,
        detail: format!(
            "err(2 ms) {e2:.3e} Hz, err(1 ms) {e1:.3e} Hz, ratio {ratio:.2} on [{contingency}, {end:.3}) s"
        ),
    }
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (runs_a, _) = run_default_sweep(Some(1));
    let (runs_b, _) = run_default_sweep(Some(4));
    write_sweep_artifacts(a.path(), &runs_a).unwrap();
    write_sweep_artifacts(b.path(), &runs_b).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    let csvs: Vec<&String> = ta.keys().filter(|k| k.ends_with(".csv")).collect();
    let differing: Vec<&String> = ta.keys().filter(|k| tb.get(*k) != ta.get(*k)).collect();
    let same_set = ta.keys().eq(tb.keys());
    Outcome {
        id: "7 byte-identical artifacts across runs",
        pass: same_set && differing.is_empty() && csvs.len() == 17,
        detail: format!(
            "{} files ({} CSV) compared, 1 vs 4 workers, {} differ",
            ta.len(),
            csvs.len(),
            differing.len()
        ),
    }
}

fn invariants() -> Outcome {
    let params = SystemParams::new(5.0, 1.0, 60.0, 1000.0).unwrap();
    let desk = ScenarioConfig::desk_default();
    let desk_result = simulate(&desk.prepare().unwrap()).unwrap();
    let gov = GovernorParams::default();
    let relay = desk.relay;
    let contingency = Contingency {
        time_s: 1.0,
        generation_loss_mw: 100.0,
    };
    let sub = |net: f64, dist: f64, rho: f64| Substation {
        id: "s".into(),
        net_load_mw: net,
        dist_pv_mw: dist,
        irradiance: flat(500.0),
        rho,
        load_gain: 10.0,
    };
    let pending = Some(PendingDr {
        arm_time: 1.0,
        actuation_time: 1.6,
        decision: DrDecision::empty(),
    });
    let residual = |e: f64| SubstationResidual {
        id: "s".into(),
        pv_error_mw: e,
        load_error_mw: e,
    };
    let good_report = ErrorReport {
        per_substation: vec![residual(10.0)],
        total_error: total_dr_error(
            &params,
            -0.3,
            &[Residual {
                rho: 1.0,
                load_error_mw: 10.0,
                pv_error_mw: 10.0,
            }],
        ),
    };
    let row = |pct: f64| ComparisonRow {
        penetration: 0.3,
        scheme: SchemeKind::Proposed,
        nadir_hz: 59.1,
        shed_mw: 2100.0,
        true_imbalance_mw: Some(2000.0),
        shed_error_pct: Some(pct),
        rocof_hzps: Some(-0.3),
    };
    let mut unreachable = desk.clone();
    if let IrradianceSource::Synthetic(f) = &mut unreachable.irradiance {
        f.target_penetration = 0.99;
    }
    let mut skewed = desk.clone();
    skewed.substations[0].rho += 0.01;
    let mut renormalized = skewed.clone();
    renormalized.renormalize_shares = true;
    let sweep = SweepSpec::desk_default();
    let estimate = |rocof: f64| estimate_imbalance(&params, rocof, 10_000.0, 0.0).unwrap();

    // (type, accepted, rejected)
    let checks: Vec<(&str, bool, bool)> = vec![
        (
            "IrradianceSeries",
            IrradianceSeries::from_samples(&[(0.0, 0.0), (5.0, 1500.0)], 5.0).is_ok(),
            IrradianceSeries::from_samples(&[(0.0, 10.0), (7.0, 10.0), (10.0, 10.0)], 5.0).is_err()
                && IrradianceSeries::from_samples(&[(5.0, 10.0), (0.0, 10.0)], 5.0).is_err()
                && IrradianceSeries::uniform(0.0, 5.0, vec![-1.0]).is_err()
                && IrradianceSeries::uniform(0.0, 5.0, vec![1500.1]).is_err(),
        ),
        (
            "PvCurve",
            PvCurve::new(1000.0, vec![[0.0, 0.0], [400.0, 0.5], [1000.0, 1.0]]).is_ok(),
            PvCurve::new(1000.0, vec![[0.0, 0.1], [1000.0, 1.0]]).is_err()
                && PvCurve::new(
                    1000.0,
                    vec![[0.0, 0.0], [400.0, 0.6], [700.0, 0.5], [1000.0, 1.0]],
                )
                .is_err()
                && PvCurve::new(1000.0, vec![[0.0, 0.0], [1000.0, 0.9]]).is_err(),
        ),
        (
            "PvPlant",
            PvPlant::new("p", 1.0, flat(0.0)).is_ok(),
            PvPlant::new("p", 0.0, flat(0.0)).is_err()
                && PvPlant::new("p", -5.0, flat(0.0)).is_err(),
        ),
        (
            "SystemParams",
            SystemParams::new(5.0, 0.0, 50.0, 0.0).is_ok(),
            SystemParams::new(0.0, 1.0, 60.0, 0.0).is_err()
                && SystemParams::new(5.0, -0.1, 60.0, 0.0).is_err()
                && SystemParams::new(5.0, 1.0, 0.0, 0.0).is_err()
                && SystemParams::new(5.0, 1.0, 60.0, -1.0).is_err(),
        ),
        (
            "Substation",
            sub(-50.0, 100.0, 0.5).validate().is_ok()
                && pvdr::estimation::validate_shares([("a", 0.25), ("b", 0.75)]).is_ok(),
            sub(100.0, -1.0, 0.5).validate().is_err()
                && sub(100.0, 1.0, 1.5).validate().is_err()
                && pvdr::estimation::validate_shares([("a", 0.25), ("b", 0.7)]).is_err(),
        ),
        (
            "ImbalanceEstimate",
            estimate(-0.3).value < 0.0 && estimate(-0.3).shed_requirement() > 0.0,
            estimate(0.3).value > 0.0 && estimate(0.3).shed_requirement() == 0.0,
        ),
        (
            "DrDecision",
            DrDecision::new(vec![("a".into(), 1.0), ("b".into(), 2.0)]).is_ok(),
            DrDecision::new(vec![("a".into(), -1.0)]).is_err()
                && DrDecision {
                    per_substation: vec![("a".into(), 1.0)],
                    total: 1.1,
                }
                .validate()
                .is_err(),
        ),
        (
            "ErrorReport",
            good_report.validate(&params, -0.3, &[1.0]).is_ok(),
            ErrorReport {
                total_error: good_report.total_error * 1.001,
                ..good_report.clone()
            }
            .validate(&params, -0.3, &[1.0])
            .is_err(),
        ),
        (
            "GovernorParams",
            gov.validate().is_ok()
                && GovernorParams {
                    deadband_hz: 0.0,
                    headroom_mw: 0.0,
                    ..gov
                }
                .validate()
                .is_ok(),
            GovernorParams {
                droop_pu: 0.0,
                ..gov
            }
            .validate()
            .is_err()
                && GovernorParams {
                    deadband_hz: -0.1,
                    ..gov
                }
                .validate()
                .is_err()
                && GovernorParams {
                    time_constant_s: 0.0,
                    ..gov
                }
                .validate()
                .is_err()
                && GovernorParams {
                    headroom_mw: -1.0,
                    ..gov
                }
                .validate()
                .is_err(),
        ),
        (
            "RelayConfig",
            relay.validate(60.0).is_ok()
                && RelayConfig {
                    delay_cycles: 0,
                    ..relay
                }
                .validate(60.0)
                .is_ok(),
            RelayConfig {
                threshold_hz: 60.0,
                ..relay
            }
            .validate(60.0)
            .is_err()
                && RelayConfig {
                    threshold_hz: 61.0,
                    ..relay
                }
                .validate(60.0)
                .is_err(),
        ),
        (
            "Contingency",
            contingency.validate(60.0).is_ok(),
            Contingency {
                generation_loss_mw: 0.0,
                ..contingency
            }
            .validate(60.0)
            .is_err()
                && Contingency {
                    time_s: 61.0,
                    ..contingency
                }
                .validate(60.0)
                .is_err(),
        ),
        (
            "GridState",
            GridState::default().validate(60.0).is_ok()
                && GridState {
                    triggered: true,
                    pending_dr: pending.clone(),
                    ..GridState::default()
                }
                .validate(60.0)
                .is_ok(),
            GridState {
                shed_total: -1.0,
                ..GridState::default()
            }
            .validate(60.0)
            .is_err()
                && GridState {
                    frequency_deviation: -60.0,
                    ..GridState::default()
                }
                .validate(60.0)
                .is_err()
                && GridState {
                    pending_dr: pending,
                    ..GridState::default()
                }
                .validate(60.0)
                .is_err(),
        ),
        (
            "SimResult",
            desk_result.validate(desk.sim.horizon_s).is_ok(),
            SimResult {
                nadir: desk_result.nadir - 0.01,
                ..desk_result.clone()
            }
            .validate(desk.sim.horizon_s)
            .is_err()
                && SimResult {
                    settling_frequency: 59.0,
                    ..desk_result.clone()
                }
                .validate(desk.sim.horizon_s)
                .is_err(),
        ),
        (
            "ScenarioConfig",
            desk.prepare().is_ok() && renormalized.prepare().is_ok(),
            skewed.validate().is_err() && unreachable.prepare().is_err(),
        ),
        (
            "SweepSpec",
            sweep.validate().is_ok(),
            SweepSpec {
                penetration_levels: vec![0.15, 1.0],
                ..sweep.clone()
            }
            .validate()
            .is_err()
                && SweepSpec {
                    benchmark_penetration: 0.7,
                    ..sweep.clone()
                }
                .validate()
                .is_err(),
        ),
        (
            "ComparisonReport",
            ComparisonReport::new(vec![row(5.0)]).validate().is_ok(),
            ComparisonReport::new(vec![row(4.0)]).validate().is_err()
                && ComparisonReport::new(vec![ComparisonRow {
                    shed_error_pct: None,
                    ..row(5.0)
                }])
                .validate()
                .is_err(),
        ),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, accept, reject)| !(*accept && *reject))
        .map(|(name, accept, reject)| format!("{name} (accept {accept}, reject {reject})"))
        .collect();
    Outcome {
        id: "8 type invariants accept valid and reject invalid input",
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} types checked", checks.len())
        } else {
            format!("failing: {}", failed.join("; "))
        },
    }
}

fn main() {
    let mut outcomes = vec![
        identity(),
        closed_loop_oracle(),
        dr_sum(),
        error_decomposition(),
    ];
    outcomes.extend(protocol(&sweep_outcome()));
    outcomes.push(convergence());
    outcomes.push(determinism());
    outcomes.push(invariants());

    println!();
    for o in &outcomes {
        println!(
            "[{}] {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed\n",
        outcomes.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

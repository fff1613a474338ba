//! Acceptance gate: one test per shipping criterion, each printing a
//! single `acceptance NN (...): PASS/FAIL` line (run with `--nocapture`
//! to see them) before asserting. Tolerances are pinned as constants
//! next to each criterion.

use sidwave::blowup::{data_sign_functional, g_transform, test_functional};
use sidwave::diagnostics::{fit_decay_rate, Termination, WeightSpec};
use sidwave::diffusion::{diffusion_gap, lp_lq_decay_check, HeatSpec};
use sidwave::feasibility::{check_feasible, eps_upper_bound, log_log_slope, mu0_curve, solve_feasible};
use sidwave::model::{
    make_grid, sample_initial_data, Damping, Field, ModelSpec, Nonlinearity, Profile, RadialGrid,
};
use sidwave::solver::{run, Observers, RunOutput, StepControl};
use sidwave::verification::{convergence_study, mms_bump, mms_gaussian};
use sidwave_cli::escalate::classify_with_escalation;
use sidwave_cli::config::ExperimentConfig;
use sidwave_cli::summary_util::ClassLabel;

fn verdict(id: u32, label: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {id:02} ({label}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("  {detail}");
    assert!(pass, "acceptance {id:02} ({label}): {detail}");
}

fn bump(amplitude: f64, radius: f64) -> Profile {
    Profile::PolynomialBump {
        amplitude,
        radius,
        smoothness: 3,
    }
}

fn si_model(n: u32, mu: f64, p: f64, nl: Nonlinearity) -> ModelSpec {
    ModelSpec::new(n, Damping::ScaleInvariant { mu }, p, nl).unwrap()
}

struct Case {
    model: ModelSpec,
    grid: RadialGrid,
    u0: Option<Profile>,
    u1: Option<Profile>,
    horizon: f64,
    observers: Observers,
}

fn run_case(case: &Case) -> RunOutput {
    let data = sample_initial_data(case.u0.as_ref(), case.u1.as_ref(), &case.grid).unwrap();
    let ctrl = StepControl::default();
    run(
        &case.model,
        &case.grid,
        &data,
        &ctrl,
        case.horizon,
        &case.observers,
    )
    .unwrap()
}

/// Criterion 1: manufactured-solution convergence order stays
/// second-order (within [1.9, 2.1]) across three successive grid
/// doublings, in one and three dimensions.
#[test]
fn acceptance_01() {
    const ORDER_LO: f64 = 1.9;
    const ORDER_HI: f64 = 2.1;
    let mut detail = String::new();
    let mut pass = true;
    for n in [1u32, 3] {
        let case = mms_gaussian(n).unwrap();
        let report = convergence_study(&case, 250, 4).unwrap();
        for (i, &o) in report.orders.iter().enumerate() {
            if !(ORDER_LO..=ORDER_HI).contains(&o) {
                pass = false;
                detail.push_str(&format!("n={n} refinement {i} order {o:.3} out of window; "));
            }
        }
        detail.push_str(&format!("n={n} orders {:?}; ", report.orders));
    }
    verdict(1, "manufactured-solution order", pass, &detail);
}

/// Criterion 2: undamped linear run conserves the discrete energy to a
/// relative drift below 1e-3 over T = 10 at nr = 2000.
#[test]
fn acceptance_02() {
    const DRIFT_TOL: f64 = 1e-3;
    let case = Case {
        model: si_model(1, 0.0, 2.0, Nonlinearity::None),
        grid: make_grid(12.0, 2000).unwrap(),
        u0: Some(bump(1.0, 1.0)),
        u1: None,
        horizon: 10.0,
        observers: Observers::default(),
    };
    let out = run_case(&case);
    let e0 = out.record.weighted_energy[0];
    let drift = out
        .record
        .weighted_energy
        .iter()
        .map(|e| (e - e0).abs() / e0)
        .fold(0.0f64, f64::max);
    let pass = out.record.status == Termination::Completed && drift < DRIFT_TOL;
    verdict(
        2,
        "free-wave energy conservation",
        pass,
        &format!("relative drift {drift:.2e} (tolerance {DRIFT_TOL:.0e})"),
    );
}

/// Criterion 3: strongly damped linear run with the feasibility-supplied
/// weight decays at least as fast as the target weighted rates, fitted
/// over t in [10, 100] at nr = 8000.
#[test]
fn acceptance_03() {
    const L2_SLACK: f64 = 0.3;
    const ENERGY_SLACK: f64 = 0.5;
    let params = solve_feasible(1, 4.0, None).unwrap();
    let mu = 50.0;
    let case = Case {
        model: si_model(1, mu, 4.0, Nonlinearity::None),
        grid: make_grid(102.0, 8000).unwrap(),
        u0: Some(bump(1.0, 1.0)),
        u1: None,
        horizon: 100.0,
        observers: Observers {
            weight: Some(WeightSpec::new(mu, params.delta).unwrap()),
            stride: 4,
            ..Observers::default()
        },
    };
    let out = run_case(&case);
    let window = (10.0, 100.0);
    let wl2 = fit_decay_rate(&out.record.times, &out.record.weighted_l2, window).unwrap();
    let wen = fit_decay_rate(&out.record.times, &out.record.weighted_energy, window).unwrap();
    let l2_target = -(1.0 - params.eps) + L2_SLACK;
    let en_target = -(3.0 - params.eps) + ENERGY_SLACK;
    let pass = out.record.status == Termination::Completed
        && wl2.exponent <= l2_target
        && wen.exponent <= en_target;
    verdict(
        3,
        "weighted decay rates under strong damping",
        pass,
        &format!(
            "weighted_l2 exponent {:.3} (need <= {l2_target:.3}), weighted_energy exponent {:.3} (need <= {en_target:.3})",
            wl2.exponent, wen.exponent
        ),
    );
}

/// Criterion 4: the effective heat flow's sup-norm decay fits the kernel
/// rate -n/2 within 0.15 for n in {1, 2}.
#[test]
fn acceptance_04() {
    const SLOPE_TOL: f64 = 0.15;
    let grid = make_grid(4.0, 400).unwrap();
    let v0 = {
        let p = bump(1.0, 1.0);
        Field::from_fn(&grid, |r| p.eval(r))
    };
    let times: Vec<f64> = (0..8)
        .map(|k| 10.0 * 10.0f64.powf(k as f64 / 7.0))
        .collect();
    let mut detail = String::new();
    let mut pass = true;
    for n in [1u32, 2] {
        let spec = HeatSpec::new(2.0, n).unwrap();
        let report = lp_lq_decay_check(&spec, &v0, &grid, &times).unwrap();
        if (report.slope - report.expected).abs() > SLOPE_TOL {
            pass = false;
        }
        detail.push_str(&format!(
            "n={n} slope {:.3} vs expected {:.1}; ",
            report.slope, report.expected
        ));
    }
    verdict(4, "heat-side sup-norm rate", pass, &detail);
}

/// Criterion 5: the normalized-shape gap to the effective heat profile
/// decreases strictly over t in {20, 40, 80} for mu = 50, n = 1.
#[test]
fn acceptance_05() {
    let mu = 50.0;
    let grid = make_grid(94.0, 6500).unwrap();
    // The reference evolves u0 alone and its effective time runs a hair
    // fast relative to the wave (an O(1/mu) offset), so the late-time gap
    // has a small positive floor. A wide negative-velocity bump starts
    // the wave variance-deficient in that same direction; the deficit
    // then relaxes monotonically onto the floor and the decrease of the
    // gap is visible across the whole window.
    let case = Case {
        model: si_model(1, mu, 4.0, Nonlinearity::None),
        grid,
        u0: Some(bump(1.0, 4.0)),
        u1: Some(bump(-2.0, 12.0)),
        horizon: 80.0,
        observers: Observers {
            stride: 50,
            trace_times: vec![20.0, 40.0, 80.0],
            ..Observers::default()
        },
    };
    let out = run_case(&case);
    let trace = out.trace.expect("trace requested");
    let heat = HeatSpec::new(mu, 1).unwrap();
    let mut gaps = Vec::new();
    // skip the automatic t = 0 snapshot; compare the three requested times
    for (i, &t) in trace.times.iter().enumerate().skip(trace.times.len() - 3) {
        let reference = heat.evolve(&trace.u0, &grid, t).unwrap();
        gaps.push(diffusion_gap(&trace.fields[i], &reference, &grid, 1).unwrap());
    }
    let pass = out.record.status == Termination::Completed
        && gaps.len() == 3
        && gaps[0] > gaps[1]
        && gaps[1] > gaps[2];
    verdict(
        5,
        "diffusion phenomenon",
        pass,
        &format!("gaps at t = 20/40/80: {gaps:?}"),
    );
}

/// Criterion 6: subcritical focusing with positive data functional blows
/// up with a detection time stable within 5% under one grid refinement;
/// a supercritical power with small data completes a T = 200 run with
/// decaying weighted norms.
#[test]
fn acceptance_06() {
    const T_STAR_REL_TOL: f64 = 0.05;
    let model = si_model(1, 2.0, 2.0, Nonlinearity::AbsPow);
    let mut t_stars = Vec::new();
    for nr in [650usize, 1300] {
        let case = Case {
            model: model.clone(),
            grid: make_grid(6.5, nr).unwrap(),
            u0: Some(bump(5.0, 1.0)),
            u1: Some(bump(5.0, 1.0)),
            horizon: 5.0,
            observers: Observers::default(),
        };
        let out = run_case(&case);
        assert_eq!(out.record.status, Termination::BlowupDetected);
        t_stars.push(out.record.t_star.unwrap());
    }
    let sign = {
        let grid = make_grid(6.5, 650).unwrap();
        let data =
            sample_initial_data(Some(&bump(5.0, 1.0)), Some(&bump(5.0, 1.0)), &grid).unwrap();
        data_sign_functional(&data, &grid, &model).unwrap()
    };
    let rel = (t_stars[0] - t_stars[1]).abs() / t_stars[1];

    // supercritical, small data: global-looking with decaying weighted norms
    let params = solve_feasible(1, 4.0, None).unwrap();
    let case = Case {
        model: si_model(1, 2.0, 4.0, Nonlinearity::AbsPow),
        grid: make_grid(202.0, 4000).unwrap(),
        u0: Some(bump(0.05, 1.0)),
        u1: None,
        horizon: 200.0,
        observers: Observers {
            weight: Some(WeightSpec::new(2.0, params.delta).unwrap()),
            stride: 8,
            ..Observers::default()
        },
    };
    let out = run_case(&case);
    let window = (20.0, 200.0);
    let wl2 = fit_decay_rate(&out.record.times, &out.record.weighted_l2, window).unwrap();
    let wen = fit_decay_rate(&out.record.times, &out.record.weighted_energy, window).unwrap();

    let pass = sign > 0.0
        && rel <= T_STAR_REL_TOL
        && out.record.status == Termination::Completed
        && wl2.exponent < 0.0
        && wen.exponent < 0.0;
    verdict(
        6,
        "subcritical blow-up vs supercritical decay",
        pass,
        &format!(
            "sign functional {sign:.3}, t* {:.4}/{:.4} (rel diff {rel:.3}), supercritical status {:?} with weighted_l2 exponent {:.3} and weighted_energy exponent {:.3}",
            t_stars[0], t_stars[1], out.record.status, wl2.exponent, wen.exponent
        ),
    );
}

const ESCALATION_BASE: &str = r#"
[model]
n = 1
p = 3.5
nonlinearity = "abs-pow"
[model.damping]
kind = "scale-invariant"
mu = 0.5
[data.u0]
kind = "zero"
[data.u1]
kind = "polynomial-bump"
amplitude = 0.5
radius = 1.0
[grid]
nr = 600
[control]
blowup_threshold = 1e6
[run]
horizon = 10.0
snapshot_stride = 4
[weight]
mode = "auto"
[escalate]
enabled = true
max_steps = 6
amp_factor = 2.0
horizon_factor = 1.5
"#;

/// Criterion 7: in the weakly damped window between the parabolic
/// critical power and the shifted one, positive-velocity data blows up
/// under geometric (amplitude, horizon) escalation, while the same
/// ladder under strong damping with small data stays global-looking.
/// The escalation path is recorded either way.
#[test]
fn acceptance_07() {
    let cfg = ExperimentConfig::from_toml_str(ESCALATION_BASE, &[]).unwrap();
    let weak = classify_with_escalation(&cfg);
    let mut detail = String::from("weak damping ladder: ");
    for r in &weak.rungs {
        detail.push_str(&format!(
            "[rung {} A-scale {} T {:.1} -> {}] ",
            r.rung, r.amplitude_scale, r.horizon, r.label
        ));
    }

    let strong_toml = ESCALATION_BASE
        .replace("mu = 0.5", "mu = 50.0")
        .replace("amplitude = 0.5", "amplitude = 0.05");
    let cfg = ExperimentConfig::from_toml_str(&strong_toml, &[]).unwrap();
    let strong = classify_with_escalation(&cfg);
    detail.push_str("strong damping ladder: ");
    for r in &strong.rungs {
        detail.push_str(&format!(
            "[rung {} A-scale {} T {:.1} -> {}] ",
            r.rung, r.amplitude_scale, r.horizon, r.label
        ));
    }

    let pass = weak.label == ClassLabel::BlowUp && strong.label == ClassLabel::GlobalLooking;
    verdict(7, "escalation protocol outcomes", pass, &detail);
}

/// Criterion 8: the constructive minimal-damping curve scales like an
/// inverse square of the slack: log-log slope in [-2.5, -1.5] for
/// n = 1, p = 4, slack in [1e-3, 1e-1].
#[test]
fn acceptance_08() {
    const SLOPE_LO: f64 = -2.5;
    const SLOPE_HI: f64 = -1.5;
    let eps: Vec<f64> = (0..9)
        .map(|k| 1e-3 * 100.0f64.powf(k as f64 / 8.0))
        .collect();
    let points = mu0_curve(1, 4.0, &eps).unwrap();
    let mu0: Vec<f64> = points.iter().map(|p| p.mu0).collect();
    let slope = log_log_slope(&eps, &mu0).unwrap();
    let pass = (SLOPE_LO..=SLOPE_HI).contains(&slope);
    verdict(
        8,
        "minimal-damping slack scaling",
        pass,
        &format!("log-log slope {slope:.3} (window [{SLOPE_LO}, {SLOPE_HI}])"),
    );
}

/// Criterion 9: a thousand random admissible (n, p, slack) inputs all
/// produce parameter tuples that the independent inequality checker
/// accepts.
#[test]
fn acceptance_09() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xacce_97a9);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        let n = rng.gen_range(1u32..=3);
        let p_cap = match n {
            1 => 6.0,
            2 => 4.0,
            _ => 3.0,
        };
        let p_crit = 1.0 + 2.0 / f64::from(n);
        let x: f64 = rng.gen_range(0.01..0.99);
        let p = p_crit + x * (p_cap - p_crit);
        let bound = eps_upper_bound(n, p).unwrap();
        let eps = bound * rng.gen_range(1e-3..0.999);
        let params = solve_feasible(n, p, Some(eps)).unwrap();
        let violations = check_feasible(&params);
        if !violations.is_empty() {
            failures.push(format!(
                "trial {trial} (n={n}, p={p:.3}, eps={eps:.3e}): {violations:?}"
            ));
        }
    }
    let pass = failures.is_empty();
    verdict(
        9,
        "random feasibility tuples pass the checker",
        pass,
        &format!("{} failures of 1000{}", failures.len(), {
            if failures.is_empty() {
                String::new()
            } else {
                format!("; first: {}", failures[0])
            }
        }),
    );
}

/// Criterion 10: on a genuine focusing trace the space-time functional
/// identity closes within 5% of |I_R| for R in {8, 16, 32}, and the
/// divergence-form transform residuals vanish to 1e-12 in all three
/// damping regimes.
#[test]
fn acceptance_10() {
    const RESIDUAL_FRACTION: f64 = 0.05;
    const G_RESIDUAL_TOL: f64 = 1e-12;
    let model = si_model(1, 2.0, 2.0, Nonlinearity::AbsPow);
    let grid = make_grid(35.2, 1760).unwrap();
    let case = Case {
        model: model.clone(),
        grid,
        u0: Some(bump(0.01, 1.0)),
        u1: Some(bump(0.01, 1.0)),
        horizon: 33.0,
        observers: Observers {
            stride: 100,
            // snapshot spacing 0.04: the time quadrature must resolve the
            // cutoff's derivative band even at the smallest scale R = 8
            trace_every: Some(4),
            ..Observers::default()
        },
    };
    let out = run_case(&case);
    assert_eq!(out.record.status, Termination::Completed);
    let trace = out.trace.expect("trace requested");
    let mut detail = String::new();
    let mut pass = true;
    for r_scale in [8.0, 16.0, 32.0] {
        let report = test_functional(&trace, &model, &grid, r_scale).unwrap();
        let frac = report.residual.abs() / report.i_r.abs();
        // NaN-safe: a NaN fraction must fail, and `frac < bound` is false then
        pass &= frac < RESIDUAL_FRACTION;
        detail.push_str(&format!(
            "R={r_scale}: I_R {:.3e} residual fraction {:.4}; ",
            report.i_r, frac
        ));
    }
    let regimes = [
        si_model(1, 3.0, 2.0, Nonlinearity::AbsPow),
        si_model(1, 0.5, 2.0, Nonlinearity::AbsPow),
        ModelSpec::new(1, Damping::PowerLaw { beta: 2.0 }, 2.0, Nonlinearity::AbsPow).unwrap(),
    ];
    for m in &regimes {
        let tr = g_transform(m, None).unwrap();
        let worst = [0.0, 0.37, 1.0, 10.0, 100.0]
            .iter()
            .map(|&t| tr.residual(t).abs())
            .fold(0.0f64, f64::max);
        if worst > G_RESIDUAL_TOL {
            pass = false;
            detail.push_str(&format!("g-residual {worst:.2e} too large; "));
        }
    }
    detail.push_str("g-residuals <= 1e-12 in all three regimes");
    verdict(10, "space-time functional identity", pass, &detail);
}

/// Criterion 11: the self-similar kernel has unit mass within 10 dr^2
/// for n in {1, 2, 3} and t in {0.5, 1, 10}.
#[test]
fn acceptance_11() {
    let grid = make_grid(40.0, 2000).unwrap();
    let dr = grid.point(1) - grid.point(0);
    let tol = 10.0 * dr * dr;
    let mut detail = String::new();
    let mut pass = true;
    for n in 1u32..=3 {
        let spec = HeatSpec::new(2.0, n).unwrap();
        for t in [0.5, 1.0, 10.0] {
            let mass = spec.kernel_mass(t, &grid).unwrap();
            let err = (mass - 1.0).abs();
            if err > tol {
                pass = false;
                detail.push_str(&format!("n={n} t={t}: |mass-1| = {err:.2e}; "));
            }
        }
    }
    if pass {
        detail = format!("all nine kernel masses within {tol:.1e} of 1");
    }
    verdict(11, "kernel normalization", pass, &detail);
}

/// The bump manufactured case is part of the public surface; keep it
/// exercised at acceptance level too (same order window as criterion 1).
#[test]
fn manufactured_bump_order_check() {
    let case = mms_bump(1).unwrap();
    let report = convergence_study(&case, 250, 3).unwrap();
    let last = *report.orders.last().unwrap();
    assert!(
        (1.9..=2.1).contains(&last),
        "bump case order {last}"
    );
}

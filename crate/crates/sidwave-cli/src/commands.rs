//! One function per subcommand. Each loads nothing itself: it receives
//! the resolved configuration, runs the experiment, writes a CSV table
//! and a `key = value` summary into the output directory, prints the
//! summary to stdout, and returns the process exit code (0 for
//! completed experiments — including physically meaningful blow-up —
//! while configuration problems exit 2 and numerical instability
//! exits 3).

use std::path::Path;
use std::time::Instant;

use crate::config::{prepare, ExperimentConfig};
use crate::escalate::classify_with_escalation;
use crate::summary_util::{fit_series, ClassLabel};
use crate::table::{fmt_f64, out_path, write_csv, Summary};
use sidwave::blowup::{data_sign_functional, g_transform, test_functional};
use sidwave::diagnostics::Termination;
use sidwave::diffusion::HeatSpec;
use sidwave::feasibility::{log_log_slope, mu0_curve};
use sidwave::model::{Damping, Nonlinearity};
use sidwave::solver::run;
use sidwave::verification::{convergence_study, mms_bump, mms_gaussian};
use sidwave::{Error, Result};

pub const RUN_CSV_HEADER: [&str; 5] = ["t", "l2", "weighted_l2", "weighted_energy", "supnorm"];

fn csv_name(cfg: &ExperimentConfig, default: &str) -> String {
    cfg.output.csv_path.clone().unwrap_or_else(|| default.to_string())
}

fn summary_name(cfg: &ExperimentConfig) -> String {
    cfg.output
        .summary_path
        .clone()
        .unwrap_or_else(|| "summary.txt".to_string())
}

fn opt_f64(v: Option<f64>) -> String {
    fmt_f64(v.unwrap_or(f64::NAN))
}

/// `run`: one simulation, full time series, fitted exponents.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let started = Instant::now();
    let prepared = prepare(cfg)?;
    let output = run(
        &prepared.model,
        &prepared.grid,
        &prepared.data,
        &prepared.control,
        prepared.horizon,
        &prepared.observers,
    )?;
    let record = &output.record;

    let rows: Vec<Vec<String>> = (0..record.times.len())
        .map(|i| {
            vec![
                fmt_f64(record.times[i]),
                fmt_f64(record.l2[i]),
                fmt_f64(record.weighted_l2[i]),
                fmt_f64(record.weighted_energy[i]),
                fmt_f64(record.supnorm[i]),
            ]
        })
        .collect();
    write_csv(
        &out_path(out_dir, &csv_name(cfg, "series.csv")),
        &RUN_CSV_HEADER,
        &rows,
    )?;

    let mut summary = Summary::new();
    summary.extend_raw(cfg.echo_lines());
    summary.push("status", record.status);
    if let Some(t_star) = record.t_star {
        summary.push_f64("t_star", t_star);
    }
    summary.push_f64("blowup_threshold", record.threshold);
    summary.push_f64("dt_initial", record.dt_initial);
    summary.push_f64("dt_final", record.dt_final);
    summary.push("refinements", record.refinements);
    summary.push("steps", record.steps);
    if record.status == Termination::Completed {
        let h = prepared.horizon;
        summary.push(
            "l2_exponent",
            opt_f64(fit_series(record, &record.l2, h)),
        );
        summary.push(
            "weighted_l2_exponent",
            opt_f64(fit_series(record, &record.weighted_l2, h)),
        );
        summary.push(
            "weighted_energy_exponent",
            opt_f64(fit_series(record, &record.weighted_energy, h)),
        );
    }
    let data_sign = data_sign_functional(&prepared.data, &prepared.grid, &prepared.model)
        .unwrap_or(f64::NAN);
    summary.push_f64("data_sign", data_sign);
    summary.push_f64("wall_clock_s", started.elapsed().as_secs_f64());
    summary.write(&out_path(out_dir, &summary_name(cfg)))?;
    summary.print();

    Ok(match record.status {
        Termination::Unstable => 3,
        _ => 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    P,
    Mu,
}

impl SweepAxis {
    fn column(self) -> &'static str {
        match self {
            SweepAxis::P => "p",
            SweepAxis::Mu => "mu",
        }
    }

    fn apply(self, cfg: &ExperimentConfig, value: f64) -> ExperimentConfig {
        let mut member = cfg.clone();
        match self {
            SweepAxis::P => member.model.p = value,
            SweepAxis::Mu => member.model.damping.mu = Some(value),
        }
        member
    }
}

struct SweepRow {
    value: f64,
    probe: bool,
    label: ClassLabel,
    detail: String,
    rung: usize,
    amplitude_scale: f64,
    horizon: f64,
    t_star: Option<f64>,
    weighted_l2_exponent: Option<f64>,
}

fn sweep_member(cfg: &ExperimentConfig, axis: SweepAxis, value: f64, probe: bool) -> SweepRow {
    let outcome = classify_with_escalation(&axis.apply(cfg, value));
    let deciding = &outcome.rungs[outcome.deciding_rung];
    SweepRow {
        value,
        probe,
        label: outcome.label,
        detail: deciding.detail.clone(),
        rung: deciding.rung,
        amplitude_scale: deciding.amplitude_scale,
        horizon: deciding.horizon,
        t_star: deciding.t_star,
        weighted_l2_exponent: deciding.weighted_l2_exponent,
    }
}

/// `sweep-p` / `sweep-mu`: classify each parameter value (optionally
/// through the escalation ladder), then refine the empirical threshold
/// by bisecting between the largest blow-up value and the smallest
/// global-looking value. Member failures are recorded as rows, not
/// fatal errors, and the table is sorted by parameter so the output is
/// independent of list order and scheduling.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
    axis: SweepAxis,
) -> Result<i32> {
    let started = Instant::now();
    let mut values = match axis {
        SweepAxis::P => cfg.sweep.p_list.clone(),
        SweepAxis::Mu => cfg.sweep.mu_list.clone(),
    };
    values.sort_by(f64::total_cmp);

    let mut rows: Vec<SweepRow> =
        crate::table::parallel_map(&values, jobs, |&v| sweep_member(cfg, axis, v, false));

    // threshold bracket: blow-up on the low side, global-looking above
    let mut lo = rows
        .iter()
        .filter(|r| r.label == ClassLabel::BlowUp)
        .map(|r| r.value)
        .fold(f64::NAN, f64::max);
    let mut hi = rows
        .iter()
        .filter(|r| r.label == ClassLabel::GlobalLooking)
        .map(|r| r.value)
        .fold(f64::NAN, f64::min);
    let mut probes = 0usize;
    if lo.is_finite() && hi.is_finite() && lo < hi {
        for _ in 0..cfg.sweep.bisect_iters {
            let mid = 0.5 * (lo + hi);
            let row = sweep_member(cfg, axis, mid, true);
            let label = row.label;
            rows.push(row);
            probes += 1;
            match label {
                ClassLabel::BlowUp => lo = mid,
                ClassLabel::GlobalLooking => hi = mid,
                _ => break,
            }
        }
    }
    let threshold = if lo.is_finite() && hi.is_finite() && lo < hi {
        0.5 * (lo + hi)
    } else {
        f64::NAN
    };

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.value),
                (r.probe as u8).to_string(),
                r.label.to_string(),
                r.rung.to_string(),
                fmt_f64(r.amplitude_scale),
                fmt_f64(r.horizon),
                opt_f64(r.t_star),
                opt_f64(r.weighted_l2_exponent),
            ]
        })
        .collect();
    let header = [
        axis.column(),
        "probe",
        "status",
        "rung",
        "amplitude_scale",
        "horizon",
        "t_star",
        "weighted_l2_exponent",
    ];
    let default_name = match axis {
        SweepAxis::P => "sweep_p.csv",
        SweepAxis::Mu => "sweep_mu.csv",
    };
    write_csv(&out_path(out_dir, &csv_name(cfg, default_name)), &header, &csv_rows)?;

    let mut summary = Summary::new();
    summary.extend_raw(cfg.echo_lines());
    summary.push("sweep_axis", axis.column());
    summary.push("members", values.len());
    summary.push("probes", probes);
    summary.push(
        &format!("{}_hat", axis.column()),
        fmt_f64(threshold),
    );
    summary.push("bracket_low", fmt_f64(lo));
    summary.push("bracket_high", fmt_f64(hi));
    for r in rows.iter().filter(|r| r.label == ClassLabel::Error) {
        summary.push_raw(format!(
            "member_error.{} = {}",
            fmt_f64(r.value),
            r.detail
        ));
    }
    summary.push_f64("wall_clock_s", started.elapsed().as_secs_f64());
    summary.write(&out_path(out_dir, &summary_name(cfg)))?;
    summary.print();
    Ok(0)
}

/// `feasibility`: the constructive minimal-damping curve and its
/// log-log slope.
pub fn cmd_feasibility(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let started = Instant::now();
    let n = cfg.feasibility.n.unwrap_or(cfg.model.n);
    let p = cfg.feasibility.p.unwrap_or(cfg.model.p);
    let eps_list = &cfg.feasibility.eps_list;
    if eps_list.is_empty() {
        return Err(Error::Config(
            "feasibility.eps_list must contain at least one slack value".into(),
        ));
    }
    let curve = mu0_curve(n, p, eps_list)?;
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|pt| {
            vec![
                fmt_f64(pt.eps),
                fmt_f64(pt.delta),
                fmt_f64(pt.nu),
                fmt_f64(pt.mu0),
            ]
        })
        .collect();
    write_csv(
        &out_path(out_dir, &csv_name(cfg, "feasibility.csv")),
        &["eps", "delta", "nu", "mu0"],
        &rows,
    )?;

    let slope = if curve.len() >= 2 {
        let mu0s: Vec<f64> = curve.iter().map(|pt| pt.mu0).collect();
        log_log_slope(eps_list, &mu0s)?
    } else {
        f64::NAN
    };
    let mut summary = Summary::new();
    summary.extend_raw(cfg.echo_lines());
    summary.push("feasibility_n", n);
    summary.push_f64("feasibility_p", p);
    summary.push("points", curve.len());
    summary.push_f64("mu0_loglog_slope", slope);
    summary.push_f64("wall_clock_s", started.elapsed().as_secs_f64());
    summary.write(&out_path(out_dir, &summary_name(cfg)))?;
    summary.print();
    Ok(0)
}

/// `diffusion`: run the linear model, evolve the matching heat flow
/// from the same initial displacement, and report the normalized shape
/// gap at the requested times.
pub fn cmd_diffusion(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let started = Instant::now();
    let mut prepared = prepare(cfg)?;
    if prepared.model.nonlinearity != Nonlinearity::None {
        return Err(Error::Config(
            "diffusion comparison requires model.nonlinearity = \"none\"".into(),
        ));
    }
    let Damping::ScaleInvariant { mu } = prepared.model.damping else {
        return Err(Error::Config(
            "diffusion comparison requires scale-invariant damping".into(),
        ));
    };
    let heat = HeatSpec::new(mu, prepared.model.n)?;
    let times = &cfg.diffusion.compare_times;
    if times.is_empty() {
        return Err(Error::Config(
            "diffusion.compare_times must contain at least one time".into(),
        ));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(
                "diffusion.compare_times must be strictly increasing".into(),
            ));
        }
    }
    if times[0] <= 0.0 {
        return Err(Error::Config(
            "diffusion.compare_times must be positive".into(),
        ));
    }
    if *times.last().unwrap() > prepared.horizon {
        return Err(Error::Config(format!(
            "largest comparison time {} exceeds run.horizon {}",
            times.last().unwrap(),
            prepared.horizon
        )));
    }
    prepared.observers.trace_times = times.clone();

    let output = run(
        &prepared.model,
        &prepared.grid,
        &prepared.data,
        &prepared.control,
        prepared.horizon,
        &prepared.observers,
    )?;
    if output.record.status != Termination::Completed {
        return Err(Error::Data(format!(
            "linear run ended with status {} before the comparison window",
            output.record.status
        )));
    }
    let trace = output.trace.expect("trace requested");

    let mut rows = Vec::with_capacity(times.len());
    let mut gaps = Vec::with_capacity(times.len());
    for &target in times {
        let idx = trace
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target).abs().total_cmp(&(b.1 - target).abs())
            })
            .map(|(i, _)| i)
            .expect("trace nonempty");
        let t_actual = trace.times[idx];
        let reference = heat.evolve(&prepared.data.u0, &prepared.grid, t_actual)?;
        let gap = sidwave::diffusion::diffusion_gap(
            &trace.fields[idx],
            &reference,
            &prepared.grid,
            prepared.model.n,
        )?;
        rows.push(vec![fmt_f64(t_actual), fmt_f64(gap)]);
        gaps.push(gap);
    }
    write_csv(
        &out_path(out_dir, &csv_name(cfg, "diffusion.csv")),
        &["t", "gap"],
        &rows,
    )?;

    let mut summary = Summary::new();
    summary.extend_raw(cfg.echo_lines());
    summary.push("comparisons", gaps.len());
    summary.push(
        "gap_strictly_decreasing",
        gaps.windows(2).all(|w| w[1] < w[0]),
    );
    summary.push_f64("wall_clock_s", started.elapsed().as_secs_f64());
    summary.write(&out_path(out_dir, &summary_name(cfg)))?;
    summary.print();
    Ok(0)
}

/// `testfn`: one solver run traced densely enough for the smallest
/// cutoff scale, then the integrated-identity report at every requested
/// scale.
pub fn cmd_testfn(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let started = Instant::now();
    let mut prepared = prepare(cfg)?;
    g_transform(&prepared.model, None)?;
    let mut r_list = cfg.testfn.r_list.clone();
    if r_list.is_empty() {
        return Err(Error::Config(
            "testfn.r_list must contain at least one cutoff scale".into(),
        ));
    }
    r_list.sort_by(f64::total_cmp);
    if !(r_list[0] > 0.0 && r_list.iter().all(|r| r.is_finite())) {
        return Err(Error::Config(
            "testfn.r_list entries must be positive and finite".into(),
        ));
    }
    let r_top = *r_list.last().unwrap();
    if r_top > prepared.horizon {
        return Err(Error::Config(format!(
            "cutoff scale {r_top} exceeds run.horizon {}; the trace cannot cover it",
            prepared.horizon
        )));
    }
    // trace densely enough that every scale sees spacing well below its
    // R/32 requirement
    let spacing_target = r_list[0] / 64.0;
    let dt_nominal = prepared.control.cfl * prepared.grid.dr;
    let every = ((spacing_target / dt_nominal).floor() as usize).max(1);
    prepared.observers.trace_every = Some(every);

    let output = run(
        &prepared.model,
        &prepared.grid,
        &prepared.data,
        &prepared.control,
        prepared.horizon,
        &prepared.observers,
    )?;
    if output.record.status == Termination::Unstable {
        return Err(Error::Data(
            "run went unstable before the trace could cover the cutoff scales".into(),
        ));
    }
    let trace = output.trace.expect("trace requested");

    let mut summary = Summary::new();
    summary.extend_raw(cfg.echo_lines());
    summary.push("status", output.record.status);
    if let Some(t_star) = output.record.t_star {
        summary.push_f64("t_star", t_star);
    }
    summary.push("trace_snapshots", trace.times.len());

    let mut rows = Vec::with_capacity(r_list.len());
    for &r_scale in &r_list {
        match test_functional(&trace, &prepared.model, &prepared.grid, r_scale) {
            Ok(report) => rows.push(vec![
                fmt_f64(report.r_scale),
                fmt_f64(report.q),
                fmt_f64(report.i_r),
                fmt_f64(report.j1),
                fmt_f64(report.j2),
                fmt_f64(report.j3),
                fmt_f64(report.boundary_term),
                fmt_f64(report.residual),
                fmt_f64(report.i_r_scaled),
            ]),
            Err(e) => {
                summary.push_raw(format!("testfn_error.{} = {e}", fmt_f64(r_scale)));
                let nan = fmt_f64(f64::NAN);
                let mut row = vec![fmt_f64(r_scale)];
                row.extend(std::iter::repeat_n(nan, 8));
                rows.push(row);
            }
        }
    }
    write_csv(
        &out_path(out_dir, &csv_name(cfg, "testfn.csv")),
        &[
            "r_scale",
            "q",
            "i_r",
            "j1",
            "j2",
            "j3",
            "boundary_term",
            "residual",
            "i_r_scaled",
        ],
        &rows,
    )?;
    summary.push_f64("wall_clock_s", started.elapsed().as_secs_f64());
    summary.write(&out_path(out_dir, &summary_name(cfg)))?;
    summary.print();
    Ok(0)
}

/// `convergence`: manufactured-solution order study at doubling
/// resolutions.
pub fn cmd_convergence(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let started = Instant::now();
    let section = &cfg.convergence;
    let n = section.n.unwrap_or(cfg.model.n);
    let case = match section.case.as_str() {
        "gaussian" => mms_gaussian(n)?,
        "bump" => mms_bump(n)?,
        other => {
            return Err(Error::Config(format!(
                "unknown convergence case '{other}' (expected gaussian or bump)"
            )))
        }
    };
    let report = convergence_study(&case, section.base_nr, section.levels)?;
    let rows: Vec<Vec<String>> = report
        .nrs
        .iter()
        .enumerate()
        .map(|(i, &nr)| {
            vec![
                nr.to_string(),
                fmt_f64(report.errors[i]),
                if i == 0 {
                    String::new()
                } else {
                    fmt_f64(report.orders[i - 1])
                },
            ]
        })
        .collect();
    write_csv(
        &out_path(out_dir, &csv_name(cfg, "convergence.csv")),
        &["nr", "error", "order"],
        &rows,
    )?;

    let mut summary = Summary::new();
    summary.extend_raw(cfg.echo_lines());
    summary.push("case", &report.label);
    summary.push("levels", report.nrs.len());
    summary.push_f64(
        "final_order",
        report.orders.last().copied().unwrap_or(f64::NAN),
    );
    summary.push_f64("wall_clock_s", started.elapsed().as_secs_f64());
    summary.write(&out_path(out_dir, &summary_name(cfg)))?;
    summary.print();
    Ok(0)
}

//! Geometric (amplitude, horizon) escalation for borderline blow-up
//! hunting.
//!
//! Whether blow-up manifests inside a fixed numerical window depends on
//! data size and horizon in a way that is unknown a priori, so instead
//! of guessing a single setting the protocol climbs a ladder: rung `k`
//! scales the data amplitude by `amp_factor^k` and the horizon by
//! `horizon_factor^k`, stopping at the first rung that detects blow-up.
//! The full path is recorded; a verdict of "global-looking" refers to
//! the top rung (the most demanding one reached).

use crate::config::{prepare, ExperimentConfig};
use crate::summary_util::{classify_record, fit_weighted_l2, ClassLabel};
use sidwave::solver::run;
use sidwave::{Error, Result};

#[derive(Debug, Clone)]
pub struct EscalationRung {
    pub rung: usize,
    pub amplitude_scale: f64,
    pub horizon: f64,
    /// Classification label for this rung, or `error` with the message
    /// kept alongside.
    pub label: ClassLabel,
    pub detail: String,
    pub t_star: Option<f64>,
    pub weighted_l2_exponent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EscalationOutcome {
    pub rungs: Vec<EscalationRung>,
    /// Verdict: the first blow-up rung decides, otherwise the top rung.
    pub label: ClassLabel,
    pub deciding_rung: usize,
}

/// Build the rung-`k` configuration: scaled amplitudes, stretched
/// horizon, and the grid re-sized to keep the spatial step of the base
/// configuration.
fn rung_config(cfg: &ExperimentConfig, k: usize) -> Result<ExperimentConfig> {
    let esc = &cfg.escalate;
    let amp = esc.amp_factor.powi(k as i32);
    let mut member = cfg.clone();
    member.run.horizon = cfg.run.horizon * esc.horizon_factor.powi(k as i32);
    if let Some(section) = member.data.u0.as_mut() {
        section.amplitude *= amp;
    }
    if let Some(section) = member.data.u1.as_mut() {
        section.amplitude *= amp;
    }
    if k > 0 {
        if cfg.grid.r_max.is_some() {
            return Err(Error::Config(
                "escalation needs automatic grid sizing; drop grid.r_max".into(),
            ));
        }
        // keep dr fixed while the domain grows with the horizon
        let base_r_max = cfg.resolve_r_max(cfg.run.horizon)?;
        let dr = base_r_max / cfg.grid.nr as f64;
        let r_max = member.resolve_r_max(member.run.horizon)?;
        member.grid.nr = (r_max / dr).ceil() as usize;
    }
    Ok(member)
}

fn run_rung(cfg: &ExperimentConfig, k: usize) -> EscalationRung {
    let scale = cfg.escalate.amp_factor.powi(k as i32);
    let horizon = cfg.run.horizon * cfg.escalate.horizon_factor.powi(k as i32);
    let attempt = rung_config(cfg, k).and_then(|member| {
        let prepared = prepare(&member)?;
        run(
            &prepared.model,
            &prepared.grid,
            &prepared.data,
            &prepared.control,
            prepared.horizon,
            &prepared.observers,
        )
    });
    match attempt {
        Ok(output) => {
            let record = &output.record;
            let wexp = fit_weighted_l2(record, horizon);
            let label = classify_record(record, wexp);
            EscalationRung {
                rung: k,
                amplitude_scale: scale,
                horizon,
                label,
                detail: record.status.to_string(),
                t_star: record.t_star,
                weighted_l2_exponent: wexp,
            }
        }
        Err(e) => EscalationRung {
            rung: k,
            amplitude_scale: scale,
            horizon,
            label: ClassLabel::Error,
            detail: e.to_string(),
            t_star: None,
            weighted_l2_exponent: None,
        },
    }
}

/// Classify a configuration, climbing the escalation ladder when the
/// `[escalate]` section enables it (a disabled ladder has exactly one
/// rung: the configuration as given).
pub fn classify_with_escalation(cfg: &ExperimentConfig) -> EscalationOutcome {
    let steps = if cfg.escalate.enabled {
        cfg.escalate.max_steps.max(1)
    } else {
        1
    };
    let mut rungs = Vec::with_capacity(steps);
    for k in 0..steps {
        let rung = run_rung(cfg, k);
        let decided = rung.label == ClassLabel::BlowUp;
        rungs.push(rung);
        if decided {
            break;
        }
    }
    let deciding_rung = rungs.len() - 1;
    let label = rungs[deciding_rung].label;
    EscalationOutcome {
        rungs,
        label,
        deciding_rung,
    }
}

//! Shared classification and fitting rules used by runs, sweeps, and
//! the escalation ladder.

use sidwave::diagnostics::{fit_decay_rate, RunRecord, Termination};

/// Outcome label for a single experiment in a sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    /// The solver flagged finite-time blow-up.
    BlowUp,
    /// Completed at the horizon with a negative fitted weighted-L2
    /// exponent — the honest numerical proxy for global existence,
    /// which is unobservable in finite time.
    GlobalLooking,
    /// Completed, but without evidence of decay.
    Undecided,
    Unstable,
    Error,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassLabel::BlowUp => "blow-up",
            ClassLabel::GlobalLooking => "global-looking",
            ClassLabel::Undecided => "undecided",
            ClassLabel::Unstable => "unstable",
            ClassLabel::Error => "error",
        })
    }
}

/// Decay-fit window for a run of length `horizon`: the last ninety
/// percent of the run, but never starting before `t = 1` where the
/// `(1 + t)` power laws have not settled.
pub fn fit_window(horizon: f64) -> (f64, f64) {
    (f64::max(1.0, 0.1 * horizon), horizon)
}

/// Fitted power-law exponent of one recorded series over the standard
/// window, when the fit is well posed (enough samples, positive data).
pub fn fit_series(record: &RunRecord, series: &[f64], horizon: f64) -> Option<f64> {
    fit_decay_rate(&record.times, series, fit_window(horizon))
        .ok()
        .map(|fit| fit.exponent)
}

pub fn fit_weighted_l2(record: &RunRecord, horizon: f64) -> Option<f64> {
    fit_series(record, &record.weighted_l2, horizon)
}

pub fn classify_record(record: &RunRecord, weighted_l2_exponent: Option<f64>) -> ClassLabel {
    match record.status {
        Termination::BlowupDetected => ClassLabel::BlowUp,
        Termination::Unstable => ClassLabel::Unstable,
        Termination::Completed => match weighted_l2_exponent {
            Some(e) if e < 0.0 => ClassLabel::GlobalLooking,
            _ => ClassLabel::Undecided,
        },
    }
}

//! Weighted functionals, decay-rate fitting, and termination classification.
//!
//! The central object is the weight `exp(2 psi)` with
//! `psi(t, r) = a r^2 / (1+t)^2` and `a = mu / (2 (2 + delta))`. That choice
//! of `a` is exactly the one making `|grad psi|^2 / (-psi_t) = b(t) / (2+delta)`
//! for the scale-invariant damping `b(t) = mu/(1+t)`, which is what the
//! energy machinery needs. Weighted L2 mass and weighted energy are the
//! quantities whose decay rates the experiments fit.

use crate::error::{Error, Result};
use crate::model::{radial_derivative, sphere_measure, Field, RadialGrid};
use crate::solver::SolutionState;

/// Exponents above this make `exp` overflow to infinity; flagged instead.
const EXP_GUARD: f64 = 705.0;

/// Number of trailing recorded sup-norm samples that must be strictly
/// increasing for a threshold crossing to count as blow-up.
pub const PATTERN_WINDOW: usize = 20;
/// Records shorter than the full window still classify, but only with at
/// least this many strictly increasing samples.
pub const PATTERN_MIN: usize = 5;

/// The Gaussian weight `exp(2 psi)` parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    /// The damping size the weight was derived from.
    pub mu: f64,
    /// The slack parameter `delta > 0`.
    pub delta: f64,
    /// Weight scale `a = mu / (2 (2 + delta))`.
    pub a: f64,
}

impl WeightSpec {
    pub fn new(mu: f64, delta: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("weight needs mu >= 0, got {mu}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("weight needs delta > 0, got {delta}")));
        }
        Ok(WeightSpec { mu, delta, a: mu / (2.0 * (2.0 + delta)) })
    }
}

/// `psi(t, r) = a r^2 / (1 + t)^2`.
pub fn psi(t: f64, r: f64, w: &WeightSpec) -> f64 {
    debug_assert!(t >= 0.0);
    let s = r / (1.0 + t);
    w.a * s * s
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Reached the horizon with finite values and no blow-up pattern.
    Completed,
    /// Sup-norm crossed the blow-up threshold while strictly increasing
    /// over the trailing sample window.
    BlowupDetected,
    /// Non-finite values appeared without the blow-up pattern.
    Unstable,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::BlowupDetected => "blowup_detected",
            Termination::Unstable => "unstable",
        })
    }
}

/// Time series of diagnostics sampled during a run, plus the outcome.
///
/// `l2` is the squared mass `integral of u^2 dx`; `weighted_l2` is
/// `integral of e^{2 psi} u^2 dx`; `weighted_energy` is
/// `integral of e^{2 psi} (u_t^2 + |grad u|^2) dx` sampled at half-levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub weighted_l2: Vec<f64>,
    pub weighted_energy: Vec<f64>,
    pub supnorm: Vec<f64>,
    pub status: Termination,
    /// First recorded time at which the blow-up rule fired; present iff
    /// `status == BlowupDetected`.
    pub t_star: Option<f64>,
    /// The sup-norm threshold the run was classified against.
    pub threshold: f64,
    pub dt_initial: f64,
    pub dt_final: f64,
    /// Number of in-run time-step refinement events (0 or 1).
    pub refinements: u32,
    pub steps: u64,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn tail_strictly_increasing(series: &[f64], end: usize) -> bool {
    let avail = end + 1;
    let w = PATTERN_WINDOW.min(avail);
    if w < PATTERN_MIN {
        return false;
    }
    series[end + 1 - w..=end].windows(2).all(|p| p[1] > p[0])
}

/// Apply the blow-up rule to a sup-norm series: blow-up iff some entry
/// exceeds `threshold` while the trailing window up to it is strictly
/// increasing; non-finite entries without that pattern mean instability.
/// Returns the classification and the index of the first qualifying
/// crossing.
pub fn classify_series(supnorm: &[f64], threshold: f64) -> (Termination, Option<usize>) {
    let finite_len = supnorm
        .iter()
        .position(|v| !v.is_finite())
        .unwrap_or(supnorm.len());
    let finite = &supnorm[..finite_len];
    for i in 0..finite_len {
        if finite[i] > threshold && tail_strictly_increasing(finite, i) {
            return (Termination::BlowupDetected, Some(i));
        }
    }
    if finite_len < supnorm.len() {
        (Termination::Unstable, None)
    } else {
        (Termination::Completed, None)
    }
}

/// Re-derive the termination status of a finished record from its own
/// sup-norm series and stored threshold.
pub fn classify_termination(record: &RunRecord) -> Termination {
    classify_series(&record.supnorm, record.threshold).0
}

/// True when the final entry of the series fires the blow-up rule: it
/// exceeds the threshold and closes a strictly increasing trailing window.
/// This is the incremental form of [`classify_series`] used while a run
/// appends samples.
pub fn blowup_fires_at_end(supnorm: &[f64], threshold: f64) -> bool {
    match supnorm.last() {
        Some(&last) => {
            last.is_finite()
                && last > threshold
                && tail_strictly_increasing(supnorm, supnorm.len() - 1)
        }
        None => false,
    }
}

/// `integral of u^2 dx` (composite trapezoid against the radial weight).
pub fn l2_mass(u: &Field, grid: &RadialGrid, n: u32) -> f64 {
    assert_eq!(u.len(), grid.len(), "field/grid size mismatch");
    let omega = sphere_measure(n);
    let mut acc = 0.0;
    for j in 0..=grid.nr {
        let wq = if j == 0 || j == grid.nr { 0.5 } else { 1.0 };
        let uj = u.values[j];
        let r = grid.point(j);
        acc += wq * uj * uj * r.powi(n as i32 - 1);
    }
    omega * acc * grid.dr
}

/// `integral of e^{2 psi(t, r)} u^2 dx`. With no weight the factor is 1.
/// An exponent beyond the overflow guard at a node carrying a nonzero
/// value is reported as a data error rather than returning infinity.
pub fn weighted_l2_field(
    u: &Field,
    t: f64,
    grid: &RadialGrid,
    n: u32,
    w: Option<&WeightSpec>,
) -> Result<f64> {
    assert_eq!(u.len(), grid.len(), "field/grid size mismatch");
    let Some(w) = w else {
        return Ok(l2_mass(u, grid, n));
    };
    let omega = sphere_measure(n);
    let mut acc = 0.0;
    for j in 0..=grid.nr {
        let uj = u.values[j];
        if uj == 0.0 {
            continue;
        }
        let r = grid.point(j);
        let z = 2.0 * psi(t, r, w);
        if z > EXP_GUARD {
            return Err(Error::Data(format!(
                "weight overflow: 2*psi = {z:.1} at r = {r}, t = {t} where u != 0"
            )));
        }
        let wq = if j == 0 || j == grid.nr { 0.5 } else { 1.0 };
        acc += wq * z.exp() * uj * uj * r.powi(n as i32 - 1);
    }
    Ok(omega * acc * grid.dr)
}

/// `integral of e^{2 psi(t, r)} (ut^2 + grad^2) dx` from pre-computed
/// velocity and gradient samples.
pub fn weighted_energy_fields(
    ut: &Field,
    grad: &Field,
    t: f64,
    grid: &RadialGrid,
    n: u32,
    w: Option<&WeightSpec>,
) -> Result<f64> {
    assert_eq!(ut.len(), grid.len(), "field/grid size mismatch");
    assert_eq!(grad.len(), grid.len(), "field/grid size mismatch");
    let omega = sphere_measure(n);
    let mut acc = 0.0;
    for j in 0..=grid.nr {
        let a = ut.values[j];
        let g = grad.values[j];
        let density = a * a + g * g;
        if density == 0.0 {
            continue;
        }
        let r = grid.point(j);
        let factor = match w {
            None => 1.0,
            Some(w) => {
                let z = 2.0 * psi(t, r, w);
                if z > EXP_GUARD {
                    return Err(Error::Data(format!(
                        "weight overflow: 2*psi = {z:.1} at r = {r}, t = {t} where energy != 0"
                    )));
                }
                z.exp()
            }
        };
        let wq = if j == 0 || j == grid.nr { 0.5 } else { 1.0 };
        acc += wq * factor * density * r.powi(n as i32 - 1);
    }
    Ok(omega * acc * grid.dr)
}

/// Weighted L2 mass of the current level of a solution state.
pub fn weighted_l2(
    state: &SolutionState,
    grid: &RadialGrid,
    n: u32,
    w: Option<&WeightSpec>,
) -> Result<f64> {
    weighted_l2_field(&state.u_curr, state.t, grid, n, w)
}

/// Weighted energy of a solution state at the half-level `t - dt/2`:
/// `u_t = (u_curr - u_prev)/dt` and the gradient of the two-level average
/// are both second-order accurate there.
pub fn weighted_energy(
    state: &SolutionState,
    grid: &RadialGrid,
    n: u32,
    w: Option<&WeightSpec>,
) -> Result<f64> {
    let dt = state.dt;
    assert!(dt > 0.0, "state carries a non-positive dt");
    let m = grid.len();
    let mut ut = Field::zeros(grid);
    let mut avg = Field::zeros(grid);
    for j in 0..m {
        let c = state.u_curr.values[j];
        let p = state.u_prev.values[j];
        ut.values[j] = (c - p) / dt;
        avg.values[j] = 0.5 * (c + p);
    }
    let grad = radial_derivative(&avg, grid);
    weighted_energy_fields(&ut, &grad, state.t - 0.5 * dt, grid, n, w)
}

/// Running supremum of
/// `(1+t)^{n+2-eps} * weighted_energy + (1+t)^{n-eps} * weighted_l2`,
/// nondecreasing in `t` by construction.
pub fn m_functional(record: &RunRecord, n: u32, eps: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(record.len());
    let mut running: f64 = 0.0;
    for k in 0..record.len() {
        let grow = 1.0 + record.times[k];
        let v = grow.powf(f64::from(n) + 2.0 - eps) * record.weighted_energy[k]
            + grow.powf(f64::from(n) - eps) * record.weighted_l2[k];
        running = running.max(v);
        out.push(running);
    }
    out
}

/// A least-squares power-law fit of a time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Slope of `log(series)` against `log(1 + t)`.
    pub exponent: f64,
    /// The `[t_lo, t_hi]` window the fit used.
    pub window: (f64, f64),
    /// RMS residual of the linear fit in log-log space.
    pub residual: f64,
}

/// Fit `series ~ C (1+t)^exponent` over the samples with `t` in `window`.
/// Requires a late-time window (`t_lo >= 1`), at least 10 samples in it,
/// and strictly positive series values there.
pub fn fit_decay_rate(times: &[f64], series: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    assert_eq!(times.len(), series.len(), "times/series length mismatch");
    let (lo, hi) = window;
    if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!(
            "fit window must satisfy 1 <= t_lo < t_hi, got [{lo}, {hi}]"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(series) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Data(format!(
                "decay fit needs positive finite samples; got {v} at t = {t}"
            )));
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    if xs.len() < 10 {
        return Err(Error::Config(format!(
            "fit window [{lo}, {hi}] contains {} samples, need at least 10",
            xs.len()
        )));
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    if sxx == 0.0 {
        return Err(Error::Config("fit window samples share a single time".into()));
    }
    let slope = sxy / sxx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let e = y - (ybar + slope * (x - xbar));
        ss += e * e;
    }
    Ok(DecayFit {
        exponent: slope,
        window,
        residual: (ss / m).sqrt(),
    })
}

//! Explicit second-order time stepping for the damped wave equation.
//!
//! The scheme is leapfrog in time with the damping term `b(t) u_t` taken
//! semi-implicitly (averaged over levels k-1 and k+1), which keeps the
//! update stable for arbitrarily large damping. Each step solves
//!
//! ```text
//! (1 + b dt/2) u^{k+1} = 2 u^k - (1 - b dt/2) u^{k-1}
//!                        + dt^2 (Lap_h u^k + f(u^k) + s(t_k, .))
//! ```
//!
//! with a homogeneous Dirichlet condition at `r_max`, valid while the
//! support cone stays inside the domain. When the data (and any forcing)
//! have a known compact support, the driver zeroes every node beyond
//! `r0 + t + 2 dr` after each step: the exact solution vanishes there, and
//! truncating the sub-discretization-error numerical halo keeps the finite
//! propagation property exact on the grid.

use crate::diagnostics::{
    blowup_fires_at_end, l2_mass, weighted_energy_fields, weighted_l2_field, RunRecord,
    Termination, WeightSpec,
};
use crate::error::{Error, Result};
use crate::model::{radial_derivative, Field, InitialData, ModelSpec, RadialGrid};

/// Two consecutive time levels of the evolving solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    /// Level k-1.
    pub u_prev: Field,
    /// Level k.
    pub u_curr: Field,
    /// Time of the current level.
    pub t: f64,
    /// Step index of the current level.
    pub k: u64,
    /// Current time step.
    pub dt: f64,
}

/// Time-stepping policy knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Courant ratio: the step is `dt ~= cfl * dr` (shrunk a hair so an
    /// integer number of steps lands exactly on the horizon). The radial
    /// origin stencil stiffens the operator by a factor of about n, so
    /// stability needs `cfl <= 1/sqrt(n)`; the default 0.5 is safe for
    /// n <= 3.
    pub cfl: f64,
    /// Hard lower bound on dt; refinement never goes below it.
    pub dt_floor: f64,
    /// Sup-norm cap for blow-up classification. `None` derives
    /// `1e6 * sup|u0|` (or infinity for zero data).
    pub blowup_threshold: Option<f64>,
    /// Integer factor by which dt shrinks once the sup-norm first exceeds
    /// half the threshold. 1 disables refinement.
    pub refine_factor: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: 0.5,
            dt_floor: 1e-7,
            blowup_threshold: None,
            refine_factor: 2,
        }
    }
}

impl StepControl {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.dt_floor > 0.0 && self.dt_floor.is_finite()) {
            return Err(Error::Config(format!(
                "dt_floor must be positive, got {}",
                self.dt_floor
            )));
        }
        if let Some(tau) = self.blowup_threshold {
            if !(tau > 0.0) {
                return Err(Error::Config(format!(
                    "blowup_threshold must be positive (or omitted), got {tau}"
                )));
            }
        }
        if self.refine_factor < 1 {
            return Err(Error::Config("refine_factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// What to sample while a run advances.
#[derive(Debug, Clone, PartialEq)]
pub struct Observers {
    /// Weight for the weighted diagnostics; `None` records plain ones.
    pub weight: Option<WeightSpec>,
    /// Record a diagnostics row every this many steps (>= 1). Recording
    /// becomes per-step automatically once the sup-norm passes half the
    /// blow-up threshold, and the first and last steps are always recorded.
    pub stride: usize,
    /// Keep a full field snapshot every this many steps.
    pub trace_every: Option<usize>,
    /// Keep a full field snapshot at the step closest to each listed time.
    pub trace_times: Vec<f64>,
}

impl Default for Observers {
    fn default() -> Self {
        Observers {
            weight: None,
            stride: 1,
            trace_every: None,
            trace_times: Vec::new(),
        }
    }
}

/// Field snapshots collected during a run, for space-time quadrature and
/// state hand-off. `fields[i]` is the solution at `times[i]`; the sampled
/// initial data ride along for functionals that need them.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub u0: Field,
    pub u1: Field,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: RunRecord,
    pub trace: Option<SolutionTrace>,
    pub final_state: SolutionState,
}

/// Discrete radial Laplacian. Interior nodes use the second-order stencil
/// `(f_{j+1} - 2 f_j + f_{j-1})/dr^2 + ((n-1)/r_j)(f_{j+1} - f_{j-1})/(2 dr)`;
/// the origin uses the even-symmetry limit `2 n (f_1 - f_0)/dr^2`. The
/// boundary entry is left at zero (it is overwritten by the Dirichlet
/// condition wherever it matters).
pub fn laplacian_radial(f: &Field, grid: &RadialGrid, n: u32) -> Field {
    assert_eq!(f.len(), grid.len(), "field/grid size mismatch");
    let nr = grid.nr;
    let dr = grid.dr;
    let inv_dr2 = 1.0 / (dr * dr);
    let v = &f.values;
    let mut out = vec![0.0; grid.len()];
    out[0] = 2.0 * f64::from(n) * (v[1] - v[0]) * inv_dr2;
    let half_inv_dr = 1.0 / (2.0 * dr);
    for j in 1..nr {
        let r = grid.point(j);
        out[j] = (v[j + 1] - 2.0 * v[j] + v[j - 1]) * inv_dr2
            + (f64::from(n) - 1.0) / r * (v[j + 1] - v[j - 1]) * half_inv_dr;
    }
    Field { values: out }
}

fn source_at(model: &ModelSpec, t: f64, r: f64) -> f64 {
    match &model.forcing {
        Some(fc) => (fc.source)(t, r),
        None => 0.0,
    }
}

/// Taylor start for the two-level scheme:
/// `u^1 = u0 + dt u1 + (dt^2/2)(Lap_h u0 - b(0) u1 + f(u0) + s(0, .))`.
/// The returned state holds `(u^0, u^1)` at `t = dt`.
pub fn first_step(
    data: &InitialData,
    model: &ModelSpec,
    grid: &RadialGrid,
    dt: f64,
) -> SolutionState {
    assert!(dt > 0.0, "first step needs dt > 0");
    let lap = laplacian_radial(&data.u0, grid, model.n);
    let b0 = model.b(0.0);
    let nr = grid.nr;
    let mut next = vec![0.0; grid.len()];
    for j in 0..nr {
        let u0 = data.u0.values[j];
        let u1 = data.u1.values[j];
        let accel = lap.values[j] - b0 * u1 + model.f(u0) + source_at(model, 0.0, grid.point(j));
        next[j] = u0 + dt * u1 + 0.5 * dt * dt * accel;
    }
    next[nr] = 0.0;
    SolutionState {
        u_prev: data.u0.clone(),
        u_curr: Field { values: next },
        t: dt,
        k: 1,
        dt,
    }
}

/// One leapfrog step with semi-implicit damping; see the module docs for
/// the update formula. Pure: returns the advanced state.
pub fn step(state: &SolutionState, model: &ModelSpec, grid: &RadialGrid) -> SolutionState {
    let dt = state.dt;
    let b = model.b(state.t);
    let alpha = 1.0 + 0.5 * b * dt;
    let beta = 1.0 - 0.5 * b * dt;
    let lap = laplacian_radial(&state.u_curr, grid, model.n);
    let nr = grid.nr;
    let mut next = vec![0.0; grid.len()];
    for j in 0..nr {
        let uc = state.u_curr.values[j];
        let up = state.u_prev.values[j];
        let rhs = 2.0 * uc - beta * up
            + dt * dt * (lap.values[j] + model.f(uc) + source_at(model, state.t, grid.point(j)));
        next[j] = rhs / alpha;
    }
    next[nr] = 0.0;
    SolutionState {
        u_prev: state.u_curr.clone(),
        u_curr: Field { values: next },
        t: state.t + dt,
        k: state.k + 1,
        dt,
    }
}

/// Zero all nodes strictly beyond `radius`.
fn apply_support_mask(f: &mut Field, grid: &RadialGrid, radius: f64) {
    // Start one node early so float rounding in radius/dr can never skip a
    // node; the comparison against the actual grid point decides.
    let start = ((radius / grid.dr).floor() as usize)
        .saturating_sub(1)
        .min(f.values.len());
    for j in start..f.values.len() {
        if grid.point(j) > radius {
            f.values[j] = 0.0;
        }
    }
}

/// The support radius the run may rely on: the data support joined with
/// the forcing support, or `None` when either is unbounded/unknown.
fn effective_support(model: &ModelSpec, data: &InitialData) -> Option<f64> {
    let data_support = data.support_radius?;
    match &model.forcing {
        None => Some(data_support),
        Some(fc) => fc.support_radius.map(|s| s.max(data_support)),
    }
}

struct Recorder<'a> {
    n: u32,
    weight: Option<&'a WeightSpec>,
    times: Vec<f64>,
    l2: Vec<f64>,
    weighted_l2: Vec<f64>,
    weighted_energy: Vec<f64>,
    supnorm: Vec<f64>,
}

impl<'a> Recorder<'a> {
    #[allow(clippy::too_many_arguments)] // private recorder; the row IS the argument list
    fn push_row(
        &mut self,
        grid: &RadialGrid,
        t: f64,
        u: &Field,
        ut: &Field,
        grad: &Field,
        energy_time: f64,
        sup: f64,
    ) -> Result<()> {
        self.times.push(t);
        self.l2.push(l2_mass(u, grid, self.n));
        self.weighted_l2
            .push(weighted_l2_field(u, t, grid, self.n, self.weight)?);
        self.weighted_energy.push(weighted_energy_fields(
            ut,
            grad,
            energy_time,
            grid,
            self.n,
            self.weight,
        )?);
        self.supnorm.push(sup);
        Ok(())
    }
}

/// Integrate from the initial data to `t = horizon`, or stop early on a
/// blow-up classification or instability. Preconditions: when the model
/// and data have a known combined support radius `r0`, the grid must
/// satisfy `r_max >= r0 + horizon + 2 dr` so the support cone never
/// touches the boundary (configuration error otherwise, reported before
/// stepping). Weighted observers are rejected for power-law damping (the
/// weight is tied to the scale-invariant form).
pub fn run(
    model: &ModelSpec,
    grid: &RadialGrid,
    data: &InitialData,
    ctrl: &StepControl,
    horizon: f64,
    observers: &Observers,
) -> Result<RunOutput> {
    ctrl.validate()?;
    if data.u0.len() != grid.len() || data.u1.len() != grid.len() {
        return Err(Error::Config(format!(
            "initial data length {} does not match the grid ({} nodes)",
            data.u0.len(),
            grid.len()
        )));
    }
    if !data.u0.all_finite() || !data.u1.all_finite() {
        return Err(Error::Data("initial data contains non-finite values".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be >= 0, got {horizon}")));
    }
    if observers.stride == 0 {
        return Err(Error::Config("observer stride must be at least 1".into()));
    }
    if observers.weight.is_some() && model.damping.mu().is_none() {
        return Err(Error::Config(
            "weighted observers are defined only for scale-invariant damping".into(),
        ));
    }
    let support = effective_support(model, data);
    if let Some(r0) = support {
        let needed = r0 + horizon + 2.0 * grid.dr;
        if grid.r_max < needed {
            return Err(Error::Config(format!(
                "domain too small: support cone needs r_max >= {needed}, grid has {}",
                grid.r_max
            )));
        }
    }

    let n = model.n;
    let sup0 = data.u0.sup_norm();
    let tau = ctrl
        .blowup_threshold
        .unwrap_or(if sup0 > 0.0 { 1e6 * sup0 } else { f64::INFINITY });

    let mut rec = Recorder {
        n,
        weight: observers.weight.as_ref(),
        times: Vec::new(),
        l2: Vec::new(),
        weighted_l2: Vec::new(),
        weighted_energy: Vec::new(),
        supnorm: Vec::new(),
    };

    // Initial row: u_t = u1 exactly, gradient of u0, both at t = 0.
    let grad0 = radial_derivative(&data.u0, grid);
    rec.push_row(grid, 0.0, &data.u0, &data.u1, &grad0, 0.0, sup0)?;

    let trace_on = observers.trace_every.is_some() || !observers.trace_times.is_empty();
    let mut trace_targets: Vec<f64> = observers.trace_times.clone();
    trace_targets.sort_by(|a, b| a.partial_cmp(b).expect("trace times must not be NaN"));
    trace_targets.dedup();
    let mut target_idx = 0usize;
    let mut trace_times: Vec<f64> = Vec::new();
    let mut trace_fields: Vec<Field> = Vec::new();
    if trace_on {
        trace_times.push(0.0);
        trace_fields.push(data.u0.clone());
        // targets at (or before) t = 0 are satisfied by the initial snapshot
        while target_idx < trace_targets.len() && trace_targets[target_idx] <= 0.0 {
            target_idx += 1;
        }
    }

    let dt_nominal = ctrl.cfl * grid.dr;

    if horizon == 0.0 {
        let record = RunRecord {
            times: rec.times,
            l2: rec.l2,
            weighted_l2: rec.weighted_l2,
            weighted_energy: rec.weighted_energy,
            supnorm: rec.supnorm,
            status: Termination::Completed,
            t_star: None,
            threshold: tau,
            dt_initial: dt_nominal,
            dt_final: dt_nominal,
            refinements: 0,
            steps: 0,
        };
        let trace = trace_on.then(|| SolutionTrace {
            times: trace_times,
            fields: trace_fields,
            u0: data.u0.clone(),
            u1: data.u1.clone(),
        });
        let final_state = SolutionState {
            u_prev: data.u0.clone(),
            u_curr: data.u0.clone(),
            t: 0.0,
            k: 0,
            dt: dt_nominal,
        };
        return Ok(RunOutput { record, trace, final_state });
    }

    // An integer number of uniform steps that lands exactly on the horizon;
    // dt comes out at most cfl * dr.
    let total_steps = (horizon / dt_nominal).ceil().max(1.0) as u64;
    let dt_initial = horizon / total_steps as f64;

    let mut dt = dt_initial;
    let mut steps_remaining = total_steps;
    let mut dense = sup0 >= 0.5 * tau;
    let mut refinements = 0u32;
    let mut status = Termination::Completed;
    let mut t_star = None;

    let mut state = first_step(data, model, grid, dt);
    let mut steps_taken: u64 = 1;
    steps_remaining -= 1;
    state.t = horizon - steps_remaining as f64 * dt;

    loop {
        if let Some(r0) = support {
            apply_support_mask(&mut state.u_curr, grid, r0 + state.t + 2.0 * grid.dr);
        }

        if !state.u_curr.all_finite() {
            // Non-finite values; everything recorded so far was finite and
            // never fired the blow-up rule, so this is instability.
            status = Termination::Unstable;
            break;
        }

        let sup = state.u_curr.sup_norm();
        dense = dense || sup >= 0.5 * tau;

        let record_row =
            state.k.is_multiple_of(observers.stride as u64) || dense || steps_remaining == 0;
        if record_row {
            let mut ut = Field::zeros(grid);
            let mut avg = Field::zeros(grid);
            for j in 0..grid.len() {
                let c = state.u_curr.values[j];
                let p = state.u_prev.values[j];
                ut.values[j] = (c - p) / dt;
                avg.values[j] = 0.5 * (c + p);
            }
            let grad = radial_derivative(&avg, grid);
            rec.push_row(grid, state.t, &state.u_curr, &ut, &grad, state.t - 0.5 * dt, sup)?;
            if blowup_fires_at_end(&rec.supnorm, tau) {
                status = Termination::BlowupDetected;
                t_star = Some(state.t);
                break;
            }
        }

        if trace_on {
            let mut snap = observers
                .trace_every
                .is_some_and(|every| every > 0 && state.k.is_multiple_of(every as u64));
            while target_idx < trace_targets.len()
                && trace_targets[target_idx] <= state.t + 0.5 * dt
            {
                snap = true;
                target_idx += 1;
            }
            if steps_remaining == 0 {
                snap = true;
            }
            if snap {
                trace_times.push(state.t);
                trace_fields.push(state.u_curr.clone());
            }
        }

        if steps_remaining == 0 {
            break;
        }

        // One refinement event: once the sup-norm first reaches half the
        // threshold, shrink dt by the largest integer factor allowed by
        // refine_factor and dt_floor (integer so the horizon landing stays
        // exact). The state is rebuilt at spacing dt/factor by a Taylor
        // expansion around the current level.
        if dense && refinements == 0 && ctrl.refine_factor >= 2 {
            let mut factor = ctrl.refine_factor;
            while factor >= 2 && dt / f64::from(factor) < ctrl.dt_floor {
                factor -= 1;
            }
            if factor >= 2 {
                let b = model.b(state.t);
                let lap = laplacian_radial(&state.u_curr, grid, n);
                let h = dt / f64::from(factor);
                let mut back = vec![0.0; grid.len()];
                for j in 0..grid.nr {
                    let uc = state.u_curr.values[j];
                    let up = state.u_prev.values[j];
                    let d = (uc - up) / dt;
                    let load = lap.values[j] + model.f(uc) + source_at(model, state.t, grid.point(j));
                    let accel = (load - b * d) / (1.0 + 0.5 * b * dt);
                    let vel = d + 0.5 * dt * accel;
                    back[j] = uc - h * vel + 0.5 * h * h * accel;
                }
                back[grid.nr] = 0.0;
                let mut back = Field { values: back };
                if let Some(r0) = support {
                    apply_support_mask(&mut back, grid, r0 + (state.t - h) + 2.0 * grid.dr);
                }
                state.u_prev = back;
                dt = h;
                state.dt = h;
                steps_remaining *= u64::from(factor);
                refinements += 1;
            }
        }

        state = step(&state, model, grid);
        steps_taken += 1;
        steps_remaining -= 1;
        state.t = horizon - steps_remaining as f64 * dt;
    }

    let record = RunRecord {
        times: rec.times,
        l2: rec.l2,
        weighted_l2: rec.weighted_l2,
        weighted_energy: rec.weighted_energy,
        supnorm: rec.supnorm,
        status,
        t_star,
        threshold: tau,
        dt_initial,
        dt_final: dt,
        refinements,
        steps: steps_taken,
    };
    let trace = trace_on.then(|| SolutionTrace {
        times: trace_times,
        fields: trace_fields,
        u0: data.u0.clone(),
        u1: data.u1.clone(),
    });
    Ok(RunOutput {
        record,
        trace,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        make_grid, sample_initial_data, Damping, InitialData, Nonlinearity, Profile,
    };
    use std::sync::Arc;

    fn bump(amplitude: f64, radius: f64) -> Profile {
        Profile::PolynomialBump {
            amplitude,
            radius,
            smoothness: 3,
        }
    }

    fn free_wave(n: u32) -> ModelSpec {
        ModelSpec::new(n, Damping::ScaleInvariant { mu: 0.0 }, 2.0, Nonlinearity::None).unwrap()
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        for n in 1..=3u32 {
            let g = make_grid(2.0, 64).unwrap();
            let f = Field::from_fn(&g, |r| r * r);
            let lap = laplacian_radial(&f, &g, n);
            for j in 0..g.nr {
                assert!(
                    (lap.values[j] - 2.0 * f64::from(n)).abs() < 1e-10,
                    "n={n} j={j}: {}",
                    lap.values[j]
                );
            }
        }
    }

    #[test]
    fn laplacian_second_order_on_smooth_profile() {
        // n = 2: Lap cos(r) = -cos(r) - sin(r)/r
        let err = |nr: usize| {
            let g = make_grid(3.0, nr).unwrap();
            let f = Field::from_fn(&g, |r| r.cos());
            let lap = laplacian_radial(&f, &g, 2);
            (1..g.nr)
                .map(|j| {
                    let r = g.point(j);
                    (lap.values[j] + r.cos() + r.sin() / r).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let ratio = err(100) / err(200);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dalembert_split_pulse_converges() {
        // n = 1 free wave from a stationary bump: u(t, r) is the even
        // d'Alembert superposition; at t = 3 only the outgoing half
        // remains inside the domain.
        let run_err = |nr: usize| {
            let g = make_grid(8.0, nr).unwrap();
            let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
            let model = free_wave(1);
            let out = run(
                &model,
                &g,
                &data,
                &StepControl::default(),
                3.0,
                &Observers::default(),
            )
            .unwrap();
            assert_eq!(out.record.status, Termination::Completed);
            let prof = bump(1.0, 1.0);
            (0..g.len())
                .map(|j| {
                    let r = g.point(j);
                    let exact = 0.5 * (prof.eval((r - 3.0).abs()) + prof.eval(r + 3.0));
                    (out.final_state.u_curr.values[j] - exact).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let coarse = run_err(800);
        let fine = run_err(1600);
        assert!(coarse < 2e-2, "coarse error {coarse}");
        assert!(coarse / fine > 3.0, "refinement ratio {}", coarse / fine);
    }

    #[test]
    fn support_mask_is_exact_and_horizon_lands_bitwise() {
        let g = make_grid(8.0, 800).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(1);
        let horizon = 2.5;
        let out = run(
            &model,
            &g,
            &data,
            &StepControl::default(),
            horizon,
            &Observers::default(),
        )
        .unwrap();
        assert_eq!(out.final_state.t.to_bits(), horizon.to_bits());
        let cone = 1.0 + horizon + 2.0 * g.dr;
        let mut inside_max = 0.0f64;
        for j in 0..g.len() {
            let r = g.point(j);
            let v = out.final_state.u_curr.values[j];
            if r > cone {
                assert_eq!(v, 0.0, "nonzero beyond the cone at r = {r}");
            } else {
                inside_max = inside_max.max(v.abs());
            }
        }
        assert!(inside_max > 0.1, "pulse lost inside the cone");
    }

    #[test]
    fn free_energy_drift_small_n3() {
        let g = make_grid(3.2, 640).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(3);
        let out = run(
            &model,
            &g,
            &data,
            &StepControl::default(),
            2.0,
            &Observers::default(),
        )
        .unwrap();
        let e = &out.record.weighted_energy;
        let lo = e[1..].iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = e[1..].iter().cloned().fold(0.0f64, f64::max);
        assert!(hi > 0.0);
        assert!(
            (hi - lo) / hi < 1e-3,
            "relative energy drift {}",
            (hi - lo) / hi
        );
        // initial row (exact u1, one-sided in time) sits close to the rest
        assert!((e[0] - e[1]).abs() / hi < 5e-3);
    }

    #[test]
    fn focusing_quadratic_blowup_detected_with_refinement() {
        let g = make_grid(6.5, 1300).unwrap();
        let data =
            sample_initial_data(Some(&bump(5.0, 1.0)), Some(&bump(5.0, 1.0)), &g).unwrap();
        let model = ModelSpec::new(
            1,
            Damping::ScaleInvariant { mu: 2.0 },
            2.0,
            Nonlinearity::AbsPow,
        )
        .unwrap();
        let out = run(
            &model,
            &g,
            &data,
            &StepControl::default(),
            5.0,
            &Observers::default(),
        )
        .unwrap();
        assert_eq!(out.record.status, Termination::BlowupDetected);
        let t_star = out.record.t_star.expect("blow-up time");
        assert!(t_star > 0.0 && t_star < 5.0, "t_star = {t_star}");
        assert_eq!(out.record.refinements, 1);
        assert!(out.record.dt_final < out.record.dt_initial);
        assert_eq!(out.record.threshold, 5e6);
        // the recorded tail is strictly increasing and ends above threshold
        let s = &out.record.supnorm;
        assert!(*s.last().unwrap() > 5e6);
    }

    #[test]
    fn cfl_above_stability_limit_reports_unstable() {
        // n = 3 needs cfl <= 1/sqrt(3); cfl = 1 is inside the accepted
        // parameter range but unstable, and the infinite threshold keeps
        // the blow-up rule out of the way. The growth factor is about 3.7
        // per step from a truncation-level seed, so the horizon must leave
        // room for the overflow to actually materialize.
        let g = make_grid(7.6, 760).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(3);
        let ctrl = StepControl {
            cfl: 1.0,
            blowup_threshold: Some(f64::INFINITY),
            ..StepControl::default()
        };
        let out = run(&model, &g, &data, &ctrl, 6.5, &Observers::default()).unwrap();
        assert_eq!(out.record.status, Termination::Unstable);
        assert!(out.record.t_star.is_none());
    }

    #[test]
    fn refinement_keeps_exact_landing_when_threshold_is_low() {
        // sup|u0| = 1 already exceeds half the threshold 1.5, so the run
        // refines immediately, halves dt, and still lands exactly; the
        // free pulse decays, so no blow-up fires.
        let g = make_grid(8.0, 800).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(1);
        let ctrl = StepControl {
            blowup_threshold: Some(1.5),
            ..StepControl::default()
        };
        let horizon = 3.0;
        let out = run(&model, &g, &data, &ctrl, horizon, &Observers::default()).unwrap();
        assert_eq!(out.record.status, Termination::Completed);
        assert_eq!(out.record.refinements, 1);
        assert_eq!(out.record.dt_final, out.record.dt_initial / 2.0);
        assert_eq!(out.final_state.t.to_bits(), horizon.to_bits());
    }

    #[test]
    fn linear_runs_scale_exactly() {
        // with the power nonlinearity switched off the whole update is
        // linear, and scaling the data by a power of two commutes with
        // every floating-point operation bit for bit
        let g = make_grid(6.0, 600).unwrap();
        let model = ModelSpec::new(
            2,
            Damping::ScaleInvariant { mu: 3.0 },
            2.0,
            Nonlinearity::None,
        )
        .unwrap();
        let d1 = sample_initial_data(Some(&bump(1.0, 1.5)), Some(&bump(-0.5, 1.0)), &g).unwrap();
        let scale = 4.0;
        let d2 = InitialData::from_fields(
            Field {
                values: d1.u0.values.iter().map(|v| v * scale).collect(),
            },
            Field {
                values: d1.u1.values.iter().map(|v| v * scale).collect(),
            },
            d1.support_radius,
        );
        let ctrl = StepControl::default();
        let o1 = run(&model, &g, &d1, &ctrl, 2.0, &Observers::default()).unwrap();
        let o2 = run(&model, &g, &d2, &ctrl, 2.0, &Observers::default()).unwrap();
        for j in 0..g.len() {
            assert_eq!(
                (o1.final_state.u_curr.values[j] * scale).to_bits(),
                o2.final_state.u_curr.values[j].to_bits(),
                "node {j}"
            );
        }
    }

    #[test]
    fn first_step_is_third_order_accurate() {
        // manufactured solution u = exp(-t) cos(r) on [0, pi/2] with n = 1
        // and mu = 2 needs the source s = exp(-t) cos(r) (2 - b(t));
        // the Taylor start should track it to O(dt^3)
        let g = make_grid(std::f64::consts::FRAC_PI_2, 200).unwrap();
        let model = ModelSpec::new(
            1,
            Damping::ScaleInvariant { mu: 2.0 },
            2.0,
            Nonlinearity::None,
        )
        .unwrap()
        .with_forcing(
            Arc::new(|t: f64, r: f64| (-t).exp() * r.cos() * (2.0 - 2.0 / (1.0 + t))),
            None,
        );
        let u0 = Field::from_fn(&g, |r| r.cos());
        let u1 = Field::from_fn(&g, |r| -r.cos());
        let data = InitialData::from_fields(u0, u1, None);
        let err = |dt: f64| {
            let s = first_step(&data, &model, &g, dt);
            (0..g.nr)
                .map(|j| (s.u_curr.values[j] - (-dt).exp() * g.point(j).cos()).abs())
                .fold(0.0f64, f64::max)
        };
        let coarse = err(0.02);
        let fine = err(0.01);
        let ratio = coarse / fine;
        assert!((6.0..=10.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_horizon_returns_initial_row() {
        let g = make_grid(4.0, 100).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(1);
        let out = run(
            &model,
            &g,
            &data,
            &StepControl::default(),
            0.0,
            &Observers::default(),
        )
        .unwrap();
        assert_eq!(out.record.len(), 1);
        assert_eq!(out.record.times[0], 0.0);
        assert_eq!(out.record.status, Termination::Completed);
        assert_eq!(out.record.steps, 0);
        assert_eq!(out.final_state.t, 0.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(4.0, 128).unwrap();
        let data = InitialData::from_fields(Field::zeros(&g), Field::zeros(&g), Some(0.0));
        let model = ModelSpec::new(
            2,
            Damping::ScaleInvariant { mu: 2.0 },
            2.0,
            Nonlinearity::AbsPow,
        )
        .unwrap();
        let out = run(
            &model,
            &g,
            &data,
            &StepControl::default(),
            1.0,
            &Observers::default(),
        )
        .unwrap();
        assert_eq!(out.record.status, Termination::Completed);
        assert_eq!(out.record.threshold, f64::INFINITY);
        assert!(out.record.supnorm.iter().all(|&s| s == 0.0));
        assert!(out.final_state.u_curr.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn run_rejects_bad_configurations() {
        let g = make_grid(2.0, 64).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(1);
        // cone would leave the domain
        let err = run(
            &model,
            &g,
            &data,
            &StepControl::default(),
            5.0,
            &Observers::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // weighted observers need scale-invariant damping
        let power = ModelSpec::new(1, Damping::PowerLaw { beta: 2.0 }, 2.0, Nonlinearity::None)
            .unwrap();
        let obs = Observers {
            weight: Some(WeightSpec::new(2.0, 1.0).unwrap()),
            ..Observers::default()
        };
        let err = run(&power, &g, &data, &StepControl::default(), 0.5, &obs).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // zero stride
        let obs = Observers {
            stride: 0,
            ..Observers::default()
        };
        let err = run(&model, &g, &data, &StepControl::default(), 0.5, &obs).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // non-finite data
        let mut bad = data.clone();
        bad.u0.values[3] = f64::NAN;
        let err = run(
            &model,
            &g,
            &bad,
            &StepControl::default(),
            0.5,
            &Observers::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        // bad control
        let ctrl = StepControl {
            cfl: 0.0,
            ..StepControl::default()
        };
        let err = run(&model, &g, &data, &ctrl, 0.5, &Observers::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn trace_times_capture_requested_snapshots() {
        let g = make_grid(6.0, 600).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        let model = free_wave(1);
        let obs = Observers {
            trace_times: vec![0.4, 1.0],
            ..Observers::default()
        };
        let out = run(&model, &g, &data, &StepControl::default(), 1.0, &obs).unwrap();
        let trace = out.trace.expect("trace requested");
        assert_eq!(trace.times.len(), trace.fields.len());
        assert_eq!(trace.times[0], 0.0);
        assert!((trace.times[1] - 0.4).abs() <= out.record.dt_initial);
        let last = *trace.times.last().unwrap();
        assert_eq!(last.to_bits(), 1.0f64.to_bits());
        assert_eq!(trace.u0.values, data.u0.values);
    }

    #[test]
    fn rescaled_run_matches_time_translation_symmetry() {
        // the damping b(t) = mu/(1+t) is invariant under
        // (t, x) -> (lambda(1+t) - 1, lambda x); with lambda = 2 a run on a
        // half-spacing grid seeded from two consecutive snapshots of the
        // original run must reproduce its later states node for node
        let g1 = make_grid(8.0, 800).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g1).unwrap();
        let model = ModelSpec::new(
            1,
            Damping::ScaleInvariant { mu: 3.0 },
            2.0,
            Nonlinearity::None,
        )
        .unwrap();
        let obs = Observers {
            trace_times: vec![0.995, 1.0, 2.0],
            ..Observers::default()
        };
        let out1 = run(&model, &g1, &data, &StepControl::default(), 3.0, &obs).unwrap();
        let trace = out1.trace.unwrap();
        // t = 0, the three targets, and the always-recorded final step
        assert_eq!(trace.times.len(), 5);
        let dt1 = out1.record.dt_initial;
        assert!((trace.times[2] - trace.times[1] - dt1).abs() < 1e-12);

        // same node count on half the domain: node j sits at half the radius
        let g2 = make_grid(4.0, 800).unwrap();
        let dt2 = 0.5 * dt1;
        let mut state = SolutionState {
            u_prev: trace.fields[1].clone(),
            u_curr: trace.fields[2].clone(),
            // t1 = 1 maps to t2 = (1 + t1)/2 - 1 = 0
            t: 0.5 * (1.0 + trace.times[2]) - 1.0,
            k: 0,
            dt: dt2,
        };
        let steps = (0.5f64 / dt2).round() as u64; // run to t2 = 0.5 <-> t1 = 2
        for _ in 0..steps {
            state = step(&state, &model, &g2);
            // mirror the driver's cone mask (scaled support radius is 1)
            let radius = 1.0 + state.t + 2.0 * g2.dr;
            for j in 0..g2.len() {
                if g2.point(j) > radius {
                    state.u_curr.values[j] = 0.0;
                }
            }
        }
        // the stencil commutes with the rescaling exactly (the first steps
        // agree bit for bit); the residual difference comes from cone-edge
        // nodes where the two runs' float mask comparisons disagree by one
        // node, and the halo there is ~1e-7 -- a genuine symmetry break
        // would show up at the 1e-3 level
        let reference = &trace.fields[3]; // t1 = 2
        let diff = (0..g2.len())
            .map(|j| (state.u_curr.values[j] - reference.values[j]).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 5e-6, "scaling symmetry violated: sup diff {diff}");
    }
}

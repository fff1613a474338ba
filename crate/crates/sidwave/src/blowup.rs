//! Test-function machinery for the blow-up side of the theory.
//!
//! The nonexistence arguments multiply the equation by `g(t) psi_R^q`,
//! where `g` solves `g b - g' = rho` for the damping at hand (`rho = 1`
//! in the strongly damped regime, `rho = 0` otherwise) and `psi_R` is a
//! smooth space-time cutoff at scale `R`. Integrating by parts turns the
//! space-time average of the nonlinearity into data terms plus integrals
//! of `u` against derivatives of the cutoff:
//!
//! ```text
//! I_R := iint g (f(u) + s) psi_R^q
//!      = -int (rho u0 + g(0) u1) phi_R^q dx        (boundary_term)
//!      + iint g u (psi_R^q)_tt                     (j1)
//!      + iint (g' - rho) u (psi_R^q)_t             (j2)
//!      - iint g u Lap(psi_R^q)                     (j3)
//! ```
//!
//! The identity is exact in the continuum; evaluated on a numerical
//! trace it holds up to quadrature and discretization error, which makes
//! it a sharp end-to-end check on solver and machinery at once.

use crate::error::{Error, Result};
use crate::model::{radial_integral, Damping, Field, InitialData, ModelSpec, RadialGrid};
use crate::smoothstep::{smoothstep, smoothstep_d1, smoothstep_d2};
use crate::solver::SolutionTrace;

/// Damping regime for the blow-up analysis, split by how the transform
/// `g` behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Scale-invariant damping with `mu > 1`: `g` grows linearly and the
    /// transform leaves the constant residual `rho = 1`.
    Super,
    /// Scale-invariant damping with `0 < mu <= 1`: `g = g0 (1+t)^mu`
    /// solves the transform equation exactly (`rho = 0`).
    Sub,
    /// Integrable power-law damping `(1+t)^{-beta}`, `beta > 1`: `g` is
    /// bounded and `rho = 0`.
    Power,
}

/// Classify a model for the blow-up analysis.
pub fn regime_of(model: &ModelSpec) -> Result<Regime> {
    match model.damping {
        Damping::ScaleInvariant { mu } if mu > 1.0 => Ok(Regime::Super),
        Damping::ScaleInvariant { mu } if mu > 0.0 => Ok(Regime::Sub),
        Damping::ScaleInvariant { mu } => Err(Error::Config(format!(
            "blow-up transform needs positive damping, got mu = {mu}"
        ))),
        Damping::PowerLaw { .. } => Ok(Regime::Power),
    }
}

/// Critical power separating blow-up from possible global existence:
/// `1 + 2/n` when the damping is strong enough to look parabolic,
/// `1 + 2/(n + mu - 1)` for weak scale-invariant damping, and the
/// undamped-like `1 + 2/(n - 1)` for integrable power-law damping
/// (undefined in one dimension).
pub fn critical_exponent(model: &ModelSpec) -> Result<f64> {
    let n = f64::from(model.n);
    match (regime_of(model)?, model.damping) {
        (Regime::Super, _) => Ok(1.0 + 2.0 / n),
        (Regime::Sub, Damping::ScaleInvariant { mu }) => Ok(1.0 + 2.0 / (n + mu - 1.0)),
        (Regime::Power, _) => {
            if model.n < 2 {
                return Err(Error::Config(
                    "the power-law critical exponent 1 + 2/(n-1) needs n >= 2".into(),
                ));
            }
            Ok(1.0 + 2.0 / (n - 1.0))
        }
        (Regime::Sub, Damping::PowerLaw { .. }) => unreachable!("regime_of classified damping"),
    }
}

/// The multiplier `g(t)` with `g b - g' = rho` for its regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GTransform {
    Super { mu: f64 },
    Sub { mu: f64, g0: f64 },
    Power { beta: f64, g0: f64 },
}

/// Build the transform for a model. The strongly damped branch has a
/// forced normalization `g = (1+t)/(mu-1)`, so passing an explicit `g0`
/// there is rejected; the other branches default to `g0 = 1`.
pub fn g_transform(model: &ModelSpec, g0: Option<f64>) -> Result<GTransform> {
    if let Some(v) = g0 {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("g0 must be positive, got {v}")));
        }
    }
    match regime_of(model)? {
        Regime::Super => {
            let Damping::ScaleInvariant { mu } = model.damping else { unreachable!() };
            if g0.is_some() {
                return Err(Error::Config(
                    "the strongly damped transform has a forced normalization; omit g0".into(),
                ));
            }
            Ok(GTransform::Super { mu })
        }
        Regime::Sub => {
            let Damping::ScaleInvariant { mu } = model.damping else { unreachable!() };
            Ok(GTransform::Sub {
                mu,
                g0: g0.unwrap_or(1.0),
            })
        }
        Regime::Power => {
            let Damping::PowerLaw { beta } = model.damping else { unreachable!() };
            Ok(GTransform::Power {
                beta,
                g0: g0.unwrap_or(1.0),
            })
        }
    }
}

impl GTransform {
    pub fn g(&self, t: f64) -> f64 {
        match *self {
            GTransform::Super { mu } => (1.0 + t) / (mu - 1.0),
            GTransform::Sub { mu, g0 } => g0 * (1.0 + t).powf(mu),
            GTransform::Power { beta, g0 } => {
                g0 * ((1.0 - (1.0 + t).powf(1.0 - beta)) / (beta - 1.0)).exp()
            }
        }
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        match *self {
            GTransform::Super { mu } => 1.0 / (mu - 1.0),
            GTransform::Sub { mu, g0 } => g0 * mu * (1.0 + t).powf(mu - 1.0),
            GTransform::Power { beta, .. } => self.g(t) * (1.0 + t).powf(-beta),
        }
    }

    /// The constant residual `rho = g b - g'`.
    pub fn rho(&self) -> f64 {
        match *self {
            GTransform::Super { .. } => 1.0,
            _ => 0.0,
        }
    }

    /// Defect `g(t) b(t) - g'(t) - rho`, identically zero in exact
    /// arithmetic; evaluating it checks the closed forms against the ODE.
    pub fn residual(&self, t: f64) -> f64 {
        let b = match *self {
            GTransform::Super { mu } | GTransform::Sub { mu, .. } => mu / (1.0 + t),
            GTransform::Power { beta, .. } => (1.0 + t).powf(-beta),
        };
        self.g(t) * b - self.g_prime(t) - self.rho()
    }
}

/// The sign functional on the data whose positivity drives the blow-up
/// argument: the `t = 0` boundary term of the identity without the
/// cutoff, `int ((mu-1) u0 + u1) dx` in the strongly damped regime and
/// `int u1 dx` otherwise.
pub fn data_sign_functional(
    data: &InitialData,
    grid: &RadialGrid,
    model: &ModelSpec,
) -> Result<f64> {
    let regime = regime_of(model)?;
    let mut f = Field::zeros(grid);
    for j in 0..grid.len() {
        f.values[j] = match (regime, model.damping) {
            (Regime::Super, Damping::ScaleInvariant { mu }) => {
                (mu - 1.0) * data.u0.values[j] + data.u1.values[j]
            }
            _ => data.u1.values[j],
        };
    }
    Ok(radial_integral(&f, grid, model.n))
}

/// Smooth space-time cutoff at scale `R`: `psi(t, r) = eta(t/R) phi(r/R)`
/// with quintic plateaus (identically 1 on `[0, 1/2]`, identically 0 from
/// 1 on, monotone with two vanishing derivatives at the junctions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionPair {
    pub r_scale: f64,
    pub q: f64,
}

/// Threshold below which the cutoff is treated as exactly zero so that
/// negative powers in the derivative formulas never see 0^negative.
const CUTOFF_FLOOR: f64 = 1e-12;

/// Build the cutoff pair; the exponent `q` must be at least 1 so the
/// first derivatives stay bounded.
pub fn make_test_functions(r_scale: f64, q: f64) -> Result<TestFunctionPair> {
    if !(r_scale > 0.0 && r_scale.is_finite()) {
        return Err(Error::Config(format!(
            "cutoff scale must be positive, got {r_scale}"
        )));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Config(format!("cutoff power must be >= 1, got {q}")));
    }
    Ok(TestFunctionPair { r_scale, q })
}

impl TestFunctionPair {
    /// One-dimensional profile: 1 on [0, 1/2], quintic descent, 0 from 1.
    fn profile(x: f64) -> f64 {
        if x <= 0.5 {
            1.0
        } else if x >= 1.0 {
            0.0
        } else {
            smoothstep(2.0 - 2.0 * x)
        }
    }

    fn profile_d1(x: f64) -> f64 {
        if x <= 0.5 || x >= 1.0 {
            0.0
        } else {
            -2.0 * smoothstep_d1(2.0 - 2.0 * x)
        }
    }

    fn profile_d2(x: f64) -> f64 {
        if x <= 0.5 || x >= 1.0 {
            0.0
        } else {
            4.0 * smoothstep_d2(2.0 - 2.0 * x)
        }
    }

    /// Temporal cutoff `eta(t/R)`.
    pub fn eta(&self, t: f64) -> f64 {
        Self::profile(t / self.r_scale)
    }

    /// Spatial cutoff `phi(r/R)`.
    pub fn phi(&self, r: f64) -> f64 {
        Self::profile(r / self.r_scale)
    }

    /// The full weight `psi^q = (eta phi)^q`.
    pub fn psi_q(&self, t: f64, r: f64) -> f64 {
        let e = self.eta(t);
        let p = self.phi(r);
        if e < CUTOFF_FLOOR || p < CUTOFF_FLOOR {
            0.0
        } else {
            (e * p).powf(self.q)
        }
    }

    /// `(psi^q)_t = q eta^{q-1} eta' phi^q`.
    pub fn psi_q_t(&self, t: f64, r: f64) -> f64 {
        let e = self.eta(t);
        let p = self.phi(r);
        if e < CUTOFF_FLOOR || p < CUTOFF_FLOOR {
            return 0.0;
        }
        let ed1 = Self::profile_d1(t / self.r_scale) / self.r_scale;
        self.q * e.powf(self.q - 1.0) * ed1 * p.powf(self.q)
    }

    /// `(psi^q)_tt = (q(q-1) eta^{q-2} eta'^2 + q eta^{q-1} eta'') phi^q`.
    pub fn psi_q_tt(&self, t: f64, r: f64) -> f64 {
        let e = self.eta(t);
        let p = self.phi(r);
        if e < CUTOFF_FLOOR || p < CUTOFF_FLOOR {
            return 0.0;
        }
        let x = t / self.r_scale;
        let ed1 = Self::profile_d1(x) / self.r_scale;
        let ed2 = Self::profile_d2(x) / (self.r_scale * self.r_scale);
        (self.q * (self.q - 1.0) * e.powf(self.q - 2.0) * ed1 * ed1
            + self.q * e.powf(self.q - 1.0) * ed2)
            * p.powf(self.q)
    }

    /// Radial Laplacian `Lap (psi^q) = eta^q (F'' + (n-1) F'/r)` with
    /// `F = phi^q`; zero at the origin, which sits inside the plateau.
    pub fn lap_psi_q(&self, t: f64, r: f64, n: u32) -> f64 {
        let e = self.eta(t);
        let p = self.phi(r);
        if e < CUTOFF_FLOOR || p < CUTOFF_FLOOR || r < CUTOFF_FLOOR {
            return 0.0;
        }
        let x = r / self.r_scale;
        let pd1 = Self::profile_d1(x) / self.r_scale;
        let pd2 = Self::profile_d2(x) / (self.r_scale * self.r_scale);
        let f1 = self.q * p.powf(self.q - 1.0) * pd1;
        let f2 = self.q * (self.q - 1.0) * p.powf(self.q - 2.0) * pd1 * pd1
            + self.q * p.powf(self.q - 1.0) * pd2;
        e.powf(self.q) * (f2 + (f64::from(n) - 1.0) / r * f1)
    }
}

/// All the pieces of the integrated identity evaluated on one trace at
/// one cutoff scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionalReport {
    pub r_scale: f64,
    pub q: f64,
    /// Space-time average of the right-hand side: `iint g (f(u)+s) psi^q`.
    pub i_r: f64,
    /// `iint g u (psi^q)_tt`.
    pub j1: f64,
    /// `iint (g'-rho) u (psi^q)_t`.
    pub j2: f64,
    /// `-iint g u Lap(psi^q)`.
    pub j3: f64,
    /// `-int (rho u0 + g(0) u1) phi^q dx`.
    pub boundary_term: f64,
    /// Signed defect `i_r - (boundary_term + j1 + j2 + j3)`; zero in the
    /// continuum.
    pub residual: f64,
    /// `i_r` scaled by `R^{-((n+2)/q - 2)}`, the combination whose
    /// large-R behavior separates the subcritical and supercritical
    /// regimes.
    pub i_r_scaled: f64,
}

/// Trapezoid-in-time integral of per-snapshot space integrals over
/// `t <= t_max`. `integrand(i, j)` is the value at snapshot `i`, node `j`.
fn space_time_integral<F>(
    times: &[f64],
    grid: &RadialGrid,
    n: u32,
    t_max: f64,
    mut integrand: F,
) -> f64
where
    F: FnMut(usize, usize) -> f64,
{
    let mut spatial = Vec::new();
    let mut used_times = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        if t > t_max {
            break;
        }
        let mut f = Field::zeros(grid);
        for j in 0..grid.len() {
            f.values[j] = integrand(i, j);
        }
        spatial.push(radial_integral(&f, grid, n));
        used_times.push(t);
    }
    let mut acc = 0.0;
    for w in 0..used_times.len().saturating_sub(1) {
        acc += 0.5 * (spatial[w] + spatial[w + 1]) * (used_times[w + 1] - used_times[w]);
    }
    acc
}

/// Evaluate the integrated identity on a solution trace with cutoff
/// scale `r_scale` and `q = p/(p-1)`. The trace must cover `[0, r_scale]`
/// with snapshot spacing at most `r_scale / 32`, and the grid must
/// contain the spatial cutoff support `[0, r_scale]`.
pub fn test_functional(
    trace: &SolutionTrace,
    model: &ModelSpec,
    grid: &RadialGrid,
    r_scale: f64,
) -> Result<TestFunctionalReport> {
    let transform = g_transform(model, None)?;
    let q = model.p / (model.p - 1.0);
    let pair = make_test_functions(r_scale, q)?;
    if trace.times.is_empty() || trace.fields.len() != trace.times.len() {
        return Err(Error::Data("trace is empty or inconsistent".into()));
    }
    if trace.times[0] != 0.0 {
        return Err(Error::Data("trace must start at t = 0".into()));
    }
    if *trace.times.last().unwrap() < r_scale {
        return Err(Error::Data(format!(
            "trace ends at t = {} but the cutoff needs coverage to {r_scale}",
            trace.times.last().unwrap()
        )));
    }
    let max_gap = trace
        .times
        .windows(2)
        .take_while(|w| w[0] < r_scale)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    if max_gap > r_scale / 32.0 + 1e-12 {
        return Err(Error::Data(format!(
            "snapshot spacing {max_gap} too coarse for cutoff scale {r_scale} (need <= R/32)"
        )));
    }
    if grid.r_max < r_scale {
        return Err(Error::Config(format!(
            "grid radius {} smaller than the cutoff support {r_scale}",
            grid.r_max
        )));
    }
    for f in &trace.fields {
        if f.len() != grid.len() {
            return Err(Error::Data("trace fields do not match the grid".into()));
        }
    }

    let n = model.n;
    let rho = transform.rho();
    let g0 = transform.g(0.0);
    let times = &trace.times;

    // cache cutoff factors per node
    let i_r = space_time_integral(times, grid, n, r_scale, |i, j| {
        let t = times[i];
        let r = grid.point(j);
        let u = trace.fields[i].values[j];
        let s = match &model.forcing {
            Some(fc) => (fc.source)(t, r),
            None => 0.0,
        };
        transform.g(t) * (model.f(u) + s) * pair.psi_q(t, r)
    });
    let j1 = space_time_integral(times, grid, n, r_scale, |i, j| {
        let t = times[i];
        transform.g(t) * trace.fields[i].values[j] * pair.psi_q_tt(t, grid.point(j))
    });
    let j2 = space_time_integral(times, grid, n, r_scale, |i, j| {
        let t = times[i];
        (transform.g_prime(t) - rho)
            * trace.fields[i].values[j]
            * pair.psi_q_t(t, grid.point(j))
    });
    let j3 = -space_time_integral(times, grid, n, r_scale, |i, j| {
        let t = times[i];
        transform.g(t) * trace.fields[i].values[j] * pair.lap_psi_q(t, grid.point(j), n)
    });
    let mut bfield = Field::zeros(grid);
    for j in 0..grid.len() {
        let phi_q = pair.psi_q(0.0, grid.point(j));
        bfield.values[j] = -(rho * trace.u0.values[j] + g0 * trace.u1.values[j]) * phi_q;
    }
    let boundary_term = radial_integral(&bfield, grid, n);
    let residual = i_r - (boundary_term + j1 + j2 + j3);
    let nf = f64::from(n);
    let i_r_scaled = i_r * r_scale.powf(-((nf + 2.0) / q - 2.0));
    Ok(TestFunctionalReport {
        r_scale,
        q,
        i_r,
        j1,
        j2,
        j3,
        boundary_term,
        residual,
        i_r_scaled,
    })
}

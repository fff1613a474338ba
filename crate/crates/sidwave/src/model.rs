//! Problem definition and radial calculus.
//!
//! The equations treated by this crate are radially symmetric, so every
//! field lives on a uniform mesh over `[0, r_max]` with even symmetry at the
//! origin and one code path serves dimensions n = 1, 2, 3. Integrals over
//! R^n reduce to line integrals against the surface weight
//! `omega_{n-1} r^{n-1}`, where `omega_{n-1}` is the measure of the unit
//! sphere (2, 2*pi, 4*pi); for n = 1 the factor 2 accounts for the even
//! extension to the whole line.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::smoothstep::smoothstep;

/// Time-dependent damping coefficient `b(t)` multiplying `u_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// `b(t) = mu / (1 + t)`. `mu = 0` turns damping off (free wave).
    ScaleInvariant { mu: f64 },
    /// `b(t) = (1 + t)^{-beta}` with `beta > 1` (integrable damping).
    PowerLaw { beta: f64 },
}

impl Damping {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Damping::ScaleInvariant { mu } => mu / (1.0 + t),
            Damping::PowerLaw { beta } => (1.0 + t).powf(-beta),
        }
    }

    /// The coefficient `mu` when the damping is scale-invariant.
    pub fn mu(&self) -> Option<f64> {
        match *self {
            Damping::ScaleInvariant { mu } => Some(mu),
            Damping::PowerLaw { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Damping::ScaleInvariant { mu } if !(mu >= 0.0 && mu.is_finite()) => Err(
                Error::Config(format!("scale-invariant damping needs mu >= 0, got {mu}")),
            ),
            Damping::PowerLaw { beta } if !(beta > 1.0 && beta.is_finite()) => Err(
                Error::Config(format!("power-law damping needs beta > 1, got {beta}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Shape of the nonlinear term `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `f(u) = |u|^p` (focusing, sign-indefinite source).
    AbsPow,
    /// `f(u) = |u|^{p-1} u`.
    SignedPow,
    /// `f(u) = -|u|^p` (defocusing).
    NegAbsPow,
    /// Linear equation, `f = 0`.
    None,
}

impl Nonlinearity {
    pub fn eval(&self, u: f64, p: f64) -> f64 {
        match self {
            Nonlinearity::AbsPow => u.abs().powf(p),
            Nonlinearity::SignedPow => u.abs().powf(p - 1.0) * u,
            Nonlinearity::NegAbsPow => -u.abs().powf(p),
            Nonlinearity::None => 0.0,
        }
    }
}

/// Space-time source term, `(t, r) -> s`.
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Optional forcing, used mainly by manufactured-solution verification.
#[derive(Clone)]
pub struct Forcing {
    pub source: SourceFn,
    /// Radius beyond which the source vanishes for all times, when known.
    /// `None` disables the solver's light-cone support tracking.
    pub support_radius: Option<f64>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing")
            .field("source", &"<fn>")
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

/// The full continuous problem: `u_tt - Lap u + b(t) u_t = f(u) + s(t, x)`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub n: u32,
    pub damping: Damping,
    /// Nonlinearity exponent, `p > 1`. For n = 3 the energy framework caps
    /// it at `p <= 3`.
    pub p: f64,
    pub nonlinearity: Nonlinearity,
    pub forcing: Option<Forcing>,
}

impl ModelSpec {
    pub fn new(n: u32, damping: Damping, p: f64, nonlinearity: Nonlinearity) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {n}")));
        }
        damping.validate()?;
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("exponent must satisfy p > 1, got {p}")));
        }
        if n == 3 && p > 3.0 {
            return Err(Error::Config(format!(
                "for n = 3 the exponent is restricted to p <= 3, got {p}"
            )));
        }
        Ok(ModelSpec { n, damping, p, nonlinearity, forcing: None })
    }

    pub fn with_forcing(mut self, source: SourceFn, support_radius: Option<f64>) -> Self {
        self.forcing = Some(Forcing { source, support_radius });
        self
    }

    pub fn b(&self, t: f64) -> f64 {
        self.damping.eval(t)
    }

    pub fn f(&self, u: f64) -> f64 {
        self.nonlinearity.eval(u, self.p)
    }
}

/// Uniform radial mesh: nodes `r_j = j dr`, `j = 0..=nr`, with `dr = r_max / nr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r_max: f64,
    pub nr: usize,
    pub dr: f64,
}

impl RadialGrid {
    pub fn new(r_max: f64, nr: usize) -> Result<Self> {
        make_grid(r_max, nr)
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    /// Number of nodes, `nr + 1`.
    pub fn len(&self) -> usize {
        self.nr + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Build a uniform radial mesh. Rejects `nr < 16` (too coarse for any of the
/// stencils to be meaningful) and non-positive or non-finite `r_max`.
pub fn make_grid(r_max: f64, nr: usize) -> Result<RadialGrid> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
    }
    if nr < 16 {
        return Err(Error::Config(format!("nr must be at least 16, got {nr}")));
    }
    Ok(RadialGrid { r_max, nr, dr: r_max / nr as f64 })
}

/// Nodal samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &RadialGrid) -> Self {
        Field { values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Field { values: (0..grid.len()).map(|j| f(grid.point(j))).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Measure of the unit sphere S^{n-1}; for n = 1 this is the counting
/// measure of two points, matching the even extension of radial data.
pub fn sphere_measure(n: u32) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("dimension must be 1, 2 or 3, got {n}"),
    }
}

/// `integral over R^n of f(|x|) dx`, realized as a composite trapezoid rule
/// against the weight `omega_{n-1} r^{n-1}` on `[0, r_max]`.
///
/// Linear and monotone in `f`; exact degree matches the trapezoid rule, so
/// errors are `O(dr^2)` for C^2 integrands.
pub fn radial_integral(f: &Field, grid: &RadialGrid, n: u32) -> f64 {
    assert_eq!(f.len(), grid.len(), "field/grid size mismatch");
    let omega = sphere_measure(n);
    let mut acc = 0.0;
    for j in 0..=grid.nr {
        let w = if j == 0 || j == grid.nr { 0.5 } else { 1.0 };
        let r = grid.point(j);
        acc += w * f.values[j] * r.powi(n as i32 - 1);
    }
    omega * acc * grid.dr
}

/// Nodal radial derivative: second-order central differences in the
/// interior, one-sided second-order at `r_max`, and exactly zero at the
/// origin (fields are radial samples, hence even in `r`).
pub fn radial_derivative(f: &Field, grid: &RadialGrid) -> Field {
    assert_eq!(f.len(), grid.len(), "field/grid size mismatch");
    let nr = grid.nr;
    let dr = grid.dr;
    let v = &f.values;
    let mut out = vec![0.0; grid.len()];
    for j in 1..nr {
        out[j] = (v[j + 1] - v[j - 1]) / (2.0 * dr);
    }
    out[0] = 0.0;
    out[nr] = (3.0 * v[nr] - 4.0 * v[nr - 1] + v[nr - 2]) / (2.0 * dr);
    Field { values: out }
}

/// Initial profile shapes. Both are C^2 and vanish identically beyond their
/// support radius, which is what the light-cone arguments downstream need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `A (1 - (r/radius)^2)_+^k`; `k >= 2` keeps the junction C^1, the
    /// default `k = 3` makes it C^2.
    PolynomialBump { amplitude: f64, radius: f64, smoothness: u32 },
    /// `A exp(-(r/width)^2)` times a C^2 cutoff that is 1 on
    /// `[0, cutoff/2]` and 0 beyond `cutoff`.
    TruncatedGaussian { amplitude: f64, width: f64, cutoff: f64 },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::PolynomialBump { amplitude, radius, smoothness } => {
                if !amplitude.is_finite() {
                    return Err(Error::Config("bump amplitude must be finite".into()));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Config(format!("bump radius must be positive, got {radius}")));
                }
                if smoothness < 2 {
                    return Err(Error::Config(format!(
                        "bump smoothness must be at least 2, got {smoothness}"
                    )));
                }
                Ok(())
            }
            Profile::TruncatedGaussian { amplitude, width, cutoff } => {
                if !amplitude.is_finite() {
                    return Err(Error::Config("gaussian amplitude must be finite".into()));
                }
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::Config(format!("gaussian width must be positive, got {width}")));
                }
                if !(cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::Config(format!("gaussian cutoff must be positive, got {cutoff}")));
                }
                Ok(())
            }
        }
    }

    /// Radius beyond which the profile vanishes exactly.
    pub fn support_radius(&self) -> f64 {
        match *self {
            Profile::PolynomialBump { radius, .. } => radius,
            Profile::TruncatedGaussian { cutoff, .. } => cutoff,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Profile::PolynomialBump { amplitude, radius, smoothness } => {
                let s = 1.0 - (r / radius) * (r / radius);
                if s <= 0.0 {
                    0.0
                } else {
                    amplitude * s.powi(smoothness as i32)
                }
            }
            Profile::TruncatedGaussian { amplitude, width, cutoff } => {
                if r >= cutoff {
                    0.0
                } else {
                    // ramp = 1 on [0, cutoff/2], quintic descent to 0 at cutoff
                    let ramp = smoothstep(2.0 * (1.0 - r / cutoff));
                    amplitude * (-(r / width) * (r / width)).exp() * ramp
                }
            }
        }
    }
}

/// Initial position and velocity, plus the support radius when the data is
/// known to be compactly supported (drives the solver's light-cone logic).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Field,
    pub u1: Field,
    pub support_radius: Option<f64>,
}

impl InitialData {
    pub fn from_fields(u0: Field, u1: Field, support_radius: Option<f64>) -> Self {
        InitialData { u0, u1, support_radius }
    }
}

/// Sample `(u0, u1) = (profile0, profile1)` on the grid. Either profile may
/// be `None` for zero data. The combined support must sit inside the grid.
pub fn sample_initial_data(
    u0: Option<&Profile>,
    u1: Option<&Profile>,
    grid: &RadialGrid,
) -> Result<InitialData> {
    let mut support = 0.0f64;
    for p in [u0, u1].into_iter().flatten() {
        p.validate()?;
        support = support.max(p.support_radius());
    }
    if support >= grid.r_max {
        return Err(Error::Config(format!(
            "data support radius {support} must lie inside the grid (r_max = {})",
            grid.r_max
        )));
    }
    let sample = |p: Option<&Profile>| match p {
        Some(p) => Field::from_fn(grid, |r| p.eval(r)),
        None => Field::zeros(grid),
    };
    Ok(InitialData {
        u0: sample(u0),
        u1: sample(u1),
        support_radius: Some(support),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(amplitude: f64, radius: f64) -> Profile {
        Profile::PolynomialBump { amplitude, radius, smoothness: 3 }
    }

    #[test]
    fn make_grid_spacing() {
        let g = make_grid(4.0, 16).unwrap();
        assert_eq!(g.dr, 0.25);
        assert_eq!(g.len(), 17);
        assert_eq!(g.point(16), 4.0);

        let g = make_grid(1.0, 1000).unwrap();
        assert!((g.dr - 0.001).abs() < 1e-18);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(make_grid(-1.0, 100).is_err());
        assert!(make_grid(0.0, 100).is_err());
        assert!(make_grid(f64::NAN, 100).is_err());
        assert!(make_grid(1.0, 15).is_err());
    }

    #[test]
    fn bump_samples_match_closed_form_and_vanish_outside() {
        let g = make_grid(2.0, 200).unwrap();
        let data = sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).unwrap();
        assert_eq!(data.u0.values[0], 1.0);
        assert_eq!(data.support_radius, Some(1.0));
        // closed form at r = 0.5: (1 - 0.25)^3
        let expect = 0.75f64.powi(3);
        assert!((data.u0.values[50] - expect).abs() < 1e-15);
        // exact zeros at and beyond the support radius
        for j in 100..=200 {
            assert_eq!(data.u0.values[j], 0.0);
        }
        assert!(data.u1.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_amplitude_is_zero_field() {
        let g = make_grid(2.0, 64).unwrap();
        let data = sample_initial_data(Some(&bump(0.0, 1.0)), Some(&bump(0.0, 0.5)), &g).unwrap();
        assert!(data.u0.values.iter().all(|&v| v == 0.0));
        assert!(data.u1.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_gaussian_closed_form() {
        let g = make_grid(4.0, 400).unwrap();
        let prof = Profile::TruncatedGaussian { amplitude: 1.0, width: 0.5, cutoff: 2.0 };
        let data = sample_initial_data(Some(&prof), None, &g).unwrap();
        // at r = 0.5 the cutoff ramp is still 1, so the value is exp(-1)
        let j = 50; // r = 0.5
        assert!((data.u0.values[j] - (-1.0f64).exp()).abs() < 1e-15);
        // beyond the cutoff the samples are exactly zero
        for j in 200..=400 {
            assert_eq!(data.u0.values[j], 0.0);
        }
        // C^2 junction: ramp leaves 1 smoothly after cutoff/2
        assert!(data.u0.values[99] > data.u0.values[101]);
    }

    #[test]
    fn sample_rejects_support_outside_grid() {
        let g = make_grid(1.0, 100).unwrap();
        assert!(sample_initial_data(Some(&bump(1.0, 1.5)), None, &g).is_err());
        assert!(sample_initial_data(Some(&bump(1.0, 1.0)), None, &g).is_err());
        let prof = Profile::PolynomialBump { amplitude: 1.0, radius: 0.5, smoothness: 1 };
        assert!(sample_initial_data(Some(&prof), None, &g).is_err());
    }

    #[test]
    fn radial_integral_ball_volumes() {
        // indicator of the unit ball against each dimension's weight
        for (n, expect) in [(1, 2.0), (2, std::f64::consts::PI), (3, 4.0 * std::f64::consts::PI / 3.0)] {
            let g = make_grid(2.0, 4000).unwrap();
            let ind = Field::from_fn(&g, |r| if r <= 1.0 { 1.0 } else { 0.0 });
            let got = radial_integral(&ind, &g, n);
            let tol = 10.0 * g.dr * g.dr + 8.0 * g.dr; // indicator has an O(dr) edge error
            assert!(
                (got - expect).abs() < tol,
                "n = {n}: got {got}, expected {expect}"
            );
        }
    }

    #[test]
    fn radial_integral_gaussian_n3() {
        // integral over R^3 of exp(-r^2) = pi^{3/2}
        let g = make_grid(8.0, 1600).unwrap();
        let f = Field::from_fn(&g, |r| (-r * r).exp());
        let got = radial_integral(&f, &g, 3);
        let expect = std::f64::consts::PI.powf(1.5);
        assert!((got - expect).abs() < 1e-4, "got {got}, expected {expect}");
    }

    #[test]
    fn radial_derivative_exact_on_quadratics() {
        let g = make_grid(3.0, 60).unwrap();
        let f = Field::from_fn(&g, |r| r * r);
        let d = radial_derivative(&f, &g);
        for j in 0..=g.nr {
            assert!((d.values[j] - 2.0 * g.point(j)).abs() < 1e-12);
        }
        let c = Field::from_fn(&g, |_| 4.5);
        let dc = radial_derivative(&c, &g);
        assert!(dc.values.iter().all(|&v| v.abs() < 1e-13));
    }

    #[test]
    fn radial_derivative_second_order() {
        // error against cos' = -sin shrinks by ~4x when dr halves
        let err = |nr: usize| {
            let g = make_grid(3.0, nr).unwrap();
            let f = Field::from_fn(&g, |r| r.cos());
            let d = radial_derivative(&f, &g);
            (1..g.nr)
                .map(|j| (d.values[j] + g.point(j).sin()).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = err(100) / err(200);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected ~4x error reduction, got {ratio}"
        );
    }

    #[test]
    fn integration_by_parts_holds_to_second_order() {
        // n = 1: 2 * integral of (f h)' over [0, inf) telescopes to
        // -2 f(0) h(0) for compactly supported pairs
        let g = make_grid(4.0, 800).unwrap();
        let f = Field::from_fn(&g, |r| bump(1.3, 2.5).eval(r));
        let h = Field::from_fn(&g, |r| bump(-0.7, 3.0).eval(r + 0.2));
        let fp = radial_derivative(&f, &g);
        let hp = radial_derivative(&h, &g);
        let mut comb = Field::zeros(&g);
        for j in 0..g.len() {
            comb.values[j] = fp.values[j] * h.values[j] + f.values[j] * hp.values[j];
        }
        let total = radial_integral(&comb, &g, 1);
        let expect = -2.0 * f.values[0] * h.values[0];
        assert!(
            (total - expect).abs() < 1e-3,
            "integration by parts defect {}",
            total - expect
        );
    }

    #[test]
    fn model_spec_validation() {
        let ok = ModelSpec::new(1, Damping::ScaleInvariant { mu: 2.0 }, 2.0, Nonlinearity::AbsPow);
        assert!(ok.is_ok());
        assert!(ModelSpec::new(0, Damping::ScaleInvariant { mu: 2.0 }, 2.0, Nonlinearity::None).is_err());
        assert!(ModelSpec::new(4, Damping::ScaleInvariant { mu: 2.0 }, 2.0, Nonlinearity::None).is_err());
        assert!(ModelSpec::new(1, Damping::ScaleInvariant { mu: -0.5 }, 2.0, Nonlinearity::None).is_err());
        assert!(ModelSpec::new(1, Damping::PowerLaw { beta: 1.0 }, 2.0, Nonlinearity::None).is_err());
        assert!(ModelSpec::new(1, Damping::ScaleInvariant { mu: 2.0 }, 1.0, Nonlinearity::AbsPow).is_err());
        assert!(ModelSpec::new(3, Damping::ScaleInvariant { mu: 2.0 }, 3.5, Nonlinearity::AbsPow).is_err());
        // free wave is representable
        assert!(ModelSpec::new(2, Damping::ScaleInvariant { mu: 0.0 }, 2.0, Nonlinearity::None).is_ok());
    }

    #[test]
    fn damping_values() {
        let d = Damping::ScaleInvariant { mu: 3.0 };
        assert_eq!(d.eval(0.0), 3.0);
        assert_eq!(d.eval(2.0), 1.0);
        let p = Damping::PowerLaw { beta: 2.0 };
        assert!((p.eval(1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn nonlinearity_shapes() {
        let p = 2.5;
        assert!((Nonlinearity::AbsPow.eval(-2.0, p) - 2.0f64.powf(2.5)).abs() < 1e-12);
        assert!((Nonlinearity::SignedPow.eval(-2.0, p) + 2.0f64.powf(2.5)).abs() < 1e-12);
        assert!((Nonlinearity::NegAbsPow.eval(2.0, p) + 2.0f64.powf(2.5)).abs() < 1e-12);
        assert_eq!(Nonlinearity::None.eval(5.0, p), 0.0);
        assert_eq!(Nonlinearity::AbsPow.eval(0.0, p), 0.0);
    }
}

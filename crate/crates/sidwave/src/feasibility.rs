//! Constructive parameter chains for the global-existence side of the
//! theory.
//!
//! The decay estimates in the strongly damped regime hold once a chain
//! of smallness parameters and two large constants are chosen
//! consistently: a slack `eps` in the admissible window determined by
//! `(n, p)`, weight exponents `delta, delta1, delta2, delta3` derived
//! from it, an interpolation weight `nu`, and finally the damping size
//! `mu` that makes every inequality in the energy argument strict. This
//! module derives such a chain (`solve_feasible`), verifies an
//! arbitrary chain against the raw inequalities (`check_feasible`), and
//! maps out how the smallest workable `mu` grows as the slack shrinks
//! (`mu0_curve`).

use crate::error::{Error, Result};

/// A fully resolved parameter chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleParams {
    pub n: u32,
    pub p: f64,
    /// Slack below the scaling-critical decay rate.
    pub eps: f64,
    /// Primary weight exponent, `4 eps / (3n - 2 eps)`.
    pub delta: f64,
    /// Weight share in the potential term, `n delta / (2 (2 + delta))`
    /// (equals `eps / 3` identically).
    pub delta1: f64,
    /// Coercivity margin of the damped energy form.
    pub delta2: f64,
    /// Auxiliary margin coupling the two energy levels.
    pub delta3: f64,
    /// Interpolation weight for the nonlinear absorption.
    pub nu: f64,
    /// Damping size for which the whole chain closes.
    pub mu: f64,
    /// Gagliardo-Nirenberg interpolation exponent for the `L^{p+1}`
    /// norm between `L^2` and `H^1`.
    pub sigma: f64,
}

/// Largest admissible slack for dimension `n` and power `p`:
/// `2n (p - 1 - 2/n) / (p - 1)`. Positive exactly when `p` exceeds the
/// parabolic critical power `1 + 2/n`.
pub fn eps_upper_bound(n: u32, p: f64) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::Config(format!("dimension must be 1, 2, or 3, got {n}")));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::Config(format!("power must be finite and > 1, got {p}")));
    }
    let nf = f64::from(n);
    let gap = p - 1.0 - 2.0 / nf;
    if gap <= 0.0 {
        return Err(Error::Infeasible(format!(
            "power {p} is at or below the critical power {} for n = {n}",
            1.0 + 2.0 / nf
        )));
    }
    Ok(2.0 * nf * gap / (p - 1.0))
}

/// Derive the weight exponents from the slack. Requires
/// `0 < eps < min(3n/2, n+1)` so that `delta` and `delta3` stay
/// positive.
pub fn derive_deltas(n: u32, eps: f64) -> Result<(f64, f64, f64, f64)> {
    if !(1..=3).contains(&n) {
        return Err(Error::Config(format!("dimension must be 1, 2, or 3, got {n}")));
    }
    let nf = f64::from(n);
    if !(eps.is_finite() && eps > 0.0 && eps < 1.5 * nf && eps < nf + 1.0) {
        return Err(Error::Config(format!(
            "slack must lie in (0, min(3n/2, n+1)) for n = {n}, got {eps}"
        )));
    }
    let delta = 4.0 * eps / (3.0 * nf - 2.0 * eps);
    let delta1 = nf * delta / (2.0 * (2.0 + delta));
    let delta2 = (delta / (8.0 + delta)).min(delta / (2.0 * (2.0 + delta)));
    let delta3 = delta1 / (4.0 * (nf + 1.0 - 3.0 * delta1));
    Ok((delta, delta1, delta2, delta3))
}

/// Build a complete feasible chain for `(n, p)`. When `eps` is omitted
/// the midpoint of the admissible window is used. The result is
/// guaranteed to pass [`check_feasible`]; an explicit slack outside the
/// window is rejected.
pub fn solve_feasible(n: u32, p: f64, eps: Option<f64>) -> Result<FeasibleParams> {
    let bound = eps_upper_bound(n, p)?;
    let eps = match eps {
        Some(e) => {
            if !(e.is_finite() && e > 0.0 && e < bound) {
                return Err(Error::Infeasible(format!(
                    "slack {e} outside the admissible window (0, {bound}) for n = {n}, p = {p}"
                )));
            }
            e
        }
        None => bound / 2.0,
    };
    let (delta, delta1, delta2, delta3) = derive_deltas(n, eps)?;
    let nf = f64::from(n);
    let nu = 1.1 * (nf + 2.0 - eps) / (2.0 * delta2);
    let b = 4.0 * nu + 2.0 + 2.0 * (nf + 1.0 - eps);
    let c = (nf + 1.0 - eps) * nu / delta3;
    let quad_root = 0.5 * (b + (b * b + 4.0 * c).sqrt());
    let mu = 1.01 * (2.0 * nu / delta2).max(quad_root);
    let sigma = nf * (p - 1.0) / (2.0 * (p + 1.0));
    let params = FeasibleParams {
        n,
        p,
        eps,
        delta,
        delta1,
        delta2,
        delta3,
        nu,
        mu,
        sigma,
    };
    let violations = check_feasible(&params);
    if !violations.is_empty() {
        return Err(Error::Infeasible(format!(
            "derived chain fails its own inequalities: {}",
            violations.join("; ")
        )));
    }
    Ok(params)
}

/// Verify a parameter chain against the raw inequalities of the energy
/// argument, independently of how it was produced. Returns one message
/// per violated condition; an empty vector means the chain is feasible.
pub fn check_feasible(params: &FeasibleParams) -> Vec<String> {
    let mut out = Vec::new();
    let FeasibleParams {
        n,
        p,
        eps,
        delta,
        delta1,
        delta2,
        delta3,
        nu,
        mu,
        sigma,
    } = *params;
    let nf = f64::from(n);
    if !(1..=3).contains(&n) {
        out.push(format!("dimension {n} out of range"));
        return out;
    }
    for (name, v) in [
        ("p", p),
        ("eps", eps),
        ("delta", delta),
        ("delta1", delta1),
        ("delta2", delta2),
        ("delta3", delta3),
        ("nu", nu),
        ("mu", mu),
        ("sigma", sigma),
    ] {
        if !(v.is_finite() && v > 0.0) {
            out.push(format!("{name} = {v} must be positive and finite"));
            return out;
        }
    }
    // admissible window for the slack
    match eps_upper_bound(n, p) {
        Ok(bound) if eps < bound => {}
        Ok(bound) => out.push(format!("slack {eps} not below its bound {bound}")),
        Err(e) => out.push(format!("no admissible window: {e}")),
    }
    // internal consistency of the weight exponents
    if (delta - 4.0 * eps / (3.0 * nf - 2.0 * eps)).abs() > 1e-12 * delta.max(1.0) {
        out.push(format!("delta = {delta} inconsistent with slack {eps}"));
    }
    if (3.0 * delta1 - eps).abs() > 1e-12 {
        out.push(format!("delta1 = {delta1} must equal eps/3 = {}", eps / 3.0));
    }
    if delta2 > delta / (8.0 + delta) + 1e-15 || delta2 > delta / (2.0 * (2.0 + delta)) + 1e-15 {
        out.push(format!("delta2 = {delta2} exceeds a coercivity candidate"));
    }
    // the damped energy form: (1 - delta2) X^2 - 2 X Y
    //   + (4 + delta - delta2 (2 + delta)) / 4 Y^2 must be nonnegative
    if 1.0 - delta2 <= 0.0 {
        out.push(format!("delta2 = {delta2} destroys the leading coefficient"));
    }
    let disc = 4.0 - (1.0 - delta2) * (4.0 + delta - delta2 * (2.0 + delta));
    if disc > 1e-12 {
        out.push(format!(
            "energy form indefinite: discriminant excess {disc}"
        ));
    }
    // the coupling margin between the two energy levels
    let head = nf + 1.0 - 3.0 * delta1;
    if head <= 0.0 {
        out.push(format!("n + 1 - 3 delta1 = {head} must be positive"));
    } else {
        if delta3 >= delta1 / (2.0 * head) {
            out.push(format!(
                "delta3 = {delta3} not below delta1 / (2 (n + 1 - 3 delta1)) = {}",
                delta1 / (2.0 * head)
            ));
        }
        let margin = (nf + 1.0 - 2.0 * delta1) - head * (1.0 + 2.0 * delta3);
        if margin <= 0.0 {
            out.push(format!("level-coupling margin {margin} not positive"));
        }
    }
    // the interpolation weight must dominate the dispersive constant
    if nu <= (nf + 2.0 - eps) / (2.0 * delta2) {
        out.push(format!(
            "nu = {nu} not above (n + 2 - eps) / (2 delta2) = {}",
            (nf + 2.0 - eps) / (2.0 * delta2)
        ));
    }
    // the damping must dominate both the linear and the quadratic
    // thresholds
    if mu <= 2.0 * nu / delta2 {
        out.push(format!("mu = {mu} not above 2 nu / delta2 = {}", 2.0 * nu / delta2));
    }
    let bq = 4.0 * nu + 2.0 + 2.0 * (nf + 1.0 - eps);
    let cq = (nf + 1.0 - eps) * nu / delta3;
    if mu * mu - bq * mu - cq <= 0.0 {
        out.push(format!(
            "mu = {mu} inside the quadratic threshold (B = {bq}, C = {cq})"
        ));
    }
    // interpolation exponent: within (0, 1) and matching the Sobolev
    // scaling relation 1/(p+1) = sigma (1/2 - 1/n) + (1 - sigma)/2
    if !(sigma > 0.0 && sigma < 1.0) {
        out.push(format!("sigma = {sigma} outside (0, 1)"));
    }
    let relation = sigma * (0.5 - 1.0 / nf) + (1.0 - sigma) / 2.0;
    if (relation - 1.0 / (p + 1.0)).abs() > 1e-12 {
        out.push(format!(
            "sigma = {sigma} violates the interpolation relation ({relation} vs {})",
            1.0 / (p + 1.0)
        ));
    }
    out
}

/// One sample of the minimal-damping curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu0Point {
    pub eps: f64,
    /// The weight exponent at which the scan attains its minimum.
    pub delta: f64,
    pub nu: f64,
    /// Smallest damping the construction delivers at this slack.
    pub mu0: f64,
}

/// For each slack, scan the weight exponent over a grid around its
/// nominal value (two octaves either side) and record the smallest
/// damping the chain produces. The scan deliberately frees `delta`
/// from the nominal coupling `delta1 = eps/3`, so the resulting points
/// trace a lower envelope rather than feasible chains.
pub fn mu0_curve(n: u32, p: f64, eps_values: &[f64]) -> Result<Vec<Mu0Point>> {
    let bound = eps_upper_bound(n, p)?;
    let nf = f64::from(n);
    let mut out = Vec::with_capacity(eps_values.len());
    for &eps in eps_values {
        if !(eps.is_finite() && eps > 0.0 && eps < bound) {
            return Err(Error::Infeasible(format!(
                "slack {eps} outside the admissible window (0, {bound})"
            )));
        }
        let (delta_nom, _, _, _) = derive_deltas(n, eps)?;
        let mut best: Option<Mu0Point> = None;
        let grid_len = 81;
        for k in 0..grid_len {
            let x = -2.0 + 4.0 * k as f64 / (grid_len - 1) as f64;
            let delta = delta_nom * x.exp2();
            let delta1 = nf * delta / (2.0 * (2.0 + delta));
            let head = nf + 1.0 - 3.0 * delta1;
            if head <= 0.0 {
                continue;
            }
            let delta2 = (delta / (8.0 + delta)).min(delta / (2.0 * (2.0 + delta)));
            let delta3 = delta1 / (4.0 * head);
            let nu = 1.1 * (nf + 2.0 - eps) / (2.0 * delta2);
            let b = 4.0 * nu + 2.0 + 2.0 * (nf + 1.0 - eps);
            let c = (nf + 1.0 - eps) * nu / delta3;
            let mu = 1.01 * (2.0 * nu / delta2).max(0.5 * (b + (b * b + 4.0 * c).sqrt()));
            if best.is_none_or(|bst| mu < bst.mu0) {
                best = Some(Mu0Point {
                    eps,
                    delta,
                    nu,
                    mu0: mu,
                });
            }
        }
        out.push(best.expect("nominal delta always admissible"));
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`. All inputs must be
/// positive; at least two points are required.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Data(format!(
            "need matching series with at least 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Data("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|&v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..lx.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if den == 0.0 {
        return Err(Error::Data("log-log fit needs distinct abscissae".into()));
    }
    Ok(num / den)
}

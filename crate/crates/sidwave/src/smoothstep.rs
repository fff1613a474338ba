//! Quintic smoothstep, the C^2 transition used by every cutoff in the crate.

/// `s(x) = x^3 (10 - 15 x + 6 x^2)` clamped to `[0, 1]`.
///
/// Rises from 0 to 1 with `s'(0) = s''(0) = s'(1) = s''(1) = 0`, so any
/// profile glued from plateaus with this ramp is C^2 across the junctions.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// First derivative of [`smoothstep`]: `30 x^2 (1 - x)^2` inside `(0, 1)`.
pub fn smoothstep_d1(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let y = 1.0 - x;
        30.0 * x * x * y * y
    }
}

/// Second derivative of [`smoothstep`]: `60 x (1 - x)(1 - 2 x)` inside `(0, 1)`.
pub fn smoothstep_d2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
    }
}

/// Default step for the central-difference stencil.
pub const DEFAULT_EPS: f64 = 1e-3;

/// Relative error between an analytic and a numeric derivative,
/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Fourth-order central difference
/// `(8(f(x+ε) − f(x−ε)) − (f(x+2ε) − f(x−2ε))) / 12ε` along coordinate `i`.
pub fn central_difference<F>(mut f: F, x: &[f64], i: usize, eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut at = |dx: f64| {
        probe[i] = x[i] + dx;
        f(&probe)
    };
    let (p1, m1, p2, m2) = (at(eps), at(-eps), at(2.0 * eps), at(-2.0 * eps));
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps)
}

/// Compares the analytic gradient returned by `value_and_grad` at `x` with
/// [`central_difference`], one coordinate at a time. Returns the maximum
/// relative error over all coordinates.
pub fn grad_check<F>(mut value_and_grad: F, x: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = value_and_grad(x);
    assert_eq!(analytic.len(), x.len(), "gradient length mismatch");
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let numeric = central_difference(|p| value_and_grad(p).0, x, i, eps);
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}

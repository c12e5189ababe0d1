//! Central finite differences, used to check analytic output errors.

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Scale below which a gradient component is compared absolutely.
///
/// A central difference with step 1e-5 on an O(1) loss carries ~1e-11 of
/// rounding noise, so pure relative comparison of vanishing gradients would
/// measure that noise instead of the analytic error.
pub const GRADIENT_SCALE_FLOOR: f64 = 1e-3;

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞, GRADIENT_SCALE_FLOOR)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / inf(a).max(inf(b)).max(GRADIENT_SCALE_FLOOR)
}

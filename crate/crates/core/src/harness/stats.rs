/// Absolute percentage error.
pub fn ape(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth * 100.0
}

/// Linear-interpolated quantile of already sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Median absolute percentage error of `estimates` against `truth`.
///
/// # Panics
/// If `estimates` is empty or `truth` is not positive.
pub fn mdape(estimates: &[f64], truth: f64) -> f64 {
    assert!(!estimates.is_empty(), "mdape of no estimates");
    assert!(truth > 0.0, "mdape needs a positive truth");
    let mut errs: Vec<f64> = estimates.iter().map(|&e| ape(e, truth)).collect();
    errs.sort_by(f64::total_cmp);
    quantile(&errs, 0.5)
}

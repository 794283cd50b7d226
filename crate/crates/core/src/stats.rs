//! Small regression helpers shared by the convergence tooling.

/// Least-squares slope of `log(err)` against `log(dt)`.
///
/// Pairs with a non-positive or non-finite coordinate are skipped. Returns
/// `0.0` when fewer than two usable pairs remain or the errors are all
/// below `floor` (no measurable trend, e.g. an exact method).
pub fn log_log_slope(dts: &[f64], errors: &[f64], floor: f64) -> f64 {
    let pts: Vec<(f64, f64)> = dts
        .iter()
        .zip(errors)
        .filter(|(d, e)| d.is_finite() && e.is_finite() && **d > 0.0 && **e > floor)
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (_, slope, _) = crate::sderiv::linear_fit(&xs, &ys);
    if slope.is_finite() {
        slope
    } else {
        0.0
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

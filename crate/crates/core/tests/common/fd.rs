/// Central finite differences of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Componentwise `|a − fd| / max(|fd|, 1e−4)`, maximised.
pub fn max_relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic.iter().zip(fd).map(|(a, f)| (a - f).abs() / f.abs().max(1e-4)).fold(0.0, f64::max)
}

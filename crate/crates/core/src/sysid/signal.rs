use super::SysIdError;

/// Derivative of the quadratic through three samples, evaluated at `at`.
fn lagrange3(t: [f64; 3], y: [f64; 3], at: f64) -> f64 {
    let [t0, t1, t2] = t;
    let l0 = ((at - t1) + (at - t2)) / ((t0 - t1) * (t0 - t2));
    let l1 = ((at - t0) + (at - t2)) / ((t1 - t0) * (t1 - t2));
    let l2 = ((at - t0) + (at - t1)) / ((t2 - t0) * (t2 - t1));
    // Weights sum to zero; differencing against the middle sample keeps
    // constant inputs at exactly zero slope.
    let _ = l1;
    l0 * (y[0] - y[1]) + l2 * (y[2] - y[1])
}

fn check_time(t: &[f64], len: usize, needed: usize) -> Result<(), SysIdError> {
    if len != t.len() {
        return Err(SysIdError::LengthMismatch { expected: t.len(), got: len });
    }
    if len < needed {
        return Err(SysIdError::InsufficientData { needed, got: len });
    }
    if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(SysIdError::NonMonotoneTime { index: i + 1 });
    }
    Ok(())
}

/// Numerical time derivative: central differences inside, second-order
/// one-sided stencils at both ends. Exact for quadratics on any grid.
pub fn differentiate(series: &[f64], t: &[f64]) -> Result<Vec<f64>, SysIdError> {
    check_time(t, series.len(), 3)?;
    let n = series.len();
    let tri = |i: usize| ([t[i], t[i + 1], t[i + 2]], [series[i], series[i + 1], series[i + 2]]);
    let mut out = Vec::with_capacity(n);
    let (tt, yy) = tri(0);
    out.push(lagrange3(tt, yy, t[0]));
    for i in 1..n - 1 {
        let (tt, yy) = tri(i - 1);
        out.push(lagrange3(tt, yy, t[i]));
    }
    let (tt, yy) = tri(n - 3);
    out.push(lagrange3(tt, yy, t[n - 1]));
    Ok(out)
}

/// Fourth-order five-point central derivative for uniformly sampled data,
/// falling back to [`differentiate`] at the two samples nearest each end.
pub fn differentiate_uniform5(series: &[f64], dt: f64) -> Result<Vec<f64>, SysIdError> {
    let n = series.len();
    if n < 5 {
        return Err(SysIdError::InsufficientData { needed: 5, got: n });
    }
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let mut out = differentiate(series, &t)?;
    for i in 2..n - 2 {
        out[i] = (series[i - 2] - 8.0 * series[i - 1] + 8.0 * series[i + 1] - series[i + 2]) / (12.0 * dt);
    }
    Ok(out)
}

/// Centred moving average. The window shrinks symmetrically near the ends so
/// the output keeps the input length and constant inputs pass unchanged.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>, SysIdError> {
    if window == 0 || window.is_multiple_of(2) || window > series.len() {
        return Err(SysIdError::SmoothingWindow { window, len: series.len() });
    }
    let n = series.len();
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let k = half.min(i).min(n - 1 - i);
            let win = &series[i - k..=i + k];
            // Offsets from the first sample keep constant inputs bit-exact.
            let base = win[0];
            base + win.iter().map(|v| v - base).sum::<f64>() / win.len() as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn derivative_examples() {
        let t = grid(101, 0.01);
        assert!(differentiate(&vec![4.2; 101], &t).unwrap().iter().all(|&d| d == 0.0));
        for d in differentiate(&t, &t).unwrap() {
            assert_relative_eq!(d, 1.0, epsilon = 1e-10);
        }
        let sq: Vec<f64> = t.iter().map(|x| x * x).collect();
        let d = differentiate(&sq, &t).unwrap();
        let max_err = d.iter().zip(&t).map(|(d, x)| (d - 2.0 * x).abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-10, "{max_err}");
    }

    #[test]
    fn derivative_exact_on_quadratic_with_uneven_steps() {
        let t = [0.0, 0.1, 0.13, 0.3, 0.31, 0.5];
        let y: Vec<f64> = t.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        for (d, x) in differentiate(&y, &t).unwrap().iter().zip(t) {
            assert_relative_eq!(*d, 6.0 * x - 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivative_errors() {
        assert!(matches!(
            differentiate(&[1.0, 2.0], &[0.0, 1.0]),
            Err(SysIdError::InsufficientData { needed: 3, got: 2 })
        ));
        assert!(matches!(
            differentiate(&[1.0, 2.0, 3.0], &[0.0, 1.0, 1.0]),
            Err(SysIdError::NonMonotoneTime { index: 2 })
        ));
    }

    #[test]
    fn five_point_is_exact_on_quartics() {
        let dt = 0.01;
        let t = grid(50, dt);
        let y: Vec<f64> = t.iter().map(|x| x.powi(4) - x.powi(3)).collect();
        let d = differentiate_uniform5(&y, dt).unwrap();
        for i in 2..48 {
            let x = t[i];
            assert_relative_eq!(d[i], 4.0 * x.powi(3) - 3.0 * x * x, epsilon = 1e-10);
        }
    }

    #[test]
    fn smoothing_examples() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        assert_eq!(smooth(&x, 1).unwrap(), x);
        assert_eq!(smooth(&[0.3; 30], 7).unwrap(), vec![0.3; 30]);
        assert!(smooth(&x, 4).is_err());
        assert!(smooth(&x, 21).is_err());
        assert!(smooth(&x, 0).is_err());
    }

    #[test]
    fn smoothing_reduces_white_noise_variance_by_window() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = Normal::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(200_000).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let smoothed = smooth(&noise, 21).unwrap();
        // Ignore the shrinking-window margins.
        let ratio = var(&noise) / var(&smoothed[10..smoothed.len() - 10]);
        assert!((ratio / 21.0 - 1.0).abs() < 0.05, "ratio {ratio}");
    }
}

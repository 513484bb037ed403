use super::SysIdError;

/// Largest lag searched by default (s).
pub const DEFAULT_MAX_DELAY: f64 = 0.5;

/// Lag (s) by which `measured` trails `command`, taken as the non-negative
/// lag up to `max_delay` that maximizes the normalized cross-correlation
/// over the overlapping samples.
pub fn estimate_delay_xcorr(command: &[f64], measured: &[f64], dt: f64, max_delay: f64) -> Result<f64, SysIdError> {
    let n = command.len();
    if measured.len() != n {
        return Err(SysIdError::LengthMismatch { expected: n, got: measured.len() });
    }
    if n < 10 {
        return Err(SysIdError::InsufficientData { needed: 10, got: n });
    }
    if !(dt > 0.0) || !(max_delay >= 0.0) {
        return Err(SysIdError::InvalidConfig(format!("dt = {dt}, max_delay = {max_delay}")));
    }
    let centered = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| v - mean).collect::<Vec<_>>()
    };
    let c = centered(command);
    let m = centered(measured);
    let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let scale = |x: &[f64]| x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if energy(&c) <= 1e-24 * scale(command).max(1.0) || energy(&m) <= 1e-24 * scale(measured).max(1.0) {
        return Err(SysIdError::FlatSignal);
    }

    // Keep at least half the record overlapping.
    let max_lag = ((max_delay / dt).round() as usize).min(n / 2);
    let mut best = (0usize, f64::NEG_INFINITY);
    for lag in 0..=max_lag {
        let a = &c[..n - lag];
        let b = &m[lag..];
        let (ea, eb) = (energy(a), energy(b));
        if ea <= 0.0 || eb <= 0.0 {
            continue;
        }
        let r = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (ea * eb).sqrt();
        if r > best.1 {
            best = (lag, r);
        }
    }
    Ok(best.0 as f64 * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chirp(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| {
            let t = i as f64 * dt;
            (2.0 * t + 0.6 * t * t).sin() + 0.3 * (7.1 * t).cos()
        })
        .collect()
    }

    fn shifted(x: &[f64], k: usize) -> Vec<f64> {
        (0..x.len()).map(|i| x[i.saturating_sub(k)]).collect()
    }

    #[test]
    fn identical_series_have_zero_delay() {
        let x = chirp(500, 0.01);
        assert_eq!(estimate_delay_xcorr(&x, &x, 0.01, DEFAULT_MAX_DELAY).unwrap(), 0.0);
    }

    #[test]
    fn recovers_fifteen_sample_shift() {
        let x = chirp(1000, 0.01);
        let d = estimate_delay_xcorr(&x, &shifted(&x, 15), 0.01, DEFAULT_MAX_DELAY).unwrap();
        assert_relative_eq!(d, 0.15, epsilon = 0.01);
    }

    #[test]
    fn periodic_signal_picks_non_negative_lag() {
        let dt = 0.01;
        let cmd: Vec<f64> = (0..1000).map(|i| (2.0 * std::f64::consts::PI * i as f64 * dt).sin()).collect();
        let meas: Vec<f64> =
            (0..1000).map(|i| (2.0 * std::f64::consts::PI * (i as f64 * dt - 0.15)).sin()).collect();
        let d = estimate_delay_xcorr(&cmd, &meas, dt, DEFAULT_MAX_DELAY).unwrap();
        assert_relative_eq!(d, 0.15, epsilon = dt);
    }

    #[test]
    fn errors() {
        let flat = vec![1.0; 100];
        let x = chirp(100, 0.01);
        assert!(matches!(estimate_delay_xcorr(&flat, &x, 0.01, 0.5), Err(SysIdError::FlatSignal)));
        assert!(matches!(estimate_delay_xcorr(&x, &flat, 0.01, 0.5), Err(SysIdError::FlatSignal)));
        assert!(estimate_delay_xcorr(&x[..5], &x[..5], 0.01, 0.5).is_err());
        assert!(estimate_delay_xcorr(&x, &x[..50], 0.01, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn pure_shift_is_exact_to_one_sample(k in 0usize..50, dt in 0.005f64..0.02) {
            let x = chirp(1200, dt);
            let d = estimate_delay_xcorr(&x, &shifted(&x, k), dt, 50.0 * dt).unwrap();
            prop_assert!((d - k as f64 * dt).abs() <= dt + 1e-12);
        }
    }
}

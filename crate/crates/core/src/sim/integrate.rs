use super::SimError;

/// One classical Runge-Kutta step of size `dt` from `y` at time `t`.
///
/// `rhs` sees only the state; inputs are held by the caller for the whole
/// step. Every stage derivative is checked for finiteness.
pub fn rk4_step<const N: usize, F>(mut rhs: F, y: &[f64; N], t: f64, dt: f64) -> Result<[f64; N], SimError>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N], SimError>,
{
    if !(dt > 0.0) {
        return Err(SimError::InvalidStep(dt));
    }
    let mut eval = |y: &[f64; N]| -> Result<[f64; N], SimError> {
        let k = rhs(y)?;
        if k.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t });
        }
        Ok(k)
    };
    let offset = |k: &[f64; N], h: f64| std::array::from_fn(|i| y[i] + h * k[i]);

    let k1 = eval(y)?;
    let k2 = eval(&offset(&k1, 0.5 * dt))?;
    let k3 = eval(&offset(&k2, 0.5 * dt))?;
    let k4 = eval(&offset(&k3, dt))?;
    Ok(std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Integrates an autonomous system over `steps` fixed steps.
pub fn integrate_rk4<const N: usize, F>(mut rhs: F, y0: [f64; N], dt: f64, steps: usize) -> Result<[f64; N], SimError>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N], SimError>,
{
    let mut y = y0;
    for k in 0..steps {
        y = rk4_step(&mut rhs, &y, k as f64 * dt, dt)?;
    }
    Ok(y)
}

/// Observed order `log2(e(h) / e(h/2))` from errors at successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

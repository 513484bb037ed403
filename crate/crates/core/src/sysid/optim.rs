//! Box-constrained Adam.
//!
//! Parameters are optimized in coordinates scaled to their bounds,
//! `u = (p - lo) / (hi - lo)`, so one learning rate suits parameters of very
//! different magnitude. After every step each coordinate is clamped to its box.

use serde::{Deserialize, Serialize};

use super::SysIdError;

/// A differentiable scalar objective.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> f64;
    /// Writes the gradient into `grad` and returns the value.
    fn value_and_gradient(&self, p: &[f64], grad: &mut [f64]) -> f64;
}

/// Objective from a pair of closures (value, gradient).
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        Self { dim, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, p: &[f64]) -> f64 {
        (self.f)(p)
    }
    fn value_and_gradient(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        (self.g)(p, grad);
        (self.f)(p)
    }
}

/// Central-difference gradient of `obj` with a step of `h` in bound-scaled
/// coordinates. Used to check analytic gradients.
pub fn finite_difference_gradient(obj: &dyn Objective, p: &[f64], bounds: &[(f64, f64)], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let width = bounds[i].1 - bounds[i].0;
            let step = h * width;
            q[i] = p[i] + step;
            let up = obj.value(&q);
            q[i] = p[i] - step;
            let down = obj.value(&q);
            q[i] = p[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once `|L_k - L_(k-1)| <= tolerance * max(L_(k-1), 1e-300)` holds for
    /// `patience` consecutive iterations, or the loss reaches exactly zero.
    pub tolerance: f64,
    pub patience: usize,
    /// Learning rate multiplier reached at the end of the budget; the rate
    /// decays geometrically towards it. `1.0` keeps the rate constant.
    pub final_lr_factor: f64,
    pub bounds: Vec<(f64, f64)>,
    pub initial: Vec<f64>,
}

impl FitConfig {
    /// Default hyperparameters around the given start point and bounds.
    pub fn new(initial: Vec<f64>, bounds: Vec<(f64, f64)>) -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iterations: 5000,
            tolerance: 1e-10,
            patience: 50,
            final_lr_factor: 1e-3,
            bounds,
            initial,
        }
    }

    pub fn validate(&self) -> Result<(), SysIdError> {
        let bad = |what: String| Err(SysIdError::InvalidConfig(what));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be > 0", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} = {b} must lie in (0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) || !(self.final_lr_factor > 0.0 && self.final_lr_factor <= 1.0) {
            return bad("epsilon must be > 0 and final_lr_factor in (0, 1]".into());
        }
        if self.max_iterations == 0 {
            return bad("iteration budget must be positive".into());
        }
        if self.bounds.len() != self.initial.len() {
            return bad(format!("{} bounds for {} parameters", self.bounds.len(), self.initial.len()));
        }
        for (i, (&(lo, hi), &p)) in self.bounds.iter().zip(&self.initial).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo <= p && p <= hi) {
                return bad(format!("parameter {i}: need finite lo < hi and lo <= {p} <= hi, got [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub final_loss: f64,
    /// Loss at the start point followed by the loss after every step.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `objective` with bias-corrected Adam inside the configured box.
pub fn adam_fit(objective: &dyn Objective, config: &FitConfig) -> Result<FitResult, SysIdError> {
    config.validate()?;
    let n = config.initial.len();
    if objective.dim() != n {
        return Err(SysIdError::InvalidConfig(format!(
            "objective has {} parameters, config has {n}",
            objective.dim()
        )));
    }
    let lo: Vec<f64> = config.bounds.iter().map(|b| b.0).collect();
    let width: Vec<f64> = config.bounds.iter().map(|b| b.1 - b.0).collect();
    let to_params = |u: &[f64], p: &mut [f64]| {
        for i in 0..n {
            p[i] = lo[i] + u[i] * width[i];
        }
    };

    let mut u: Vec<f64> = (0..n).map(|i| (config.initial[i] - lo[i]) / width[i]).collect();
    let mut p = config.initial.clone();
    let mut grad = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = Vec::with_capacity(config.max_iterations + 1);
    let mut quiet = 0usize;
    let mut converged = false;
    let decay = config.final_lr_factor.ln() / config.max_iterations as f64;

    let mut iterations = 0;
    while iterations < config.max_iterations {
        let loss = objective.value_and_gradient(&p, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(SysIdError::NonFiniteObjective { iteration: iterations });
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (loss - prev).abs() <= config.tolerance * prev.max(1e-300) {
                quiet += 1;
            } else {
                quiet = 0;
            }
        }
        trace.push(loss);
        if loss == 0.0 || quiet >= config.patience {
            converged = true;
            break;
        }

        iterations += 1;
        let t = iterations as i32;
        let lr = config.learning_rate * (decay * (iterations - 1) as f64).exp();
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        for i in 0..n {
            let g = grad[i] * width[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            let step = lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + config.epsilon);
            u[i] = (u[i] - step).clamp(0.0, 1.0);
        }
        to_params(&u, &mut p);
    }

    if !converged {
        let loss = objective.value(&p);
        if !loss.is_finite() {
            return Err(SysIdError::NonFiniteObjective { iteration: iterations });
        }
        trace.push(loss);
    }
    let final_loss = *trace.last().unwrap_or(&f64::NAN);
    Ok(FitResult { params: p, final_loss, loss_trace: trace, iterations, converged })
}

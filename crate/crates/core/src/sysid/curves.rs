//! Parameterized sub-model curves with analytic parameter gradients, plus
//! the squared-error objective built from them.

use crate::models::{
    friction_force, motor_force, pacejka_lateral, smooth_positive_throttle,
    smooth_positive_throttle_dx, steering_angle, steering_angle_ds, FrictionParams, MotorParams,
    SteeringParams, TireParams, STEERING_BLEND_SHARPNESS,
};

use super::dataset::Dataset;
use super::optim::Objective;

/// A scalar-valued model `f(x, p)` fitted against one label column.
pub trait Curve {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> &'static [&'static str];
    fn input_dim(&self) -> usize;
    fn eval(&self, p: &[f64], x: &[f64]) -> f64;
    /// Writes `df/dp` into `grad` and returns `f`.
    fn eval_with_gradient(&self, p: &[f64], x: &[f64], grad: &mut [f64]) -> f64;

    fn num_params(&self) -> usize {
        self.param_names().len()
    }
}

fn sech2(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// `X = [v]`, parameters `[a, b, c]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrictionCurve;

impl Curve for FrictionCurve {
    fn name(&self) -> &'static str {
        "friction"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["a", "b", "c"]
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, p: &[f64], x: &[f64]) -> f64 {
        friction_force(x[0], &FrictionParams::from_slice(p))
    }
    fn eval_with_gradient(&self, p: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let v = x[0];
        let th = (p[1] * v).tanh();
        grad[0] = -th;
        grad[1] = -p[0] * v * (1.0 - th * th);
        grad[2] = -v;
        -(p[0] * th + v * p[2])
    }
}

/// `X = [tau, v]`, parameters `[d, e, g]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MotorCurve;

impl Curve for MotorCurve {
    fn name(&self) -> &'static str {
        "motor"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["d", "e", "g"]
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn eval(&self, p: &[f64], x: &[f64]) -> f64 {
        motor_force(x[0], x[1], &MotorParams::from_slice(p))
    }
    fn eval_with_gradient(&self, p: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let (tau, v) = (x[0], x[1]);
        let scale = p[0] - v * p[1];
        let t = smooth_positive_throttle(tau, p[2]);
        grad[0] = t;
        grad[1] = -v * t;
        grad[2] = scale * smooth_positive_throttle_dx(tau, p[2]);
        scale * t
    }
}

/// `X = [s]`, parameters `[a_t, b_t, c_t, d_t, e_t]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SteeringCurve;

impl Curve for SteeringCurve {
    fn name(&self) -> &'static str {
        "steering"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["a_t", "b_t", "c_t", "d_t", "e_t"]
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, p: &[f64], x: &[f64]) -> f64 {
        steering_angle(x[0], &SteeringParams::from_slice(p))
    }
    fn eval_with_gradient(&self, p: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let sp = SteeringParams::from_slice(p);
        let u = x[0] + sp.c_t;
        let w = 0.5 * ((STEERING_BLEND_SHARPNESS * u).tanh() + 1.0);
        let (tb, te) = ((sp.b_t * u).tanh(), (sp.e_t * u).tanh());
        grad[0] = w * tb;
        grad[1] = w * sp.a_t * u * sech2(sp.b_t * u);
        grad[2] = steering_angle_ds(x[0], &sp);
        grad[3] = (1.0 - w) * te;
        grad[4] = (1.0 - w) * sp.d_t * u * sech2(sp.e_t * u);
        w * sp.a_t * tb + (1.0 - w) * sp.d_t * te
    }
}

/// `X = [alpha_f]`, parameters `[D, C, B, E]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PacejkaCurve;

impl PacejkaCurve {
    pub fn params(p: &[f64]) -> TireParams {
        TireParams { d: p[0], c: p[1], b: p[2], e: p[3], c_r: 1.0 }
    }
}

impl Curve for PacejkaCurve {
    fn name(&self) -> &'static str {
        "tire_front"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["D", "C", "B", "E"]
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, p: &[f64], x: &[f64]) -> f64 {
        pacejka_lateral(x[0], &Self::params(p))
    }
    fn eval_with_gradient(&self, p: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let (d, c, b, e) = (p[0], p[1], p[2], p[3]);
        let alpha = x[0];
        let z = b * alpha;
        let core = z - z.atan();
        let h = z - e * core;
        let phi = h.atan();
        let (sin_cphi, cos_cphi) = (c * phi).sin_cos();
        let dphi_dh = 1.0 / (1.0 + h * h);
        let dh_dz = 1.0 - e * (1.0 - 1.0 / (1.0 + z * z));
        let outer = d * cos_cphi * c * dphi_dh;
        grad[0] = sin_cphi;
        grad[1] = d * cos_cphi * phi;
        grad[2] = outer * dh_dz * alpha;
        grad[3] = -outer * core;
        d * sin_cphi
    }
}

/// `X = [alpha_r]`, parameters `[C_r]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RearLinearCurve;

impl Curve for RearLinearCurve {
    fn name(&self) -> &'static str {
        "tire_rear"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["C_r"]
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, p: &[f64], x: &[f64]) -> f64 {
        p[0] * x[0]
    }
    fn eval_with_gradient(&self, p: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = x[0];
        p[0] * x[0]
    }
}

/// Sum over rows of the squared residual norm between `predict` and the labels.
///
/// `predict(params, x_row, out)` writes one prediction per label column.
pub fn squared_error_loss<F>(predict: F, params: &[f64], data: &Dataset) -> f64
where
    F: Fn(&[f64], &[f64], &mut [f64]),
{
    let mut out = vec![0.0; data.output_dim()];
    data.rows()
        .map(|(x, y)| {
            predict(params, x, &mut out);
            out.iter().zip(y).map(|(f, y)| (f - y) * (f - y)).sum::<f64>()
        })
        .sum()
}

/// Squared-error loss of a [`Curve`] against label column 0 of a dataset,
/// with its analytic gradient.
pub struct CurveObjective<'a, C: Curve> {
    curve: C,
    data: &'a Dataset,
}

impl<'a, C: Curve> CurveObjective<'a, C> {
    pub fn new(curve: C, data: &'a Dataset) -> Self {
        Self { curve, data }
    }

    pub fn curve(&self) -> &C {
        &self.curve
    }
}

impl<C: Curve> Objective for CurveObjective<'_, C> {
    fn dim(&self) -> usize {
        self.curve.num_params()
    }

    fn value(&self, p: &[f64]) -> f64 {
        squared_error_loss(|p, x, out| out[0] = self.curve.eval(p, x), p, self.data)
    }

    fn value_and_gradient(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut row_grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        for (x, y) in self.data.rows() {
            let r = self.curve.eval_with_gradient(p, x, &mut row_grad) - y[0];
            loss += r * r;
            for (g, dg) in grad.iter_mut().zip(&row_grad) {
                *g += 2.0 * r * dg;
            }
        }
        loss
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bce_loss, Layer, Tensor3};
use crate::error::Result;

/// Central difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Errors below this magnitude are measured absolutely rather than relative
/// to a vanishing gradient.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_input_error: f64,
    pub max_param_error: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.max_input_error.max(self.max_param_error)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares a layer's backward pass with central differences of the scalar
/// `sum(r * forward(x))` for a seeded random projection `r`, over every input
/// entry and every parameter.
pub fn finite_diff_gradcheck<L: Layer + ?Sized>(
    layer: &mut L,
    input: &Tensor3,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let output = layer.forward(input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection: Vec<f64> = (0..output.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upstream = Tensor3::from_raw(output.dims(), projection.clone());
    let objective = |out: &Tensor3| -> f64 { out.data().iter().zip(&projection).map(|(a, b)| a * b).sum() };

    let mut grads = layer.params().map(|p| p.zero_grads());
    let grad_in = layer
        .backward(input, &output, &upstream, grads.as_mut(), true)?
        .expect("input gradient requested");

    let mut max_input_error: f64 = 0.0;
    let mut probe = input.clone();
    for i in 0..input.data().len() {
        let x0 = probe.data()[i];
        probe.data_mut()[i] = x0 + GRADCHECK_STEP;
        let up = objective(&layer.forward(&probe)?);
        probe.data_mut()[i] = x0 - GRADCHECK_STEP;
        let down = objective(&layer.forward(&probe)?);
        probe.data_mut()[i] = x0;
        let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
        max_input_error = max_input_error.max(relative_error(grad_in.data()[i], numeric));
    }
    let mut checked = input.data().len();

    let mut max_param_error: f64 = 0.0;
    if let Some(grads) = grads {
        let analytic: Vec<f64> = grads.weights.iter().chain(&grads.biases).copied().collect();
        let n_weights = grads.weights.len();
        for (i, &a) in analytic.iter().enumerate() {
            let mut eval = |delta: f64| -> Result<f64> {
                let params = layer.params_mut().expect("layer reported parameters");
                let slot = if i < n_weights {
                    &mut params.weights[i]
                } else {
                    &mut params.biases[i - n_weights]
                };
                let x0 = *slot;
                *slot = x0 + delta;
                let value = layer.forward(input).map(|o| objective(&o));
                let params = layer.params_mut().expect("layer reported parameters");
                if i < n_weights {
                    params.weights[i] = x0;
                } else {
                    params.biases[i - n_weights] = x0;
                }
                value
            };
            let numeric = (eval(GRADCHECK_STEP)? - eval(-GRADCHECK_STEP)?) / (2.0 * GRADCHECK_STEP);
            max_param_error = max_param_error.max(relative_error(a, numeric));
        }
        checked += analytic.len();
    }

    Ok(GradCheckReport {
        max_input_error,
        max_param_error,
        checked,
        tolerance,
        passed: max_input_error < tolerance && max_param_error < tolerance,
    })
}

/// Same check for the BCE loss gradient with respect to the predictions.
pub fn gradcheck_bce(pred: &Tensor3, target: &Tensor3, tolerance: f64) -> Result<GradCheckReport> {
    let (_, grad) = bce_loss(pred, target)?;
    let mut probe = pred.clone();
    let mut max_err: f64 = 0.0;
    for i in 0..pred.data().len() {
        let x0 = probe.data()[i];
        probe.data_mut()[i] = x0 + GRADCHECK_STEP;
        let (up, _) = bce_loss(&probe, target)?;
        probe.data_mut()[i] = x0 - GRADCHECK_STEP;
        let (down, _) = bce_loss(&probe, target)?;
        probe.data_mut()[i] = x0;
        let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
        max_err = max_err.max(relative_error(grad.data()[i], numeric));
    }
    Ok(GradCheckReport {
        max_input_error: max_err,
        max_param_error: 0.0,
        checked: pred.data().len(),
        tolerance,
        passed: max_err < tolerance,
    })
}

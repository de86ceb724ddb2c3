use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AdaDelta hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaDelta {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for AdaDelta {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

/// Gradient buffers for one layer, the unit that per-thread accumulation
/// works with.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(n_weights: usize, n_biases: usize) -> Self {
        Self {
            weights: vec![0.0; n_weights],
            biases: vec![0.0; n_biases],
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|g| *g *= factor);
    }
}

/// Trainable weights/biases with their gradients and AdaDelta accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    grads: ParamGrads,
    grads_ready: bool,
    sq_grad: ParamGrads,
    sq_delta: ParamGrads,
}

impl LayerParams {
    pub fn new(weights: Vec<f64>, biases: Vec<f64>) -> Self {
        let (nw, nb) = (weights.len(), biases.len());
        Self {
            weights,
            biases,
            grads: ParamGrads::zeros(nw, nb),
            grads_ready: false,
            sq_grad: ParamGrads::zeros(nw, nb),
            sq_delta: ParamGrads::zeros(nw, nb),
        }
    }

    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn glorot(n_weights: usize, n_biases: usize, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = (0..n_weights).map(|_| rng.gen_range(-limit..limit)).collect();
        Self::new(weights, vec![0.0; n_biases])
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads::zeros(self.weights.len(), self.biases.len())
    }

    pub fn grads(&self) -> &ParamGrads {
        &self.grads
    }

    pub fn set_gradients(&mut self, grads: ParamGrads) -> Result<()> {
        if grads.weights.len() != self.weights.len() || grads.biases.len() != self.biases.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient of {}+{} entries for {}+{} parameters",
                grads.weights.len(),
                grads.biases.len(),
                self.weights.len(),
                self.biases.len()
            )));
        }
        self.grads = grads;
        self.grads_ready = true;
        Ok(())
    }

    /// Accumulated squared gradients and squared updates.
    pub fn accumulators(&self) -> (&ParamGrads, &ParamGrads) {
        (&self.sq_grad, &self.sq_delta)
    }

    /// One AdaDelta update from the stored gradients, which are consumed.
    ///
    /// ```text
    /// E[g^2]  <- rho E[g^2] + (1 - rho) g^2
    /// delta   =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    /// E[dx^2] <- rho E[dx^2] + (1 - rho) delta^2
    /// x       <- x + delta
    /// ```
    pub fn adadelta_step(&mut self, opt: AdaDelta) -> Result<()> {
        if !self.grads_ready {
            return Err(Error::UninitializedGradient);
        }
        if !(opt.rho > 0.0 && opt.rho < 1.0) || !(opt.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "adadelta needs rho in (0, 1) and epsilon > 0, got {opt:?}"
            )));
        }
        let AdaDelta { rho, epsilon } = opt;
        let update = |x: &mut [f64], g: &[f64], eg: &mut [f64], ed: &mut [f64]| {
            for i in 0..x.len() {
                eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
                let delta = -((ed[i] + epsilon).sqrt() / (eg[i] + epsilon).sqrt()) * g[i];
                ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
                x[i] += delta;
            }
        };
        update(
            &mut self.weights,
            &self.grads.weights,
            &mut self.sq_grad.weights,
            &mut self.sq_delta.weights,
        );
        update(
            &mut self.biases,
            &self.grads.biases,
            &mut self.sq_grad.biases,
            &mut self.sq_delta.biases,
        );
        self.grads_ready = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> LayerParams {
        LayerParams::new(vec![x], vec![])
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = scalar(0.0);
        p.set_gradients(ParamGrads { weights: vec![1.0], biases: vec![] }).unwrap();
        p.adadelta_step(AdaDelta::default()).unwrap();
        let (eg, ed) = p.accumulators();
        assert!((eg.weights[0] + 1e-6 - 0.050001).abs() < 1e-15);
        let delta = -(1e-6f64).sqrt() / 0.050001f64.sqrt();
        assert!((p.weights[0] - delta).abs() < 1e-15);
        assert!((p.weights[0] + 0.004472).abs() < 1e-6);
        assert!((ed.weights[0] - 0.05 * delta * delta).abs() < 1e-20);
    }

    #[test]
    fn zero_gradient_decays_accumulator_only() {
        let mut p = scalar(0.3);
        p.set_gradients(ParamGrads { weights: vec![2.0], biases: vec![] }).unwrap();
        p.adadelta_step(AdaDelta::default()).unwrap();
        let before = p.weights[0];
        let eg = p.accumulators().0.weights[0];
        p.set_gradients(ParamGrads { weights: vec![0.0], biases: vec![] }).unwrap();
        p.adadelta_step(AdaDelta::default()).unwrap();
        assert_eq!(p.weights[0], before);
        assert!((p.accumulators().0.weights[0] - 0.95 * eg).abs() < 1e-18);
    }

    #[test]
    fn step_requires_gradient() {
        let mut p = scalar(1.0);
        assert!(matches!(p.adadelta_step(AdaDelta::default()), Err(Error::UninitializedGradient)));
        p.set_gradients(ParamGrads { weights: vec![1.0], biases: vec![] }).unwrap();
        p.adadelta_step(AdaDelta::default()).unwrap();
        assert!(matches!(p.adadelta_step(AdaDelta::default()), Err(Error::UninitializedGradient)));
        assert!(p.set_gradients(ParamGrads::zeros(2, 0)).is_err());
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut p = scalar(3.0);
        let mut last = p.weights[0].abs();
        for _ in 0..500 {
            let x = p.weights[0];
            p.set_gradients(ParamGrads { weights: vec![2.0 * x], biases: vec![] }).unwrap();
            p.adadelta_step(AdaDelta::default()).unwrap();
            let (eg, ed) = p.accumulators();
            assert!(eg.weights[0] >= 0.0 && ed.weights[0] >= 0.0);
            assert!(p.weights[0].abs() < last);
            last = p.weights[0].abs();
        }
        assert!(last < 3.0);
    }
}

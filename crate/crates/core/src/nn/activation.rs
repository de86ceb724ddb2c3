use super::{Dims, Layer, ParamGrads, Tensor3};
use crate::error::Result;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Relu;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Sigmoid;

impl Layer for Relu {
    fn output_dims(&self, input: Dims) -> Result<Dims> {
        Ok(input)
    }

    fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        Ok(input.map(relu))
    }

    fn backward(
        &self,
        input: &Tensor3,
        _output: &Tensor3,
        grad_out: &Tensor3,
        _grads: Option<&mut ParamGrads>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>> {
        grad_out.expect_dims(input.dims(), "relu upstream gradient")?;
        Ok(need_input_grad.then(|| {
            let data = input
                .data()
                .iter()
                .zip(grad_out.data())
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect();
            Tensor3::from_raw(input.dims(), data)
        }))
    }
}

impl Layer for Sigmoid {
    fn output_dims(&self, input: Dims) -> Result<Dims> {
        Ok(input)
    }

    fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        Ok(input.map(sigmoid))
    }

    fn backward(
        &self,
        input: &Tensor3,
        output: &Tensor3,
        grad_out: &Tensor3,
        _grads: Option<&mut ParamGrads>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>> {
        grad_out.expect_dims(input.dims(), "sigmoid upstream gradient")?;
        output.expect_dims(input.dims(), "sigmoid output")?;
        Ok(need_input_grad.then(|| {
            let data = output
                .data()
                .iter()
                .zip(grad_out.data())
                .map(|(&y, &g)| g * y * (1.0 - y))
                .collect();
            Tensor3::from_raw(input.dims(), data)
        }))
    }
}

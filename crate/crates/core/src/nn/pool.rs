use super::{Dims, Layer, ParamGrads, Tensor3};
use crate::error::{Error, Result};

/// Averages non-overlapping `1 x pool_width` windows along the width axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvgPool {
    pub pool_width: usize,
}

impl AvgPool {
    pub fn new(pool_width: usize) -> Result<Self> {
        if pool_width == 0 {
            return Err(Error::InvalidArgument("pool width must be positive".into()));
        }
        Ok(Self { pool_width })
    }
}

impl Layer for AvgPool {
    fn output_dims(&self, input: Dims) -> Result<Dims> {
        if input.width % self.pool_width != 0 {
            return Err(Error::WidthNotDivisible {
                width: input.width,
                pool: self.pool_width,
            });
        }
        Ok(Dims::new(input.height, input.width / self.pool_width, input.channels))
    }

    fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        let out_dims = self.output_dims(input.dims())?;
        let ch = out_dims.channels;
        let scale = 1.0 / self.pool_width as f64;
        let mut out = vec![0.0; out_dims.len()];
        for (pos, px) in out.chunks_exact_mut(ch).enumerate() {
            let (r, j) = (pos / out_dims.width, pos % out_dims.width);
            for c in j * self.pool_width..(j + 1) * self.pool_width {
                for (o, v) in px.iter_mut().zip(input.pixel(r, c)) {
                    *o += v;
                }
            }
            px.iter_mut().for_each(|o| *o *= scale);
        }
        Ok(Tensor3::from_raw(out_dims, out))
    }

    fn backward(
        &self,
        input: &Tensor3,
        _output: &Tensor3,
        grad_out: &Tensor3,
        _grads: Option<&mut ParamGrads>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>> {
        let dims = input.dims();
        grad_out.expect_dims(self.output_dims(dims)?, "pooling upstream gradient")?;
        if !need_input_grad {
            return Ok(None);
        }
        let scale = 1.0 / self.pool_width as f64;
        let mut grad_in = vec![0.0; dims.len()];
        for (pos, px) in grad_in.chunks_exact_mut(dims.channels).enumerate() {
            let (r, c) = (pos / dims.width, pos % dims.width);
            for (g, u) in px.iter_mut().zip(grad_out.pixel(r, c / self.pool_width)) {
                *g = u * scale;
            }
        }
        Ok(Some(Tensor3::from_raw(dims, grad_in)))
    }
}

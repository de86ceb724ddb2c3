use rand::Rng;

use super::{accumulate_gathered, accumulate_gathered_run, add_taps, axpy, Dims, Layer, LayerParams, ParamGrads, Tensor3};
use crate::error::{Error, Result};

/// Affine channel mixing applied identically at every spatial position.
/// Weights are laid out `[in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseDense {
    in_channels: usize,
    out_channels: usize,
    params: LayerParams,
}

impl PointwiseDense {
    pub fn new(in_channels: usize, out_channels: usize, params: LayerParams) -> Result<Self> {
        if params.weights.len() != in_channels * out_channels || params.biases.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "dense {in_channels}->{out_channels} needs {}+{out_channels} parameters, got {}+{}",
                in_channels * out_channels,
                params.weights.len(),
                params.biases.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            params,
        })
    }

    pub fn init(in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        let params = LayerParams::glorot(in_channels * out_channels, out_channels, in_channels, out_channels, rng);
        Self {
            in_channels,
            out_channels,
            params,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
}

impl Layer for PointwiseDense {
    fn output_dims(&self, input: Dims) -> Result<Dims> {
        if input.channels != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "dense layer expects {} channels, got {}",
                self.in_channels, input.channels
            )));
        }
        Ok(Dims::new(input.height, input.width, self.out_channels))
    }

    fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        let out_dims = self.output_dims(input.dims())?;
        let co = self.out_channels;
        let (w, b) = (&self.params.weights, &self.params.biases);
        let mut out = vec![0.0; out_dims.len()];
        let ci_n = self.in_channels;
        let x = input.data();
        let table: Vec<(usize, usize)> = (0..ci_n).map(|ci| (ci * co, ci)).collect();
        let mut quads = out.chunks_exact_mut(4 * co);
        for (p, px) in (&mut quads).enumerate() {
            accumulate_gathered_run::<4>(px, b, w, &table, x, 4 * p * ci_n, ci_n);
        }
        let rest = quads.into_remainder();
        let first = x.len() / ci_n - rest.len() / co;
        for (k, px) in rest.chunks_exact_mut(co).enumerate() {
            accumulate_gathered(px, b, w, &table, x, (first + k) * ci_n);
        }
        Ok(Tensor3::from_raw(out_dims, out))
    }

    fn backward(
        &self,
        input: &Tensor3,
        _output: &Tensor3,
        grad_out: &Tensor3,
        grads: Option<&mut ParamGrads>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>> {
        grad_out.expect_dims(self.output_dims(input.dims())?, "dense upstream gradient")?;
        let (ci_n, co) = (self.in_channels, self.out_channels);
        let w = &self.params.weights;
        let (x, g) = (input.data(), grad_out.data());
        let positions = x.len() / ci_n;
        let mut taps = Vec::with_capacity(positions.max(co));

        if let Some(pg) = grads {
            for px in g.chunks_exact(co) {
                axpy(&mut pg.biases, 1.0, px);
            }
            for ci in 0..ci_n {
                taps.clear();
                taps.extend((0..positions).map(|p| (p * co, x[p * ci_n + ci])).filter(|&(_, v)| v != 0.0));
                add_taps(&mut pg.weights[ci * co..(ci + 1) * co], g, &taps);
            }
        }

        let grad_in = need_input_grad.then(|| {
            // transposed weights, `[out][in]`
            let mut wt = vec![0.0; w.len()];
            for ci in 0..ci_n {
                for o in 0..co {
                    wt[o * ci_n + ci] = w[ci * co + o];
                }
            }
            let mut gi = vec![0.0; x.len()];
            for (px, gp) in gi.chunks_exact_mut(ci_n).zip(g.chunks_exact(co)) {
                taps.clear();
                taps.extend(gp.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(o, &v)| (o * ci_n, v)));
                add_taps(px, &wt, &taps);
            }
            gi
        });
        Ok(grad_in.map(|data| Tensor3::from_raw(input.dims(), data)))
    }

    fn params(&self) -> Option<&LayerParams> {
        Some(&self.params)
    }

    fn params_mut(&mut self) -> Option<&mut LayerParams> {
        Some(&mut self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_sum() {
        let layer = PointwiseDense::new(2, 1, LayerParams::new(vec![1.0, 1.0], vec![0.0])).unwrap();
        let input = Tensor3::new(Dims::new(1, 2, 2), vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        assert_eq!(layer.forward(&input).unwrap().data(), &[3.0, -2.5]);
    }

    #[test]
    fn matches_naive_matrix_product() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let (h, w, ci, co) = (rng.gen_range(1..4), rng.gen_range(1..6), rng.gen_range(1..40), rng.gen_range(1..40));
            let layer = PointwiseDense::init(ci, co, &mut rng);
            let data = (0..h * w * ci).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let input = Tensor3::new(Dims::new(h, w, ci), data).unwrap();
            let got = layer.forward(&input).unwrap();
            for (pos, x) in input.data().chunks_exact(ci).enumerate() {
                for o in 0..co {
                    let want: f64 = layer.params.biases[o] + (0..ci).map(|i| x[i] * layer.params.weights[i * co + o]).sum::<f64>();
                    let g = got.data()[pos * co + o];
                    assert!((g - want).abs() <= 1e-12 * (1.0 + want.abs()), "{g} vs {want}");
                }
            }
        }
    }

    #[test]
    fn identity_matrix() {
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let layer = PointwiseDense::new(3, 3, LayerParams::new(eye, vec![0.0; 3])).unwrap();
        let input = Tensor3::new(Dims::new(2, 1, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(layer.forward(&input).unwrap(), input);
    }

    #[test]
    fn shape_errors() {
        assert!(PointwiseDense::new(2, 2, LayerParams::new(vec![0.0; 3], vec![0.0; 2])).is_err());
        let layer = PointwiseDense::new(2, 1, LayerParams::new(vec![1.0, 1.0], vec![0.0])).unwrap();
        assert!(matches!(
            layer.forward(&Tensor3::zeros(Dims::new(1, 1, 3))),
            Err(Error::ShapeMismatch(_))
        ));
    }
}

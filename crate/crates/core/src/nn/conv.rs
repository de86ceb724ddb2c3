use rand::Rng;

use super::{
    accumulate_gathered, accumulate_gathered_run, accumulate_taps, add_taps, axpy, dot, relu, AvgPool, Dims, Layer, LayerParams, ParamGrads, Tensor3,
};
use crate::error::{Error, Result};

/// Stride-1 cross-correlation with zero "same" padding on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub filter_height: usize,
    pub filter_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    pub fn new(filter_height: usize, filter_width: usize, in_channels: usize, out_channels: usize) -> Result<Self> {
        if filter_width % 2 == 0 {
            return Err(Error::EvenFilterWidth(filter_width));
        }
        if filter_height == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::ShapeMismatch("convolution sizes must be positive".into()));
        }
        Ok(Self {
            filter_height,
            filter_width,
            in_channels,
            out_channels,
        })
    }

    pub fn weight_len(&self) -> usize {
        self.filter_height * self.filter_width * self.in_channels * self.out_channels
    }

    /// Leading padding; for even filter heights the extra row goes to the bottom.
    fn pad_top(&self) -> usize {
        (self.filter_height - 1) / 2
    }

    fn pad_left(&self) -> usize {
        (self.filter_width - 1) / 2
    }
}

/// Weights are laid out `[kh][kw][in][out]` so the output channel is the
/// contiguous inner index.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    spec: ConvSpec,
    params: LayerParams,
}

impl Conv2d {
    pub fn new(spec: ConvSpec, params: LayerParams) -> Result<Self> {
        if params.weights.len() != spec.weight_len() || params.biases.len() != spec.out_channels {
            return Err(Error::ShapeMismatch(format!(
                "convolution {spec:?} needs {}+{} parameters, got {}+{}",
                spec.weight_len(),
                spec.out_channels,
                params.weights.len(),
                params.biases.len()
            )));
        }
        Ok(Self { spec, params })
    }

    pub fn init(spec: ConvSpec, rng: &mut impl Rng) -> Self {
        let area = spec.filter_height * spec.filter_width;
        let params = LayerParams::glorot(
            spec.weight_len(),
            spec.out_channels,
            area * spec.in_channels,
            area * spec.out_channels,
            rng,
        );
        Self { spec, params }
    }

    pub fn spec(&self) -> ConvSpec {
        self.spec
    }

    #[inline]
    fn weight_offset(&self, kh: usize, kw: usize, ci: usize) -> usize {
        ((kh * self.spec.filter_width + kw) * self.spec.in_channels + ci) * self.spec.out_channels
    }

    /// Computes every output pixel in row-major order and hands it to `sink`.
    fn for_each_pixel(&self, input: &Tensor3, mut sink: impl FnMut(usize, usize, &[f64])) -> Result<()> {
        self.check_input(input)?;
        let dims = input.dims();
        let (co, ci_n) = (self.spec.out_channels, self.spec.in_channels);
        let (w, b) = (&self.params.weights, &self.params.biases);
        let x = input.data();
        let mut scratch = vec![0.0; co];
        let mut run = vec![0.0; 4 * co];
        let (pt, pl) = (self.spec.pad_top(), self.spec.pad_left());
        let row_len = dims.width * ci_n;
        let live_rows: Vec<bool> = x.chunks_exact(row_len).map(|row| row.iter().any(|&v| v != 0.0)).collect();
        // columns whose window lies fully inside the input share one tap table
        // per row; `(weight offset, input index at column pl)`
        let interior = pl..(dims.width + pl + 1).saturating_sub(self.spec.filter_width).max(pl);
        let mut table: Vec<(usize, usize)> = Vec::new();
        let mut taps: Vec<(usize, f64)> = Vec::new();
        for r in 0..dims.height {
            let rows = Self::tap_range(r, pt, self.spec.filter_height, dims.height);
            let live = || rows.clone().filter(|&kh| live_rows[r + kh - pt]);
            table.clear();
            for kh in live() {
                let ir = r + kh - pt;
                for kw in 0..self.spec.filter_width {
                    for ci in 0..ci_n {
                        table.push((self.weight_offset(kh, kw, ci), (ir * dims.width + kw) * ci_n + ci));
                    }
                }
            }
            let mut c = 0;
            while c < dims.width {
                if interior.contains(&c) && interior.contains(&(c + 3)) {
                    accumulate_gathered_run::<4>(&mut run[..4 * co], b, w, &table, x, (c - pl) * ci_n, ci_n);
                    for (k, px) in run[..4 * co].chunks_exact(co).enumerate() {
                        sink(r, c + k, px);
                    }
                    c += 4;
                    continue;
                }
                if interior.contains(&c) && interior.contains(&(c + 1)) {
                    accumulate_gathered_run::<2>(&mut run[..2 * co], b, w, &table, x, (c - pl) * ci_n, ci_n);
                    sink(r, c, &run[..co]);
                    sink(r, c + 1, &run[co..2 * co]);
                    c += 2;
                    continue;
                }
                let px = &mut scratch[..];
                if interior.contains(&c) {
                    accumulate_gathered(px, b, w, &table, x, (c - pl) * ci_n);
                    sink(r, c, px);
                    c += 1;
                    continue;
                }
                let cols = Self::tap_range(c, pl, self.spec.filter_width, dims.width);
                taps.clear();
                for kh in live() {
                    let ir = r + kh - pt;
                    for kw in cols.clone() {
                        let base = (ir * dims.width + c + kw - pl) * ci_n;
                        for ci in 0..ci_n {
                            taps.push((self.weight_offset(kh, kw, ci), x[base + ci]));
                        }
                    }
                }
                accumulate_taps(px, b, w, &taps);
                sink(r, c, px);
                c += 1;
            }
        }
        Ok(())
    }

    /// Convolution, ReLU and width pooling in one pass, without materializing
    /// the full-width activation. Matches the three layers applied in turn.
    pub fn forward_relu_pool(&self, input: &Tensor3, pool: &AvgPool) -> Result<Tensor3> {
        let conv_dims = self.output_dims(input.dims())?;
        let out_dims = pool.output_dims(conv_dims)?;
        let (co, pw) = (self.spec.out_channels, pool.pool_width);
        let scale = 1.0 / pw as f64;
        let mut out = vec![0.0; out_dims.len()];
        self.for_each_pixel(input, |r, c, px| {
            let o = &mut out[(r * out_dims.width + c / pw) * co..][..co];
            for (o, &v) in o.iter_mut().zip(px) {
                *o += relu(v);
            }
            if c % pw == pw - 1 {
                o.iter_mut().for_each(|v| *v *= scale);
            }
        })?;
        Ok(Tensor3::from_raw(out_dims, out))
    }

    /// Kernel indices that land inside the input for output position `out`.
    #[inline]
    fn tap_range(out: usize, pad: usize, kernel: usize, len: usize) -> std::ops::Range<usize> {
        pad.saturating_sub(out)..kernel.min(len + pad - out)
    }

    /// Output positions reached by kernel index `k`.
    #[inline]
    fn reach_range(k: usize, pad: usize, len: usize) -> std::ops::Range<usize> {
        pad.saturating_sub(k)..(len + pad).saturating_sub(k).min(len)
    }

    fn check_input(&self, input: &Tensor3) -> Result<()> {
        if input.dims().channels != self.spec.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "convolution expects {} input channels, got {}",
                self.spec.in_channels,
                input.dims().channels
            )));
        }
        Ok(())
    }
}

impl Layer for Conv2d {
    fn output_dims(&self, input: Dims) -> Result<Dims> {
        if input.channels != self.spec.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "convolution expects {} input channels, got {}",
                self.spec.in_channels, input.channels
            )));
        }
        Ok(Dims::new(input.height, input.width, self.spec.out_channels))
    }

    fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        let out_dims = self.output_dims(input.dims())?;
        let co = self.spec.out_channels;
        let mut out = vec![0.0; out_dims.len()];
        self.for_each_pixel(input, |r, c, px| {
            out[(r * out_dims.width + c) * co..][..co].copy_from_slice(px);
        })?;
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
        self.check_input(input)?;
        let dims = input.dims();
        grad_out.expect_dims(self.output_dims(dims)?, "convolution upstream gradient")?;
        let (co, ci_n) = (self.spec.out_channels, self.spec.in_channels);
        let w = &self.params.weights;
        let x = input.data();
        let g = grad_out.data();

        if let Some(pg) = grads {
            for px in g.chunks_exact(co) {
                axpy(&mut pg.biases, 1.0, px);
            }
            // one pass per kernel tap over every output pixel it reaches
            let mut taps = Vec::with_capacity(dims.height * dims.width);
            for kh in 0..self.spec.filter_height {
                let rows = Self::reach_range(kh, self.spec.pad_top(), dims.height);
                for kw in 0..self.spec.filter_width {
                    let cols = Self::reach_range(kw, self.spec.pad_left(), dims.width);
                    for ci in 0..ci_n {
                        taps.clear();
                        for r in rows.clone() {
                            let ir = r + kh - self.spec.pad_top();
                            for c in cols.clone() {
                                let ic = c + kw - self.spec.pad_left();
                                let xv = x[(ir * dims.width + ic) * ci_n + ci];
                                if xv != 0.0 {
                                    taps.push(((r * dims.width + c) * co, xv));
                                }
                            }
                        }
                        let off = self.weight_offset(kh, kw, ci);
                        add_taps(&mut pg.weights[off..off + co], g, &taps);
                    }
                }
            }
        }

        let grad_in = need_input_grad.then(|| {
            let mut gi = vec![0.0; dims.len()];
            for r in 0..dims.height {
                let rows = Self::tap_range(r, self.spec.pad_top(), self.spec.filter_height, dims.height);
                for c in 0..dims.width {
                    let cols = Self::tap_range(c, self.spec.pad_left(), self.spec.filter_width, dims.width);
                    let gp = &g[(r * dims.width + c) * co..][..co];
                    for kh in rows.clone() {
                        let ir = r + kh - self.spec.pad_top();
                        for kw in cols.clone() {
                            let ic = c + kw - self.spec.pad_left();
                            let base = (ir * dims.width + ic) * ci_n;
                            for ci in 0..ci_n {
                                gi[base + ci] += dot(&w[self.weight_offset(kh, kw, ci)..][..co], gp);
                            }
                        }
                    }
                }
            }
            gi
        });
        Ok(grad_in.map(|data| Tensor3::from_raw(dims, data)))
    }

    fn params(&self) -> Option<&LayerParams> {
        Some(&self.params)
    }

    fn params_mut(&mut self) -> Option<&mut LayerParams> {
        Some(&mut self.params)
    }
}

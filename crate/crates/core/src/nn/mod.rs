//! A small deterministic CPU engine with exactly the pieces the surrogate
//! needs: same-padded convolution, width pooling, position-wise dense
//! layers, ReLU/sigmoid, binary cross-entropy and AdaDelta.

mod activation;
mod conv;
mod dense;
mod gradcheck;
mod loss;
mod params;
mod pool;
mod tensor;

pub use activation::{relu, sigmoid, Relu, Sigmoid};
pub use conv::{Conv2d, ConvSpec};
pub use dense::PointwiseDense;
pub use gradcheck::{finite_diff_gradcheck, gradcheck_bce, GradCheckReport, GRADCHECK_STEP};
pub use loss::{bce_loss, BCE_CLAMP};
pub use params::{AdaDelta, LayerParams, ParamGrads};
pub use pool::AvgPool;
pub use tensor::{Dims, Tensor3};

use crate::error::{Error, Result};

/// `a * b + c`, fused when the target has FMA.
#[inline(always)]
pub(crate) fn madd(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(target_feature = "fma")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(target_feature = "fma"))]
    {
        a * b + c
    }
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    let n = y.len().min(x.len());
    let (y, x) = (&mut y[..n], &x[..n]);
    let mut yc = y.chunks_exact_mut(8);
    let mut xc = x.chunks_exact(8);
    for (yb, xb) in (&mut yc).zip(&mut xc) {
        for i in 0..8 {
            yb[i] = madd(a, xb[i], yb[i]);
        }
    }
    for (yv, xv) in yc.into_remainder().iter_mut().zip(xc.remainder()) {
        *yv = madd(a, *xv, *yv);
    }
}

/// Writes `bias + sum(x * w[off..])` into `px` for every `(off, x)` tap.
pub(crate) fn accumulate_taps(px: &mut [f64], bias: &[f64], w: &[f64], taps: &[(usize, f64)]) {
    px.copy_from_slice(&bias[..px.len()]);
    add_taps(px, w, taps);
}

/// `px += sum(x * w[off..])` over `(off, x)` taps.
pub(crate) fn add_taps(px: &mut [f64], w: &[f64], taps: &[(usize, f64)]) {
    add_blocked(px, w, taps, |&(off, x)| (off, x));
}

/// Like [`accumulate_taps`] with tap values read from `x[index + shift]`.
pub(crate) fn accumulate_gathered(
    px: &mut [f64],
    bias: &[f64],
    w: &[f64],
    taps: &[(usize, usize)],
    x: &[f64],
    shift: usize,
) {
    px.copy_from_slice(&bias[..px.len()]);
    add_blocked(px, w, taps, |&(off, i)| (off, x[i + shift]));
}

/// [`accumulate_gathered`] for `P` pixels that share a tap table and whose
/// inputs sit `stride` apart. `px` holds the outputs back to back; each
/// weight load feeds all `P`.
pub(crate) fn accumulate_gathered_run<const P: usize>(
    px: &mut [f64],
    bias: &[f64],
    w: &[f64],
    taps: &[(usize, usize)],
    x: &[f64],
    shift: usize,
    stride: usize,
) {
    #[inline(always)]
    fn block<const P: usize, const B: usize>(
        px: &mut [f64],
        bias: &[f64],
        w: &[f64],
        taps: &[(usize, usize)],
        xs: &[&[f64]; P],
        at: usize,
    ) {
        let n = px.len() / P;
        let mut acc = [[0.0; B]; P];
        for a in &mut acc {
            a.copy_from_slice(&bias[at..at + B]);
        }
        for &(off, i) in taps {
            let wb: &[f64; B] = w[off + at..off + at + B].try_into().unwrap();
            for p in 0..P {
                let v = xs[p][i];
                for k in 0..B {
                    acc[p][k] = madd(v, wb[k], acc[p][k]);
                }
            }
        }
        for (p, a) in acc.iter().enumerate() {
            px[p * n + at..p * n + at + B].copy_from_slice(a);
        }
    }
    let n = px.len() / P;
    let xs: [&[f64]; P] = std::array::from_fn(|p| &x[shift + p * stride..]);
    let mut at = 0;
    while at + 16 <= n {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        wide::block16(px, bias, w, taps, &xs, at);
        #[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
        block::<P, 16>(px, bias, w, taps, &xs, at);
        at += 16;
    }
    while at + 4 <= n {
        block::<P, 4>(px, bias, w, taps, &xs, at);
        at += 4;
    }
    for o in at..n {
        for p in 0..P {
            px[p * n + o] = taps.iter().fold(bias[o], |a, &(off, i)| madd(xs[p][i], w[off + o], a));
        }
    }
}

// LLVM keeps auto-vectorized code at 256 bits on these cores; the run
// kernel is FMA-bound and gains from full-width registers.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
mod wide {
    use std::arch::x86_64::{__m512d, _mm512_fmadd_pd, _mm512_loadu_pd, _mm512_set1_pd, _mm512_storeu_pd};

    #[inline(always)]
    pub(super) fn block16<const P: usize>(
        px: &mut [f64],
        bias: &[f64],
        w: &[f64],
        taps: &[(usize, usize)],
        xs: &[&[f64]; P],
        at: usize,
    ) {
        let n = px.len() / P;
        let bias = &bias[at..at + 16];
        // SAFETY: every pointer below comes from a slice of at least 16 elements.
        unsafe {
            let b: [__m512d; 2] = [_mm512_loadu_pd(bias.as_ptr()), _mm512_loadu_pd(bias.as_ptr().add(8))];
            let mut acc = [b; P];
            for &(off, i) in taps {
                let wb = w[off + at..off + at + 16].as_ptr();
                let (w0, w1) = (_mm512_loadu_pd(wb), _mm512_loadu_pd(wb.add(8)));
                for p in 0..P {
                    let v = _mm512_set1_pd(xs[p][i]);
                    acc[p][0] = _mm512_fmadd_pd(v, w0, acc[p][0]);
                    acc[p][1] = _mm512_fmadd_pd(v, w1, acc[p][1]);
                }
            }
            for (p, a) in acc.iter().enumerate() {
                let out = px[p * n + at..p * n + at + 16].as_mut_ptr();
                _mm512_storeu_pd(out, a[0]);
                _mm512_storeu_pd(out.add(8), a[1]);
            }
        }
    }
}

/// Wide channel blocks keep the partial sums in registers across taps.
#[inline(always)]
fn add_blocked<T>(px: &mut [f64], w: &[f64], taps: &[T], tap: impl Fn(&T) -> (usize, f64) + Copy) {
    #[inline(always)]
    fn block<const B: usize, T>(px: &mut [f64], w: &[f64], taps: &[T], tap: impl Fn(&T) -> (usize, f64), at: usize) {
        let mut acc = [0.0; B];
        acc.copy_from_slice(&px[at..at + B]);
        for t in taps {
            let (off, x) = tap(t);
            let wb = &w[off + at..off + at + B];
            for i in 0..B {
                acc[i] = madd(x, wb[i], acc[i]);
            }
        }
        px[at..at + B].copy_from_slice(&acc);
    }
    let n = px.len();
    let mut at = 0;
    while at + 32 <= n {
        block::<32, T>(px, w, taps, tap, at);
        at += 32;
    }
    while at + 8 <= n {
        block::<8, T>(px, w, taps, tap, at);
        at += 8;
    }
    for o in at..n {
        px[o] = taps.iter().map(tap).fold(px[o], |a, (off, x)| madd(x, w[off + o], a));
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub trait Layer {
    fn output_dims(&self, input: Dims) -> Result<Dims>;

    fn forward(&self, input: &Tensor3) -> Result<Tensor3>;

    /// Adds parameter gradients into `grads` (when given) and returns the
    /// gradient with respect to `input` when `need_input_grad` is set.
    /// `output` must be the value `forward(input)` produced.
    fn backward(
        &self,
        input: &Tensor3,
        output: &Tensor3,
        grad_out: &Tensor3,
        grads: Option<&mut ParamGrads>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>>;

    fn params(&self) -> Option<&LayerParams> {
        None
    }

    fn params_mut(&mut self) -> Option<&mut LayerParams> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyLayer {
    Conv(Conv2d),
    Pool(AvgPool),
    Dense(PointwiseDense),
    Relu(Relu),
    Sigmoid(Sigmoid),
}

impl AnyLayer {
    fn inner(&self) -> &dyn Layer {
        match self {
            AnyLayer::Conv(l) => l,
            AnyLayer::Pool(l) => l,
            AnyLayer::Dense(l) => l,
            AnyLayer::Relu(l) => l,
            AnyLayer::Sigmoid(l) => l,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Layer {
        match self {
            AnyLayer::Conv(l) => l,
            AnyLayer::Pool(l) => l,
            AnyLayer::Dense(l) => l,
            AnyLayer::Relu(l) => l,
            AnyLayer::Sigmoid(l) => l,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyLayer::Conv(_) => "conv2d",
            AnyLayer::Pool(_) => "avg_pool",
            AnyLayer::Dense(_) => "dense",
            AnyLayer::Relu(_) => "relu",
            AnyLayer::Sigmoid(_) => "sigmoid",
        }
    }
}

impl Layer for AnyLayer {
    fn output_dims(&self, input: Dims) -> Result<Dims> {
        self.inner().output_dims(input)
    }

    fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        self.inner().forward(input)
    }

    fn backward(
        &self,
        input: &Tensor3,
        output: &Tensor3,
        grad_out: &Tensor3,
        grads: Option<&mut ParamGrads>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>> {
        self.inner().backward(input, output, grad_out, grads, need_input_grad)
    }

    fn params(&self) -> Option<&LayerParams> {
        self.inner().params()
    }

    fn params_mut(&mut self) -> Option<&mut LayerParams> {
        self.inner_mut().params_mut()
    }
}

/// Activations recorded by [`Sequential::forward_trace`]: the input followed
/// by the output of every layer.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Tensor3>,
}

impl Trace {
    pub fn output(&self) -> &Tensor3 {
        self.activations.last().expect("trace holds at least the input")
    }

    pub fn activations(&self) -> &[Tensor3] {
        &self.activations
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    layers: Vec<AnyLayer>,
}

impl Sequential {
    pub fn new(layers: Vec<AnyLayer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[AnyLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AnyLayer] {
        &mut self.layers
    }

    /// Output dims of every layer for the given input dims.
    pub fn shape_chain(&self, input: Dims) -> Result<Vec<Dims>> {
        let mut dims = input;
        self.layers
            .iter()
            .map(|l| {
                dims = l.output_dims(dims)?;
                Ok(dims)
            })
            .collect()
    }

    /// Inference pass. Activations are applied in place and a
    /// conv, relu, pool run is fused; the result equals the traced output.
    pub fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        let mut x = input.clone();
        let mut i = 0;
        while i < self.layers.len() {
            match &self.layers[i..] {
                [AnyLayer::Conv(conv), AnyLayer::Relu(_), AnyLayer::Pool(pool), ..] => {
                    x = conv.forward_relu_pool(&x, pool)?;
                    i += 3;
                    continue;
                }
                [AnyLayer::Relu(_), ..] => x.data_mut().iter_mut().for_each(|v| *v = relu(*v)),
                [AnyLayer::Sigmoid(_), ..] => x.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
                [layer, ..] => x = layer.forward(&x)?,
                [] => unreachable!(),
            }
            i += 1;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: Tensor3) -> Result<Trace> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Empty gradient buffers, one per layer.
    pub fn zero_grads(&self) -> Vec<ParamGrads> {
        self.layers
            .iter()
            .map(|l| l.params().map_or_else(|| ParamGrads::zeros(0, 0), LayerParams::zero_grads))
            .collect()
    }

    /// Back-propagates `grad_out` through a recorded trace, accumulating into
    /// `grads`. The gradient with respect to the network input is not formed.
    pub fn backward(&self, trace: &Trace, grad_out: &Tensor3, grads: &mut [ParamGrads]) -> Result<()> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::MissingForwardCache);
        }
        if grads.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient buffers for {} layers",
                grads.len(),
                self.layers.len()
            )));
        }
        let mut upstream = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let has_params = layer.params().is_some();
            let g = layer.backward(
                &trace.activations[i],
                &trace.activations[i + 1],
                &upstream,
                has_params.then_some(&mut grads[i]),
                i > 0,
            )?;
            match g {
                Some(g) => upstream = g,
                None => break,
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().filter_map(|l| l.params()).map(LayerParams::len).sum()
    }
}

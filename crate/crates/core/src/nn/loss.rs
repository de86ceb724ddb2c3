use super::Tensor3;
use crate::error::{Error, Result};

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over all elements, with the gradient of that
/// mean with respect to `pred`.
pub fn bce_loss(pred: &Tensor3, target: &Tensor3) -> Result<(f64, Tensor3)> {
    target.expect_dims(pred.dims(), "bce target")?;
    if let Some(y) = target.data().iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::InvalidArgument(format!("bce target {y} outside [0, 1]")));
    }
    let n = pred.data().len() as f64;
    let mut total = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p_raw, &y)| {
            let p = p_raw.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            if p == p_raw {
                ((1.0 - y) / (1.0 - p) - y / p) / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((total / n, Tensor3::from_raw(pred.dims(), grad)))
}

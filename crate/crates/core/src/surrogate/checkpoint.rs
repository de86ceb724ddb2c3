//! Binary checkpoint layout (all integers u32 LE, all reals f64 LE):
//!
//! ```text
//! magic "scenred-dcnn-v1\n"
//! horizon, size, reduced, filter_width
//! v_min, v_max
//! seed (u64 LE)
//! tag length, canonicalization tag bytes
//! parameter layer count, then per layer: n_weights, n_biases, weights, biases
//! SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::model::{build_model, DcnnModel, ModelDims, CANONICAL_TAG};
use crate::error::{Error, Result};
use crate::nn::Layer;
use crate::scenario::NormalizationParams;

pub const CHECKPOINT_MAGIC: &[u8; 16] = b"scenred-dcnn-v1\n";
const DIGEST_LEN: usize = 32;

pub fn to_bytes(model: &DcnnModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let dims = model.dims();
    for v in [dims.horizon, dims.size, dims.reduced, dims.filter_width] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let norm = model.normalization();
    out.extend_from_slice(&norm.v_min.to_le_bytes());
    out.extend_from_slice(&norm.v_max.to_le_bytes());
    out.extend_from_slice(&model.seed().to_le_bytes());
    out.extend_from_slice(&(CANONICAL_TAG.len() as u32).to_le_bytes());
    out.extend_from_slice(CANONICAL_TAG.as_bytes());

    let params: Vec<_> = model.net().layers().iter().filter_map(|l| l.params()).collect();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.weights.len() as u32).to_le_bytes());
        out.extend_from_slice(&(p.biases.len() as u32).to_le_bytes());
        for v in p.weights.iter().chain(&p.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(Error::DimensionMismatch("checkpoint payload ends early".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<DcnnModel> {
    let prefix = &bytes[..bytes.len().min(CHECKPOINT_MAGIC.len())];
    if prefix.len() == CHECKPOINT_MAGIC.len() && prefix != CHECKPOINT_MAGIC {
        return Err(Error::FormatVersionMismatch {
            found: String::from_utf8_lossy(prefix).trim_end().to_string(),
        });
    }
    if bytes.len() < CHECKPOINT_MAGIC.len() + DIGEST_LEN {
        return Err(Error::ChecksumMismatch);
    }
    let (payload, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(Error::ChecksumMismatch);
    }

    let mut r = Reader {
        bytes: &payload[CHECKPOINT_MAGIC.len()..],
    };
    let dims = ModelDims::new(r.u32()?, r.u32()?, r.u32()?, r.u32()?)?;
    let normalization = NormalizationParams::new(r.f64()?, r.f64()?)?;
    let seed = r.u64()?;
    let tag_len = r.u32()?;
    let tag = r.take(tag_len)?;
    if tag != CANONICAL_TAG.as_bytes() {
        return Err(Error::FormatVersionMismatch {
            found: format!("canonical order {:?}", String::from_utf8_lossy(tag)),
        });
    }

    let mut model = build_model(dims, seed)?;
    model.set_normalization(normalization);
    let n_layers = r.u32()?;
    let mut layers = model.net_mut().layers_mut().iter_mut().filter_map(|l| l.params_mut());
    for i in 0..n_layers {
        let params = layers
            .next()
            .ok_or_else(|| Error::DimensionMismatch(format!("checkpoint has extra layer {i}")))?;
        let (nw, nb) = (r.u32()?, r.u32()?);
        if nw != params.weights.len() || nb != params.biases.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer {i}: checkpoint holds {nw}+{nb} parameters, model needs {}+{}",
                params.weights.len(),
                params.biases.len()
            )));
        }
        params.weights = r.f64s(nw)?;
        params.biases = r.f64s(nb)?;
    }
    if layers.next().is_some() || !r.bytes.is_empty() {
        return Err(Error::DimensionMismatch("checkpoint layer count does not match the model".into()));
    }
    Ok(model)
}

pub fn save_model(model: &DcnnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DcnnModel> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dims, Tensor3};
    use crate::surrogate::forward_reduce;
    use crate::solar::{gen_synthetic, SolarGenConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> DcnnModel {
        let mut m = build_model(ModelDims::new(6, 8, 4, 3).unwrap(), 17).unwrap();
        m.set_normalization(NormalizationParams::new(0.0, 4.6).unwrap());
        m
    }

    #[test]
    fn roundtrip_reproduces_outputs() {
        let m = model();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dims = Dims::new(7, 8, 1);
        let x = Tensor3::new(dims, (0..dims.len()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        assert_eq!(back.forward_tensor(&x).unwrap(), m.forward_tensor(&x).unwrap());

        let cfg = SolarGenConfig {
            horizon: 6,
            sunrise: 1,
            sunset: 5,
            ..SolarGenConfig::default()
        };
        let set = gen_synthetic(&cfg, 8).unwrap();
        assert_eq!(forward_reduce(&back, &set).unwrap().0, forward_reduce(&m, &set).unwrap().0);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&model(), &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model());
        assert!(matches!(load_model(dir.path().join("missing.bin")), Err(Error::Io(_))));
    }

    #[test]
    fn truncated_file() {
        let bytes = to_bytes(&model());
        for cut in [bytes.len() - 1, bytes.len() / 2, 20, 3] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::ChecksumMismatch)), "cut {cut}");
        }
    }

    #[test]
    fn flipped_byte() {
        let mut bytes = to_bytes(&model());
        bytes[100] ^= 1;
        assert!(matches!(from_bytes(&bytes), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = to_bytes(&model());
        bytes[14] = b'2';
        match from_bytes(&bytes) {
            Err(Error::FormatVersionMismatch { found }) => assert_eq!(found, "scenred-dcnn-v2"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

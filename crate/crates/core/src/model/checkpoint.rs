//! Binary checkpoint format.
//!
//! Header (little-endian): magic `LENN`, `u32` version, `u64` d, `u64` layer
//! count n, n × `u64` layer widths, n × `u8` activation tags (0 ReLU,
//! 1 Sigmoid), `u64` N_e, `u64` N_r. Payload: `f64` values, row-major, in the
//! order entity embeddings, then weights and bias of each hidden layer, then
//! relation outputs.

use std::fs;
use std::path::Path;

use super::{Activation, Dense, ModelParameters};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LENN";
pub const VERSION: u32 = 1;

pub fn write_checkpoint(params: &ModelParameters) -> Result<Vec<u8>> {
    params.validate()?;
    let mut out = Vec::with_capacity(64 + 8 * params.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.dim as u64).to_le_bytes());
    out.extend_from_slice(&(params.layers.len() as u64).to_le_bytes());
    for layer in &params.layers {
        out.extend_from_slice(&(layer.outputs as u64).to_le_bytes());
    }
    for act in &params.activations {
        out.push(act.tag());
    }
    out.extend_from_slice(&(params.num_entities as u64).to_le_bytes());
    out.extend_from_slice(&(params.num_relations as u64).to_le_bytes());
    for tensor in params.tensors() {
        for v in tensor {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(params: &ModelParameters, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_checkpoint(params)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParameters> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(Error::Format(format!(
                "truncated {what}: missing {} bytes",
                n - remaining
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let b = self.take(8, what)?;
        let v = u64::from_le_bytes(b.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} too large")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParameters> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header")? != MAGIC {
        return Err(Error::Format("bad magic, not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.take(4, "header")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version} (expected {VERSION})")));
    }
    let dim = r.u64("header")?;
    let n_layers = r.u64("header")?;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let widths = (0..n_layers).map(|_| r.u64("header")).collect::<Result<Vec<_>>>()?;
    let activations = r
        .take(n_layers, "header")?
        .iter()
        .map(|&t| Activation::from_tag(t).ok_or_else(|| Error::Format(format!("unknown activation tag {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let num_entities = r.u64("header")?;
    let num_relations = r.u64("header")?;

    let mut expected = num_entities
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("entity matrix size overflows".into()))?;
    let mut width = 2 * dim;
    for &w in &widths {
        expected += width * w + w;
        width = w;
    }
    expected += num_relations * width;
    let payload = r.take(expected * 8, "payload")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after payload", bytes.len() - r.pos)));
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut next = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let entity_embeddings = next(num_entities * dim);
    let mut layers = Vec::with_capacity(n_layers);
    let mut width = 2 * dim;
    for &w in &widths {
        let weights = next(width * w);
        let bias = next(w);
        layers.push(Dense {
            inputs: width,
            outputs: w,
            weights,
            bias,
        });
        width = w;
    }
    let relation_outputs = next(num_relations * width);
    let params = ModelParameters {
        dim,
        num_entities,
        num_relations,
        entity_embeddings,
        layers,
        activations,
        relation_outputs,
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActivationPlan, Architecture};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ModelParameters {
        let arch = Architecture {
            embedding_dim: 4,
            hidden: vec![6, 3],
            activation: ActivationPlan::SigmoidFinalRelu,
        };
        ModelParameters::init(&arch, 5, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lenn");
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p.activations, q.activations);
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(write_checkpoint(&q).unwrap(), std::fs::read(&path).unwrap());
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = write_checkpoint(&params()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&bytes), Err(Error::Format(m)) if m.contains("magic")));
    }

    #[test]
    fn bad_version_rejected() {
        let mut bytes = write_checkpoint(&params()).unwrap();
        bytes[4] = 9;
        assert!(matches!(read_checkpoint(&bytes), Err(Error::Format(m)) if m.contains("version")));
    }

    #[test]
    fn truncation_names_missing_bytes() {
        let bytes = write_checkpoint(&params()).unwrap();
        let cut = &bytes[..bytes.len() - 20];
        match read_checkpoint(cut) {
            Err(Error::Format(m)) => assert!(m.contains("missing 20 bytes"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_layout() {
        let bytes = write_checkpoint(&params()).unwrap();
        assert_eq!(&bytes[..4], b"LENN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(&bytes[40..42], &[1, 0]);
        assert_eq!(bytes.len(), 42 + 16 + 8 * params().parameter_count());
    }
}

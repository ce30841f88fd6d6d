//! Binary model file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic  "ICNN"
//! u32    version (1)
//! u8     tokenizer mode (0 word, 1 char)
//! u32    vocab size, emb dim, feat dim, max kernel, num classes
//! str    label names (num classes), then vocabulary tokens (vocab size),
//!        each a u32 byte length followed by UTF-8
//! f32    embeddings; for each width 2..=max kernel: weights, bias;
//!        linear weights; linear bias (all row-major)
//! ```

use std::path::Path;

use crate::corpus::{TokenizerMode, Vocabulary};
use crate::error::{IcnnError, Result};
use crate::model::{ConvKernel, ModelConfig, ModelParams, DEFAULT_EPSILON};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 4] = b"ICNN";
pub const VERSION: u32 = 1;

pub fn encode_model(params: &ModelParams<f32>) -> Vec<u8> {
    let cfg = &params.config;
    let mut out = Vec::with_capacity(16 + params.num_parameters() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(params.vocab.mode().tag());
    for n in [
        params.vocab.len(),
        cfg.emb_dim,
        cfg.feat_dim,
        cfg.max_kernel,
        params.labels.len(),
    ] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for s in params.labels.iter().chain(params.vocab.tokens()) {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    for tensor in params.tensors() {
        for v in tensor {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_model(params: &ModelParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(params)).map_err(|e| IcnnError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| IcnnError::io(path, e))?;
    decode_model(&bytes)
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(IcnnError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| IcnnError::ShapeInconsistency("string is not valid UTF-8".into()))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| IcnnError::ShapeInconsistency("array size overflows".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix<f32>> {
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| IcnnError::ShapeInconsistency("array size overflows".into()))?;
        Matrix::from_vec(rows, cols, self.f32s(count)?)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let mut cur = Cursor { buf: bytes };
    if cur.take(4).map_err(|_| IcnnError::BadMagic)? != MAGIC {
        return Err(IcnnError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(IcnnError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let mode = TokenizerMode::from_tag(cur.u8()?)
        .ok_or_else(|| IcnnError::ShapeInconsistency("unknown tokenizer mode".into()))?;
    let vocab_size = cur.u32()? as usize;
    let emb_dim = cur.u32()? as usize;
    let feat_dim = cur.u32()? as usize;
    let max_kernel = cur.u32()? as usize;
    let num_classes = cur.u32()? as usize;

    let config = ModelConfig {
        emb_dim,
        feat_dim,
        max_kernel,
        num_classes,
        epsilon: DEFAULT_EPSILON,
        seed: 0,
    };
    config
        .validate()
        .map_err(|e| IcnnError::ShapeInconsistency(e.to_string()))?;
    if vocab_size < 2 {
        return Err(IcnnError::ShapeInconsistency(
            "vocabulary smaller than the reserved ids".into(),
        ));
    }
    // Every string needs at least its 4-byte length prefix.
    if (num_classes + vocab_size).saturating_mul(4) > cur.buf.len() {
        return Err(IcnnError::Truncated);
    }

    let labels = (0..num_classes).map(|_| cur.string()).collect::<Result<Vec<_>>>()?;
    let tokens = (0..vocab_size).map(|_| cur.string()).collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::from_tokens(mode, tokens)?;

    let embeddings = cur.matrix(vocab_size, emb_dim)?;
    let mut kernels = Vec::with_capacity(max_kernel - 1);
    for width in 2..=max_kernel {
        let weights = cur.matrix(width * emb_dim, feat_dim)?;
        let bias = cur.f32s(feat_dim)?;
        kernels.push(ConvKernel { width, weights, bias });
    }
    let linear = cur.matrix(feat_dim, num_classes)?;
    let linear_bias = cur.f32s(num_classes)?;
    if !cur.buf.is_empty() {
        return Err(IcnnError::ShapeInconsistency(format!(
            "{} trailing bytes after the last array",
            cur.buf.len()
        )));
    }

    Ok(ModelParams {
        config,
        vocab,
        labels,
        embeddings,
        kernels,
        linear,
        linear_bias,
    })
}

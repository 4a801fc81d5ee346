//! Binary checkpoint format.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic       5 bytes  "LSTM1"
//! version     u8       1
//! n_layers    u32
//! input_dim   u32
//! hidden      u32 x n_layers
//! output_dim  u32
//! per layer   W_f W_i W_o W_c (hidden x (hidden+input), row-major f64)
//!             b_f b_i b_o b_c (hidden f64 each)
//! projection  W (output x top_hidden, row-major f64), b (output f64)
//! ```

use super::{LayerParams, ParamBlocks, Projection, StackParams, StackSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"LSTM1";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn save_checkpoint(spec: &StackSpec, params: &StackParams) -> Result<Vec<u8>> {
    params.check(spec)?;
    let mut out = Vec::with_capacity(16 + 8 * params.n_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(spec.n_layers() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.input_dim as u32).to_le_bytes());
    for &h in &spec.hidden_sizes {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(spec.output_dim as u32).to_le_bytes());
    for block in params.blocks() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, dst: &mut [f64]) -> Result<()> {
        let raw = self.take(8 * dst.len())?;
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(8)) {
            *d = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<(StackSpec, StackParams)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(5).map_err(|_| Error::Checkpoint("bad magic".into()))? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.take(1)?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = r.u32()?;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
    }
    let input_dim = r.u32()?;
    let hidden_sizes = (0..n_layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let output_dim = r.u32()?;
    let spec = StackSpec {
        input_dim,
        hidden_sizes,
        output_dim,
    };
    spec.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    // Size check before allocating from untrusted dimensions.
    let mut expected = 0usize;
    for l in 0..spec.n_layers() {
        let h = spec.hidden_sizes[l];
        expected += 4 * h * (h + spec.layer_input(l)) + 4 * h;
    }
    expected += spec.output_dim * (spec.top_hidden() + 1);
    let remaining = bytes.len() - r.pos;
    if remaining != 8 * expected {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {remaining}",
            8 * expected
        )));
    }

    let mut params = StackParams {
        layers: (0..spec.n_layers())
            .map(|l| LayerParams::zeros(spec.layer_input(l), spec.hidden_sizes[l]))
            .collect(),
        projection: Projection::zeros(spec.top_hidden(), spec.output_dim),
    };
    for block in params.blocks_mut() {
        r.f64s(block)?;
    }
    Ok((spec, params))
}

/// Loads and additionally requires the stored shapes to equal `expected`.
pub fn load_checkpoint_expecting(bytes: &[u8], expected: &StackSpec) -> Result<StackParams> {
    let (spec, params) = load_checkpoint(bytes)?;
    if &spec != expected {
        return Err(Error::Checkpoint(format!(
            "stored stack {:?} does not match expected {:?}",
            spec.hidden_sizes, expected.hidden_sizes
        )));
    }
    Ok(params)
}

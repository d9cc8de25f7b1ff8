//! Checkpoint archive: every parameter set, the run configuration, and
//! the optimizer states, so a resumed run continues the exact
//! trajectory of the interrupted one.
//!
//! Layout (all integers little-endian): magic `OLAT1`, u32 format
//! version, u64 step, length-prefixed config echo text, u32 set count,
//! then per set a length-prefixed role name, a u32 tensor count, and
//! per tensor a length-prefixed name, u64 rows, u64 cols, and the
//! row-major values as f32. Parameters are kept f32-representable by
//! the optimizer, so save/load round-trips them bit-exactly. After the
//! sets: a u32 optimizer count, then per optimizer a length-prefixed
//! name, u64 step count, u32 slot count, and per slot a u64 length
//! followed by that many first- then second-moment values as f64.

use std::path::Path;

use olat_core::config::TrainConfig;
use olat_core::models::{NamedTensor, ParameterSet, Role};
use olat_core::optim::AdamState;

use super::{read_bytes, write_bytes, FormatViolation};
use crate::error::Result;

/// Magic prefix of the checkpoint format.
pub const CKPT_MAGIC: &[u8; 5] = b"OLAT1";
/// Current format version.
pub const CKPT_VERSION: u32 = 2;

/// A decoded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Training step the parameters correspond to.
    pub step: u64,
    /// Configuration of the run that produced it.
    pub config: TrainConfig,
    /// Parameter sets, in the order they were saved.
    pub sets: Vec<ParameterSet>,
    /// Named optimizer states (moment buffers in update order).
    pub optimizers: Vec<(String, AdamState)>,
}

/// Serializes a checkpoint.
pub fn encode_checkpoint(
    step: u64,
    config: &TrainConfig,
    sets: &[ParameterSet],
    optimizers: &[(String, AdamState)],
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&step.to_le_bytes());
    put_str(&mut out, &config.echo());
    let n_sets = u32::try_from(sets.len()).expect("set count exceeds u32");
    out.extend_from_slice(&n_sets.to_le_bytes());
    for set in sets {
        put_str(&mut out, set.role.as_str());
        let n_tensors = u32::try_from(set.tensors.len()).expect("tensor count exceeds u32");
        out.extend_from_slice(&n_tensors.to_le_bytes());
        for t in &set.tensors {
            put_str(&mut out, &t.name);
            out.extend_from_slice(&(t.dims[0] as u64).to_le_bytes());
            out.extend_from_slice(&(t.dims[1] as u64).to_le_bytes());
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let n_opt = u32::try_from(optimizers.len()).expect("optimizer count exceeds u32");
    out.extend_from_slice(&n_opt.to_le_bytes());
    for (name, state) in optimizers {
        put_str(&mut out, name);
        out.extend_from_slice(&state.t.to_le_bytes());
        let n_slots = u32::try_from(state.slots.len()).expect("slot count exceeds u32");
        out.extend_from_slice(&n_slots.to_le_bytes());
        for (m, v) in &state.slots {
            assert_eq!(m.len(), v.len(), "moment buffers must pair up");
            out.extend_from_slice(&(m.len() as u64).to_le_bytes());
            for &x in m {
                out.extend_from_slice(&x.to_le_bytes());
            }
            for &x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

/// Parses a checkpoint, validating magic, version, and every field.
pub fn decode_checkpoint(bytes: &[u8]) -> core::result::Result<Checkpoint, FormatViolation> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(5, "magic `OLAT1`")?;
    if magic != CKPT_MAGIC {
        return Err(FormatViolation::at(0, "bad magic, expected `OLAT1`"));
    }
    let version = cur.u32("format version")?;
    if version != CKPT_VERSION {
        return Err(FormatViolation::at(
            5,
            format!("unsupported format version {version}, expected {CKPT_VERSION}"),
        ));
    }
    let step = cur.u64("step")?;
    let cfg_off = cur.pos;
    let cfg_text = cur.str("config echo")?;
    let config = TrainConfig::parse(cfg_text)
        .map_err(|e| FormatViolation::at(cfg_off as u64, format!("bad config echo: {e}")))?;
    let n_sets = cur.u32("set count")? as usize;
    let mut sets = Vec::with_capacity(n_sets);
    for _ in 0..n_sets {
        let set_off = cur.pos;
        let role_text = cur.str("role name")?;
        let role = Role::parse(role_text)
            .map_err(|e| FormatViolation::at(set_off as u64, e.to_string()))?;
        let n_tensors = cur.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = cur.str("tensor name")?.to_string();
            let rows = cur.u64("tensor rows")? as usize;
            let cols = cur.u64("tensor cols")? as usize;
            let count = rows.checked_mul(cols).ok_or_else(|| {
                FormatViolation::at(cur.pos as u64, "tensor shape overflows".to_string())
            })?;
            let raw = cur.take(count * 4, "tensor values")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            tensors.push(NamedTensor { name, dims: [rows, cols], data });
        }
        let set = ParameterSet { role, tensors };
        set.validate()
            .map_err(|e| FormatViolation::at(set_off as u64, format!("invalid {role}: {e}")))?;
        sets.push(set);
    }
    let n_opt = cur.u32("optimizer count")? as usize;
    let mut optimizers = Vec::with_capacity(n_opt);
    for _ in 0..n_opt {
        let opt_off = cur.pos;
        let name = cur.str("optimizer name")?.to_string();
        if name.is_empty() {
            return Err(FormatViolation::at(opt_off as u64, "empty optimizer name"));
        }
        let t = cur.u64("optimizer step count")?;
        let n_slots = cur.u32("slot count")? as usize;
        let mut slots = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            let len = cur.u64("slot length")? as usize;
            let slot_off = cur.pos;
            let count = len.checked_mul(16).ok_or_else(|| {
                FormatViolation::at(cur.pos as u64, "slot length overflows".to_string())
            })?;
            let raw = cur.take(count, "moment values")?;
            let decode = |half: &[u8]| -> Vec<f64> {
                half.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            };
            let m = decode(&raw[..len * 8]);
            let v = decode(&raw[len * 8..]);
            if m.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(FormatViolation::at(slot_off as u64, "non-finite moment value"));
            }
            slots.push((m, v));
        }
        optimizers.push((name, AdamState { t, slots }));
    }
    if cur.pos != bytes.len() {
        return Err(FormatViolation::at(cur.pos as u64, "trailing data after optimizer states"));
    }
    Ok(Checkpoint { step, config, sets, optimizers })
}

/// Writes a checkpoint file.
pub fn save_checkpoint(
    path: &Path,
    step: u64,
    config: &TrainConfig,
    sets: &[ParameterSet],
    optimizers: &[(String, AdamState)],
) -> Result<()> {
    write_bytes(path, &encode_checkpoint(step, config, sets, optimizers))
}

/// Reads a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?).map_err(|v| v.into_error(path))
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    let n = u32::try_from(s.len()).expect("string exceeds u32 length");
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> core::result::Result<&'a [u8], FormatViolation> {
        if self.bytes.len() - self.pos < n {
            return Err(FormatViolation::eof(self.bytes.len(), what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> core::result::Result<u32, FormatViolation> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> core::result::Result<u64, FormatViolation> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn str(&mut self, what: &str) -> core::result::Result<&'a str, FormatViolation> {
        let n = self.u32(what)? as usize;
        let off = self.pos;
        let raw = self.take(n, what)?;
        core::str::from_utf8(raw)
            .map_err(|e| FormatViolation::at((off + e.valid_up_to()) as u64, "not valid UTF-8"))
    }
}

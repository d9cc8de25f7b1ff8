//! Point-cloud files: a minimal versioned binary format and plain ASCII.
//!
//! Binary layout: magic `PCB1`, little-endian u32 point count, then
//! count × 3 little-endian f32 coordinates. Coordinates are stored in
//! single precision; clouds whose coordinates are exactly representable
//! as f32 (everything this pipeline writes) round-trip bit-exactly.
//! ASCII is one `x y z` line per point using shortest round-trip float
//! formatting, so any finite f64 cloud survives a text round trip.

use std::path::Path;

use olat_core::geometry::PointCloud;

use super::{read_bytes, write_bytes, FormatViolation};
use crate::error::Result;

/// Magic prefix of the binary cloud format.
pub const CLOUD_MAGIC: &[u8; 4] = b"PCB1";

/// Serializes a cloud into the binary format.
pub fn encode_binary(cloud: &PointCloud) -> Vec<u8> {
    let n = u32::try_from(cloud.len()).expect("cloud exceeds u32 point count");
    let mut out = Vec::with_capacity(8 + cloud.len() * 12);
    out.extend_from_slice(CLOUD_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    for p in cloud.points() {
        for a in 0..3 {
            out.extend_from_slice(&(p[a] as f32).to_le_bytes());
        }
    }
    out
}

/// Parses the binary format, validating magic, size, and finiteness.
pub fn decode_binary(bytes: &[u8]) -> core::result::Result<PointCloud, FormatViolation> {
    if bytes.len() < 4 {
        return Err(FormatViolation::eof(bytes.len(), "magic `PCB1`"));
    }
    if &bytes[..4] != CLOUD_MAGIC {
        return Err(FormatViolation::at(0, "bad magic, expected `PCB1`"));
    }
    if bytes.len() < 8 {
        return Err(FormatViolation::eof(bytes.len(), "point count"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(FormatViolation::at(4, "zero point count"));
    }
    let need = 8 + n * 12;
    if bytes.len() < need {
        return Err(FormatViolation::eof(bytes.len(), &format!("{n} points ({need} bytes total)")));
    }
    if bytes.len() > need {
        return Err(FormatViolation::at(need as u64, "trailing data after final point"));
    }
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let mut p = [0.0f64; 3];
        for (a, q) in p.iter_mut().enumerate() {
            let off = 8 + i * 12 + a * 4;
            let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(FormatViolation::at(off as u64, "non-finite coordinate"));
            }
            *q = v as f64;
        }
        pts.push(p);
    }
    PointCloud::new(pts).map_err(|e| FormatViolation::at(8, e.to_string()))
}

/// Serializes a cloud as ASCII `x y z` lines.
pub fn encode_ascii(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    out
}

/// Parses ASCII `x y z` lines; blank lines are skipped and a trailing
/// newline is irrelevant. Offsets in errors point at the offending
/// token or line.
pub fn decode_ascii(text: &str) -> core::result::Result<PointCloud, FormatViolation> {
    let base = text.as_ptr() as usize;
    let mut pts = Vec::new();
    for line in text.split_inclusive('\n') {
        let line_off = line.as_ptr() as usize - base;
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        let mut coords = [0.0f64; 3];
        let mut toks = body.split_whitespace();
        for (a, c) in coords.iter_mut().enumerate() {
            let tok = toks.next().ok_or_else(|| {
                FormatViolation::at(line_off as u64, format!("expected 3 coordinates, got {a}"))
            })?;
            let tok_off = (tok.as_ptr() as usize - base) as u64;
            let v: f64 = tok
                .parse()
                .map_err(|_| FormatViolation::at(tok_off, format!("bad coordinate `{tok}`")))?;
            if !v.is_finite() {
                return Err(FormatViolation::at(tok_off, "non-finite coordinate"));
            }
            *c = v;
        }
        if let Some(extra) = toks.next() {
            let tok_off = (extra.as_ptr() as usize - base) as u64;
            return Err(FormatViolation::at(tok_off, "more than 3 coordinates on a line"));
        }
        pts.push(coords);
    }
    PointCloud::new(pts).map_err(|e| FormatViolation::at(0, e.to_string()))
}

/// True when the path's extension selects the ASCII format.
fn is_ascii_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("xyz") | Some("txt")
    )
}

/// Reads a cloud file, auto-detecting binary (by magic) versus ASCII.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = read_bytes(path)?;
    if bytes.len() >= 4 && &bytes[..4] == CLOUD_MAGIC {
        return decode_binary(&bytes).map_err(|v| v.into_error(path));
    }
    let text = core::str::from_utf8(&bytes).map_err(|e| {
        FormatViolation::at(e.valid_up_to() as u64, "not valid UTF-8").into_error(path)
    })?;
    decode_ascii(text).map_err(|v| v.into_error(path))
}

/// Writes a cloud file; `.xyz`/`.txt` extensions select ASCII,
/// everything else the binary format.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    if is_ascii_path(path) {
        write_bytes(path, encode_ascii(cloud).as_bytes())
    } else {
        write_bytes(path, &encode_binary(cloud))
    }
}

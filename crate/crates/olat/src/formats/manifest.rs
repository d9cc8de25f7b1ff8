//! Dataset manifests: a line-oriented index of cloud files.
//!
//! First line: `olat-manifest<TAB>version<TAB>split<TAB>seed`. Every
//! following line: `role<TAB>category<TAB>path`, with paths relative to
//! the manifest's directory. Ground-truth entries are only legal in the
//! `eval` split — the training split is structurally unpaired.

use std::path::Path;

use super::{read_bytes, write_bytes_atomic, FormatViolation};
use crate::error::Result;

/// Manifest format version.
pub const MANIFEST_VERSION: u32 = 1;

/// What a cloud file is used as.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudRole {
    /// An occluded training or evaluation input.
    Partial,
    /// An unpaired complete shape.
    Complete,
    /// The paired complete shape of an evaluation partial.
    GroundTruth,
}

impl CloudRole {
    /// Stable manifest spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            CloudRole::Partial => "partial",
            CloudRole::Complete => "complete",
            CloudRole::GroundTruth => "ground_truth",
        }
    }

    /// Parses the manifest spelling.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "partial" => Some(CloudRole::Partial),
            "complete" => Some(CloudRole::Complete),
            "ground_truth" => Some(CloudRole::GroundTruth),
            _ => None,
        }
    }
}

/// One indexed cloud file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// How the file is used.
    pub role: CloudRole,
    /// Shape category the file belongs to.
    pub category: String,
    /// Path relative to the manifest's directory.
    pub path: String,
}

/// A dataset split index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Split name (`train` or `eval`).
    pub split: String,
    /// Seed the dataset was generated under.
    pub seed: u64,
    /// Indexed files, in generation order.
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Serializes to the manifest text form.
    pub fn encode(&self) -> String {
        let mut out = format!("olat-manifest\t{MANIFEST_VERSION}\t{}\t{}\n", self.split, self.seed);
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.role.as_str(), e.category, e.path));
        }
        out
    }

    /// Parses the manifest text form and checks the split invariant.
    pub fn decode(text: &str) -> core::result::Result<Self, FormatViolation> {
        let base = text.as_ptr() as usize;
        let mut lines = text.split_inclusive('\n');
        let header = lines
            .next()
            .ok_or_else(|| FormatViolation::eof(0, "manifest header"))?;
        let h: Vec<&str> = header.trim_end_matches('\n').split('\t').collect();
        if h.len() != 4 || h[0] != "olat-manifest" {
            return Err(FormatViolation::at(0, "bad header, expected `olat-manifest\\t<version>\\t<split>\\t<seed>`"));
        }
        let version: u32 = h[1]
            .parse()
            .map_err(|_| FormatViolation::at(0, format!("bad version `{}`", h[1])))?;
        if version != MANIFEST_VERSION {
            return Err(FormatViolation::at(
                0,
                format!("unsupported manifest version {version}, expected {MANIFEST_VERSION}"),
            ));
        }
        let split = h[2].to_string();
        if split.is_empty() {
            return Err(FormatViolation::at(0, "empty split name"));
        }
        let seed: u64 = h[3]
            .parse()
            .map_err(|_| FormatViolation::at(0, format!("bad seed `{}`", h[3])))?;
        let mut entries = Vec::new();
        for line in lines {
            let off = (line.as_ptr() as usize - base) as u64;
            let body = line.trim_end_matches('\n');
            if body.is_empty() {
                continue;
            }
            let cols: Vec<&str> = body.split('\t').collect();
            if cols.len() != 3 {
                return Err(FormatViolation::at(
                    off,
                    format!("expected `role\\tcategory\\tpath`, got {} fields", cols.len()),
                ));
            }
            let role = CloudRole::parse(cols[0])
                .ok_or_else(|| FormatViolation::at(off, format!("unknown role `{}`", cols[0])))?;
            if cols[1].is_empty() || cols[2].is_empty() {
                return Err(FormatViolation::at(off, "empty category or path"));
            }
            entries.push(ManifestEntry {
                role,
                category: cols[1].to_string(),
                path: cols[2].to_string(),
            });
        }
        let m = Manifest { split, seed, entries };
        m.check_split_invariant().map_err(|msg| FormatViolation::at(0, msg))?;
        Ok(m)
    }

    /// Ground truth may only appear in the `eval` split.
    fn check_split_invariant(&self) -> core::result::Result<(), String> {
        if self.split != "eval"
            && self.entries.iter().any(|e| e.role == CloudRole::GroundTruth)
        {
            return Err(format!(
                "ground_truth entries are not allowed in the `{}` split",
                self.split
            ));
        }
        Ok(())
    }

    /// Writes atomically (write-then-rename), so readers never observe a
    /// half-written manifest.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.check_split_invariant()
            .map_err(|msg| FormatViolation::at(0, msg).into_error(path))?;
        write_bytes_atomic(path, self.encode().as_bytes())
    }

    /// Reads and validates a manifest file.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let text = core::str::from_utf8(&bytes).map_err(|e| {
            FormatViolation::at(e.valid_up_to() as u64, "not valid UTF-8").into_error(path)
        })?;
        Self::decode(text).map_err(|v| v.into_error(path))
    }

    /// Relative paths of the entries matching a category and role, in
    /// manifest order.
    pub fn paths(&self, category: &str, role: CloudRole) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.category == category && e.role == role)
            .map(|e| e.path.as_str())
            .collect()
    }

    /// Categories present, in first-appearance order.
    pub fn categories(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.category.as_str()) {
                seen.push(e.category.as_str());
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            split: "train".into(),
            seed: 99,
            entries: vec![
                ManifestEntry {
                    role: CloudRole::Partial,
                    category: "box".into(),
                    path: "box/train_partial_000.pcb".into(),
                },
                ManifestEntry {
                    role: CloudRole::Complete,
                    category: "box".into(),
                    path: "box/train_complete_000.pcb".into(),
                },
            ],
        }
    }

    #[test]
    fn encode_decode_round_trips() {
        let m = sample();
        assert_eq!(Manifest::decode(&m.encode()).unwrap(), m);
    }

    #[test]
    fn header_carries_version_split_and_seed() {
        let text = sample().encode();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "olat-manifest\t1\ttrain\t99");
    }

    #[test]
    fn ground_truth_outside_eval_is_rejected() {
        let mut m = sample();
        m.entries[0].role = CloudRole::GroundTruth;
        assert!(Manifest::decode(&m.encode()).is_err());
        m.split = "eval".into();
        assert!(Manifest::decode(&m.encode()).is_ok());
    }

    #[test]
    fn malformed_lines_carry_offsets() {
        let text = "olat-manifest\t1\ttrain\t0\npartial\tbox\n";
        let err = Manifest::decode(text).unwrap_err();
        assert_eq!(err.offset, 24);
        let err = Manifest::decode("olat-manifest\t2\ttrain\t0\n").unwrap_err();
        assert!(err.msg.contains("version"), "{}", err.msg);
        assert!(Manifest::decode("nonsense\n").is_err());
    }

    #[test]
    fn save_is_atomic_and_loads_back() {
        let dir = std::env::temp_dir().join(format!("olat-manifest-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("train.manifest");
        let m = sample();
        m.save(&path).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), m);
        assert!(!dir.join("train.manifest.tmp").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn paths_filter_by_category_and_role() {
        let m = sample();
        assert_eq!(m.paths("box", CloudRole::Partial), vec!["box/train_partial_000.pcb"]);
        assert!(m.paths("box", CloudRole::GroundTruth).is_empty());
        assert!(m.paths("lamp_like", CloudRole::Partial).is_empty());
        assert_eq!(m.categories(), vec!["box"]);
    }
}

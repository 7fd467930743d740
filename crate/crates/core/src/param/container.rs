//! Binary parameter container with a JSON sidecar manifest.
//!
//! Layout (all integers little-endian `u64`, floats little-endian `f64`):
//!
//! ```text
//! magic  "DENIPS01"
//! count  number of groups
//! per group:
//!   name_len, name (UTF-8)
//!   origin (1 byte: 0 pretrained, 1 newly initialized, 2 adapter)
//!   rank, dims[rank]
//!   data[product(dims)]
//! ```
//!
//! The manifest (`<stem>.json`) lists names, origins, shapes and trainable
//! flags. Trainability is not part of the binary payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::set::{Origin, ParamGroup, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DENIPS01";
pub const FORMAT: &str = "denips-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestGroup {
    pub name: String,
    pub origin: Origin,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub num_elements: usize,
    pub groups: Vec<ManifestGroup>,
}

impl Manifest {
    pub fn of(set: &ParamSet) -> Self {
        Self {
            format: FORMAT.to_owned(),
            num_elements: set.num_elements(),
            groups: set
                .groups()
                .iter()
                .map(|g| ManifestGroup {
                    name: g.name().to_owned(),
                    origin: g.origin(),
                    shape: g.tensor().shape().to_vec(),
                    trainable: g.trainable(),
                })
                .collect(),
        }
    }
}

pub fn encode(set: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.num_elements() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for g in set.groups() {
        let name = g.name().as_bytes();
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name);
        out.push(g.origin().to_byte());
        let shape = g.tensor().shape();
        out.extend_from_slice(&(shape.len() as u64).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in g.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Container(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Container("length overflows usize".into()))
    }
}

/// Decode a container. All groups come back with `trainable = false`.
pub fn decode(bytes: &[u8]) -> Result<ParamSet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let count = r.usize()?;
    let mut set = ParamSet::new();
    for _ in 0..count {
        let name_len = r.usize()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| Error::Container(format!("group name: {e}")))?
            .to_owned();
        let origin = Origin::from_byte(r.take(1)?[0])
            .ok_or_else(|| Error::Container(format!("bad origin byte for `{name}`")))?;
        let rank = r.usize()?;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Container("element count overflow".into()))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Container("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| Error::Container(format!("`{name}`: {e}")))?;
        set.push(ParamGroup::new(name, tensor, origin, false))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Container(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(set)
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Write `<stem>.bin` and `<stem>.json`.
pub fn save(set: &ParamSet, stem: &Path) -> Result<()> {
    if let Some(dir) = stem.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(with_ext(stem, "bin"), encode(set))?;
    let manifest = serde_json::to_string_pretty(&Manifest::of(set))?;
    fs::write(with_ext(stem, "json"), manifest + "\n")?;
    Ok(())
}

/// Read `<stem>.bin`, checking it against `<stem>.json` and restoring the
/// trainable flags recorded there.
pub fn load(stem: &Path) -> Result<ParamSet> {
    let set = decode(&fs::read(with_ext(stem, "bin"))?)?;
    let manifest: Manifest = serde_json::from_slice(&fs::read(with_ext(stem, "json"))?)?;
    if manifest.format != FORMAT {
        return Err(Error::Container(format!("unknown format `{}`", manifest.format)));
    }
    if manifest.groups.len() != set.len() {
        return Err(Error::Container("manifest group count differs from payload".into()));
    }
    let mut groups = Vec::with_capacity(set.len());
    for (g, m) in set.groups().iter().zip(&manifest.groups) {
        if g.name() != m.name || g.origin() != m.origin || g.tensor().shape() != &m.shape[..] {
            return Err(Error::Container(format!("manifest disagrees on `{}`", m.name)));
        }
        groups.push(g.clone().with_trainable(m.trainable));
    }
    ParamSet::from_groups(groups)
}

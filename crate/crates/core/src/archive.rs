//! TNSA flat tensor archive.
//!
//! Layout:
//!
//! ```text
//! "TNSA" | header_len: u64 LE | header: UTF-8 JSON | payload
//! ```
//!
//! The header maps each tensor name to `{"shape":[..],"offset":o,"nbytes":n}`
//! with offsets relative to the payload start. Payload values are
//! little-endian `f32`. The writer emits entries sorted by name, packed
//! back to back.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TNSA";
const PREAMBLE: usize = 12;

pub type TensorMap = BTreeMap<String, Tensor>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub shape: Vec<usize>,
    pub offset: u64,
    pub nbytes: u64,
}

/// Header entries in file order, so duplicate names can be detected.
struct OrderedEntries(Vec<(String, ArchiveEntry)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of tensor entries")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, ArchiveEntry>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }
        de.deserialize_map(EntriesVisitor)
    }
}

/// Serializes `tensors` into archive bytes.
pub fn encode_archive<'a, I>(tensors: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    let mut sorted: BTreeMap<&str, &Tensor> = BTreeMap::new();
    for (name, tensor) in tensors {
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if sorted.insert(name, tensor).is_some() {
            return Err(Error::DuplicateName(name.to_owned()));
        }
    }

    let mut header = BTreeMap::new();
    let mut payload = Vec::new();
    for (name, tensor) in &sorted {
        let offset = payload.len() as u64;
        for v in tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        header.insert(
            *name,
            ArchiveEntry {
                shape: tensor.shape().to_vec(),
                offset,
                nbytes: payload.len() as u64 - offset,
            },
        );
    }
    let header = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn write_archive<'a, I>(tensors: I, path: impl AsRef<Path>) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    let path = path.as_ref();
    let bytes = encode_archive(tensors)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

type Index = Vec<(String, ArchiveEntry)>;

/// Parses and checks the header, returning entries plus the payload slice.
fn split_archive(bytes: &[u8]) -> Result<(Index, &[u8])> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::Truncated(format!("{} bytes, no magic", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            found: bytes[..4].to_vec(),
        });
    }
    if bytes.len() < PREAMBLE {
        return Err(Error::Truncated("missing header length".into()));
    }
    let header_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let remaining = (bytes.len() - PREAMBLE) as u64;
    if header_len > remaining {
        return Err(Error::Truncated(format!(
            "header declares {header_len} bytes, {remaining} available"
        )));
    }
    let header_end = PREAMBLE + header_len as usize;
    let text = std::str::from_utf8(&bytes[PREAMBLE..header_end])
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let OrderedEntries(entries) =
        serde_json::from_str(text).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &bytes[header_end..];

    let mut seen = HashSet::new();
    for (name, entry) in &entries {
        if name.is_empty() {
            return Err(Error::MalformedHeader("empty tensor name".into()));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::MalformedHeader(format!(
                "duplicate tensor name {name:?}"
            )));
        }
        if entry.shape.is_empty() || entry.shape.contains(&0) {
            return Err(Error::MalformedHeader(format!(
                "{name}: invalid shape {:?}",
                entry.shape
            )));
        }
        let elements = entry
            .shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .and_then(|n| n.checked_mul(4));
        if elements != Some(entry.nbytes) {
            return Err(Error::MalformedHeader(format!(
                "{name}: nbytes {} does not match shape {:?}",
                entry.nbytes, entry.shape
            )));
        }
        let end = entry.offset.checked_add(entry.nbytes);
        if end.is_none_or(|end| end > payload.len() as u64) {
            return Err(Error::Truncated(format!(
                "{name}: bytes {}..{} beyond payload of {} bytes",
                entry.offset,
                entry.offset.saturating_add(entry.nbytes),
                payload.len()
            )));
        }
    }

    let mut by_offset: Vec<&(String, ArchiveEntry)> = entries.iter().collect();
    by_offset.sort_by_key(|(_, e)| (e.offset, e.nbytes));
    for pair in by_offset.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.1.offset + a.1.nbytes > b.1.offset {
            return Err(Error::OverlappingRanges {
                first: a.0.clone(),
                second: b.0.clone(),
            });
        }
    }
    Ok((entries, payload))
}

pub fn decode_archive(bytes: &[u8]) -> Result<TensorMap> {
    let (entries, payload) = split_archive(bytes)?;
    entries
        .into_iter()
        .map(|(name, entry)| {
            let start = entry.offset as usize;
            let raw = &payload[start..start + entry.nbytes as usize];
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            Ok((name, Tensor::new(entry.shape, data)?))
        })
        .collect()
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<TensorMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_archive(&bytes)
}

/// Header entries sorted by name, validated like [`read_archive`].
pub fn read_index(path: impl AsRef<Path>) -> Result<BTreeMap<String, ArchiveEntry>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (entries, _) = split_archive(&bytes)?;
    Ok(entries.into_iter().collect())
}

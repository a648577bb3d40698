//! On-disk formats.
//!
//! - World: JSON document `{format, version, world}`.
//! - Gallery: framed binary — magic, format version (u32 LE), payload length
//!   (u64 LE), SHA-256 of the payload, then the JSON-encoded gallery.
//! - Episodes: JSON lines, each carrying `schema_version`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vlocnav_core::bench::{EpisodeResult, LocalizationRecord};
use vlocnav_core::vloc::GalleryMap;
use vlocnav_core::world::WorldMap;

use crate::FormatError;

pub const WORLD_FORMAT: &str = "vlocnav-world";
pub const WORLD_VERSION: u32 = 1;
pub const GALLERY_MAGIC: &[u8; 8] = b"VLNGALRY";
pub const GALLERY_VERSION: u32 = 1;
pub const EPISODE_SCHEMA_VERSION: u32 = 1;

fn open(path: &Path) -> Result<File, FormatError> {
    File::open(path).map_err(|e| FormatError::Io(path.display().to_string(), e))
}

fn create(path: &Path) -> Result<File, FormatError> {
    File::create(path).map_err(|e| FormatError::Io(path.display().to_string(), e))
}

#[derive(Serialize, Deserialize)]
struct WorldFile<W> {
    format: String,
    version: u32,
    world: W,
}

pub fn write_world(path: &Path, world: &WorldMap) -> Result<(), FormatError> {
    let doc = WorldFile { format: WORLD_FORMAT.into(), version: WORLD_VERSION, world };
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer(&mut w, &doc)?;
    w.flush().map_err(|e| FormatError::Io(path.display().to_string(), e))
}

pub fn read_world(path: &Path) -> Result<WorldMap, FormatError> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| FormatError::Io(path.display().to_string(), e))?;
    let h: Header = serde_json::from_str(&text)?;
    if h.format != WORLD_FORMAT {
        return Err(FormatError::WrongFormat(h.format));
    }
    if h.version != WORLD_VERSION {
        return Err(FormatError::UnsupportedVersion(h.version));
    }
    let doc: WorldFile<WorldMap> = serde_json::from_str(&text)?;
    Ok(doc.world)
}

pub fn encode_gallery(gallery: &GalleryMap) -> Result<Vec<u8>, FormatError> {
    let payload = serde_json::to_vec(gallery)?;
    let mut out = Vec::with_capacity(payload.len() + 52);
    out.extend_from_slice(GALLERY_MAGIC);
    out.extend_from_slice(&GALLERY_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_gallery(bytes: &[u8]) -> Result<GalleryMap, FormatError> {
    const HEADER: usize = 8 + 4 + 8 + 32;
    if bytes.len() < HEADER || &bytes[..8] != GALLERY_MAGIC {
        return Err(FormatError::WrongFormat("not a gallery file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != GALLERY_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload = &bytes[HEADER..];
    if payload.len() as u64 != len {
        return Err(FormatError::Truncated);
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(FormatError::ChecksumMismatch);
    }
    let gallery: GalleryMap = serde_json::from_slice(payload)?;
    gallery.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(gallery)
}

pub fn write_gallery(path: &Path, gallery: &GalleryMap) -> Result<(), FormatError> {
    std::fs::write(path, encode_gallery(gallery)?).map_err(|e| FormatError::Io(path.display().to_string(), e))
}

pub fn read_gallery(path: &Path) -> Result<GalleryMap, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::Io(path.display().to_string(), e))?;
    decode_gallery(&bytes)
}

/// One line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: LogRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    /// Written once, first.
    Meta {
        axis: String,
        route_length_km: f64,
        /// Route polyline, for crash maps.
        route: Vec<[f64; 2]>,
        seed: u64,
    },
    Episode {
        axis_value: String,
        method: String,
        result: EpisodeResult,
    },
    Reference {
        axis_value: String,
        method: String,
        localization_log: Vec<LocalizationRecord>,
    },
    /// A sweep point that could not be evaluated.
    PointError {
        axis_value: String,
        method: String,
        message: String,
    },
}

pub fn write_log(path: &Path, records: &[LogRecord]) -> Result<(), FormatError> {
    let mut w = BufWriter::new(create(path)?);
    for record in records {
        let line = LogLine { schema_version: EPISODE_SCHEMA_VERSION, record: record.clone() };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| FormatError::Io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| FormatError::Io(path.display().to_string(), e))
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, FormatError> {
    let mut out = Vec::new();
    for line in BufReader::new(open(path)?).lines() {
        let line = line.map_err(|e| FormatError::Io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line)?;
        if parsed.schema_version != EPISODE_SCHEMA_VERSION {
            return Err(FormatError::UnsupportedVersion(parsed.schema_version));
        }
        out.push(parsed.record);
    }
    Ok(out)
}

//! On-disk formats.
//!
//! A *patch store* is a directory holding `manifest.txt` and one binary file
//! per record. Every binary file starts with a 16-byte header:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 0..4  | magic `OYAP`                              |
//! | 4..6  | version, u16 = 1                          |
//! | 6..8  | rows, u16                                 |
//! | 8..10 | cols, u16                                 |
//! | 10..12| channels, u16                             |
//! | 12    | kind: 0 = patch record, 1 = float raster  |
//! | 13..16| reserved, zero                            |
//!
//! A patch record continues with `x` (channels planes of rows × cols
//! float32), then `y` (rows × cols float32), then the mask (rows × cols
//! u8, 0 or 1). A float raster continues with `channels` planes of float32.
//! All numbers are little-endian. Undefined raster cells are NaN.

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use super::{ChannelDescriptor, GridSpec, GriddedPair, PatchRecord, Timestamp};
use crate::kv::{read_file, write_file, KvDoc, KvWriter};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OYAP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
const KIND_RECORD: u8 = 0;
const KIND_RASTER: u8 = 1;
pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Header {
    rows: usize,
    cols: usize,
    channels: usize,
    kind: u8,
}

fn dim(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::Shape(format!("{what} {v} exceeds the u16 header field")))
}

fn encode_header(h: Header, out: &mut Vec<u8>) -> Result<()> {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim(h.rows, "rows")?.to_le_bytes());
    out.extend_from_slice(&dim(h.cols, "cols")?.to_le_bytes());
    out.extend_from_slice(&dim(h.channels, "channels")?.to_le_bytes());
    out.push(h.kind);
    out.extend_from_slice(&[0u8; 3]);
    Ok(())
}

fn decode_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "missing OYAP header"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    if u16_at(4) != VERSION as usize {
        return Err(Error::format(path, format!("unsupported version {}", u16_at(4))));
    }
    Ok(Header {
        rows: u16_at(6),
        cols: u16_at(8),
        channels: u16_at(10),
        kind: bytes[12],
    })
}

fn push_f32s(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn encode_record(pair: &GriddedPair) -> Result<Vec<u8>> {
    let n = pair.cells();
    let mut out = Vec::with_capacity(HEADER_LEN + n * (4 * pair.channels + 5));
    encode_header(
        Header {
            rows: pair.rows,
            cols: pair.cols,
            channels: pair.channels,
            kind: KIND_RECORD,
        },
        &mut out,
    )?;
    push_f32s(&pair.x, &mut out);
    push_f32s(&pair.y, &mut out);
    out.extend(pair.m.iter().map(|&v| v as u8));
    Ok(out)
}

pub fn decode_record(bytes: &[u8], path: &Path) -> Result<GriddedPair> {
    let h = decode_header(bytes, path)?;
    if h.kind != KIND_RECORD {
        return Err(Error::format(path, "not a patch record"));
    }
    let n = h.rows * h.cols;
    let x_end = HEADER_LEN + 4 * n * h.channels;
    let y_end = x_end + 4 * n;
    if bytes.len() != y_end + n {
        return Err(Error::format(path, "record length does not match its header"));
    }
    let mut m = Vec::with_capacity(n);
    for &b in &bytes[y_end..] {
        match b {
            0 => m.push(false),
            1 => m.push(true),
            _ => return Err(Error::format(path, "mask byte is neither 0 nor 1")),
        }
    }
    GriddedPair::new(
        h.rows,
        h.cols,
        h.channels,
        read_f32s(&bytes[HEADER_LEN..x_end]),
        read_f32s(&bytes[x_end..y_end]),
        m,
    )
}

/// Writes `planes` (channel-major, `rows × cols` each) as a float raster.
pub fn write_raster(path: &Path, rows: usize, cols: usize, planes: &[f32]) -> Result<()> {
    let n = rows * cols;
    if n == 0 || !planes.len().is_multiple_of(n) {
        return Err(Error::Shape(format!("{} values do not tile a {rows}x{cols} raster", planes.len())));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + planes.len() * 4);
    encode_header(
        Header {
            rows,
            cols,
            channels: planes.len() / n,
            kind: KIND_RASTER,
        },
        &mut out,
    )?;
    push_f32s(planes, &mut out);
    write_file(path, &out)
}

/// A float raster as `(rows, cols, planes)`.
pub type Raster = (usize, usize, Vec<f32>);

pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = read_file(path)?;
    let h = decode_header(&bytes, path)?;
    if h.kind != KIND_RASTER {
        return Err(Error::format(path, "not a float raster"));
    }
    if bytes.len() != HEADER_LEN + 4 * h.rows * h.cols * h.channels {
        return Err(Error::format(path, "raster length does not match its header"));
    }
    Ok((h.rows, h.cols, read_f32s(&bytes[HEADER_LEN..])))
}

pub fn format_time(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_time(s: &str) -> Result<Timestamp> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Invalid(format!("bad timestamp `{s}`: {e}")))
}

/// A directory of patch records sharing a parent grid and channel set.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchStore {
    pub grid: GridSpec,
    pub channels: Vec<ChannelDescriptor>,
    pub split: String,
    pub records: Vec<PatchRecord>,
}

impl PatchStore {
    pub fn new(grid: GridSpec, channels: Vec<ChannelDescriptor>, split: impl Into<String>) -> Self {
        PatchStore {
            grid,
            channels,
            split: split.into(),
            records: Vec::new(),
        }
    }

    pub fn record_file_name(index: usize) -> String {
        format!("record_{index:06}.bin")
    }

    pub fn manifest_text(&self) -> String {
        let mut w = KvWriter::new();
        w.comment("oya patch store")
            .put("format", "oya-patch-store")
            .put("version", VERSION)
            .put("split", &self.split);
        self.grid.write_kv(&mut w, "grid.");
        for c in &self.channels {
            w.put("channel", c.encode());
        }
        w.comment("record = file|origin_row|origin_col|t_start|t_end|rows|cols");
        for (i, r) in self.records.iter().enumerate() {
            w.put(
                "record",
                format!(
                    "{}|{}|{}|{}|{}|{}|{}",
                    Self::record_file_name(i),
                    r.origin.0,
                    r.origin.1,
                    format_time(&r.t_start),
                    format_time(&r.t_end),
                    r.pair.rows,
                    r.pair.cols
                ),
            );
        }
        w.finish()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        if self.split.contains(['\n', '=']) {
            return Err(Error::Invalid(format!("bad split tag `{}`", self.split)));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, r) in self.records.iter().enumerate() {
            if r.pair.channels != self.channels.len() {
                return Err(Error::Shape(format!(
                    "record {i} has {} channels, store declares {}",
                    r.pair.channels,
                    self.channels.len()
                )));
            }
            write_file(&dir.join(Self::record_file_name(i)), &encode_record(&r.pair)?)?;
        }
        write_file(&dir.join(MANIFEST), self.manifest_text().as_bytes())
    }

    pub fn read(dir: &Path) -> Result<PatchStore> {
        let manifest: PathBuf = dir.join(MANIFEST);
        let doc = KvDoc::read(&manifest)?;
        if doc.require("format")? != "oya-patch-store" {
            return Err(doc.bad("not a patch store manifest"));
        }
        if doc.req::<u16>("version")? != VERSION {
            return Err(doc.bad("unsupported patch store version"));
        }
        let grid = GridSpec::read_kv(&doc, "grid.")?;
        let channels = doc
            .all("channel")
            .map(ChannelDescriptor::decode)
            .collect::<Result<Vec<_>>>()?;
        let mut records = Vec::new();
        for entry in doc.all("record") {
            let f: Vec<&str> = entry.split('|').collect();
            if f.len() != 7 {
                return Err(doc.bad(format!("bad record entry `{entry}`")));
            }
            let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| doc.bad(format!("bad number in `{entry}`"))) };
            let path = dir.join(f[0]);
            let pair = decode_record(&read_file(&path)?, &path)?;
            if pair.rows != num(f[5])? || pair.cols != num(f[6])? || pair.channels != channels.len() {
                return Err(Error::format(&path, "record shape disagrees with the manifest"));
            }
            records.push(PatchRecord {
                origin: (num(f[1])?, num(f[2])?),
                t_start: parse_time(f[3])?,
                t_end: parse_time(f[4])?,
                pair,
            });
        }
        Ok(PatchStore {
            grid,
            channels,
            split: doc.require("split")?.to_string(),
            records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn store() -> PatchStore {
        let t = Utc.with_ymd_and_hms(2022, 3, 4, 5, 6, 7).unwrap();
        let pair = GriddedPair::new(
            2,
            3,
            2,
            vec![1.0, -2.5, 3.25, 0.1, f32::MIN_POSITIVE, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0],
            vec![0.0, 0.5, 0.0, 9.75, 0.0, 0.0],
            vec![false, true, false, true, false, false],
        )
        .unwrap();
        let mut s = PatchStore::new(GridSpec::global(), ChannelDescriptor::catalog()[..2].to_vec(), "validation");
        s.records.push(PatchRecord {
            origin: (4, 9),
            t_start: t,
            t_end: t + chrono::Duration::minutes(15),
            pair,
        });
        s
    }

    #[test]
    fn header_layout() {
        let bytes = encode_record(&store().records[0].pair).unwrap();
        assert_eq!(&bytes[..4], b"OYAP");
        assert_eq!(&bytes[4..16], &[1, 0, 2, 0, 3, 0, 2, 0, 0, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 12 * 4 + 6 * 4 + 6);
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = store();
        s.write(dir.path()).unwrap();
        let back = PatchStore::read(dir.path()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn corrupt_records_rejected() {
        let p = Path::new("r");
        let mut bytes = encode_record(&store().records[0].pair).unwrap();
        assert!(decode_record(&bytes[..bytes.len() - 1], p).is_err());
        let last = bytes.len() - 1;
        bytes[last] = 7;
        assert!(decode_record(&bytes, p).is_err());
        bytes[0] = b'X';
        assert!(decode_record(&bytes, p).is_err());
    }

    #[test]
    fn raster_round_trip_keeps_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.bin");
        let vals = vec![0.5, f32::NAN, 2.0, 3.0];
        write_raster(&path, 2, 2, &vals).unwrap();
        let (r, c, back) = read_raster(&path).unwrap();
        assert_eq!((r, c), (2, 2));
        assert!(back[1].is_nan());
        assert_eq!(back[3], 3.0);
        assert!(read_raster(&dir.path().join("missing.bin")).is_err());
    }
}

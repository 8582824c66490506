//! Store snapshots.
//!
//! JSONL: a header line, then one line per frame carrying its outgoing
//! edges. Binary: little-endian fields after an 8-byte magic, closed by an
//! FNV-1a checksum of everything before it. Both formats are detected on
//! load. Loading replays every append and checks the recomputed edges
//! against the stored ones, so a snapshot that disagrees with its own config
//! is rejected rather than silently repaired.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FrameRecord, MemoryStore, StoreError};
use crate::geometry::{CameraPose, OverlapConfig};
use crate::json;
use crate::world::{fnv1a64, ColumnHit, Panorama};

const MAGIC: &[u8; 8] = b"CMSTORE\x01";
const FORMAT_NAME: &str = "context-memory-store";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    #[default]
    Jsonl,
    Binary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    count: usize,
    edge_count: usize,
    cfg: OverlapConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    #[serde(flatten)]
    record: FrameRecord,
    edges: Vec<u32>,
}

fn corrupt(offset: usize, line: Option<usize>, message: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        offset: offset as u64,
        line,
        message: message.into(),
    }
}

impl MemoryStore {
    pub fn write_snapshot<W: Write>(
        &self,
        mut w: W,
        format: SnapshotFormat,
    ) -> Result<(), StoreError> {
        match format {
            SnapshotFormat::Jsonl => self.write_jsonl(&mut w)?,
            SnapshotFormat::Binary => w.write_all(&self.to_binary())?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn snapshot(
        &self,
        path: impl AsRef<Path>,
        format: SnapshotFormat,
    ) -> Result<(), StoreError> {
        self.write_snapshot(BufWriter::new(File::create(path)?), format)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_snapshot_bytes(&bytes)
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.starts_with(MAGIC) {
            Self::from_binary(bytes)
        } else {
            Self::from_jsonl(bytes)
        }
    }

    fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<(), StoreError> {
        let header = Header {
            format: FORMAT_NAME.into(),
            version: SNAPSHOT_VERSION,
            count: self.len(),
            edge_count: self.edge_count(),
            cfg: self.cfg,
        };
        json::to_writer(&mut *w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for (r, e) in self.records.iter().zip(&self.edges) {
            #[derive(Serialize)]
            struct Out<'a> {
                #[serde(flatten)]
                record: &'a FrameRecord,
                edges: &'a [u32],
            }
            json::to_writer(
                &mut *w,
                &Out {
                    record: r,
                    edges: e,
                },
            )
            .map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn from_jsonl(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut offset = 0usize;
        let mut lines = bytes
            .split_inclusive(|&b| b == b'\n')
            .enumerate()
            .filter_map(|(i, l)| {
                let start = offset;
                offset += l.len();
                let trimmed = l.trim_ascii();
                (!trimmed.is_empty()).then_some((i + 1, start, trimmed))
            });
        let json_err = |line: usize, start: usize, e: serde_json::Error| {
            corrupt(
                start + e.column().saturating_sub(1),
                Some(line),
                e.to_string(),
            )
        };

        let (line, start, text) = lines
            .next()
            .ok_or_else(|| corrupt(0, Some(1), "missing header"))?;
        let header: Header = serde_json::from_slice(text).map_err(|e| json_err(line, start, e))?;
        if header.format != FORMAT_NAME || header.version != SNAPSHOT_VERSION {
            return Err(corrupt(
                start,
                Some(line),
                format!("unsupported format {} v{}", header.format, header.version),
            ));
        }
        let mut store =
            MemoryStore::new(header.cfg).map_err(|e| corrupt(start, Some(line), e.to_string()))?;
        let mut last = (line, start + text.len());
        for (line, start, text) in lines {
            let rec: RecordLine =
                serde_json::from_slice(text).map_err(|e| json_err(line, start, e))?;
            store.replay(rec.record, &rec.edges, start, Some(line))?;
            last = (line, start + text.len());
        }
        if store.len() != header.count || store.edge_count() != header.edge_count {
            return Err(corrupt(
                last.1,
                Some(last.0),
                format!(
                    "header promises {} frames and {} edges, found {} and {}",
                    header.count,
                    header.edge_count,
                    store.len(),
                    store.edge_count()
                ),
            ));
        }
        Ok(store)
    }

    /// Appends a loaded record and checks it against what was stored.
    fn replay(
        &mut self,
        record: FrameRecord,
        edges: &[u32],
        offset: usize,
        line: Option<usize>,
    ) -> Result<(), StoreError> {
        let expected = self.len() as u32;
        if record.frame_id != expected {
            return Err(corrupt(
                offset,
                line,
                format!("frame id {} where {expected} expected", record.frame_id),
            ));
        }
        if let Some(p) = &record.panorama {
            if p.digest() != record.payload_digest {
                return Err(corrupt(
                    offset,
                    line,
                    format!("payload digest mismatch for frame {expected}"),
                ));
            }
        }
        self.append_frame(record)
            .map_err(|e| corrupt(offset, line, e.to_string()))?;
        if self.edges_of(expected) != edges {
            return Err(corrupt(
                offset,
                line,
                format!("stored edges of frame {expected} disagree with recomputation"),
            ));
        }
        Ok(())
    }

    fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.len() * 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        let cfg = json::to_vec(&self.cfg).expect("config serializes");
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (r, edges) in self.records.iter().zip(&self.edges) {
            out.extend_from_slice(&r.frame_id.to_le_bytes());
            out.extend_from_slice(&r.time_index.to_le_bytes());
            for v in [r.pose.x(), r.pose.y(), r.pose.yaw(), r.pose.fov()] {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            out.extend_from_slice(&r.payload_digest.to_le_bytes());
            match &r.panorama {
                None => out.push(0),
                Some(p) => {
                    out.push(1);
                    out.extend_from_slice(&(p.columns.len() as u32).to_le_bytes());
                    out.extend_from_slice(&p.to_bytes());
                }
            }
            out.extend_from_slice(&(edges.len() as u32).to_le_bytes());
            for e in edges {
                out.extend_from_slice(&e.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    fn from_binary(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut c = Cursor {
            bytes,
            pos: MAGIC.len(),
        };
        let version = c.u32("version")?;
        if version != SNAPSHOT_VERSION {
            return Err(corrupt(
                MAGIC.len(),
                None,
                format!("unsupported version {version}"),
            ));
        }
        let cfg_len = c.u32("config length")? as usize;
        let cfg_at = c.pos;
        let cfg: OverlapConfig = serde_json::from_slice(c.take(cfg_len, "config")?)
            .map_err(|e| corrupt(cfg_at, None, e.to_string()))?;
        let mut store = MemoryStore::new(cfg).map_err(|e| corrupt(cfg_at, None, e.to_string()))?;
        let count = c.u64("frame count")?;
        for _ in 0..count {
            let at = c.pos;
            let frame_id = c.u32("frame id")?;
            let time_index = c.u64("time index")?;
            let mut v = [0.0; 4];
            for x in &mut v {
                *x = f64::from_bits(c.u64("pose")?);
            }
            let pose = CameraPose::new(v[0], v[1], v[2], v[3])
                .map_err(|e| corrupt(at, None, e.to_string()))?;
            let payload_digest = c.u64("payload digest")?;
            let panorama = match c.u8("panorama flag")? {
                0 => None,
                1 => {
                    let n = c.u32("panorama width")?;
                    let columns = (0..n)
                        .map(|_| {
                            let id = c.u32("panorama column")?;
                            let depth = f64::from_bits(c.u64("panorama column")?);
                            Ok((id != u32::MAX).then_some(ColumnHit {
                                landmark: id,
                                depth,
                            }))
                        })
                        .collect::<Result<_, StoreError>>()?;
                    Some(Panorama { columns })
                }
                f => return Err(corrupt(c.pos - 1, None, format!("bad panorama flag {f}"))),
            };
            let n_edges = c.u32("edge count")?;
            let edges = (0..n_edges)
                .map(|_| c.u32("edge"))
                .collect::<Result<Vec<_>, _>>()?;
            let record = FrameRecord {
                frame_id,
                time_index,
                pose,
                payload_digest,
                panorama,
            };
            store.replay(record, &edges, at, None)?;
        }
        let body_end = c.pos;
        let sum = c.u64("checksum")?;
        if sum != fnv1a64(&bytes[..body_end]) {
            return Err(corrupt(body_end, None, "checksum mismatch"));
        }
        if c.pos != bytes.len() {
            return Err(corrupt(c.pos, None, "trailing bytes after checksum"));
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                corrupt(
                    self.pos,
                    None,
                    format!(
                        "truncated reading {what}: need {n} bytes, {} left",
                        self.bytes.len() - self.pos
                    ),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, StoreError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

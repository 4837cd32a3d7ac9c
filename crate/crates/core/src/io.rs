//! Binary frame container.
//!
//! Layout: the 8-byte magic `EPRFRAME`, a little-endian `u64` header
//! length, a JSON header, then little-endian `f64` samples ordered frame,
//! channel, point.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{FrameMeta, FrameSet, FrameSource};

pub const MAGIC: &[u8; 8] = b"EPRFRAME";
pub const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: u64 = 1 << 20;
/// Frames generated per parallel batch while writing.
const WRITE_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    meta: FrameMeta,
}

fn format_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {msg}", path.display()))
}

/// Write every frame of `source` to `path`.
pub fn write_frames<S: FrameSource>(path: &Path, source: &S) -> Result<()> {
    let meta = source.meta();
    meta.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    let header = serde_json::to_vec(&Header {
        version: FORMAT_VERSION,
        meta: meta.clone(),
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let len = meta.frame_len();
    let mut start = 0;
    while start < meta.n_frames {
        let end = (start + WRITE_BATCH).min(meta.n_frames);
        let bytes: Vec<Vec<u8>> = (start..end)
            .into_par_iter()
            .map(|i| {
                source.with_frame(i, |a, b| {
                    let mut out = Vec::with_capacity(8 * len);
                    for v in a.iter().chain(b) {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                    out
                })
            })
            .collect::<Result<_>>()?;
        for chunk in bytes {
            w.write_all(&chunk)?;
        }
        start = end;
    }
    w.flush()?;
    Ok(())
}

/// Frames read lazily from a container file.
#[derive(Debug)]
pub struct FrameFile {
    path: PathBuf,
    meta: FrameMeta,
    data_offset: u64,
    reader: Mutex<BufReader<File>>,
}

impl FrameFile {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let file_len = file.metadata()?.len();
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| format_err(path, "file too short for a frame container"))?;
        if &magic != MAGIC {
            return Err(format_err(path, "not a frame container (bad magic)"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| format_err(path, "truncated header"))?;
        let header_len = u64::from_le_bytes(len);
        if header_len > MAX_HEADER {
            return Err(format_err(path, "header length implausibly large"));
        }
        let mut header = vec![0u8; header_len as usize];
        r.read_exact(&mut header).map_err(|_| format_err(path, "truncated header"))?;
        let header: Header = serde_json::from_slice(&header).map_err(|e| format_err(path, e))?;
        if header.version != FORMAT_VERSION {
            return Err(format_err(path, format!("unsupported format version {}", header.version)));
        }
        let meta = header.meta;
        meta.validate().map_err(|e| format_err(path, e))?;
        let data_offset = 16 + header_len;
        let expected = (meta.n_frames * meta.frame_len()) as u64 * 8;
        if file_len - data_offset != expected {
            return Err(format_err(
                path,
                format!("expected {expected} bytes of samples, found {}", file_len - data_offset),
            ));
        }
        Ok(Self {
            path: path.to_path_buf(),
            meta,
            data_offset,
            reader: Mutex::new(r),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn read_frame(&self, index: usize) -> Result<Vec<f64>> {
        let len = self.meta.frame_len();
        let mut bytes = vec![0u8; 8 * len];
        {
            let mut r = self.reader.lock().unwrap_or_else(|e| e.into_inner());
            r.seek(SeekFrom::Start(self.data_offset + (index * len) as u64 * 8))?;
            r.read_exact(&mut bytes)?;
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(&self.path, format!("non-finite sample in frame {index}")));
        }
        Ok(values)
    }

    /// Load every frame into memory.
    pub fn load(&self) -> Result<FrameSet> {
        let mut data = Vec::with_capacity(self.meta.n_frames * self.meta.frame_len());
        for i in 0..self.meta.n_frames {
            data.extend(self.read_frame(i)?);
        }
        FrameSet::new(self.meta.clone(), data)
    }
}

impl FrameSource for FrameFile {
    fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    fn with_frame<R>(&self, index: usize, f: impl FnOnce(&[f64], &[f64]) -> R) -> Result<R> {
        if index >= self.meta.n_frames {
            return Err(Error::InvalidArgument(format!("frame {index} out of range")));
        }
        let values = self.read_frame(index)?;
        let (a, b) = values.split_at(self.meta.n_points);
        Ok(f(a, b))
    }
}

pub fn read_frames(path: &Path) -> Result<FrameSet> {
    FrameFile::open(path)?.load()
}

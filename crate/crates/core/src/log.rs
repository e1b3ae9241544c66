//! Append-only storage for event records.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::event::EventRecord;

pub trait EventLog: Send {
    /// Appends `records` as one unit. Returns only after the bytes are
    /// flushed to stable storage.
    fn append(&mut self, records: &[EventRecord]) -> Result<()>;
}

/// Newline-delimited JSON on disk.
#[derive(Debug)]
pub struct FileLog {
    path: PathBuf,
    file: File,
    len: u64,
}

impl FileLog {
    /// Opens (or creates) the log at `path` and returns the records already
    /// in it. A torn final line left by a crash mid-write is cut off; it
    /// was never acknowledged.
    pub fn open(path: impl AsRef<Path>) -> Result<(FileLog, Vec<EventRecord>)> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(Error::StorageFailure)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)
            .map_err(Error::StorageFailure)?;
        let loaded = parse_bytes(&bytes)?;
        check_integrity(&loaded.records)?;

        let mut len = bytes.len() as u64;
        if loaded.valid_len < len {
            file.set_len(loaded.valid_len)
                .map_err(Error::StorageFailure)?;
            len = loaded.valid_len;
        }
        if len > 0 && !loaded.ends_with_newline {
            file.write_all(b"\n").map_err(Error::StorageFailure)?;
            file.sync_data().map_err(Error::StorageFailure)?;
            len += 1;
        }
        Ok((FileLog { path, file, len }, loaded.records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventLog for FileLog {
    fn append(&mut self, records: &[EventRecord]) -> Result<()> {
        let mut buf = String::new();
        for record in records {
            buf.push_str(&record.to_line());
            buf.push('\n');
        }
        let written = self
            .file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            // Leave no half-written batch behind for the next append to
            // build on.
            let _ = self.file.set_len(self.len);
            return Err(Error::StorageFailure(e));
        }
        self.len += buf.len() as u64;
        Ok(())
    }
}

/// In-memory log whose contents stay readable through cloned handles.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    records: Arc<Mutex<Vec<EventRecord>>>,
    fail: Arc<Mutex<bool>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.records.lock().unwrap().clone()
    }

    /// Makes every following append fail until switched back.
    pub fn set_failing(&self, failing: bool) {
        *self.fail.lock().unwrap() = failing;
    }
}

impl EventLog for MemoryLog {
    fn append(&mut self, records: &[EventRecord]) -> Result<()> {
        if *self.fail.lock().unwrap() {
            return Err(Error::StorageFailure(io::Error::other("log unavailable")));
        }
        self.records.lock().unwrap().extend_from_slice(records);
        Ok(())
    }
}

struct Loaded {
    records: Vec<EventRecord>,
    valid_len: u64,
    ends_with_newline: bool,
}

fn parse_bytes(bytes: &[u8]) -> Result<Loaded> {
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut valid_len = 0u64;
    let mut ends_with_newline = true;
    while offset < bytes.len() {
        let (line, next, terminated) = match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(i) => (&bytes[offset..offset + i], offset + i + 1, true),
            None => (&bytes[offset..], bytes.len(), false),
        };
        let expected_seq = records.last().map_or(1, |r: &EventRecord| r.seq + 1);
        if line.iter().all(u8::is_ascii_whitespace) {
            offset = next;
            valid_len = next as u64;
            continue;
        }
        match serde_json::from_slice::<EventRecord>(line) {
            Ok(record) => {
                records.push(record);
                valid_len = next as u64;
                ends_with_newline = terminated;
            }
            Err(_) if !terminated => break,
            Err(e) => {
                return Err(Error::corrupt(
                    expected_seq,
                    format!("unparseable line: {e}"),
                ))
            }
        }
        offset = next;
    }
    Ok(Loaded {
        records,
        valid_len,
        ends_with_newline,
    })
}

/// Reads a log without modifying it. A torn final line is ignored.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    let file = File::open(path).map_err(Error::StorageFailure)?;
    read_records(BufReader::new(file))
}

pub fn read_records(mut reader: impl BufRead) -> Result<Vec<EventRecord>> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(Error::StorageFailure)?;
    let loaded = parse_bytes(&bytes)?;
    check_integrity(&loaded.records)?;
    Ok(loaded.records)
}

/// Sequence numbers must run 1, 2, 3, ... and timestamps never go back.
pub fn check_integrity(records: &[EventRecord]) -> Result<()> {
    check_sequence(records, 1)
}

pub(crate) fn check_sequence(records: &[EventRecord], first_seq: u64) -> Result<()> {
    let mut last_ts = None;
    for (expected, record) in (first_seq..).zip(records) {
        if record.seq != expected {
            return Err(Error::corrupt(
                record.seq,
                format!("expected sequence number {expected}"),
            ));
        }
        if let Some(prev) = last_ts {
            if record.ts < prev {
                return Err(Error::corrupt(record.seq, "timestamp moves backwards"));
            }
        }
        last_ts = Some(record.ts);
    }
    Ok(())
}

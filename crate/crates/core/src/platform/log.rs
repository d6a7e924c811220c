//! Append-only command log and clocks.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};

use super::Envelope;

/// Durable storage for commands. `append` must not return before the entry
/// would survive a process crash.
pub trait EventLog: Send {
    fn append(&mut self, entry: &Envelope) -> io::Result<()>;
}

/// Keeps entries in memory; useful for tests and simulations.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    entries: Arc<Mutex<Vec<Envelope>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// A copy of everything appended so far, including through clones of this log.
    pub fn entries(&self) -> Vec<Envelope> {
        self.entries.lock().expect("log lock").clone()
    }
}

impl EventLog for MemoryLog {
    fn append(&mut self, entry: &Envelope) -> io::Result<()> {
        self.entries.lock().expect("log lock").push(entry.clone());
        Ok(())
    }
}

/// Discards entries.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullLog;

impl EventLog for NullLog {
    fn append(&mut self, _: &Envelope) -> io::Result<()> {
        Ok(())
    }
}

/// JSON Lines file, one envelope per line, synced on every append.
#[derive(Debug)]
pub struct FileLog {
    path: PathBuf,
    file: File,
}

impl FileLog {
    /// Opens (or creates) the log and returns the entries already in it.
    /// A torn final line left by a crash mid-write is truncated away.
    pub fn open(path: impl AsRef<Path>) -> io::Result<(Self, Vec<Envelope>)> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut entries = Vec::new();
        let mut good_len = 0u64;
        {
            let mut reader = BufReader::new(&file);
            let mut line = String::new();
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                if !line.ends_with('\n') {
                    break;
                }
                let e = serde_json::from_str::<Envelope>(line.trim_end()).map_err(|e| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("corrupt log entry {}: {e}", entries.len() + 1),
                    )
                })?;
                entries.push(e);
                good_len += n as u64;
            }
        }
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok((Self { path, file }, entries))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventLog for FileLog {
    fn append(&mut self, entry: &Envelope) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

pub trait Clock: Send {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to. Clones share the same time.
#[derive(Debug, Clone)]
pub struct ManualClock {
    now: Arc<Mutex<DateTime<Utc>>>,
}

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self { now: Arc::new(Mutex::new(start)) }
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.now.lock().expect("clock lock") = t;
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().expect("clock lock") += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.now.lock().expect("clock lock")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::Command;
    use chrono::NaiveDate;

    fn entry(seq: u64) -> Envelope {
        Envelope {
            seq,
            at: DateTime::<Utc>::UNIX_EPOCH,
            request_id: None,
            command: Command::DailyRefresh { date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() },
        }
    }

    #[test]
    fn file_log_round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let (mut log, existing) = FileLog::open(&path).unwrap();
            assert!(existing.is_empty());
            log.append(&entry(1)).unwrap();
            log.append(&entry(2)).unwrap();
        }
        // simulate a crash mid-write
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":3,\"at\"").unwrap();
        drop(f);

        let (mut log, existing) = FileLog::open(&path).unwrap();
        assert_eq!(existing, vec![entry(1), entry(2)]);
        log.append(&entry(3)).unwrap();
        let (_, existing) = FileLog::open(&path).unwrap();
        assert_eq!(existing.len(), 3);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        std::fs::write(&path, "garbage\n").unwrap();
        assert!(FileLog::open(&path).is_err());
    }
}

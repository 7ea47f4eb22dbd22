//! Append-only event store: one serialized [`EventFrame`] per line,
//! UTF-8 NDJSON, timestamps RFC 3339 UTC.
//!
//! Appends are idempotent by `event_id`, so re-running a backfill over
//! the same data leaves the store unchanged.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::engine::EventFrame;
use crate::model::GasSpecies;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("event store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("event store {path} line {line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Conjunctive filters for [`EventStore::query`].
#[derive(Debug, Clone, Default)]
pub struct EventFilter {
    pub transformer_id: Option<String>,
    pub gas: Option<GasSpecies>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl EventFilter {
    fn matches(&self, frame: &EventFrame) -> bool {
        if let Some(tx) = &self.transformer_id {
            if &frame.transformer_id != tx {
                return false;
            }
        }
        if let Some(gas) = self.gas {
            if frame.gas != gas {
                return false;
            }
        }
        if let Some(from) = self.from {
            if frame.triggered_at < from {
                return false;
            }
        }
        if let Some(to) = self.to {
            if frame.triggered_at > to {
                return false;
            }
        }
        true
    }
}

struct StoreInner {
    file: File,
    ids: HashSet<String>,
}

/// File-backed append-only event log. Safe for concurrent appends from
/// multiple threads of one process; duplicate appends stay idempotent.
pub struct EventStore {
    path: PathBuf,
    inner: Mutex<StoreInner>,
}

impl EventStore {
    /// Opens (or creates) the store and indexes the event ids already
    /// present, so later appends dedupe against prior runs.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut ids = HashSet::new();
        if path.exists() {
            for frame in read_frames(&path)? {
                ids.insert(frame.event_id);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(EventStore {
            path,
            inner: Mutex::new(StoreInner { file, ids }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one frame as one NDJSON record. Returns `false` (and
    /// writes nothing) when the event id is already stored.
    pub fn append(&self, frame: &EventFrame) -> Result<bool, StoreError> {
        let mut inner = self.inner.lock().expect("store lock");
        if inner.ids.contains(&frame.event_id) {
            return Ok(false);
        }
        let mut line = serde_json::to_string(frame).expect("frame serializes");
        line.push('\n');
        inner
            .file
            .write_all(line.as_bytes())
            .and_then(|_| inner.file.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })?;
        inner.ids.insert(frame.event_id.clone());
        Ok(true)
    }

    /// Number of stored events.
    pub fn len(&self) -> usize {
        self.inner.lock().expect("store lock").ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns matching frames sorted by (trigger time, transformer, gas).
    pub fn query(&self, filter: &EventFilter) -> Result<Vec<EventFrame>, StoreError> {
        // Hold the lock so a concurrent append cannot leave a torn line.
        let _guard = self.inner.lock().expect("store lock");
        let mut frames: Vec<EventFrame> = read_frames(&self.path)?
            .into_iter()
            .filter(|f| filter.matches(f))
            .collect();
        frames.sort_by(|a, b| {
            (a.triggered_at, &a.transformer_id, a.gas).cmp(&(b.triggered_at, &b.transformer_id, b.gas))
        });
        Ok(frames)
    }

    /// All stored event ids.
    pub fn event_ids(&self) -> HashSet<String> {
        self.inner.lock().expect("store lock").ids.clone()
    }
}

fn read_frames(path: &Path) -> Result<Vec<EventFrame>, StoreError> {
    let file = File::open(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut frames = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: EventFrame =
            serde_json::from_str(&line).map_err(|source| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: idx + 1,
                source,
            })?;
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, GasHistory, Snapshot};
    use crate::engine::build_frame;
    use crate::model::{default_thresholds, MeasurementKind};

    fn frame(at: &str, conc: f64) -> EventFrame {
        let at: DateTime<Utc> = DateTime::parse_from_rfc3339(at).unwrap().with_timezone(&Utc);
        let mut snap = Snapshot::new("TX-1C", at);
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, conc, at);
        let result = analyze(&snap, &GasHistory::new(), &default_thresholds()).unwrap();
        build_frame(&result, GasSpecies::H2).unwrap()
    }

    #[test]
    fn append_and_query_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path().join("events.ndjson")).unwrap();
        assert!(store.is_empty());
        let f1 = frame("2019-01-24T08:02:00Z", 60.0);
        let f2 = frame("2019-01-24T10:55:00Z", 85.0);
        assert!(store.append(&f2).unwrap());
        assert!(store.append(&f1).unwrap());
        let got = store.query(&EventFilter::default()).unwrap();
        assert_eq!(got.len(), 2);
        // trigger-time order regardless of append order
        assert_eq!(got[0].event_id, f1.event_id);
        assert_eq!(got[1], f2);
    }

    #[test]
    fn duplicate_append_is_noop() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path().join("events.ndjson")).unwrap();
        let f = frame("2019-01-24T08:02:00Z", 60.0);
        assert!(store.append(&f).unwrap());
        assert!(!store.append(&f).unwrap());
        assert_eq!(store.len(), 1);
        assert_eq!(store.query(&EventFilter::default()).unwrap().len(), 1);
    }

    #[test]
    fn dedupe_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        let f = frame("2019-01-24T08:02:00Z", 60.0);
        {
            let store = EventStore::open(&path).unwrap();
            store.append(&f).unwrap();
        }
        let store = EventStore::open(&path).unwrap();
        assert!(!store.append(&f).unwrap());
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn filters_are_conjunctive() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path().join("events.ndjson")).unwrap();
        store.append(&frame("2019-01-24T08:02:00Z", 60.0)).unwrap();
        store.append(&frame("2019-01-25T10:14:00Z", 334.0)).unwrap();

        let by_tx = store
            .query(&EventFilter {
                transformer_id: Some("TX-1C".into()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(by_tx.len(), 2);

        let none = store
            .query(&EventFilter {
                transformer_id: Some("TX-9Z".into()),
                ..Default::default()
            })
            .unwrap();
        assert!(none.is_empty());

        let ranged = store
            .query(&EventFilter {
                from: Some("2019-01-25T00:00:00Z".parse().unwrap()),
                to: Some("2019-01-26T00:00:00Z".parse().unwrap()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(ranged.len(), 1);
        assert_eq!(ranged[0].conc_value, 334.0);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        assert!(EventStore::open("/nonexistent-dir/sub/events.ndjson").is_err());
    }

    #[test]
    fn concurrent_duplicate_appends_stay_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let store = std::sync::Arc::new(EventStore::open(dir.path().join("e.ndjson")).unwrap());
        let f = frame("2019-01-24T08:02:00Z", 60.0);
        let mut handles = Vec::new();
        for _ in 0..8 {
            let store = store.clone();
            let f = f.clone();
            handles.push(std::thread::spawn(move || store.append(&f).unwrap()));
        }
        let appended: usize = handles.into_iter().map(|h| h.join().unwrap() as usize).sum();
        assert_eq!(appended, 1);
        assert_eq!(store.query(&EventFilter::default()).unwrap().len(), 1);
    }
}

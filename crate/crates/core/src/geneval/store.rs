use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{AnnotationRecord, GenEvalError, Generation, Label};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenEvalError + '_ {
    move |source| GenEvalError::Io {
        file: path.display().to_string(),
        source,
    }
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, GenEvalError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GenEvalError::Malformed {
                file: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), GenEvalError> {
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(item).expect("serializable"));
        buf.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn write_generations(path: impl AsRef<Path>, generations: &[Generation]) -> Result<(), GenEvalError> {
    write_jsonl(path.as_ref(), generations)
}

pub fn read_generations(path: impl AsRef<Path>) -> Result<Vec<Generation>, GenEvalError> {
    read_jsonl(path.as_ref())
}

/// Keep the last record per (generation, annotator).
fn latest(records: impl IntoIterator<Item = AnnotationRecord>) -> BTreeMap<(String, String), AnnotationRecord> {
    let mut map = BTreeMap::new();
    for r in records {
        map.insert((r.generation_id.clone(), r.annotator_id.clone()), r);
    }
    map
}

/// Effective labels of a label log: one record per (generation, annotator),
/// later lines overriding earlier ones, sorted by generation then annotator.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, GenEvalError> {
    Ok(latest(read_jsonl(path.as_ref())?).into_values().collect())
}

/// Append-only label log with last-write-wins per (generation, annotator).
/// Writers are serialized; the whole history stays on disk.
#[derive(Debug)]
pub struct LabelStore {
    path: Option<PathBuf>,
    inner: Mutex<(BTreeMap<(String, String), AnnotationRecord>, Option<File>)>,
}

impl LabelStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new((BTreeMap::new(), None)),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GenEvalError> {
        let path = path.as_ref().to_path_buf();
        let records = if path.exists() {
            latest(read_jsonl(&path)?)
        } else {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(io_err(&path))?;
            }
            BTreeMap::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Self {
            path: Some(path),
            inner: Mutex::new((records, Some(file))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Record a judgment stamped with the current time.
    pub fn submit(&self, generation_id: &str, annotator_id: &str, label: Label) -> Result<AnnotationRecord, GenEvalError> {
        if annotator_id.trim().is_empty() {
            return Err(GenEvalError::EmptyAnnotator);
        }
        self.put(AnnotationRecord {
            generation_id: generation_id.to_string(),
            annotator_id: annotator_id.to_string(),
            label,
            timestamp: Utc::now(),
        })
    }

    pub fn put(&self, record: AnnotationRecord) -> Result<AnnotationRecord, GenEvalError> {
        let mut guard = self.inner.lock().expect("label store lock");
        let (records, file) = &mut *guard;
        if let Some(file) = file.as_mut() {
            let mut line = serde_json::to_string(&record).expect("serializable");
            line.push('\n');
            let path = self.path.as_deref().unwrap_or(Path::new("<labels>"));
            file.write_all(line.as_bytes()).map_err(io_err(path))?;
            file.flush().map_err(io_err(path))?;
        }
        records.insert((record.generation_id.clone(), record.annotator_id.clone()), record.clone());
        Ok(record)
    }

    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.inner.lock().expect("label store lock").0.values().cloned().collect()
    }

    pub fn label_of(&self, generation_id: &str, annotator_id: &str) -> Option<Label> {
        self.inner
            .lock()
            .expect("label store lock")
            .0
            .get(&(generation_id.to_string(), annotator_id.to_string()))
            .map(|r| r.label)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("label store lock").0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AggregationMode, Directionality, FillScore, ScoreError, Scorer, ScorerHandle, ScorerKind};
use crate::text::{nfc, sha256_hex};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreCacheKey {
    pub model_id: String,
    /// Hex SHA-256 of the NFC-normalized prompt text.
    pub prompt_hash: String,
    pub candidate: String,
    pub aggregation_mode: AggregationMode,
}

impl ScoreCacheKey {
    pub fn new(model_id: &str, prompt_text: &str, candidate: &str, mode: AggregationMode) -> Self {
        Self {
            model_id: model_id.to_string(),
            prompt_hash: sha256_hex(prompt_text),
            candidate: nfc(candidate).into_owned(),
            aggregation_mode: mode,
        }
    }

    /// Hex digest identifying this key in the store file.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for field in [
            self.model_id.as_str(),
            self.prompt_hash.as_str(),
            self.candidate.as_str(),
            self.aggregation_mode.as_str(),
        ] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreRecord {
    key_digest: String,
    key: ScoreCacheKey,
    score: FillScore,
    /// SHA-256 of the serialized score.
    checksum: String,
}

fn score_checksum(score: &FillScore) -> String {
    let bytes = serde_json::to_vec(score).expect("FillScore serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Persistent score cache: an append-only JSON-lines file plus an in-memory
/// index. Later lines win over earlier lines for the same key.
///
/// Lines that fail to parse, or whose digest or checksum does not match
/// their content, are skipped with a warning; the affected key behaves as a
/// miss and the next store of it appends a fresh line.
#[derive(Debug)]
pub struct ScoreStore {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, FillScore>>,
    corrupted: RwLock<HashSet<String>>,
    writer: Mutex<Option<File>>,
}

impl ScoreStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: RwLock::default(),
            corrupted: RwLock::default(),
            writer: Mutex::new(None),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        let mut corrupted = HashSet::new();
        if path.exists() {
            let raw = fs::read_to_string(&path)?;
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<StoreRecord>(line) {
                    Ok(rec) if rec.key.digest() == rec.key_digest && score_checksum(&rec.score) == rec.checksum => {
                        corrupted.remove(&rec.key_digest);
                        entries.insert(rec.key_digest, rec.score);
                    }
                    Ok(rec) => {
                        log::warn!("{}:{}: score cache entry fails its digest check; ignoring", path.display(), i + 1);
                        entries.remove(&rec.key_digest);
                        corrupted.insert(rec.key_digest);
                    }
                    Err(e) => {
                        log::warn!("{}:{}: unreadable score cache line ({e}); ignoring", path.display(), i + 1);
                    }
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path: Some(path),
            entries: RwLock::new(entries),
            corrupted: RwLock::new(corrupted),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &ScoreCacheKey) -> Option<FillScore> {
        self.entries.read().expect("store lock").get(&key.digest()).cloned()
    }

    /// Whether the key was seen with a failing checksum and not rewritten since.
    pub fn is_corrupted(&self, key: &ScoreCacheKey) -> bool {
        self.corrupted.read().expect("store lock").contains(&key.digest())
    }

    pub fn put(&self, key: &ScoreCacheKey, score: &FillScore) -> Result<(), ScoreError> {
        let digest = key.digest();
        let record = StoreRecord {
            key_digest: digest.clone(),
            key: key.clone(),
            score: score.clone(),
            checksum: score_checksum(score),
        };
        {
            let mut writer = self.writer.lock().expect("store lock");
            if let Some(file) = writer.as_mut() {
                let mut line = serde_json::to_string(&record).expect("record serializes");
                line.push('\n');
                file.write_all(line.as_bytes())?;
                file.flush()?;
            }
        }
        self.corrupted.write().expect("store lock").remove(&digest);
        self.entries
            .write()
            .expect("store lock")
            .insert(digest, score.clone());
        Ok(())
    }

    /// Stored value on a hit; otherwise run `fallback`, store and return it.
    pub fn cached_score(
        &self,
        key: &ScoreCacheKey,
        fallback: impl FnOnce() -> Result<FillScore, ScoreError>,
    ) -> Result<FillScore, ScoreError> {
        if let Some(hit) = self.get(key) {
            return Ok(hit);
        }
        if self.is_corrupted(key) {
            log::warn!("score cache entry for {:?} is corrupted; recomputing", key.candidate);
        }
        let score = fallback()?;
        self.put(key, &score)?;
        Ok(score)
    }
}

/// Scorer that consults a [`ScoreStore`] before an optional inner scorer.
///
/// With an inner scorer, results are extensionally identical to the inner
/// scorer's and the reported handle is the inner one. Without it, the store
/// is replayed and a miss is an error.
pub struct CachedScorer {
    inner: Option<Box<dyn Scorer>>,
    store: ScoreStore,
    model_id: String,
    directionality: Directionality,
}

impl CachedScorer {
    pub fn wrap(inner: Box<dyn Scorer>, store: ScoreStore) -> Self {
        let model_id = inner.handle().model_id;
        Self {
            inner: Some(inner),
            store,
            model_id,
            directionality: Directionality::default(),
        }
    }

    pub fn replay(model_id: impl Into<String>, store: ScoreStore) -> Self {
        Self {
            inner: None,
            store,
            model_id: model_id.into(),
            directionality: Directionality::default(),
        }
    }

    /// Directionality reported by a replayed store. Ignored when wrapping.
    pub fn with_directionality(mut self, directionality: Directionality) -> Self {
        self.directionality = directionality;
        self
    }

    pub fn store(&self) -> &ScoreStore {
        &self.store
    }
}

impl Scorer for CachedScorer {
    fn handle(&self) -> ScorerHandle {
        match &self.inner {
            Some(inner) => inner.handle(),
            None => ScorerHandle {
                model_id: self.model_id.clone(),
                kind: ScorerKind::Cached,
                endpoint: None,
                directionality: self.directionality,
            },
        }
    }

    fn score_batch(
        &self,
        text: &str,
        candidates: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError> {
        let keys: Vec<_> = candidates
            .iter()
            .map(|c| ScoreCacheKey::new(&self.model_id, text, c, mode))
            .collect();
        let mut out: Vec<Option<FillScore>> = keys.iter().map(|k| self.store.get(k)).collect();
        let missing: Vec<usize> = (0..candidates.len()).filter(|&i| out[i].is_none()).collect();
        if missing.is_empty() {
            return Ok(out.into_iter().flatten().collect());
        }
        let Some(inner) = &self.inner else {
            return Err(ScoreError::CacheMiss {
                candidate: candidates[missing[0]].clone(),
            });
        };
        let miss_candidates: Vec<String> = missing.iter().map(|&i| candidates[i].clone()).collect();
        let fresh = inner.score_batch(text, &miss_candidates, mode)?;
        super::check_results(&miss_candidates, &fresh, mode)?;
        for (&i, score) in missing.iter().zip(fresh) {
            if self.store.is_corrupted(&keys[i]) {
                log::warn!("score cache entry for {:?} is corrupted; rewriting", candidates[i]);
            }
            self.store.put(&keys[i], &score)?;
            out[i] = Some(score);
        }
        Ok(out.into_iter().flatten().collect())
    }
}

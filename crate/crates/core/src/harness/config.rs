use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::scoring::{AggregationMode, Directionality, ScorerKind};
use crate::transforms::TransformSpec;

fn default_in_flight() -> usize {
    4
}

/// Scorer section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    pub model_id: String,
    pub kind: ScorerKind,
    /// Remote address. Falls back to `CBS_SCORER_ENDPOINT`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Declared directionality of a replayed cache. Remote backends report
    /// their own through `/v1/info`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directionality: Option<Directionality>,
    /// Score store file. Required for `cached`; optional acceleration otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AspectSelection {
    #[default]
    All,
    List(Vec<String>),
}

impl Serialize for AspectSelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AspectSelection::All => s.serialize_str("all"),
            AspectSelection::List(ids) => ids.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for AspectSelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Keyword(String),
            List(Vec<String>),
        }
        match Raw::deserialize(d)? {
            Raw::Keyword(k) if k == "all" => Ok(AspectSelection::All),
            Raw::Keyword(k) => Err(serde::de::Error::custom(format!(
                "aspects must be \"all\" or a list of ids, got {k:?}"
            ))),
            Raw::List(ids) => Ok(AspectSelection::List(ids)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub aspects: AspectSelection,
    #[serde(default)]
    pub transform: TransformSpec,
    #[serde(default)]
    pub aggregation_mode: AggregationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub output_path: PathBuf,
}

impl RunConfig {
    /// Parse a configuration file. Relative paths resolve against the
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.check()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.output_path);
        if let Some(p) = self.scorer.cache_path.as_mut() {
            fix(p);
        }
    }

    /// Structural checks that do not need the corpus.
    pub fn check(&self) -> Result<(), HarnessError> {
        if self.scorer.model_id.trim().is_empty() {
            return Err(HarnessError::Config("scorer.model_id is empty".into()));
        }
        if self.scorer.max_in_flight == 0 {
            return Err(HarnessError::Config("scorer.max_in_flight must be at least 1".into()));
        }
        if self.scorer.kind == ScorerKind::Cached && self.scorer.cache_path.is_none() {
            return Err(HarnessError::Config("a cached scorer needs scorer.cache_path".into()));
        }
        if self.scorer.kind != ScorerKind::Remote && self.scorer.endpoint.is_some() {
            return Err(HarnessError::Config(
                "scorer.endpoint is only meaningful for remote scorers".into(),
            ));
        }
        if let Some(b) = &self.bootstrap {
            if self.seed.is_none() {
                return Err(HarnessError::MissingSeed("bootstrap resampling needs seed".into()));
            }
            if b.resamples == 0 || !(b.confidence > 0.0 && b.confidence < 1.0) {
                return Err(HarnessError::Config(
                    "bootstrap needs resamples >= 1 and 0 < confidence < 1".into(),
                ));
            }
        }
        if let TransformSpec::Demonstrations { seed: None, .. } = self.transform {
            if self.seed.is_none() {
                return Err(HarnessError::MissingSeed(
                    "demonstration sampling needs transform.seed or seed".into(),
                ));
            }
        }
        if let TransformSpec::CultureToken { token } = &self.transform {
            if token.trim().is_empty() {
                return Err(HarnessError::Config("transform.token is empty".into()));
            }
        }
        Ok(())
    }
}

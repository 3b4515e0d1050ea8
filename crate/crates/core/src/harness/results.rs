//! Result files: one `run` header line followed by one `aspect` line per
//! evaluated aspect, all JSON.
//!
//! ```text
//! {"record":"run","model_id":...,"corpus_version":...,"average_cbs":...,...}
//! {"record":"aspect","aspect_id":"names_f","cbs_percent":...,"per_prompt":[...],...}
//! ```
//!
//! Files contain no timestamps, so a deterministic run writes identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BootstrapConfig, HarnessError};
use crate::metric::{average_cbs, AspectResult, RunResult};
use crate::scoring::{AggregationMode, ScorerHandle};
use crate::transforms::TransformSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub model_id: String,
    pub corpus_version: String,
    pub scorer: ScorerHandle,
    pub transform: TransformSpec,
    pub transform_label: String,
    pub aggregation_mode: AggregationMode,
    pub seed: Option<u64>,
    pub bootstrap: Option<BootstrapConfig>,
    /// Set when the scorer only sees left context.
    pub right_context_ignored: bool,
    pub aspect_count: usize,
    pub average_cbs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub meta: RunMeta,
    pub result: RunResult,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ResultLine {
    Run(RunMeta),
    Aspect(AspectResult),
}

pub fn write_results(path: impl AsRef<Path>, output: &RunOutput) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = serde_json::to_string(&ResultLine::Run(output.meta.clone())).expect("serializable");
    buf.push('\n');
    for aspect in &output.result.aspect_results {
        buf.push_str(&serde_json::to_string(&ResultLine::Aspect(aspect.clone())).expect("serializable"));
        buf.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, buf).map_err(io)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<RunOutput, HarnessError> {
    let path = path.as_ref();
    let fail = |message: String| HarnessError::ResultsFormat {
        path: path.to_path_buf(),
        message,
    };
    let raw = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut meta = None;
    let mut aspects = Vec::new();
    for (i, line) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<ResultLine>(line)
            .map_err(|e| fail(format!("line {}: {e}", i + 1)))?
        {
            ResultLine::Run(m) if meta.is_none() => meta = Some(m),
            ResultLine::Run(_) => return Err(fail(format!("line {}: second run header", i + 1))),
            ResultLine::Aspect(a) => aspects.push(a),
        }
    }
    let meta = meta.ok_or_else(|| fail("missing run header".into()))?;
    if meta.aspect_count != aspects.len() {
        return Err(fail(format!(
            "header announces {} aspects, file has {}",
            meta.aspect_count,
            aspects.len()
        )));
    }
    let recomputed = average_cbs(&aspects)?;
    if (recomputed - meta.average_cbs).abs() > 1e-9 {
        return Err(fail(format!(
            "average_cbs {} does not match aspect mean {recomputed}",
            meta.average_cbs
        )));
    }
    let result = RunResult {
        model_id: meta.model_id.clone(),
        aspect_results: aspects,
        average_cbs: meta.average_cbs,
    };
    Ok(RunOutput { meta, result })
}

//! JSON bodies of the fill-mask and generate HTTP protocols.
//!
//! ```text
//! POST /v1/fill-mask  {model, text, candidates, aggregation}
//!                  -> {model, results: [{candidate, subword_probabilities, aggregate}]}
//! GET  /v1/info    -> {model, directionality, max_candidates_per_request}
//! POST /v1/generate {model, text, n, max_tokens, seed?} -> {generations: [text]}
//! ```
//!
//! `text` carries one literal `[MASK]`. Backends expand it to as many slots
//! as the candidate has subwords, fill all slots at once and read each
//! subword's probability at its own position from a single forward pass.
//! Results come back in request order.

use serde::{Deserialize, Serialize};

use super::{AggregationMode, Directionality};

pub const FILL_MASK_PATH: &str = "/v1/fill-mask";
pub const INFO_PATH: &str = "/v1/info";
pub const GENERATE_PATH: &str = "/v1/generate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillMaskRequest {
    pub model: String,
    pub text: String,
    pub candidates: Vec<String>,
    pub aggregation: AggregationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillMaskResult {
    pub candidate: String,
    pub subword_probabilities: Vec<f64>,
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillMaskResponse {
    pub model: String,
    pub results: Vec<FillMaskResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub model: String,
    pub directionality: Directionality,
    pub max_candidates_per_request: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub model: String,
    pub text: String,
    pub n: usize,
    pub max_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub generations: Vec<String>,
    /// Echoed by backends that honored the seed; absent otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_mask_request_layout() {
        let req = FillMaskRequest {
            model: "m".into(),
            text: "أنا اسمي [MASK]".into(),
            candidates: vec!["سلوى".into()],
            aggregation: AggregationMode::GeometricMean,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"model":"m","text":"أنا اسمي [MASK]","candidates":["سلوى"],"aggregation":"geometric_mean"}"#
        );
    }

    #[test]
    fn info_parses_left_to_right() {
        let info: InfoResponse = serde_json::from_str(
            r#"{"model":"bloom","directionality":"left_to_right","max_candidates_per_request":16}"#,
        )
        .unwrap();
        assert_eq!(info.directionality, Directionality::LeftToRight);
    }

    #[test]
    fn generate_request_omits_absent_seed() {
        let req = GenerateRequest {
            model: "m".into(),
            text: "t".into(),
            n: 2,
            max_tokens: 32,
            seed: None,
        };
        assert!(!serde_json::to_string(&req).unwrap().contains("seed"));
    }
}

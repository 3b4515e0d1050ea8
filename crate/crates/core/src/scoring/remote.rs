use super::protocol::{FillMaskRequest, FillMaskResponse, InfoResponse, FILL_MASK_PATH, INFO_PATH};
use super::{
    check_results, AggregationMode, Directionality, FillScore, ScoreError, Scorer, ScorerHandle,
    ScorerKind, AGGREGATE_TOLERANCE,
};
use crate::http::JsonClient;

pub use crate::http::RetryPolicy;

/// Environment variable holding the default fill-mask endpoint.
pub const ENDPOINT_ENV: &str = "CBS_SCORER_ENDPOINT";

/// Client for a fill-mask backend speaking the protocol in [`super::protocol`].
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: JsonClient,
    model_id: String,
    info: InfoResponse,
}

impl RemoteScorer {
    /// Connect and read `/v1/info`. Fails if the backend serves another model.
    pub fn connect(endpoint: &str, model_id: &str, retry: RetryPolicy) -> Result<Self, ScoreError> {
        let client = JsonClient::new(endpoint, retry);
        let info: InfoResponse = client.get(INFO_PATH)?;
        if info.model != model_id {
            return Err(ScoreError::ModelMismatch {
                configured: model_id.to_string(),
                served: info.model,
            });
        }
        if info.max_candidates_per_request == 0 {
            return Err(ScoreError::Protocol(
                "max_candidates_per_request must be positive".into(),
            ));
        }
        Ok(Self {
            client,
            model_id: model_id.to_string(),
            info,
        })
    }

    pub fn info(&self) -> &InfoResponse {
        &self.info
    }

    fn request_chunk(
        &self,
        text: &str,
        chunk: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError> {
        let req = FillMaskRequest {
            model: self.model_id.clone(),
            text: text.to_string(),
            candidates: chunk.to_vec(),
            aggregation: mode,
        };
        let resp: FillMaskResponse = self.client.post(FILL_MASK_PATH, &req)?;
        if resp.model != self.model_id {
            return Err(ScoreError::ModelMismatch {
                configured: self.model_id.clone(),
                served: resp.model,
            });
        }
        if resp.results.len() != chunk.len() {
            return Err(ScoreError::CandidateCount {
                expected: chunk.len(),
                got: resp.results.len(),
            });
        }
        let mut scores = Vec::with_capacity(chunk.len());
        for (index, (cand, result)) in chunk.iter().zip(resp.results).enumerate() {
            if &result.candidate != cand {
                return Err(ScoreError::CandidateMismatch {
                    index,
                    expected: cand.clone(),
                    got: result.candidate,
                });
            }
            if !(0.0..=1.0).contains(&result.aggregate) {
                return Err(ScoreError::InvalidProbability {
                    candidate: result.candidate,
                    value: result.aggregate,
                });
            }
            let score = FillScore::from_subwords(result.candidate, result.subword_probabilities, mode)?;
            if (score.aggregate - result.aggregate).abs() > AGGREGATE_TOLERANCE {
                return Err(ScoreError::AggregateMismatch {
                    candidate: score.candidate,
                    reported: result.aggregate,
                    expected: score.aggregate,
                });
            }
            scores.push(score);
        }
        Ok(scores)
    }
}

impl Scorer for RemoteScorer {
    fn handle(&self) -> ScorerHandle {
        ScorerHandle {
            model_id: self.model_id.clone(),
            kind: ScorerKind::Remote,
            endpoint: Some(self.client.base().to_string()),
            directionality: self.info.directionality,
        }
    }

    fn score_batch(
        &self,
        text: &str,
        candidates: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError> {
        let mut out = Vec::with_capacity(candidates.len());
        for chunk in candidates.chunks(self.info.max_candidates_per_request) {
            out.extend(self.request_chunk(text, chunk, mode)?);
        }
        check_results(candidates, &out, mode)?;
        Ok(out)
    }
}

impl RemoteScorer {
    pub fn directionality(&self) -> Directionality {
        self.info.directionality
    }
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Monolingual,
    Multilingual,
}

/// Descriptive metadata for a masked language model. Endpoints are supplied
/// by the user; the built-in entries carry none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRegistryEntry {
    pub model_id: String,
    pub family: ModelFamily,
    pub parameters: String,
    pub vocab_note: String,
    #[serde(default)]
    pub endpoint: Option<String>,
}

const MODELS: &[(&str, ModelFamily, &str, &str)] = &[
    ("ARBERT", ModelFamily::Monolingual, "163m", "100k"),
    ("MARBERT", ModelFamily::Monolingual, "163m", "100k"),
    ("AraBERT-base", ModelFamily::Monolingual, "136m", "60k"),
    ("AraBERT-large", ModelFamily::Monolingual, "371m", "60k"),
    ("AraBERT-Twitter-base", ModelFamily::Monolingual, "136m", "60k"),
    ("AraBERT-Twitter-large", ModelFamily::Monolingual, "371m", "60k"),
    ("mBERT", ModelFamily::Multilingual, "110m", "5k"),
    ("GigaBERT", ModelFamily::Multilingual, "125m", "26k"),
    ("GigaBERT-CS", ModelFamily::Multilingual, "125m", "26k"),
    ("XLM-R-base", ModelFamily::Multilingual, "270m", "14k"),
    ("XLM-R-large", ModelFamily::Multilingual, "550m", "14k"),
];

/// The eleven masked language models evaluated with the score, in table order.
pub fn default_registry() -> Vec<ModelRegistryEntry> {
    MODELS
        .iter()
        .map(|&(id, family, params, vocab)| ModelRegistryEntry {
            model_id: id.to_string(),
            family,
            parameters: params.to_string(),
            vocab_note: vocab.to_string(),
            endpoint: None,
        })
        .collect()
}

pub fn find_model<'a>(registry: &'a [ModelRegistryEntry], model_id: &str) -> Option<&'a ModelRegistryEntry> {
    registry.iter().find(|m| m.model_id == model_id)
}

//! Dataset schema: feature/response declarations plus fitted bin boundaries.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical {
        cardinality: usize,
    },
    Continuous {
        bins: usize,
        /// Strictly increasing cut points, fitted on training data. `None`
        /// until fitted; a constant column fits to an empty list (one bin).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boundaries: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Binary,
    #[default]
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub name: String,
    #[serde(default)]
    pub kind: ResponseKind,
}

/// Declares feature layout, the number of treatments `K` (treatment values
/// run 0..=K with 0 the control), and the response channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub features: Vec<FeatureSpec>,
    pub treatments: usize,
    pub responses: Vec<ResponseSpec>,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.treatments < 1 {
            return Err(DataError::Schema("treatments must be >= 1".into()));
        }
        if self.responses.is_empty() {
            return Err(DataError::Schema("at least one response is required".into()));
        }
        if self.features.is_empty() {
            return Err(DataError::Schema("at least one feature is required".into()));
        }
        for f in &self.features {
            match &f.kind {
                FeatureKind::Categorical { cardinality } if *cardinality == 0 => {
                    return Err(DataError::Schema(format!(
                        "feature `{}` has zero cardinality",
                        f.name
                    )));
                }
                FeatureKind::Continuous { bins, boundaries } => {
                    if *bins < 2 {
                        return Err(DataError::Schema(format!(
                            "feature `{}` needs at least 2 bins",
                            f.name
                        )));
                    }
                    if let Some(b) = boundaries {
                        if !b.windows(2).all(|w| w[0] < w[1]) {
                            return Err(DataError::Schema(format!(
                                "feature `{}` has non-increasing boundaries",
                                f.name
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }

    /// Id-space size of feature `j` after encoding. Continuous features must
    /// be fitted first.
    pub fn cardinality(&self, j: usize) -> Result<usize, DataError> {
        match &self.features[j].kind {
            FeatureKind::Categorical { cardinality } => Ok(*cardinality),
            FeatureKind::Continuous { boundaries: Some(b), .. } => Ok(b.len() + 1),
            FeatureKind::Continuous { boundaries: None, .. } => Err(DataError::Schema(format!(
                "feature `{}` has no fitted boundaries",
                self.features[j].name
            ))),
        }
    }

    pub fn cardinalities(&self) -> Result<Vec<usize>, DataError> {
        (0..self.features.len()).map(|j| self.cardinality(j)).collect()
    }

    /// Whether any continuous feature still lacks fitted boundaries.
    pub fn needs_fit(&self) -> bool {
        self.features.iter().any(|f| {
            matches!(&f.kind, FeatureKind::Continuous { boundaries: None, .. })
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: DatasetSchema =
            serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    /// Content hash over the canonical JSON form, used to bind checkpoints to
    /// the schema they were trained with.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("schema serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

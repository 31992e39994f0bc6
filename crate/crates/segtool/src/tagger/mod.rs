//! The segmentation-correction tagger.
//!
//! Token and acoustic-flag embeddings feed a stacked bidirectional LSTM;
//! each contextual state projects to a boundary probability through a
//! logistic sigmoid. Training minimizes negative log-likelihood with Adam
//! and early stopping on validation loss. Everything, including
//! backpropagation, is implemented here so gradients can be verified
//! against finite differences.

mod adam;
mod checkpoint;
mod lstm;
mod model;
mod train;

pub use model::TaggerModel;
pub use train::{fine_tune, train, train_with_report, EpochStats, TrainOptions, TrainReport};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::bpe::UNKNOWN_TOKEN;
use crate::corpus::Instance;
use crate::error::{Result, SegError};

/// Model and optimization hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub token_embed_dim: usize,
    pub flag_embed_dim: usize,
    /// Hidden units per direction.
    pub hidden_units: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub decision_threshold: f64,
    /// With `false` the acoustic flags are ignored and the model is purely
    /// lexical.
    pub use_gamma_input: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            token_embed_dim: 300,
            flag_embed_dim: 16,
            hidden_units: 512,
            layers: 2,
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 30,
            patience: 3,
            decision_threshold: 0.5,
            use_gamma_input: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("token_embed_dim", self.token_embed_dim),
            ("flag_embed_dim", self.flag_embed_dim),
            ("hidden_units", self.hidden_units),
            ("layers", self.layers),
            ("batch_size", self.batch_size),
        ];
        for (name, value) in dims {
            if value == 0 {
                return Err(SegError::data(format!("{name} must be positive")));
            }
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(SegError::data(format!(
                "decision_threshold must be in (0, 1), got {}",
                self.decision_threshold
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(SegError::data(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Embedding dimension actually fed to the first recurrent layer.
    pub fn input_dim(&self) -> usize {
        if self.use_gamma_input {
            self.token_embed_dim + self.flag_embed_dim
        } else {
            self.token_embed_dim
        }
    }

    /// Dimension of the per-position contextual state (both directions).
    pub fn context_dim(&self) -> usize {
        2 * self.hidden_units
    }

    /// True when `other` can share this config's parameter shapes.
    pub fn same_shape(&self, other: &ModelConfig) -> bool {
        self.token_embed_dim == other.token_embed_dim
            && self.flag_embed_dim == other.flag_embed_dim
            && self.hidden_units == other.hidden_units
            && self.layers == other.layers
            && self.use_gamma_input == other.use_gamma_input
    }
}

/// Token-to-id mapping. Id 0 is the unknown token; the rest are the distinct
/// training tokens in lexicographic order, which keeps model construction
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_instances(instances: &[Instance]) -> Self {
        let distinct: BTreeSet<&str> = instances
            .iter()
            .flat_map(|inst| inst.tokens.iter().map(String::as_str))
            .filter(|t| *t != UNKNOWN_TOKEN)
            .collect();
        let mut tokens = Vec::with_capacity(distinct.len() + 1);
        tokens.push(UNKNOWN_TOKEN.to_string());
        tokens.extend(distinct.into_iter().map(str::to_string));
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, ids }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNKNOWN_TOKEN) {
            return Err(SegError::data(format!(
                "vocabulary must start with {UNKNOWN_TOKEN}"
            )));
        }
        let ids: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if ids.len() != tokens.len() {
            return Err(SegError::data("vocabulary contains duplicate tokens"));
        }
        Ok(Self { tokens, ids })
    }

    pub fn unknown_id(&self) -> usize {
        0
    }

    /// Id for a token, falling back to the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(tokens: &[&str]) -> Instance {
        Instance {
            doc_id: "d".into(),
            index: 0,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            gamma: None,
            labels: vec![0; tokens.len()],
        }
    }

    #[test]
    fn vocabulary_is_sorted_with_unknown_first() {
        let vocab = Vocabulary::from_instances(&[inst(&["b", "a"]), inst(&["c", "a"])]);
        assert_eq!(vocab.tokens(), &["<unk>", "a", "b", "c"]);
        assert_eq!(vocab.id("a"), 1);
        assert_eq!(vocab.id("zzz"), vocab.unknown_id());
    }

    #[test]
    fn config_validation_rejects_bad_threshold() {
        let cfg = ModelConfig {
            decision_threshold: 1.0,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }

    #[test]
    fn input_dim_reflects_gamma_ablation() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.input_dim(), 316);
        assert_eq!(cfg.context_dim(), 1024);
        let lex = ModelConfig {
            use_gamma_input: false,
            ..cfg
        };
        assert_eq!(lex.input_dim(), 300);
    }
}

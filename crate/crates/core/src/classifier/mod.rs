//! Three-class sentence stance classifier (Issue Resolved / Neutral / Issue
//! Finding) over sentence embeddings.

mod bundle;
mod labels;
mod metrics;
mod model;
pub mod svm;

pub use bundle::{
    extract_insight_bundles, EmbeddingClassifier, InsightBundle, SentenceClassifier,
};
pub use labels::{read_label_file, LabelCounts, LabeledSentence, Split};
pub use metrics::{evaluate, evaluate_predictions, ClassReport, ConfusionMatrix, EvalReport};
pub use model::{
    stratified_folds, train, CellScore, ClassMachine, GridSpec, KernelKind, SvmModel, TrainingMetadata,
    TrainingSet, MODEL_FORMAT_VERSION,
};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Resolved,
    Neutral,
    Finding,
}

impl Label {
    /// Fixed class order; also the tie-break priority for `classify`.
    pub const ALL: [Label; 3] = [Label::Resolved, Label::Neutral, Label::Finding];

    pub fn index(self) -> usize {
        match self {
            Label::Resolved => 0,
            Label::Neutral => 1,
            Label::Finding => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Resolved => "resolved",
            Label::Neutral => "neutral",
            Label::Finding => "finding",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

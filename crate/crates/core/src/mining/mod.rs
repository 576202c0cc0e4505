//! Offline stage: label a corpus by measured best format, grow a gain-ratio
//! decision tree, turn its paths into confidence-tagged rules, tailor the
//! rule list and serialize it.

mod dataset;
mod rules;
mod tailor;
mod tree;

use thiserror::Error;

pub use dataset::{label_corpus, Dataset, LabelConfig, TrainingSample, TIE_TOLERANCE_GFLOPS};
pub use rules::{tree_to_rules, Comparator, Condition, Rule, RuleSet, OBSERVATION_RULES};
pub use tailor::{shortest_acceptable_prefix, tailor_rules, TailorReport, DEFAULT_ACCURACY_GAP};
pub use tree::{train_tree, DecisionTree, Node, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

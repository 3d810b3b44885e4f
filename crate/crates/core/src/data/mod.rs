//! Dataset files, splits, pair sampling, the synthetic generator and its
//! Bayes oracle.

mod format;
mod oracle;
mod pairs;
mod split;
mod synth;

pub use format::{
    load_pairs, save_pairs, AudioSteps, Dataset, DatasetManifest, EmbeddingRecord, NegativeMode,
    PairSample, Split, SplitCounts, FLIP_SUFFIX, MANIFEST, PAIRS, RECORDS,
};
pub use oracle::{bayes_oracle_auc, hanley_mcneil_se, BayesOracle, OracleMode, OracleResult};
pub use pairs::sample_pairs;
pub use split::{split_dataset, DEFAULT_FRACTIONS};
pub use synth::{generate, GeneratorParams, SynthConfig, SynthSample};

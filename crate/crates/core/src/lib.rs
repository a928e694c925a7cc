//! Text-classification toolkit for unsegmented (Japanese) review text.
//!
//! The pipeline runs in five stages, each usable on its own:
//!
//! 1. [`corpus`] — labeled review CSVs, reproducible sampling
//! 2. [`lattice`] / [`subword`] — dictionary-driven and trainable
//!    unigram-LM tokenizers
//! 3. [`vectorize`] — TF-IDF sparse document-term matrices with timing
//! 4. [`classify`] — Multinomial Naive Bayes and L2 logistic regression,
//!    repeated stratified k-fold CV and grid search
//! 5. [`harness`] — end-to-end pipeline orchestration and reporting

pub mod classify;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod subword;
pub mod tokenizer;
pub mod trie;
pub mod vectorize;

pub use classify::{
    grid_search, lr_fit, lr_objective_gradient, lr_predict, mnb_fit, mnb_predict,
    repeated_stratified_kfold, CvPlan, GridSearchResult, LrModel, MnbModel,
};
pub use corpus::{
    dataset_stats, parse_review_csv, random_sample, write_review_csv, Dataset, DatasetStats,
    Label, ReviewRecord,
};
pub use error::{Error, ErrorKind, Result};
pub use harness::{
    emit_report, evaluate_error, run_pipeline, ClassifierChoice, EvalReport, PipelineConfig,
    ReportFormat, TokenizerChoice,
};
pub use lattice::{
    load_dictionary, segment_min_cost, tokenize, DictionaryEntry, Lattice, LexDictionary, Token,
};
pub use subword::{decode, normalize, train, SubwordVocab, TrainerConfig};
pub use tokenizer::Tokenizer;
pub use vectorize::{fit_transform_timed, SparseMatrix, TfidfModel, Vocabulary};

//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("size_limit must be >= 1")]
    BadSizeLimit,
    #[error("duplicate word in vocabulary: {0:?}")]
    DuplicateWord(String),
    #[error("bad vocabulary file: {0}")]
    BadVocabFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    PlainIo(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("character {0:?} not in the codec alphabet")]
    UnknownChar(char),
    #[error("unknown subword id {0}")]
    UnknownId(u32),
    #[error("bad codec file at line {line}: {reason}")]
    BadCodecFile { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MixerError {
    #[error("mixing plan has no components")]
    NoComponents,
    #[error("mixing weights must be nonnegative and sum to 1 (got sum {0})")]
    BadWeights(f64),
    #[error("component {0:?} is empty")]
    EmptyComponent(String),
    #[error("batch_size and unroll_length must be >= 1")]
    BadShape,
}

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("order must be in 1..=5, got {0}")]
    BadOrder(usize),
    #[error("dev corpus is empty")]
    EmptyDev,
    #[error("zero probability for token {token:?} in every weighted component")]
    ZeroProbability { token: String },
    #[error("interpolation weights must be nonnegative and sum to 1 (got sum {0})")]
    BadWeights(f64),
    #[error("component count {components} does not match weight count {weights}")]
    ComponentMismatch { components: usize, weights: usize },
    #[error("ARPA parse error at line {line}: {reason}")]
    ArpaParse { line: usize, reason: String },
    #[error("word {0:?} contains whitespace and cannot be serialized as ARPA")]
    UnserializableWord(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NlmError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("non-finite activation encountered (training divergence)")]
    NonFinite,
    #[error("training diverged at step {step}; last good checkpoint is from step {last_good_step}")]
    Diverged { step: usize, last_good_step: usize },
    #[error("freeze pattern {0:?} matches no parameter tensor")]
    UnknownFreezeName(String),
    #[error("checkpoint format error: {0}")]
    BadCheckpoint(String),
    #[error("token id {id} out of range for vocabulary of {vocab} entries")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has {len} entries")]
    DimMismatch { rows: usize, cols: usize, len: usize },
    #[error("model is already quantized")]
    AlreadyQuantized,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("temperature must be positive")]
    BadTemperature,
    #[error("max_length must be >= 1")]
    BadMaxLength,
    #[error("vocabulary filter rejected all samples")]
    AllFiltered,
    #[error(transparent)]
    Subword(#[from] SubwordError),
}

#[derive(Debug, Error)]
pub enum RescoreError {
    #[error("malformed class tags: {0}")]
    MalformedTags(String),
    #[error("hypothesis has {words} scoreable words but {scores} first-pass scores")]
    ScoreCountMismatch { words: usize, scores: usize },
    #[error("first_pass_total {total} does not match acoustic + lm scores {sum} (tolerance 1e-4)")]
    TotalMismatch { total: f64, sum: f64 },
    #[error("n-best list for {utt_id:?} is empty")]
    EmptyList { utt_id: String },
    #[error("n-best record at line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference corpus is empty")]
    EmptyReference,
    #[error("reference and hypothesis corpora differ in size: {refs} vs {hyps}")]
    SizeMismatch { refs: usize, hyps: usize },
    #[error("no entities in reference")]
    NoEntities,
    #[error("empty latency sample")]
    EmptyLatencies,
    #[error("percentile {0} out of range (0, 100]")]
    BadPercentile(f64),
    #[error("zero probability for token {token:?} (model is not closed over the vocabulary)")]
    ZeroProbability { token: String },
}

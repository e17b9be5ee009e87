//! Desk-scale second-pass language-model toolkit for ASR: heterogeneous-
//! corpus neural LM training, NCE self-normalized and quantized inference,
//! synthetic-data distillation into Kneser-Ney n-gram models, and
//! class-tag-aware n-best rescoring with WER/Entity-WER/latency evaluation.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod mixer;
pub mod ngram;
pub mod nlm;
pub mod quant;
pub mod rescore;
pub mod score;
pub mod subword;
pub mod synth;

pub use corpus::{build_vocab, tokenize, Corpus, Vocabulary};
pub use mixer::{Minibatch, MixComponent, MixingPlan, Sampler};
pub use ngram::{
    estimate_kn, interpolate_static, optimize_weights, DynamicMixture, InterpolationWeights,
    NGramModel,
};
pub use nlm::{LmState, ModelConfig, NceConfig, Parameters, TrainConfig};
pub use quant::{quantize_matrix, quantize_model, QuantizedMatrix, QuantizedModel};
pub use rescore::{Hypothesis, NBestList, RescoreConfig};
pub use score::{ScoreMode, SentenceScorer};
pub use subword::SubwordCodec;
pub use synth::SynthesisConfig;

//! Scoring traits shared by the n-gram and neural models so perplexity and
//! rescoring treat every model the same way.

/// Whether per-word scores come from the full softmax or from the
/// self-normalized shortcut that skips the partition sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Normalized,
    Unnormalized,
}

/// Assigns natural-log scores to a `<s>`-framed sentence.
///
/// The returned vector holds one score per predicted event: every token
/// except the leading `<s>` (so `</s>` is scored, `<s>` is not). This is the
/// shared token-counting convention that keeps n-gram and NLM perplexities
/// comparable.
pub trait SentenceScorer {
    fn score_sentence(&self, sentence: &[u32], mode: ScoreMode) -> Vec<f64>;
}

/// Step-level scoring interface used by the n-best rescorer: history state is
/// advanced explicitly so class-tagged words can update the state without
/// contributing a score.
pub trait RescoreLm {
    type State: Clone + PartialEq;

    /// State with nothing consumed yet; callers advance over `<s>` first.
    fn start(&self) -> Self::State;

    /// Consumes one token, updating the history.
    fn advance(&self, state: &mut Self::State, token: u32);

    /// Natural-log score of `token` given the current history, without
    /// consuming it.
    fn word_score(&self, state: &Self::State, token: u32, mode: ScoreMode) -> f64;
}

/// Blanket sentence scoring for any step-level model.
pub fn score_with_rescore_lm<L: RescoreLm>(lm: &L, sentence: &[u32], mode: ScoreMode) -> Vec<f64> {
    let mut state = lm.start();
    let mut scores = Vec::with_capacity(sentence.len().saturating_sub(1));
    for (i, &token) in sentence.iter().enumerate() {
        if i > 0 {
            scores.push(lm.word_score(&state, token, mode));
        }
        lm.advance(&mut state, token);
    }
    scores
}

//! Back-off n-gram language models with modified Kneser-Ney smoothing.
//!
//! Counting conventions (these pin down every probability in the model, and
//! the tests' independent oracle implements the same conventions from
//! scratch):
//!
//! - Sentences are framed `<s> w1 .. wm </s>`; predicted events are
//!   everything except `<s>`. Class-tag ids are annotation, not events, and
//!   are stripped before counting.
//! - The highest order uses raw window counts over the framed sentence.
//! - Lower orders use continuation counts (number of distinct one-token
//!   left-extensions with nonzero raw count at the next order), except
//!   `<s>`-initial n-grams which keep raw counts since nothing can precede
//!   them.
//! - Per-order discounts D1/D2/D3+ come from counts-of-counts
//!   (Y = n1/(n1+2 n2), D1 = 1-2Y n2/n1, D2 = 2-3Y n3/n2, D3+ = 3-4Y n4/n3);
//!   degenerate counts-of-counts fall back to a single 0.75 discount.
//! - The unigram distribution interpolates with the uniform distribution
//!   over predictable events, so the model is closed over the vocabulary.
//!
//! Stored probabilities are the interpolated values and the stored back-off
//! weight of a context equals its discount mass, which makes every
//! conditional distribution sum to one when expanded through back-off.

mod arpa;
mod interp;

pub use arpa::{read_arpa, write_arpa};
pub use interp::{
    interpolate_static, optimize_weights, read_weights_file, write_weights_file, DynamicMixture,
    InterpolationWeights,
};

use std::collections::HashMap;
use std::sync::Arc;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::NgramError;
use crate::eval;
use crate::score::{RescoreLm, ScoreMode, SentenceScorer};

pub const MAX_ORDER: usize = 5;

/// ln of the ARPA "effectively zero" probability (log10 = -99), used for
/// `<s>`, which is context-only and never predicted.
pub(crate) const LN_FLOOR: f64 = -99.0 * std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub ln_prob: f64,
    /// ln back-off weight of this n-gram used as a context; 0.0 when the
    /// context never extends.
    pub ln_backoff: f64,
}

/// KN-smoothed back-off model. Immutable after estimation; cheap to query
/// concurrently.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    vocab: Arc<Vocabulary>,
    /// tables[k-1] maps k-grams to entries.
    tables: Vec<HashMap<Box<[u32]>, Entry>>,
}

/// How discounts are chosen during estimation.
#[derive(Debug, Clone)]
pub enum DiscountSpec {
    /// D1/D2/D3+ from counts-of-counts, per order.
    Estimated,
    /// One fixed discount for every order and count bucket.
    Fixed(f64),
    /// One fixed discount per order (index 0 = unigrams).
    PerOrder(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct KnOptions {
    pub discount: DiscountSpec,
    /// Optional per-order minimum stored count; entries below the threshold
    /// are pruned (contexts of kept entries survive) and back-off weights are
    /// renormalized. Empty = keep everything.
    pub min_count: Vec<u64>,
}

impl Default for KnOptions {
    fn default() -> Self {
        KnOptions {
            discount: DiscountSpec::Estimated,
            min_count: Vec::new(),
        }
    }
}

/// Estimates a modified-KN model from a tokenized corpus.
pub fn estimate_kn(
    corpus: &Corpus,
    vocab: &Arc<Vocabulary>,
    order: usize,
    options: &KnOptions,
) -> Result<NGramModel, NgramError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(NgramError::BadOrder(order));
    }
    if corpus.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }

    // Raw window counts per order, over tag-stripped framed sentences.
    let mut raw: Vec<HashMap<Box<[u32]>, u64>> = vec![HashMap::new(); order];
    let mut stripped = Vec::new();
    for sentence in &corpus.sentences {
        let sent: &[u32] = if sentence.iter().any(|&t| vocab.is_class_tag(t)) {
            stripped.clear();
            stripped.extend(sentence.iter().copied().filter(|&t| !vocab.is_class_tag(t)));
            &stripped
        } else {
            sentence
        };
        for k in 1..=order {
            for window in sent.windows(k) {
                *raw[k - 1].entry(window.into()).or_insert(0) += 1;
            }
        }
    }

    // Stored (meta) counts: raw at the top, continuation below, raw for
    // <s>-initial grams. The <s> unigram is excluded from events.
    let bos = vocab.bos_id();
    let mut stored: Vec<HashMap<Box<[u32]>, u64>> = vec![HashMap::new(); order];
    stored[order - 1] = raw[order - 1].clone();
    if order == 1 {
        stored[0].remove(&[bos][..]);
    }
    for k in (1..order).rev() {
        let table = &mut stored[k - 1];
        for gram in raw[k].keys() {
            let suffix = &gram[1..];
            debug_assert!(suffix[0] != bos);
            *table.entry(suffix.into()).or_insert(0) += 1;
        }
        for (gram, &count) in &raw[k - 1] {
            if gram[0] == bos && gram.len() > 1 {
                table.insert(gram.clone(), count);
            }
        }
    }

    let discounts = resolve_discounts(&options.discount, &stored, order)?;
    let mut model = build_tables(vocab, order, &stored, &discounts)?;

    if !options.min_count.is_empty() {
        prune_min_count(&mut model, &stored, &options.min_count);
        interp::recompute_backoffs(&mut model);
    }
    Ok(model)
}

/// Per-order [D1, D2, D3+] triples.
fn resolve_discounts(
    spec: &DiscountSpec,
    stored: &[HashMap<Box<[u32]>, u64>],
    order: usize,
) -> Result<Vec<[f64; 3]>, NgramError> {
    let mut out = Vec::with_capacity(order);
    for k in 0..order {
        let triple = match spec {
            DiscountSpec::Fixed(d) => [*d; 3],
            DiscountSpec::PerOrder(ds) => {
                let d = ds.get(k).copied().unwrap_or(0.75);
                [d; 3]
            }
            DiscountSpec::Estimated => {
                let mut n = [0u64; 4];
                for &count in stored[k].values() {
                    if (1..=4).contains(&count) {
                        n[count as usize - 1] += 1;
                    }
                }
                estimate_discount_triple(n)
            }
        };
        out.push(triple);
    }
    Ok(out)
}

fn estimate_discount_triple(n: [u64; 4]) -> [f64; 3] {
    if n.iter().any(|&c| c == 0) {
        return [0.75; 3];
    }
    let (n1, n2, n3, n4) = (n[0] as f64, n[1] as f64, n[2] as f64, n[3] as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let ds = [
        1.0 - 2.0 * y * n2 / n1,
        2.0 - 3.0 * y * n3 / n2,
        3.0 - 4.0 * y * n4 / n3,
    ];
    for (i, &d) in ds.iter().enumerate() {
        if !(d > 0.0 && d <= (i + 1) as f64) {
            return [0.75; 3];
        }
    }
    ds
}

fn discount_for(count: u64, d: &[f64; 3]) -> f64 {
    match count {
        0 => 0.0,
        1 => d[0],
        2 => d[1],
        _ => d[2],
    }
}

fn build_tables(
    vocab: &Arc<Vocabulary>,
    order: usize,
    stored: &[HashMap<Box<[u32]>, u64>],
    discounts: &[[f64; 3]],
) -> Result<NGramModel, NgramError> {
    let mut model = NGramModel {
        order,
        vocab: Arc::clone(vocab),
        tables: vec![HashMap::new(); order],
    };
    let num_events = vocab.num_events() as f64;

    // Unigrams: discounted counts interpolated with the uniform distribution.
    let d1 = &discounts[0];
    let total: u64 = stored[0].values().sum();
    let total = total.max(1) as f64;
    let mut reserved = 0.0;
    for &count in stored[0].values() {
        reserved += discount_for(count, d1);
    }
    let gamma = reserved / total;
    for w in vocab.event_ids() {
        let count = stored[0].get(&[w][..]).copied().unwrap_or(0);
        let p = (count as f64 - discount_for(count, d1)).max(0.0) / total + gamma / num_events;
        model.tables[0].insert(
            Box::from(&[w][..]),
            Entry {
                ln_prob: p.ln(),
                ln_backoff: 0.0,
            },
        );
    }
    model.tables[0].insert(
        Box::from(&[vocab.bos_id()][..]),
        Entry {
            ln_prob: LN_FLOOR,
            ln_backoff: 0.0,
        },
    );

    // Higher orders, bottom-up so the interpolation term is available.
    for k in 2..=order {
        let dk = &discounts[k - 1];
        let mut groups: HashMap<&[u32], Vec<(u32, u64)>> = HashMap::new();
        for (gram, &count) in &stored[k - 1] {
            let (context, word) = gram.split_at(k - 1);
            groups.entry(context).or_default().push((word[0], count));
        }
        let mut new_entries = Vec::new();
        let mut backoffs = Vec::new();
        for (context, words) in groups {
            let total: u64 = words.iter().map(|&(_, c)| c).sum();
            let total = total as f64;
            let reserved: f64 = words.iter().map(|&(_, c)| discount_for(c, dk)).sum();
            let gamma = reserved / total;
            for &(word, count) in &words {
                let lower = model.ln_prob_context(&context[1..], word).exp();
                let p = (count as f64 - discount_for(count, dk)).max(0.0) / total + gamma * lower;
                let mut gram = Vec::with_capacity(k);
                gram.extend_from_slice(context);
                gram.push(word);
                new_entries.push((gram.into_boxed_slice(), p.ln()));
            }
            backoffs.push((context.to_vec().into_boxed_slice(), gamma.ln()));
        }
        for (context, ln_backoff) in backoffs {
            match model.tables[k - 2].get_mut(&context) {
                Some(entry) => entry.ln_backoff = ln_backoff,
                None => {
                    return Err(NgramError::ArpaParse {
                        line: 0,
                        reason: format!(
                            "internal: context {context:?} has no entry at order {}",
                            k - 1
                        ),
                    })
                }
            }
        }
        model.tables[k - 1] = new_entries.into_iter().map(|(g, p)| {
            (g, Entry { ln_prob: p, ln_backoff: 0.0 })
        }).collect();
    }
    Ok(model)
}

/// Drops entries below the per-order threshold, keeping any entry that is the
/// context of a kept higher-order entry. Back-off weights must be
/// renormalized afterwards.
fn prune_min_count(
    model: &mut NGramModel,
    stored: &[HashMap<Box<[u32]>, u64>],
    min_count: &[u64],
) {
    let mut required: std::collections::HashSet<Box<[u32]>> = std::collections::HashSet::new();
    for k in (2..=model.order).rev() {
        let threshold = min_count.get(k - 1).copied().unwrap_or(1);
        let table = &mut model.tables[k - 1];
        let counts = &stored[k - 1];
        table.retain(|gram, _| {
            required.contains(gram)
                || counts.get(gram).copied().unwrap_or(0) >= threshold
        });
        let mut next_required = std::collections::HashSet::new();
        for gram in table.keys() {
            next_required.insert(Box::from(&gram[..k - 1]));
        }
        required = next_required;
    }
    // Unigrams always stay: the model must remain closed over the vocabulary.
}

impl NGramModel {
    pub(crate) fn from_parts(
        order: usize,
        vocab: Arc<Vocabulary>,
        tables: Vec<HashMap<Box<[u32]>, Entry>>,
    ) -> Self {
        NGramModel { order, vocab, tables }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn num_entries(&self, order: usize) -> usize {
        self.tables[order - 1].len()
    }

    pub(crate) fn tables(&self) -> &[HashMap<Box<[u32]>, Entry>] {
        &self.tables
    }

    pub(crate) fn tables_mut(&mut self) -> &mut [HashMap<Box<[u32]>, Entry>] {
        &mut self.tables
    }

    /// ln P(word | context) through back-off; context may be any length and
    /// is truncated to the model order.
    pub fn ln_prob_context(&self, context: &[u32], word: u32) -> f64 {
        let start = context.len().saturating_sub(self.order - 1);
        let mut context = &context[start..];
        let mut gram = Vec::with_capacity(self.order);
        let mut acc = 0.0;
        loop {
            gram.clear();
            gram.extend_from_slice(context);
            gram.push(word);
            if let Some(entry) = self.tables[context.len()].get(gram.as_slice()) {
                return acc + entry.ln_prob;
            }
            if context.is_empty() {
                return f64::NEG_INFINITY;
            }
            if let Some(entry) = self.tables[context.len() - 1].get(context) {
                acc += entry.ln_backoff;
            }
            context = &context[1..];
        }
    }

    /// Σ_w P(w | context) expanded through back-off; 1 ± 1e-6 for a
    /// well-formed model.
    pub fn context_normalization(&self, context: &[u32]) -> f64 {
        self.vocab
            .event_ids()
            .map(|w| self.ln_prob_context(context, w).exp())
            .sum()
    }
}

impl SentenceScorer for NGramModel {
    fn score_sentence(&self, sentence: &[u32], _mode: ScoreMode) -> Vec<f64> {
        let mut scores = Vec::with_capacity(sentence.len().saturating_sub(1));
        for i in 1..sentence.len() {
            scores.push(self.ln_prob_context(&sentence[..i], sentence[i]));
        }
        scores
    }
}

impl RescoreLm for NGramModel {
    type State = Vec<u32>;

    fn start(&self) -> Vec<u32> {
        Vec::with_capacity(self.order)
    }

    fn advance(&self, state: &mut Vec<u32>, token: u32) {
        state.push(token);
        if state.len() > self.order.saturating_sub(1) {
            state.remove(0);
        }
    }

    fn word_score(&self, state: &Vec<u32>, token: u32, _mode: ScoreMode) -> f64 {
        self.ln_prob_context(state, token)
    }
}

/// Perplexity of `dev` under the model; shares the event-counting convention
/// of the generic harness.
pub fn perplexity(model: &NGramModel, dev: &Corpus) -> Result<f64, NgramError> {
    if dev.is_empty() {
        return Err(NgramError::EmptyDev);
    }
    eval::perplexity(model, dev, ScoreMode::Normalized).map_err(|e| match e {
        crate::error::EvalError::ZeroProbability { token } => {
            NgramError::ZeroProbability { token }
        }
        _ => NgramError::EmptyCorpus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn fixture(lines: &[&str], size: usize) -> (Arc<Vocabulary>, Corpus) {
        let lines: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        let vocab = Arc::new(build_vocab(&lines, size).unwrap());
        let corpus = Corpus::from_lines("fix", &lines, &vocab);
        (vocab, corpus)
    }

    #[test]
    fn unigram_distribution_sums_to_one() {
        let (vocab, corpus) = fixture(&["a b"], 10);
        let model = estimate_kn(&corpus, &vocab, 1, &KnOptions::default()).unwrap();
        let sum = model.context_normalization(&[]);
        assert!((sum - 1.0).abs() < 1e-9, "unigram sum {sum}");
        // universe is exactly {a, b, </s>, <unk>}
        let named: f64 = ["a", "b"]
            .iter()
            .map(|w| model.ln_prob_context(&[], vocab.lookup(w)).exp())
            .sum::<f64>()
            + model.ln_prob_context(&[], vocab.eos_id()).exp()
            + model.ln_prob_context(&[], vocab.unk_id()).exp();
        assert!((named - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conditional_distributions_renormalize_through_backoff() {
        let (vocab, corpus) = fixture(
            &[
                "the cat sat on the mat",
                "the dog sat on the rug",
                "a cat and a dog",
                "the cat saw the dog",
                "dogs and cats",
            ],
            40,
        );
        for order in 1..=4 {
            let model = estimate_kn(&corpus, &vocab, order, &KnOptions::default()).unwrap();
            let contexts: Vec<Vec<u32>> = vec![
                vec![],
                vec![vocab.lookup("the")],
                vec![vocab.bos_id()],
                vec![vocab.lookup("zzz-unseen")], // maps to <unk>
                vec![vocab.lookup("the"), vocab.lookup("cat")],
                vec![vocab.bos_id(), vocab.lookup("the"), vocab.lookup("cat")],
            ];
            for context in contexts {
                let sum = model.context_normalization(&context);
                assert!(
                    (sum - 1.0).abs() < 1e-6,
                    "order {order} context {context:?} sums to {sum}"
                );
            }
        }
    }

    #[test]
    fn order_larger_than_longest_sentence_is_valid() {
        let (vocab, corpus) = fixture(&["a b", "b"], 10);
        let model = estimate_kn(&corpus, &vocab, 5, &KnOptions::default()).unwrap();
        assert!((model.context_normalization(&[vocab.lookup("a")]) - 1.0).abs() < 1e-6);
        let ppl = perplexity(&model, &corpus).unwrap();
        assert!(ppl.is_finite() && ppl > 1.0);
    }

    #[test]
    fn empty_corpus_is_error() {
        let (vocab, _) = fixture(&["a"], 4);
        let empty = Corpus {
            name: "empty".into(),
            sentences: vec![],
            word_count: 0,
        };
        assert!(matches!(
            estimate_kn(&empty, &vocab, 2, &KnOptions::default()),
            Err(NgramError::EmptyCorpus)
        ));
    }

    #[test]
    fn bad_order_is_error() {
        let (vocab, corpus) = fixture(&["a"], 4);
        assert!(matches!(
            estimate_kn(&corpus, &vocab, 0, &KnOptions::default()),
            Err(NgramError::BadOrder(0))
        ));
        assert!(matches!(
            estimate_kn(&corpus, &vocab, 6, &KnOptions::default()),
            Err(NgramError::BadOrder(6))
        ));
    }

    #[test]
    fn estimation_is_deterministic() {
        let (vocab, corpus) = fixture(&["a b c", "b c a", "c a b"], 10);
        let a = estimate_kn(&corpus, &vocab, 3, &KnOptions::default()).unwrap();
        let b = estimate_kn(&corpus, &vocab, 3, &KnOptions::default()).unwrap();
        for k in 1..=3 {
            assert_eq!(a.tables[k - 1].len(), b.tables[k - 1].len());
            for (gram, entry) in &a.tables[k - 1] {
                let other = b.tables[k - 1].get(gram).unwrap();
                assert_eq!(entry.ln_prob.to_bits(), other.ln_prob.to_bits());
                assert_eq!(entry.ln_backoff.to_bits(), other.ln_backoff.to_bits());
            }
        }
    }

    #[test]
    fn class_tags_are_stripped_before_counting() {
        let lines_plain = ["call ada now", "call bob now"];
        let lines_tagged = ["call <class> ada </class> now", "call <class> bob </class> now"];
        let all: Vec<String> = lines_plain.iter().map(|s| s.to_string()).collect();
        let vocab = Arc::new(build_vocab(&all, 10).unwrap());
        let plain = Corpus::from_lines("p", &all, &vocab);
        let tagged_lines: Vec<String> = lines_tagged.iter().map(|s| s.to_string()).collect();
        let tagged = Corpus::from_lines("t", &tagged_lines, &vocab);
        let a = estimate_kn(&plain, &vocab, 2, &KnOptions::default()).unwrap();
        let b = estimate_kn(&tagged, &vocab, 2, &KnOptions::default()).unwrap();
        for (gram, entry) in &a.tables[1] {
            let other = b.tables[1].get(gram).unwrap();
            assert_eq!(entry.ln_prob.to_bits(), other.ln_prob.to_bits());
        }
    }

    #[test]
    fn perplexity_of_uniform_model_is_vocab_size() {
        // Hand-built uniform unigram over the 64-event universe.
        let lines: Vec<String> = (0..61).map(|i| format!("w{i:02}")).collect();
        let vocab = Arc::new(build_vocab(&lines, 61).unwrap());
        assert_eq!(vocab.num_events(), 64); // 61 words + unk + </s> + ... check below
        let p = (1.0 / 64.0f64).ln();
        let mut table = HashMap::new();
        for w in vocab.event_ids() {
            table.insert(Box::from(&[w][..]), Entry { ln_prob: p, ln_backoff: 0.0 });
        }
        table.insert(
            Box::from(&[vocab.bos_id()][..]),
            Entry { ln_prob: LN_FLOOR, ln_backoff: 0.0 },
        );
        let model = NGramModel::from_parts(1, Arc::clone(&vocab), vec![table]);
        let dev = Corpus::from_lines("dev", &lines, &vocab);
        let ppl = perplexity(&model, &dev).unwrap();
        assert!((ppl - 64.0).abs() < 1e-9, "ppl {ppl}");
    }

    #[test]
    fn perplexity_matches_brute_force_token_sum() {
        let (vocab, corpus) = fixture(
            &["a b a c", "b a", "c c a b", "a", "b c"],
            10,
        );
        let model = estimate_kn(&corpus, &vocab, 2, &KnOptions::default()).unwrap();
        let dev_lines: Vec<String> = vec!["a c b".into(), "b b".into()];
        let dev = Corpus::from_lines("dev", &dev_lines, &vocab);

        let mut total = 0.0;
        let mut events = 0;
        for sentence in &dev.sentences {
            for i in 1..sentence.len() {
                total += model.ln_prob_context(&sentence[..i], sentence[i]);
                events += 1;
            }
        }
        let expect = (-total / events as f64).exp();
        let got = perplexity(&model, &dev).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn min_count_pruning_keeps_model_normalized() {
        let (vocab, corpus) = fixture(
            &[
                "a b c a b",
                "b c a",
                "a b c",
                "c a b c",
                "b a c b a",
            ],
            10,
        );
        let options = KnOptions {
            discount: DiscountSpec::Estimated,
            min_count: vec![1, 2, 2],
        };
        let model = estimate_kn(&corpus, &vocab, 3, &options).unwrap();
        let full = estimate_kn(&corpus, &vocab, 3, &KnOptions::default()).unwrap();
        assert!(model.num_entries(3) < full.num_entries(3));
        for context in [
            vec![],
            vec![vocab.lookup("a")],
            vec![vocab.lookup("a"), vocab.lookup("b")],
            vec![vocab.lookup("c"), vocab.lookup("a")],
        ] {
            let sum = model.context_normalization(&context);
            assert!((sum - 1.0).abs() < 1e-6, "context {context:?} sums to {sum}");
        }
    }
}

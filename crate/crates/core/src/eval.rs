//! ASR metrics: Levenshtein alignment, WER, Entity WER, latency percentiles
//! and a perplexity harness shared by every scorer.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::error::EvalError;
use crate::score::{ScoreMode, SentenceScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Match,
    Substitution,
    Deletion,
    Insertion,
}

/// One edit step of a minimal ref -> hyp alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentOp {
    pub kind: OpKind,
    pub ref_index: Option<usize>,
    pub hyp_index: Option<usize>,
}

/// Minimal-cost alignment with unit costs. When several alignments are
/// minimal the backtrace prefers match > substitution > deletion > insertion,
/// which pins down one deterministic answer (entity attribution depends on
/// it).
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<AlignmentOp> {
    let n = reference.len();
    let m = hypothesis.len();
    let mut dist = vec![vec![0u32; m + 1]; n + 1];
    for i in 0..=n {
        dist[i][0] = i as u32;
    }
    for j in 0..=m {
        dist[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dist[i - 1][j - 1] + u32::from(reference[i - 1] != hypothesis[j - 1]);
            let del = dist[i - 1][j] + 1;
            let ins = dist[i][j - 1] + 1;
            dist[i][j] = sub.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i][j];
        if i > 0 && j > 0 && reference[i - 1] == hypothesis[j - 1] && dist[i - 1][j - 1] == here {
            ops.push(AlignmentOp {
                kind: OpKind::Match,
                ref_index: Some(i - 1),
                hyp_index: Some(j - 1),
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && dist[i - 1][j - 1] + 1 == here {
            ops.push(AlignmentOp {
                kind: OpKind::Substitution,
                ref_index: Some(i - 1),
                hyp_index: Some(j - 1),
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && dist[i - 1][j] + 1 == here {
            ops.push(AlignmentOp {
                kind: OpKind::Deletion,
                ref_index: Some(i - 1),
                hyp_index: None,
            });
            i -= 1;
        } else {
            ops.push(AlignmentOp {
                kind: OpKind::Insertion,
                ref_index: None,
                hyp_index: Some(j - 1),
            });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Corpus-pooled word error rate with per-kind counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerReport {
    pub wer: f64,
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    pub matches: u64,
    pub ref_words: u64,
}

impl WerReport {
    pub fn errors(&self) -> u64 {
        self.substitutions + self.deletions + self.insertions
    }
}

pub fn wer(refs: &[Vec<String>], hyps: &[Vec<String>]) -> Result<WerReport, EvalError> {
    if refs.is_empty() || refs.iter().all(|r| r.is_empty()) {
        return Err(EvalError::EmptyReference);
    }
    if refs.len() != hyps.len() {
        return Err(EvalError::SizeMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let mut report = WerReport {
        wer: 0.0,
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        matches: 0,
        ref_words: 0,
    };
    for (r, h) in refs.iter().zip(hyps) {
        report.ref_words += r.len() as u64;
        for op in align(r, h) {
            match op.kind {
                OpKind::Match => report.matches += 1,
                OpKind::Substitution => report.substitutions += 1,
                OpKind::Deletion => report.deletions += 1,
                OpKind::Insertion => report.insertions += 1,
            }
        }
    }
    report.wer = report.errors() as f64 / report.ref_words as f64;
    Ok(report)
}

/// Relative word error rate reduction of system `b` over system `a`.
pub fn relative_werr(wer_a: f64, wer_b: f64) -> f64 {
    (wer_a - wer_b) / wer_a
}

/// A reference sentence whose words carry entity tags from an external NER
/// pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub is_entity: Vec<bool>,
}

impl TaggedSentence {
    /// Parses inline `[ent]...[/ent]` markers; everything between a pair of
    /// markers is tagged. Markers may be glued to words.
    pub fn parse(line: &str) -> Self {
        let spaced = line.replace("[ent]", " [ent] ").replace("[/ent]", " [/ent] ");
        let mut words = Vec::new();
        let mut is_entity = Vec::new();
        let mut inside = false;
        for token in spaced.split_whitespace() {
            match token {
                "[ent]" => inside = true,
                "[/ent]" => inside = false,
                word => {
                    words.push(word.to_string());
                    is_entity.push(inside);
                }
            }
        }
        TaggedSentence { words, is_entity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntityWerReport {
    pub entity_wer: f64,
    pub substitutions: u64,
    pub deletions: u64,
    pub tagged_ref_words: u64,
}

/// Entity WER: substitutions and deletions landing on tagged reference
/// words, divided by the number of tagged reference words. Insertions are
/// excluded because they cannot be attributed to the entity reliably.
pub fn entity_wer(
    refs: &[TaggedSentence],
    hyps: &[Vec<String>],
) -> Result<EntityWerReport, EvalError> {
    if refs.len() != hyps.len() {
        return Err(EvalError::SizeMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let mut report = EntityWerReport {
        entity_wer: 0.0,
        substitutions: 0,
        deletions: 0,
        tagged_ref_words: 0,
    };
    for (r, h) in refs.iter().zip(hyps) {
        report.tagged_ref_words += r.is_entity.iter().filter(|&&t| t).count() as u64;
        for op in align(&r.words, h) {
            let tagged = op.ref_index.map_or(false, |i| r.is_entity[i]);
            if !tagged {
                continue;
            }
            match op.kind {
                OpKind::Substitution => report.substitutions += 1,
                OpKind::Deletion => report.deletions += 1,
                _ => {}
            }
        }
    }
    if report.tagged_ref_words == 0 {
        return Err(EvalError::NoEntities);
    }
    report.entity_wer =
        (report.substitutions + report.deletions) as f64 / report.tagged_ref_words as f64;
    Ok(report)
}

/// Nearest-rank percentiles: the ceil(p/100 * n)-th order statistic.
pub fn latency_percentiles(
    durations_ms: &[f64],
    percentiles: &[f64],
) -> Result<Vec<(f64, f64)>, EvalError> {
    if durations_ms.is_empty() {
        return Err(EvalError::EmptyLatencies);
    }
    let mut sorted = durations_ms.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut out = Vec::with_capacity(percentiles.len());
    for &p in percentiles {
        if !(0.0..=100.0).contains(&p) || p == 0.0 {
            return Err(EvalError::BadPercentile(p));
        }
        let rank = ((p / 100.0) * n as f64).ceil() as usize;
        out.push((p, sorted[rank.clamp(1, n) - 1]));
    }
    Ok(out)
}

/// Perplexity of a corpus under any sentence scorer: exp of the mean negative
/// log-probability per event, `</s>` included, `<s>` excluded.
pub fn perplexity<S: SentenceScorer + ?Sized>(
    scorer: &S,
    dev: &Corpus,
    mode: ScoreMode,
) -> Result<f64, EvalError> {
    if dev.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let mut total = 0.0;
    let mut events = 0usize;
    for sentence in &dev.sentences {
        let scores = scorer.score_sentence(sentence, mode);
        debug_assert_eq!(scores.len(), sentence.len() - 1);
        for (score, &token) in scores.iter().zip(&sentence[1..]) {
            if !score.is_finite() {
                return Err(EvalError::ZeroProbability {
                    token: format!("id {token}"),
                });
            }
            total += score;
            events += 1;
        }
    }
    Ok((-total / events as f64).exp())
}

/// A rendered metric result: value plus supporting counts/percentiles.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub counts: BTreeMap<String, u64>,
    pub percentiles: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn new(metric: &str, value: f64) -> Self {
        EvalReport {
            metric: metric.to_string(),
            value,
            counts: BTreeMap::new(),
            percentiles: Vec::new(),
        }
    }

    pub fn with_count(mut self, key: &str, value: u64) -> Self {
        self.counts.insert(key.to_string(), value);
        self
    }

    pub fn with_percentiles(mut self, ps: Vec<(f64, f64)>) -> Self {
        self.percentiles = ps;
        self
    }

    /// Tab-separated rendering, one line per field.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\t{:.6}\n", self.metric, self.value);
        for (key, value) in &self.counts {
            out.push_str(&format!("{key}\t{value}\n"));
        }
        for (p, v) in &self.percentiles {
            out.push_str(&format!("p{p:.0}\t{v:.3}\n"));
        }
        out
    }
}

/// Pearson chi-square statistic for observed counts against expected
/// proportions; the sampler tests compare it to the critical value.
pub fn chi_square_statistic(observed: &[u64], expected_proportion: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(expected_proportion)
        .map(|(&obs, &p)| {
            let expect = p * total as f64;
            let diff = obs as f64 - expect;
            diff * diff / expect
        })
        .sum()
}

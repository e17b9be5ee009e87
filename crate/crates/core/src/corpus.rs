//! Text ingestion: word vocabulary construction, tokenization and corpus
//! containers.
//!
//! Text is expected to arrive pre-normalized, one sentence per line; a token
//! is whatever whitespace splitting yields. The vocabulary is closed: every
//! out-of-vocabulary word maps to `<unk>`, so tokenization is total.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::CorpusError;

/// Reserved token strings, in id order.
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const CLASS_OPEN: &str = "<class>";
pub const CLASS_CLOSE: &str = "</class>";

const SPECIALS: [&str; 5] = [UNK, BOS, EOS, CLASS_OPEN, CLASS_CLOSE];

/// A closed word list with dense ids `0..len` and reserved specials.
///
/// Ids are bijective with the stored word strings; `lookup` never fails
/// because unknown words resolve to the `<unk>` id.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit word list. Reserved specials are
    /// prepended if missing; duplicates are rejected.
    pub fn from_words<I, S>(words: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<String> = Vec::new();
        let mut index = HashMap::new();
        for special in SPECIALS {
            index.insert(special.to_string(), list.len() as u32);
            list.push(special.to_string());
        }
        for word in words {
            let word = word.into();
            if index.contains_key(&word) {
                if SPECIALS.contains(&word.as_str()) {
                    continue; // specials are already present by construction
                }
                return Err(CorpusError::DuplicateWord(word));
            }
            index.insert(word.clone(), list.len() as u32);
            list.push(word);
        }
        Ok(Vocabulary { words: list, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false // specials are always present
    }

    /// Id of `word`, or the `<unk>` id when the word is not in the list.
    pub fn lookup(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(self.unk_id())
    }

    /// Id of `word` only if it is actually in the list (no unk fallback).
    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// The word string for `id`. Panics on out-of-range ids, which cannot be
    /// produced by `lookup`.
    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn unk_id(&self) -> u32 {
        0
    }

    pub fn bos_id(&self) -> u32 {
        1
    }

    pub fn eos_id(&self) -> u32 {
        2
    }

    pub fn class_open_id(&self) -> u32 {
        3
    }

    pub fn class_close_id(&self) -> u32 {
        4
    }

    pub fn is_class_tag(&self, id: u32) -> bool {
        id == self.class_open_id() || id == self.class_close_id()
    }

    /// Ids that can occur as predicted events in a language model: everything
    /// except `<s>` and the class-tag markers, which are framing/annotation.
    pub fn event_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len() as u32).filter(|&id| id != self.bos_id() && !self.is_class_tag(id))
    }

    pub fn num_events(&self) -> usize {
        self.len() - 3
    }

    /// One word per line, line number = id.
    pub fn write_file(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for word in &self.words {
            writeln!(out, "{word}")?;
        }
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        for special in SPECIALS {
            match lines.next() {
                Some(line) if line == special => {}
                other => {
                    return Err(CorpusError::BadVocabFile(format!(
                        "expected reserved word {special:?}, found {other:?}"
                    )))
                }
            }
        }
        Vocabulary::from_words(lines.map(str::to_owned))
    }
}

/// Count word frequencies and keep the `size_limit` most frequent ones.
/// Ties break lexicographically on the word string so the result is
/// deterministic across platforms. Reserved token strings occurring in the
/// text are ignored (they are always present anyway).
pub fn build_vocab(lines: &[String], size_limit: usize) -> Result<Vocabulary, CorpusError> {
    if size_limit == 0 {
        return Err(CorpusError::BadSizeLimit);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for line in lines {
        for word in line.split_whitespace() {
            if SPECIALS.contains(&word) {
                continue;
            }
            *counts.entry(word).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(size_limit);
    Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w.to_owned()))
}

/// Maps a raw sentence to ids, framing it with `<s>`/`</s>`. Total on any
/// string: unknown words become `<unk>`.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::with_capacity(text.len() / 4 + 2);
    ids.push(vocab.bos_id());
    for word in text.split_whitespace() {
        ids.push(vocab.lookup(word));
    }
    ids.push(vocab.eos_id());
    ids
}

/// A tokenized corpus: one id sequence per sentence, each framed with
/// `<s>`/`</s>`. `word_count` counts every token except `<s>` (so `</s>`
/// counts as one predicted event per sentence, matching the perplexity
/// convention).
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<Vec<u32>>,
    pub word_count: usize,
}

impl Corpus {
    pub fn from_lines(name: &str, lines: &[String], vocab: &Vocabulary) -> Self {
        let sentences: Vec<Vec<u32>> = lines.iter().map(|l| tokenize(l, vocab)).collect();
        let word_count = sentences.iter().map(|s| s.len() - 1).sum();
        Corpus {
            name: name.to_string(),
            sentences,
            word_count,
        }
    }

    pub fn from_file(name: &str, path: &Path, vocab: &Vocabulary) -> Result<Self, CorpusError> {
        let lines = read_lines(path)?;
        Ok(Corpus::from_lines(name, &lines, vocab))
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn shared(self) -> Arc<Corpus> {
        Arc::new(self)
    }
}

/// Reads a one-sentence-per-line UTF-8 text file.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(fs::File::create(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?);
    for line in lines {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

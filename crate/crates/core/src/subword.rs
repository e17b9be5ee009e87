//! Byte-pair-merge subword codec.
//!
//! The codec operates on whole sentence strings: the base alphabet is every
//! character seen in training (including spaces), so merges may span word
//! boundaries and `decode(encode(s)) == s` holds exactly for any string over
//! that alphabet. Merge learning is greedy highest-frequency pair selection
//! with lexicographic tie-breaking, which makes training deterministic.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{CorpusError, SubwordError};

/// A learned subword inventory: base characters plus one symbol per merge,
/// in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordCodec {
    /// Symbol strings, id = position. The first entries are single
    /// characters (sorted), followed by merge products in learned order.
    symbols: Vec<String>,
    symbol_index: HashMap<String, u32>,
    char_ids: HashMap<char, u32>,
    /// (left id, right id, merged id), in application order.
    merges: Vec<(u32, u32, u32)>,
    /// Merge priority keyed by pair, for the encoder.
    merge_rank: HashMap<(u32, u32), (u32, u32)>,
}

impl SubwordCodec {
    /// Learns `num_merges` merges from one-sentence-per-line text.
    pub fn train(lines: &[String], num_merges: usize) -> Result<Self, SubwordError> {
        let mut alphabet: Vec<char> = {
            let set: HashSet<char> = lines.iter().flat_map(|l| l.chars()).collect();
            let mut v: Vec<char> = set.into_iter().collect();
            v.sort_unstable();
            v
        };
        if alphabet.is_empty() {
            return Err(SubwordError::EmptyCorpus);
        }
        alphabet.dedup();

        let mut codec = SubwordCodec {
            symbols: Vec::new(),
            symbol_index: HashMap::new(),
            char_ids: HashMap::new(),
            merges: Vec::new(),
            merge_rank: HashMap::new(),
        };
        for ch in alphabet {
            let id = codec.push_symbol(ch.to_string());
            codec.char_ids.insert(ch, id);
        }

        // Working sequences plus exact pair occurrence counts, updated
        // incrementally as merges are applied.
        let mut seqs: Vec<Vec<u32>> = lines
            .iter()
            .filter(|l| !l.is_empty())
            .map(|l| l.chars().map(|c| codec.char_ids[&c]).collect())
            .collect();
        let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
        let mut pair_seqs: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
        for (si, seq) in seqs.iter().enumerate() {
            for pair in seq.windows(2) {
                let key = (pair[0], pair[1]);
                *pair_counts.entry(key).or_insert(0) += 1;
                pair_seqs.entry(key).or_default().insert(si);
            }
        }

        for _ in 0..num_merges {
            let best = pair_counts
                .iter()
                .filter(|&(_, &c)| c > 0)
                .max_by(|a, b| {
                    a.1.cmp(b.1).then_with(|| {
                        // lower pair string wins on count ties, so compare reversed
                        let ka = (&codec.symbols[a.0 .0 as usize], &codec.symbols[a.0 .1 as usize]);
                        let kb = (&codec.symbols[b.0 .0 as usize], &codec.symbols[b.0 .1 as usize]);
                        kb.cmp(&ka)
                    })
                })
                .map(|(&k, _)| k);
            let Some((left, right)) = best else { break };

            let merged = format!(
                "{}{}",
                codec.symbols[left as usize], codec.symbols[right as usize]
            );
            let new_id = codec.push_symbol(merged);
            codec.merge_rank
                .insert((left, right), (codec.merges.len() as u32, new_id));
            codec.merges.push((left, right, new_id));

            let affected: Vec<usize> = pair_seqs
                .remove(&(left, right))
                .map(|s| s.into_iter().collect())
                .unwrap_or_default();
            for si in affected {
                let old = std::mem::take(&mut seqs[si]);
                for pair in old.windows(2) {
                    *pair_counts.entry((pair[0], pair[1])).or_insert(0) -= 1;
                }
                let new = apply_merge(&old, left, right, new_id);
                for pair in new.windows(2) {
                    let key = (pair[0], pair[1]);
                    *pair_counts.entry(key).or_insert(0) += 1;
                    pair_seqs.entry(key).or_default().insert(si);
                }
                seqs[si] = new;
            }
        }
        Ok(codec)
    }

    fn push_symbol(&mut self, s: String) -> u32 {
        let id = self.symbols.len() as u32;
        self.symbol_index.insert(s.clone(), id);
        self.symbols.push(s);
        id
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    /// Encodes a string to subword ids. Repeatedly applies the applicable
    /// merge with the lowest rank, which reproduces application in learned
    /// order. Errors on characters outside the training alphabet.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>, SubwordError> {
        let mut seq: Vec<u32> = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let id = self
                .char_ids
                .get(&ch)
                .copied()
                .ok_or(SubwordError::UnknownChar(ch))?;
            seq.push(id);
        }
        loop {
            let mut best: Option<((u32, u32), (u32, u32))> = None;
            for pair in seq.windows(2) {
                if let Some(&rank) = self.merge_rank.get(&(pair[0], pair[1])) {
                    if best.map_or(true, |(_, r)| rank.0 < r.0) {
                        best = Some(((pair[0], pair[1]), rank));
                    }
                }
            }
            match best {
                Some(((left, right), (_, new_id))) => {
                    seq = apply_merge(&seq, left, right, new_id);
                }
                None => return Ok(seq),
            }
        }
    }

    /// Concatenates symbol strings back to text.
    pub fn decode(&self, ids: &[u32]) -> Result<String, SubwordError> {
        let mut out = String::new();
        for &id in ids {
            out.push_str(
                self.symbols
                    .get(id as usize)
                    .ok_or(SubwordError::UnknownId(id))?,
            );
        }
        Ok(out)
    }

    /// The codec's symbol inventory as an NLM vocabulary (reserved specials
    /// followed by all symbols in id order).
    pub fn vocabulary(&self) -> Result<Vocabulary, CorpusError> {
        Vocabulary::from_words(self.symbols.iter().cloned())
    }

    /// Encodes a sentence to vocabulary ids framed with `<s>`/`</s>`, for
    /// building subword NLM training corpora.
    pub fn tokenize(&self, text: &str, vocab: &Vocabulary) -> Result<Vec<u32>, SubwordError> {
        let sub = self.encode(text)?;
        let mut ids = Vec::with_capacity(sub.len() + 2);
        ids.push(vocab.bos_id());
        for id in sub {
            ids.push(vocab.lookup(&self.symbols[id as usize]));
        }
        ids.push(vocab.eos_id());
        Ok(ids)
    }

    /// One merge pair per line, tab-separated, in application order. Symbols
    /// are escaped (`\s` space, `\t` tab, `\\` backslash) so space-bearing
    /// merges stay one per line. The leading `#alphabet` line carries the
    /// base character set.
    pub fn write_file(&self, path: &Path) -> Result<(), SubwordError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        let alphabet: String = self
            .symbols
            .iter()
            .take(self.char_ids.len())
            .map(|s| escape(s))
            .collect();
        writeln!(out, "#alphabet\t{alphabet}")?;
        for &(left, right, _) in &self.merges {
            writeln!(
                out,
                "{}\t{}",
                escape(&self.symbols[left as usize]),
                escape(&self.symbols[right as usize])
            )?;
        }
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, SubwordError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(SubwordError::BadCodecFile {
            line: 1,
            reason: "missing #alphabet header".into(),
        })?;
        let alphabet = header
            .strip_prefix("#alphabet\t")
            .ok_or(SubwordError::BadCodecFile {
                line: 1,
                reason: "missing #alphabet header".into(),
            })?;
        let mut codec = SubwordCodec {
            symbols: Vec::new(),
            symbol_index: HashMap::new(),
            char_ids: HashMap::new(),
            merges: Vec::new(),
            merge_rank: HashMap::new(),
        };
        for ch in unescape(alphabet, 1)?.chars() {
            let id = codec.push_symbol(ch.to_string());
            codec.char_ids.insert(ch, id);
        }
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (l, r) = line.split_once('\t').ok_or(SubwordError::BadCodecFile {
                line: lineno,
                reason: "expected two tab-separated symbols".into(),
            })?;
            let (l, r) = (unescape(l, lineno)?, unescape(r, lineno)?);
            let (left, right) = match (codec.symbol_index.get(&l), codec.symbol_index.get(&r)) {
                (Some(&a), Some(&b)) => (a, b),
                _ => {
                    return Err(SubwordError::BadCodecFile {
                        line: lineno,
                        reason: format!("merge references unknown symbol ({l:?}, {r:?})"),
                    })
                }
            };
            let merged = format!("{l}{r}");
            let new_id = codec.push_symbol(merged);
            codec
                .merge_rank
                .insert((left, right), (codec.merges.len() as u32, new_id));
            codec.merges.push((left, right, new_id));
        }
        Ok(codec)
    }
}

fn apply_merge(seq: &[u32], left: u32, right: u32, new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
            out.push(new_id);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            _ => out.push(ch),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String, SubwordError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            other => {
                return Err(SubwordError::BadCodecFile {
                    line,
                    reason: format!("bad escape sequence \\{other:?}"),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lines(text: &[&str]) -> Vec<String> {
        text.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // "aaab": pairs (a,a) twice (overlapping), (a,b) once.
        let codec = SubwordCodec::train(&lines(&["aaab"]), 1).unwrap();
        assert_eq!(codec.num_merges(), 1);
        let (l, r, m) = codec.merges[0];
        assert_eq!(codec.symbol(l), Some("a"));
        assert_eq!(codec.symbol(r), Some("a"));
        assert_eq!(codec.symbol(m), Some("aa"));
    }

    #[test]
    fn zero_merges_is_character_codec() {
        let codec = SubwordCodec::train(&lines(&["ab ba"]), 0).unwrap();
        let ids = codec.encode("ab").unwrap();
        assert_eq!(ids.len(), 2);
        assert_eq!(codec.decode(&ids).unwrap(), "ab");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            SubwordCodec::train(&[], 5),
            Err(SubwordError::EmptyCorpus)
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        // "ab" and "ba" each occur once; ("a","b") < ("b","a").
        let codec = SubwordCodec::train(&lines(&["ab", "ba"]), 1).unwrap();
        let (l, r, _) = codec.merges[0];
        assert_eq!((codec.symbol(l).unwrap(), codec.symbol(r).unwrap()), ("a", "b"));
    }

    #[test]
    fn training_is_deterministic() {
        let data = lines(&["the cat sat", "the bat sat", "a cat and a bat"]);
        let a = SubwordCodec::train(&data, 20).unwrap();
        let b = SubwordCodec::train(&data, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_errors_on_unknown_char() {
        let codec = SubwordCodec::train(&lines(&["abc"]), 0).unwrap();
        assert!(matches!(
            codec.encode("abz"),
            Err(SubwordError::UnknownChar('z'))
        ));
    }

    #[test]
    fn decode_errors_on_unknown_id() {
        let codec = SubwordCodec::train(&lines(&["abc"]), 0).unwrap();
        assert!(matches!(
            codec.decode(&[999]),
            Err(SubwordError::UnknownId(999))
        ));
    }

    #[test]
    fn codec_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codec.txt");
        let codec =
            SubwordCodec::train(&lines(&["spaced words here", "more spaced words"]), 30).unwrap();
        codec.write_file(&path).unwrap();
        let back = SubwordCodec::read_file(&path).unwrap();
        assert_eq!(codec, back);
    }

    #[test]
    fn held_out_round_trip() {
        let codec = SubwordCodec::train(&lines(&["abc abd", "cab bad"]), 10).unwrap();
        for text in ["dcba", "a b c d", "ddd ccc"] {
            let ids = codec.encode(text).unwrap();
            assert_eq!(codec.decode(&ids).unwrap(), text);
        }
    }

    proptest! {
        #[test]
        fn round_trip_identity(s in "[abcd ]{0,40}") {
            let codec = SubwordCodec::train(
                &lines(&["abcd dcba abab", "c a b d  ab"]), 12).unwrap();
            let ids = codec.encode(&s).unwrap();
            prop_assert_eq!(codec.decode(&ids).unwrap(), s.clone());
            // merges only ever shorten
            prop_assert!(ids.len() <= s.chars().count());
        }
    }
}

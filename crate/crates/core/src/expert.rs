//! Two-thumb expert typing-time model.
//!
//! Every word is preceded by a Space typed with the left thumb. Each letter
//! costs its full `t_key` when typed with the same thumb as the previous
//! key, and half of it when the thumbs alternate. The word's own trailing
//! Space (left thumb) follows the same rule.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{TimingError, TimingTable};
use crate::exec::Exec;
use crate::layout::Layout;
use crate::lexicon::{parse_counts, LexiconError};
use crate::metrics::wpm_aggregate;
use crate::types::{KeyId, Thumb};

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("{0:?} contains a character outside a-z")]
    BadWord(String),
    #[error("{0} has no thumb assignment")]
    NoThumb(KeyId),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Corpus(#[from] LexiconError),
}

/// Thumb that types the Space before and after every word.
pub const SPACE_THUMB: Thumb = Thumb::Left;

fn step(timing: &TimingTable, key: KeyId, thumb: Thumb, prev: Thumb) -> Result<f64, ExpertError> {
    let t = timing.require(key, thumb)?;
    Ok(if thumb == prev { t } else { t / 2.0 })
}

/// Time in seconds to type `word` followed by a Space, starting right after
/// a Space.
pub fn word_time(word: &str, timing: &TimingTable, layout: &Layout) -> Result<f64, ExpertError> {
    let mut prev = SPACE_THUMB;
    let mut total = 0.0;
    for c in word.chars() {
        let key = KeyId::letter(c).ok_or_else(|| ExpertError::BadWord(word.to_string()))?;
        let thumb = layout.thumb_for(key).ok_or(ExpertError::NoThumb(key))?;
        total += step(timing, key, thumb, prev)?;
        prev = thumb;
    }
    total += step(timing, KeyId::Space, SPACE_THUMB, prev)?;
    Ok(total / 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_words: u64,
    /// Letters plus one Space per word token.
    pub total_chars: u64,
    pub total_seconds: f64,
    pub predicted_wpm: f64,
}

impl CorpusStats {
    pub fn from_totals(total_words: u64, total_chars: u64, total_seconds: f64) -> Self {
        Self {
            total_words,
            total_chars,
            total_seconds,
            predicted_wpm: wpm_aggregate(total_chars as f64, total_seconds).unwrap_or(0.0),
        }
    }
}

/// Frequency-weighted typing time over a corpus of `(word, count)` pairs.
/// Per-word times may be computed in parallel; the sum is always taken in
/// corpus order.
pub fn corpus_prediction(
    corpus: &[(String, u64)],
    timing: &TimingTable,
    layout: &Layout,
    exec: Exec,
) -> Result<CorpusStats, ExpertError> {
    if corpus.is_empty() {
        return Err(ExpertError::EmptyCorpus);
    }
    let times = exec.map_slice(corpus, |(w, _)| word_time(w, timing, layout));
    let mut words = 0u64;
    let mut chars = 0u64;
    let mut seconds = 0.0;
    for ((w, count), t) in corpus.iter().zip(times) {
        let t = t?;
        words += count;
        chars += count * (w.chars().count() as u64 + 1);
        seconds += *count as f64 * t;
    }
    Ok(CorpusStats::from_totals(words, chars, seconds))
}

/// Reads a `word<TAB>count` corpus file. Words outside a–z are rejected by
/// [`corpus_prediction`], not here.
pub fn load_corpus<R: BufRead>(reader: R) -> Result<Vec<(String, u64)>, ExpertError> {
    Ok(parse_counts(reader)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> TimingTable {
        let mut t = TimingTable::new();
        for (i, key) in KeyId::letters().chain([KeyId::Space]).enumerate() {
            for thumb in Thumb::BOTH {
                t.insert(key, thumb, 300.0 + 7.0 * i as f64 + if thumb == Thumb::Left { 0.0 } else { 3.0 });
            }
        }
        t
    }

    fn key(c: char) -> KeyId {
        KeyId::letter(c).unwrap()
    }

    #[test]
    fn single_left_letter() {
        let t = table();
        let l = Layout::qwerty();
        let want = t.get(key('a'), Thumb::Left).unwrap() + t.get(KeyId::Space, Thumb::Left).unwrap();
        assert!((word_time("a", &t, &l).unwrap() - want / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn ok_trace() {
        let t = table();
        let l = Layout::qwerty();
        let want = t.get(key('o'), Thumb::Right).unwrap() / 2.0
            + t.get(key('k'), Thumb::Right).unwrap()
            + t.get(KeyId::Space, Thumb::Left).unwrap() / 2.0;
        assert!((word_time("ok", &t, &l).unwrap() - want / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn alternation_is_cheaper() {
        let t = TimingTable::uniform(400.0);
        let l = Layout::qwerty();
        // "ahah" alternates every letter, "asdf" never leaves the left thumb.
        assert!(word_time("ahah", &t, &l).unwrap() < word_time("asdf", &t, &l).unwrap());
    }

    #[test]
    fn one_word_corpus() {
        let t = TimingTable::uniform(500.0);
        let s = corpus_prediction(&[("a".to_string(), 1)], &t, &Layout::qwerty(), Exec::Sequential).unwrap();
        assert_eq!(s.total_seconds, 1.0);
        assert_eq!(s.total_chars, 2);
        assert!((s.predicted_wpm - 24.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_figure() {
        let s = CorpusStats::from_totals(17_823_575, 103_183_327, 39_572_285.0);
        assert!((s.predicted_wpm - 31.3).abs() < 0.05);
    }

    #[test]
    fn errors() {
        let l = Layout::qwerty();
        assert!(matches!(word_time("a1", &TimingTable::uniform(1.0), &l), Err(ExpertError::BadWord(_))));
        assert!(matches!(word_time("a", &TimingTable::new(), &l), Err(ExpertError::Timing(_))));
        assert!(matches!(
            corpus_prediction(&[], &TimingTable::uniform(1.0), &l, Exec::Sequential),
            Err(ExpertError::EmptyCorpus)
        ));
    }

    #[test]
    fn fixture_corpus_strategies_agree() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/lexicon_en_3k.tsv");
        let corpus = load_corpus(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
        let t = table();
        let l = Layout::qwerty();
        let a = corpus_prediction(&corpus, &t, &l, Exec::Sequential).unwrap();
        let b = corpus_prediction(&corpus, &t, &l, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z]{1,8}"
    }

    proptest! {
        #[test]
        fn doubling_times_halves_wpm(words in prop::collection::vec((word(), 1u64..50), 1..20)) {
            let t = table();
            let l = Layout::qwerty();
            let a = corpus_prediction(&words, &t, &l, Exec::Sequential).unwrap();
            let b = corpus_prediction(&words, &t.scaled(2.0), &l, Exec::Sequential).unwrap();
            prop_assert!((a.predicted_wpm - 2.0 * b.predicted_wpm).abs() < 1e-9 * a.predicted_wpm);
        }

        #[test]
        fn order_does_not_matter(words in prop::collection::vec((word(), 1u64..50), 1..20)) {
            let t = table();
            let l = Layout::qwerty();
            let a = corpus_prediction(&words, &t, &l, Exec::Sequential).unwrap();
            let mut rev = words.clone();
            rev.reverse();
            let b = corpus_prediction(&rev, &t, &l, Exec::Parallel).unwrap();
            prop_assert!((a.predicted_wpm - b.predicted_wpm).abs() < 1e-9 * a.predicted_wpm);
            prop_assert_eq!(a.total_chars, b.total_chars);
        }

        #[test]
        fn additive_over_concatenation(a in word(), b in word()) {
            // Joining two words through a Space decomposes exactly: the
            // Space after `a` is the Space before `b`.
            let t = table();
            let l = Layout::qwerty();
            let ta = word_time(&a, &t, &l).unwrap();
            let tb = word_time(&b, &t, &l).unwrap();
            let corpus = vec![(a.clone(), 1), (b.clone(), 1)];
            let s = corpus_prediction(&corpus, &t, &l, Exec::Sequential).unwrap();
            prop_assert!((s.total_seconds - (ta + tb)).abs() < 1e-12);
        }

        #[test]
        fn alternation_never_costs_more(w in word(), i in 0usize..8) {
            // Reassigning one letter to the thumb that alternates with both
            // neighbours never increases the time.
            let t = TimingTable::uniform(400.0);
            let l = Layout::qwerty();
            let chars: Vec<char> = w.chars().collect();
            let i = i % chars.len();
            let base = word_time(&w, &t, &l).unwrap();
            let prev = if i == 0 { SPACE_THUMB } else { l.thumb_for(key(chars[i - 1])).unwrap() };
            let next = if i + 1 == chars.len() { SPACE_THUMB } else { l.thumb_for(key(chars[i + 1])).unwrap() };
            prop_assume!(prev == next);
            let k = key(chars[i]);
            let moved = l.with_thumb(k, prev.other());
            // Other occurrences of the same letter move too; restrict to
            // words where it occurs once.
            prop_assume!(chars.iter().filter(|&&c| c == chars[i]).count() == 1);
            prop_assert!(word_time(&w, &t, &moved).unwrap() <= base + 1e-12);
        }
    }
}

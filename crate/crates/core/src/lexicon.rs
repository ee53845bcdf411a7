//! Word-frequency dictionary backed by a trie.
//!
//! File format: UTF-8, one `word<TAB>count` per line, `#` starts a comment
//! line. Words must be lowercase a–z; anything else is skipped with a
//! warning.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

pub const DEFAULT_CAP: usize = 50_000;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("word probability needs a nonempty candidate set")]
    EmptyCandidates,
    #[error("{0:?} is not among the candidates")]
    NotACandidate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default, Clone)]
struct Node {
    children: [Option<u32>; 26],
    count: u64,
}

/// Arena-allocated trie over a–z.
#[derive(Debug, Clone)]
pub struct Trie {
    nodes: Vec<Node>,
}

impl Default for Trie {
    fn default() -> Self {
        Self {
            nodes: vec![Node::default()],
        }
    }
}

impl Trie {
    pub fn insert(&mut self, word: &str, count: u64) {
        let mut at = 0usize;
        for b in word.bytes() {
            let slot = (b - b'a') as usize;
            at = match self.nodes[at].children[slot] {
                Some(next) => next as usize,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[at].children[slot] = Some(next as u32);
                    next
                }
            };
        }
        self.nodes[at].count += count;
    }

    fn find(&self, prefix: &str) -> Option<usize> {
        let mut at = 0usize;
        for b in prefix.bytes() {
            if !b.is_ascii_lowercase() {
                return None;
            }
            at = self.nodes[at].children[(b - b'a') as usize]? as usize;
        }
        Some(at)
    }

    pub fn count(&self, word: &str) -> u64 {
        self.find(word).map_or(0, |i| self.nodes[i].count)
    }

    /// Node handle for walking the trie one letter at a time.
    pub fn root(&self) -> TrieCursor {
        TrieCursor(0)
    }

    pub fn step(&self, at: TrieCursor, letter: u8) -> Option<TrieCursor> {
        if !letter.is_ascii_lowercase() {
            return None;
        }
        self.nodes[at.0].children[(letter - b'a') as usize].map(|n| TrieCursor(n as usize))
    }

    pub fn count_at(&self, at: TrieCursor) -> u64 {
        self.nodes[at.0].count
    }

    /// Every stored word starting with `prefix`, in lexicographic order.
    pub fn with_prefix(&self, prefix: &str) -> Vec<(String, u64)> {
        let mut out = Vec::new();
        if let Some(start) = self.find(prefix) {
            let mut buf = prefix.to_string();
            self.collect(start, &mut buf, &mut out);
        }
        out
    }

    fn collect(&self, at: usize, buf: &mut String, out: &mut Vec<(String, u64)>) {
        let node = &self.nodes[at];
        if node.count > 0 {
            out.push((buf.clone(), node.count));
        }
        for (i, child) in node.children.iter().enumerate() {
            if let Some(c) = child {
                buf.push((b'a' + i as u8) as char);
                self.collect(*c as usize, buf, out);
                buf.pop();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrieCursor(usize);

#[derive(Debug, Clone)]
pub struct Lexicon {
    counts: BTreeMap<String, u64>,
    trie: Trie,
}

/// Reads `word<TAB>count` lines without validating the words.
pub fn parse_counts<R: BufRead>(reader: R) -> Result<Vec<(String, u64)>, LexiconError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| LexiconError::Malformed {
            line: i + 1,
            reason: reason.to_string(),
        };
        let (word, count) = trimmed
            .split_once('\t')
            .ok_or_else(|| malformed("expected word<TAB>count"))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| malformed("count is not a nonnegative integer"))?;
        pairs.push((word.trim().to_string(), count));
    }
    Ok(pairs)
}

fn valid_word(w: &str) -> bool {
    !w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase())
}

impl Lexicon {
    /// Builds a lexicon from (word, count) pairs, summing duplicates and
    /// keeping the `cap` most frequent words (ties broken alphabetically).
    /// Invalid words and zero counts are skipped.
    pub fn from_counts<I, S>(pairs: I, cap: usize) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for (w, c) in pairs {
            let w = w.as_ref();
            if !valid_word(w) {
                log::warn!("skipping non a-z word {w:?}");
                continue;
            }
            if c == 0 {
                continue;
            }
            *counts.entry(w.to_string()).or_default() += c;
        }
        if counts.len() > cap {
            let mut ranked: Vec<_> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ranked.truncate(cap);
            counts = ranked.into_iter().collect();
        }
        let mut trie = Trie::default();
        for (w, &c) in &counts {
            trie.insert(w, c);
        }
        Self { counts, trie }
    }

    pub fn load<R: BufRead>(reader: R, cap: usize) -> Result<Self, LexiconError> {
        Ok(Self::from_counts(parse_counts(reader)?, cap))
    }

    pub fn load_path(path: impl AsRef<Path>, cap: usize) -> Result<Self, LexiconError> {
        Self::load(BufReader::new(File::open(path)?), cap)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    pub fn trie(&self) -> &Trie {
        &self.trie
    }

    /// All words with the given prefix (the prefix itself included when it
    /// is a word), in lexicographic order.
    pub fn prefix_search(&self, prefix: &str) -> Vec<String> {
        self.trie
            .with_prefix(prefix)
            .into_iter()
            .map(|(w, _)| w)
            .collect()
    }

    /// Frequency of `word` normalised over the candidate set.
    pub fn word_prob<S: AsRef<str>>(&self, word: &str, candidates: &[S]) -> Result<f64, LexiconError> {
        if candidates.is_empty() {
            return Err(LexiconError::EmptyCandidates);
        }
        if !candidates.iter().any(|c| c.as_ref() == word) {
            return Err(LexiconError::NotACandidate(word.to_string()));
        }
        let total: u64 = candidates.iter().map(|c| self.count(c.as_ref())).sum();
        if total == 0 {
            return Ok(1.0 / candidates.len() as f64);
        }
        Ok(self.count(word) as f64 / total as f64)
    }
}

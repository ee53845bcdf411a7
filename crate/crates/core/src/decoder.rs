//! The keyboard state machine.
//!
//! Every stroke deterministically produces the letter nearest to the
//! transfer-mapped cursor, so out-of-vocabulary words can always be typed.
//! When predictions are enabled, the stroke history of the current word also
//! feeds a Bayesian decoder: each stroke is scored against per-key bivariate
//! Gaussians, the three likeliest letters per stroke are combined into
//! candidate words, and candidates are ranked by stroke likelihood times
//! normalised word frequency. That ranking drives autocorrect on Space and
//! the two completion slots.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::layout::Layout;
use crate::lexicon::{Lexicon, TrieCursor};
use crate::metrics::InputToken;
use crate::recognizer::{cell_at, classify_contact, infer_thumb, ContactClass};
use crate::types::{Gesture, GestureError, KeyId, NormalizedEndpoint, Thumb, TouchSample};

/// Letters kept per stroke when building candidate words.
pub const TOP_LETTERS_PER_STROKE: usize = 3;
/// Number of completion slots.
pub const SUGGESTION_SLOTS: usize = 2;
/// Per-stroke likelihood floor before taking the product.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("gesture ends at {up} ms, before the previous gesture ({prev} ms)")]
    OutOfOrder { prev: f64, up: f64 },
    #[error(transparent)]
    Gesture(#[from] GestureError),
}

/// Immutable inputs shared by every session.
#[derive(Debug, Clone)]
pub struct DecoderConfig {
    pub profile: CalibrationProfile,
    pub layout: Layout,
    pub lexicon: Option<Lexicon>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderOptions {
    pub predictions_enabled: bool,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self {
            predictions_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeyEvent {
    Char { ch: char, thumb: Thumb },
    Space,
    Backspace { deleted: Option<char> },
    Enter,
    SuggestAccepted { slot: usize, word: String },
    AutocorrectApplied { original: String, replacement: String },
    AutocorrectReverted { original: String, replacement: String },
    CursorFeedback { thumb: Thumb, x: f64, y: f64 },
}

/// One stroke (or start-key tap) of the current word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeObs {
    pub endpoint: NormalizedEndpoint,
    pub thumb: Thumb,
}

#[derive(Debug, Clone, PartialEq)]
struct Autocorrect {
    original: String,
    replacement: String,
}

/// Timing of one processed gesture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureTiming {
    pub down_t: f64,
    pub up_t: f64,
    pub thumb: Thumb,
    pub class: ContactClass,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: Arc<DecoderConfig>,
    options: DecoderOptions,
    committed: String,
    current_word: String,
    strokes: Vec<StrokeObs>,
    suggestions: Vec<String>,
    last_autocorrect: Option<Autocorrect>,
    last_up: Option<f64>,
    timings: Vec<GestureTiming>,
    input: Vec<InputToken>,
    lexicon_queries: u64,
}

/// Likelihood of one letter for one stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterScore {
    pub key: KeyId,
    pub log_likelihood: f64,
}

impl LetterScore {
    pub fn likelihood(&self) -> f64 {
        self.log_likelihood.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWord {
    pub word: String,
    pub log_score: f64,
}

/// Every string formed by picking one letter from each position.
pub fn letter_combinations(options: &[Vec<char>]) -> Vec<String> {
    let mut out = vec![String::new()];
    for letters in options {
        out = out
            .iter()
            .flat_map(|prefix| {
                letters.iter().map(move |&c| {
                    let mut s = prefix.clone();
                    s.push(c);
                    s
                })
            })
            .collect();
    }
    out
}

fn rank(scored: &mut [ScoredWord]) {
    scored.sort_by(|a, b| {
        b.log_score
            .total_cmp(&a.log_score)
            .then_with(|| a.word.cmp(&b.word))
    });
}

impl Session {
    pub fn new(config: Arc<DecoderConfig>, options: DecoderOptions) -> Self {
        Self {
            config,
            options,
            committed: String::new(),
            current_word: String::new(),
            strokes: Vec::new(),
            suggestions: Vec::new(),
            last_autocorrect: None,
            last_up: None,
            timings: Vec::new(),
            input: Vec::new(),
            lexicon_queries: 0,
        }
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn options(&self) -> DecoderOptions {
        self.options
    }

    pub fn set_options(&mut self, options: DecoderOptions) {
        self.options = options;
        self.refresh_suggestions();
    }

    pub fn committed_text(&self) -> &str {
        &self.committed
    }

    pub fn current_word(&self) -> &str {
        &self.current_word
    }

    /// Committed text followed by the word in progress.
    pub fn text(&self) -> String {
        format!("{}{}", self.committed, self.current_word)
    }

    pub fn current_strokes(&self) -> &[StrokeObs] {
        &self.strokes
    }

    pub fn suggestions(&self) -> &[String] {
        &self.suggestions
    }

    pub fn timings(&self) -> &[GestureTiming] {
        &self.timings
    }

    /// Character/backspace stream that produced [`Session::text`].
    pub fn input_stream(&self) -> &[InputToken] {
        &self.input
    }

    /// Touch-up time of the last accepted gesture.
    pub fn last_up(&self) -> Option<f64> {
        self.last_up
    }

    /// How many times this session has consulted the lexicon.
    pub fn lexicon_queries(&self) -> u64 {
        self.lexicon_queries
    }

    /// Clears text, history and timing, keeping options.
    pub fn reset(&mut self) {
        *self = Session::new(self.config.clone(), self.options);
    }

    fn lexicon(&mut self) -> Option<&Lexicon> {
        if !self.options.predictions_enabled {
            return None;
        }
        let lex = self.config.lexicon.as_ref()?;
        self.lexicon_queries += 1;
        Some(lex)
    }

    /// Keyboard position of the cursor for a stroke from `start` to `current`.
    pub fn cursor(&self, thumb: Thumb, start: TouchSample, current: TouchSample) -> (f64, f64) {
        let e = NormalizedEndpoint::new(current.x - start.x, current.y - start.y);
        self.config.profile.transfer.get(thumb).apply(e)
    }

    /// Letter nearest to the transfer-mapped end of a stroke.
    pub fn select_key(&self, stroke: &Gesture) -> KeyId {
        let thumb = infer_thumb(stroke, &self.config.profile.pad);
        self.key_for_endpoint(stroke.normalized_endpoint(), thumb)
    }

    pub fn key_for_endpoint(&self, e: NormalizedEndpoint, thumb: Thumb) -> KeyId {
        let (x, y) = self.config.profile.transfer.get(thumb).apply(e);
        self.config.layout.nearest_letter(x, y)
    }

    /// Unnormalised Gaussian likelihood of every letter modelled for `thumb`,
    /// highest first (ties alphabetical).
    pub fn stroke_likelihoods(&self, e: NormalizedEndpoint, thumb: Thumb) -> Vec<LetterScore> {
        let mut scores: Vec<_> = self
            .config
            .profile
            .models_for(thumb)
            .map(|m| LetterScore {
                key: m.key,
                log_likelihood: m.log_density(e),
            })
            .collect();
        scores.sort_by(|a, b| {
            b.log_likelihood
                .total_cmp(&a.log_likelihood)
                .then_with(|| a.key.cmp(&b.key))
        });
        scores
    }

    fn letter_log_likelihood(&self, letter: char, obs: &StrokeObs) -> f64 {
        let floor = LIKELIHOOD_FLOOR.ln();
        KeyId::letter(letter)
            .and_then(|k| self.config.profile.model(k, obs.thumb))
            .map_or(floor, |m| m.log_density(obs.endpoint).max(floor))
    }

    /// Top letters for each stroke of the current word.
    pub fn top_letters(&self) -> Vec<Vec<char>> {
        self.strokes
            .iter()
            .map(|s| {
                self.stroke_likelihoods(s.endpoint, s.thumb)
                    .into_iter()
                    .take(TOP_LETTERS_PER_STROKE)
                    .filter_map(|l| l.key.as_char())
                    .collect()
            })
            .collect()
    }

    /// Trie nodes reached by every combination of the top letters.
    fn combination_nodes(&mut self) -> Vec<(String, TrieCursor)> {
        let top = self.top_letters();
        let Some(lex) = self.lexicon() else {
            return Vec::new();
        };
        let trie = lex.trie();
        let mut frontier = vec![(String::new(), trie.root())];
        for letters in &top {
            let mut next = Vec::new();
            for (prefix, at) in &frontier {
                for &c in letters {
                    if let Some(child) = trie.step(*at, c as u8) {
                        let mut p = prefix.clone();
                        p.push(c);
                        next.push((p, child));
                    }
                }
            }
            frontier = next;
        }
        frontier
    }

    /// Letter combinations of the current word that are lexicon words.
    /// Empty for out-of-vocabulary input.
    pub fn candidate_words(&mut self) -> Vec<String> {
        if self.strokes.is_empty() {
            return Vec::new();
        }
        let Some(trie) = self.config.lexicon.as_ref().map(|l| l.trie().clone()) else {
            return Vec::new();
        };
        let mut words: Vec<String> = self
            .combination_nodes()
            .into_iter()
            .filter(|(_, at)| trie.count_at(*at) > 0)
            .map(|(w, _)| w)
            .collect();
        words.sort();
        words
    }

    fn log_likelihood_of(&self, word: &str) -> f64 {
        word.chars()
            .zip(&self.strokes)
            .map(|(c, s)| self.letter_log_likelihood(c, s))
            .sum()
    }

    /// Ranks candidates by stroke likelihood × normalised frequency.
    pub fn word_posterior(&mut self, candidates: &[String]) -> Vec<ScoredWord> {
        let counts: Vec<u64> = match self.lexicon() {
            Some(lex) => candidates.iter().map(|w| lex.count(w)).collect(),
            None => vec![1; candidates.len()],
        };
        let total: u64 = counts.iter().sum();
        let mut scored: Vec<_> = candidates
            .iter()
            .zip(&counts)
            .map(|(w, &c)| {
                let prior = if total == 0 {
                    1.0 / candidates.len() as f64
                } else {
                    c as f64 / total as f64
                };
                ScoredWord {
                    word: w.clone(),
                    log_score: self.log_likelihood_of(w) + prior.ln(),
                }
            })
            .collect();
        rank(&mut scored);
        scored
    }

    /// Word to substitute on Space, if any.
    pub fn autocorrect_candidate(&mut self) -> Option<String> {
        if !self.options.predictions_enabled || self.current_word.is_empty() {
            return None;
        }
        let candidates = self.candidate_words();
        if candidates.is_empty() {
            return None;
        }
        let best = self.word_posterior(&candidates).into_iter().next()?;
        (best.word != self.current_word).then_some(best.word)
    }

    /// Top-`k` completions of the current word.
    pub fn completions(&mut self, k: usize) -> Vec<ScoredWord> {
        if self.strokes.is_empty() || !self.options.predictions_enabled {
            return Vec::new();
        }
        let nodes = self.combination_nodes();
        let Some(lex) = self.lexicon() else {
            return Vec::new();
        };
        let mut union: Vec<(String, u64)> = Vec::new();
        for (prefix, _) in &nodes {
            union.extend(lex.trie().with_prefix(prefix));
        }
        let total: u64 = union.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return Vec::new();
        }
        let mut scored: Vec<_> = union
            .into_iter()
            .map(|(word, count)| {
                let log_score = self.log_likelihood_of(&word) + (count as f64 / total as f64).ln();
                ScoredWord { word, log_score }
            })
            .collect();
        rank(&mut scored);
        scored.truncate(k);
        scored
    }

    fn refresh_suggestions(&mut self) {
        self.suggestions = if self.options.predictions_enabled && !self.current_word.is_empty() {
            self.completions(SUGGESTION_SLOTS)
                .into_iter()
                .map(|s| s.word)
                .collect()
        } else {
            Vec::new()
        };
    }

    fn clear_word(&mut self) {
        self.current_word.clear();
        self.strokes.clear();
        self.suggestions.clear();
    }

    fn push_letter(&mut self, key: KeyId, obs: StrokeObs) -> Vec<KeyEvent> {
        let ch = key.as_char().expect("letters only");
        self.current_word.push(ch);
        self.strokes.push(obs);
        self.refresh_suggestions();
        vec![KeyEvent::Char { ch, thumb: obs.thumb }]
    }

    fn space(&mut self) -> Vec<KeyEvent> {
        let mut events = Vec::new();
        if !self.current_word.is_empty() {
            let original = self.current_word.clone();
            match self.autocorrect_candidate() {
                Some(replacement) => {
                    self.committed.push_str(&replacement);
                    events.push(KeyEvent::AutocorrectApplied {
                        original: original.clone(),
                        replacement: replacement.clone(),
                    });
                    self.last_autocorrect = Some(Autocorrect { original, replacement });
                }
                None => self.committed.push_str(&original),
            }
        }
        self.committed.push(' ');
        self.clear_word();
        events.push(KeyEvent::Space);
        events
    }

    fn backspace(&mut self, autocorrect: Option<Autocorrect>) -> Vec<KeyEvent> {
        if let Some(ac) = autocorrect {
            let tail = format!("{} ", ac.replacement);
            if self.current_word.is_empty() && self.committed.ends_with(&tail) {
                let cut = self.committed.len() - tail.len();
                self.committed.truncate(cut);
                self.committed.push_str(&ac.original);
                self.committed.push(' ');
                return vec![KeyEvent::AutocorrectReverted {
                    original: ac.original,
                    replacement: ac.replacement,
                }];
            }
        }
        let deleted = if let Some(c) = self.current_word.pop() {
            self.strokes.pop();
            self.refresh_suggestions();
            Some(c)
        } else {
            self.committed.pop()
        };
        vec![KeyEvent::Backspace { deleted }]
    }

    fn enter(&mut self) -> Vec<KeyEvent> {
        let word = std::mem::take(&mut self.current_word);
        self.committed.push_str(&word);
        self.committed.push('\n');
        self.clear_word();
        vec![KeyEvent::Enter]
    }

    fn accept(&mut self, slot: usize) -> Vec<KeyEvent> {
        let Some(word) = self.suggestions.get(slot).cloned() else {
            return Vec::new();
        };
        self.committed.push_str(&word);
        self.committed.push(' ');
        self.clear_word();
        vec![KeyEvent::SuggestAccepted { slot, word }]
    }

    fn record_edit(&mut self, before: &str) {
        let after = self.text();
        let common = before
            .chars()
            .zip(after.chars())
            .take_while(|(a, b)| a == b)
            .count();
        let removed = before.chars().count() - common;
        self.input
            .extend(std::iter::repeat_n(InputToken::Backspace, removed));
        self.input
            .extend(after.chars().skip(common).map(InputToken::Char));
    }

    /// Processes one completed gesture.
    ///
    /// Gestures must arrive in order of their touch-up time. Taps on the
    /// center cell type the start key of the tapping thumb; taps on other
    /// cells trigger their function key (or nothing if unassigned); strokes
    /// type the nearest key and emit one cursor event per sample.
    pub fn feed_touch(&mut self, g: &Gesture) -> Result<Vec<KeyEvent>, DecodeError> {
        if let Some(prev) = self.last_up {
            if g.up_t() < prev {
                return Err(DecodeError::OutOfOrder { prev, up: g.up_t() });
            }
        }
        self.last_up = Some(g.up_t());

        let profile = &self.config.profile;
        let thumb = infer_thumb(g, &profile.pad);
        let class = classify_contact(g, profile.tap_threshold_mm);
        self.timings.push(GestureTiming {
            down_t: g.down_t(),
            up_t: g.up_t(),
            thumb,
            class,
        });
        let pending_revert = self.last_autocorrect.take();
        let before = self.text();

        let events = match class {
            ContactClass::Tap => {
                let first = g.first();
                let cell = cell_at(first.x, first.y, &profile.pad);
                if cell.is_center() {
                    let key = self.config.layout.start_key(thumb);
                    let obs = StrokeObs {
                        endpoint: g.normalized_endpoint(),
                        thumb,
                    };
                    self.push_letter(key, obs)
                } else {
                    match self.config.layout.tap_function(cell) {
                        Some(KeyId::Space) => self.space(),
                        Some(KeyId::Backspace) => self.backspace(pending_revert),
                        Some(KeyId::Enter) => self.enter(),
                        Some(KeyId::Suggest1) => self.accept(0),
                        Some(KeyId::Suggest2) => self.accept(1),
                        _ => Vec::new(),
                    }
                }
            }
            ContactClass::Stroke => {
                let first = g.first();
                let mut events: Vec<_> = g
                    .samples()
                    .iter()
                    .map(|&s| {
                        let (x, y) = self.cursor(thumb, first, s);
                        KeyEvent::CursorFeedback { thumb, x, y }
                    })
                    .collect();
                let key = self.select_key(g);
                let obs = StrokeObs {
                    endpoint: g.normalized_endpoint(),
                    thumb,
                };
                events.extend(self.push_letter(key, obs));
                events
            }
        };
        self.record_edit(&before);
        Ok(events)
    }
}

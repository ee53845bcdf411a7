//! Text-entry performance measures: words per minute, keystroke-stream
//! error rates and gesture timing.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::GestureTiming;
use crate::types::Thumb;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("duration must be positive, got {0} s")]
    BadDuration(f64),
    #[error("transcribed text is empty")]
    EmptyText,
    #[error("input stream replays to {replayed:?}, not {transcribed:?}")]
    InconsistentStream { replayed: String, transcribed: String },
    #[error("no characters to rate")]
    EmptyCounts,
}

/// Per-phrase words per minute: `(|T| − 1) / s × 60 / 5`.
pub fn wpm(transcribed: &str, seconds: f64) -> Result<f64, MetricsError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(MetricsError::BadDuration(seconds));
    }
    let n = transcribed.chars().count();
    if n == 0 {
        return Err(MetricsError::EmptyText);
    }
    Ok((n - 1) as f64 / seconds * 12.0)
}

/// Aggregate words per minute over a large body of text: `(chars / 5) / (s / 60)`.
pub fn wpm_aggregate(chars: f64, seconds: f64) -> Result<f64, MetricsError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(MetricsError::BadDuration(seconds));
    }
    Ok((chars / 5.0) / (seconds / 60.0))
}

/// Unit-cost edit distance over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ch", rename_all = "snake_case")]
pub enum InputToken {
    Char(char),
    Backspace,
}

/// Parses `"t,j,⌫,h,e"`-style streams; `⌫` or `<bs>` is a backspace.
pub fn parse_stream(s: &str) -> Vec<InputToken> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "⌫" | "<bs>" => InputToken::Backspace,
            _ => InputToken::Char(t.chars().next().expect("nonempty")),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct StreamCounts {
    pub C: usize,
    pub INF: usize,
    pub IF: usize,
    pub F: usize,
}

/// Replays a keystroke stream through an edit buffer.
pub fn replay_stream(stream: &[InputToken]) -> String {
    let mut buf = String::new();
    for tok in stream {
        match tok {
            InputToken::Char(c) => buf.push(*c),
            InputToken::Backspace => {
                buf.pop();
            }
        }
    }
    buf
}

pub fn classify_stream(
    presented: &str,
    transcribed: &str,
    stream: &[InputToken],
) -> Result<StreamCounts, MetricsError> {
    let mut buf = String::new();
    let mut counts = StreamCounts::default();
    for tok in stream {
        match tok {
            InputToken::Char(c) => buf.push(*c),
            InputToken::Backspace => {
                counts.F += 1;
                if buf.pop().is_some() {
                    counts.IF += 1;
                }
            }
        }
    }
    if buf != transcribed {
        return Err(MetricsError::InconsistentStream {
            replayed: buf,
            transcribed: transcribed.to_string(),
        });
    }
    counts.INF = levenshtein(presented, transcribed);
    counts.C = presented.chars().count().max(transcribed.chars().count()) - counts.INF;
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub corrected: f64,
    pub uncorrected: f64,
    pub total: f64,
}

pub fn error_rates(c: &StreamCounts) -> Result<ErrorRates, MetricsError> {
    let denom = c.C + c.INF + c.IF;
    if denom == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    let d = denom as f64;
    let corrected = c.IF as f64 / d;
    let uncorrected = c.INF as f64 / d;
    Ok(ErrorRates {
        corrected,
        uncorrected,
        total: corrected + uncorrected,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingBreakdown {
    /// `down_i − up_{i−1}` for every gesture after the first.
    pub reaction_times: Vec<f64>,
    /// `up_i − down_i` for every gesture.
    pub stroke_times: Vec<f64>,
    pub same_hand_count: usize,
    pub alternating_count: usize,
    pub same_hand_reaction_mean: Option<f64>,
    pub alternating_reaction_mean: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn timing_breakdown(log: &[GestureTiming]) -> TimingBreakdown {
    let stroke_times = log.iter().map(|g| g.up_t - g.down_t).collect();
    let mut reaction_times = Vec::new();
    let mut same = Vec::new();
    let mut alt = Vec::new();
    for w in log.windows(2) {
        let r = w[1].down_t - w[0].up_t;
        reaction_times.push(r);
        if w[1].thumb == w[0].thumb {
            same.push(r);
        } else {
            alt.push(r);
        }
    }
    TimingBreakdown {
        reaction_times,
        stroke_times,
        same_hand_count: same.len(),
        alternating_count: alt.len(),
        same_hand_reaction_mean: mean(&same),
        alternating_reaction_mean: mean(&alt),
    }
}

/// Share of gestures made with each thumb.
pub fn thumb_share(log: &[GestureTiming], thumb: Thumb) -> Option<f64> {
    (!log.is_empty()).then(|| log.iter().filter(|g| g.thumb == thumb).count() as f64 / log.len() as f64)
}

/// Measures for one transcribed phrase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseReport {
    pub presented: String,
    pub transcribed: String,
    pub seconds: f64,
    pub wpm: f64,
    pub counts: StreamCounts,
    pub corrected_er: f64,
    pub uncorrected_er: f64,
    pub total_er: f64,
    pub reaction_mean_ms: Option<f64>,
    pub stroke_mean_ms: Option<f64>,
    pub same_hand_reaction_mean_ms: Option<f64>,
    pub alternating_reaction_mean_ms: Option<f64>,
    pub autocorrections: usize,
    pub completions_accepted: usize,
}

/// Inputs for [`PhraseReport::compute`].
#[derive(Debug, Clone, Copy)]
pub struct PhraseInput<'a> {
    pub presented: &'a str,
    pub transcribed: &'a str,
    pub stream: &'a [InputToken],
    pub timings: &'a [GestureTiming],
    pub autocorrections: usize,
    pub completions_accepted: usize,
}

impl PhraseReport {
    /// Phrase time runs from the first touch-down to the last touch-up.
    /// Trailing spaces are not part of the transcription.
    pub fn compute(input: PhraseInput<'_>) -> Result<Self, MetricsError> {
        let transcribed = input.transcribed.trim_end_matches(' ');
        let trailing = input.transcribed.len() - transcribed.len();
        let mut stream = input.stream.to_vec();
        // Drop the final space tokens that the trim removed.
        let mut to_drop = trailing;
        while to_drop > 0 && stream.last() == Some(&InputToken::Char(' ')) {
            stream.pop();
            to_drop -= 1;
        }
        let counts = classify_stream(input.presented, transcribed, &stream)?;
        let rates = error_rates(&counts)?;
        let seconds = match (input.timings.first(), input.timings.last()) {
            (Some(a), Some(b)) => (b.up_t - a.down_t) / 1000.0,
            _ => 0.0,
        };
        let wpm = wpm(transcribed, seconds)?;
        let tb = timing_breakdown(input.timings);
        Ok(Self {
            presented: input.presented.to_string(),
            transcribed: transcribed.to_string(),
            seconds,
            wpm,
            counts,
            corrected_er: rates.corrected,
            uncorrected_er: rates.uncorrected,
            total_er: rates.total,
            reaction_mean_ms: mean(&tb.reaction_times),
            stroke_mean_ms: mean(&tb.stroke_times),
            same_hand_reaction_mean_ms: tb.same_hand_reaction_mean,
            alternating_reaction_mean_ms: tb.alternating_reaction_mean,
            autocorrections: input.autocorrections,
            completions_accepted: input.completions_accepted,
        })
    }
}

/// Aggregate over a block of phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub phrases: Vec<PhraseReport>,
    pub mean_wpm: Option<f64>,
    pub corrected_er: Option<f64>,
    pub uncorrected_er: Option<f64>,
}

impl BlockReport {
    /// Error rates are pooled over the block's keystroke counts.
    pub fn new(phrases: Vec<PhraseReport>) -> Self {
        let wpms: Vec<f64> = phrases.iter().map(|p| p.wpm).collect();
        let mut total = StreamCounts::default();
        for p in &phrases {
            total.C += p.counts.C;
            total.INF += p.counts.INF;
            total.IF += p.counts.IF;
            total.F += p.counts.F;
        }
        let rates = error_rates(&total).ok();
        Self {
            mean_wpm: mean(&wpms),
            corrected_er: rates.map(|r| r.corrected),
            uncorrected_er: rates.map(|r| r.uncorrected),
            phrases,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "presented,transcribed,seconds,wpm,c,inf,if,f,corrected_er,uncorrected_er,reaction_mean_ms,stroke_mean_ms")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.phrases {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&p.presented),
                csv_field(&p.transcribed),
                p.seconds,
                p.wpm,
                p.counts.C,
                p.counts.INF,
                p.counts.IF,
                p.counts.F,
                p.corrected_er,
                p.uncorrected_er,
                opt(p.reaction_mean_ms),
                opt(p.stroke_mean_ms),
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognizer::ContactClass;
    use proptest::prelude::*;

    fn lev_oracle(a: &[char], b: &[char]) -> usize {
        match (a, b) {
            ([], _) => b.len(),
            (_, []) => a.len(),
            ([x, ra @ ..], [y, rb @ ..]) => {
                let sub = lev_oracle(ra, rb) + usize::from(x != y);
                sub.min(lev_oracle(ra, b) + 1).min(lev_oracle(a, rb) + 1)
            }
        }
    }

    #[test]
    fn wpm_cases() {
        assert!((wpm("the cat", 14.4).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(wpm("a", 3.0).unwrap(), 0.0);
        assert!(wpm("abc", 0.0).is_err());
        assert!(wpm("", 1.0).is_err());
        let agg = wpm_aggregate(103_183_327.0, 39_572_285.0).unwrap();
        assert!((agg - 31.3).abs() < 0.05, "{agg}");
    }

    #[test]
    fn stream_cases() {
        let c = classify_stream("the", "the", &parse_stream("t,h,e")).unwrap();
        assert_eq!(c, StreamCounts { C: 3, INF: 0, IF: 0, F: 0 });
        let c = classify_stream("the", "the", &parse_stream("t,j,⌫,h,e")).unwrap();
        assert_eq!(c, StreamCounts { C: 3, INF: 0, IF: 1, F: 1 });
        let c = classify_stream("the", "thw", &parse_stream("t,h,w")).unwrap();
        assert_eq!((c.INF, c.C), (1, 2));
        assert!(matches!(
            classify_stream("the", "the", &parse_stream("t,h")),
            Err(MetricsError::InconsistentStream { .. })
        ));
        let c = classify_stream("a", "a", &parse_stream("⌫,a")).unwrap();
        assert_eq!((c.F, c.IF), (1, 0));
    }

    #[test]
    fn rate_cases() {
        let r = error_rates(&StreamCounts { C: 3, INF: 0, IF: 0, F: 0 }).unwrap();
        assert_eq!((r.corrected, r.uncorrected, r.total), (0.0, 0.0, 0.0));
        let r = error_rates(&StreamCounts { C: 3, INF: 0, IF: 1, F: 1 }).unwrap();
        assert_eq!(r.corrected, 0.25);
        assert!(error_rates(&StreamCounts::default()).is_err());
    }

    fn timing(down: f64, up: f64, thumb: Thumb) -> GestureTiming {
        GestureTiming { down_t: down, up_t: up, thumb, class: ContactClass::Stroke }
    }

    #[test]
    fn timing_cases() {
        let t = timing_breakdown(&[timing(0.0, 657.0, Thumb::Left)]);
        assert_eq!(t.stroke_times, vec![657.0]);
        assert!(t.reaction_times.is_empty());
        let t = timing_breakdown(&[
            timing(0.0, 1000.0, Thumb::Left),
            timing(1440.0, 1600.0, Thumb::Right),
            timing(1700.0, 1800.0, Thumb::Right),
        ]);
        assert_eq!(t.reaction_times, vec![440.0, 100.0]);
        assert_eq!(t.same_hand_count + t.alternating_count, 2);
        assert_eq!(t.alternating_reaction_mean, Some(440.0));
        assert_eq!(t.same_hand_reaction_mean, Some(100.0));
    }

    #[test]
    fn phrase_report_trims_trailing_space() {
        let stream = parse_stream("t,h,e, ");
        let timings = [timing(0.0, 100.0, Thumb::Left), timing(400.0, 600.0, Thumb::Left)];
        let r = PhraseReport::compute(PhraseInput {
            presented: "the",
            transcribed: "the ",
            stream: &stream,
            timings: &timings,
            autocorrections: 0,
            completions_accepted: 0,
        })
        .unwrap();
        assert_eq!(r.transcribed, "the");
        assert_eq!(r.uncorrected_er, 0.0);
        assert!((r.wpm - 2.0 / 0.6 * 12.0).abs() < 1e-9);
        let block = BlockReport::new(vec![r]);
        let mut csv = Vec::new();
        block.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    proptest! {
        #[test]
        fn levenshtein_matches_recursion(a in "[a-d]{0,8}", b in "[a-d]{0,8}") {
            let ac: Vec<char> = a.chars().collect();
            let bc: Vec<char> = b.chars().collect();
            prop_assert_eq!(levenshtein(&a, &b), lev_oracle(&ac, &bc));
        }

        #[test]
        fn wpm_linear_in_inverse_time(s in 0.1..100.0f64) {
            let a = wpm("hello world", s).unwrap();
            let b = wpm("hello world", 2.0 * s).unwrap();
            prop_assert!((a - 2.0 * b).abs() < 1e-9);
        }

        #[test]
        fn rates_bounded(c in 0usize..50, inf in 0usize..50, i in 0usize..50) {
            prop_assume!(c + inf + i > 0);
            let r = error_rates(&StreamCounts { C: c, INF: inf, IF: i, F: i }).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.corrected) && (0.0..=1.0).contains(&r.uncorrected));
            prop_assert!((r.corrected + r.uncorrected - r.total).abs() < 1e-15);
        }
    }
}

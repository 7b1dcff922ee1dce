//! Scoreboard text parsing and the debounced monotonic score tracker.
//!
//! Broadcast scorecards show `<runs><sep><wickets>` or the reverse, with
//! `-` or `/` as separator. Parsing resolves which side is which using
//! the laws-of-cricket bound (wickets <= 10), an optional fixed format
//! policy, and consistency with the previously accepted score. The
//! tracker accepts a reading only after `debounce` consecutive identical
//! sightings and emits one `WicketEvent` per wicket increment.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MAX_WICKETS: u32 = 10;
pub const MAX_RUNS: u32 = 1999;
/// Largest wicket jump one accepted transition may carry; bigger jumps
/// are treated as OCR misreads.
pub const MAX_WICKET_JUMP: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFormat {
    WicketsFirst,
    RunsFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatPolicy {
    WicketsFirst,
    RunsFirst,
    #[default]
    Auto,
}

/// A parsed scoreboard reading at a point in the video timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReading {
    pub runs: u32,
    pub wickets: u32,
    pub separator: char,
    pub format: ScoreFormat,
    pub source_text: String,
    /// Seconds from video start.
    pub t: f64,
}

/// A confirmed single-wicket increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WicketEvent {
    pub t: f64,
    pub frame_index: usize,
    pub wickets_before: u32,
    pub wickets_after: u32,
    pub runs_at_event: u32,
    pub innings_index: u32,
}

fn score_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d{1,4})([-/])(\d{1,4})").unwrap())
}

/// Scans `text` for the first `<int><sep><int>` token and resolves it
/// into a score. `prev` is the last accepted reading, used to break
/// ambiguity under the auto policy.
pub fn parse_score(
    text: &str,
    policy: FormatPolicy,
    prev: Option<&ScoreReading>,
    t: f64,
) -> Option<ScoreReading> {
    let caps = score_regex().captures(text)?;
    let a: u32 = caps[1].parse().ok()?;
    let b: u32 = caps[3].parse().ok()?;
    let separator = caps[2].chars().next().unwrap();
    let (runs, wickets, format) = disambiguate(a, b, policy, prev)?;
    Some(ScoreReading {
        runs,
        wickets,
        separator,
        format,
        source_text: text.to_string(),
        t,
    })
}

/// Resolves the pair (left, right) into (runs, wickets, format), or
/// `None` when neither or both assignments are admissible.
pub fn disambiguate(
    a: u32,
    b: u32,
    policy: FormatPolicy,
    prev: Option<&ScoreReading>,
) -> Option<(u32, u32, ScoreFormat)> {
    let valid = |wickets: u32, runs: u32| wickets <= MAX_WICKETS && runs <= MAX_RUNS;
    let wickets_first = valid(a, b).then_some((b, a, ScoreFormat::WicketsFirst));
    let runs_first = valid(b, a).then_some((a, b, ScoreFormat::RunsFirst));

    match (wickets_first, runs_first) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x),
        (Some(wf), Some(rf)) => match policy {
            FormatPolicy::WicketsFirst => Some(wf),
            FormatPolicy::RunsFirst => Some(rf),
            FormatPolicy::Auto => {
                if a == b {
                    // symmetric token; either reading is the same score
                    return Some(wf);
                }
                let consistent = |(runs, wickets, _): &(u32, u32, ScoreFormat)| {
                    prev.is_some_and(|p| {
                        *runs >= p.runs
                            && *wickets >= p.wickets
                            && *wickets - p.wickets <= MAX_WICKET_JUMP
                    })
                };
                match (consistent(&wf), consistent(&rf)) {
                    (true, false) => Some(wf),
                    (false, true) => Some(rf),
                    _ => None,
                }
            }
        },
    }
}

/// Renders a score the way the scoreboard would display it.
pub fn format_score(runs: u32, wickets: u32, separator: char, format: ScoreFormat) -> String {
    match format {
        ScoreFormat::WicketsFirst => format!("{wickets}{separator}{runs}"),
        ScoreFormat::RunsFirst => format!("{runs}{separator}{wickets}"),
    }
}

/// True when the score can only be explained by a new innings starting.
pub fn detect_innings_reset(prev: &ScoreReading, next: &ScoreReading) -> bool {
    next.runs + 20 <= prev.runs
        || (next.wickets + 2 <= prev.wickets && next.runs < prev.runs)
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    runs: u32,
    wickets: u32,
    count: usize,
    first_t: f64,
    first_frame: usize,
    reading: ScoreReading,
}

/// Debounced monotonic score state machine. Feed readings in
/// non-decreasing timestamp order from a single consumer.
#[derive(Debug, Clone)]
pub struct ScoreTracker {
    accepted: Option<ScoreReading>,
    candidate: Option<Candidate>,
    debounce: usize,
    innings_index: u32,
    last_t: Option<f64>,
}

impl ScoreTracker {
    pub fn new(debounce: usize) -> Self {
        Self {
            accepted: None,
            candidate: None,
            debounce: debounce.max(1),
            innings_index: 0,
            last_t: None,
        }
    }

    pub fn accepted(&self) -> Option<&ScoreReading> {
        self.accepted.as_ref()
    }

    pub fn innings_index(&self) -> u32 {
        self.innings_index
    }

    /// Feeds one reading; returns the wicket events it confirms (one per
    /// increment, all stamped at the first frame of the confirming
    /// streak).
    pub fn update(
        &mut self,
        reading: &ScoreReading,
        frame_index: usize,
    ) -> Result<Vec<WicketEvent>> {
        if let Some(last) = self.last_t {
            if reading.t < last {
                return Err(Error::Sequencing(format!(
                    "reading at t={} after t={last}",
                    reading.t
                )));
            }
        }
        self.last_t = Some(reading.t);

        if self
            .accepted
            .as_ref()
            .is_some_and(|a| a.runs == reading.runs && a.wickets == reading.wickets)
        {
            // steady state; a stray candidate was OCR noise
            self.candidate = None;
            return Ok(Vec::new());
        }

        match &mut self.candidate {
            Some(c) if c.runs == reading.runs && c.wickets == reading.wickets => {
                c.count += 1;
            }
            _ => {
                self.candidate = Some(Candidate {
                    runs: reading.runs,
                    wickets: reading.wickets,
                    count: 1,
                    first_t: reading.t,
                    first_frame: frame_index,
                    reading: reading.clone(),
                });
            }
        }

        let confirmed = self
            .candidate
            .as_ref()
            .is_some_and(|c| c.count >= self.debounce);
        if !confirmed {
            return Ok(Vec::new());
        }
        let cand = self.candidate.take().unwrap();
        Ok(self.confirm(cand))
    }

    fn confirm(&mut self, cand: Candidate) -> Vec<WicketEvent> {
        let mut accepted_reading = cand.reading.clone();
        accepted_reading.t = cand.first_t;

        let Some(prev) = self.accepted.clone() else {
            // first confirmed score seeds the baseline, no events
            self.accepted = Some(accepted_reading);
            return Vec::new();
        };

        if cand.runs >= prev.runs && cand.wickets >= prev.wickets {
            let jump = cand.wickets - prev.wickets;
            if jump > MAX_WICKET_JUMP {
                return Vec::new(); // misread
            }
            let events = (0..jump)
                .map(|i| WicketEvent {
                    t: cand.first_t,
                    frame_index: cand.first_frame,
                    wickets_before: prev.wickets + i,
                    wickets_after: prev.wickets + i + 1,
                    runs_at_event: cand.runs,
                    innings_index: self.innings_index,
                })
                .collect();
            self.accepted = Some(accepted_reading);
            events
        } else if detect_innings_reset(&prev, &accepted_reading) {
            self.innings_index += 1;
            self.accepted = Some(accepted_reading);
            Vec::new()
        } else {
            Vec::new() // non-monotonic, below reset threshold: noise
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reading(runs: u32, wickets: u32, t: f64) -> ScoreReading {
        ScoreReading {
            runs,
            wickets,
            separator: '-',
            format: ScoreFormat::RunsFirst,
            source_text: format_score(runs, wickets, '-', ScoreFormat::RunsFirst),
            t,
        }
    }

    #[test]
    fn parse_resolves_by_wicket_bound() {
        let r = parse_score("45/2", FormatPolicy::Auto, None, 0.0).unwrap();
        assert_eq!((r.runs, r.wickets, r.separator), (45, 2, '/'));
        assert_eq!(r.format, ScoreFormat::RunsFirst);

        let r = parse_score("3-120", FormatPolicy::Auto, None, 0.0).unwrap();
        assert_eq!((r.runs, r.wickets, r.separator), (120, 3, '-'));
        assert_eq!(r.format, ScoreFormat::WicketsFirst);
    }

    #[test]
    fn parse_no_match_cases() {
        assert!(parse_score("OVR 12.4", FormatPolicy::Auto, None, 0.0).is_none());
        assert!(parse_score("", FormatPolicy::Auto, None, 0.0).is_none());
        // both sides exceed the wicket bound
        assert!(parse_score("120-45", FormatPolicy::Auto, None, 0.0).is_none());
    }

    #[test]
    fn parse_scans_past_leading_garbage() {
        let r = parse_score("OVERS 18.3  120/4", FormatPolicy::Auto, None, 0.0).unwrap();
        assert_eq!((r.runs, r.wickets), (120, 4));
    }

    #[test]
    fn disambiguate_policy_and_history() {
        // policy-forced
        let (runs, wickets, _) = disambiguate(4, 5, FormatPolicy::RunsFirst, None).unwrap();
        assert_eq!((runs, wickets), (4, 5));
        // only one side can be wickets
        let (runs, wickets, _) = disambiguate(120, 3, FormatPolicy::Auto, None).unwrap();
        assert_eq!((runs, wickets), (120, 3));
        // history-consistent assignment wins
        let prev = reading(3, 5, 0.0);
        let (runs, wickets, _) = disambiguate(4, 5, FormatPolicy::Auto, Some(&prev)).unwrap();
        assert_eq!((runs, wickets), (4, 5));
        // ambiguous with no history
        assert!(disambiguate(4, 5, FormatPolicy::Auto, None).is_none());
        // symmetric token is unambiguous
        let (runs, wickets, _) = disambiguate(4, 4, FormatPolicy::Auto, None).unwrap();
        assert_eq!((runs, wickets), (4, 4));
    }

    #[test]
    fn format_parse_round_trip() {
        for runs in (0..=300).step_by(7) {
            for wickets in 0..=10 {
                for sep in ['-', '/'] {
                    for (fmt, policy) in [
                        (ScoreFormat::WicketsFirst, FormatPolicy::WicketsFirst),
                        (ScoreFormat::RunsFirst, FormatPolicy::RunsFirst),
                    ] {
                        let text = format_score(runs, wickets, sep, fmt);
                        let r = parse_score(&text, policy, None, 0.0).unwrap();
                        assert_eq!((r.runs, r.wickets, r.separator), (runs, wickets, sep));
                    }
                }
            }
        }
    }

    #[test]
    fn tracker_emits_event_after_debounce() {
        let mut tr = ScoreTracker::new(2);
        for (i, t) in [0.0, 0.1].iter().enumerate() {
            assert!(tr.update(&reading(45, 1, *t), i).unwrap().is_empty());
        }
        assert!(tr.update(&reading(45, 2, 0.2), 2).unwrap().is_empty());
        let events = tr.update(&reading(45, 2, 0.3), 3).unwrap();
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!((e.wickets_before, e.wickets_after, e.runs_at_event), (1, 2, 45));
        assert_eq!(e.t, 0.2);
        assert_eq!(e.frame_index, 2);
    }

    #[test]
    fn tracker_debounce_rejects_singleton_noise() {
        let mut tr = ScoreTracker::new(2);
        tr.update(&reading(45, 1, 0.0), 0).unwrap();
        tr.update(&reading(45, 1, 0.1), 1).unwrap();
        assert!(tr.update(&reading(45, 8, 0.2), 2).unwrap().is_empty());
        assert!(tr.update(&reading(45, 1, 0.3), 3).unwrap().is_empty());
        assert_eq!(tr.accepted().unwrap().wickets, 1);
    }

    #[test]
    fn tracker_rejects_decreases_below_reset_threshold() {
        let mut tr = ScoreTracker::new(2);
        tr.update(&reading(45, 1, 0.0), 0).unwrap();
        tr.update(&reading(45, 1, 0.1), 1).unwrap();
        tr.update(&reading(44, 1, 0.2), 2).unwrap();
        let events = tr.update(&reading(44, 1, 0.3), 3).unwrap();
        assert!(events.is_empty());
        assert_eq!(tr.accepted().unwrap().runs, 45);
    }

    #[test]
    fn tracker_rejects_large_wicket_jump() {
        let mut tr = ScoreTracker::new(2);
        tr.update(&reading(45, 1, 0.0), 0).unwrap();
        tr.update(&reading(45, 1, 0.1), 1).unwrap();
        tr.update(&reading(45, 9, 0.2), 2).unwrap();
        let events = tr.update(&reading(45, 9, 0.3), 3).unwrap();
        assert!(events.is_empty());
        assert_eq!(tr.accepted().unwrap().wickets, 1);
    }

    #[test]
    fn tracker_chains_multi_wicket_gap() {
        let mut tr = ScoreTracker::new(2);
        tr.update(&reading(80, 3, 0.0), 0).unwrap();
        tr.update(&reading(80, 3, 0.1), 1).unwrap();
        tr.update(&reading(81, 5, 0.2), 2).unwrap();
        let events = tr.update(&reading(81, 5, 0.3), 3).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].wickets_after, 4);
        assert_eq!(events[1].wickets_after, 5);
        assert_eq!(events[0].t, events[1].t);
    }

    #[test]
    fn tracker_innings_reset() {
        let mut tr = ScoreTracker::new(2);
        for (i, t) in [0.0, 0.1].iter().enumerate() {
            tr.update(&reading(187, 6, *t), i).unwrap();
        }
        tr.update(&reading(0, 0, 0.2), 2).unwrap();
        let events = tr.update(&reading(0, 0, 0.3), 3).unwrap();
        assert!(events.is_empty());
        assert_eq!(tr.innings_index(), 1);
        assert_eq!(tr.accepted().unwrap().runs, 0);
        // first wicket of the second innings still fires
        tr.update(&reading(4, 1, 0.4), 4).unwrap();
        let events = tr.update(&reading(4, 1, 0.5), 5).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].innings_index, 1);
    }

    #[test]
    fn reset_predicate_cases() {
        let p = |r, w| reading(r, w, 0.0);
        assert!(detect_innings_reset(&p(187, 6), &p(0, 0)));
        assert!(!detect_innings_reset(&p(45, 2), &p(46, 2)));
        assert!(detect_innings_reset(&p(45, 2), &p(24, 0)));
        assert!(!detect_innings_reset(&p(45, 2), &p(44, 2)));
    }

    #[test]
    fn tracker_out_of_order_is_error() {
        let mut tr = ScoreTracker::new(2);
        tr.update(&reading(1, 0, 5.0), 0).unwrap();
        assert!(matches!(
            tr.update(&reading(1, 0, 4.9), 1),
            Err(Error::Sequencing(_))
        ));
    }

    #[test]
    fn tracker_noise_injection_invariance() {
        // streaks with and without interleaved singleton noise give the
        // same events
        let clean: Vec<(u32, u32)> = vec![(10, 0), (10, 0), (10, 1), (10, 1), (25, 2), (25, 2)];
        let noisy: Vec<(u32, u32)> = vec![
            (10, 0),
            (10, 0),
            (99, 9), // singleton noise
            (10, 1),
            (10, 1),
            (7, 0), // singleton noise
            (25, 2),
            (25, 2),
        ];
        let run = |seq: &[(u32, u32)]| {
            let mut tr = ScoreTracker::new(2);
            let mut events = Vec::new();
            for (i, &(r, w)) in seq.iter().enumerate() {
                events.extend(
                    tr.update(&reading(r, w, i as f64 * 0.1), i)
                        .unwrap()
                        .into_iter()
                        .map(|e| (e.wickets_before, e.wickets_after, e.runs_at_event)),
                );
            }
            events
        };
        assert_eq!(run(&clean), run(&noisy));
        assert_eq!(run(&clean).len(), 2);
    }
}

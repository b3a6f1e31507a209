use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{TmDocument, TmError, TranslationUnit};
use crate::extraction::markup;

/// The cleaning checks, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    StripMarkup,
    StripInvisible,
    NormalizeWhitespace,
    ExactDuplicates,
    EmptySide,
    IdenticalSides,
    TooLong,
    LengthRatio,
    NumeralMismatch,
    Mojibake,
    NoLetters,
    CollapseSource,
}

impl CheckId {
    pub const ALL: [CheckId; 12] = [
        CheckId::StripMarkup,
        CheckId::StripInvisible,
        CheckId::NormalizeWhitespace,
        CheckId::ExactDuplicates,
        CheckId::EmptySide,
        CheckId::IdenticalSides,
        CheckId::TooLong,
        CheckId::LengthRatio,
        CheckId::NumeralMismatch,
        CheckId::Mojibake,
        CheckId::NoLetters,
        CheckId::CollapseSource,
    ];

    /// 1-based position in the run order.
    pub fn number(self) -> usize {
        CheckId::ALL.iter().position(|c| *c == self).unwrap() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckId::StripMarkup => "strip_markup",
            CheckId::StripInvisible => "strip_invisible",
            CheckId::NormalizeWhitespace => "normalize_whitespace",
            CheckId::ExactDuplicates => "exact_duplicates",
            CheckId::EmptySide => "empty_side",
            CheckId::IdenticalSides => "identical_sides",
            CheckId::TooLong => "too_long",
            CheckId::LengthRatio => "length_ratio",
            CheckId::NumeralMismatch => "numeral_mismatch",
            CheckId::Mojibake => "mojibake",
            CheckId::NoLetters => "no_letters",
            CheckId::CollapseSource => "collapse_source",
        }
    }

    /// Flag name for checks that mark units instead of removing them.
    pub fn flag(self) -> Option<&'static str> {
        match self {
            CheckId::NumeralMismatch => Some("numerals"),
            CheckId::Mojibake => Some("mojibake"),
            _ => None,
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts either the check name or its number (1–12).
impl FromStr for CheckId {
    type Err = TmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return n
                .checked_sub(1)
                .and_then(|i| CheckId::ALL.get(i).copied())
                .ok_or_else(|| TmError::Invalid(format!("no cleaning check number {n}")));
        }
        CheckId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| TmError::Invalid(format!("unknown cleaning check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    pub checks: BTreeSet<CheckId>,
    pub max_tokens: usize,
    pub max_ratio: f64,
    /// The ratio check only applies when the shorter side has more tokens than this.
    pub ratio_min_tokens: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            checks: CheckId::ALL.into_iter().filter(|c| *c != CheckId::CollapseSource).collect(),
            max_tokens: 120,
            max_ratio: 3.0,
            ratio_min_tokens: 5,
        }
    }
}

impl CleanConfig {
    pub fn with_checks(checks: impl IntoIterator<Item = CheckId>) -> Self {
        CleanConfig { checks: checks.into_iter().collect(), ..Default::default() }
    }

    /// Parses a comma-separated list of check names or numbers.
    pub fn parse_checks(list: &str) -> Result<BTreeSet<CheckId>, TmError> {
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: CheckId,
    pub number: usize,
    pub modified: usize,
    pub removed: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_units: usize,
    pub output_units: usize,
    pub checks: Vec<CheckReport>,
    pub total_modified: usize,
    pub total_removed: usize,
    pub total_flagged: usize,
}

static NUMERALS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[0-9]+").unwrap());
// UTF-8 read as Latin-1 or Windows-1252: "Ã§" for ç, "Ä±" for ı, "ÅŸ" for ş.
static MISDECODED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[ÃÄÅ][\u{A0}-\u{BF}ŒœŠšŸŽžƒˆ˜–—‘’‚“”„†‡•…‰‹›€™]").unwrap());

fn tokens(s: &str) -> usize {
    s.split_whitespace().count()
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn numerals(s: &str) -> Vec<&str> {
    let mut v: Vec<&str> = NUMERALS.find_iter(s).map(|m| m.as_str()).collect();
    v.sort_unstable();
    v
}

fn looks_mojibake(s: &str) -> bool {
    s.chars().any(|c| c == '\u{FFFD}' || ('\u{80}'..='\u{9F}').contains(&c) || ('\u{E000}'..='\u{F8FF}').contains(&c))
        || MISDECODED.is_match(s)
}

fn has_letter(s: &str) -> bool {
    s.chars().any(char::is_alphabetic)
}

/// Runs the enabled checks in their fixed order.
pub fn clean(tm: &TmDocument, config: &CleanConfig) -> (TmDocument, CleaningReport) {
    let mut units: Vec<TranslationUnit> = tm.units.clone();
    let mut report = CleaningReport { input_units: units.len(), ..Default::default() };

    for check in CheckId::ALL {
        if !config.checks.contains(&check) {
            continue;
        }
        let before = units.len();
        let mut entry = CheckReport { check, number: check.number(), modified: 0, removed: 0, flagged: 0 };
        match check {
            CheckId::StripMarkup | CheckId::StripInvisible | CheckId::NormalizeWhitespace => {
                let rewrite = |s: &str| match check {
                    CheckId::StripMarkup => markup::strip_tags(s, " "),
                    CheckId::StripInvisible => s.chars().filter(|c| !markup::is_ignorable(*c)).collect(),
                    _ => normalize_whitespace(s),
                };
                for u in &mut units {
                    let (src, tgt) = (rewrite(&u.src_text), rewrite(&u.tgt_text));
                    if src != u.src_text || tgt != u.tgt_text {
                        u.src_text = src;
                        u.tgt_text = tgt;
                        entry.modified += 1;
                    }
                }
            }
            CheckId::ExactDuplicates => {
                let mut seen = HashSet::new();
                units.retain(|u| seen.insert((u.src_text.clone(), u.tgt_text.clone())));
            }
            CheckId::EmptySide => units.retain(|u| !u.src_text.trim().is_empty() && !u.tgt_text.trim().is_empty()),
            CheckId::IdenticalSides => units.retain(|u| u.src_text != u.tgt_text),
            CheckId::TooLong => {
                units.retain(|u| tokens(&u.src_text) <= config.max_tokens && tokens(&u.tgt_text) <= config.max_tokens)
            }
            CheckId::LengthRatio => units.retain(|u| {
                let (a, b) = (tokens(&u.src_text), tokens(&u.tgt_text));
                let (short, long) = (a.min(b), a.max(b));
                short <= config.ratio_min_tokens || (long as f64) / (short as f64) <= config.max_ratio
            }),
            CheckId::NumeralMismatch | CheckId::Mojibake => {
                let flag = check.flag().unwrap();
                for u in &mut units {
                    let hit = match check {
                        CheckId::NumeralMismatch => numerals(&u.src_text) != numerals(&u.tgt_text),
                        _ => looks_mojibake(&u.src_text) || looks_mojibake(&u.tgt_text),
                    };
                    if hit {
                        entry.flagged += 1;
                        u.flags.insert(flag.to_string());
                    }
                }
            }
            CheckId::NoLetters => units.retain(|u| has_letter(&u.src_text) && has_letter(&u.tgt_text)),
            CheckId::CollapseSource => {
                let mut best: HashMap<&str, usize> = HashMap::new();
                for (i, u) in units.iter().enumerate() {
                    let slot = best.entry(u.src_text.as_str()).or_insert(i);
                    if u.confidence > units[*slot].confidence {
                        *slot = i;
                    }
                }
                let keep: HashSet<usize> = best.into_values().collect();
                let mut i = 0;
                units.retain(|_| {
                    i += 1;
                    keep.contains(&(i - 1))
                });
            }
        }
        entry.removed = before - units.len();
        report.total_modified += entry.modified;
        report.total_removed += entry.removed;
        report.total_flagged += entry.flagged;
        report.checks.push(entry);
    }
    report.output_units = units.len();
    (TmDocument { header: tm.header.clone(), units }, report)
}

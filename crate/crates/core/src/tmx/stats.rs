use std::fmt;

use serde::{Deserialize, Serialize};

use super::TmDocument;

/// Words per sentence in hundredths, truncated: floor(words·100/sentences).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(pub u64);

impl Rate {
    pub fn truncated(words: u64, sentences: u64) -> Rate {
        if sentences == 0 {
            return Rate(0);
        }
        Rate((words as u128 * 100 / sentences as u128) as u64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tu_count: u64,
    pub src_words: u64,
    pub tgt_words: u64,
    pub src_rate: Rate,
    pub tgt_rate: Rate,
    pub empty_corpus: bool,
}

impl CorpusStats {
    pub fn from_counts(tu_count: u64, src_words: u64, tgt_words: u64) -> Self {
        CorpusStats {
            tu_count,
            src_words,
            tgt_words,
            src_rate: Rate::truncated(src_words, tu_count),
            tgt_rate: Rate::truncated(tgt_words, tu_count),
            empty_corpus: tu_count == 0,
        }
    }

    /// Two-column table laid out like a corpus statistics table in a report.
    pub fn table(&self) -> String {
        let rows = [
            ("Source Word Count", self.src_words.to_string()),
            ("Target Word Count", self.tgt_words.to_string()),
            ("Sentence Count", self.tu_count.to_string()),
            ("Source Word / Sentence Rate", self.src_rate.to_string()),
            ("Target Word / Sentence Rate", self.tgt_rate.to_string()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v:>10}\n"));
        }
        if self.empty_corpus {
            out.push_str("(empty corpus)\n");
        }
        out
    }
}

/// Whitespace-token counts over the exported (non-rejected) units.
pub fn stats(tm: &TmDocument) -> CorpusStats {
    let (mut tu, mut src, mut tgt) = (0u64, 0u64, 0u64);
    for u in tm.live_units() {
        tu += 1;
        src += u.src_text.split_whitespace().count() as u64;
        tgt += u.tgt_text.split_whitespace().count() as u64;
    }
    CorpusStats::from_counts(tu, src, tgt)
}

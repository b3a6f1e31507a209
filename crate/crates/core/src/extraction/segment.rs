use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    /// Length in characters (Unicode scalar values).
    pub char_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedDoc {
    pub doc_key: String,
    pub lang: String,
    pub sentences: Vec<Sentence>,
}

impl SegmentedDoc {
    pub fn new(doc_key: impl Into<String>, lang: impl Into<String>, texts: Vec<String>) -> Self {
        let sentences = texts
            .into_iter()
            .enumerate()
            .map(|(index, text)| Sentence { index, char_len: text.chars().count(), text })
            .collect();
        SegmentedDoc { doc_key: doc_key.into(), lang: lang.into(), sentences }
    }
}

/// Language-specific splitter settings. Only abbreviations vary by language.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmenterProfile {
    pub abbreviations: Vec<String>,
}

const ENGLISH_ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "et al.", "Dr.", "vs.", "Fig."];
const TURKISH_ABBREVIATIONS: &[&str] = &["vb.", "vs.", "Dr.", "Prof.", "Doç."];

impl SegmenterProfile {
    /// Shipped profile for a language tag (`en`, `tr`, `en-US`, ...); other
    /// languages get an empty abbreviation list.
    pub fn for_lang(lang: &str) -> Self {
        let primary = lang.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
        let list = match primary.as_str() {
            "en" => ENGLISH_ABBREVIATIONS,
            "tr" => TURKISH_ABBREVIATIONS,
            _ => &[],
        };
        SegmenterProfile { abbreviations: list.iter().map(|s| s.to_string()).collect() }
    }

    /// Parses one abbreviation per line; `#` starts a comment line.
    pub fn from_list(text: &str) -> Self {
        SegmenterProfile {
            abbreviations: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect(),
        }
    }

    pub fn extend(&mut self, extra: impl IntoIterator<Item = String>) {
        for a in extra {
            if !self.abbreviations.contains(&a) {
                self.abbreviations.push(a);
            }
        }
    }

    /// `head` ends with a listed abbreviation that starts a token.
    fn ends_with_abbreviation(&self, head: &str) -> bool {
        self.abbreviations.iter().any(|abbr| {
            head.strip_suffix(abbr.as_str())
                .is_some_and(|before| before.chars().next_back().is_none_or(|c| c.is_whitespace() || c == '('))
        })
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '”' | '’' | '»')
}

/// Splits blocks into sentences. Block boundaries always split; inside a
/// block a split follows `.`, `!`, `?` or `:` (plus any closing quotes or
/// brackets) when whitespace and then an uppercase letter or digit come next.
/// A period does not split after a listed abbreviation or a single letter.
/// Decimals such as `62.3` never split because no whitespace follows the dot.
pub fn segment_sentences<S: AsRef<str>>(
    doc_key: &str,
    blocks: &[S],
    lang: &str,
    profile: &SegmenterProfile,
) -> SegmentedDoc {
    let mut texts = Vec::new();
    for block in blocks {
        let normalized = block.as_ref().split_whitespace().collect::<Vec<_>>().join(" ");
        split_block(&normalized, profile, &mut texts);
    }
    SegmentedDoc::new(doc_key, lang, texts)
}

fn split_block(text: &str, profile: &SegmenterProfile, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut start = 0;
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if !matches!(c, '.' | '!' | '?' | ':') {
            k += 1;
            continue;
        }
        let mut end = k + 1;
        while end < chars.len() && is_closer(chars[end].1) {
            end += 1;
        }
        let mut next = end;
        while next < chars.len() && chars[next].1.is_whitespace() {
            next += 1;
        }
        let boundary = next > end
            && next < chars.len()
            && (chars[next].1.is_uppercase() || chars[next].1.is_ascii_digit())
            && !(c == '.' && is_period_exception(&text[..pos + 1], profile));
        if boundary {
            let cut = chars[end].0;
            push_trimmed(&text[start..cut], out);
            start = cut;
            k = next;
        } else {
            k += 1;
        }
    }
    push_trimmed(&text[start..], out);
}

fn is_period_exception(head: &str, profile: &SegmenterProfile) -> bool {
    if profile.ends_with_abbreviation(head) {
        return true;
    }
    let token = head.rsplit(char::is_whitespace).next().unwrap_or("");
    let stem = token.trim_end_matches('.').trim_start_matches(['(', '[', '"', '\'']);
    let mut letters = stem.chars();
    matches!((letters.next(), letters.next()), (Some(l), None) if l.is_alphabetic())
}

fn push_trimmed(s: &str, out: &mut Vec<String>) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

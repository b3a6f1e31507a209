//! Minimal tag tokenizer shared by the HTML filter and the TM cleaner.
//!
//! A tag starts at `<` followed by a letter, `!` or `/` (control and
//! zero-width characters in between are skipped, so they cannot hide a tag)
//! and runs to the next unquoted `>`, or to the end of the text when
//! unterminated. `<!-- ... -->` comments run to their closing marker.

/// Control (other than tab, LF, CR) and invisible formatting characters.
pub fn is_ignorable(c: char) -> bool {
    (c.is_control() && !matches!(c, '\t' | '\n' | '\r'))
        || matches!(c,
            '\u{00AD}' | '\u{200B}'..='\u{200F}' | '\u{202A}'..='\u{202E}'
            | '\u{2060}'..='\u{2064}' | '\u{FEFF}')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece<'a> {
    Text(&'a str),
    /// A tag with its lowercased name (`br`, `/p`, `!--`, `!doctype`).
    Tag(String),
}

impl Piece<'_> {
    /// Element name without a leading `/`, and whether this is a closing tag.
    pub fn element(&self) -> Option<(&str, bool)> {
        match self {
            Piece::Tag(name) => Some(match name.strip_prefix('/') {
                Some(rest) => (rest, true),
                None => (name.as_str(), false),
            }),
            Piece::Text(_) => None,
        }
    }
}

/// Byte offset just past the tag opener at `start`, or `None` if the `<` at
/// `start` does not begin a tag.
fn tag_opener(text: &str, start: usize) -> Option<usize> {
    let mut chars = text[start + 1..].char_indices();
    for (off, c) in chars.by_ref() {
        if is_ignorable(c) {
            continue;
        }
        return (c.is_ascii_alphabetic() || c == '!' || c == '/').then_some(start + 1 + off);
    }
    None
}

pub fn tokenize(text: &str) -> Vec<Piece<'_>> {
    let bytes = text.as_bytes();
    let mut pieces = Vec::new();
    let mut pos = 0;
    let mut text_start = 0;
    while let Some(rel) = text[pos..].find('<') {
        let lt = pos + rel;
        let Some(name_start) = tag_opener(text, lt) else {
            pos = lt + 1;
            continue;
        };
        if lt > text_start {
            pieces.push(Piece::Text(&text[text_start..lt]));
        }
        let end = if text[name_start..].starts_with("!--") {
            text[name_start + 3..].find("-->").map_or(text.len(), |i| name_start + 3 + i + 3)
        } else {
            let mut quote: Option<u8> = None;
            let mut i = name_start;
            loop {
                if i >= bytes.len() {
                    break text.len();
                }
                match (quote, bytes[i]) {
                    (None, b'>') => break i + 1,
                    (None, q @ (b'"' | b'\'')) if i > name_start && bytes[i - 1] == b'=' => quote = Some(q),
                    (Some(q), b) if b == q => quote = None,
                    _ => {}
                }
                i += 1;
            }
        };
        let name: String = if text[name_start..].starts_with("!--") {
            "!--".into()
        } else {
            let raw = &text[name_start..end];
            let slash = raw.starts_with('/');
            let body: String = raw[usize::from(slash)..]
                .chars()
                .take_while(|c| c.is_alphanumeric() || matches!(c, '!' | '-' | '_' | ':'))
                .collect::<String>()
                .to_lowercase();
            if slash { format!("/{body}") } else { body }
        };
        pieces.push(Piece::Tag(name));
        pos = end;
        text_start = end;
    }
    if text_start < text.len() {
        pieces.push(Piece::Text(&text[text_start..]));
    }
    pieces
}

/// True when `text` contains a tag opener.
pub fn contains_markup(text: &str) -> bool {
    text.match_indices('<').any(|(i, _)| tag_opener(text, i).is_some())
}

/// Replaces every tag with `replacement`, repeating until no tag remains
/// (removing one tag can expose another).
pub fn strip_tags(text: &str, replacement: &str) -> String {
    let mut current = text.to_string();
    while contains_markup(&current) {
        current = tokenize(&current)
            .into_iter()
            .map(|p| match p {
                Piece::Text(t) => t,
                Piece::Tag(_) => replacement,
            })
            .collect();
    }
    current
}

use std::sync::LazyLock;

use encoding_rs::{CoderResult, DecoderResult, Encoding};
use regex::bytes::Regex;
use serde::{Deserialize, Serialize};

use super::ExtractError;

/// How many leading bytes are scanned for a `<meta charset>` declaration.
const SNIFF_LIMIT: usize = 4096;

static META_CHARSET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)<meta\b[^>]*?charset\s*=\s*["']?\s*([A-Za-z0-9_:.\-]+)"#).unwrap()
});

/// Which codepage to decode a page with.
///
/// Detection order is fixed: byte-order mark, then the page's declared
/// `<meta>` charset, then `fallback`. A set `override_encoding` wins over all
/// of them, which is what pages that declare one charset but are stored in
/// another need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct EncodingPolicy {
    #[serde(rename = "override", skip_serializing_if = "Option::is_none")]
    pub override_encoding: Option<String>,
    pub fallback: String,
}

impl Default for EncodingPolicy {
    fn default() -> Self {
        EncodingPolicy { override_encoding: None, fallback: "utf-8".into() }
    }
}

impl EncodingPolicy {
    pub fn with_override(label: &str) -> Self {
        EncodingPolicy { override_encoding: Some(label.into()), ..Default::default() }
    }

    /// Checks that every codepage name resolves.
    pub fn validate(&self) -> Result<(), ExtractError> {
        lookup(&self.fallback)?;
        if let Some(label) = &self.override_encoding {
            lookup(label)?;
        }
        Ok(())
    }
}

/// Resolves a codepage label (WHATWG registry: `windows-1254`, `windows-1252`,
/// `utf-8`, `iso-8859-9`, ...).
fn lookup(label: &str) -> Result<&'static Encoding, ExtractError> {
    Encoding::for_label(label.trim().as_bytes()).ok_or_else(|| ExtractError::UnknownEncoding(label.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingSource {
    Override,
    Bom,
    Declared,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub text: String,
    pub encoding_used: String,
    pub source: EncodingSource,
    /// Number of malformed byte sequences replaced with U+FFFD.
    pub replacements: usize,
}

fn declared_charset(raw: &[u8]) -> Option<&'static Encoding> {
    let head = &raw[..raw.len().min(SNIFF_LIMIT)];
    let label = META_CHARSET.captures(head)?.get(1)?.as_bytes();
    let enc = Encoding::for_label(label)?;
    // A meta tag readable as ASCII cannot describe a UTF-16 document.
    if enc == encoding_rs::UTF_16LE || enc == encoding_rs::UTF_16BE {
        return Some(encoding_rs::UTF_8);
    }
    Some(enc)
}

pub fn decode_bytes(raw: &[u8], policy: &EncodingPolicy) -> Result<Decoded, ExtractError> {
    policy.validate()?;
    let bom = Encoding::for_bom(raw);
    let (encoding, source, body) = if let Some(label) = &policy.override_encoding {
        let enc = lookup(label)?;
        let body = match bom {
            Some((bom_enc, len)) if bom_enc == enc => &raw[len..],
            _ => raw,
        };
        (enc, EncodingSource::Override, body)
    } else if let Some((enc, len)) = bom {
        (enc, EncodingSource::Bom, &raw[len..])
    } else if let Some(enc) = declared_charset(raw) {
        (enc, EncodingSource::Declared, raw)
    } else {
        (lookup(&policy.fallback)?, EncodingSource::Fallback, raw)
    };

    let (text, replacements) = decode_counting(encoding, body);
    Ok(Decoded { text, encoding_used: encoding.name().to_string(), source, replacements })
}

fn decode_counting(encoding: &'static Encoding, mut input: &[u8]) -> (String, usize) {
    let mut decoder = encoding.new_decoder_without_bom_handling();
    let mut out = String::with_capacity(
        decoder.max_utf8_buffer_length_without_replacement(input.len()).unwrap_or(input.len() * 3),
    );
    let mut replacements = 0;
    loop {
        let (result, read) = decoder.decode_to_string_without_replacement(input, &mut out, true);
        input = &input[read..];
        match result {
            DecoderResult::InputEmpty => break,
            DecoderResult::OutputFull => {
                out.reserve(input.len().max(16) * 3);
            }
            DecoderResult::Malformed(_, _) => {
                out.push('\u{FFFD}');
                replacements += 1;
            }
        }
    }
    (out, replacements)
}

/// Encodes text in the named codepage. Unmappable characters become numeric
/// character references, as encoding_rs does for HTML forms.
pub fn encode_text(text: &str, label: &str) -> Result<Vec<u8>, ExtractError> {
    let enc = lookup(label)?;
    let mut encoder = enc.new_encoder();
    let mut out = Vec::with_capacity(text.len() * 2);
    let mut input = text;
    loop {
        out.reserve(input.len() * 4 + 16);
        let (result, read, _) = encoder.encode_from_utf8_to_vec(input, &mut out, true);
        input = &input[read..];
        if result == CoderResult::InputEmpty {
            break;
        }
    }
    Ok(out)
}

//! Decoding, span extraction and sentence segmentation of downloaded pages.

mod encoding;
mod filter;
pub mod markup;
mod segment;

pub use encoding::{decode_bytes, encode_text, Decoded, EncodingPolicy, EncodingSource};
pub use filter::{extract, ChainSpec, Extracted, FilterChain, HtmlFilter, SideChain, SpanRule};
pub use segment::{segment_sentences, SegmentedDoc, SegmenterProfile, Sentence};

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("unknown codepage {0:?}")]
    UnknownEncoding(String),
    #[error("span rule {pattern:?} does not compile: {source}")]
    BadRule { pattern: String, source: regex::Error },
    #[error("{0}")]
    Config(String),
}

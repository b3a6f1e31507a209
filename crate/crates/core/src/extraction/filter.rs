use std::collections::BTreeSet;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::markup::{self, Piece};
use super::{EncodingPolicy, ExtractError};

/// A keep-span rule. `.` matches newlines and quantifiers are lazy unless
/// written with a trailing `?`, so `<h2>.*</h2>` stops at the first `</h2>`.
#[derive(Debug, Clone)]
pub struct SpanRule {
    regex: Regex,
}

impl SpanRule {
    pub fn new(pattern: &str) -> Result<Self, ExtractError> {
        let regex = RegexBuilder::new(pattern)
            .dot_matches_new_line(true)
            .swap_greed(true)
            .build()
            .map_err(|source| ExtractError::BadRule { pattern: pattern.into(), source })?;
        Ok(SpanRule { regex })
    }

    pub fn pattern(&self) -> &str {
        self.regex.as_str()
    }

    /// Non-overlapping matches in document order.
    pub fn spans<'t>(&self, text: &'t str) -> impl Iterator<Item = &'t str> + use<'_, 't> {
        self.regex.find_iter(text).map(|m| m.as_str())
    }
}

fn default_break_tags() -> BTreeSet<String> {
    ["br", "p", "h1", "h2", "h3", "h4", "h5", "h6", "div", "li"]
        .into_iter()
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct HtmlFilter {
    /// Tags (opening or closing) that end a text block.
    pub break_tags: BTreeSet<String>,
    pub entity_decode: bool,
}

impl Default for HtmlFilter {
    fn default() -> Self {
        HtmlFilter { break_tags: default_break_tags(), entity_decode: true }
    }
}

/// Span rules followed by the HTML filter. No span rules means the whole
/// document is kept.
#[derive(Debug, Clone)]
pub struct FilterChain {
    pub span_rules: Vec<SpanRule>,
    pub html_filter: HtmlFilter,
}

impl FilterChain {
    pub fn new<S: AsRef<str>>(patterns: &[S], html_filter: HtmlFilter) -> Result<Self, ExtractError> {
        let span_rules = patterns.iter().map(|p| SpanRule::new(p.as_ref())).collect::<Result<_, _>>()?;
        let html_filter = HtmlFilter {
            break_tags: html_filter.break_tags.iter().map(|t| t.to_lowercase()).collect(),
            ..html_filter
        };
        Ok(FilterChain { span_rules, html_filter })
    }

    /// Keeps the whole document and only applies the HTML filter.
    pub fn match_all() -> Self {
        FilterChain { span_rules: Vec::new(), html_filter: HtmlFilter::default() }
    }
}

/// Extraction settings of one language side, as stored in a chain file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SideChain {
    pub span_rules: Vec<String>,
    pub encoding: EncodingPolicy,
    /// Extra abbreviations for the sentence splitter.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub abbreviations: Vec<String>,
}

/// Chain file contents: one HTML filter shared by both sides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub html_filter: HtmlFilter,
    pub source: SideChain,
    pub target: SideChain,
}

impl ChainSpec {
    pub fn from_toml(text: &str) -> Result<Self, ExtractError> {
        let spec: ChainSpec = toml::from_str(text).map_err(|e| ExtractError::Config(e.to_string()))?;
        spec.source.encoding.validate()?;
        spec.target.encoding.validate()?;
        spec.source_chain()?;
        spec.target_chain()?;
        Ok(spec)
    }

    pub fn source_chain(&self) -> Result<FilterChain, ExtractError> {
        FilterChain::new(&self.source.span_rules, self.html_filter.clone())
    }

    pub fn target_chain(&self) -> Result<FilterChain, ExtractError> {
        FilterChain::new(&self.target.span_rules, self.html_filter.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extracted {
    pub blocks: Vec<String>,
    /// Span rules were configured but none matched.
    pub no_match: bool,
}

pub fn extract(text: &str, chain: &FilterChain) -> Extracted {
    let spans: Vec<&str> = if chain.span_rules.is_empty() {
        vec![text]
    } else {
        chain.span_rules.iter().flat_map(|r| r.spans(text)).collect()
    };
    let no_match = !chain.span_rules.is_empty() && spans.is_empty();
    let blocks = spans.into_iter().flat_map(|s| html_blocks(s, &chain.html_filter)).collect();
    Extracted { blocks, no_match }
}

fn html_blocks(span: &str, filter: &HtmlFilter) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current = String::new();
    let mut skip_until: Option<&'static str> = None;
    for piece in markup::tokenize(span) {
        match (&piece, skip_until) {
            (Piece::Tag(_), Some(close)) => {
                if piece.element() == Some((close, true)) {
                    skip_until = None;
                }
            }
            (Piece::Text(_), Some(_)) => {}
            (Piece::Text(t), None) => current.push_str(t),
            (Piece::Tag(_), None) => {
                let (name, closing) = piece.element().unwrap();
                if !closing && (name == "script" || name == "style") {
                    skip_until = Some(if name == "script" { "script" } else { "style" });
                }
                if filter.break_tags.contains(name) {
                    finish_block(&mut current, filter, &mut blocks);
                }
            }
        }
    }
    finish_block(&mut current, filter, &mut blocks);
    blocks
}

fn finish_block(current: &mut String, filter: &HtmlFilter, blocks: &mut Vec<String>) {
    let raw = std::mem::take(current);
    let decoded = if filter.entity_decode {
        html_escape::decode_html_entities(&raw).into_owned()
    } else {
        raw
    };
    // Entities may have spelled out a tag.
    let text = markup::strip_tags(&decoded, "");
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if !normalized.is_empty() {
        blocks.push(normalized);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ANCHOR_PAGE: &str = r#"<html><head><title>ignored</title></head><body>
<span class="journalArticleInTitleDOI"><a href="jvi.aspx?x=1">Türk Kardiyol Dern Ars. 2001</a></span>
<h2 class='journalArticleInTitle'>EKG ile Senkronize Miyokard Perfüzyon Sintigrafisi
Karşılaştırılması</h2>
<p>Bu prospektif çalışmanın amacı EF değerlerini karşılaştırmaktır.<br>METOD<br>Bu çalışmada 45 hasta yer aldı.<br>Anahtar Kelimeler:<br>Ejeksiyon fraksiyonu, GSPECT<br>
<hr noshade size=4 align=center color=#d3d3d3>
<div id="cite"><h4>Comparison of Ejection Fraction</h4></div>
</body></html>"#;

    #[test]
    fn two_anchor_rules_extract_title_and_abstract() {
        let chain = FilterChain::new(
            &[
                "<h2 class='journalArticleInTitle'>.*</h2>",
                "<p>.*<hr noshade size=4 align=center color=#d3d3d3>",
            ],
            HtmlFilter::default(),
        )
        .unwrap();
        let out = extract(ANCHOR_PAGE, &chain);
        assert!(!out.no_match);
        assert_eq!(
            out.blocks,
            vec![
                "EKG ile Senkronize Miyokard Perfüzyon Sintigrafisi Karşılaştırılması",
                "Bu prospektif çalışmanın amacı EF değerlerini karşılaştırmaktır.",
                "METOD",
                "Bu çalışmada 45 hasta yer aldı.",
                "Anahtar Kelimeler:",
                "Ejeksiyon fraksiyonu, GSPECT",
            ]
        );
    }

    #[test]
    fn rule_order_wins_over_document_order() {
        let chain = FilterChain::new(&["<i>.*</i>", "<b>.*</b>"], HtmlFilter::default()).unwrap();
        let out = extract("<b>one</b><i>two</i><b>three</b>", &chain);
        assert_eq!(out.blocks, vec!["two", "one", "three"]);
    }

    #[test]
    fn match_all_without_markup_is_identity() {
        let out = extract("Plain text with no markup.", &FilterChain::match_all());
        assert_eq!(out.blocks, vec!["Plain text with no markup."]);
        assert!(!out.no_match);
    }

    #[test]
    fn single_summary_rule_keeps_only_turkish_half() {
        let page = r#"<div class="summaryMain"><b>ÖZET<br></b>Amaç: Hastaları inceledik.</div>
<div class="summarySub">ABSTRACT<br>Objective: We studied the patients.</div>"#;
        let chain =
            FilterChain::new(&[r#"<div class="summaryMain"><b>ÖZET<br></b>.*</div>"#], HtmlFilter::default()).unwrap();
        let out = extract(page, &chain);
        assert_eq!(out.blocks, vec!["ÖZET", "Amaç: Hastaları inceledik."]);
        assert!(out.blocks.iter().all(|b| !b.contains("ABSTRACT") && !b.contains("Objective")));
    }

    #[test]
    fn repeated_anchors_do_not_over_capture() {
        let chain = FilterChain::new(&["<h2>.*</h2>"], HtmlFilter::default()).unwrap();
        let out = extract("<h2>A</h2>menu<h2>B</h2>", &chain);
        assert_eq!(out.blocks, vec!["A", "B"]);
    }

    #[test]
    fn zero_matches_warn_instead_of_failing() {
        let chain = FilterChain::new(&["<article>.*</article>"], HtmlFilter::default()).unwrap();
        let out = extract("<p>nothing here</p>", &chain);
        assert!(out.blocks.is_empty());
        assert!(out.no_match);
    }

    #[test]
    fn entities_scripts_and_bad_rules() {
        let out = extract(
            "<script>var a = '<p>x</p>';</script>Tom &amp; Jerry&nbsp;&lt;b&gt;run&lt;/b&gt;",
            &FilterChain::match_all(),
        );
        assert_eq!(out.blocks, vec!["Tom & Jerry run"]);
        let raw = HtmlFilter { entity_decode: false, ..Default::default() };
        let out = extract("a &amp; b", &FilterChain::new::<&str>(&[], raw).unwrap());
        assert_eq!(out.blocks, vec!["a &amp; b"]);
        assert!(matches!(FilterChain::new(&["(unclosed"], HtmlFilter::default()), Err(ExtractError::BadRule { .. })));
    }

    #[test]
    fn chain_file_parses() {
        let spec = ChainSpec::from_toml(
            r#"
[html_filter]
break_tags = ["br", "P"]
[source]
span_rules = ["<h2 class='journalArticleInTitle'>.*</h2>"]
encoding = { override = "windows-1254" }
[target]
span_rules = ["<h2 class='journalArticleInTitleeng'>.*</h2>"]
encoding = { fallback = "windows-1252" }
"#,
        )
        .unwrap();
        assert_eq!(spec.source.encoding.override_encoding.as_deref(), Some("windows-1254"));
        assert!(spec.source_chain().unwrap().html_filter.break_tags.contains("p"));
        assert!(ChainSpec::from_toml("[source]\nencoding = { override = \"x-none\" }").is_err());
    }

    proptest! {
        #[test]
        fn no_markup_survives(s in "(<[a-z/!]{0,4}|>|&lt;|&gt;|&amp;|[a-zA-Z ]|<br>|</p>|\"){0,60}") {
            let out = extract(&s, &FilterChain::match_all());
            for block in &out.blocks {
                prop_assert!(!markup::contains_markup(block), "{:?}", block);
                prop_assert!(!block.is_empty());
            }
        }
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use quick_xml::events::attributes::Attributes;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::Regex;

use super::{Provenance, Status, TmDocument, TmError, TmHeader, TranslationUnit};
use crate::alignment::BeadKind;

const PROP_TGTLANG: &str = "x-tgtlang";
const PROP_DOC_KEY: &str = "x-doc-key";
const PROP_BEAD: &str = "x-bead";
const PROP_BEAD_INDEX: &str = "x-bead-index";
const PROP_CONFIDENCE: &str = "x-confidence";
const PROP_STATUS: &str = "x-status";
const PROP_FLAG: &str = "x-flag";

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

/// Characters XML 1.0 cannot carry, not even as references.
fn xml_forbidden(c: char) -> bool {
    matches!(c, '\u{0}'..='\u{8}' | '\u{B}' | '\u{C}' | '\u{E}'..='\u{1F}' | '\u{FFFE}' | '\u{FFFF}')
}

fn check_chars(id: &str, text: &str) -> Result<(), TmError> {
    match text.chars().find(|c| xml_forbidden(*c)) {
        Some(c) => Err(TmError::Invalid(format!("unit {id} contains U+{:04X}, which XML cannot represent", c as u32))),
        None => Ok(()),
    }
}

/// Serializes `tm` as TMX 1.4b. Rejected units are left out.
pub fn write_tmx_string(tm: &TmDocument) -> Result<String, TmError> {
    tm.validate()?;
    let h = &tm.header;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<tmx version=\"1.4\">\n");
    let _ = writeln!(
        out,
        "  <header creationtool=\"{}\" creationtoolversion=\"{}\" segtype=\"{}\" o-tmf=\"{}\" adminlang=\"{}\" srclang=\"{}\" datatype=\"{}\">",
        escape_attr(&h.creation_tool),
        escape_attr(&h.creation_tool_version),
        escape_attr(&h.segtype),
        escape_attr(&h.creation_tool),
        escape_attr(&h.adminlang),
        escape_attr(&h.srclang),
        escape_attr(&h.datatype),
    );
    let _ = writeln!(out, "    <prop type=\"{PROP_TGTLANG}\">{}</prop>", escape_text(&h.tgtlang));
    out.push_str("  </header>\n  <body>\n");
    for u in tm.live_units() {
        check_chars(&u.id, &u.src_text)?;
        check_chars(&u.id, &u.tgt_text)?;
        let _ = writeln!(out, "    <tu tuid=\"{}\">", escape_attr(&u.id));
        let mut prop = |kind: &str, value: &str| {
            let _ = writeln!(out, "      <prop type=\"{kind}\">{}</prop>", escape_text(value));
        };
        prop(PROP_DOC_KEY, &u.provenance.doc_key);
        prop(PROP_BEAD, u.provenance.bead.as_str());
        prop(PROP_BEAD_INDEX, &u.provenance.bead_index.to_string());
        prop(PROP_CONFIDENCE, &u.confidence.to_string());
        prop(PROP_STATUS, u.status.as_str());
        for flag in &u.flags {
            prop(PROP_FLAG, flag);
        }
        for (lang, text) in [(&u.src_lang, &u.src_text), (&u.tgt_lang, &u.tgt_text)] {
            let _ = writeln!(out, "      <tuv xml:lang=\"{}\">", escape_attr(lang));
            let _ = writeln!(out, "        <seg>{}</seg>", escape_text(text));
            out.push_str("      </tuv>\n");
        }
        out.push_str("    </tu>\n");
    }
    out.push_str("  </body>\n</tmx>\n");
    Ok(out)
}

pub fn write_tmx(tm: &TmDocument, path: &Path) -> Result<(), TmError> {
    let text = write_tmx_string(tm)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

static TOOL_VERSION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"creationtoolversion="[^"]*""#).unwrap());

/// Normal form for comparing TMX files across tool versions and platforms:
/// LF line endings, no creation tool version, single trailing newline.
pub fn canonicalize_tmx(text: &str) -> String {
    let lf = text.replace("\r\n", "\n");
    let mut out = TOOL_VERSION.replace(&lf, r#"creationtoolversion="""#).trim_end().to_string();
    out.push('\n');
    out
}

/// Elements the reader skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadReport {
    pub ignored_elements: Vec<String>,
}

pub fn read_tmx(path: &Path) -> Result<TmDocument, TmError> {
    let text = fs::read_to_string(path)?;
    Ok(read_tmx_str(&text)?.0)
}

#[derive(Default)]
struct UnitBuilder {
    id: Option<String>,
    props: Vec<(String, String)>,
    tuvs: Vec<(String, String)>,
}

enum Capture {
    None,
    HeaderProp(String),
    UnitProp(String),
    Seg,
}

fn line_col(text: &str, offset: u64) -> (usize, usize) {
    let offset = (offset as usize).min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = offset - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Parses TMX text. Elements outside the TMX core (and inline markup inside
/// segments) are skipped and listed in the report.
pub fn read_tmx_str(text: &str) -> Result<(TmDocument, ReadReport), TmError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);
    let err_at = |pos: u64, message: String| {
        let (line, column) = line_col(text, pos);
        TmError::Parse { line, column, message }
    };

    let mut report = ReadReport::default();
    let mut header: Option<TmHeader> = None;
    let mut header_tgtlang: Option<String> = None;
    let mut raw_units: Vec<(UnitBuilder, u64)> = Vec::new();
    let mut unit: Option<UnitBuilder> = None;
    let mut tuv_lang: Option<String> = None;
    let mut seg: Option<String> = None;
    let mut capture = Capture::None;
    let mut buffer = String::new();
    let mut skip_depth = 0usize;
    let mut saw_root = false;

    loop {
        let pos = reader.buffer_position();
        let event = reader.read_event().map_err(|e| err_at(reader.error_position(), e.to_string()))?;
        match event {
            Event::Eof => break,
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if skip_depth > 0 {
                    if !empty {
                        skip_depth += 1;
                    }
                    continue;
                }
                match name.as_str() {
                    "tmx" => saw_root = true,
                    "body" => {}
                    "header" => header = Some(parse_header(e, &reader).map_err(|m| err_at(pos, m))?),
                    "prop" if !empty => {
                        let kind = attr(e.attributes(), "type", &reader).map_err(|m| err_at(pos, m))?.unwrap_or_default();
                        capture = if unit.is_some() { Capture::UnitProp(kind) } else { Capture::HeaderProp(kind) };
                        buffer.clear();
                    }
                    "tu" => {
                        let id = attr(e.attributes(), "tuid", &reader).map_err(|m| err_at(pos, m))?;
                        let b = UnitBuilder { id, ..Default::default() };
                        if empty {
                            raw_units.push((b, pos));
                        } else {
                            unit = Some(b);
                        }
                    }
                    "tuv" if unit.is_some() => {
                        let lang = attr(e.attributes(), "xml:lang", &reader)
                            .map_err(|m| err_at(pos, m))?
                            .or(attr(e.attributes(), "lang", &reader).map_err(|m| err_at(pos, m))?)
                            .ok_or_else(|| err_at(pos, "tuv without xml:lang".into()))?;
                        tuv_lang = Some(lang);
                        seg = None;
                        if empty {
                            return Err(err_at(pos, "tuv without seg".into()));
                        }
                    }
                    "seg" if tuv_lang.is_some() => {
                        seg = Some(String::new());
                        if !empty {
                            capture = Capture::Seg;
                            buffer.clear();
                        }
                    }
                    other => {
                        tracing::debug!(element = other, "ignoring element");
                        report.ignored_elements.push(other.to_string());
                        if !empty {
                            skip_depth = 1;
                        }
                    }
                }
            }
            Event::End(ref e) => {
                if skip_depth > 0 {
                    skip_depth -= 1;
                    continue;
                }
                match e.name().as_ref() {
                    b"prop" => {
                        match std::mem::replace(&mut capture, Capture::None) {
                            Capture::UnitProp(kind) => {
                                if let Some(u) = unit.as_mut() {
                                    u.props.push((kind, buffer.clone()));
                                }
                            }
                            Capture::HeaderProp(kind) if kind == PROP_TGTLANG => header_tgtlang = Some(buffer.clone()),
                            _ => {}
                        }
                    }
                    b"seg" => {
                        if matches!(capture, Capture::Seg) {
                            seg = Some(buffer.clone());
                            capture = Capture::None;
                        }
                    }
                    b"tuv" => {
                        let lang = tuv_lang.take();
                        let text = seg.take().ok_or_else(|| err_at(pos, "tuv without seg".into()))?;
                        if let (Some(u), Some(lang)) = (unit.as_mut(), lang) {
                            u.tuvs.push((lang, text));
                        }
                    }
                    b"tu" => {
                        if let Some(u) = unit.take() {
                            raw_units.push((u, pos));
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(ref t) => {
                if skip_depth == 0 && !matches!(capture, Capture::None) {
                    buffer.push_str(&t.xml_content().map_err(|e| err_at(pos, e.to_string()))?);
                }
            }
            Event::CData(ref t) => {
                if skip_depth == 0 && !matches!(capture, Capture::None) {
                    buffer.push_str(&t.xml_content().map_err(|e| err_at(pos, e.to_string()))?);
                }
            }
            Event::GeneralRef(ref r) if skip_depth == 0 && !matches!(capture, Capture::None) => {
                let c = match r.resolve_char_ref().map_err(|e| err_at(pos, e.to_string()))? {
                    Some(c) => c,
                    None => {
                        let name = r.decode().map_err(|e| err_at(pos, e.to_string()))?;
                        match name.as_ref() {
                            "amp" => '&',
                            "lt" => '<',
                            "gt" => '>',
                            "quot" => '"',
                            "apos" => '\'',
                            other => return Err(err_at(pos, format!("unknown entity &{other};"))),
                        }
                    }
                };
                buffer.push(c);
            }
            _ => {}
        }
    }

    if !saw_root {
        return Err(err_at(0, "missing <tmx> root element".into()));
    }
    let mut header = header.ok_or_else(|| err_at(0, "missing <header>".into()))?;
    let mut units = Vec::with_capacity(raw_units.len());
    for (ordinal, (b, pos)) in raw_units.into_iter().enumerate() {
        units.push(build_unit(b, ordinal, &header.srclang).map_err(|m| err_at(pos, m))?);
    }
    header.tgtlang = header_tgtlang.or_else(|| units.first().map(|u| u.tgt_lang.clone())).unwrap_or_default();
    let tm = TmDocument { header, units };
    tm.validate()?;
    Ok((tm, report))
}

fn attr(attrs: Attributes<'_>, key: &str, reader: &Reader<&[u8]>) -> Result<Option<String>, String> {
    for a in attrs {
        let a = a.map_err(|e| e.to_string())?;
        if a.key.as_ref() == key.as_bytes() {
            let v = a.decode_and_unescape_value(reader.decoder()).map_err(|e| e.to_string())?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn parse_header(e: &BytesStart<'_>, reader: &Reader<&[u8]>) -> Result<TmHeader, String> {
    let get = |k: &str| attr(e.attributes(), k, reader);
    let srclang = get("srclang")?.ok_or("header without srclang")?;
    let mut h = TmHeader::new(&srclang, "");
    if let Some(v) = get("adminlang")? {
        h.adminlang = v;
    }
    if let Some(v) = get("segtype")? {
        h.segtype = v;
    }
    if let Some(v) = get("datatype")? {
        h.datatype = v;
    }
    if let Some(v) = get("creationtool")? {
        h.creation_tool = v;
    }
    if let Some(v) = get("creationtoolversion")? {
        h.creation_tool_version = v;
    }
    Ok(h)
}

fn build_unit(b: UnitBuilder, ordinal: usize, srclang: &str) -> Result<TranslationUnit, String> {
    let id = b.id.unwrap_or_else(|| format!("tu-{ordinal}"));
    if b.tuvs.len() != 2 {
        return Err(format!("unit {id} has {} tuv elements, expected 2", b.tuvs.len()));
    }
    let src_pos = b
        .tuvs
        .iter()
        .position(|(lang, _)| lang.eq_ignore_ascii_case(srclang))
        .ok_or_else(|| format!("unit {id} has no {srclang} variant"))?;
    let (src_lang, src_text) = b.tuvs[src_pos].clone();
    let (tgt_lang, tgt_text) = b.tuvs[1 - src_pos].clone();

    let mut provenance = Provenance { doc_key: String::new(), bead: BeadKind::OneOne, bead_index: ordinal };
    let mut confidence = 1.0;
    let mut status = Status::Auto;
    let mut flags = std::collections::BTreeSet::new();
    for (kind, value) in b.props {
        match kind.as_str() {
            PROP_DOC_KEY => provenance.doc_key = value,
            PROP_BEAD => provenance.bead = value.parse().map_err(|e| format!("unit {id}: {e}"))?,
            PROP_BEAD_INDEX => {
                provenance.bead_index = value.parse().map_err(|_| format!("unit {id}: bad bead index {value:?}"))?
            }
            PROP_CONFIDENCE => {
                confidence = value.parse().map_err(|_| format!("unit {id}: bad confidence {value:?}"))?
            }
            PROP_STATUS => status = value.parse().map_err(|e| format!("unit {id}: {e}"))?,
            PROP_FLAG => {
                flags.insert(value);
            }
            _ => {}
        }
    }
    Ok(TranslationUnit { id, src_text, tgt_text, src_lang, tgt_lang, provenance, confidence, status, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(id: &str, src: &str, tgt: &str) -> TranslationUnit {
        TranslationUnit {
            id: id.into(),
            src_text: src.into(),
            tgt_text: tgt.into(),
            src_lang: "tr".into(),
            tgt_lang: "en".into(),
            provenance: Provenance { doc_key: "K".into(), bead: BeadKind::OneOne, bead_index: 0 },
            confidence: 0.75,
            status: Status::Auto,
            flags: Default::default(),
        }
    }

    fn doc(units: Vec<TranslationUnit>) -> TmDocument {
        TmDocument { header: TmHeader::new("tr", "en"), units }
    }

    #[test]
    fn empty_document_round_trips() {
        let tm = doc(vec![]);
        let text = write_tmx_string(&tm).unwrap();
        assert!(text.starts_with("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<tmx version=\"1.4\">"));
        assert!(text.contains("<body>\n  </body>"));
        let (back, report) = read_tmx_str(&text).unwrap();
        assert_eq!(back, tm);
        assert!(report.ignored_elements.is_empty());
    }

    #[test]
    fn special_characters_are_escaped_and_restored() {
        let tm = doc(vec![unit("K#0", "a < b & 'c'", "\"x\" > y\r\nz")]);
        let text = write_tmx_string(&tm).unwrap();
        assert!(text.contains("<seg>a &lt; b &amp; 'c'</seg>"));
        assert!(text.contains("&#13;"));
        assert_eq!(read_tmx_str(&text).unwrap().0, tm);
    }

    #[test]
    fn rejected_units_are_not_written() {
        let mut gone = unit("K#1", "x", "y");
        gone.status = Status::Rejected;
        let tm = doc(vec![unit("K#0", "a", "b"), gone]);
        let back = read_tmx_str(&write_tmx_string(&tm).unwrap()).unwrap().0;
        assert_eq!(back.units.len(), 1);
        assert_eq!(back.units[0].id, "K#0");
    }

    #[test]
    fn malformed_xml_reports_position() {
        let bad = "<?xml version=\"1.0\"?>\n<tmx version=\"1.4\">\n<header srclang=\"tr\"/>\n<body>\n<tu></tuv>\n</body></tmx>";
        match read_tmx_str(bad) {
            Err(TmError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let no_seg = "<tmx><header srclang=\"tr\"/><body><tu><tuv xml:lang=\"tr\"></tuv></tu></body></tmx>";
        assert!(matches!(read_tmx_str(no_seg), Err(TmError::Parse { line: 1, .. })));
    }

    #[test]
    fn foreign_tmx_with_extras_is_read() {
        let text = r#"<?xml version="1.0" encoding="UTF-8"?>
<!DOCTYPE tmx SYSTEM "tmx14.dtd">
<tmx version="1.4">
  <header creationtool="memoQ" creationtoolversion="9" segtype="sentence" o-tmf="x" adminlang="en-us" srclang="tr" datatype="plaintext">
    <note>exported</note>
  </header>
  <body>
    <tu creationdate="20240101T000000Z">
      <note>ignored</note>
      <tuv xml:lang="en"><seg>Results <ph x="1">&lt;br&gt;</ph>were good.</seg></tuv>
      <tuv xml:lang="tr"><seg>Sonuçlar iyiydi.</seg></tuv>
    </tu>
  </body>
</tmx>"#;
        let (tm, report) = read_tmx_str(text).unwrap();
        assert_eq!(tm.header.tgtlang, "en");
        assert_eq!(tm.units[0].src_text, "Sonuçlar iyiydi.");
        assert_eq!(tm.units[0].tgt_text, "Results were good.");
        assert_eq!(tm.units[0].id, "tu-0");
        assert_eq!(report.ignored_elements, vec!["note", "note", "ph"]);
    }

    #[test]
    fn forbidden_characters_are_refused() {
        let tm = doc(vec![unit("K#0", "bell\u{7}", "x")]);
        assert!(matches!(write_tmx_string(&tm), Err(TmError::Invalid(_))));
    }

    #[test]
    fn canonical_form_ignores_version_and_line_endings() {
        let a = "<header creationtoolversion=\"0.1.0\"/>\r\n";
        let b = "<header creationtoolversion=\"9.9\"/>\n\n";
        assert_eq!(canonicalize_tmx(a), canonicalize_tmx(b));
    }

    fn arb_text() -> impl Strategy<Value = String> {
        "[a-zA-ZçğıöşüÇĞİÖŞÜ0-9 <>&'\"\\t\\n\\r.,;:!?%-]{0,80}"
    }

    proptest! {
        #[test]
        fn read_inverts_write(texts in proptest::collection::vec((arb_text(), arb_text(), 0.0f64..=1.0, 0usize..4), 0..20)) {
            let units = texts.into_iter().enumerate().map(|(i, (s, t, conf, st))| {
                let mut u = unit(&format!("K#{i}"), &s, &t);
                u.confidence = conf;
                u.status = [Status::Auto, Status::Confirmed, Status::Edited, Status::Auto][st];
                if st == 3 { u.flags.insert("numerals".into()); }
                u.provenance.bead_index = i;
                u
            }).collect();
            let tm = doc(units);
            let back = read_tmx_str(&write_tmx_string(&tm).unwrap()).unwrap().0;
            prop_assert_eq!(back, tm);
        }
    }
}

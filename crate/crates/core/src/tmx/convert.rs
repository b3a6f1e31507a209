use std::fs;
use std::path::Path;

use super::{TmDocument, TmError};

/// Moses-style line-aligned texts: line i of each side belongs to unit i.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelText {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl ParallelText {
    /// File contents, one line per unit, each terminated by LF.
    pub fn render(lines: &[String]) -> String {
        lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

pub fn to_parallel_text(tm: &TmDocument) -> Result<ParallelText, TmError> {
    let mut out = ParallelText::default();
    for u in tm.live_units() {
        if [&u.src_text, &u.tgt_text].iter().any(|t| t.contains(['\n', '\r'])) {
            return Err(TmError::LineBreak { id: u.id.clone() });
        }
        out.source.push(u.src_text.clone());
        out.target.push(u.tgt_text.clone());
    }
    Ok(out)
}

/// Writes `<stem>.<srclang>` and `<stem>.<tgtlang>` and returns their paths.
pub fn write_parallel_text(tm: &TmDocument, stem: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf), TmError> {
    let text = to_parallel_text(tm)?;
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let with_ext = |lang: &str| {
        let mut name = stem.as_os_str().to_owned();
        name.push(".");
        name.push(lang);
        std::path::PathBuf::from(name)
    };
    let (src_path, tgt_path) = (with_ext(&tm.header.srclang), with_ext(&tm.header.tgtlang));
    fs::write(&src_path, ParallelText::render(&text.source))?;
    fs::write(&tgt_path, ParallelText::render(&text.target))?;
    Ok((src_path, tgt_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::BeadKind;
    use crate::tmx::{Provenance, Status, TmHeader, TranslationUnit};

    fn tm(pairs: &[(&str, &str)]) -> TmDocument {
        let units = pairs
            .iter()
            .enumerate()
            .map(|(i, (s, t))| TranslationUnit {
                id: format!("D#{i}"),
                src_text: s.to_string(),
                tgt_text: t.to_string(),
                src_lang: "tr".into(),
                tgt_lang: "en".into(),
                provenance: Provenance { doc_key: "D".into(), bead: BeadKind::OneOne, bead_index: i },
                confidence: 1.0,
                status: Status::Auto,
                flags: Default::default(),
            })
            .collect();
        TmDocument { header: TmHeader::new("tr", "en"), units }
    }

    #[test]
    fn three_units_zip_back() {
        let doc = tm(&[("Bir.", "One."), ("İki.", "Two."), ("Üç.", "Three.")]);
        let text = to_parallel_text(&doc).unwrap();
        let zipped: Vec<_> = text.source.iter().zip(&text.target).map(|(s, t)| (s.as_str(), t.as_str())).collect();
        assert_eq!(zipped, vec![("Bir.", "One."), ("İki.", "Two."), ("Üç.", "Three.")]);
    }

    #[test]
    fn empty_document_gives_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let (s, t) = write_parallel_text(&tm(&[]), &dir.path().join("corpus")).unwrap();
        assert_eq!(s.file_name().unwrap(), "corpus.tr");
        assert_eq!(fs::read(&s).unwrap(), b"");
        assert_eq!(fs::read(&t).unwrap(), b"");
    }

    #[test]
    fn files_use_lf_and_skip_rejected() {
        let mut doc = tm(&[("Bir.", "One."), ("İki.", "Two.")]);
        doc.units[0].status = Status::Rejected;
        let dir = tempfile::tempdir().unwrap();
        let (s, t) = write_parallel_text(&doc, &dir.path().join("c")).unwrap();
        assert_eq!(fs::read_to_string(s).unwrap(), "İki.\n");
        assert_eq!(fs::read_to_string(t).unwrap(), "Two.\n");
    }

    #[test]
    fn line_break_aborts() {
        let doc = tm(&[("a\nb", "x")]);
        assert!(matches!(to_parallel_text(&doc), Err(TmError::LineBreak { id }) if id == "D#0"));
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Provenance, Status, TmDocument, TmError, TmHeader, TranslationUnit};
use crate::alignment::Alignment;
use crate::extraction::SegmentedDoc;

/// Flag carried by units whose bead fell under the confidence threshold.
pub const NEEDS_REVIEW: &str = "needs_review";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderMeta {
    pub srclang: String,
    pub tgtlang: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReport {
    pub documents: usize,
    pub units: usize,
    pub dropped_beads: usize,
    pub needs_review: usize,
}

/// Six decimals: enough to rank units, and stable across platforms whose
/// `exp`/`ln` differ in the last bit.
fn round_confidence(c: f64) -> f64 {
    (c * 1e6).round() / 1e6
}

pub fn tu_id(doc_key: &str, bead_index: usize) -> String {
    format!("{doc_key}#{bead_index}")
}

/// Turns every non-deletion bead into a unit. Alignments are taken in
/// doc_key order; `docs` holds the segmented documents of both languages.
pub fn compile(
    alignments: &[Alignment],
    docs: &[SegmentedDoc],
    meta: &HeaderMeta,
) -> Result<(TmDocument, CompileReport), TmError> {
    if meta.srclang == meta.tgtlang {
        return Err(TmError::Invalid("source and target language are the same".into()));
    }
    let index: HashMap<(&str, &str), &SegmentedDoc> =
        docs.iter().map(|d| ((d.doc_key.as_str(), d.lang.as_str()), d)).collect();
    let mut ordered: Vec<&Alignment> = alignments.iter().collect();
    ordered.sort_by(|a, b| a.doc_key.cmp(&b.doc_key));

    let mut tm = TmDocument::new(TmHeader::new(&meta.srclang, &meta.tgtlang));
    let mut report = CompileReport { documents: ordered.len(), ..Default::default() };
    for al in ordered {
        let key = al.doc_key.as_str();
        let src = index.get(&(key, meta.srclang.as_str())).ok_or_else(|| TmError::MissingDoc(key.into()))?;
        let tgt = index.get(&(key, meta.tgtlang.as_str())).ok_or_else(|| TmError::MissingDoc(key.into()))?;
        for (bead_index, bead) in al.beads.iter().enumerate() {
            if bead.kind.is_deletion() {
                report.dropped_beads += 1;
                continue;
            }
            let join = |doc: &SegmentedDoc, idx: &[usize]| -> Result<String, TmError> {
                let parts = idx
                    .iter()
                    .map(|&i| doc.sentences.get(i).map(|s| s.text.as_str()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| TmError::Invalid(format!("alignment {key} points past the end of {}", doc.lang)))?;
                Ok(parts.join(" "))
            };
            let mut unit = TranslationUnit {
                id: tu_id(key, bead_index),
                src_text: join(src, &bead.src_indices)?,
                tgt_text: join(tgt, &bead.tgt_indices)?,
                src_lang: meta.srclang.clone(),
                tgt_lang: meta.tgtlang.clone(),
                provenance: Provenance { doc_key: key.into(), bead: bead.kind, bead_index },
                confidence: round_confidence(bead.confidence),
                status: Status::Auto,
                flags: Default::default(),
            };
            if bead.needs_review {
                unit.flags.insert(NEEDS_REVIEW.into());
                report.needs_review += 1;
            }
            tm.units.push(unit);
        }
    }
    report.units = tm.units.len();
    Ok((tm, report))
}

//! Length-based sentence alignment.
//!
//! Two segmented documents are aligned by an exact dynamic program over the
//! `(|src|+1) x (|tgt|+1)` lattice. Each step consumes one bead (1-1, 1-0, 0-1,
//! 2-1, 1-2 or 2-2 sentences); bead cost combines a character-length fit term,
//! the negative log prior of the bead type and an optional bonus when a
//! bilingual anchor term occurs on both sides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::extraction::SegmentedDoc;

/// Longest side length (in characters) charged for a deleted sentence.
const DELETION_LENGTH_CAP: f64 = 20.0;

/// Bead costs are compared in fixed point so that equal-cost paths tie exactly,
/// independent of summation order.
const COST_SCALE: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BeadKind {
    #[serde(rename = "1-1")]
    OneOne,
    #[serde(rename = "2-1")]
    TwoOne,
    #[serde(rename = "1-2")]
    OneTwo,
    #[serde(rename = "2-2")]
    TwoTwo,
    #[serde(rename = "1-0")]
    OneZero,
    #[serde(rename = "0-1")]
    ZeroOne,
}

impl BeadKind {
    /// All kinds in tie-break preference order.
    pub const ALL: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::TwoOne,
        BeadKind::OneTwo,
        BeadKind::TwoTwo,
        BeadKind::OneZero,
        BeadKind::ZeroOne,
    ];

    /// Number of (source, target) sentences consumed.
    pub fn arity(self) -> (usize, usize) {
        match self {
            BeadKind::OneOne => (1, 1),
            BeadKind::TwoOne => (2, 1),
            BeadKind::OneTwo => (1, 2),
            BeadKind::TwoTwo => (2, 2),
            BeadKind::OneZero => (1, 0),
            BeadKind::ZeroOne => (0, 1),
        }
    }

    pub fn is_deletion(self) -> bool {
        matches!(self, BeadKind::OneZero | BeadKind::ZeroOne)
    }

    /// Position in the tie-break order; lower is preferred.
    pub fn rank(self) -> usize {
        BeadKind::ALL.iter().position(|k| *k == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BeadKind::OneOne => "1-1",
            BeadKind::TwoOne => "2-1",
            BeadKind::OneTwo => "1-2",
            BeadKind::TwoTwo => "2-2",
            BeadKind::OneZero => "1-0",
            BeadKind::ZeroOne => "0-1",
        }
    }
}

impl fmt::Display for BeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BeadKind {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BeadKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AlignError::InvalidParams(format!("unknown bead type {s:?}")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("invalid alignment parameters: {0}")]
    InvalidParams(String),
    #[error("document keys differ: {0:?} vs {1:?}")]
    KeyMismatch(String, String),
    #[error("both documents use language {0:?}")]
    SameLanguage(String),
    #[error("anchor file line {line}: {reason}")]
    Anchor { line: usize, reason: String },
}

/// Prior probability for each bead kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeadPriors {
    #[serde(rename = "1-1")]
    pub one_one: f64,
    #[serde(rename = "1-0")]
    pub one_zero: f64,
    #[serde(rename = "0-1")]
    pub zero_one: f64,
    #[serde(rename = "2-1")]
    pub two_one: f64,
    #[serde(rename = "1-2")]
    pub one_two: f64,
    #[serde(rename = "2-2")]
    pub two_two: f64,
}

impl Default for BeadPriors {
    fn default() -> Self {
        BeadPriors {
            one_one: 0.89,
            one_zero: 0.0099,
            zero_one: 0.0099,
            two_one: 0.0445,
            one_two: 0.0445,
            two_two: 0.011,
        }
    }
}

impl BeadPriors {
    pub fn get(&self, kind: BeadKind) -> f64 {
        match kind {
            BeadKind::OneOne => self.one_one,
            BeadKind::OneZero => self.one_zero,
            BeadKind::ZeroOne => self.zero_one,
            BeadKind::TwoOne => self.two_one,
            BeadKind::OneTwo => self.one_two,
            BeadKind::TwoTwo => self.two_two,
        }
    }

    fn max(&self) -> f64 {
        BeadKind::ALL.iter().map(|k| self.get(*k)).fold(f64::MIN, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct AlignParams {
    /// Expected target/source character-length ratio.
    pub c: f64,
    /// Variance parameter of the length difference.
    pub s2: f64,
    pub bead_priors: BeadPriors,
    /// Multiplicative probability boost for anchored beads, at least 1.
    pub anchor_bonus: f64,
    /// Beads with confidence below this are flagged for review.
    pub confidence_threshold: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            c: 1.0,
            s2: 6.8,
            bead_priors: BeadPriors::default(),
            anchor_bonus: 2.0,
            confidence_threshold: 0.5,
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |msg: String| Err(AlignError::InvalidParams(msg));
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.s2.is_finite() && self.s2 > 0.0) {
            return bad(format!("s2 must be positive, got {}", self.s2));
        }
        for kind in BeadKind::ALL {
            let p = self.bead_priors.get(kind);
            if !(p.is_finite() && p > 0.0) {
                return bad(format!("prior for {kind} must be positive, got {p}"));
            }
        }
        if !(self.anchor_bonus.is_finite() && self.anchor_bonus >= 1.0) {
            return bad(format!("anchor_bonus must be >= 1, got {}", self.anchor_bonus));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return bad(format!(
                "confidence_threshold must lie in [0,1], got {}",
                self.confidence_threshold
            ));
        }
        Ok(())
    }
}

/// A bilingual term pair. Matching is case-insensitive substring search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorTerm {
    pub source_term: String,
    pub target_term: String,
}

impl AnchorTerm {
    pub fn new(source_term: &str, target_term: &str) -> Result<Self, AlignError> {
        let (s, t) = (source_term.trim(), target_term.trim());
        if s.is_empty() || t.is_empty() {
            return Err(AlignError::InvalidParams("anchor terms must be non-empty".into()));
        }
        Ok(AnchorTerm { source_term: s.to_string(), target_term: t.to_string() })
    }
}

/// Parses a two-column tab-separated anchor list. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_anchors_tsv(text: &str) -> Result<Vec<AnchorTerm>, AlignError> {
    let mut anchors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(s), Some(t), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(AlignError::Anchor { line: i + 1, reason: "expected exactly two columns".into() });
        };
        anchors.push(
            AnchorTerm::new(s, t)
                .map_err(|_| AlignError::Anchor { line: i + 1, reason: "empty term".into() })?,
        );
    }
    Ok(anchors)
}

/// Anchors with their terms lowercased once.
struct AnchorMatcher {
    terms: Vec<(String, String)>,
}

impl AnchorMatcher {
    fn new(anchors: &[AnchorTerm]) -> Self {
        AnchorMatcher {
            terms: anchors
                .iter()
                .map(|a| (a.source_term.to_lowercase(), a.target_term.to_lowercase()))
                .collect(),
        }
    }

    fn hit(&self, src_lower: &str, tgt_lower: &str) -> bool {
        self.terms
            .iter()
            .any(|(s, t)| src_lower.contains(s.as_str()) && tgt_lower.contains(t.as_str()))
    }
}

/// Normalized length mismatch of a bead.
pub fn length_delta(src_len: usize, tgt_len: usize, params: &AlignParams) -> f64 {
    let src = src_len as f64;
    (tgt_len as f64 - src * params.c) / (src.max(1.0) * params.s2).sqrt()
}

/// Length term of the cost: `delta^2 / 2` for substantive beads, a capped
/// insertion penalty for 1-0 and 0-1.
fn length_term(src_len: usize, tgt_len: usize, kind: BeadKind, params: &AlignParams) -> f64 {
    match kind {
        BeadKind::OneZero | BeadKind::ZeroOne => {
            let present = if kind == BeadKind::OneZero { src_len } else { tgt_len };
            let l = (present as f64).min(DELETION_LENGTH_CAP);
            (l / 2.0).powi(2) / (2.0 * params.s2)
        }
        _ => {
            let d = length_delta(src_len, tgt_len, params);
            d * d / 2.0
        }
    }
}

/// Cost of one bead covering `src_len` source and `tgt_len` target characters.
/// Negative values are possible when an anchor bonus applies.
pub fn bead_cost(
    src_len: usize,
    tgt_len: usize,
    kind: BeadKind,
    params: &AlignParams,
    anchor_hit: bool,
) -> f64 {
    let mut cost = length_term(src_len, tgt_len, kind, params) - params.bead_priors.get(kind).ln();
    if anchor_hit {
        cost -= params.anchor_bonus.ln();
    }
    cost
}

/// Confidence in [0,1]: length fit scaled by the relative prior of the bead
/// kind and the anchor boost.
pub fn bead_confidence(
    src_len: usize,
    tgt_len: usize,
    kind: BeadKind,
    params: &AlignParams,
    anchor_hit: bool,
) -> f64 {
    let fit = (-length_term(src_len, tgt_len, kind, params)).exp();
    let mut conf = fit * params.bead_priors.get(kind) / params.bead_priors.max();
    if anchor_hit {
        conf *= params.anchor_bonus;
    }
    conf.clamp(0.0, 1.0)
}

/// Fixed-point image of a cost used for exact comparisons.
pub fn quantize_cost(cost: f64) -> i64 {
    (cost * COST_SCALE).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    pub kind: BeadKind,
    pub src_indices: Vec<usize>,
    pub tgt_indices: Vec<usize>,
    pub cost: f64,
    pub confidence: f64,
    pub anchor_hit: bool,
    pub needs_review: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub doc_key: String,
    pub beads: Vec<Bead>,
    pub total_cost: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Alignment {
    /// True when beads cover both sides exactly once, monotonically.
    pub fn is_covering(&self, src_count: usize, tgt_count: usize) -> bool {
        let (mut i, mut j) = (0, 0);
        for bead in &self.beads {
            let (m, n) = bead.kind.arity();
            if bead.src_indices != (i..i + m).collect::<Vec<_>>()
                || bead.tgt_indices != (j..j + n).collect::<Vec<_>>()
            {
                return false;
            }
            i += m;
            j += n;
        }
        i == src_count && j == tgt_count
    }
}

/// Per-bead features of a lattice step, computed lazily from sentence data.
pub struct BeadScorer<'a> {
    src_lens: Vec<usize>,
    tgt_lens: Vec<usize>,
    src_lower: Vec<String>,
    tgt_lower: Vec<String>,
    anchors: AnchorMatcher,
    params: &'a AlignParams,
}

impl<'a> BeadScorer<'a> {
    pub fn new(src: &SegmentedDoc, tgt: &SegmentedDoc, anchors: &[AnchorTerm], params: &'a AlignParams) -> Self {
        BeadScorer {
            src_lens: src.sentences.iter().map(|s| s.char_len).collect(),
            tgt_lens: tgt.sentences.iter().map(|s| s.char_len).collect(),
            src_lower: src.sentences.iter().map(|s| s.text.to_lowercase()).collect(),
            tgt_lower: tgt.sentences.iter().map(|s| s.text.to_lowercase()).collect(),
            anchors: AnchorMatcher::new(anchors),
            params,
        }
    }

    pub fn src_count(&self) -> usize {
        self.src_lens.len()
    }

    pub fn tgt_count(&self) -> usize {
        self.tgt_lens.len()
    }

    /// Whether the bead of `kind` starting at `(i, j)` fits inside the lattice.
    pub fn fits(&self, i: usize, j: usize, kind: BeadKind) -> bool {
        let (m, n) = kind.arity();
        i + m <= self.src_count() && j + n <= self.tgt_count()
    }

    /// Builds the bead of `kind` starting at source index `i`, target index `j`.
    pub fn bead(&self, i: usize, j: usize, kind: BeadKind) -> Bead {
        let (m, n) = kind.arity();
        let src_len: usize = self.src_lens[i..i + m].iter().sum();
        let tgt_len: usize = self.tgt_lens[j..j + n].iter().sum();
        let anchor_hit = !kind.is_deletion() && {
            let s = self.src_lower[i..i + m].join(" ");
            let t = self.tgt_lower[j..j + n].join(" ");
            self.anchors.hit(&s, &t)
        };
        let cost = bead_cost(src_len, tgt_len, kind, self.params, anchor_hit);
        let confidence = bead_confidence(src_len, tgt_len, kind, self.params, anchor_hit);
        Bead {
            kind,
            src_indices: (i..i + m).collect(),
            tgt_indices: (j..j + n).collect(),
            cost,
            confidence,
            anchor_hit,
            needs_review: confidence < self.params.confidence_threshold,
        }
    }
}

/// Aligns two segmented documents.
///
/// Among all minimum-cost beadings the one whose sequence of bead kinds is
/// lexicographically smallest under the order 1-1, 2-1, 1-2, 2-2, 1-0, 0-1 is
/// returned. The lattice is solved backwards (suffix costs) so that the
/// forward walk can apply that preference bead by bead.
pub fn align(
    src: &SegmentedDoc,
    tgt: &SegmentedDoc,
    anchors: &[AnchorTerm],
    params: &AlignParams,
) -> Result<Alignment, AlignError> {
    params.validate()?;
    if src.doc_key != tgt.doc_key {
        return Err(AlignError::KeyMismatch(src.doc_key.clone(), tgt.doc_key.clone()));
    }
    if src.lang == tgt.lang {
        return Err(AlignError::SameLanguage(src.lang.clone()));
    }

    let scorer = BeadScorer::new(src, tgt, anchors, params);
    let (n_src, n_tgt) = (scorer.src_count(), scorer.tgt_count());
    let mut warnings = Vec::new();
    if n_src == 0 || n_tgt == 0 {
        warnings.push(format!(
            "degenerate input: {} source and {} target sentences; all-deletion alignment",
            n_src, n_tgt
        ));
    }

    // suffix[i][j] = minimum quantized cost of aligning src[i..] with tgt[j..].
    let width = n_tgt + 1;
    let mut suffix = vec![i64::MAX; (n_src + 1) * width];
    let mut choice: Vec<Option<Bead>> = vec![None; (n_src + 1) * width];
    suffix[n_src * width + n_tgt] = 0;
    for i in (0..=n_src).rev() {
        for j in (0..=n_tgt).rev() {
            if i == n_src && j == n_tgt {
                continue;
            }
            let mut best: Option<(i64, Bead)> = None;
            for kind in BeadKind::ALL {
                if !scorer.fits(i, j, kind) {
                    continue;
                }
                let (m, n) = kind.arity();
                let rest = suffix[(i + m) * width + j + n];
                if rest == i64::MAX {
                    continue;
                }
                let bead = scorer.bead(i, j, kind);
                let total = quantize_cost(bead.cost) + rest;
                // Strict comparison keeps the earlier kind on ties.
                if best.as_ref().is_none_or(|(b, _)| total < *b) {
                    best = Some((total, bead));
                }
            }
            if let Some((total, bead)) = best {
                suffix[i * width + j] = total;
                choice[i * width + j] = Some(bead);
            }
        }
    }

    let mut beads = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n_src || j < n_tgt {
        let bead = choice[i * width + j].take().expect("lattice end reachable from every cell");
        let (m, n) = bead.kind.arity();
        i += m;
        j += n;
        beads.push(bead);
    }
    let total_cost = beads.iter().map(|b| b.cost).sum();
    Ok(Alignment { doc_key: src.doc_key.clone(), beads, total_cost, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{SegmentedDoc, Sentence};

    fn doc(lang: &str, lens: &[usize]) -> SegmentedDoc {
        SegmentedDoc {
            doc_key: "K".into(),
            lang: lang.into(),
            sentences: lens
                .iter()
                .enumerate()
                .map(|(index, &len)| Sentence { index, text: "x".repeat(len), char_len: len })
                .collect(),
        }
    }

    fn kinds(a: &Alignment) -> Vec<BeadKind> {
        a.beads.iter().map(|b| b.kind).collect()
    }

    #[test]
    fn equal_lengths_cost_is_negative_log_prior() {
        let p = AlignParams::default();
        let cost = bead_cost(100, 100, BeadKind::OneOne, &p, false);
        assert!((cost - 0.116534).abs() < 1e-5, "{cost}");
        let anchored = bead_cost(100, 100, BeadKind::OneOne, &p, true);
        assert!((anchored - (cost - 2f64.ln())).abs() < 1e-12);
        assert!((anchored + 0.576613).abs() < 1e-5, "{anchored}");
    }

    #[test]
    fn length_mismatch_cost() {
        let p = AlignParams::default();
        let delta = length_delta(100, 120, &p);
        assert!((delta - 0.766965).abs() < 1e-5, "{delta}");
        let cost = bead_cost(100, 120, BeadKind::OneOne, &p, false);
        assert!((cost - 0.410652).abs() < 1e-5, "{cost}");
    }

    #[test]
    fn deletion_penalty_is_capped() {
        let p = AlignParams::default();
        let at_cap = bead_cost(20, 0, BeadKind::OneZero, &p, false);
        let beyond = bead_cost(500, 0, BeadKind::OneZero, &p, false);
        assert_eq!(at_cap, beyond);
        assert!(bead_cost(4, 0, BeadKind::OneZero, &p, false) < at_cap);
        assert_eq!(
            bead_cost(0, 7, BeadKind::ZeroOne, &p, false),
            bead_cost(7, 0, BeadKind::OneZero, &p, false)
        );
    }

    #[test]
    fn three_similar_sentences_align_one_to_one() {
        let a = align(&doc("tr", &[50, 120, 30]), &doc("en", &[55, 130, 28]), &[], &AlignParams::default())
            .unwrap();
        assert_eq!(kinds(&a), vec![BeadKind::OneOne; 3]);
        assert!(a.is_covering(3, 3));
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn empty_target_gives_deletion_with_warning() {
        let a = align(&doc("tr", &[100]), &doc("en", &[]), &[], &AlignParams::default()).unwrap();
        assert_eq!(kinds(&a), vec![BeadKind::OneZero]);
        assert_eq!(a.warnings.len(), 1);
        let both = align(&doc("tr", &[]), &doc("en", &[]), &[], &AlignParams::default()).unwrap();
        assert!(both.beads.is_empty());
        assert_eq!(both.warnings.len(), 1);
    }

    #[test]
    fn merge_beats_one_to_one_plus_deletion() {
        let p = AlignParams::default();
        let a = align(&doc("tr", &[60, 60]), &doc("en", &[125]), &[], &p).unwrap();
        assert_eq!(kinds(&a), vec![BeadKind::TwoOne]);
        // The three candidate beadings, priced by hand.
        let two_one = bead_cost(120, 125, BeadKind::TwoOne, &p, false);
        let one_one_then_del = bead_cost(60, 125, BeadKind::OneOne, &p, false)
            + bead_cost(60, 0, BeadKind::OneZero, &p, false);
        let del_then_one_one = bead_cost(60, 0, BeadKind::OneZero, &p, false)
            + bead_cost(60, 125, BeadKind::OneOne, &p, false);
        assert!(two_one < one_one_then_del && two_one < del_then_one_one);
    }

    #[test]
    fn anchors_are_case_insensitive_and_need_both_sides() {
        let mut src = doc("tr", &[10]);
        src.sentences[0].text = "Ejeksiyon fraksiyonu düştü".into();
        let mut tgt = doc("en", &[10]);
        tgt.sentences[0].text = "The EJECTION FRACTION fell".into();
        let p = AlignParams::default();
        let hit = align(&src, &tgt, &[AnchorTerm::new("ejeksiyon", "ejection fraction").unwrap()], &p).unwrap();
        assert!(hit.beads[0].anchor_hit);
        let miss = align(&src, &tgt, &[AnchorTerm::new("ejeksiyon", "wall motion").unwrap()], &p).unwrap();
        assert!(!miss.beads[0].anchor_hit);
        assert!(hit.total_cost < miss.total_cost);
    }

    #[test]
    fn confidence_flags_poor_fits() {
        let p = AlignParams::default();
        assert_eq!(bead_confidence(100, 100, BeadKind::OneOne, &p, false), 1.0);
        assert!(bead_confidence(100, 100, BeadKind::OneOne, &p, true) <= 1.0);
        assert!(bead_confidence(100, 0, BeadKind::OneZero, &p, false) < p.confidence_threshold);
        let a = align(&doc("tr", &[10, 200]), &doc("en", &[10]), &[], &p).unwrap();
        assert!(a.beads.iter().any(|b| b.needs_review));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = AlignParams { anchor_bonus: 0.5, ..Default::default() };
        assert!(align(&doc("tr", &[1]), &doc("en", &[1]), &[], &p).is_err());
        assert!(matches!(
            align(&doc("tr", &[1]), &doc("tr", &[1]), &[], &AlignParams::default()),
            Err(AlignError::SameLanguage(_))
        ));
        let mut other = doc("en", &[1]);
        other.doc_key = "L".into();
        assert!(matches!(
            align(&doc("tr", &[1]), &other, &[], &AlignParams::default()),
            Err(AlignError::KeyMismatch(..))
        ));
    }

    #[test]
    fn anchor_tsv() {
        let anchors = parse_anchors_tsv("# kw\nkoroner\tcoronary\n\nGSPECT\tGSPECT\n").unwrap();
        assert_eq!(anchors.len(), 2);
        assert_eq!(anchors[0].target_term, "coronary");
        assert!(matches!(parse_anchors_tsv("one column"), Err(AlignError::Anchor { line: 1, .. })));
        assert!(parse_anchors_tsv("a\t \n").is_err());
    }
}

//! Human review of aligned units: decisions, their replay over a memory, the
//! durable decision log and the payloads of the review API.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::alignment::{Alignment, BeadKind};
use crate::tmx::{self, CorpusStats, Status, TmDocument, TmError, TranslationUnit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Accept,
    Edit { src_text: String, tgt_text: String },
    /// Absorb the adjacent unit `with_tu_id`; texts join in document order.
    Merge { with_tu_id: String },
    /// Character offsets at which each side is cut in two.
    Split { src_boundary: usize, tgt_boundary: usize },
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub tu_id: String,
    pub action: Action,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
    #[serde(default)]
    pub actor: String,
}

impl Decision {
    pub fn now(tu_id: impl Into<String>, action: Action, actor: impl Into<String>) -> Self {
        Decision { tu_id: tu_id.into(), action, timestamp: now_ms(), actor: actor.into() }
    }
}

/// Body of `POST /units/{id}/decision`. The unit comes from the path; a
/// `tu_id` in the body must agree with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tu_id: Option<String>,
    pub action: Action,
    #[serde(default)]
    pub actor: String,
    #[serde(default)]
    pub timestamp: u64,
}

impl DecisionRequest {
    pub fn into_decision(self, tu_id: &str) -> Result<Decision, ReviewError> {
        if let Some(body_id) = &self.tu_id {
            if body_id != tu_id {
                return Err(ReviewError::InvalidDecision(format!(
                    "body names unit {body_id} but the path names {tu_id}"
                )));
            }
        }
        Ok(Decision { tu_id: tu_id.into(), action: self.action, timestamp: self.timestamp, actor: self.actor })
    }
}

/// Error payload of the review API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown unit {0}")]
    UnknownUnit(String),
    #[error("{0}")]
    InvalidDecision(String),
    #[error("decision log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Tm(#[from] TmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn byte_offset(text: &str, chars: usize) -> Option<usize> {
    text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len())).nth(chars)
}

fn cut(text: &str, at: usize) -> Option<(String, String)> {
    let total = text.chars().count();
    if at == 0 || at >= total {
        return None;
    }
    let b = byte_offset(text, at)?;
    let (head, tail) = (text[..b].trim_end(), text[b..].trim_start());
    (!head.is_empty() && !tail.is_empty()).then(|| (head.to_string(), tail.to_string()))
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a} {b}"),
    }
}

/// Checks `decision` against the current state of `tm`.
pub fn validate_decision(tm: &TmDocument, decision: &Decision) -> Result<(), ReviewError> {
    let pos = position(tm, &decision.tu_id)?;
    let unit = &tm.units[pos];
    match &decision.action {
        Action::Accept | Action::Reject => Ok(()),
        Action::Edit { src_text, tgt_text } => {
            if src_text.trim().is_empty() || tgt_text.trim().is_empty() {
                return Err(ReviewError::InvalidDecision("edited texts must not be empty".into()));
            }
            if [src_text, tgt_text].iter().any(|t| t.contains(['\n', '\r'])) {
                return Err(ReviewError::InvalidDecision("edited texts must be single lines".into()));
            }
            Ok(())
        }
        Action::Merge { with_tu_id } => {
            let other = position(tm, with_tu_id)?;
            if pos.abs_diff(other) != 1 {
                return Err(ReviewError::InvalidDecision(format!(
                    "{} and {with_tu_id} are not adjacent",
                    decision.tu_id
                )));
            }
            if tm.units[other].provenance.doc_key != unit.provenance.doc_key {
                return Err(ReviewError::InvalidDecision(format!(
                    "{} and {with_tu_id} belong to different documents",
                    decision.tu_id
                )));
            }
            Ok(())
        }
        Action::Split { src_boundary, tgt_boundary } => {
            if cut(&unit.src_text, *src_boundary).is_none() || cut(&unit.tgt_text, *tgt_boundary).is_none() {
                return Err(ReviewError::InvalidDecision(
                    "split boundaries must fall strictly inside both texts".into(),
                ));
            }
            Ok(())
        }
    }
}

fn position(tm: &TmDocument, id: &str) -> Result<usize, ReviewError> {
    tm.units.iter().position(|u| u.id == id).ok_or_else(|| ReviewError::UnknownUnit(id.to_string()))
}

/// Applies one decision in place. `tm` is left untouched on error.
pub fn apply_decision(tm: &mut TmDocument, decision: &Decision) -> Result<(), ReviewError> {
    validate_decision(tm, decision)?;
    let pos = position(tm, &decision.tu_id)?;
    match &decision.action {
        Action::Accept => tm.units[pos].status = Status::Confirmed,
        Action::Reject => tm.units[pos].status = Status::Rejected,
        Action::Edit { src_text, tgt_text } => {
            let u = &mut tm.units[pos];
            u.src_text = src_text.trim().to_string();
            u.tgt_text = tgt_text.trim().to_string();
            u.status = Status::Edited;
        }
        Action::Merge { with_tu_id } => {
            let other = position(tm, with_tu_id)?;
            let absorbed = tm.units[other].clone();
            let u = &mut tm.units[pos];
            let (first, second) = if pos < other { (u.clone(), absorbed.clone()) } else { (absorbed.clone(), u.clone()) };
            u.src_text = join(&first.src_text, &second.src_text);
            u.tgt_text = join(&first.tgt_text, &second.tgt_text);
            u.confidence = u.confidence.min(absorbed.confidence);
            u.flags.extend(absorbed.flags);
            u.status = Status::Edited;
            tm.units.remove(other);
        }
        Action::Split { src_boundary, tgt_boundary } => {
            let u = &tm.units[pos];
            let (s1, s2) = cut(&u.src_text, *src_boundary).expect("validated");
            let (t1, t2) = cut(&u.tgt_text, *tgt_boundary).expect("validated");
            let mut n = 2;
            let new_id = loop {
                let candidate = format!("{}/{n}", u.id);
                if tm.unit(&candidate).is_none() {
                    break candidate;
                }
                n += 1;
            };
            let mut second = TranslationUnit { id: new_id, src_text: s2, tgt_text: t2, status: Status::Edited, ..u.clone() };
            second.flags.remove(tmx::NEEDS_REVIEW);
            let first = &mut tm.units[pos];
            first.src_text = s1;
            first.tgt_text = t1;
            first.status = Status::Edited;
            tm.units.insert(pos + 1, second);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDecision {
    pub index: usize,
    pub tu_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub applied: usize,
    pub skipped: Vec<SkippedDecision>,
}

/// Folds the log over `tm` in order. Decisions that do not apply (unknown
/// unit, invalid for the state reached so far) are skipped and reported.
pub fn apply_decisions(tm: &TmDocument, log: &[Decision]) -> (TmDocument, ApplyReport) {
    let mut out = tm.clone();
    let mut report = ApplyReport::default();
    for (index, d) in log.iter().enumerate() {
        match apply_decision(&mut out, d) {
            Ok(()) => report.applied += 1,
            Err(e) => report.skipped.push(SkippedDecision { index, tu_id: d.tu_id.clone(), reason: e.to_string() }),
        }
    }
    (out, report)
}

pub fn read_log(path: &Path) -> Result<Vec<Decision>, ReviewError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReviewError::Log { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Append-only JSON-lines log; every append is synced before returning.
#[derive(Debug)]
pub struct DecisionLog {
    path: PathBuf,
    file: File,
}

impl DecisionLog {
    pub fn open(path: &Path) -> Result<Self, ReviewError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(DecisionLog { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, decision: &Decision) -> Result<(), ReviewError> {
        let mut line = serde_json::to_string(decision).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub fn read_alignments(path: &Path) -> Result<Vec<Alignment>, ReviewError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ReviewError::Log { line: i + 1, message: e.to_string() }))
        .collect()
}

/// A unit is waiting for review while it is untouched and carries a flag
/// from the aligner or from cleaning.
pub fn needs_review(u: &TranslationUnit) -> bool {
    u.status == Status::Auto && !u.flags.is_empty()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub tu_id: String,
    pub src_text: String,
    pub tgt_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeadContext {
    pub bead_index: usize,
    pub kind: BeadKind,
    pub src_indices: Vec<usize>,
    pub tgt_indices: Vec<usize>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitView {
    pub tu_id: String,
    pub src_text: String,
    pub tgt_text: String,
    pub confidence: f64,
    pub status: Status,
    pub doc_key: String,
    pub bead: BeadKind,
    pub flags: Vec<String>,
    pub needs_review: bool,
    #[serde(default)]
    pub prev: Option<Neighbor>,
    #[serde(default)]
    pub next: Option<Neighbor>,
    /// The unit's bead and the beads on either side, deletions included.
    #[serde(default)]
    pub beads: Vec<BeadContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitPage {
    pub items: Vec<UnitView>,
    pub total: usize,
    pub page: usize,
    pub per_page: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    #[default]
    Confidence,
    Document,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnitQuery {
    /// `needs_review` or one of the unit statuses.
    pub status: Option<String>,
    pub min_conf: Option<f64>,
    pub max_conf: Option<f64>,
    pub doc_key: Option<String>,
    pub order: Order,
    /// 1-based.
    pub page: Option<usize>,
    pub per_page: Option<usize>,
}

pub const DEFAULT_PER_PAGE: usize = 50;
pub const MAX_PER_PAGE: usize = 1000;

impl UnitQuery {
    fn matches(&self, u: &TranslationUnit) -> Result<bool, ReviewError> {
        let status_ok = match self.status.as_deref() {
            None | Some("") => true,
            Some("needs_review") => needs_review(u),
            Some(s) => u.status == s.parse::<Status>()?,
        };
        Ok(status_ok
            && self.min_conf.is_none_or(|m| u.confidence >= m)
            && self.max_conf.is_none_or(|m| u.confidence <= m)
            && self.doc_key.as_deref().is_none_or(|k| u.provenance.doc_key == k))
    }
}

/// Review state: the compiled memory, the decision log replayed over it and
/// the alignments used for bead context.
#[derive(Debug)]
pub struct ReviewSession {
    base: TmDocument,
    current: TmDocument,
    decisions: Vec<Decision>,
    alignments: BTreeMap<String, Alignment>,
    log: DecisionLog,
    pub replay: ApplyReport,
}

impl ReviewSession {
    /// Opens the session, replaying any decisions already in the log.
    pub fn open(tm_path: &Path, alignments_path: Option<&Path>, log_path: &Path) -> Result<Self, ReviewError> {
        let base = tmx::read_tmx(tm_path)?;
        let alignments = match alignments_path {
            Some(p) => read_alignments(p)?,
            None => Vec::new(),
        };
        Self::from_parts(base, alignments, log_path)
    }

    pub fn from_parts(base: TmDocument, alignments: Vec<Alignment>, log_path: &Path) -> Result<Self, ReviewError> {
        let decisions = read_log(log_path)?;
        let (current, replay) = apply_decisions(&base, &decisions);
        Ok(ReviewSession {
            base,
            current,
            decisions,
            alignments: alignments.into_iter().map(|a| (a.doc_key.clone(), a)).collect(),
            log: DecisionLog::open(log_path)?,
            replay,
        })
    }

    pub fn current(&self) -> &TmDocument {
        &self.current
    }

    pub fn base(&self) -> &TmDocument {
        &self.base
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn list(&self, q: &UnitQuery) -> Result<UnitPage, ReviewError> {
        let mut hits = Vec::new();
        for (i, u) in self.current.units.iter().enumerate() {
            if q.matches(u)? {
                hits.push(i);
            }
        }
        if q.order == Order::Confidence {
            hits.sort_by(|a, b| self.current.units[*a].confidence.total_cmp(&self.current.units[*b].confidence));
        }
        let per_page = q.per_page.unwrap_or(DEFAULT_PER_PAGE).clamp(1, MAX_PER_PAGE);
        let page = q.page.unwrap_or(1).max(1);
        let items = hits.iter().skip((page - 1) * per_page).take(per_page).map(|&i| self.view(i, false)).collect();
        Ok(UnitPage { items, total: hits.len(), page, per_page })
    }

    pub fn get(&self, id: &str) -> Result<UnitView, ReviewError> {
        Ok(self.view(position(&self.current, id)?, true))
    }

    fn view(&self, i: usize, context: bool) -> UnitView {
        let units = &self.current.units;
        let u = &units[i];
        let neighbor = |j: usize| {
            units.get(j).filter(|n| n.provenance.doc_key == u.provenance.doc_key).map(|n| Neighbor {
                tu_id: n.id.clone(),
                src_text: n.src_text.clone(),
                tgt_text: n.tgt_text.clone(),
            })
        };
        let mut view = UnitView {
            tu_id: u.id.clone(),
            src_text: u.src_text.clone(),
            tgt_text: u.tgt_text.clone(),
            confidence: u.confidence,
            status: u.status,
            doc_key: u.provenance.doc_key.clone(),
            bead: u.provenance.bead,
            flags: u.flags.iter().cloned().collect(),
            needs_review: needs_review(u),
            prev: None,
            next: None,
            beads: Vec::new(),
        };
        if context {
            view.prev = i.checked_sub(1).and_then(neighbor);
            view.next = neighbor(i + 1);
            if let Some(al) = self.alignments.get(&u.provenance.doc_key) {
                let b = u.provenance.bead_index;
                view.beads = (b.saturating_sub(1)..=b + 1)
                    .filter_map(|k| {
                        al.beads.get(k).map(|bead| BeadContext {
                            bead_index: k,
                            kind: bead.kind,
                            src_indices: bead.src_indices.clone(),
                            tgt_indices: bead.tgt_indices.clone(),
                            confidence: bead.confidence,
                        })
                    })
                    .collect();
            }
        }
        view
    }

    /// Validates, logs durably, then applies. Returns the affected unit.
    pub fn submit(&mut self, mut decision: Decision) -> Result<UnitView, ReviewError> {
        validate_decision(&self.current, &decision)?;
        if decision.timestamp == 0 {
            decision.timestamp = now_ms();
        }
        self.log.append(&decision)?;
        apply_decision(&mut self.current, &decision)?;
        self.decisions.push(decision.clone());
        Ok(self.view(position(&self.current, &decision.tu_id)?, true))
    }

    pub fn export(&self) -> Result<String, ReviewError> {
        Ok(tmx::write_tmx_string(&self.current)?)
    }

    pub fn stats(&self) -> CorpusStats {
        tmx::stats(&self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tmx::{Provenance, TmHeader};
    use proptest::prelude::*;

    fn tm(texts: &[(&str, &str)]) -> TmDocument {
        let units = texts
            .iter()
            .enumerate()
            .map(|(i, (s, t))| TranslationUnit {
                id: format!("D#{i}"),
                src_text: s.to_string(),
                tgt_text: t.to_string(),
                src_lang: "tr".into(),
                tgt_lang: "en".into(),
                provenance: Provenance { doc_key: "D".into(), bead: BeadKind::OneOne, bead_index: i },
                confidence: 0.3 + 0.1 * i as f64,
                status: Status::Auto,
                flags: [tmx::NEEDS_REVIEW.to_string()].into(),
            })
            .collect();
        TmDocument { header: TmHeader::new("tr", "en"), units }
    }

    fn three() -> TmDocument {
        tm(&[("Bir iki.", "One two."), ("Üç dört beş.", "Three four five."), ("Altı.", "Six.")])
    }

    fn d(id: &str, action: Action) -> Decision {
        Decision { tu_id: id.into(), action, timestamp: 1, actor: "t".into() }
    }

    #[test]
    fn empty_log_is_identity() {
        let (out, report) = apply_decisions(&three(), &[]);
        assert_eq!(out, three());
        assert_eq!(report, ApplyReport::default());
    }

    #[test]
    fn last_write_wins() {
        let (out, _) = apply_decisions(&three(), &[d("D#1", Action::Reject), d("D#1", Action::Accept)]);
        assert_eq!(out.units[1].status, Status::Confirmed);
        let (out, _) = apply_decisions(&three(), &[d("D#1", Action::Accept), d("D#1", Action::Reject)]);
        assert_eq!(tmx::stats(&out).tu_count, 2);
    }

    #[test]
    fn merge_keeps_word_counts() {
        let before = tmx::stats(&three());
        let (out, _) = apply_decisions(&three(), &[d("D#1", Action::Merge { with_tu_id: "D#0".into() })]);
        let after = tmx::stats(&out);
        assert_eq!(after.tu_count, before.tu_count - 1);
        assert_eq!((after.src_words, after.tgt_words), (before.src_words, before.tgt_words));
        assert_eq!(out.units[0].id, "D#1");
        assert_eq!(out.units[0].src_text, "Bir iki. Üç dört beş.");
        assert_eq!(out.units[0].status, Status::Edited);
        assert!((out.units[0].confidence - 0.3).abs() < 1e-12);
    }

    #[test]
    fn edit_changes_word_counts() {
        let edit = Action::Edit { src_text: "Altı yedi.".into(), tgt_text: "Six seven eight.".into() };
        let (out, _) = apply_decisions(&three(), &[d("D#2", edit)]);
        let s = tmx::stats(&out);
        // 2 + 3 + 2 source words, 2 + 3 + 3 target words.
        assert_eq!((s.src_words, s.tgt_words), (7, 8));
        assert_eq!(s.src_rate.to_string(), "2.33");
        assert_eq!(s.tgt_rate.to_string(), "2.66");
    }

    #[test]
    fn split_at_character_offsets() {
        let (out, _) = apply_decisions(&three(), &[d("D#1", Action::Split { src_boundary: 3, tgt_boundary: 6 })]);
        assert_eq!(out.units.len(), 4);
        assert_eq!((out.units[1].src_text.as_str(), out.units[1].tgt_text.as_str()), ("Üç", "Three"));
        assert_eq!((out.units[2].id.as_str(), out.units[2].src_text.as_str()), ("D#1/2", "dört beş."));
        let (again, _) = apply_decisions(&out, &[d("D#1", Action::Split { src_boundary: 1, tgt_boundary: 2 })]);
        assert_eq!(again.units[2].id, "D#1/3");
    }

    #[test]
    fn invalid_decisions_are_skipped_and_reported() {
        let log = [
            d("nope", Action::Accept),
            d("D#0", Action::Merge { with_tu_id: "D#2".into() }),
            d("D#0", Action::Edit { src_text: " ".into(), tgt_text: "x".into() }),
            d("D#0", Action::Split { src_boundary: 0, tgt_boundary: 1 }),
            d("D#0", Action::Split { src_boundary: 3, tgt_boundary: 100 }),
            d("D#0", Action::Accept),
        ];
        let (out, report) = apply_decisions(&three(), &log);
        assert_eq!(report.applied, 1);
        assert_eq!(report.skipped.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert_eq!(out.units[0].status, Status::Confirmed);
    }

    #[test]
    fn decision_json_shape() {
        let json = serde_json::to_string(&d("D#0", Action::Merge { with_tu_id: "D#1".into() })).unwrap();
        assert_eq!(json, r#"{"tu_id":"D#0","action":{"type":"merge","with_tu_id":"D#1"},"timestamp":1,"actor":"t"}"#);
        let parsed: Decision = serde_json::from_str(r#"{"tu_id":"x","action":{"type":"accept"}}"#).unwrap();
        assert_eq!(parsed.action, Action::Accept);
    }

    #[test]
    fn session_logs_before_applying_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("decisions.jsonl");
        let mut s = ReviewSession::from_parts(three(), vec![], &log).unwrap();
        assert_eq!(s.list(&UnitQuery { status: Some("needs_review".into()), ..Default::default() }).unwrap().total, 3);
        s.submit(d("D#0", Action::Reject)).unwrap();
        assert!(s.submit(d("D#9", Action::Accept)).is_err());
        s.submit(d("D#2", Action::Accept)).unwrap();
        assert_eq!(read_log(&log).unwrap().len(), 2);
        let page = s.list(&UnitQuery { status: Some("needs_review".into()), ..Default::default() }).unwrap();
        assert_eq!(page.items.iter().map(|v| v.tu_id.as_str()).collect::<Vec<_>>(), vec!["D#1"]);
        assert!(!s.export().unwrap().contains("Bir iki."));

        let reopened = ReviewSession::from_parts(three(), vec![], &log).unwrap();
        assert_eq!(reopened.current(), s.current());
        assert!(reopened.replay.skipped.is_empty());
    }

    #[test]
    fn listing_filters_and_pages() {
        let dir = tempfile::tempdir().unwrap();
        let s = ReviewSession::from_parts(three(), vec![], &dir.path().join("l.jsonl")).unwrap();
        let q = UnitQuery { min_conf: Some(0.35), per_page: Some(1), page: Some(2), ..Default::default() };
        let page = s.list(&q).unwrap();
        assert_eq!((page.total, page.items.len()), (2, 1));
        assert_eq!(page.items[0].tu_id, "D#2");
        assert!(s.list(&UnitQuery { status: Some("bogus".into()), ..Default::default() }).is_err());
        let view = s.get("D#1").unwrap();
        assert_eq!(view.prev.unwrap().tu_id, "D#0");
        assert_eq!(view.next.unwrap().tu_id, "D#2");
    }

    fn arb_action() -> impl Strategy<Value = (usize, Action)> {
        (0usize..6, 0usize..5, 0usize..12, 0usize..12).prop_map(|(id, kind, a, b)| {
            let action = match kind {
                0 => Action::Accept,
                1 => Action::Reject,
                2 => Action::Edit { src_text: format!("e{a}"), tgt_text: format!("f{b}") },
                3 => Action::Merge { with_tu_id: format!("D#{}", a % 6) },
                _ => Action::Split { src_boundary: a, tgt_boundary: b },
            };
            (id, action)
        })
    }

    proptest! {
        #[test]
        fn replay_is_a_left_fold(log in proptest::collection::vec(arb_action(), 0..20), cut_at in 0usize..20) {
            let base = tm(&[("a b c d", "w x y z"), ("e f", "g h"), ("i j k", "l m n"), ("o", "p"), ("q r", "s t"), ("u v", "x y")]);
            let log: Vec<Decision> = log.into_iter().map(|(i, a)| d(&format!("D#{i}"), a)).collect();
            let k = cut_at.min(log.len());
            let (whole, _) = apply_decisions(&base, &log);
            let (prefix, _) = apply_decisions(&base, &log[..k]);
            let (stepped, _) = apply_decisions(&prefix, &log[k..]);
            prop_assert_eq!(&whole, &stepped);
            whole.validate().unwrap();
        }
    }
}

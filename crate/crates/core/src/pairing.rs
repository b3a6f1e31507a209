//! Filename-driven document pairing: batch rename, duplicate removal and
//! exact key matching between a source and a target folder.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::fsutil::{self, file_name_string};

#[derive(Debug, thiserror::Error)]
pub enum PairingError {
    #[error("rename rule: {0}")]
    BadRule(String),
    #[error("rename would collide: {}", describe_collisions(.0))]
    Collision(Vec<Collision>),
    #[error("no document pairs found ({unpaired_source} unpaired source, {unpaired_target} unpaired target files)")]
    NoPairs { unpaired_source: usize, unpaired_target: usize, pair_set: Box<PairSet> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn describe_collisions(c: &[Collision]) -> String {
    c.iter().map(|c| format!("{} <- [{}]", c.target, c.sources.join(", "))).collect::<Vec<_>>().join("; ")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PairingError + '_ {
    move |source| PairingError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    pub target: String,
    /// Every file that would end up with `target` as its name.
    pub sources: Vec<String>,
}

/// A find/replace rule over file names. Literal rules replace every
/// occurrence; regex rules may use `$1`-style capture references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenameRule {
    pub find: String,
    pub replace: String,
    #[serde(default)]
    pub regex: bool,
}

enum CompiledRule<'a> {
    Literal(&'a str, &'a str),
    Regex(Regex, &'a str),
}

impl RenameRule {
    pub fn literal(find: &str, replace: &str) -> Self {
        RenameRule { find: find.into(), replace: replace.into(), regex: false }
    }

    pub fn regex(find: &str, replace: &str) -> Self {
        RenameRule { find: find.into(), replace: replace.into(), regex: true }
    }

    fn compile(&self) -> Result<CompiledRule<'_>, PairingError> {
        if self.find.is_empty() {
            return Err(PairingError::BadRule("find must be non-empty".into()));
        }
        if self.regex {
            let re = Regex::new(&self.find).map_err(|e| PairingError::BadRule(e.to_string()))?;
            Ok(CompiledRule::Regex(re, &self.replace))
        } else {
            Ok(CompiledRule::Literal(&self.find, &self.replace))
        }
    }

    /// The new name for `name`, or `None` when the rule does not match.
    pub fn apply(&self, name: &str) -> Result<Option<String>, PairingError> {
        Ok(match self.compile()? {
            CompiledRule::Literal(find, replace) => name.contains(find).then(|| name.replace(find, replace)),
            CompiledRule::Regex(re, replace) => re.is_match(name).then(|| re.replace_all(name, replace).into_owned()),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameReport {
    /// Old name to new name, for every file that changed.
    pub renamed: BTreeMap<String, String>,
}

/// Computes the renames `rule` implies for `dir` and the collisions they
/// would cause, without touching the filesystem.
pub fn plan_rename(dir: &Path, rule: &RenameRule) -> Result<(RenameReport, Vec<Collision>), PairingError> {
    let names: Vec<String> = fsutil::list_files(dir).map_err(io_err(dir))?.iter().map(|p| file_name_string(p)).collect();
    let mut renamed = BTreeMap::new();
    for name in &names {
        if let Some(new) = rule.apply(name)? {
            if new != *name {
                renamed.insert(name.clone(), new);
            }
        }
    }
    let mut claims: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (old, new) in &renamed {
        claims.entry(new.as_str()).or_default().push(old.clone());
    }
    for name in &names {
        if !renamed.contains_key(name) {
            if let Some(sources) = claims.get_mut(name.as_str()) {
                sources.push(name.clone());
            }
        }
    }
    let collisions = claims
        .into_iter()
        .filter(|(_, s)| s.len() > 1)
        .map(|(target, mut sources)| {
            sources.sort();
            Collision { target: target.to_string(), sources }
        })
        .collect();
    Ok((RenameReport { renamed }, collisions))
}

/// Renames every matching file in `dir`. Nothing is renamed when any two
/// files would share a name.
pub fn batch_rename(dir: &Path, rule: &RenameRule) -> Result<RenameReport, PairingError> {
    let (report, collisions) = plan_rename(dir, rule)?;
    if !collisions.is_empty() {
        return Err(PairingError::Collision(collisions));
    }
    // Two phases so that chains like a -> b, b -> c cannot clobber.
    let staged: Vec<(PathBuf, PathBuf)> = report
        .renamed
        .iter()
        .enumerate()
        .map(|(i, (_, new))| {
            let tmp = dir.join(format!(".forge-rename-{i}"));
            (tmp, dir.join(new))
        })
        .collect();
    for ((old, _), (tmp, _)) in report.renamed.iter().zip(&staged) {
        let from = dir.join(old);
        fs::rename(&from, tmp).map_err(io_err(&from))?;
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest).map_err(io_err(dest))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    pub hash: String,
    pub survivor: String,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateReport {
    pub groups: Vec<DuplicateGroup>,
    /// Unreadable files with the error message.
    pub skipped: Vec<(String, String)>,
}

impl DuplicateReport {
    pub fn removed_count(&self) -> usize {
        self.groups.iter().map(|g| g.removed.len()).sum()
    }

    pub fn removed_names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().flat_map(|g| g.removed.iter().map(String::as_str))
    }
}

/// Groups the files of `dir` by SHA-256 of their content. In every group of
/// two or more, the lexicographically smallest name stays and the others are
/// moved to the quarantine folder.
pub fn detect_duplicates(dir: &Path) -> Result<DuplicateReport, PairingError> {
    let mut by_hash: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for path in fsutil::list_files(dir).map_err(io_err(dir))? {
        let name = file_name_string(&path);
        match fsutil::hash_file(&path) {
            Ok(hash) => by_hash.entry(hash).or_default().push(name),
            Err(e) => skipped.push((name, e.to_string())),
        }
    }
    let mut groups = Vec::new();
    for (hash, mut names) in by_hash {
        if names.len() < 2 {
            continue;
        }
        names.sort();
        let survivor = names.remove(0);
        for name in &names {
            fsutil::quarantine(dir, Path::new(name), "duplicates").map_err(io_err(&dir.join(name)))?;
        }
        groups.push(DuplicateGroup { hash, survivor, removed: names });
    }
    groups.sort_by(|a, b| a.survivor.cmp(&b.survivor));
    Ok(DuplicateReport { groups, skipped })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPair {
    pub key: String,
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    pub source_lang: String,
    pub target_lang: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<DocumentPair>,
    pub unpaired_source: Vec<PathBuf>,
    pub unpaired_target: Vec<PathBuf>,
    pub duplicates_removed: Vec<PathBuf>,
}

impl PairSet {
    /// The same pairing seen from the other side.
    pub fn transposed(&self) -> PairSet {
        PairSet {
            pairs: self
                .pairs
                .iter()
                .map(|p| DocumentPair {
                    key: p.key.clone(),
                    source_path: p.target_path.clone(),
                    target_path: p.source_path.clone(),
                    source_lang: p.target_lang.clone(),
                    target_lang: p.source_lang.clone(),
                })
                .collect(),
            unpaired_source: self.unpaired_target.clone(),
            unpaired_target: self.unpaired_source.clone(),
            duplicates_removed: self.duplicates_removed.clone(),
        }
    }
}

/// One side of a pairing: a folder, the filename prefix that marks its
/// language, and the language tag.
#[derive(Debug, Clone, Copy)]
pub struct Side<'a> {
    pub dir: &'a Path,
    pub prefix: &'a str,
    pub lang: &'a str,
}

impl<'a> Side<'a> {
    pub fn new(dir: &'a Path, prefix: &'a str, lang: &'a str) -> Self {
        Side { dir, prefix, lang }
    }

    /// Key to path for files carrying the prefix.
    fn keys(&self) -> Result<BTreeMap<String, PathBuf>, PairingError> {
        Ok(fsutil::list_files(self.dir)
            .map_err(io_err(self.dir))?
            .into_iter()
            .filter_map(|p| {
                let key = file_name_string(&p).strip_prefix(self.prefix)?.to_string();
                (!key.is_empty()).then_some((key, p))
            })
            .collect())
    }
}

/// Pairs files whose names agree after removing each side's prefix.
pub fn pair_documents(source: Side<'_>, target: Side<'_>) -> Result<PairSet, PairingError> {
    if source.prefix.is_empty() || target.prefix.is_empty() {
        return Err(PairingError::BadRule("pair prefixes must be non-empty".into()));
    }
    let src = source.keys()?;
    let mut tgt = target.keys()?;
    let mut set = PairSet::default();
    for (key, source_path) in src {
        match tgt.remove(&key) {
            Some(target_path) => set.pairs.push(DocumentPair {
                key,
                source_path,
                target_path,
                source_lang: source.lang.into(),
                target_lang: target.lang.into(),
            }),
            None => set.unpaired_source.push(source_path),
        }
    }
    set.unpaired_target = tgt.into_values().collect();
    if set.pairs.is_empty() {
        return Err(PairingError::NoPairs {
            unpaired_source: set.unpaired_source.len(),
            unpaired_target: set.unpaired_target.len(),
            pair_set: Box::new(set),
        });
    }
    Ok(set)
}

/// Keys present on one side only, for reporting.
pub fn key_difference(set: &PairSet, source_prefix: &str) -> BTreeSet<String> {
    set.unpaired_source
        .iter()
        .filter_map(|p| file_name_string(p).strip_prefix(source_prefix).map(String::from))
        .collect()
}

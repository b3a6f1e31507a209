//! The whole corpus build driven by one project manifest. Every stage works
//! on its own directory under the work dir, copied from the previous stage,
//! so any stage can be rerun from the artifacts of the ones before it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::LazyLock;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::alignment::{self, AlignParams, Alignment, AnchorTerm};
use crate::crawler::{self, CrawlManifest, CrawlOutcome, REPORT_FILE};
use crate::extraction::{self, ChainSpec, EncodingSource, SegmentedDoc, SegmenterProfile};
use crate::fsutil;
use crate::pairing::{self, PairSet, RenameRule, Side};
use crate::tmx::{self, CleanConfig, CorpusStats, HeaderMeta};

const CHECKSUM_FILE: &str = "checksum.txt";
const SUMMARY_FILE: &str = "summary.json";
const MIRROR: &str = "mirror";

pub const PAIRS_FILE: &str = "pairs.json";
pub const SEGMENTED_FILE: &str = "segmented.json";
pub const ALIGNMENTS_FILE: &str = "alignments.jsonl";
pub const COMPILED_FILE: &str = "compiled.tmx";
pub const CLEANED_FILE: &str = "cleaned.tmx";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Crawl,
    Prune,
    Rename,
    Dedup,
    Pair,
    Extract,
    Align,
    Compile,
    Clean,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Crawl,
        Stage::Prune,
        Stage::Rename,
        Stage::Dedup,
        Stage::Pair,
        Stage::Extract,
        Stage::Align,
        Stage::Compile,
        Stage::Clean,
        Stage::Stats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Crawl => "crawl",
            Stage::Prune => "prune",
            Stage::Rename => "rename",
            Stage::Dedup => "dedup",
            Stage::Pair => "pair",
            Stage::Extract => "extract",
            Stage::Align => "align",
            Stage::Compile => "compile",
            Stage::Clean => "clean",
            Stage::Stats => "stats",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PipelineError::Manifest(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid project manifest: {0}")]
    Manifest(String),
    #[error("cannot start at {requested}: artifacts of stage {missing} are missing")]
    MissingArtifact { requested: Stage, missing: Stage },
    #[error("cannot start at {requested}: artifacts of stage {stage} changed since it ran")]
    ChangedArtifact { requested: Stage, stage: Stage },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Languages {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    /// File-name patterns to keep. Empty leaves the mirror untouched.
    pub keep_patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideConfig {
    /// Folder holding this side's pages, relative to the mirrored site root.
    #[serde(default = "default_subdir")]
    pub subdir: PathBuf,
    pub prefix: String,
    /// Applied in order before pairing.
    #[serde(default)]
    pub rename: Vec<RenameRule>,
}

fn default_subdir() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub work_dir: PathBuf,
    /// Final memory; defaults to `<work_dir>/<name>.tmx`.
    pub tmx: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { work_dir: PathBuf::from("work"), tmx: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectManifest {
    pub name: String,
    /// The basis on which the crawled material may be used.
    #[serde(default)]
    pub license_note: String,
    pub languages: Languages,
    /// Either a crawl of a live site or an already mirrored folder.
    #[serde(default)]
    pub crawl: Option<CrawlManifest>,
    #[serde(default)]
    pub mirror_dir: Option<PathBuf>,
    #[serde(default)]
    pub prune: PruneConfig,
    pub source: SideConfig,
    pub target: SideConfig,
    #[serde(default)]
    pub extraction: ChainSpec,
    /// Tab-separated anchor term list.
    #[serde(default)]
    pub anchors: Option<PathBuf>,
    #[serde(default)]
    pub align: AlignParams,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Relative paths in the manifest resolve against this directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

static LANG_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z]{2,8}(-[A-Za-z0-9]{1,8})*$").unwrap());

impl ProjectManifest {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut m: ProjectManifest = toml::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            fs::read_to_string(path).map_err(|e| PipelineError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Manifest(m));
        if self.name.trim().is_empty() {
            return bad("name must not be empty".into());
        }
        for tag in [&self.languages.source, &self.languages.target] {
            if !LANG_TAG.is_match(tag) {
                return bad(format!("{tag:?} is not a language tag"));
            }
        }
        if self.languages.source.eq_ignore_ascii_case(&self.languages.target) {
            return bad("source and target language are the same".into());
        }
        match (&self.crawl, &self.mirror_dir) {
            (Some(c), None) => {
                let mut probe = c.clone();
                probe.output_dir = PathBuf::from(MIRROR);
                probe.validate().map_err(|e| PipelineError::Manifest(e.to_string()))?;
            }
            (None, Some(_)) => {}
            _ => return bad("set exactly one of [crawl] and mirror_dir".into()),
        }
        for side in [&self.source, &self.target] {
            if side.prefix.is_empty() {
                return bad("pair prefixes must not be empty".into());
            }
            if side.subdir != Path::new(".") && !crawler::is_contained(&side.subdir) {
                return bad(format!("subdir {} must stay inside the mirror", side.subdir.display()));
            }
            for rule in &side.rename {
                rule.apply("").map_err(|e| PipelineError::Manifest(e.to_string()))?;
            }
        }
        if self.source.subdir == self.target.subdir && self.source.prefix == self.target.prefix {
            return bad("sides sharing a folder need different prefixes".into());
        }
        for side in [&self.extraction.source, &self.extraction.target] {
            side.encoding.validate().map_err(|e| PipelineError::Manifest(e.to_string()))?;
        }
        self.extraction.source_chain().map_err(|e| PipelineError::Manifest(e.to_string()))?;
        self.extraction.target_chain().map_err(|e| PipelineError::Manifest(e.to_string()))?;
        self.align.validate().map_err(|e| PipelineError::Manifest(e.to_string()))?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) }
    }

    pub fn work_dir(&self) -> PathBuf {
        self.resolve(&self.output.work_dir)
    }

    pub fn tmx_path(&self) -> PathBuf {
        match &self.output.tmx {
            Some(p) => self.resolve(p),
            None => self.work_dir().join(format!("{}.tmx", self.name)),
        }
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.work_dir().join(stage.name())
    }

    /// Directory inside a stage's mirror that corresponds to the site root.
    fn site_root(&self, mirror: &Path) -> Result<PathBuf, PipelineError> {
        match &self.crawl {
            Some(c) => {
                let seed = Url::parse(&c.seed_urls[0]).map_err(|e| PipelineError::Manifest(e.to_string()))?;
                let host = crawler::url_path(&seed).components().next().map(|c| PathBuf::from(c.as_os_str()));
                Ok(mirror.join(host.unwrap_or_default()))
            }
            None => Ok(mirror.to_path_buf()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub duration_ms: u64,
    pub counts: BTreeMap<String, u64>,
    /// Relative to the work directory.
    pub artifacts: Vec<PathBuf>,
    pub checksum: String,
    /// Whether this run executed the stage or reused its earlier artifacts.
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub name: String,
    pub stages: Vec<StageReport>,
    pub tmx_path: PathBuf,
    pub stats: Option<CorpusStats>,
}

impl PipelineReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn count(&self, stage: Stage, key: &str) -> Option<u64> {
        self.stage(stage).and_then(|s| s.counts.get(key).copied())
    }

    pub fn checksums(&self) -> BTreeMap<Stage, String> {
        self.stages.iter().map(|s| (s.stage, s.checksum.clone())).collect()
    }
}

/// Per-document extraction record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractRecord {
    pub doc_key: String,
    pub lang: String,
    pub encoding: String,
    pub encoding_source: EncodingSource,
    pub replacements: usize,
    pub blocks: usize,
    pub sentences: usize,
    pub no_match: bool,
}

struct StageOutput {
    counts: BTreeMap<String, u64>,
    artifacts: Vec<PathBuf>,
}

impl StageOutput {
    fn new() -> Self {
        StageOutput { counts: BTreeMap::new(), artifacts: Vec::new() }
    }

    fn count(mut self, key: &str, n: usize) -> Self {
        self.counts.insert(key.into(), n as u64);
        self
    }

    fn artifact(mut self, rel: impl Into<PathBuf>) -> Self {
        self.artifacts.push(rel.into());
        self
    }
}

fn stage_err(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| e.to_string())?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn stage_checksum(dir: &Path) -> std::io::Result<String> {
    fsutil::tree_checksum(dir, &[CHECKSUM_FILE, SUMMARY_FILE, REPORT_FILE])
}

fn fresh_dir(dir: &Path) -> Result<(), String> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

/// Runs the pipeline, optionally starting at `from_stage` on top of the
/// artifacts earlier runs left in the work directory.
pub async fn run_pipeline(manifest: &ProjectManifest, from_stage: Option<Stage>) -> Result<PipelineReport, PipelineError> {
    run_stages(manifest, from_stage, None).await
}

/// Runs the stages from `from_stage` through `to_stage` inclusive. Artifacts
/// of stages after `to_stage` are deleted since they no longer follow from
/// their inputs. The final memory is only written when stats runs.
pub async fn run_stages(
    manifest: &ProjectManifest,
    from_stage: Option<Stage>,
    to_stage: Option<Stage>,
) -> Result<PipelineReport, PipelineError> {
    manifest.validate()?;
    let start = from_stage.unwrap_or(Stage::Crawl);
    let end = to_stage.unwrap_or(Stage::Stats);
    if end < start {
        return Err(PipelineError::Manifest(format!("stage range {start}..{end} is empty")));
    }
    let mut report = PipelineReport { name: manifest.name.clone(), stages: Vec::new(), tmx_path: manifest.tmx_path(), stats: None };

    for stage in Stage::ALL.into_iter().take_while(|s| *s < start) {
        let dir = manifest.stage_dir(stage);
        let recorded = fs::read_to_string(dir.join(CHECKSUM_FILE))
            .map_err(|_| PipelineError::MissingArtifact { requested: start, missing: stage })?;
        let actual = stage_checksum(&dir).map_err(|_| PipelineError::MissingArtifact { requested: start, missing: stage })?;
        if recorded.trim() != actual {
            return Err(PipelineError::ChangedArtifact { requested: start, stage });
        }
        let mut summary: StageReport = read_json(&dir.join(SUMMARY_FILE))
            .map_err(|_| PipelineError::MissingArtifact { requested: start, missing: stage })?;
        summary.reused = true;
        report.stages.push(summary);
    }

    for stage in Stage::ALL.into_iter().filter(|s| *s > end) {
        let dir = manifest.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| stage_err(stage)(format!("{}: {e}", dir.display())))?;
        }
    }

    for stage in Stage::ALL.into_iter().filter(|s| (start..=end).contains(s)) {
        let started = Instant::now();
        let dir = manifest.stage_dir(stage);
        fresh_dir(&dir).map_err(stage_err(stage))?;
        tracing::info!(%stage, "running");
        let out = match stage {
            Stage::Crawl => run_crawl(manifest, &dir).await,
            _ => run_local(manifest, stage, &dir),
        }
        .map_err(stage_err(stage))?;
        let checksum = stage_checksum(&dir).map_err(|e| stage_err(stage)(e.to_string()))?;
        fs::write(dir.join(CHECKSUM_FILE), format!("{checksum}\n")).map_err(|e| stage_err(stage)(e.to_string()))?;
        let summary = StageReport {
            stage,
            duration_ms: started.elapsed().as_millis() as u64,
            counts: out.counts,
            artifacts: out.artifacts.into_iter().map(|a| PathBuf::from(stage.name()).join(a)).collect(),
            checksum,
            reused: false,
        };
        write_json(&dir.join(SUMMARY_FILE), &summary).map_err(stage_err(stage))?;
        report.stages.push(summary);
    }

    if end < Stage::Stats {
        return Ok(report);
    }
    let cleaned = manifest.stage_dir(Stage::Clean).join(CLEANED_FILE);
    let tmx_path = manifest.tmx_path();
    if let Some(parent) = tmx_path.parent() {
        fs::create_dir_all(parent).map_err(|e| stage_err(Stage::Stats)(e.to_string()))?;
    }
    fs::copy(&cleaned, &tmx_path).map_err(|e| stage_err(Stage::Stats)(format!("{}: {e}", tmx_path.display())))?;
    report.stats = Some(read_json(&manifest.stage_dir(Stage::Stats).join(STATS_FILE)).map_err(stage_err(Stage::Stats))?);
    Ok(report)
}

async fn run_crawl(m: &ProjectManifest, dir: &Path) -> Result<StageOutput, String> {
    let mirror = dir.join(MIRROR);
    match (&m.crawl, &m.mirror_dir) {
        (Some(c), _) => {
            let mut c = c.clone();
            c.output_dir = mirror;
            let mut outcome: CrawlOutcome = crawler::crawl(&c).await.map_err(|e| e.to_string())?;
            outcome.report.elapsed_ms = 0;
            write_json(&dir.join("crawl.json"), &outcome)?;
            Ok(StageOutput::new()
                .count("fetched", outcome.report.fetched)
                .count("skipped", outcome.report.skipped)
                .count("failed", outcome.report.failed)
                .artifact(MIRROR)
                .artifact("crawl.json"))
        }
        (None, Some(src)) => {
            let src = m.resolve(src);
            fsutil::copy_tree(&src, &mirror).map_err(|e| format!("{}: {e}", src.display()))?;
            let files = fsutil::walk_files(&mirror).map_err(|e| e.to_string())?;
            Ok(StageOutput::new().count("fetched", files.len()).artifact(MIRROR))
        }
        (None, None) => Err("no crawl and no mirror_dir".into()),
    }
}

/// Copies the previous stage's mirror into this stage's directory.
fn copy_mirror(m: &ProjectManifest, from: Stage, dir: &Path) -> Result<PathBuf, String> {
    let src = m.stage_dir(from).join(MIRROR);
    let dest = dir.join(MIRROR);
    fsutil::copy_tree(&src, &dest).map_err(|e| format!("{}: {e}", src.display()))?;
    Ok(dest)
}

fn side_dirs(m: &ProjectManifest, mirror: &Path) -> Result<(PathBuf, PathBuf), String> {
    let root = m.site_root(mirror).map_err(|e| e.to_string())?;
    Ok((root.join(&m.source.subdir), root.join(&m.target.subdir)))
}

fn run_local(m: &ProjectManifest, stage: Stage, dir: &Path) -> Result<StageOutput, String> {
    let work = m.work_dir();
    match stage {
        Stage::Crawl => unreachable!("crawl is async"),
        Stage::Prune => {
            let mirror = copy_mirror(m, Stage::Crawl, dir)?;
            let root = m.site_root(&mirror).map_err(|e| e.to_string())?;
            let report = if m.prune.keep_patterns.is_empty() || !root.exists() {
                crawler::PruneReport { kept: fsutil::walk_files(&root).unwrap_or_default(), removed: Vec::new() }
            } else {
                crawler::prune_noise(&root, &m.prune.keep_patterns, false).map_err(|e| e.to_string())?
            };
            write_json(&dir.join("prune.json"), &report)?;
            Ok(StageOutput::new()
                .count("kept", report.kept.len())
                .count("removed", report.removed.len())
                .artifact(MIRROR)
                .artifact("prune.json"))
        }
        Stage::Rename => {
            let mirror = copy_mirror(m, Stage::Prune, dir)?;
            let (src_dir, tgt_dir) = side_dirs(m, &mirror)?;
            let mut renamed = BTreeMap::new();
            for (side_dir, side) in [(&src_dir, &m.source), (&tgt_dir, &m.target)] {
                for rule in &side.rename {
                    let r = pairing::batch_rename(side_dir, rule).map_err(|e| e.to_string())?;
                    renamed.extend(r.renamed);
                }
            }
            write_json(&dir.join("rename.json"), &renamed)?;
            Ok(StageOutput::new().count("renamed", renamed.len()).artifact(MIRROR).artifact("rename.json"))
        }
        Stage::Dedup => {
            let mirror = copy_mirror(m, Stage::Rename, dir)?;
            let (src_dir, tgt_dir) = side_dirs(m, &mirror)?;
            let mut reports = vec![pairing::detect_duplicates(&src_dir).map_err(|e| e.to_string())?];
            if tgt_dir != src_dir {
                reports.push(pairing::detect_duplicates(&tgt_dir).map_err(|e| e.to_string())?);
            }
            let removed: usize = reports.iter().map(|r| r.removed_count()).sum();
            write_json(&dir.join("dedup.json"), &reports)?;
            Ok(StageOutput::new().count("duplicates_removed", removed).artifact(MIRROR).artifact("dedup.json"))
        }
        Stage::Pair => {
            let mirror = m.stage_dir(Stage::Dedup).join(MIRROR);
            let (src_dir, tgt_dir) = side_dirs(m, &mirror)?;
            let mut set = pairing::pair_documents(
                Side::new(&src_dir, &m.source.prefix, &m.languages.source),
                Side::new(&tgt_dir, &m.target.prefix, &m.languages.target),
            )
            .map_err(|e| e.to_string())?;
            let dedup: Vec<pairing::DuplicateReport> = read_json(&m.stage_dir(Stage::Dedup).join("dedup.json"))?;
            set.duplicates_removed = dedup.iter().flat_map(|r| r.removed_names().map(PathBuf::from)).collect();
            let rel = |p: &PathBuf| p.strip_prefix(&work).map(Path::to_path_buf).unwrap_or_else(|_| p.clone());
            for p in &mut set.pairs {
                p.source_path = rel(&p.source_path);
                p.target_path = rel(&p.target_path);
            }
            set.unpaired_source = set.unpaired_source.iter().map(rel).collect();
            set.unpaired_target = set.unpaired_target.iter().map(rel).collect();
            write_json(&dir.join(PAIRS_FILE), &set)?;
            Ok(StageOutput::new()
                .count("pairs", set.pairs.len())
                .count("unpaired", set.unpaired_source.len() + set.unpaired_target.len())
                .count("unpaired_source", set.unpaired_source.len())
                .count("unpaired_target", set.unpaired_target.len())
                .count("duplicates_removed", set.duplicates_removed.len())
                .artifact(PAIRS_FILE))
        }
        Stage::Extract => {
            let set: PairSet = read_json(&m.stage_dir(Stage::Pair).join(PAIRS_FILE))?;
            let sides = [
                (&m.extraction.source, m.extraction.source_chain().map_err(|e| e.to_string())?, &m.languages.source),
                (&m.extraction.target, m.extraction.target_chain().map_err(|e| e.to_string())?, &m.languages.target),
            ];
            let profiles: Vec<SegmenterProfile> = sides
                .iter()
                .map(|(side, _, lang)| {
                    let mut p = SegmenterProfile::for_lang(lang);
                    p.extend(side.abbreviations.iter().cloned());
                    p
                })
                .collect();
            let jobs: Vec<(usize, &pairing::DocumentPair)> =
                set.pairs.iter().flat_map(|p| [(0, p), (1, p)]).collect();
            let results = par_map(&jobs, |(side, pair)| {
                let (cfg, chain, lang) = &sides[*side];
                let path = work.join(if *side == 0 { &pair.source_path } else { &pair.target_path });
                let raw = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let decoded = extraction::decode_bytes(&raw, &cfg.encoding).map_err(|e| e.to_string())?;
                let extracted = extraction::extract(&decoded.text, chain);
                if extracted.no_match {
                    tracing::warn!(doc = %pair.key, %lang, "no span rule matched");
                }
                let doc = extraction::segment_sentences(&pair.key, &extracted.blocks, lang, &profiles[*side]);
                let record = ExtractRecord {
                    doc_key: pair.key.clone(),
                    lang: lang.to_string(),
                    encoding: decoded.encoding_used.clone(),
                    encoding_source: decoded.source,
                    replacements: decoded.replacements,
                    blocks: extracted.blocks.len(),
                    sentences: doc.sentences.len(),
                    no_match: extracted.no_match,
                };
                Ok::<_, String>((doc, record))
            });
            let mut docs = Vec::new();
            let mut records = Vec::new();
            for r in results {
                let (doc, record) = r?;
                docs.push(doc);
                records.push(record);
            }
            write_json(&dir.join(SEGMENTED_FILE), &docs)?;
            write_json(&dir.join("extract.json"), &records)?;
            let sentences = |lang: &str| docs.iter().filter(|d| d.lang == lang).map(|d| d.sentences.len()).sum();
            Ok(StageOutput::new()
                .count("documents", docs.len())
                .count("source_sentences", sentences(&m.languages.source))
                .count("target_sentences", sentences(&m.languages.target))
                .count("no_match", records.iter().filter(|r| r.no_match).count())
                .count("replacements", records.iter().map(|r| r.replacements).sum())
                .artifact(SEGMENTED_FILE)
                .artifact("extract.json"))
        }
        Stage::Align => {
            let docs: Vec<SegmentedDoc> = read_json(&m.stage_dir(Stage::Extract).join(SEGMENTED_FILE))?;
            let anchors: Vec<AnchorTerm> = match &m.anchors {
                Some(p) => {
                    let p = m.resolve(p);
                    let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                    alignment::parse_anchors_tsv(&text).map_err(|e| e.to_string())?
                }
                None => Vec::new(),
            };
            let by_key: BTreeMap<(&str, &str), &SegmentedDoc> =
                docs.iter().map(|d| ((d.doc_key.as_str(), d.lang.as_str()), d)).collect();
            let keys: Vec<&str> = docs
                .iter()
                .filter(|d| d.lang == m.languages.source)
                .map(|d| d.doc_key.as_str())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let results = par_map(&keys, |key| {
                let src = by_key.get(&(*key, m.languages.source.as_str())).ok_or(format!("{key}: no source document"))?;
                let tgt = by_key.get(&(*key, m.languages.target.as_str())).ok_or(format!("{key}: no target document"))?;
                alignment::align(src, tgt, &anchors, &m.align).map_err(|e| format!("{key}: {e}"))
            });
            let alignments: Vec<Alignment> = results.into_iter().collect::<Result<_, _>>()?;
            let mut lines = String::new();
            for a in &alignments {
                lines.push_str(&serde_json::to_string(a).map_err(|e| e.to_string())?);
                lines.push('\n');
            }
            fs::write(dir.join(ALIGNMENTS_FILE), lines).map_err(|e| e.to_string())?;
            let beads = alignments.iter().map(|a| a.beads.len()).sum();
            let review = alignments.iter().flat_map(|a| &a.beads).filter(|b| b.needs_review).count();
            let anchored = alignments.iter().flat_map(|a| &a.beads).filter(|b| b.anchor_hit).count();
            Ok(StageOutput::new()
                .count("alignments", alignments.len())
                .count("beads", beads)
                .count("needs_review", review)
                .count("anchor_hits", anchored)
                .artifact(ALIGNMENTS_FILE))
        }
        Stage::Compile => {
            let docs: Vec<SegmentedDoc> = read_json(&m.stage_dir(Stage::Extract).join(SEGMENTED_FILE))?;
            let path = m.stage_dir(Stage::Align).join(ALIGNMENTS_FILE);
            let alignments = crate::review::read_alignments(&path).map_err(|e| e.to_string())?;
            let meta = HeaderMeta { srclang: m.languages.source.clone(), tgtlang: m.languages.target.clone() };
            let (tm, report) = tmx::compile(&alignments, &docs, &meta).map_err(|e| e.to_string())?;
            tmx::write_tmx(&tm, &dir.join(COMPILED_FILE)).map_err(|e| e.to_string())?;
            write_json(&dir.join("compile.json"), &report)?;
            Ok(StageOutput::new()
                .count("units", report.units)
                .count("dropped_beads", report.dropped_beads)
                .count("needs_review", report.needs_review)
                .artifact(COMPILED_FILE)
                .artifact("compile.json"))
        }
        Stage::Clean => {
            let tm = tmx::read_tmx(&m.stage_dir(Stage::Compile).join(COMPILED_FILE)).map_err(|e| e.to_string())?;
            let (cleaned, report) = tmx::clean(&tm, &m.clean);
            tmx::write_tmx(&cleaned, &dir.join(CLEANED_FILE)).map_err(|e| e.to_string())?;
            write_json(&dir.join("clean.json"), &report)?;
            Ok(StageOutput::new()
                .count("input_units", report.input_units)
                .count("units", report.output_units)
                .count("removed", report.total_removed)
                .count("flagged", report.total_flagged)
                .artifact(CLEANED_FILE)
                .artifact("clean.json"))
        }
        Stage::Stats => {
            let tm = tmx::read_tmx(&m.stage_dir(Stage::Clean).join(CLEANED_FILE)).map_err(|e| e.to_string())?;
            let stats = tmx::stats(&tm);
            write_json(&dir.join(STATS_FILE), &stats)?;
            fs::write(dir.join("stats.txt"), stats.table()).map_err(|e| e.to_string())?;
            Ok(StageOutput::new()
                .count("tu_count", stats.tu_count as usize)
                .count("src_words", stats.src_words as usize)
                .count("tgt_words", stats.tgt_words as usize)
                .artifact(STATS_FILE)
                .artifact("stats.txt"))
        }
    }
}

/// Order-preserving parallel map over scoped threads.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

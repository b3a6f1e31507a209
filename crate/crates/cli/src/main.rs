use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use forge_client::ReviewClient;
use forge_core::crawler::{self, CrawlManifest};
use forge_core::pairing::{self, RenameRule, Side};
use forge_core::pipeline::{self, PipelineReport, ProjectManifest, Stage};
use forge_core::review::{Action, Order, ReviewSession, UnitQuery};
use forge_core::tmx::{self, CleanConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "forge", version, about = "Build a translation memory from a bilingual website")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mirror a website as described by a crawl manifest (TOML).
    Crawl {
        manifest: PathBuf,
        /// Overrides output_dir from the manifest.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Move files not matching any keep pattern into a quarantine folder.
    Prune {
        dir: PathBuf,
        #[arg(long = "keep", required_unless_present = "restore")]
        keep: Vec<String>,
        /// Allow an empty keep list, quarantining everything.
        #[arg(long)]
        force: bool,
        /// Put quarantined files back instead.
        #[arg(long, conflicts_with_all = ["keep", "force"])]
        restore: bool,
    },
    /// Rename every file in a folder by a literal or regex rule.
    Rename {
        dir: PathBuf,
        #[arg(long)]
        find: String,
        #[arg(long)]
        replace: String,
        #[arg(long)]
        regex: bool,
        /// Show the renames without performing them.
        #[arg(long)]
        dry_run: bool,
    },
    /// Quarantine byte-identical files, keeping the first name of each group.
    Dedup { dir: PathBuf },
    /// Pair source and target files whose names agree after their prefixes.
    Pair(PairArgs),
    /// Run the extract stage of a project.
    Extract { project: PathBuf },
    /// Run the align stage of a project.
    Align { project: PathBuf },
    /// Run the compile stage of a project.
    Compile { project: PathBuf },
    /// Clean a TMX file.
    Clean {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated check names or numbers; default runs checks 1-11.
        #[arg(long)]
        checks: Option<String>,
    },
    /// Write a TMX file as two line-aligned plain text files STEM.<lang>.
    Convert { input: PathBuf, stem: PathBuf },
    /// Word and sentence statistics of a TMX file.
    Stats { input: PathBuf },
    /// Run a whole project, or part of it.
    Run {
        project: PathBuf,
        #[arg(long)]
        from: Option<Stage>,
        #[arg(long)]
        to: Option<Stage>,
    },
    /// Review aligned units over HTTP.
    #[command(subcommand)]
    Review(ReviewCommand),
}

#[derive(Args)]
struct PairArgs {
    source_dir: PathBuf,
    target_dir: PathBuf,
    #[arg(long)]
    source_prefix: String,
    #[arg(long)]
    target_prefix: String,
    #[arg(long)]
    source_lang: String,
    #[arg(long)]
    target_lang: String,
    /// Where to write the pair set as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ServerArg {
    #[arg(long, default_value = "http://127.0.0.1:8765", env = "FORGE_SERVER")]
    server: String,
}

#[derive(Subcommand)]
enum ReviewCommand {
    /// Serve the review API for a TMX file.
    Serve {
        tmx: PathBuf,
        #[arg(long)]
        alignments: Option<PathBuf>,
        /// Decision log; defaults to <tmx>.decisions.jsonl.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: SocketAddr,
    },
    /// List units, lowest confidence first.
    List {
        #[command(flatten)]
        server: ServerArg,
        /// needs_review, auto, confirmed, edited or rejected.
        #[arg(long)]
        status: Option<String>,
        #[arg(long)]
        min_conf: Option<f64>,
        #[arg(long)]
        max_conf: Option<f64>,
        #[arg(long)]
        doc: Option<String>,
        /// Keep document order instead of sorting by confidence.
        #[arg(long)]
        document_order: bool,
        #[arg(long, default_value_t = 1)]
        page: usize,
        #[arg(long)]
        per_page: Option<usize>,
    },
    /// Show one unit with its neighbours.
    Show {
        #[command(flatten)]
        server: ServerArg,
        tu_id: String,
    },
    /// Record a decision on a unit.
    Decide {
        #[command(flatten)]
        server: ServerArg,
        tu_id: String,
        #[command(subcommand)]
        action: DecideAction,
        #[arg(long, default_value = "", global = true)]
        actor: String,
    },
    /// Download the reviewed memory as TMX.
    Export {
        #[command(flatten)]
        server: ServerArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Statistics of the reviewed memory.
    Stats {
        #[command(flatten)]
        server: ServerArg,
    },
}

#[derive(Subcommand)]
enum DecideAction {
    Accept,
    Reject,
    Edit {
        #[arg(long)]
        src: String,
        #[arg(long)]
        tgt: String,
    },
    /// Absorb the adjacent unit WITH.
    Merge { with: String },
    /// Cut both sides at character offsets.
    Split { src_boundary: usize, tgt_boundary: usize },
}

impl From<DecideAction> for Action {
    fn from(a: DecideAction) -> Self {
        match a {
            DecideAction::Accept => Action::Accept,
            DecideAction::Reject => Action::Reject,
            DecideAction::Edit { src, tgt } => Action::Edit { src_text: src, tgt_text: tgt },
            DecideAction::Merge { with } => Action::Merge { with_tu_id: with },
            DecideAction::Split { src_boundary, tgt_boundary } => Action::Split { src_boundary, tgt_boundary },
        }
    }
}

struct Out {
    json: bool,
}

impl Out {
    /// Prints `value` as JSON, or the text rendering otherwise.
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            print!("{}", text());
        }
        Ok(())
    }
}

fn pipeline_text(r: &PipelineReport) -> String {
    let mut s = String::new();
    for st in &r.stages {
        let counts: Vec<String> = st.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let how = if st.reused { "reused".to_string() } else { format!("{} ms", st.duration_ms) };
        s.push_str(&format!("{:<8} {:>9}  {}\n", st.stage.name(), how, counts.join(" ")));
    }
    if let Some(stats) = &r.stats {
        s.push_str(&format!("\nwrote {}\n\n{}", r.tmx_path.display(), stats.table()));
    }
    s
}

async fn run_stage(project: &Path, stage: Stage, out: &Out) -> Result<()> {
    let m = ProjectManifest::load(project)?;
    let report = pipeline::run_stages(&m, Some(stage), Some(stage)).await?;
    out.emit(&report, || pipeline_text(&report))
}

async fn review(cmd: ReviewCommand, out: &Out) -> Result<()> {
    let client = |s: &ServerArg| ReviewClient::new(&s.server).context("bad server url");
    match cmd {
        ReviewCommand::Serve { tmx, alignments, log, addr } => {
            let log = log.unwrap_or_else(|| {
                let mut name = tmx.file_name().unwrap_or_default().to_os_string();
                name.push(".decisions.jsonl");
                tmx.with_file_name(name)
            });
            let session = ReviewSession::open(&tmx, alignments.as_deref(), &log)
                .with_context(|| format!("opening {}", tmx.display()))?;
            if !session.replay.skipped.is_empty() {
                eprintln!("{} logged decisions could not be replayed", session.replay.skipped.len());
            }
            let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
            eprintln!(
                "reviewing {} ({} decisions so far) on http://{}",
                tmx.display(),
                session.decisions().len(),
                listener.local_addr()?
            );
            tokio::select! {
                r = forge_server::serve(listener, session) => r?,
                _ = tokio::signal::ctrl_c() => eprintln!("stopped"),
            }
        }
        ReviewCommand::List { server, status, min_conf, max_conf, doc, document_order, page, per_page } => {
            let q = UnitQuery {
                status,
                min_conf,
                max_conf,
                doc_key: doc,
                order: if document_order { Order::Document } else { Order::Confidence },
                page: Some(page),
                per_page,
            };
            let units = client(&server)?.list(&q).await?;
            out.emit(&units, || {
                let mut s = String::new();
                for u in &units.items {
                    s.push_str(&format!("{:<20} {:.3} {:<9} {}\n    {}\n", u.tu_id, u.confidence, u.status, u.src_text, u.tgt_text));
                }
                s.push_str(&format!("page {} ({} of {} units)\n", units.page, units.items.len(), units.total));
                s
            })?;
        }
        ReviewCommand::Show { server, tu_id } => {
            let u = client(&server)?.get(&tu_id).await?;
            out.emit(&u, || {
                let mut s = format!("{} [{} {} {:.3}] {}\n", u.tu_id, u.bead, u.status, u.confidence, u.flags.join(","));
                if let Some(p) = &u.prev {
                    s.push_str(&format!("  prev {}: {} | {}\n", p.tu_id, p.src_text, p.tgt_text));
                }
                s.push_str(&format!("  src: {}\n  tgt: {}\n", u.src_text, u.tgt_text));
                if let Some(n) = &u.next {
                    s.push_str(&format!("  next {}: {} | {}\n", n.tu_id, n.src_text, n.tgt_text));
                }
                s
            })?;
        }
        ReviewCommand::Decide { server, tu_id, action, actor } => {
            let u = client(&server)?.decide(&tu_id, action.into(), &actor).await?;
            out.emit(&u, || format!("{} is now {}\n", u.tu_id, u.status))?;
        }
        ReviewCommand::Export { server, output } => {
            let text = client(&server)?.export().await?;
            std::fs::write(&output, text).with_context(|| format!("writing {}", output.display()))?;
            out.emit(&output, || format!("wrote {}\n", output.display()))?;
        }
        ReviewCommand::Stats { server } => {
            let stats = client(&server)?.stats().await?;
            out.emit(&stats, || stats.table())?;
        }
    }
    Ok(())
}

async fn run(cli: Cli) -> Result<()> {
    let out = Out { json: cli.json };
    match cli.command {
        Command::Crawl { manifest, output } => {
            let text = std::fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let mut m: CrawlManifest = toml::from_str(&text).with_context(|| format!("parsing {}", manifest.display()))?;
            if let Some(o) = output {
                m.output_dir = o;
            } else if m.output_dir.is_relative() {
                m.output_dir = manifest.parent().unwrap_or(Path::new(".")).join(&m.output_dir);
            }
            let outcome = crawler::crawl(&m).await?;
            let r = &outcome.report;
            out.emit(r, || {
                format!(
                    "fetched {} ({} bytes), skipped {}, failed {} into {}\n",
                    r.fetched,
                    r.bytes,
                    r.skipped,
                    r.failed,
                    m.output_dir.display()
                )
            })?;
        }
        Command::Prune { dir, keep, force, restore } => {
            if restore {
                let back = crawler::restore_pruned(&dir)?;
                out.emit(&back, || format!("restored {} files\n", back.len()))?;
            } else {
                let r = crawler::prune_noise(&dir, &keep, force)?;
                out.emit(&r, || format!("kept {}, quarantined {}\n", r.kept.len(), r.removed.len()))?;
            }
        }
        Command::Rename { dir, find, replace, regex, dry_run } => {
            let rule = if regex { RenameRule::regex(&find, &replace) } else { RenameRule::literal(&find, &replace) };
            let r = if dry_run {
                let (plan, collisions) = pairing::plan_rename(&dir, &rule)?;
                if !collisions.is_empty() {
                    bail!(pairing::PairingError::Collision(collisions));
                }
                plan
            } else {
                pairing::batch_rename(&dir, &rule)?
            };
            out.emit(&r, || r.renamed.iter().map(|(a, b)| format!("{a} -> {b}\n")).collect())?;
        }
        Command::Dedup { dir } => {
            let r = pairing::detect_duplicates(&dir)?;
            out.emit(&r, || {
                let mut s: String =
                    r.groups.iter().map(|g| format!("{} kept, removed {}\n", g.survivor, g.removed.join(", "))).collect();
                s.push_str(&format!("{} duplicates quarantined\n", r.removed_count()));
                s
            })?;
        }
        Command::Pair(a) => {
            let set = pairing::pair_documents(
                Side::new(&a.source_dir, &a.source_prefix, &a.source_lang),
                Side::new(&a.target_dir, &a.target_prefix, &a.target_lang),
            )?;
            if let Some(path) = &a.output {
                std::fs::write(path, serde_json::to_string_pretty(&set)?)?;
            }
            out.emit(&set, || {
                let mut s = format!("{} pairs\n", set.pairs.len());
                for p in set.unpaired_source.iter().chain(&set.unpaired_target) {
                    s.push_str(&format!("unpaired {}\n", p.display()));
                }
                s
            })?;
        }
        Command::Extract { project } => run_stage(&project, Stage::Extract, &out).await?,
        Command::Align { project } => run_stage(&project, Stage::Align, &out).await?,
        Command::Compile { project } => run_stage(&project, Stage::Compile, &out).await?,
        Command::Clean { input, output, checks } => {
            let tm = tmx::read_tmx(&input)?;
            let config = match checks {
                Some(list) => CleanConfig { checks: CleanConfig::parse_checks(&list)?, ..CleanConfig::default() },
                None => CleanConfig::default(),
            };
            let (cleaned, r) = tmx::clean(&tm, &config);
            tmx::write_tmx(&cleaned, &output)?;
            out.emit(&r, || {
                let mut s: String = r
                    .checks
                    .iter()
                    .map(|c| format!("{:>2} {:<20} modified {:>5} removed {:>5} flagged {:>5}\n", c.number, c.check.name(), c.modified, c.removed, c.flagged))
                    .collect();
                s.push_str(&format!("{} units in, {} out\n", r.input_units, r.output_units));
                s
            })?;
        }
        Command::Convert { input, stem } => {
            let tm = tmx::read_tmx(&input)?;
            let (src, tgt) = tmx::write_parallel_text(&tm, &stem)?;
            out.emit(&[&src, &tgt], || format!("wrote {} and {}\n", src.display(), tgt.display()))?;
        }
        Command::Stats { input } => {
            let stats = tmx::stats(&tmx::read_tmx(&input)?);
            out.emit(&stats, || stats.table())?;
        }
        Command::Run { project, from, to } => {
            let m = ProjectManifest::load(&project)?;
            let report = pipeline::run_stages(&m, from, to).await?;
            out.emit(&report, || pipeline_text(&report))?;
        }
        Command::Review(cmd) => review(cmd, &out).await?,
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("FORGE_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

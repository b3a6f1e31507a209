//! Translation memory model and the operations over it: compiling aligned
//! documents into units, TMX 1.4b input/output, cleaning, conversion to
//! line-aligned text and corpus statistics.

mod clean;
mod compile;
mod convert;
mod io;
mod stats;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::BeadKind;

pub use clean::{clean, CheckId, CheckReport, CleanConfig, CleaningReport};
pub use compile::{compile, tu_id, CompileReport, HeaderMeta, NEEDS_REVIEW};
pub use convert::{to_parallel_text, write_parallel_text, ParallelText};
pub use io::{canonicalize_tmx, read_tmx, read_tmx_str, write_tmx, write_tmx_string, ReadReport};
pub use stats::{stats, CorpusStats, Rate};

pub const CREATION_TOOL: &str = "forge";
pub const CREATION_TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum TmError {
    #[error("TMX parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid translation memory: {0}")]
    Invalid(String),
    #[error("alignment for {0:?} has no segmented document")]
    MissingDoc(String),
    #[error("unit {id} contains a line break; clean it before conversion")]
    LineBreak { id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    #[default]
    Auto,
    Confirmed,
    Edited,
    Rejected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Auto => "auto",
            Status::Confirmed => "confirmed",
            Status::Edited => "edited",
            Status::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = TmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Status::Auto),
            "confirmed" => Ok(Status::Confirmed),
            "edited" => Ok(Status::Edited),
            "rejected" => Ok(Status::Rejected),
            _ => Err(TmError::Invalid(format!("unknown status {s:?}"))),
        }
    }
}

/// Where a unit came from: the document pair and the alignment bead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub doc_key: String,
    pub bead: BeadKind,
    pub bead_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationUnit {
    pub id: String,
    pub src_text: String,
    pub tgt_text: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub provenance: Provenance,
    pub confidence: f64,
    pub status: Status,
    /// Warnings raised by cleaning checks that flag instead of removing.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TmHeader {
    pub srclang: String,
    /// Target language; kept as a header property so empty memories keep it.
    pub tgtlang: String,
    pub adminlang: String,
    pub segtype: String,
    pub datatype: String,
    pub creation_tool: String,
    pub creation_tool_version: String,
}

impl TmHeader {
    pub fn new(srclang: &str, tgtlang: &str) -> Self {
        TmHeader {
            srclang: srclang.into(),
            tgtlang: tgtlang.into(),
            adminlang: "en".into(),
            segtype: "sentence".into(),
            datatype: "plaintext".into(),
            creation_tool: CREATION_TOOL.into(),
            creation_tool_version: CREATION_TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmDocument {
    pub header: TmHeader,
    pub units: Vec<TranslationUnit>,
}

impl TmDocument {
    pub fn new(header: TmHeader) -> Self {
        TmDocument { header, units: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), TmError> {
        let mut ids = HashSet::new();
        for u in &self.units {
            if u.src_lang != self.header.srclang {
                return Err(TmError::Invalid(format!(
                    "unit {} has source language {:?}, header says {:?}",
                    u.id, u.src_lang, self.header.srclang
                )));
            }
            if u.src_lang == u.tgt_lang {
                return Err(TmError::Invalid(format!("unit {} has identical languages", u.id)));
            }
            if !ids.insert(u.id.as_str()) {
                return Err(TmError::Invalid(format!("duplicate unit id {}", u.id)));
            }
        }
        Ok(())
    }

    /// Units that are exported: everything except rejected ones.
    pub fn live_units(&self) -> impl Iterator<Item = &TranslationUnit> {
        self.units.iter().filter(|u| u.status != Status::Rejected)
    }

    pub fn unit(&self, id: &str) -> Option<&TranslationUnit> {
        self.units.iter().find(|u| u.id == id)
    }
}

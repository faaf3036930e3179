//! CSV file protocol for linking with an external viewer through a shared
//! folder. Every file is written by exactly one side; its role follows from
//! its name alone.

mod folder;
mod watch;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use folder::{discover_folders, SharedFolder, FOLDER_PREFIX};
pub use watch::{watch, EventKind, FolderEvent, FolderWatcher, DEBOUNCE, POLL_INTERVAL};

use crate::error::{Error, Result};
use crate::features::TableKind;

/// The two writers: the volume-side tool (this crate) and the graph UI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Amira,
    Coda,
}

/// Role of a protocol file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", content = "name", rename_all = "snake_case")]
pub enum FileRole {
    /// Named vertex feature table.
    VertexTable(String),
    /// Named edge feature table.
    EdgeTable(String),
    VertexColormap(Side),
    EdgeColormap(Side),
    VertexSelection,
    EdgeSelection,
}

impl FileRole {
    pub fn writer(&self) -> Side {
        match self {
            FileRole::VertexTable(_) | FileRole::EdgeTable(_) => Side::Amira,
            FileRole::VertexColormap(s) | FileRole::EdgeColormap(s) => *s,
            FileRole::VertexSelection | FileRole::EdgeSelection => Side::Coda,
        }
    }

    pub fn kind(&self) -> TableKind {
        match self {
            FileRole::VertexTable(_) | FileRole::VertexColormap(_) | FileRole::VertexSelection => TableKind::Vertex,
            FileRole::EdgeTable(_) | FileRole::EdgeColormap(_) | FileRole::EdgeSelection => TableKind::Edge,
        }
    }

    pub fn table(kind: TableKind, name: &str) -> Result<FileRole> {
        validate_name(name)?;
        Ok(match kind {
            TableKind::Vertex => FileRole::VertexTable(name.to_string()),
            TableKind::Edge => FileRole::EdgeTable(name.to_string()),
        })
    }

    pub fn colormap(kind: TableKind, side: Side) -> FileRole {
        match kind {
            TableKind::Vertex => FileRole::VertexColormap(side),
            TableKind::Edge => FileRole::EdgeColormap(side),
        }
    }

    pub fn selection(kind: TableKind) -> FileRole {
        match kind {
            TableKind::Vertex => FileRole::VertexSelection,
            TableKind::Edge => FileRole::EdgeSelection,
        }
    }

    pub fn file_name(&self) -> String {
        let kind = match self.kind() {
            TableKind::Vertex => "vertex",
            TableKind::Edge => "edge",
        };
        match self {
            FileRole::VertexTable(n) | FileRole::EdgeTable(n) => format!("amira_{kind}_{n}.csv"),
            FileRole::VertexColormap(s) | FileRole::EdgeColormap(s) => {
                format!("{}_{kind}_colormap.csv", side_prefix(*s))
            }
            FileRole::VertexSelection | FileRole::EdgeSelection => format!("coda_{kind}_selection.csv"),
        }
    }

    /// The role a file name denotes, if any.
    pub fn parse(file_name: &str) -> Option<FileRole> {
        let stem = file_name.strip_suffix(".csv")?;
        let (side, rest) = if let Some(r) = stem.strip_prefix("amira_") {
            (Side::Amira, r)
        } else {
            (Side::Coda, stem.strip_prefix("coda_")?)
        };
        let (kind, name) = if let Some(n) = rest.strip_prefix("vertex_") {
            (TableKind::Vertex, n)
        } else {
            (TableKind::Edge, rest.strip_prefix("edge_")?)
        };
        match (side, name) {
            (_, "colormap") => Some(FileRole::colormap(kind, side)),
            (Side::Coda, "selection") => Some(FileRole::selection(kind)),
            (Side::Coda, _) => None,
            (Side::Amira, n) => FileRole::table(kind, n).ok(),
        }
    }
}

fn side_prefix(side: Side) -> &'static str {
    match side {
        Side::Amira => "amira",
        Side::Coda => "coda",
    }
}

impl fmt::Display for FileRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file_name())
    }
}

/// Table names: non-empty ASCII letters, digits, `_` and `-`; `colormap` is
/// reserved.
pub fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::Protocol(format!("invalid table name {name:?}")));
    }
    if name == "colormap" {
        return Err(Error::Protocol("table name \"colormap\" is reserved".into()));
    }
    Ok(())
}

/// `#RRGGBB`.
pub fn format_color(rgb: [u8; 3]) -> String {
    format!("#{:02X}{:02X}{:02X}", rgb[0], rgb[1], rgb[2])
}

pub fn parse_color(text: &str) -> Result<[u8; 3]> {
    let hex = text
        .strip_prefix('#')
        .filter(|h| h.len() == 6 && h.chars().all(|c| c.is_ascii_hexdigit()))
        .ok_or_else(|| Error::Protocol(format!("bad color {text:?}")))?;
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("validated hex");
    Ok([byte(0), byte(2), byte(4)])
}

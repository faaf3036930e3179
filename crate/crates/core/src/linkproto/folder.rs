//! Shared folder: discovery, atomic publishing and parsing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{format_color, parse_color, FileRole, Side};
use crate::error::{Error, Result};
use crate::features::{Column, ColumnKind, FeatureTable, TableKind};

pub const FOLDER_PREFIX: &str = "amira_coda_";

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Folders named `amira_coda_*` directly under `root`, sorted by name.
pub fn discover_folders(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with(FOLDER_PREFIX) && entry.file_type()?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

/// A protocol folder as seen by one writer side.
#[derive(Debug, Clone)]
pub struct SharedFolder {
    path: PathBuf,
    side: Side,
}

impl SharedFolder {
    /// Creates `root/amira_coda_{random}`.
    pub fn create(root: &Path, side: Side) -> Result<Self> {
        let mut rng = rand::rng();
        loop {
            let n: u32 = rng.random();
            let path = root.join(format!("{FOLDER_PREFIX}{n}"));
            match fs::create_dir(&path) {
                Ok(()) => return Ok(Self { path, side }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn open(path: impl Into<PathBuf>, side: Side) -> Result<Self> {
        let path = path.into();
        if !path.is_dir() {
            return Err(Error::Protocol(format!("{} is not a directory", path.display())));
        }
        Ok(Self { path, side })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn file_path(&self, role: &FileRole) -> PathBuf {
        self.path.join(role.file_name())
    }

    /// Roles of the protocol files currently present, sorted.
    pub fn present_roles(&self) -> Result<Vec<FileRole>> {
        let mut roles = Vec::new();
        for entry in fs::read_dir(&self.path)? {
            if let Some(role) = FileRole::parse(&entry?.file_name().to_string_lossy()) {
                roles.push(role);
            }
        }
        roles.sort();
        Ok(roles)
    }

    fn check_writer(&self, role: &FileRole) -> Result<()> {
        if role.writer() != self.side {
            return Err(Error::Protocol(format!(
                "{} is written by {:?}, not {:?}",
                role.file_name(),
                role.writer(),
                self.side
            )));
        }
        Ok(())
    }

    /// Writes `bytes` to a hidden temporary file and renames it over the
    /// target, so readers see either the old or the new content.
    fn write_atomic(&self, role: &FileRole, bytes: &[u8]) -> Result<PathBuf> {
        self.check_writer(role)?;
        let target = self.file_path(role);
        let tmp = self.path.join(format!(
            ".{}.{}-{}.tmp",
            role.file_name(),
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &target)?;
        Ok(target)
    }

    pub fn publish(&self, role: &FileRole, table: &FeatureTable) -> Result<PathBuf> {
        if table.kind != role.kind() {
            return Err(Error::Protocol(format!(
                "{:?} table cannot be written as {}",
                table.kind,
                role.file_name()
            )));
        }
        self.write_atomic(role, table.to_csv_string().as_bytes())
    }

    /// `amira_{vertex|edge}_{name}.csv`.
    pub fn publish_table(&self, name: &str, table: &FeatureTable) -> Result<PathBuf> {
        self.publish(&FileRole::table(table.kind, name)?, table)
    }

    /// One row per vertex (edge), header `selected`, values 0/1.
    pub fn publish_selection(&self, kind: TableKind, selected: &[bool]) -> Result<PathBuf> {
        self.publish(&FileRole::selection(kind), &selection_table(kind, selected))
    }

    /// One row per vertex (edge), header `color`, values `#RRGGBB`.
    pub fn publish_colormap(&self, kind: TableKind, colors: &[[u8; 3]]) -> Result<PathBuf> {
        let mut t = FeatureTable::new(kind);
        t.push("color", Column::Str(colors.iter().map(|&c| Some(format_color(c))).collect()))?;
        self.publish(&FileRole::colormap(kind, self.side), &t)
    }

    pub fn read(&self, role: &FileRole) -> Result<FeatureTable> {
        let bytes = fs::read(self.file_path(role))?;
        let schema: Option<Vec<ColumnKind>> = match role {
            FileRole::VertexSelection | FileRole::EdgeSelection => Some(vec![ColumnKind::Int]),
            FileRole::VertexColormap(_) | FileRole::EdgeColormap(_) => Some(vec![ColumnKind::Str]),
            _ => None,
        };
        FeatureTable::read_csv(role.kind(), bytes.as_slice(), schema.as_deref())
    }

    pub fn read_table(&self, kind: TableKind, name: &str) -> Result<FeatureTable> {
        self.read(&FileRole::table(kind, name)?)
    }

    pub fn read_selection(&self, kind: TableKind) -> Result<Vec<bool>> {
        let t = self.read(&FileRole::selection(kind))?;
        let values = t
            .ints("selected")
            .ok_or_else(|| Error::Protocol("selection file lacks a `selected` column".into()))?;
        values
            .iter()
            .map(|v| match v {
                Some(0) => Ok(false),
                Some(1) => Ok(true),
                other => Err(Error::Protocol(format!("selection value {other:?} is not 0 or 1"))),
            })
            .collect()
    }

    pub fn read_colormap(&self, kind: TableKind, side: Side) -> Result<Vec<[u8; 3]>> {
        let t = self.read(&FileRole::colormap(kind, side))?;
        let values = t
            .strings("color")
            .ok_or_else(|| Error::Protocol("colormap file lacks a `color` column".into()))?;
        values
            .iter()
            .map(|v| parse_color(v.as_deref().unwrap_or("")))
            .collect()
    }
}

pub(crate) fn selection_table(kind: TableKind, selected: &[bool]) -> FeatureTable {
    let mut t = FeatureTable::new(kind);
    t.push("selected", Column::Int(selected.iter().map(|&s| Some(s as i64)).collect()))
        .expect("single column");
    t
}

//! Line-delimited JSON edit journal.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EditCommand, Outcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalEntry {
    Apply {
        seq: u64,
        command: EditCommand,
        outcome: Outcome,
    },
    Undo {
        seq: u64,
    },
}

pub fn write_journal(path: &Path, entries: &[JournalEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn append_journal(path: &Path, entry: &JournalEntry) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(entry)?;
    line.push(b'\n');
    f.write_all(&line)?;
    Ok(())
}

/// Reads a journal; a missing file is an empty journal.
pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidCommand(format!("journal line {}: {e}", i + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let entries = vec![
            JournalEntry::Apply {
                seq: 0,
                command: EditCommand::Merge { labels: vec![2, 5] },
                outcome: Outcome { created: vec![9] },
            },
            JournalEntry::Undo { seq: 1 },
        ];
        write_journal(&path, &entries[..1]).unwrap();
        append_journal(&path, &entries[1]).unwrap();
        assert_eq!(read_journal(&path).unwrap(), entries);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"op":"apply","seq":0,"command":{"kind":"merge","labels":[2,5]}"#));
        assert!(read_journal(&dir.path().join("none")).unwrap().is_empty());
    }
}

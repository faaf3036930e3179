//! Polling watcher for protocol files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};

use super::FileRole;
use crate::error::Result;

pub const POLL_INTERVAL: Duration = Duration::from_millis(10);
/// A change is reported once the file has been stable this long.
pub const DEBOUNCE: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Created,
    Modified,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolderEvent {
    pub file: String,
    pub role: FileRole,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Stamp {
    len: u64,
    modified: Option<SystemTime>,
    inode: u64,
}

fn stamp(meta: &fs::Metadata) -> Stamp {
    #[cfg(unix)]
    let inode = std::os::unix::fs::MetadataExt::ino(meta);
    #[cfg(not(unix))]
    let inode = 0;
    Stamp {
        len: meta.len(),
        modified: meta.modified().ok(),
        inode,
    }
}

fn scan(dir: &Path) -> BTreeMap<String, Stamp> {
    let mut out = BTreeMap::new();
    let Ok(entries) = fs::read_dir(dir) else { return out };
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if FileRole::parse(&name).is_none() {
            continue;
        }
        if let Ok(meta) = entry.metadata() {
            out.insert(name, stamp(&meta));
        }
    }
    out
}

/// Change not yet reported, folded over all raw changes since the last
/// report.
struct Pending {
    kind: Option<EventKind>,
    last_change: Instant,
}

fn fold(prev: Option<EventKind>, next: EventKind) -> Option<EventKind> {
    use EventKind::*;
    match (prev, next) {
        (None, k) => Some(k),
        (Some(Created), Modified) => Some(Created),
        (Some(Created), Removed) => None,
        (Some(Removed), Created) => Some(Modified),
        (Some(_), Removed) => Some(Removed),
        (Some(_), k) => Some(k),
    }
}

/// Stops the watcher thread when dropped.
pub struct FolderWatcher {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl FolderWatcher {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for FolderWatcher {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Calls `callback` on a background thread for every create, modify and
/// delete of a protocol file in `dir`, after the file has been stable for
/// [`DEBOUNCE`]. Files present at start are not reported.
pub fn watch<F>(dir: &Path, mut callback: F) -> Result<FolderWatcher>
where
    F: FnMut(FolderEvent) + Send + 'static,
{
    let dir: PathBuf = dir.to_path_buf();
    fs::read_dir(&dir)?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let mut known = scan(&dir);
    let handle = std::thread::Builder::new()
        .name("folder-watch".into())
        .spawn(move || {
            let mut pending: BTreeMap<String, Pending> = BTreeMap::new();
            while !flag.load(Ordering::Relaxed) {
                std::thread::sleep(POLL_INTERVAL);
                let now = Instant::now();
                let current = scan(&dir);
                let mut changes = Vec::new();
                for (name, s) in &current {
                    match known.get(name) {
                        None => changes.push((name.clone(), EventKind::Created)),
                        Some(old) if old != s => changes.push((name.clone(), EventKind::Modified)),
                        _ => {}
                    }
                }
                for name in known.keys() {
                    if !current.contains_key(name) {
                        changes.push((name.clone(), EventKind::Removed));
                    }
                }
                for (name, kind) in changes {
                    let p = pending.entry(name).or_insert(Pending {
                        kind: None,
                        last_change: now,
                    });
                    p.kind = fold(p.kind, kind);
                    p.last_change = now;
                }
                known = current;
                let ready: Vec<String> = pending
                    .iter()
                    .filter(|(_, p)| now.duration_since(p.last_change) >= DEBOUNCE)
                    .map(|(n, _)| n.clone())
                    .collect();
                for name in ready {
                    let p = pending.remove(&name).expect("ready entry");
                    if let (Some(kind), Some(role)) = (p.kind, FileRole::parse(&name)) {
                        callback(FolderEvent { file: name, role, kind });
                    }
                }
            }
        })?;
    Ok(FolderWatcher {
        stop,
        handle: Some(handle),
    })
}

//! One editing session: a single writer over the editor and immutable
//! per-revision snapshots for readers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use colonytree::edit::{
    append_journal, nearest_unseen, proofread_view, read_journal, EditCommand, EditState, Editor, ProofreadView,
};
use colonytree::features::{edge_features, vertex_features_from, FeatureTable, GeometryMap, TableKind};
use colonytree::graph::{
    budding_stats, generations, indegree_violations, shortest_cycle, BuddingStats, Cycle, Edge, ProofState,
    SkeletonGraph,
};
use colonytree::linkproto::{watch, FolderEvent, FolderWatcher, SharedFolder, Side};
use serde::Serialize;
use tokio::sync::watch as notify;

/// Name under which feature tables are published to the shared folder.
pub const TABLE_NAME: &str = "features";
const EVENT_CAPACITY: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("stale revision {base}, current is {current}")]
    Conflict { base: u64, current: u64 },
    #[error("{0}")]
    Rejected(String),
    #[error("no shared folder is configured")]
    NoSharedFolder,
    #[error(transparent)]
    Core(#[from] colonytree::Error),
}

#[derive(Debug, Clone, Default)]
pub struct SessionConfig {
    /// Existing `amira_coda_*` folder to publish into and watch.
    pub shared_folder: Option<PathBuf>,
    /// JSONL edit journal; replayed on open and appended on every edit.
    pub journal: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexView {
    pub id: u32,
    pub state: ProofState,
    pub generation: Option<usize>,
    pub component: usize,
    pub in_degree: usize,
    pub out_degree: usize,
    pub centroid: Option<[f64; 3]>,
    pub volume_mm3: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphView {
    pub revision: u64,
    pub vertices: Vec<VertexView>,
    pub edges: Vec<Edge>,
    pub component_count: usize,
    pub cyclic_components: Vec<usize>,
    pub budding: BuddingStats,
}

/// Everything readers see at one revision.
#[derive(Debug)]
pub struct Snapshot {
    pub revision: u64,
    pub graph: GraphView,
    pub vertices: FeatureTable,
    pub edges: FeatureTable,
    pub cycle: Option<Cycle>,
    pub indegree: Vec<u32>,
    views: BTreeMap<u32, ProofreadView>,
    skeleton: SkeletonGraph,
    geometry: GeometryMap,
}

impl Snapshot {
    fn build(revision: u64, state: &EditState) -> Self {
        let g = &state.graph;
        let gens = generations(g);
        let (mut indeg, mut outdeg) = (BTreeMap::<u32, usize>::new(), BTreeMap::<u32, usize>::new());
        for e in g.edges() {
            *outdeg.entry(e.source).or_default() += 1;
            *indeg.entry(e.target).or_default() += 1;
        }
        let spacing = state.volume.spacing();
        let vertices = g
            .vertices()
            .map(|v| VertexView {
                id: v.id,
                state: v.state,
                generation: gens.generation.get(&v.id).copied(),
                component: gens.component[&v.id],
                in_degree: indeg.get(&v.id).copied().unwrap_or(0),
                out_degree: outdeg.get(&v.id).copied().unwrap_or(0),
                centroid: state.geometry.get(&v.id).map(|x| x.centroid),
                volume_mm3: state.geometry.get(&v.id).map(|x| x.volume_mm3(spacing)),
            })
            .collect();
        let graph = GraphView {
            revision,
            vertices,
            edges: g.edges().cloned().collect(),
            component_count: gens.component.values().max().map_or(0, |c| c + 1),
            cyclic_components: gens.cyclic_components.iter().copied().collect(),
            budding: budding_stats(g),
        };
        Snapshot {
            revision,
            graph,
            vertices: vertex_features_from(&state.geometry, spacing, g, &state.fits),
            edges: edge_features(g, &state.fits),
            cycle: shortest_cycle(g),
            indegree: indegree_violations(g),
            views: g.vertex_ids().filter_map(|v| Some((v, proofread_view(state, v)?))).collect(),
            skeleton: g.clone(),
            geometry: state.geometry.clone(),
        }
    }

    pub fn table(&self, kind: TableKind) -> &FeatureTable {
        match kind {
            TableKind::Vertex => &self.vertices,
            TableKind::Edge => &self.edges,
        }
    }

    /// Unseen vertex nearest to the centroid of `from` (excluding `from`),
    /// or the lowest unseen vertex without `from`.
    pub fn proofread_next(&self, from: Option<u32>) -> Option<&ProofreadView> {
        let position = from.and_then(|v| self.geometry.get(&v)).map(|g| g.centroid);
        let exclude: BTreeSet<u32> = from.into_iter().collect();
        let next = nearest_unseen(&self.skeleton, &self.geometry, position, &exclude)?;
        self.views.get(&next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    Revision { revision: u64 },
    Folder { event: FolderEvent },
    /// Publishing the feature tables after an edit failed.
    PublishFailed { revision: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub id: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Bounded event history with a change signal for long polling.
#[derive(Debug)]
struct EventLog {
    events: Mutex<VecDeque<Event>>,
    last: notify::Sender<u64>,
}

impl EventLog {
    fn new() -> Self {
        Self {
            events: Mutex::new(VecDeque::new()),
            last: notify::Sender::new(0),
        }
    }

    fn push(&self, body: EventBody) {
        let mut events = self.events.lock().expect("event log lock");
        let id = events.back().map_or(1, |e| e.id + 1);
        events.push_back(Event { id, body });
        if events.len() > EVENT_CAPACITY {
            events.pop_front();
        }
        self.last.send_replace(id);
    }

    fn after(&self, after: u64) -> Vec<Event> {
        let events = self.events.lock().expect("event log lock");
        events.iter().filter(|e| e.id > after).cloned().collect()
    }

    fn last_id(&self) -> u64 {
        *self.last.borrow()
    }
}

struct Writer {
    editor: Editor,
    revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Receipt {
    pub revision: u64,
    pub created: Vec<u32>,
}

pub struct Session {
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
    events: Arc<EventLog>,
    amira: Option<SharedFolder>,
    coda: Option<SharedFolder>,
    journal: Option<PathBuf>,
    watcher: Mutex<Option<FolderWatcher>>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("revision", &self.revision())
            .field("shared_folder", &self.amira.as_ref().map(SharedFolder::path))
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Replays the configured journal onto `initial`, publishes the feature
    /// tables and starts watching the shared folder.
    pub fn open(initial: EditState, config: SessionConfig) -> Result<Self, SessionError> {
        let entries = match &config.journal {
            Some(path) => read_journal(path)?,
            None => Vec::new(),
        };
        let editor = Editor::replay(initial, &entries)?;
        let revision = entries.len() as u64;
        let snapshot = Arc::new(Snapshot::build(revision, editor.state()));
        let (amira, coda) = match &config.shared_folder {
            Some(path) => (
                Some(SharedFolder::open(path.clone(), Side::Amira)?),
                Some(SharedFolder::open(path.clone(), Side::Coda)?),
            ),
            None => (None, None),
        };
        let session = Session {
            writer: Mutex::new(Writer { editor, revision }),
            snapshot: RwLock::new(Arc::clone(&snapshot)),
            events: Arc::new(EventLog::new()),
            amira,
            coda,
            journal: config.journal,
            watcher: Mutex::new(None),
        };
        session.publish(&snapshot)?;
        if let Some(folder) = &session.amira {
            let events = Arc::clone(&session.events);
            let watcher = watch(folder.path(), move |event| events.push(EventBody::Folder { event }))?;
            *session.watcher.lock().expect("watcher lock") = Some(watcher);
        }
        Ok(session)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }

    pub fn revision(&self) -> u64 {
        self.snapshot().revision
    }

    pub fn shared_folder(&self) -> Option<&Path> {
        self.amira.as_ref().map(SharedFolder::path)
    }

    fn publish(&self, snapshot: &Snapshot) -> Result<(), SessionError> {
        if let Some(folder) = &self.amira {
            folder.publish_table(TABLE_NAME, &snapshot.vertices)?;
            folder.publish_table(TABLE_NAME, &snapshot.edges)?;
        }
        Ok(())
    }

    fn commit(&self, writer: &mut Writer) -> u64 {
        writer.revision += 1;
        let revision = writer.revision;
        if let (Some(path), Some(entry)) = (&self.journal, writer.editor.journal().last()) {
            if let Err(e) = append_journal(path, entry) {
                self.events.push(EventBody::PublishFailed {
                    revision,
                    reason: format!("journal: {e}"),
                });
            }
        }
        let snapshot = Arc::new(Snapshot::build(revision, writer.editor.state()));
        *self.snapshot.write().expect("snapshot lock") = Arc::clone(&snapshot);
        if let Err(e) = self.publish(&snapshot) {
            self.events.push(EventBody::PublishFailed {
                revision,
                reason: e.to_string(),
            });
        }
        self.events.push(EventBody::Revision { revision });
        revision
    }

    fn check_base(writer: &Writer, base: u64) -> Result<(), SessionError> {
        if base == writer.revision {
            Ok(())
        } else {
            Err(SessionError::Conflict {
                base,
                current: writer.revision,
            })
        }
    }

    /// Applies one command if `base_revision` is current.
    pub fn apply(&self, base_revision: u64, command: EditCommand) -> Result<Receipt, SessionError> {
        let mut writer = self.writer.lock().expect("writer lock");
        Self::check_base(&writer, base_revision)?;
        let outcome = writer
            .editor
            .apply(command)
            .map_err(|e| SessionError::Rejected(e.to_string()))?;
        let revision = self.commit(&mut writer);
        Ok(Receipt {
            revision,
            created: outcome.created,
        })
    }

    /// Reverts the latest command if `base_revision` is current.
    pub fn undo(&self, base_revision: u64) -> Result<Receipt, SessionError> {
        let mut writer = self.writer.lock().expect("writer lock");
        Self::check_base(&writer, base_revision)?;
        writer.editor.undo().map_err(|e| SessionError::Rejected(e.to_string()))?;
        let revision = self.commit(&mut writer);
        Ok(Receipt {
            revision,
            created: Vec::new(),
        })
    }

    /// Writes `coda_{kind}_selection.csv` with the given rows set to 1.
    pub fn select(&self, kind: TableKind, rows: &[usize]) -> Result<(u64, PathBuf), SessionError> {
        let folder = self.coda.as_ref().ok_or(SessionError::NoSharedFolder)?;
        let snapshot = self.snapshot();
        let n = snapshot.table(kind).row_count();
        let mut selected = vec![false; n];
        for &r in rows {
            if r >= n {
                return Err(SessionError::Rejected(format!("row {r} out of range for {n} rows")));
            }
            selected[r] = true;
        }
        let path = folder.publish_selection(kind, &selected)?;
        Ok((snapshot.revision, path))
    }

    /// Events after `after`, waiting up to `timeout` for the first one.
    pub async fn events(&self, after: u64, timeout: Duration) -> (Vec<Event>, u64) {
        let mut changes = self.events.last.subscribe();
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let found = self.events.after(after);
            if !found.is_empty() {
                return (found, self.events.last_id());
            }
            if tokio::time::timeout_at(deadline, changes.changed()).await.is_err() {
                return (Vec::new(), self.events.last_id());
            }
        }
    }

    /// The journal recorded so far.
    pub fn journal(&self) -> Vec<colonytree::edit::JournalEntry> {
        self.writer.lock().expect("writer lock").editor.journal().to_vec()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(w) = self.watcher.lock().ok().and_then(|mut w| w.take()) {
            w.stop();
        }
    }
}

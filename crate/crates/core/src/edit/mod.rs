//! Undoable edits that keep the label volume, the skeleton graph and the
//! per-instance fits consistent.

mod journal;
mod queue;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use journal::{append_journal, read_journal, write_journal, JournalEntry};
pub use queue::{nearest_unseen, proofread_view, ProofreadQueue, ProofreadView};

use crate::error::{Error, Result};
use crate::features::{GeometryMap, InstanceGeometry};
use crate::graph::{orient_edge, touching_pair, Edge, EdgeFlags, Fits, ProofState, SkeletonGraph};
use crate::linalg::Vec3;
use crate::parabola::Parabola;
use crate::pipeline::{build_tree, fit_instance};
use crate::volume::{voxels_by_label, LabelVolume, Mask};

/// A resolved edit. Edge commands name an unordered pair except
/// `AddEdge`, which creates `source → target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditCommand {
    Merge { labels: Vec<u32> },
    Cut { label: u32, point: [f64; 3], normal: [f64; 3] },
    AddEdge { source: u32, target: u32 },
    RemoveEdge { source: u32, target: u32 },
    FlipEdge { source: u32, target: u32 },
    MarkVertex { vertex: u32, state: ProofState },
    MarkEdge { source: u32, target: u32, state: ProofState },
}

/// Labels created by an applied command: the merged label, or the positive
/// and negative halves of a cut.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub created: Vec<u32>,
}

/// Volume, graph and fits kept in sync by the editor.
#[derive(Debug, Clone, PartialEq)]
pub struct EditState {
    pub volume: LabelVolume,
    /// Voxels used for fitting; instance voxels outside it only count for
    /// adjacency and features.
    pub calyx: Option<Mask>,
    pub graph: SkeletonGraph,
    pub fits: Fits,
    pub geometry: GeometryMap,
    voxels: BTreeMap<u32, Vec<usize>>,
}

impl EditState {
    /// Checks that graph vertices are exactly the volume labels.
    pub fn new(volume: LabelVolume, calyx: Option<Mask>, graph: SkeletonGraph, fits: Fits) -> Result<Self> {
        if let Some(mask) = &calyx {
            volume.check_same_geometry(mask)?;
        }
        let voxels = voxels_by_label(&volume);
        let labels: Vec<u32> = voxels.keys().copied().collect();
        let vertices: Vec<u32> = graph.vertex_ids().collect();
        if labels != vertices {
            let missing = labels
                .iter()
                .chain(&vertices)
                .find(|l| !(voxels.contains_key(l) && graph.contains_vertex(**l)))
                .copied()
                .unwrap_or(0);
            return Err(Error::UnknownLabel(missing));
        }
        let geometry = voxels
            .iter()
            .map(|(&l, v)| (l, InstanceGeometry::compute(&volume, v)))
            .collect();
        Ok(Self {
            volume,
            calyx,
            graph,
            fits,
            geometry,
            voxels,
        })
    }

    /// Runs the automatic tree estimation on `volume`.
    pub fn from_volume(volume: LabelVolume, calyx: Option<Mask>) -> Result<Self> {
        let tree = build_tree(&volume, calyx.as_ref());
        Self::new(volume, calyx, tree.graph, tree.fits)
    }

    pub fn voxels(&self, label: u32) -> Option<&[usize]> {
        self.voxels.get(&label).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.voxels.keys().copied()
    }

    fn require(&self, label: u32) -> Result<()> {
        if self.voxels.contains_key(&label) {
            Ok(())
        } else {
            Err(Error::UnknownLabel(label))
        }
    }

    /// Edge `source → target` with freshly computed touching points and
    /// heights, or `None` if either instance is empty.
    fn fresh_edge(&self, source: u32, target: u32) -> Option<Edge> {
        let c = touching_pair(&self.volume, source, target, self.voxels(source)?, self.voxels(target)?)?;
        let e = Edge {
            source,
            target,
            voxel_source: c.voxels[0],
            voxel_target: c.voxels[1],
            x_source: self.volume.position(c.voxels[0]),
            x_target: self.volume.position(c.voxels[1]),
            face_count: c.face_count,
            contact_area: c.area,
            h_source: None,
            h_target: None,
            confidence: None,
            state: ProofState::Unseen,
            manual: false,
            flags: EdgeFlags::default(),
        };
        Some(self.with_heights(e))
    }

    /// Recomputes heights and confidence keeping the direction.
    fn with_heights(&self, mut e: Edge) -> Edge {
        match (self.fits.get(&e.source), self.fits.get(&e.target)) {
            (Some(a), Some(b)) => {
                let ha = a.height(&Vec3(e.x_source));
                let hb = b.height(&Vec3(e.x_target));
                e.h_source = Some(ha);
                e.h_target = Some(hb);
                e.confidence = Some(ha - hb);
                e.flags.unoriented = false;
            }
            _ => {
                e.h_source = None;
                e.h_target = None;
                e.confidence = None;
                e.flags.unoriented = true;
            }
        }
        e
    }

    fn install_label(&mut self, label: u32, voxels: Vec<usize>) {
        let data = self.volume.data_mut();
        for &v in &voxels {
            data[v] = label;
        }
        let fit = fit_instance(&self.volume, self.calyx.as_ref(), &voxels);
        self.fits.insert(label, fit);
        self.voxels.insert(label, voxels);
        // geometry after all labels are written, since faces depend on neighbors
    }

    fn refresh_geometry(&mut self, label: u32) {
        if let Some(v) = self.voxels.get(&label) {
            self.geometry.insert(label, InstanceGeometry::compute(&self.volume, v));
        }
    }

    fn take_label(&mut self, label: u32, record: &mut UndoRecord) -> Vec<usize> {
        let voxels = self.voxels.remove(&label).unwrap_or_default();
        if let Some(fit) = self.fits.remove(&label) {
            record.fits.push((label, fit));
        }
        if let Some(g) = self.geometry.remove(&label) {
            record.geometry.push((label, g));
        }
        record.voxels.push((label, voxels.clone()));
        voxels
    }
}

/// What an undo needs to restore.
#[derive(Debug, Clone)]
struct UndoRecord {
    command: EditCommand,
    graph: SkeletonGraph,
    created: Vec<u32>,
    voxels: Vec<(u32, Vec<usize>)>,
    fits: Vec<(u32, Parabola<f64>)>,
    geometry: Vec<(u32, InstanceGeometry)>,
}

/// Single-writer edit transaction log over an [`EditState`].
#[derive(Debug, Clone)]
pub struct Editor {
    state: EditState,
    next_label: u32,
    next_seq: u64,
    undo: Vec<UndoRecord>,
    journal: Vec<JournalEntry>,
}

impl Editor {
    pub fn new(state: EditState) -> Self {
        let next_label = state.labels().max().map_or(1, |m| m + 1);
        Self {
            state,
            next_label,
            next_seq: 0,
            undo: Vec::new(),
            journal: Vec::new(),
        }
    }

    pub fn state(&self) -> &EditState {
        &self.state
    }

    pub fn into_state(self) -> EditState {
        self.state
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    /// Next label id a merge or cut will allocate.
    pub fn next_label(&self) -> u32 {
        self.next_label
    }

    pub fn can_undo(&self) -> bool {
        !self.undo.is_empty()
    }

    fn allocate(&mut self) -> u32 {
        let id = self.next_label;
        self.next_label += 1;
        id
    }

    /// Applies a command atomically: on error nothing changes.
    pub fn apply(&mut self, command: EditCommand) -> Result<Outcome> {
        let outcome = self.execute(&command)?;
        self.journal.push(JournalEntry::Apply {
            seq: self.next_seq,
            command,
            outcome: outcome.clone(),
        });
        self.next_seq += 1;
        Ok(outcome)
    }

    /// Reverts the most recent applied command that has not been undone.
    pub fn undo(&mut self) -> Result<EditCommand> {
        let record = self.undo.pop().ok_or(Error::NothingToUndo)?;
        let s = &mut self.state;
        for label in &record.created {
            s.voxels.remove(label);
            s.fits.remove(label);
            s.geometry.remove(label);
        }
        for (label, voxels) in record.voxels {
            let data = s.volume.data_mut();
            for &v in &voxels {
                data[v] = label;
            }
            s.voxels.insert(label, voxels);
        }
        s.fits.extend(record.fits);
        s.geometry.extend(record.geometry);
        s.graph = record.graph;
        self.journal.push(JournalEntry::Undo { seq: self.next_seq });
        self.next_seq += 1;
        Ok(record.command)
    }

    /// Rebuilds an editor by replaying `entries` on `initial`, checking that
    /// every command creates the recorded labels.
    pub fn replay(initial: EditState, entries: &[JournalEntry]) -> Result<Editor> {
        let mut editor = Editor::new(initial);
        for entry in entries {
            match entry {
                JournalEntry::Apply { command, outcome, .. } => {
                    let got = editor.apply(command.clone())?;
                    if &got != outcome {
                        return Err(Error::InvalidCommand(format!(
                            "journal diverged: {command:?} created {:?}, recorded {:?}",
                            got.created, outcome.created
                        )));
                    }
                }
                JournalEntry::Undo { .. } => {
                    editor.undo()?;
                }
            }
        }
        Ok(editor)
    }

    fn execute(&mut self, command: &EditCommand) -> Result<Outcome> {
        let mut record = UndoRecord {
            command: command.clone(),
            graph: self.state.graph.clone(),
            created: Vec::new(),
            voxels: Vec::new(),
            fits: Vec::new(),
            geometry: Vec::new(),
        };
        match command {
            EditCommand::Merge { labels } => self.merge(labels, &mut record)?,
            EditCommand::Cut { label, point, normal } => self.cut(*label, *point, *normal, &mut record)?,
            EditCommand::AddEdge { source, target } => self.add_edge(*source, *target)?,
            EditCommand::RemoveEdge { source, target } => {
                self.state
                    .graph
                    .remove_edge(*source, *target)
                    .ok_or(Error::EdgeMissing(*source, *target))?;
            }
            EditCommand::FlipEdge { source, target } => {
                let e = self
                    .state
                    .graph
                    .edge(*source, *target)
                    .ok_or(Error::EdgeMissing(*source, *target))?;
                let flipped = e.flipped();
                self.state.graph.replace_edge(flipped);
            }
            EditCommand::MarkVertex { vertex, state } => {
                self.state.graph.vertex_mut(*vertex).ok_or(Error::UnknownLabel(*vertex))?.state = *state;
            }
            EditCommand::MarkEdge { source, target, state } => {
                self.state
                    .graph
                    .edge_mut(*source, *target)
                    .ok_or(Error::EdgeMissing(*source, *target))?
                    .state = *state;
            }
        }
        let outcome = Outcome {
            created: record.created.clone(),
        };
        self.undo.push(record);
        Ok(outcome)
    }

    fn add_edge(&mut self, source: u32, target: u32) -> Result<()> {
        let s = &mut self.state;
        s.require(source)?;
        s.require(target)?;
        if source == target {
            return Err(Error::InvalidCommand(format!("self-loop on {source}")));
        }
        if s.graph.edge(source, target).is_some() {
            return Err(Error::EdgeExists(source, target));
        }
        let mut e = s.fresh_edge(source, target).ok_or(Error::UnknownLabel(source))?;
        e.manual = true;
        s.graph.insert_edge(e)
    }

    fn merge(&mut self, labels: &[u32], record: &mut UndoRecord) -> Result<()> {
        let set: BTreeSet<u32> = labels.iter().copied().collect();
        if set.len() < 2 {
            return Err(Error::InvalidCommand("merge needs at least two distinct labels".into()));
        }
        for &l in &set {
            self.state.require(l)?;
        }
        let new = self.allocate();
        record.created.push(new);
        let s = &mut self.state;

        let mut candidates: BTreeMap<u32, Vec<Edge>> = BTreeMap::new();
        let mut union = Vec::new();
        for &l in &set {
            for e in s.graph.remove_vertex(l) {
                let other = e.other(l);
                if !set.contains(&other) {
                    candidates.entry(other).or_default().push(e);
                }
            }
            union.extend(s.take_label(l, record));
        }
        union.sort_unstable();
        s.install_label(new, union);
        s.refresh_geometry(new);
        s.graph.add_vertex(new);

        for (neighbor, old) in candidates {
            let mut best: Option<Edge> = None;
            for e in old {
                let (src, tgt) = if set.contains(&e.source) { (new, neighbor) } else { (neighbor, new) };
                let Some(mut fresh) = s.fresh_edge(src, tgt) else { continue };
                fresh.manual = e.manual;
                let better = match &best {
                    None => true,
                    Some(b) => fresh.confidence.unwrap_or(f64::NEG_INFINITY) > b.confidence.unwrap_or(f64::NEG_INFINITY),
                };
                if better {
                    best = Some(fresh);
                }
            }
            if let Some(e) = best {
                s.graph.insert_edge(e)?;
                if let Some(v) = s.graph.vertex_mut(neighbor) {
                    v.state = ProofState::Unseen;
                }
            }
        }
        Ok(())
    }

    fn cut(&mut self, label: u32, point: [f64; 3], normal: [f64; 3], record: &mut UndoRecord) -> Result<()> {
        self.state.require(label)?;
        let n = Vec3(normal);
        if n.norm().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !n.norm().is_finite() {
            return Err(Error::InvalidCommand(format!("cut normal {normal:?} is not a direction")));
        }
        let n = n.normalized();
        let p = Vec3(point);
        let (positive, negative): (Vec<usize>, Vec<usize>) = self.state.voxels[&label]
            .iter()
            .partition(|&&v| n.dot(&(Vec3(self.state.volume.position(v)) - p)) >= 0.0);
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::EmptyCut(label));
        }
        let (pos, neg) = (self.allocate(), self.allocate());
        record.created.extend([pos, neg]);
        let s = &mut self.state;

        let incident = s.graph.remove_vertex(label);
        s.take_label(label, record);
        s.install_label(pos, positive);
        s.install_label(neg, negative);
        s.refresh_geometry(pos);
        s.refresh_geometry(neg);
        s.graph.add_vertex(pos);
        s.graph.add_vertex(neg);

        for old in incident {
            let neighbor = old.other(label);
            let was_source = old.source == label;
            let options: Vec<Edge> = [pos, neg]
                .iter()
                .filter_map(|&half| {
                    let (src, tgt) = if was_source { (half, neighbor) } else { (neighbor, half) };
                    s.fresh_edge(src, tgt)
                })
                .collect();
            let [a, b] = options.as_slice() else { continue };
            let (ma, mb) = (
                a.confidence.unwrap_or(f64::NEG_INFINITY),
                b.confidence.unwrap_or(f64::NEG_INFINITY),
            );
            let mut chosen = if ma > mb {
                a.clone()
            } else if mb > ma {
                b.clone()
            } else {
                let mut c = if b.length() < a.length() { b.clone() } else { a.clone() };
                c.flags.reattach_tie = true;
                c
            };
            chosen.manual = old.manual;
            s.graph.insert_edge(chosen)?;
        }
        if let Some(e) = s.fresh_edge(pos, neg) {
            let e = orient_edge(&e, &s.fits);
            s.graph.insert_edge(e)?;
        }
        Ok(())
    }
}

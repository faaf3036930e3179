//! `colonytree`: volume processing, tree estimation, editing and the HTTP
//! session service from the command line.
//!
//! Every subcommand prints a JSON summary on stdout. Failures print
//! `{"error": ..., "causes": [...]}` on stderr and exit nonzero.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use colonytree::edit::{append_journal, read_journal, EditCommand, EditState, Editor};
use colonytree::features::{edge_features, vertex_features, Column, FeatureTable, TableKind};
use colonytree::graph::SkeletonGraph;
use colonytree::linkproto::{SharedFolder, Side};
use colonytree::pipeline::{build_tree, fit_instances, remove_small_instances};
use colonytree::synth::{generate, ColonySpec};
use colonytree::volume::{
    euclidean_distance_transform, persistence_watershed, propagate_labels, read_header, read_volume,
    segment_instances, write_volume, LabelVolume, Mask, ScalarField,
};
use colonytree_service::{serve_on, Session, SessionConfig};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "colonytree", version, about = "Skeleton-tree estimation for dendroid colonies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Euclidean distance of every foreground voxel to the background.
    Edt {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Persistence watershed of a scalar field restricted to a mask.
    Watershed {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Merge threshold, mm.
        #[arg(long)]
        persistence: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grows seed labels onto a mask by nearest-seed assignment.
    Propagate {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Instance segmentation of a mask: distance transform plus watershed.
    Segment {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        persistence: f64,
        /// Drop instances smaller than this volume, mm³.
        #[arg(long, default_value_t = 0.0)]
        min_volume: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Oriented, pruned skeleton graph of a corallite label volume.
    Tree {
        #[command(flatten)]
        input: VolumeArgs,
        /// Writes `graph.json` and `edges.csv` here.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Vertex and edge feature tables.
    Features {
        #[command(flatten)]
        input: StateArgs,
        /// Writes `vertex_features.csv` and `edge_features.csv` here.
        #[arg(long)]
        out_dir: PathBuf,
        /// Also publish the tables into this shared folder.
        #[arg(long)]
        publish: Option<PathBuf>,
    },
    /// Synthetic colony with ground truth.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        generations: usize,
        #[arg(long, default_value_t = 0.0)]
        joint_probability: f64,
        /// Isotropic voxel size, mm.
        #[arg(long, default_value_t = 0.25)]
        spacing: f64,
    },
    /// HTTP session service.
    Serve {
        #[command(flatten)]
        input: StateArgs,
        #[arg(long, env = "COLONYTREE_JOURNAL")]
        journal: Option<PathBuf>,
        /// Existing shared folder to publish into.
        #[arg(long, conflicts_with = "shared_root")]
        shared_folder: Option<PathBuf>,
        /// Directory in which a new shared folder is created.
        #[arg(long, env = "COLONYTREE_SHARED_ROOT")]
        shared_root: Option<PathBuf>,
        #[arg(long, env = "COLONYTREE_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Applies one edit command (JSON) and appends it to the journal.
    Apply {
        #[command(flatten)]
        input: StateArgs,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        command: String,
    },
    /// Reverts the latest journaled command.
    Undo {
        #[command(flatten)]
        input: StateArgs,
        #[arg(long)]
        journal: PathBuf,
    },
    /// Replays a journal and writes the resulting volume and graph.
    Replay {
        #[command(flatten)]
        input: StateArgs,
        #[arg(long)]
        journal: PathBuf,
        /// Writes `labels.{json,raw}`, `graph.json` and `edges.csv` here.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct VolumeArgs {
    /// Corallite label volume.
    #[arg(long)]
    labels: PathBuf,
    /// Calyx voxels used for fitting (u8 mask or u32 labels).
    #[arg(long)]
    calyx: Option<PathBuf>,
}

#[derive(Args)]
struct StateArgs {
    #[command(flatten)]
    volume: VolumeArgs,
    /// Graph from `tree`; estimated from the labels when absent.
    #[arg(long)]
    graph: Option<PathBuf>,
}

fn read_mask(path: &Path) -> Result<Mask> {
    let header = read_header(path).with_context(|| format!("reading {}", path.display()))?;
    let mask = match header.dtype.as_str() {
        "u8" => read_volume::<u8>(path)?,
        "u32" => read_volume::<u32>(path)?.map(|l| u8::from(l != 0)),
        other => bail!("{}: expected a u8 or u32 volume, found {other}", path.display()),
    };
    Ok(mask)
}

fn read_labels(path: &Path) -> Result<LabelVolume> {
    read_volume::<u32>(path).with_context(|| format!("reading {}", path.display()))
}

impl VolumeArgs {
    fn load(&self) -> Result<(LabelVolume, Option<Mask>)> {
        let labels = read_labels(&self.labels)?;
        let calyx = self.calyx.as_deref().map(read_mask).transpose()?;
        Ok((labels, calyx))
    }
}

impl StateArgs {
    fn load(&self) -> Result<EditState> {
        let (labels, calyx) = self.volume.load()?;
        let state = match &self.graph {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let graph: SkeletonGraph =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let fits = fit_instances(&labels, calyx.as_ref());
                EditState::new(labels, calyx, graph, fits)?
            }
            None => EditState::from_volume(labels, calyx)?,
        };
        Ok(state)
    }
}

/// `source,target` rows sorted ascending.
fn edge_list(mut pairs: Vec<(u32, u32)>) -> FeatureTable {
    pairs.sort();
    let mut t = FeatureTable::new(TableKind::Edge);
    let column = |f: fn(&(u32, u32)) -> u32| Column::Int(pairs.iter().map(|p| Some(f(p) as i64)).collect());
    t.push("source", column(|p| p.0)).expect("same length");
    t.push("target", column(|p| p.1)).expect("same length");
    t
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_graph(dir: &Path, graph: &SkeletonGraph) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_text(&dir.join("graph.json"), &serde_json::to_string_pretty(graph)?)?;
    write_text(&dir.join("edges.csv"), &edge_list(graph.directed_pairs()).to_csv_string())
}

fn label_count(labels: &LabelVolume) -> usize {
    let mut seen: Vec<u32> = labels.data().iter().copied().filter(|&l| l != 0).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// The journal at `path` replayed onto `input`.
fn editor(input: &StateArgs, path: &Path) -> Result<Editor> {
    let entries = read_journal(path)?;
    Editor::replay(input.load()?, &entries).context("replaying the journal")
}

fn run(command: Command) -> Result<Value> {
    match command {
        Command::Edt { mask, out } => {
            let field = euclidean_distance_transform(&read_mask(&mask)?)?;
            write_volume(&out, &field)?;
            let max = field.data().iter().copied().fold(0.0f32, f32::max);
            Ok(json!({ "out": out, "max_distance": max }))
        }
        Command::Watershed {
            field,
            mask,
            persistence,
            out,
        } => {
            let field: ScalarField = read_volume(&field).with_context(|| format!("reading {}", field.display()))?;
            let labels = persistence_watershed(&field, &read_mask(&mask)?, persistence)?;
            write_volume(&out, &labels)?;
            Ok(json!({ "out": out, "labels": label_count(&labels) }))
        }
        Command::Propagate { seeds, mask, out } => {
            let p = propagate_labels(&read_labels(&seeds)?, &read_mask(&mask)?)?;
            write_volume(&out, &p.labels)?;
            Ok(json!({ "out": out, "labels": label_count(&p.labels), "unreached": p.unreached }))
        }
        Command::Segment {
            mask,
            persistence,
            min_volume,
            out,
        } => {
            let mut labels = segment_instances(&read_mask(&mask)?, persistence)?;
            let removed = remove_small_instances(&mut labels, min_volume);
            write_volume(&out, &labels)?;
            Ok(json!({ "out": out, "labels": label_count(&labels), "removed": removed }))
        }
        Command::Tree { input, out_dir } => {
            let (labels, calyx) = input.load()?;
            let tree = build_tree(&labels, calyx.as_ref());
            write_graph(&out_dir, &tree.graph)?;
            Ok(json!({
                "out_dir": out_dir,
                "vertices": tree.graph.vertex_count(),
                "rag_edges": tree.rag_edge_count,
                "edges": tree.graph.edge_count(),
                "pruned": tree.pruned.len(),
            }))
        }
        Command::Features {
            input,
            out_dir,
            publish,
        } => {
            let state = input.load()?;
            let vertices = vertex_features(&state.volume, &state.graph, &state.fits);
            let edges = edge_features(&state.graph, &state.fits);
            std::fs::create_dir_all(&out_dir)?;
            write_text(&out_dir.join("vertex_features.csv"), &vertices.to_csv_string())?;
            write_text(&out_dir.join("edge_features.csv"), &edges.to_csv_string())?;
            if let Some(folder) = &publish {
                let folder = SharedFolder::open(folder.clone(), Side::Amira)?;
                folder.publish_table(colonytree_service::TABLE_NAME, &vertices)?;
                folder.publish_table(colonytree_service::TABLE_NAME, &edges)?;
            }
            Ok(json!({ "out_dir": out_dir, "vertices": vertices.row_count(), "edges": edges.row_count() }))
        }
        Command::Synth {
            seed,
            out,
            generations,
            joint_probability,
            spacing,
        } => {
            let colony = generate(&ColonySpec {
                seed,
                generations,
                joint_probability,
                spacing: [spacing; 3],
                ..Default::default()
            })?;
            std::fs::create_dir_all(&out)?;
            write_volume(out.join("calyx"), &colony.calyx)?;
            write_volume(out.join("skeleton"), &colony.skeleton)?;
            write_text(&out.join("truth_edges.csv"), &edge_list(colony.edges.clone()).to_csv_string())?;
            write_text(&out.join("truth_joints.csv"), &edge_list(colony.joints.clone()).to_csv_string())?;
            write_text(&out.join("truth_corallites.csv"), &corallite_table(&colony).to_csv_string())?;
            Ok(json!({
                "out": out,
                "corallites": colony.axes.len(),
                "edges": colony.edges.len(),
                "joints": colony.joints.len(),
                "dims": colony.calyx.dims(),
            }))
        }
        Command::Serve {
            input,
            journal,
            shared_folder,
            shared_root,
            addr,
        } => {
            let shared_folder = match (shared_folder, shared_root) {
                (Some(f), _) => Some(f),
                (None, Some(root)) => Some(SharedFolder::create(&root, Side::Amira)?.path().to_path_buf()),
                (None, None) => None,
            };
            let config = SessionConfig {
                shared_folder: shared_folder.clone(),
                journal,
            };
            let session = Arc::new(Session::open(input.load()?, config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                let local = listener.local_addr()?;
                let ready = json!({ "listening": local.to_string(), "shared_folder": shared_folder, "revision": session.revision() });
                println!("{ready}");
                serve_on(session, listener).await?;
                Ok(json!({ "stopped": local.to_string() }))
            })
        }
        Command::Apply {
            input,
            journal,
            command,
        } => {
            let command: EditCommand = serde_json::from_str(&command).context("parsing the edit command")?;
            let mut editor = editor(&input, &journal)?;
            let outcome = editor.apply(command)?;
            let entry = editor.journal().last().expect("just applied");
            append_journal(&journal, entry)?;
            Ok(json!({ "revision": editor.journal().len(), "created": outcome.created }))
        }
        Command::Undo { input, journal } => {
            let mut editor = editor(&input, &journal)?;
            let undone = editor.undo()?;
            append_journal(&journal, editor.journal().last().expect("just undone"))?;
            Ok(json!({ "revision": editor.journal().len(), "undone": undone }))
        }
        Command::Replay {
            input,
            journal,
            out_dir,
        } => {
            let editor = editor(&input, &journal)?;
            let state = editor.state();
            write_graph(&out_dir, &state.graph)?;
            write_volume(out_dir.join("labels"), &state.volume)?;
            Ok(json!({
                "out_dir": out_dir,
                "revision": editor.journal().len(),
                "vertices": state.graph.vertex_count(),
                "edges": state.graph.edge_count(),
            }))
        }
    }
}

fn corallite_table(colony: &colonytree::synth::Colony) -> FeatureTable {
    let axes: Vec<_> = colony.axes.iter().collect();
    let mut t = FeatureTable::new(TableKind::Vertex);
    let mut add = |name: &str, c: Column| t.push(name, c).expect("same length");
    add("label", Column::Int(axes.iter().map(|(&l, _)| Some(l as i64)).collect()));
    add(
        "generation",
        Column::Int(axes.iter().map(|(l, _)| colony.generation.get(l).map(|&g| g as i64)).collect()),
    );
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        add(&format!("base_{axis}"), Column::Float(axes.iter().map(|(_, a)| Some(a.base[k])).collect()));
    }
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        add(
            &format!("direction_{axis}"),
            Column::Float(axes.iter().map(|(_, a)| Some(a.direction[k])).collect()),
        );
    }
    add("curvature", Column::Float(axes.iter().map(|(_, a)| Some(a.curvature)).collect()));
    add("length_mm", Column::Float(axes.iter().map(|(_, a)| Some(a.length)).collect()));
    add("radius_base_mm", Column::Float(axes.iter().map(|(_, a)| Some(a.radius_base)).collect()));
    add("radius_top_mm", Column::Float(axes.iter().map(|(_, a)| Some(a.radius_top)).collect()));
    t
}

fn report_error(kind: &str, message: String, causes: Vec<String>) {
    eprintln!("{}", json!({ "error": message, "kind": kind, "causes": causes }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let message = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            report_error("usage", message.to_string(), Vec::new());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error("failure", e.to_string(), e.chain().skip(1).map(|c| c.to_string()).collect());
            ExitCode::FAILURE
        }
    }
}

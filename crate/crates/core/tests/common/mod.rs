//! Independent reference implementations and generators shared by the
//! integration and acceptance tests. Everything here is deliberately naive.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use colonytree::graph::SkeletonGraph;
use colonytree::linalg::{axis_angle, Mat3, Vec3};
use colonytree::volume::edt::axis_term;
use colonytree::volume::{LabelVolume, Mask, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn coords(dims: [usize; 3], idx: usize) -> [usize; 3] {
    [idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])]
}

/// Random mask with the given foreground density.
pub fn random_mask(rng: &mut ChaCha8Rng, dims: [usize; 3], spacing: [f64; 3], density: f64) -> Mask {
    let n = dims[0] * dims[1] * dims[2];
    let data = (0..n).map(|_| u8::from(rng.random::<f64>() < density)).collect();
    Mask::from_vec(dims, spacing, data).unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> [usize; 3] {
    [rng.random_range(1..=max), rng.random_range(1..=max), rng.random_range(1..=max)]
}

pub fn random_spacing(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(0.2..3.0), rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)]
}

fn offset_sq(a: [usize; 3], b: [usize; 3], spacing: [f64; 3]) -> f64 {
    let t = |k: usize| axis_term::<f64>(a[k].abs_diff(b[k]), spacing[k]);
    // same association as the transform: z + (y + x)
    t(2) + (t(1) + t(0))
}

/// All-pairs squared distance to the nearest background voxel; `+∞` when
/// there is no background.
pub fn brute_squared_edt(mask: &Mask) -> Vec<f64> {
    let dims = mask.dims();
    let spacing = mask.spacing();
    let background: Vec<[usize; 3]> = (0..mask.len())
        .filter(|&i| mask.data()[i] == 0)
        .map(|i| coords(dims, i))
        .collect();
    (0..mask.len())
        .map(|i| {
            if mask.data()[i] == 0 {
                return 0.0;
            }
            let c = coords(dims, i);
            background
                .iter()
                .map(|&b| offset_sq(c, b, spacing))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// All-pairs nearest positive label, ties to the lowest label.
pub fn brute_nearest_label(labels: &LabelVolume) -> Vec<(f64, u32)> {
    let dims = labels.dims();
    let spacing = labels.spacing();
    let seeds: Vec<([usize; 3], u32)> = (0..labels.len())
        .filter(|&i| labels.data()[i] != 0)
        .map(|i| (coords(dims, i), labels.data()[i]))
        .collect();
    (0..labels.len())
        .map(|i| {
            let c = coords(dims, i);
            let mut best = (f64::INFINITY, 0u32);
            for &(s, l) in &seeds {
                let d = offset_sq(c, s, spacing);
                if d < best.0 || (d == best.0 && l < best.1) {
                    best = (d, l);
                }
            }
            best
        })
        .collect()
}

/// Contour sweep with explicit member lists: voxels in decreasing value
/// (ties by index); a voxel joins the basin of its earliest-swept
/// 26-neighbor; at a saddle every younger basin dies with persistence
/// `peak − value` and is absorbed by the eldest if that is below the
/// threshold or not positive. Labels follow peak order.
pub fn sweep_watershed(field: &ScalarField, mask: &Mask, threshold: f64) -> Vec<u32> {
    let dims = field.dims();
    let values = field.data();
    let mut order: Vec<usize> = (0..field.len()).filter(|&i| mask.data()[i] != 0).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));

    // basin id per voxel (the basin it was assigned at sweep time), and the
    // set of basin ids each surviving basin has absorbed
    let mut assigned: BTreeMap<usize, usize> = BTreeMap::new();
    let mut swept_at: BTreeMap<usize, usize> = BTreeMap::new();
    let mut peak: Vec<f64> = Vec::new();
    let mut alive_in: Vec<usize> = Vec::new();

    let adjacent = |a: [usize; 3], b: [usize; 3]| (0..3).all(|k| a[k].abs_diff(b[k]) <= 1) && a != b;

    for (pos, &v) in order.iter().enumerate() {
        let c = coords(dims, v);
        let neighbors: Vec<usize> = swept_at
            .keys()
            .copied()
            .filter(|&q| adjacent(c, coords(dims, q)))
            .collect();
        if neighbors.is_empty() {
            assigned.insert(v, peak.len());
            alive_in.push(peak.len());
            peak.push(values[v] as f64);
        } else {
            let steepest = *neighbors.iter().min_by_key(|&&q| swept_at[&q]).unwrap();
            assigned.insert(v, assigned[&steepest]);
            let mut groups: Vec<usize> = neighbors.iter().map(|q| alive_in[assigned[q]]).collect();
            groups.sort_unstable();
            groups.dedup();
            if groups.len() > 1 {
                // basin ids are created in peak order, so the smallest id is eldest
                let eldest = groups[0];
                for &g in &groups[1..] {
                    let persistence = peak[g] - values[v] as f64;
                    if persistence < threshold || persistence <= 0.0 {
                        for b in 0..alive_in.len() {
                            if alive_in[b] == g {
                                alive_in[b] = eldest;
                            }
                        }
                    }
                }
            }
        }
        swept_at.insert(v, pos);
    }

    let survivors: BTreeSet<usize> = alive_in.iter().copied().collect();
    let label: BTreeMap<usize, u32> = survivors.iter().enumerate().map(|(i, &b)| (b, i as u32 + 1)).collect();
    let mut out = vec![0u32; field.len()];
    for (&v, &b) in &assigned {
        out[v] = label[&alive_in[b]];
    }
    out
}

/// Canonical form of a labelling: labels renumbered by first occurrence.
pub fn canonical_partition(labels: &[u32]) -> Vec<u32> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == 0 {
                0
            } else {
                let next = map.len() as u32 + 1;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

/// Per face-adjacent label pair: shared faces per axis and the
/// lexicographically smallest `(center distance, voxel in lower label, voxel
/// in higher label)`.
pub fn brute_rag(volume: &LabelVolume) -> BTreeMap<(u32, u32), ([usize; 3], (f64, usize, usize))> {
    let dims = volume.dims();
    let spacing = volume.spacing();
    let data = volume.data();
    let mut out: BTreeMap<(u32, u32), ([usize; 3], (f64, usize, usize))> = BTreeMap::new();
    for a in 0..volume.len() {
        for b in (a + 1)..volume.len() {
            let (ca, cb) = (coords(dims, a), coords(dims, b));
            let diff: usize = (0..3).map(|k| ca[k].abs_diff(cb[k])).sum();
            if diff != 1 {
                continue;
            }
            let axis = (0..3).find(|&k| ca[k] != cb[k]).unwrap();
            let (la, lb) = (data[a], data[b]);
            if la == 0 || lb == 0 || la == lb {
                continue;
            }
            let cand = if la < lb { (spacing[axis], a, b) } else { (spacing[axis], b, a) };
            let entry = out.entry((la.min(lb), la.max(lb))).or_insert(([0; 3], cand));
            entry.0[axis] += 1;
            let best = entry.1;
            if cand.0 < best.0 || (cand.0 == best.0 && (cand.1, cand.2) < (best.1, best.2)) {
                entry.1 = cand;
            }
        }
    }
    out
}

/// Lexicographically smallest vertex sequence among the shortest simple
/// cycles of the undirected graph, found by enumerating all simple cycles.
pub fn brute_shortest_cycle(g: &SkeletonGraph) -> Option<Vec<u32>> {
    let adj = g.adjacency();
    let mut cycles: Vec<Vec<u32>> = Vec::new();
    fn extend(adj: &BTreeMap<u32, Vec<u32>>, path: &mut Vec<u32>, cycles: &mut Vec<Vec<u32>>) {
        let start = path[0];
        let last = *path.last().unwrap();
        for &n in &adj[&last] {
            if n == start && path.len() >= 3 {
                cycles.push(path.clone());
            } else if n > start && !path.contains(&n) {
                path.push(n);
                extend(adj, path, cycles);
                path.pop();
            }
        }
    }
    for &s in adj.keys() {
        extend(&adj, &mut vec![s], &mut cycles);
    }
    let len = cycles.iter().map(Vec::len).min()?;
    cycles.into_iter().filter(|c| c.len() == len).min()
}

/// Reachability by Floyd–Warshall over directed edges (reflexive).
pub fn transitive_closure(g: &SkeletonGraph) -> BTreeMap<u32, BTreeSet<u32>> {
    let ids: Vec<u32> = g.vertex_ids().collect();
    let n = ids.len();
    let pos: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for (s, t) in g.directed_pairs() {
        reach[pos[&s]][pos[&t]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    ids.iter()
        .enumerate()
        .map(|(i, &v)| (v, (0..n).filter(|&j| reach[i][j]).map(|j| ids[j]).collect()))
        .collect()
}

/// Random directed simple graph on vertices `1..=n`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: u32, edge_probability: f64) -> SkeletonGraph {
    use colonytree::graph::{Edge, EdgeFlags, ProofState};
    let mut g = SkeletonGraph::with_vertices(1..=n);
    for a in 1..=n {
        for b in (a + 1)..=n {
            if rng.random::<f64>() < edge_probability {
                let (s, t) = if rng.random::<bool>() { (a, b) } else { (b, a) };
                g.insert_edge(Edge {
                    source: s,
                    target: t,
                    voxel_source: 0,
                    voxel_target: 0,
                    x_source: [0.0; 3],
                    x_target: [0.0; 3],
                    face_count: 0,
                    contact_area: 0.0,
                    h_source: None,
                    h_target: None,
                    confidence: None,
                    state: ProofState::Unseen,
                    manual: false,
                    flags: EdgeFlags::default(),
                })
                .unwrap();
            }
        }
    }
    g
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3<f64> {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 { Vec3::new(0.0, 0.0, 1.0) } else { axis.normalized() };
    axis_angle(axis, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Ground-truth parabola sampled at parameters `ts`.
pub fn sample_parabola(alpha: f64, rotation: Mat3<f64>, anchor: Vec3<f64>, ts: &[f64]) -> Vec<Vec3<f64>> {
    ts.iter()
        .map(|&t| rotation.mul_vec(&Vec3::new(t, alpha * t * t, 0.0)) + anchor)
        .collect()
}

/// Distance from `x` to the sampled curve `(t, αt²)` in the frame, by dense
/// search plus ternary refinement.
pub fn curve_distance(alpha: f64, rotation: Mat3<f64>, anchor: Vec3<f64>, x: Vec3<f64>, range: (f64, f64)) -> f64 {
    let l = rotation.tr_mul_vec(&(x - anchor));
    let d2 = |t: f64| (t - l.x()).powi(2) + (alpha * t * t - l.y()).powi(2) + l.z().powi(2);
    let n = 4000;
    let (lo, hi) = range;
    let h = (hi - lo) / n as f64;
    let mut best = lo;
    for i in 0..=n {
        let t = lo + h * i as f64;
        if d2(t) < d2(best) {
            best = t;
        }
    }
    let (mut a, mut b) = (best - h, best + h);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if d2(m1) < d2(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    d2(0.5 * (a + b)).sqrt()
}

/// Voronoi partition of a small grid into `k` labels around random seeds,
/// with a sprinkle of background voxels.
pub fn voronoi_volume(rng: &mut ChaCha8Rng, dims: [usize; 3], k: usize) -> LabelVolume {
    let seeds: Vec<[f64; 3]> = (0..k)
        .map(|_| [0, 1, 2].map(|a| rng.random_range(0.0..dims[a] as f64)))
        .collect();
    let n = dims[0] * dims[1] * dims[2];
    let data = (0..n)
        .map(|i| {
            if rng.random::<f64>() < 0.05 {
                return 0;
            }
            let c = coords(dims, i).map(|v| v as f64);
            let mut best = (f64::INFINITY, 0u32);
            for (j, s) in seeds.iter().enumerate() {
                let d: f64 = (0..3).map(|a| (c[a] - s[a]).powi(2)).sum();
                if d < best.0 {
                    best = (d, j as u32 + 1);
                }
            }
            best.1
        })
        .collect();
    let spacing = [rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)];
    LabelVolume::from_vec(dims, spacing, data).unwrap()
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> Option<T> {
    (!items.is_empty()).then(|| items[rng.random_range(0..items.len())])
}

/// A random command against the current state; some are invalid on
/// purpose (unknown labels, missing edges, empty cuts).
pub fn random_command(rng: &mut ChaCha8Rng, state: &colonytree::edit::EditState) -> colonytree::edit::EditCommand {
    use colonytree::edit::EditCommand;
    use colonytree::graph::ProofState;
    let labels: Vec<u32> = state.labels().collect();
    let edges: Vec<(u32, u32)> = state.graph.directed_pairs();
    let any_label = |rng: &mut ChaCha8Rng| pick(rng, &labels).unwrap_or(1);
    let some_edge = |rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < 0.9 {
            pick(rng, &edges).unwrap_or((1, 2))
        } else {
            (rng.random_range(1..40), rng.random_range(1..40))
        }
    };
    let proof = |rng: &mut ChaCha8Rng| if rng.random() { ProofState::Good } else { ProofState::Unseen };
    match rng.random_range(0..8) {
        0 => {
            let count = rng.random_range(2..=3);
            EditCommand::Merge {
                labels: (0..count).map(|_| any_label(rng)).collect(),
            }
        }
        1 | 2 => {
            let label = any_label(rng);
            let point = state
                .voxels(label)
                .and_then(|v| pick(rng, v))
                .map(|v| state.volume.position(v))
                .unwrap_or([0.0; 3]);
            let normal = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
            EditCommand::Cut { label, point, normal }
        }
        3 => EditCommand::AddEdge {
            source: any_label(rng),
            target: any_label(rng),
        },
        4 => {
            let (source, target) = some_edge(rng);
            EditCommand::RemoveEdge { source, target }
        }
        5 => {
            let (source, target) = some_edge(rng);
            EditCommand::FlipEdge { source, target }
        }
        6 => EditCommand::MarkVertex {
            vertex: any_label(rng),
            state: proof(rng),
        },
        _ => {
            let (source, target) = some_edge(rng);
            EditCommand::MarkEdge {
                source,
                target,
                state: proof(rng),
            }
        }
    }
}

/// Everything observable about an edit state, serialized so that equality
/// is bit-level (floats print round-trip exactly).
pub fn state_fingerprint(state: &colonytree::edit::EditState) -> String {
    format!(
        "{}\n{}\n{}\n{:?}",
        serde_json::to_string(state.volume.data()).unwrap(),
        serde_json::to_string(&state.graph).unwrap(),
        serde_json::to_string(&state.fits).unwrap(),
        state.geometry,
    )
}

/// Graph vertices, editor labels and volume labels are the same set.
pub fn vertices_are_labels(state: &colonytree::edit::EditState) -> bool {
    let volume: BTreeSet<u32> = state.volume.data().iter().copied().filter(|&l| l != 0).collect();
    let vertices: BTreeSet<u32> = state.graph.vertex_ids().collect();
    let labels: BTreeSet<u32> = state.labels().collect();
    volume == vertices && vertices == labels
}

/// Indices of foreground voxels.
pub fn foreground(state: &colonytree::edit::EditState) -> Vec<usize> {
    (0..state.volume.len()).filter(|&i| state.volume.data()[i] != 0).collect()
}

/// Outcome of one randomized edit session.
pub struct EditRun {
    pub steps: usize,
    pub applied: usize,
    pub undone: usize,
    pub failures: Vec<String>,
}

/// Runs `steps` random commands (with occasional undos) and checks voxel
/// conservation, vertices ≡ labels, atomic failures, undo as exact inverse
/// and bit-identical journal replay, both in memory and through a file.
pub fn run_edit_session(seed: u64, steps: usize, journal_dir: &std::path::Path) -> EditRun {
    use colonytree::edit::{read_journal, write_journal, EditState, Editor};
    let mut rng = rng(seed);
    let k = rng.random_range(2..7);
    let volume = voronoi_volume(&mut rng, [8, 8, 8], k);
    let initial = EditState::from_volume(volume, None).unwrap();
    let fg = foreground(&initial);
    let mut editor = Editor::new(initial.clone());
    let mut history: Vec<String> = vec![state_fingerprint(&initial)];
    let mut run = EditRun {
        steps,
        applied: 0,
        undone: 0,
        failures: Vec::new(),
    };
    let mut fail = |msg: String| run.failures.push(format!("seed {seed}: {msg}"));

    for step in 0..steps {
        let before = state_fingerprint(editor.state());
        if editor.can_undo() && rng.random::<f64>() < 0.15 {
            editor.undo().unwrap();
            history.pop();
            run.undone += 1;
            if state_fingerprint(editor.state()) != *history.last().unwrap() {
                fail(format!("step {step}: undo did not restore the prior state"));
            }
        } else {
            let command = random_command(&mut rng, editor.state());
            match editor.apply(command.clone()) {
                Ok(_) => {
                    run.applied += 1;
                    history.push(state_fingerprint(editor.state()));
                }
                Err(_) => {
                    if state_fingerprint(editor.state()) != before {
                        fail(format!("step {step}: failed {command:?} changed the state"));
                    }
                }
            }
        }
        if foreground(editor.state()) != fg {
            fail(format!("step {step}: foreground voxels changed"));
        }
        if !vertices_are_labels(editor.state()) {
            fail(format!("step {step}: vertices differ from labels"));
        }
    }

    let replayed = Editor::replay(initial.clone(), editor.journal()).unwrap();
    if state_fingerprint(replayed.state()) != state_fingerprint(editor.state()) {
        fail("in-memory replay differs".into());
    }
    let path = journal_dir.join(format!("journal-{seed}.jsonl"));
    write_journal(&path, editor.journal()).unwrap();
    let entries = read_journal(&path).unwrap();
    let from_file = Editor::replay(initial, &entries).unwrap();
    if state_fingerprint(from_file.state()) != state_fingerprint(editor.state()) {
        fail("replay from the journal file differs".into());
    }
    // unwinding everything restores the initial state
    let mut unwind = editor.clone();
    while unwind.can_undo() {
        unwind.undo().unwrap();
    }
    if state_fingerprint(unwind.state()) != history[0] {
        fail("undoing every command does not restore the initial state".into());
    }
    run
}

/// Feature tables of a small synthetic colony.
pub fn colony_tables(seed: u64) -> (colonytree::features::FeatureTable, colonytree::features::FeatureTable) {
    use colonytree::features::{edge_features, vertex_features};
    use colonytree::pipeline::build_tree;
    use colonytree::synth::{generate, ColonySpec};
    use colonytree::volume::propagate_labels;
    let colony = generate(&ColonySpec {
        seed,
        generations: 3,
        ..Default::default()
    })
    .unwrap();
    let labels = propagate_labels(&colony.calyx, &colony.skeleton).unwrap().labels;
    let tree = build_tree(&labels, Some(&colony.calyx_mask()));
    (vertex_features(&labels, &tree.graph, &tree.fits), edge_features(&tree.graph, &tree.fits))
}

/// Writer republishes a table whose every row carries the version number
/// and whose row count depends on it; the reader checks each read is one
/// complete version. Returns `(writes, reads, torn reads)`.
pub fn torn_read_stress(duration: std::time::Duration) -> (usize, usize, usize) {
    use colonytree::features::{Column, FeatureTable, TableKind};
    use colonytree::linkproto::{SharedFolder, Side};
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::sync::Arc;

    let root = tempfile::tempdir().unwrap();
    let writer = SharedFolder::create(root.path(), Side::Amira).unwrap();
    let reader = SharedFolder::open(writer.path(), Side::Coda).unwrap();
    let table = |version: i64| {
        let rows = 50 + (version as usize * 37) % 400;
        let mut t = FeatureTable::new(TableKind::Vertex);
        t.push("version", Column::Int(vec![Some(version); rows])).unwrap();
        t.push("rows", Column::Int(vec![Some(rows as i64); rows])).unwrap();
        t.push("note", Column::Str(vec![Some(format!("v{version}, \"quoted\"")); rows])).unwrap();
        t
    };
    writer.publish_table("stress", &table(0)).unwrap();

    let done = Arc::new(AtomicBool::new(false));
    let stop = Arc::clone(&done);
    let handle = std::thread::spawn(move || {
        let mut version = 0;
        while !stop.load(Ordering::Relaxed) {
            version += 1;
            writer.publish_table("stress", &table(version)).unwrap();
        }
        version as usize
    });
    let start = std::time::Instant::now();
    let (mut reads, mut torn) = (0, 0);
    while start.elapsed() < duration {
        reads += 1;
        let ok = match reader.read_table(TableKind::Vertex, "stress") {
            Ok(t) => {
                let versions = t.ints("version").unwrap_or(&[]);
                let counts = t.ints("rows").unwrap_or(&[]);
                let v = versions.first().copied().flatten();
                let n = t.row_count();
                v.is_some()
                    && versions.iter().all(|&x| x == v)
                    && counts.iter().all(|&c| c == Some(n as i64))
                    && t.strings("note").is_some_and(|s| s.iter().all(|x| x.as_deref() == Some(&format!("v{}, \"quoted\"", v.unwrap())[..])))
            }
            Err(_) => false,
        };
        if !ok {
            torn += 1;
        }
    }
    done.store(true, Ordering::Relaxed);
    let writes = handle.join().unwrap();
    (writes, reads, torn)
}

/// Outcome of running the automatic tree estimation on a synthetic colony.
#[derive(Debug)]
pub struct Recovery {
    pub seed: u64,
    pub joints: usize,
    /// Every cycle met while removing cycles contained a true joint.
    pub cycles_explained: bool,
    /// Directed edges after removing joints equal the true tree.
    pub tree_exact: bool,
}

/// Generates a colony, estimates its tree, then repeatedly removes the
/// true-joint edges on the shortest cycle until the graph is acyclic.
pub fn recover_colony(seed: u64, generations: usize, joint_probability: f64) -> Recovery {
    use colonytree::graph::shortest_cycle;
    use colonytree::pipeline::build_tree;
    use colonytree::synth::{generate, ColonySpec};
    use colonytree::volume::propagate_labels;
    let colony = generate(&ColonySpec {
        seed,
        generations,
        joint_probability,
        ..Default::default()
    })
    .unwrap();
    let labels = propagate_labels(&colony.calyx, &colony.skeleton).unwrap().labels;
    let mut graph = build_tree(&labels, Some(&colony.calyx_mask())).graph;
    let mut cycles_explained = true;
    while let Some(cycle) = shortest_cycle(&graph) {
        let joints: Vec<(u32, u32)> = cycle
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| colony.joints.contains(&(a.min(b), a.max(b))))
            .collect();
        if joints.is_empty() {
            cycles_explained = false;
            break;
        }
        for (a, b) in joints {
            graph.remove_edge(a, b).unwrap();
        }
    }
    let mut got = graph.directed_pairs();
    got.sort();
    let mut want = colony.edges.clone();
    want.sort();
    Recovery {
        seed,
        joints: colony.joints.len(),
        cycles_explained,
        tree_exact: got == want,
    }
}

/// Publishes every file role from the side that owns it and reads each back
/// from the other side. Returns the roles present afterwards.
pub fn protocol_round_trip(root: &std::path::Path) -> Result<Vec<colonytree::linkproto::FileRole>, String> {
    use colonytree::features::TableKind;
    use colonytree::linkproto::{SharedFolder, Side};
    let amira = SharedFolder::create(root, Side::Amira).map_err(|e| e.to_string())?;
    let coda = SharedFolder::open(amira.path(), Side::Coda).map_err(|e| e.to_string())?;
    let (vertices, edges) = colony_tables(3);
    let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(format!("{what} differs after round trip")) };
    let e = |e: colonytree::Error| e.to_string();

    amira.publish_table("shape", &vertices).map_err(e)?;
    amira.publish_table("contacts", &edges).map_err(e)?;
    check(coda.read_table(TableKind::Vertex, "shape").map_err(e)? == vertices, "vertex table")?;
    check(coda.read_table(TableKind::Edge, "contacts").map_err(e)? == edges, "edge table")?;

    let vsel: Vec<bool> = (0..vertices.row_count()).map(|i| i % 3 == 0).collect();
    let esel: Vec<bool> = (0..edges.row_count()).map(|i| i % 2 == 1).collect();
    coda.publish_selection(TableKind::Vertex, &vsel).map_err(e)?;
    coda.publish_selection(TableKind::Edge, &esel).map_err(e)?;
    check(amira.read_selection(TableKind::Vertex).map_err(e)? == vsel, "vertex selection")?;
    check(amira.read_selection(TableKind::Edge).map_err(e)? == esel, "edge selection")?;

    let colors = |n: usize, k: u8| -> Vec<[u8; 3]> { (0..n).map(|i| [i as u8, k, 255 - i as u8]).collect() };
    for (writer, reader, side, k) in [(&amira, &coda, Side::Amira, 7u8), (&coda, &amira, Side::Coda, 200u8)] {
        for (kind, n) in [(TableKind::Vertex, vertices.row_count()), (TableKind::Edge, edges.row_count())] {
            writer.publish_colormap(kind, &colors(n, k)).map_err(e)?;
            check(reader.read_colormap(kind, side).map_err(e)? == colors(n, k), "colormap")?;
        }
    }
    amira.present_roles().map_err(e)
}

/// Time from an atomic rewrite of a selection file until the watcher of the
/// other side reports it; `None` if nothing arrives within two seconds.
pub fn watcher_latency(root: &std::path::Path, rewrites: usize) -> Vec<Option<std::time::Duration>> {
    use colonytree::features::TableKind;
    use colonytree::linkproto::{watch, SharedFolder, Side};
    use std::time::{Duration, Instant};
    let amira = SharedFolder::create(root, Side::Amira).unwrap();
    let coda = SharedFolder::open(amira.path(), Side::Coda).unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    let watcher = watch(amira.path(), move |_| {
        let _ = tx.send(Instant::now());
    })
    .unwrap();
    let mut out = Vec::new();
    for i in 0..rewrites {
        std::thread::sleep(Duration::from_millis(60));
        let start = Instant::now();
        coda.publish_selection(TableKind::Vertex, &[i % 2 == 0, true]).unwrap();
        out.push(rx.recv_timeout(Duration::from_secs(2)).ok().map(|at| at - start));
    }
    watcher.stop();
    out
}

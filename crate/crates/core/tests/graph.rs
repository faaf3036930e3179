mod common;

use std::collections::{BTreeMap, BTreeSet};

use colonytree::graph::{
    ancestors, budding_stats, build_rag, closest_voxel_pair, components, descendants, generations,
    indegree_violations, prune_sibling_edges, shortest_cycle, touching_pair, SkeletonGraph,
};
use colonytree::volume::{voxels_by_label, LabelVolume};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn random_labels(rng: &mut rand_chacha::ChaCha8Rng, max_dim: usize, labels: u32) -> LabelVolume {
    let dims = random_dims(rng, max_dim);
    let spacing = random_spacing(rng);
    let n = dims.iter().product::<usize>();
    let data = (0..n)
        .map(|_| if rng.random::<f64>() < 0.2 { 0 } else { rng.random_range(1..=labels) })
        .collect();
    LabelVolume::from_vec(dims, spacing, data).unwrap()
}

#[test]
fn rag_matches_pairwise_face_scan() {
    let mut rng = rng(31);
    for _ in 0..40 {
        let volume = random_labels(&mut rng, 8, 6);
        let g = build_rag(&volume);
        let oracle = brute_rag(&volume);
        let got: BTreeSet<(u32, u32)> = g.edges().map(|e| e.key()).collect();
        assert_eq!(got, oracle.keys().copied().collect());
        let s = volume.spacing();
        let areas = [s[1] * s[2], s[0] * s[2], s[0] * s[1]];
        for e in g.edges() {
            let (faces, best) = oracle[&e.key()];
            assert_eq!(e.face_count, faces.iter().sum::<usize>());
            let area: f64 = (0..3).map(|k| faces[k] as f64 * areas[k]).sum();
            assert!((e.contact_area - area).abs() < 1e-12);
            assert_eq!((e.voxel_source, e.voxel_target), (best.1, best.2));
        }
        let labels: BTreeSet<u32> = volume.data().iter().copied().filter(|&l| l != 0).collect();
        assert_eq!(g.vertex_ids().collect::<BTreeSet<_>>(), labels);
    }
}

#[test]
fn touching_pair_agrees_with_rag() {
    let mut rng = rng(32);
    for _ in 0..20 {
        let volume = random_labels(&mut rng, 7, 4);
        let g = build_rag(&volume);
        let by = voxels_by_label(&volume);
        for e in g.edges() {
            let c = touching_pair(&volume, e.target, e.source, &by[&e.target], &by[&e.source]).unwrap();
            assert_eq!(c.voxels, [e.voxel_target, e.voxel_source]);
            assert_eq!(c.face_count, e.face_count);
        }
    }
}

#[test]
fn closest_pair_is_the_global_minimum() {
    let mut rng = rng(33);
    for _ in 0..30 {
        let volume = random_labels(&mut rng, 7, 3);
        let by = voxels_by_label(&volume);
        let (Some(a), Some(b)) = (by.get(&1), by.get(&2)) else { continue };
        let [va, vb] = closest_voxel_pair(&volume, a, b).unwrap();
        let s = volume.spacing();
        let d2 = |p: usize, q: usize| {
            let (cp, cq) = (volume.coords(p), volume.coords(q));
            (0..3).map(|k| ((cp[k] as f64 - cq[k] as f64) * s[k]).powi(2)).sum::<f64>()
        };
        let best = a
            .iter()
            .flat_map(|&p| b.iter().map(move |&q| (p, q)))
            .map(|(p, q)| d2(p, q))
            .fold(f64::INFINITY, f64::min);
        assert!((d2(va, vb) - best).abs() < 1e-9);
    }
}

#[test]
fn shortest_cycle_matches_enumeration() {
    let mut rng = rng(34);
    for _ in 0..300 {
        let n = rng.random_range(1..=10);
        let p = rng.random_range(0.05..0.5);
        let g = random_graph(&mut rng, n, p);
        let got = shortest_cycle(&g);
        let want = brute_shortest_cycle(&g);
        assert_eq!(got.as_ref().map(|c| c.vertices.clone()), want);
        if let Some(c) = got {
            // consecutive vertices are joined by the listed edges
            for (i, &(s, t)) in c.edges.iter().enumerate() {
                let (a, b) = (c.vertices[i], c.vertices[(i + 1) % c.vertices.len()]);
                assert_eq!((s.min(t), s.max(t)), (a.min(b), a.max(b)));
                assert!(g.has_directed_edge(s, t));
            }
        }
    }
}

#[test]
fn reachability_matches_transitive_closure() {
    let mut rng = rng(35);
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let p = rng.random_range(0.05..0.4);
        let g = random_graph(&mut rng, n, p);
        let closure = transitive_closure(&g);
        for v in g.vertex_ids() {
            assert_eq!(descendants(&g, v), closure[&v]);
            let up: BTreeSet<u32> = closure.iter().filter(|(_, r)| r.contains(&v)).map(|(&u, _)| u).collect();
            assert_eq!(ancestors(&g, v), up);
        }
    }
}

/// Longest path from a source, or `None` in components with a directed cycle.
fn brute_generations(g: &SkeletonGraph) -> BTreeMap<u32, Option<usize>> {
    let closure = transitive_closure(g);
    let comp = components(g);
    let cyclic: BTreeSet<usize> = g
        .vertex_ids()
        .filter(|&v| closure[&v].iter().any(|&w| w != v && closure[&w].contains(&v)))
        .map(|v| comp[&v])
        .collect();
    let preds = g.predecessors();
    fn depth(v: u32, preds: &BTreeMap<u32, Vec<u32>>) -> usize {
        preds[&v].iter().map(|&p| depth(p, preds) + 1).max().unwrap_or(0)
    }
    g.vertex_ids()
        .map(|v| (v, (!cyclic.contains(&comp[&v])).then(|| depth(v, &preds))))
        .collect()
}

#[test]
fn generations_are_longest_paths() {
    let mut rng = rng(36);
    for _ in 0..150 {
        let n = rng.random_range(1..=10);
        let p = rng.random_range(0.05..0.35);
        let g = random_graph(&mut rng, n, p);
        let gens = generations(&g);
        for (v, want) in brute_generations(&g) {
            assert_eq!(gens.generation.get(&v).copied(), want, "vertex {v}");
        }
    }
}

#[test]
fn components_are_undirected_reachability_classes() {
    let mut rng = rng(37);
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let p = rng.random_range(0.02..0.3);
        let g = random_graph(&mut rng, n, p);
        let comp = components(&g);
        // same component iff connected ignoring directions
        let sym = |g: &SkeletonGraph| {
            let c = transitive_closure(g);
            let mut out: BTreeMap<u32, BTreeSet<u32>> = c.clone();
            for (&u, r) in &c {
                for &w in r {
                    out.get_mut(&w).unwrap().insert(u);
                }
            }
            out
        };
        // iterate the symmetric closure to a fixed point
        let mut reach = sym(&g);
        loop {
            let mut next = reach.clone();
            for (u, r) in &reach {
                for w in r {
                    let more = reach[w].clone();
                    next.get_mut(u).unwrap().extend(more);
                }
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        for u in g.vertex_ids() {
            for w in g.vertex_ids() {
                assert_eq!(comp[&u] == comp[&w], reach[&u].contains(&w));
            }
        }
        // numbered by smallest vertex
        let mut firsts: Vec<(usize, u32)> = Vec::new();
        for (&v, &c) in &comp {
            if !firsts.iter().any(|&(k, _)| k == c) {
                firsts.push((c, v));
            }
        }
        assert!(firsts.iter().enumerate().all(|(i, &(c, _))| c == i));
    }
}

#[test]
fn indegree_hint_lists_multi_parent_vertices() {
    let mut rng = rng(38);
    for _ in 0..50 {
        let g = random_graph(&mut rng, 9, 0.3);
        let want: Vec<u32> = g.vertex_ids().filter(|&v| g.in_degree(v) >= 2).collect();
        assert_eq!(indegree_violations(&g), want);
    }
}

#[test]
fn budding_statistics_of_a_small_tree() {
    // out-degrees: 1→{2,3,4}, 2→{5}, others 0 → sorted [0,0,0,0,1,3]
    let g = random_graph(&mut rng(0), 0, 0.0);
    assert_eq!(budding_stats(&g).max, 0);
    let mut g = SkeletonGraph::with_vertices(1..=6);
    for (s, t) in [(1, 2), (1, 3), (1, 4), (2, 5)] {
        let mut e = random_graph(&mut rng(0), 2, 1.0).edges().next().unwrap().clone();
        e.source = s;
        e.target = t;
        g.insert_edge(e).unwrap();
    }
    let stats = budding_stats(&g);
    assert_eq!(stats.median, 0.0);
    // position 0.75·5 = 3.75 between order statistics 0 and 1
    assert!((stats.q75 - 0.75).abs() < 1e-12);
    assert_eq!(stats.max, 3);
}

#[test]
fn graph_json_round_trip() {
    let g = random_graph(&mut rng(39), 8, 0.4);
    let text = serde_json::to_string(&g).unwrap();
    let back: SkeletonGraph = serde_json::from_str(&text).unwrap();
    assert_eq!(back, g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pruning_leaves_no_adjacent_siblings(seed in 0u64..10_000, n in 2u32..12, p in 0.1f64..0.6) {
        let mut g = random_graph(&mut rng(seed), n, p);
        let before = g.edge_count();
        let removed = prune_sibling_edges(&mut g);
        prop_assert_eq!(g.edge_count() + removed.len(), before);
        for v in g.vertex_ids() {
            let daughters: Vec<u32> = g.successors()[&v].clone();
            for (i, &a) in daughters.iter().enumerate() {
                for &b in &daughters[i + 1..] {
                    prop_assert!(g.edge(a, b).is_none());
                }
            }
        }
    }

    #[test]
    fn descendants_contain_their_successors(seed in 0u64..10_000, n in 1u32..12) {
        let g = random_graph(&mut rng(seed), n, 0.3);
        for v in g.vertex_ids() {
            let d = descendants(&g, v);
            prop_assert!(d.contains(&v));
            for w in &d {
                for s in &g.successors()[w] {
                    prop_assert!(d.contains(s));
                }
            }
        }
    }
}

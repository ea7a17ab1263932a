mod common;

use common::{edge_scan_cuts, rand_vec, random_tree, sort_cuts};
use proptest::prelude::*;
use prunekit::rng;
use prunekit::treemodel::{
    build_collision_primitives, crop_and_cluster, generate_cuts, parse_skeleton, read_cloud,
    skeleton_to_string, synth_tree, transfer_labels, write_cloud_csv, write_cloud_ply, Aabb,
    SynthParams, Vertex,
};
use prunekit::{Label, LabeledPointCloud, TreeGraph, Vec3};
use rand::Rng;

fn labels_of(g: &TreeGraph) -> Vec<Label> {
    (0..g.vertices().len()).map(|v| g.label(v)).collect()
}

fn brute_nearest(points: &[Vec3], q: &Vec3) -> usize {
    // first strict minimum, so ties go to the lowest index
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cuts_match_edge_scan(seed in any::<u64>(), n in 1usize..120, p in 0.0f64..1.0) {
        let mut r = rng::stream(seed, &[]);
        let g = random_tree(&mut r, n, p);
        let mut got = generate_cuts(&g).cuts;
        sort_cuts(&mut got);
        prop_assert_eq!(got, edge_scan_cuts(&g));
    }

    #[test]
    fn regrowth_edges_are_remove_to_keep(seed in any::<u64>(), n in 1usize..80) {
        let mut r = rng::stream(seed, &[]);
        let g = random_tree(&mut r, n, 0.5);
        let mut got = generate_cuts(&g).regrowth_edges;
        got.sort();
        let mut want: Vec<_> = g.edges().iter().copied()
            .filter(|&(a, b)| g.label(a) == Label::Remove && g.label(b) == Label::Keep)
            .collect();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn cut_count_bounded_by_removed_vertices(seed in any::<u64>(), n in 1usize..80) {
        let mut r = rng::stream(seed, &[]);
        let g = random_tree(&mut r, n, 0.4);
        let removed = labels_of(&g).iter().filter(|l| **l == Label::Remove).count();
        prop_assert!(generate_cuts(&g).cuts.len() <= removed);
    }

    #[test]
    fn transfer_matches_brute_force(seed in any::<u64>(), n in 1usize..60, m in 1usize..300) {
        let mut r = rng::stream(seed, &[]);
        let g = random_tree(&mut r, n, 0.3);
        // coarse grid coordinates make exact ties common
        let points: Vec<Vec3> = (0..m)
            .map(|_| Vec3::new(r.gen_range(-4..=4) as f64 * 0.25, r.gen_range(-4..=4) as f64 * 0.25, r.gen_range(-4..=4) as f64 * 0.25))
            .collect();
        let labels: Vec<Label> = (0..m).map(|_| if r.gen_bool(0.5) { Label::Remove } else { Label::Keep }).collect();
        let cloud = LabeledPointCloud::new(points.clone(), labels.clone()).unwrap();
        let out = transfer_labels(&cloud, &g).unwrap();
        for (v, vert) in g.vertices().iter().enumerate() {
            prop_assert_eq!(out.label(v), labels[brute_nearest(&points, &vert.position)]);
            prop_assert_eq!(out.vertices()[v].position, vert.position);
        }
        prop_assert_eq!(out.edges(), g.edges());
    }

    #[test]
    fn one_capsule_per_edge(seed in any::<u64>(), n in 1usize..80) {
        let mut r = rng::stream(seed, &[]);
        let g = random_tree(&mut r, n, 0.3);
        let set = build_collision_primitives(&g);
        prop_assert_eq!(set.len(), g.edges().len());
        for (cap, &e) in set.capsules.iter().zip(&set.edge_index) {
            let (p, c) = g.edges()[e];
            let (vp, vc) = (&g.vertices()[p], &g.vertices()[c]);
            prop_assert_eq!(cap.a, vp.position);
            prop_assert_eq!(cap.b, vc.position);
            prop_assert_eq!(cap.radius, vp.radius.max(vc.radius));
        }
    }

    #[test]
    fn skeleton_text_round_trip(seed in any::<u64>(), n in 1usize..60) {
        let mut r = rng::stream(seed, &[]);
        let g = random_tree(&mut r, n, 0.3);
        let back = parse_skeleton(&skeleton_to_string(&g), "memory").unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn crop_and_cluster_matches_union_find(seed in any::<u64>(), m in 1usize..150, radius in 0.05f64..0.4) {
        let mut r = rng::stream(seed, &[]);
        let points: Vec<Vec3> = (0..m).map(|_| rand_vec(&mut r, 1.0)).collect();
        let labels: Vec<Label> = (0..m).map(|i| if i % 3 == 0 { Label::Remove } else { Label::Keep }).collect();
        let cloud = LabeledPointCloud::new(points.clone(), labels.clone()).unwrap();
        let bounds = Aabb::new(Vec3::repeat(-0.7), Vec3::repeat(0.7));
        let inside: Vec<usize> = (0..m).filter(|&i| bounds.contains(&points[i])).collect();
        let got = crop_and_cluster(&cloud, &bounds, radius);
        if inside.is_empty() {
            prop_assert!(got.is_err());
            return Ok(());
        }
        let got = got.unwrap();
        // union-find over all O(n^2) pairs
        let mut parent: Vec<usize> = (0..inside.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x { p[x] = p[p[x]]; x = p[x]; }
            x
        }
        for a in 0..inside.len() {
            for b in a + 1..inside.len() {
                if (points[inside[a]] - points[inside[b]]).norm() <= radius {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb { parent[ra.max(rb)] = ra.min(rb); }
                }
            }
        }
        let roots: Vec<usize> = (0..inside.len()).map(|k| find(&mut parent, k)).collect();
        let size = |root: usize| roots.iter().filter(|&&x| x == root).count();
        // largest cluster, ties to the one containing the lowest index
        let mut best = roots[0];
        for &root in &roots {
            if size(root) > size(best) { best = root; }
        }
        let keep: Vec<usize> = (0..inside.len()).filter(|&k| roots[k] == best).map(|k| inside[k]).collect();
        let want_points: Vec<Vec3> = keep.iter().map(|&i| points[i]).collect();
        let want_labels: Vec<Label> = keep.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(got.points(), want_points.as_slice());
        prop_assert_eq!(got.labels(), want_labels.as_slice());
    }
}

#[test]
fn transfer_then_cut_on_a_chain() {
    // 0 - 1 - 2 - 3 along z; cloud marks the top half for removal
    let vs: Vec<Vertex> = (0..4)
        .map(|i| Vertex::new(Vec3::new(0.0, 0.0, i as f64 * 0.1), 0.01, Label::Keep))
        .collect();
    let g = TreeGraph::new(vs, vec![(0, 1), (1, 2), (2, 3)], 0).unwrap();
    let pts: Vec<Vec3> = (0..40)
        .map(|i| Vec3::new(0.001, 0.0, i as f64 * 0.0075))
        .collect();
    let labels: Vec<Label> = pts
        .iter()
        .map(|p| {
            if p.z > 0.15 {
                Label::Remove
            } else {
                Label::Keep
            }
        })
        .collect();
    let g = transfer_labels(&LabeledPointCloud::new(pts, labels).unwrap(), &g).unwrap();
    let report = generate_cuts(&g);
    assert_eq!(report.cuts.len(), 1);
    let c = report.cuts[0];
    assert_eq!((c.parent, c.vertex), (Some(1), Some(2)));
    assert!((c.direction - Vec3::new(0.0, 0.0, 0.1)).norm() < 1e-12);
    assert!(report.regrowth_edges.is_empty());
}

#[test]
fn cloud_files_round_trip() {
    let (_, cloud) = synth_tree(5, &SynthParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("c.ply");
    let csv = dir.path().join("c.csv");
    write_cloud_ply(&ply, &cloud).unwrap();
    write_cloud_csv(&csv, &cloud).unwrap();
    assert_eq!(read_cloud(&ply).unwrap(), cloud);
    assert_eq!(read_cloud(&csv).unwrap(), cloud);
}

#[test]
fn shipped_cloud_relabels_its_skeleton() {
    let fx = common::fixtures();
    let g = prunekit::treemodel::read_skeleton(&fx.join("trees/tree_01.json")).unwrap();
    let cloud = read_cloud(&fx.join("clouds/tree_01.ply")).unwrap();
    let relabeled = transfer_labels(&cloud, &g).unwrap();
    assert_eq!(labels_of(&relabeled), labels_of(&g));
}

#[test]
fn synth_trees_are_reproducible() {
    let p = SynthParams::default();
    assert_eq!(synth_tree(9, &p).unwrap(), synth_tree(9, &p).unwrap());
    assert_ne!(synth_tree(9, &p).unwrap().0, synth_tree(10, &p).unwrap().0);
}

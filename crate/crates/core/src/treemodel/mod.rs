//! Tree skeletons, labeled point clouds, cut extraction and branch capsules.

mod io;
mod kdtree;
mod synth;

pub use io::{
    cloud_to_ply, parse_csv, parse_ply, parse_skeleton, read_cloud, read_cuts, read_skeleton,
    skeleton_to_string, write_cloud_csv, write_cloud_ply, write_cuts, write_skeleton,
};
pub use kdtree::KdTree;
pub use synth::{synth_tree, SynthParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Capsule, Vec3};

/// Per-point and per-vertex annotation: keep (0) or remove (1).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    #[default]
    Keep,
    Remove,
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Keep),
            1 => Ok(Label::Remove),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Keep => 0,
            Label::Remove => 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledPointCloud {
    points: Vec<Vec3>,
    labels: Vec<Label>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<Vec3>, labels: Vec<Label>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(
                "point cloud contains non-finite coordinates",
            ));
        }
        Ok(LabeledPointCloud { points, labels })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub position: Vec3,
    pub radius: f64,
    pub label: Label,
}

impl Vertex {
    pub fn new(position: Vec3, radius: f64, label: Label) -> Self {
        Vertex {
            position,
            radius,
            label,
        }
    }
}

/// Rooted skeleton graph. Construction validates that the edges form a tree
/// rooted at `root` and that every radius is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeGraph {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    root: usize,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

impl TreeGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<(usize, usize)>, root: usize) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::invalid("tree graph has no vertices"));
        }
        if root >= n {
            return Err(Error::invalid(format!(
                "root {root} out of range for {n} vertices"
            )));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !(v.radius > 0.0 && v.radius.is_finite()) {
                return Err(Error::invalid(format!(
                    "vertex {i} has non-positive radius {}",
                    v.radius
                )));
            }
            if !v.position.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!(
                    "vertex {i} has a non-finite position"
                )));
            }
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &edges {
            if p >= n || c >= n {
                return Err(Error::invalid(format!(
                    "edge ({p}, {c}) references a missing vertex"
                )));
            }
            if c == root {
                return Err(Error::invalid(format!(
                    "edge ({p}, {c}) points into the root"
                )));
            }
            if parent[c].is_some() {
                return Err(Error::invalid(format!(
                    "vertex {c} has more than one parent"
                )));
            }
            parent[c] = Some(p);
            children[p].push(c);
        }
        // every vertex must hang off the root; anything else is a cycle or a
        // disconnected piece
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        let mut reached = 1;
        while let Some(x) = stack.pop() {
            for &y in &children[x] {
                if !seen[y] {
                    seen[y] = true;
                    reached += 1;
                    stack.push(y);
                }
            }
        }
        if reached != n {
            return Err(Error::invalid(format!(
                "graph is not a tree rooted at {root}: {} vertices unreachable or on a cycle",
                n - reached
            )));
        }
        Ok(TreeGraph {
            vertices,
            edges,
            root,
            children,
            parent,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Children of `v` in edge-list order.
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn label(&self, v: usize) -> Label {
        self.vertices[v].label
    }

    pub fn with_labels(&self, labels: &[Label]) -> Result<TreeGraph> {
        if labels.len() != self.vertices.len() {
            return Err(Error::invalid("label count does not match vertex count"));
        }
        let mut g = self.clone();
        for (v, &l) in g.vertices.iter_mut().zip(labels) {
            v.label = l;
        }
        Ok(g)
    }

    /// Axis-aligned bounding box of the vertex positions.
    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(&v.position);
        }
        b
    }

    /// Vertices in the subtree rooted at `v`, including `v`.
    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }

    /// Indices of edges whose parent endpoint is `v`.
    pub fn outgoing_edges(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.0 == v)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }
}

/// Cutting command: the point to sever and the section-surface normal,
/// pointing from the kept vertex toward the removed one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub position: Vec3,
    pub direction: Vec3,
    /// Skeleton vertex the cut sits on (labeled remove).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    /// Its parent (labeled keep).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

impl Cut {
    /// A cut not tied to any skeleton vertex.
    pub fn free(position: Vec3, direction: Vec3) -> Result<Self> {
        if !(direction.norm() > 0.0) {
            return Err(Error::invalid("cut direction must be non-zero"));
        }
        Ok(Cut {
            position,
            direction,
            vertex: None,
            parent: None,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutReport {
    pub cuts: Vec<Cut>,
    /// Edges going from a removed vertex back to a kept one. They produce no
    /// cut but usually mean the annotation is inconsistent.
    pub regrowth_edges: Vec<(usize, usize)>,
}

/// Give each vertex the label of its nearest cloud point (ties go to the
/// lowest point index).
pub fn transfer_labels(cloud: &LabeledPointCloud, graph: &TreeGraph) -> Result<TreeGraph> {
    if cloud.is_empty() {
        return Err(Error::invalid(
            "cannot transfer labels from an empty point cloud",
        ));
    }
    let tree = KdTree::new(cloud.points());
    let labels: Vec<Label> = graph
        .vertices()
        .iter()
        .map(|v| {
            let (idx, _) = tree.nearest(&v.position).expect("cloud is non-empty");
            cloud.labels()[idx]
        })
        .collect();
    graph.with_labels(&labels)
}

/// Walk the tree from the root with a LIFO stack and emit a cut on every
/// keep-to-remove edge.
pub fn generate_cuts(graph: &TreeGraph) -> CutReport {
    let mut report = CutReport::default();
    let mut stack = vec![graph.root()];
    while let Some(x) = stack.pop() {
        let ys = graph.children(x);
        stack.extend_from_slice(ys);
        let px = graph.vertices()[x].position;
        for &y in ys {
            match (graph.label(x), graph.label(y)) {
                (Label::Keep, Label::Remove) => {
                    let py = graph.vertices()[y].position;
                    report.cuts.push(Cut {
                        position: py,
                        direction: py - px,
                        vertex: Some(y),
                        parent: Some(x),
                    });
                }
                (Label::Remove, Label::Keep) => report.regrowth_edges.push((x, y)),
                _ => {}
            }
        }
    }
    report
}

/// Branch capsules, one per edge, for the collision world.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSet {
    pub capsules: Vec<Capsule>,
    /// Tree edge each capsule was built from.
    pub edge_index: Vec<usize>,
}

impl CapsuleSet {
    pub fn len(&self) -> usize {
        self.capsules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capsules.is_empty()
    }
}

pub fn build_collision_primitives(graph: &TreeGraph) -> CapsuleSet {
    let vs = graph.vertices();
    let mut set = CapsuleSet::default();
    for (i, &(p, c)) in graph.edges().iter().enumerate() {
        set.capsules.push(Capsule::new(
            vs[p].position,
            vs[c].position,
            vs[p].radius.max(vs[c].radius),
        ));
        set.edge_index.push(i);
    }
    set
}

/// Keep the points inside `bounds` that belong to the largest Euclidean
/// cluster (points linked when within `cluster_radius`). Ties between equally
/// large clusters go to the one holding the lowest point index. Point order
/// is preserved.
pub fn crop_and_cluster(
    cloud: &LabeledPointCloud,
    bounds: &Aabb,
    cluster_radius: f64,
) -> Result<LabeledPointCloud> {
    if !(cluster_radius > 0.0) {
        return Err(Error::invalid("cluster radius must be positive"));
    }
    let inside: Vec<usize> = (0..cloud.len())
        .filter(|&i| bounds.contains(&cloud.points()[i]))
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyResult("no points inside the crop box".into()));
    }
    let pts: Vec<Vec3> = inside.iter().map(|&i| cloud.points()[i]).collect();
    let tree = KdTree::new(&pts);
    let mut cluster = vec![usize::MAX; pts.len()];
    let mut sizes = Vec::new();
    let mut queue = Vec::new();
    let mut nbrs = Vec::new();
    for seed in 0..pts.len() {
        if cluster[seed] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        cluster[seed] = id;
        queue.clear();
        queue.push(seed);
        let mut size = 0;
        while let Some(i) = queue.pop() {
            size += 1;
            nbrs.clear();
            tree.within(&pts[i], cluster_radius, &mut nbrs);
            for &j in &nbrs {
                if cluster[j] == usize::MAX {
                    cluster[j] = id;
                    queue.push(j);
                }
            }
        }
        sizes.push(size);
    }
    // clusters are numbered in order of their lowest member, so the first
    // maximum wins ties
    let best = sizes
        .iter()
        .enumerate()
        .fold(
            (0, 0),
            |acc, (id, &s)| if s > acc.1 { (id, s) } else { acc },
        )
        .0;
    let keep: Vec<usize> = (0..pts.len()).filter(|&k| cluster[k] == best).collect();
    LabeledPointCloud::new(
        keep.iter().map(|&k| pts[k]).collect(),
        keep.iter().map(|&k| cloud.labels()[inside[k]]).collect(),
    )
}

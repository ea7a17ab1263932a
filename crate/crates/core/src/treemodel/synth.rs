//! Procedural trees standing in for scanned orchard data.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Unit};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledPointCloud, TreeGraph, Vertex};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng;

/// Shape parameters for [`synth_tree`].
///
/// Valid ranges: `trunk_height` in (0, 5] m, `trunk_segments >= 2`,
/// `trunk_radius` in (0, 0.5] m, `taper` in (0, 1], `branch_count >= 1`,
/// `0 < branch_length.0 <= branch_length.1`, `branch_segments >= 2`,
/// `branch_radius` in (0, trunk_radius], probabilities and `removal_fraction`
/// in [0, 1], `points_per_meter > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub trunk_height: f64,
    pub trunk_segments: usize,
    pub trunk_radius: f64,
    /// Tip radius as a fraction of the base radius.
    pub taper: f64,
    pub branch_count: usize,
    pub branch_length: (f64, f64),
    pub branch_segments: usize,
    pub branch_radius: f64,
    /// Lowest and highest attachment height, as fractions of the trunk.
    pub attach_range: (f64, f64),
    /// Elevation of primary branches above horizontal (rad).
    pub elevation_range: (f64, f64),
    pub sub_branch_probability: f64,
    /// Fraction of primary branches labeled for removal.
    pub removal_fraction: f64,
    /// Cloud samples per meter of edge, each a ring of 6 surface points.
    pub points_per_meter: f64,
    pub origin: Vec3,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            trunk_height: 0.7,
            trunk_segments: 7,
            trunk_radius: 0.03,
            taper: 0.5,
            branch_count: 10,
            branch_length: (0.2, 0.3),
            branch_segments: 3,
            branch_radius: 0.012,
            attach_range: (0.2, 0.95),
            elevation_range: (0.15, 0.8),
            sub_branch_probability: 0.4,
            removal_fraction: 0.4,
            points_per_meter: 150.0,
            origin: Vec3::zeros(),
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let checks = [
            (
                self.trunk_height > 0.0 && self.trunk_height <= 5.0,
                "trunk_height must be in (0, 5]",
            ),
            (self.trunk_segments >= 2, "trunk_segments must be >= 2"),
            (
                self.trunk_radius > 0.0 && self.trunk_radius <= 0.5,
                "trunk_radius must be in (0, 0.5]",
            ),
            (
                self.taper > 0.0 && self.taper <= 1.0,
                "taper must be in (0, 1]",
            ),
            (self.branch_count >= 1, "branch_count must be at least 1"),
            (
                self.branch_length.0 > 0.0 && self.branch_length.0 <= self.branch_length.1,
                "branch_length must satisfy 0 < min <= max",
            ),
            (self.branch_segments >= 2, "branch_segments must be >= 2"),
            (
                self.branch_radius > 0.0 && self.branch_radius <= self.trunk_radius,
                "branch_radius must be in (0, trunk_radius]",
            ),
            (
                unit(self.attach_range.0)
                    && unit(self.attach_range.1)
                    && self.attach_range.0 <= self.attach_range.1,
                "attach_range must be an ordered pair in [0, 1]",
            ),
            (
                self.elevation_range.0 <= self.elevation_range.1
                    && self.elevation_range.0 > -PI / 2.0
                    && self.elevation_range.1 < PI / 2.0,
                "elevation_range must be ordered within (-pi/2, pi/2)",
            ),
            (
                unit(self.sub_branch_probability),
                "sub_branch_probability must be in [0, 1]",
            ),
            (
                unit(self.removal_fraction),
                "removal_fraction must be in [0, 1]",
            ),
            (
                self.points_per_meter > 0.0,
                "points_per_meter must be positive",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

struct Builder {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn add(&mut self, parent: Option<usize>, position: Vec3, radius: f64) -> usize {
        let id = self.vertices.len();
        self.vertices
            .push(Vertex::new(position, radius, Label::Keep));
        if let Some(p) = parent {
            self.edges.push((p, id));
        }
        id
    }

    /// Grow a polyline of `segments` edges from `from`; returns the new
    /// vertex ids in order.
    fn grow(
        &mut self,
        rng: &mut ChaCha8Rng,
        from: usize,
        mut dir: Vec3,
        length: f64,
        segments: usize,
        radius: f64,
    ) -> Vec<usize> {
        let step = length / segments as f64;
        let mut ids = Vec::with_capacity(segments);
        let mut prev = from;
        for k in 0..segments {
            // mild random bend per segment
            let axis = dir.cross(&Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ));
            if axis.norm() > 1e-9 {
                let bend = Rotation3::from_axis_angle(
                    &Unit::new_normalize(axis),
                    rng.gen_range(0.0..0.15),
                );
                dir = bend * dir;
            }
            let pos = self.vertices[prev].position + dir * step;
            let r = radius * (1.0 - 0.5 * (k + 1) as f64 / segments as f64);
            prev = self.add(Some(prev), pos, r);
            ids.push(prev);
        }
        ids
    }
}

fn direction(azimuth: f64, elevation: f64) -> Vec3 {
    Vec3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
}

/// Generate a labeled skeleton and a matching labeled surface cloud.
///
/// Primary branches chosen for removal are labeled from their second vertex
/// onward, so each produces one cut on the branch a short way out from the
/// trunk.
pub fn synth_tree(seed: u64, params: &SynthParams) -> Result<(TreeGraph, LabeledPointCloud)> {
    params.validate()?;
    let mut rng = rng::stream(seed, &[rng::name_key("synth_tree")]);
    let p = params;
    let mut b = Builder {
        vertices: Vec::new(),
        edges: Vec::new(),
    };

    let seg = p.trunk_height / p.trunk_segments as f64;
    let mut trunk = vec![b.add(None, p.origin, p.trunk_radius)];
    for i in 1..=p.trunk_segments {
        let frac = i as f64 / p.trunk_segments as f64;
        let wobble = Vec3::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), 0.0);
        let pos = p.origin + Vec3::new(0.0, 0.0, seg * i as f64) + wobble;
        let r = p.trunk_radius * (1.0 - (1.0 - p.taper) * frac);
        let id = b.add(trunk.last().copied(), pos, r);
        trunk.push(id);
    }

    let mut primaries: Vec<Vec<usize>> = Vec::new();
    for _ in 0..p.branch_count {
        let h = rng.gen_range(p.attach_range.0..=p.attach_range.1);
        let attach =
            trunk[((h * p.trunk_segments as f64).round() as usize).clamp(1, p.trunk_segments)];
        let azimuth = rng.gen_range(0.0..TAU);
        let elevation = rng.gen_range(p.elevation_range.0..=p.elevation_range.1);
        let length = rng.gen_range(p.branch_length.0..=p.branch_length.1);
        let radius = p.branch_radius.min(b.vertices[attach].radius);
        let ids = b.grow(
            &mut rng,
            attach,
            direction(azimuth, elevation),
            length,
            p.branch_segments,
            radius,
        );
        if rng.gen_bool(p.sub_branch_probability) {
            let k = rng.gen_range(0..ids.len() - 1);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let sub_dir = direction(azimuth + side * rng.gen_range(0.5..1.0), elevation + 0.2);
            let sub_r = b.vertices[ids[k]].radius * 0.8;
            b.grow(&mut rng, ids[k], sub_dir, length * 0.45, 2, sub_r);
        }
        primaries.push(ids);
    }

    let n_remove = (p.removal_fraction * p.branch_count as f64).round() as usize;
    let graph = TreeGraph::new(b.vertices, b.edges, trunk[0])?;
    let mut labels = vec![Label::Keep; graph.vertices().len()];
    for i in sample(&mut rng, primaries.len(), n_remove.min(primaries.len())).iter() {
        for v in graph.subtree(primaries[i][1]) {
            labels[v] = Label::Remove;
        }
    }
    let graph = graph.with_labels(&labels)?;
    let cloud = sample_surface(&graph, p.points_per_meter)?;
    Ok((graph, cloud))
}

/// Rings of surface points along every edge; each point carries the label of
/// the closer edge endpoint.
fn sample_surface(graph: &TreeGraph, points_per_meter: f64) -> Result<LabeledPointCloud> {
    let vs = graph.vertices();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for &(pi, ci) in graph.edges() {
        let (a, c) = (&vs[pi], &vs[ci]);
        let axis = c.position - a.position;
        let len = axis.norm();
        let u = axis / len;
        let helper = if u.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let e1 = u.cross(&helper).normalize();
        let e2 = u.cross(&e1);
        let steps = ((len * points_per_meter).ceil() as usize).max(2);
        for j in 0..=steps {
            let t = j as f64 / steps as f64;
            let center = a.position + axis * t;
            let r = a.radius + (c.radius - a.radius) * t;
            let label = if t < 0.5 { a.label } else { c.label };
            for k in 0..6 {
                let phi = TAU * k as f64 / 6.0;
                points.push(center + (e1 * phi.cos() + e2 * phi.sin()) * r);
                labels.push(label);
            }
        }
    }
    LabeledPointCloud::new(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treemodel::{generate_cuts, transfer_labels};

    #[test]
    fn deterministic_for_seed() {
        let p = SynthParams::default();
        let (g1, c1) = synth_tree(1, &p).unwrap();
        let (g2, c2) = synth_tree(1, &p).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(c1, c2);
        let (g3, _) = synth_tree(2, &p).unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn zero_removal_means_no_cuts() {
        let p = SynthParams {
            removal_fraction: 0.0,
            ..Default::default()
        };
        let (g, _) = synth_tree(3, &p).unwrap();
        assert!(g.vertices().iter().all(|v| v.label == Label::Keep));
        assert!(generate_cuts(&g).cuts.is_empty());
    }

    #[test]
    fn zero_branches_rejected() {
        let p = SynthParams {
            branch_count: 0,
            ..Default::default()
        };
        assert!(matches!(synth_tree(1, &p), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cloud_labels_transfer_back_exactly() {
        let (g, cloud) = synth_tree(11, &SynthParams::default()).unwrap();
        let unlabeled = g
            .with_labels(&vec![Label::Keep; g.vertices().len()])
            .unwrap();
        let back = transfer_labels(&cloud, &unlabeled).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn removal_marks_whole_subtrees() {
        let (g, _) = synth_tree(5, &SynthParams::default()).unwrap();
        for v in 0..g.vertices().len() {
            if g.label(v) == Label::Remove {
                assert!(g.subtree(v).iter().all(|&w| g.label(w) == Label::Remove));
            }
        }
        // four of ten branches removed, one cut each
        assert_eq!(generate_cuts(&g).cuts.len(), 4);
    }
}

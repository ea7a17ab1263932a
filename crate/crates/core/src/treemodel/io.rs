//! File formats for skeletons, labeled clouds and cut lists.
//!
//! * Skeleton: JSON document `{"vertices": [{"x", "y", "z", "radius", "label"?}],
//!   "edges": [[parent, child], ...], "root": k}`, meters.
//! * Cloud: ASCII PLY with float `x`, `y`, `z` and uchar `label`, or CSV rows
//!   `x,y,z,label` with an optional header line.
//! * Cuts: JSON serialization of [`CutReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CutReport, Label, LabeledPointCloud, TreeGraph, Vertex};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Serialize, Deserialize)]
struct SkeletonDoc {
    vertices: Vec<VertexDoc>,
    edges: Vec<[usize; 2]>,
    root: usize,
}

#[derive(Serialize, Deserialize)]
struct VertexDoc {
    x: f64,
    y: f64,
    z: f64,
    radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_skeleton(text: &str, origin: &str) -> Result<TreeGraph> {
    let doc: SkeletonDoc = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
    let vertices = doc
        .vertices
        .iter()
        .map(|v| {
            Vertex::new(
                Vec3::new(v.x, v.y, v.z),
                v.radius,
                v.label.unwrap_or_default(),
            )
        })
        .collect();
    let edges = doc.edges.iter().map(|e| (e[0], e[1])).collect();
    TreeGraph::new(vertices, edges, doc.root)
}

pub fn skeleton_to_string(graph: &TreeGraph) -> String {
    let doc = SkeletonDoc {
        vertices: graph
            .vertices()
            .iter()
            .map(|v| VertexDoc {
                x: v.position.x,
                y: v.position.y,
                z: v.position.z,
                radius: v.radius,
                label: Some(v.label),
            })
            .collect(),
        edges: graph.edges().iter().map(|&(p, c)| [p, c]).collect(),
        root: graph.root(),
    };
    serde_json::to_string_pretty(&doc).expect("skeleton serializes")
}

pub fn read_skeleton(path: &Path) -> Result<TreeGraph> {
    parse_skeleton(&read_text(path)?, &path.display().to_string())
}

pub fn write_skeleton(path: &Path, graph: &TreeGraph) -> Result<()> {
    write_text(path, &skeleton_to_string(graph))
}

/// Reads a labeled cloud, choosing PLY when the text starts with `ply` and
/// CSV otherwise.
pub fn read_cloud(path: &Path) -> Result<LabeledPointCloud> {
    let text = read_text(path)?;
    let origin = path.display().to_string();
    if text.trim_start().starts_with("ply") {
        parse_ply(&text, &origin)
    } else {
        parse_csv(&text, &origin)
    }
}

fn parse_label(tok: &str, origin: &str) -> Result<Label> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(origin, format!("bad label '{tok}'")))?;
    match v {
        0.0 => Ok(Label::Keep),
        1.0 => Ok(Label::Remove),
        _ => Err(Error::parse(
            origin,
            format!("label must be 0 or 1, got '{tok}'"),
        )),
    }
}

pub fn parse_ply(text: &str, origin: &str) -> Result<LabeledPointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse(origin, "missing 'ply' magic"));
    }
    // (element name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut ascii = false;
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "header ended without end_header"))?
            .trim();
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] => ascii = *fmt == "ascii",
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(origin, format!("bad element count '{count}'")))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", ..] => {
                if let Some(e) = elements.last_mut() {
                    e.2.push("<list>".into());
                }
            }
            ["property", _ty, name] => {
                let e = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(origin, "property before any element"))?;
                e.2.push(name.to_string());
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => {
                return Err(Error::parse(
                    origin,
                    format!("unexpected header line '{line}'"),
                ))
            }
        }
    }
    if !ascii {
        return Err(Error::parse(origin, "only ASCII PLY is supported"));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (name, count, props) in &elements {
        if name != "vertex" {
            for _ in 0..*count {
                lines.next();
            }
            continue;
        }
        let find = |p: &str| {
            props
                .iter()
                .position(|n| n == p)
                .ok_or_else(|| Error::parse(origin, format!("vertex element lacks property '{p}'")))
        };
        let (ix, iy, iz, il) = (find("x")?, find("y")?, find("z")?, find("label")?);
        for k in 0..*count {
            let line = lines.next().ok_or_else(|| {
                Error::parse(origin, format!("expected {count} vertices, found {k}"))
            })?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < props.len() {
                return Err(Error::parse(origin, format!("short vertex line {k}")));
            }
            let f = |i: usize| -> Result<f64> {
                toks[i]
                    .parse()
                    .map_err(|_| Error::parse(origin, format!("bad number '{}'", toks[i])))
            };
            points.push(Vec3::new(f(ix)?, f(iy)?, f(iz)?));
            labels.push(parse_label(toks[il], origin)?);
        }
    }
    LabeledPointCloud::new(points, labels)
}

pub fn parse_csv(text: &str, origin: &str) -> Result<LabeledPointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 4 {
            return Err(Error::parse(
                origin,
                format!("row {row} has {} fields, need 4", rec.len()),
            ));
        }
        let nums: std::result::Result<Vec<f64>, _> =
            (0..3).map(|i| rec[i].parse::<f64>()).collect();
        match nums {
            Ok(n) => {
                points.push(Vec3::new(n[0], n[1], n[2]));
                labels.push(parse_label(&rec[3], origin)?);
            }
            Err(_) if row == 0 => continue, // header
            Err(e) => return Err(Error::parse(origin, format!("row {row}: {e}"))),
        }
    }
    LabeledPointCloud::new(points, labels)
}

pub fn cloud_to_ply(cloud: &LabeledPointCloud) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar label\nend_header\n",
        cloud.len()
    );
    for (p, l) in cloud.points().iter().zip(cloud.labels()) {
        let _ = writeln!(s, "{} {} {} {}", p.x, p.y, p.z, u8::from(*l));
    }
    s
}

pub fn write_cloud_ply(path: &Path, cloud: &LabeledPointCloud) -> Result<()> {
    write_text(path, &cloud_to_ply(cloud))
}

pub fn write_cloud_csv(path: &Path, cloud: &LabeledPointCloud) -> Result<()> {
    let mut s = String::from("x,y,z,label\n");
    for (p, l) in cloud.points().iter().zip(cloud.labels()) {
        let _ = writeln!(s, "{},{},{},{}", p.x, p.y, p.z, u8::from(*l));
    }
    write_text(path, &s)
}

pub fn write_cuts(path: &Path, report: &CutReport) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(report)?)
}

pub fn read_cuts(path: &Path) -> Result<CutReport> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_with_extra_properties_and_elements() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar label\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 255 0\n1 2 3 0 1\n3 0 1 1\n";
        let c = parse_ply(text, "t").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points()[1], Vec3::new(1., 2., 3.));
        assert_eq!(c.labels(), &[Label::Keep, Label::Remove]);
    }

    #[test]
    fn ply_rejects_binary_and_bad_labels() {
        let bin = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(parse_ply(bin, "t").is_err());
        let bad = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty uchar label\nend_header\n0 0 0 2\n";
        assert!(parse_ply(bad, "t").is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let a = parse_csv("x,y,z,label\n0,0,1,1\n1,1,1,0\n", "t").unwrap();
        let b = parse_csv("0,0,1,1\n1,1,1,0\n", "t").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels()[0], Label::Remove);
    }

    #[test]
    fn ply_round_trip() {
        let cloud = LabeledPointCloud::new(
            vec![Vec3::new(0.125, -1.5, 3.0), Vec3::new(1e-3, 2.0, 0.1)],
            vec![Label::Remove, Label::Keep],
        )
        .unwrap();
        assert_eq!(parse_ply(&cloud_to_ply(&cloud), "t").unwrap(), cloud);
    }

    #[test]
    fn skeleton_label_is_optional() {
        let text = r#"{"vertices": [{"x": 0, "y": 0, "z": 0, "radius": 0.02},
                                   {"x": 0, "y": 0, "z": 1, "radius": 0.01, "label": 1}],
                      "edges": [[0, 1]], "root": 0}"#;
        let g = parse_skeleton(text, "t").unwrap();
        assert_eq!(g.label(0), Label::Keep);
        assert_eq!(g.label(1), Label::Remove);
        assert_eq!(parse_skeleton(&skeleton_to_string(&g), "t").unwrap(), g);
        let cyclic = r#"{"vertices": [{"x":0,"y":0,"z":0,"radius":1},{"x":0,"y":0,"z":1,"radius":1}],
                        "edges": [[0,1],[1,0]], "root": 0}"#;
        assert!(parse_skeleton(cyclic, "t").is_err());
    }
}

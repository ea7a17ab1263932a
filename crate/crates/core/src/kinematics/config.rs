//! TOML chain description (see `fixtures/chains/default_7dof.toml`).

use std::path::Path;

use nalgebra::{Isometry3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};
use serde::Deserialize;

use super::{Joint, JointConfig, KinematicChain, LinkCapsule};
use crate::error::{Error, Result};
use crate::geometry::{Capsule, Vec3};

pub const CHAIN_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_CHAIN_TOML: &str = include_str!("../../fixtures/chains/default_7dof.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    schema_version: u32,
    name: String,
    #[serde(default)]
    home: Option<Vec<f64>>,
    joints: Vec<JointDoc>,
    ee_offset: FrameDoc,
    #[serde(default)]
    capsules: Vec<CapsuleDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    xyz: [f64; 3],
    #[serde(default = "identity_quat")]
    quat: [f64; 4],
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    axis: [f64; 3],
    origin: FrameDoc,
    limits: [f64; 2],
    velocity_limit: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsuleDoc {
    link: usize,
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
}

fn unit_quat(q: [f64; 4], what: &str) -> Result<UnitQuaternion<f64>> {
    let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
    if (raw.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "{what}: quaternion is not unit-norm"
        )));
    }
    Ok(UnitQuaternion::from_quaternion(raw))
}

fn frame(doc: &FrameDoc, what: &str) -> Result<Isometry3<f64>> {
    Ok(Isometry3::from_parts(
        Translation3::from(Vector3::from(doc.xyz)),
        unit_quat(doc.quat, what)?,
    ))
}

pub fn parse_chain(text: &str, origin: &str) -> Result<KinematicChain> {
    let doc: ChainDoc = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
    if doc.schema_version != CHAIN_SCHEMA_VERSION {
        return Err(Error::parse(
            origin,
            format!(
                "unsupported schema_version {} (expected {CHAIN_SCHEMA_VERSION})",
                doc.schema_version
            ),
        ));
    }
    let joints = doc
        .joints
        .iter()
        .map(|j| {
            let axis = Vector3::from(j.axis);
            if (axis.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "joint {}: axis is not a unit vector",
                    j.name
                )));
            }
            Ok(Joint {
                name: j.name.clone(),
                axis: Unit::new_normalize(axis),
                origin: frame(&j.origin, &j.name)?,
                lower: j.limits[0],
                upper: j.limits[1],
                velocity_limit: j.velocity_limit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let capsules = doc
        .capsules
        .iter()
        .map(|c| LinkCapsule {
            link: c.link,
            capsule: Capsule::new(Vec3::from(c.a), Vec3::from(c.b), c.radius),
        })
        .collect();
    let chain = KinematicChain::new(
        doc.name,
        joints,
        frame(&doc.ee_offset, "ee_offset")?,
        capsules,
    )?;
    match doc.home {
        Some(h) => chain.with_home(JointConfig(h)),
        None => Ok(chain),
    }
}

pub fn read_chain(path: &Path) -> Result<KinematicChain> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chain(&text, &path.display().to_string())
}

/// The bundled 7-DoF arm with a shear tool.
pub fn default_chain() -> KinematicChain {
    parse_chain(DEFAULT_CHAIN_TOML, "default_7dof.toml").expect("bundled chain is valid")
}

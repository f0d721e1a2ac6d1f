//! Joint-limited kinematic chain.
//!
//! Frame convention: x forward, y left, z up. Every segment's long axis runs
//! from its proximal to its distal landmark along `direction` (default -z) in
//! the segment frame, so the neutral pose (all joint angles zero, identity
//! root) is an upright stance with every segment orientation equal to the
//! identity.

mod ik;
mod kinematics;
mod metrics;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rotation::{norm3, Vec3};
use crate::{Error, Result};

pub use ik::{
    anchor_root_positions, export_consistent_orientations, fit_pose, run_ik, IkSolution, IkTrack,
    Targets, CONVERGENCE_TOLERANCE, MAX_ITERATIONS,
};
pub use kinematics::{forward_kinematics, Pose, SegmentFrames};
pub use metrics::{extract_metrics, Aggregate, KinematicMetrics, MetricDef, MetricKind};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofDef {
    pub name: String,
    /// Rotation axis in the parent-side joint frame.
    pub axis: Vec3,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDef {
    pub id: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub length: f64,
    /// Joint center in the parent frame, relative to the parent's proximal
    /// landmark. Defaults to the parent's distal landmark.
    #[serde(default)]
    pub attach: Option<Vec3>,
    /// Unit long axis in the segment frame, proximal to distal.
    #[serde(default = "default_direction")]
    pub direction: Vec3,
    /// Rotational DoFs, composed in the listed order.
    #[serde(default)]
    pub dofs: Vec<DofDef>,
}

fn default_direction() -> Vec3 {
    [0.0, 0.0, -1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkDef {
    pub id: String,
    pub segment: String,
    /// Position in the segment frame relative to the proximal landmark.
    pub position: Vec3,
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub name: String,
    pub segments: Vec<SegmentDef>,
    #[serde(default)]
    pub landmarks: Vec<LandmarkDef>,
    #[serde(default)]
    pub metrics: Vec<MetricDef>,
    /// Landmark kept fixed in the world when placing the root during IK.
    #[serde(default)]
    pub anchor: Option<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub def: SegmentDef,
    pub parent: Option<usize>,
    pub attach: Vec3,
    pub dof_start: usize,
    /// This segment and all its descendants, in topological order.
    pub subtree: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LandmarkRef {
    Proximal(usize),
    Distal(usize),
    Point(usize, usize),
}

/// A validated model. Segments are stored parents-first.
#[derive(Debug, Clone)]
pub struct SkeletalModel {
    file: ModelFile,
    segments: Vec<Segment>,
    index: HashMap<String, usize>,
    landmark_points: Vec<(usize, Vec3)>,
    landmark_index: HashMap<String, usize>,
    dof_count: usize,
    anchor: Option<LandmarkRef>,
}

impl SkeletalModel {
    pub fn from_file_data(file: ModelFile) -> Result<Self> {
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "model schema version {} not supported (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let roots: Vec<_> = file
            .segments
            .iter()
            .filter(|s| s.parent.is_none())
            .collect();
        if roots.len() != 1 {
            return Err(Error::Config(format!(
                "model must have exactly one root segment, found {}",
                roots.len()
            )));
        }
        if !roots[0].dofs.is_empty() {
            return Err(Error::Config(format!(
                "root segment {} is free-floating and cannot declare joint DoFs",
                roots[0].id
            )));
        }

        // Topological order: repeatedly take segments whose parent is placed.
        let mut order: Vec<&SegmentDef> = Vec::with_capacity(file.segments.len());
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut pending: Vec<&SegmentDef> = file.segments.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|s| {
                let ready = match &s.parent {
                    None => true,
                    Some(p) => index.contains_key(p),
                };
                if ready && index.insert(s.id.clone(), order.len()).is_none() {
                    order.push(s);
                }
                !ready
            });
            if pending.len() == before {
                let ids: Vec<_> = pending.iter().map(|s| s.id.as_str()).collect();
                return Err(Error::Config(format!(
                    "segments {ids:?} have unknown parents or form a cycle"
                )));
            }
        }
        if order.len() != file.segments.len() {
            return Err(Error::Config("duplicate segment ids in model".into()));
        }

        let mut segments: Vec<Segment> = Vec::with_capacity(order.len());
        let mut dof_count = 0;
        for def in order {
            if !(def.length.is_finite() && def.length > 0.0) {
                return Err(Error::Config(format!(
                    "segment {} has non-positive length {}",
                    def.id, def.length
                )));
            }
            let dn = norm3(def.direction);
            if (dn - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "segment {} direction must be a unit vector",
                    def.id
                )));
            }
            if def.dofs.len() > 3 {
                return Err(Error::Config(format!(
                    "segment {} declares {} DoFs, at most 3 allowed",
                    def.id,
                    def.dofs.len()
                )));
            }
            for dof in &def.dofs {
                if !(dof.lo <= dof.hi) || norm3(dof.axis) < 1e-12 {
                    return Err(Error::Config(format!(
                        "segment {} DoF {} has invalid limits or axis",
                        def.id, dof.name
                    )));
                }
            }
            let parent = def.parent.as_ref().map(|p| index[p]);
            let attach = match (parent, def.attach) {
                (_, Some(a)) => a,
                (Some(p), None) => {
                    let pd = &segments[p].def;
                    crate::rotation::scale3(pd.direction, pd.length)
                }
                (None, None) => [0.0; 3],
            };
            let mut def = def.clone();
            for dof in &mut def.dofs {
                let n = norm3(dof.axis);
                dof.axis = crate::rotation::scale3(dof.axis, 1.0 / n);
            }
            segments.push(Segment {
                dof_start: dof_count,
                parent,
                attach,
                subtree: Vec::new(),
                def,
            });
            dof_count += segments.last().unwrap().def.dofs.len();
        }
        for i in (0..segments.len()).rev() {
            let mut sub = vec![i];
            for j in i + 1..segments.len() {
                if segments[j].parent.is_some_and(|p| sub.contains(&p)) {
                    sub.push(j);
                }
            }
            segments[i].subtree = sub;
        }

        let mut model = SkeletalModel {
            landmark_points: Vec::new(),
            landmark_index: HashMap::new(),
            anchor: None,
            file,
            segments,
            index,
            dof_count,
        };
        for lm in &model.file.landmarks {
            let seg = model.segment_index(&lm.segment)?;
            if model.landmark_index.contains_key(&lm.id) {
                return Err(Error::Config(format!("duplicate landmark {}", lm.id)));
            }
            model
                .landmark_index
                .insert(lm.id.clone(), model.landmark_points.len());
            model.landmark_points.push((seg, lm.position));
        }
        if let Some(a) = &model.file.anchor {
            model.anchor = Some(model.resolve_landmark(a)?);
        }
        for m in &model.file.metrics {
            m.validate(&model)?;
        }
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("model document: {e}")))?;
        Self::from_file_data(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        Self::from_file_data(file)
    }

    /// 15-segment full-body model (pelvis, torso, head, and per side femur,
    /// tibia, foot, humerus, forearm, hand).
    pub fn full_body() -> Self {
        Self::from_json(include_str!("../../models/full_body.json"))
            .expect("bundled full-body model is valid")
    }

    /// 9-segment model (pelvis, torso, head, and per side femur, tibia, foot).
    pub fn lower_body() -> Self {
        Self::from_json(include_str!("../../models/lower_body.json"))
            .expect("bundled lower-body model is valid")
    }

    pub fn file(&self) -> &ModelFile {
        &self.file
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Segment ids, parents first.
    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.def.id.as_str())
    }

    pub fn segment_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown segment {id}")))
    }

    pub fn segment_def(&self, index: usize) -> &SegmentDef {
        &self.segments[index].def
    }

    pub fn parent_of(&self, index: usize) -> Option<usize> {
        self.segments[index].parent
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    /// (lo, hi) for every DoF in pose order.
    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .flat_map(|s| s.def.dofs.iter().map(|d| (d.lo, d.hi)))
            .collect()
    }

    /// Index of the named DoF of a segment in the pose's joint-angle vector.
    pub fn dof_index(&self, segment: &str, dof: &str) -> Result<usize> {
        let s = &self.segments[self.segment_index(segment)?];
        s.def
            .dofs
            .iter()
            .position(|d| d.name == dof)
            .map(|k| s.dof_start + k)
            .ok_or_else(|| Error::Config(format!("segment {segment} has no DoF {dof}")))
    }

    pub fn metrics(&self) -> &[MetricDef] {
        &self.file.metrics
    }

    pub(crate) fn segment(&self, index: usize) -> &Segment {
        &self.segments[index]
    }

    pub(crate) fn anchor(&self) -> Option<LandmarkRef> {
        self.anchor
    }

    /// Resolves `<segment>.proximal`, `<segment>.distal` or a named landmark.
    pub(crate) fn resolve_landmark(&self, name: &str) -> Result<LandmarkRef> {
        if let Some(&i) = self.landmark_index.get(name) {
            let (seg, _) = self.landmark_points[i];
            return Ok(LandmarkRef::Point(seg, i));
        }
        if let Some((seg, end)) = name.rsplit_once('.') {
            let s = self
                .segment_index(seg)
                .map_err(|_| unknown_landmark(name))?;
            return match end {
                "proximal" => Ok(LandmarkRef::Proximal(s)),
                "distal" => Ok(LandmarkRef::Distal(s)),
                _ => Err(unknown_landmark(name)),
            };
        }
        Err(unknown_landmark(name))
    }

    pub(crate) fn landmark_local(&self, i: usize) -> Vec3 {
        self.landmark_points[i].1
    }
}

fn unknown_landmark(name: &str) -> Error {
    Error::Config(format!("unknown landmark {name}"))
}

#[cfg(test)]
mod tests;

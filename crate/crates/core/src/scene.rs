//! Symbolic ground-truth scenes.
//!
//! A scene file (`scene.v1`) is a single JSON document; see
//! `schemas/scene.v1.schema.json`. Scenes are validated on load and are
//! immutable afterwards.

use crate::geometry::{GraspRect, Point, Polygon, Workspace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

pub const SCENE_SCHEMA: &str = "scene.v1";

/// How far (pixels) a mask vertex may stray outside its object's bbox.
pub const MASK_SLACK: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene: {0}")]
    Parse(String),
    #[error("invalid scene (object {object_id}): {message}")]
    InvalidObject { object_id: u32, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("region [{0}] does not intersect the image")]
    EmptyCrop(String),
}

/// Axis-aligned box `(left, top, right, bottom)`, serialized as a 4-array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([left, top, right, bottom]: [f64; 4]) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

impl BBox {
    pub const fn new(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.left, self.top, self.right, self.bottom]
            .iter()
            .all(|v| v.is_finite())
            && self.left < self.right
            && self.top < self.bottom
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.left + self.right) / 2.0,
            (self.top + self.bottom) / 2.0,
        )
    }

    /// Positive-area overlap, if any.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox::new(
            self.left.max(other.left),
            self.top.max(other.top),
            self.right.min(other.right),
            self.bottom.min(other.bottom),
        );
        b.is_valid().then_some(b)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.intersection(other).is_some()
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        match self.intersection(other) {
            Some(i) => {
                let inter = i.area();
                inter / (self.area() + other.area() - inter)
            }
            None => 0.0,
        }
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.left && p.x <= self.right && p.y >= self.top && p.y <= self.bottom
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.left >= self.left
            && other.right <= self.right
            && other.top >= self.top
            && other.bottom <= self.bottom
    }

    pub fn inflate(&self, d: f64) -> BBox {
        BBox::new(self.left - d, self.top - d, self.right + d, self.bottom + d)
    }
}

impl std::fmt::Display for BBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}]",
            self.left, self.top, self.right, self.bottom
        )
    }
}

/// A rectangular view into a scene, always in original-image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePatch {
    pub bbox: BBox,
    /// Fingerprint of the scene this patch was cut from.
    pub source: String,
    /// Tool calls that produced this patch, oldest first.
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl ImagePatch {
    pub fn derive(&self, bbox: BBox, step: impl Into<String>) -> ImagePatch {
        let mut provenance = self.provenance.clone();
        provenance.push(step.into());
        ImagePatch {
            bbox,
            source: self.source.clone(),
            provenance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    #[serde(rename = "part_name")]
    pub name: String,
    pub bbox: BBox,
    #[serde(default)]
    pub grasps: Vec<GraspRect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub category: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub affordances: Vec<String>,
    pub bbox: BBox,
    pub mask: Polygon,
    pub depth: f64,
    #[serde(default)]
    pub parts: Vec<Part>,
    pub grasps: Vec<GraspRect>,
    #[serde(default)]
    pub knowledge: BTreeMap<String, String>,
}

impl SceneObject {
    /// Case-insensitive name match; `Some(true)` for the canonical name,
    /// `Some(false)` for a synonym.
    pub fn matches_name(&self, query: &str) -> Option<bool> {
        let q = query.trim().to_lowercase();
        if self.name.to_lowercase() == q {
            Some(true)
        } else if self.synonyms.iter().any(|s| s.to_lowercase() == q) {
            Some(false)
        } else {
            None
        }
    }

    pub fn part(&self, name: &str) -> Option<&Part> {
        let q = name.to_lowercase();
        self.parts.iter().find(|p| p.name.to_lowercase() == q)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub width: u32,
    pub height: u32,
    pub background_depth: f64,
    pub workspace: Workspace,
    #[serde(default)]
    pub knowledge: BTreeMap<String, String>,
    pub objects: Vec<SceneObject>,
    #[serde(skip)]
    fingerprint: OnceLock<String>,
}

fn default_schema() -> String {
    SCENE_SCHEMA.to_string()
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.width == other.width
            && self.height == other.height
            && self.background_depth == other.background_depth
            && self.workspace == other.workspace
            && self.knowledge == other.knowledge
            && self.objects == other.objects
    }
}

impl Scene {
    pub fn new(
        width: u32,
        height: u32,
        background_depth: f64,
        workspace: Workspace,
        knowledge: BTreeMap<String, String>,
        objects: Vec<SceneObject>,
    ) -> Result<Self, SceneError> {
        let scene = Scene {
            schema: default_schema(),
            width,
            height,
            background_depth,
            workspace,
            knowledge,
            objects,
            fingerprint: OnceLock::new(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_json_str(text: &str) -> Result<Self, SceneError> {
        let scene: Scene =
            serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    /// Canonical file text: pretty JSON with a trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("scene serialization is infallible");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width as f64, self.height as f64)
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Objects sorted by ascending id.
    pub fn objects_by_id(&self) -> Vec<&SceneObject> {
        let mut objs: Vec<_> = self.objects.iter().collect();
        objs.sort_by_key(|o| o.id);
        objs
    }

    /// Stable content hash, used as the scene id on the tool protocol.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint.get_or_init(|| {
            let canonical = serde_json::to_vec(self).expect("scene serialization is infallible");
            hex::encode(Sha256::digest(&canonical))[..16].to_string()
        })
    }

    /// Patch covering the whole image.
    pub fn full_patch(&self) -> ImagePatch {
        ImagePatch {
            bbox: self.bounds(),
            source: self.fingerprint().to_string(),
            provenance: vec!["image".to_string()],
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema != SCENE_SCHEMA {
            return Err(SceneError::Invalid(format!(
                "unsupported schema {:?}",
                self.schema
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::Invalid("image must have positive size".into()));
        }
        if !self.background_depth.is_finite() {
            return Err(SceneError::Invalid(
                "background_depth must be finite".into(),
            ));
        }
        self.workspace
            .validate()
            .map_err(|e| SceneError::Invalid(e.to_string()))?;
        let bounds = self.bounds();
        let ws = BBox::new(
            self.workspace.x_min,
            self.workspace.y_min,
            self.workspace.x_max,
            self.workspace.y_max,
        );
        if !bounds.contains_box(&ws) {
            return Err(SceneError::Invalid(format!(
                "workspace {ws} exceeds image bounds {bounds}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for obj in &self.objects {
            let fail = |message: String| SceneError::InvalidObject {
                object_id: obj.id,
                message,
            };
            if !seen.insert(obj.id) {
                return Err(fail("duplicate object id".into()));
            }
            if obj.name.trim().is_empty() {
                return Err(fail("empty name".into()));
            }
            if !obj.bbox.is_valid() {
                return Err(fail(format!(
                    "bbox {} needs left < right and top < bottom",
                    obj.bbox
                )));
            }
            if !bounds.contains_box(&obj.bbox) {
                return Err(fail(format!(
                    "bbox {} exceeds image bounds {bounds}",
                    obj.bbox
                )));
            }
            if !obj.depth.is_finite() {
                return Err(fail("depth must be finite".into()));
            }
            let slack = obj.bbox.inflate(MASK_SLACK);
            if let Some(p) = obj.mask.vertices().iter().find(|p| !slack.contains(**p)) {
                return Err(fail(format!(
                    "mask vertex ({}, {}) outside bbox {}",
                    p.x, p.y, obj.bbox
                )));
            }
            if let Some(g) = obj.grasps.iter().find(|g| !obj.bbox.contains(g.center())) {
                return Err(fail(format!(
                    "grasp center ({}, {}) outside bbox {}",
                    g.x(),
                    g.y(),
                    obj.bbox
                )));
            }
            for part in &obj.parts {
                if !part.bbox.is_valid() {
                    return Err(fail(format!(
                        "part {:?} has invalid bbox {}",
                        part.name, part.bbox
                    )));
                }
                if let Some(g) = part.grasps.iter().find(|g| !part.bbox.contains(g.center())) {
                    return Err(fail(format!(
                        "part {:?} grasp center ({}, {}) outside part bbox {}",
                        part.name,
                        g.x(),
                        g.y(),
                        part.bbox
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json_str(&text)
}

/// Clamps `region` to the image; fails when nothing is left.
pub fn crop(scene: &Scene, region: BBox) -> Result<ImagePatch, SceneError> {
    let clamped = scene.bounds().intersection(&region).ok_or_else(|| {
        SceneError::EmptyCrop(format!(
            "{}, {}, {}, {}",
            region.left, region.top, region.right, region.bottom
        ))
    })?;
    Ok(scene.full_patch().derive(clamped, format!("crop{clamped}")))
}

/// Deterministic textual stand-in for looking at (part of) the image.
pub fn describe(scene: &Scene, region: Option<BBox>) -> String {
    let region = region.unwrap_or_else(|| scene.bounds());
    let mut out = String::new();
    for obj in scene.objects_by_id() {
        if !obj.bbox.intersects(&region) {
            continue;
        }
        let _ = write!(out, "object {} {}:", obj.id, obj.name);
        for (k, v) in &obj.attributes {
            let _ = write!(out, " {k}={v}");
        }
        let _ = write!(out, " bbox={} depth={}", obj.bbox, obj.depth);
        if !obj.parts.is_empty() {
            let names: Vec<_> = obj.parts.iter().map(|p| p.name.as_str()).collect();
            let _ = write!(out, " parts={}", names.join(","));
        }
        out.push('\n');
    }
    if out.is_empty() {
        "no objects".to_string()
    } else {
        out.pop();
        out
    }
}

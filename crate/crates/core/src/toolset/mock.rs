use super::{Detection, ToolBackend, ToolCall, ToolError, ToolOutput};
use crate::geometry::{GraspRect, Point};
use crate::scene::{BBox, ImagePatch, Scene, SceneObject};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

/// Side of the sample grid used by `compute_depth`.
pub const DEPTH_GRID: usize = 32;

const SYNONYM_SCORE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    /// Center jitter amplitude (pixels) on `grasp_detection`.
    pub noise_center: f64,
    /// Angle jitter amplitude (degrees) on `grasp_detection`.
    pub noise_angle: f64,
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            noise_center: 2.0,
            noise_angle: 5.0,
            seed: 42,
        }
    }
}

impl MockConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            noise_center: 0.0,
            noise_angle: 0.0,
            seed,
        }
    }
}

/// Deterministic tool backend answering from a scene's ground truth.
#[derive(Debug, Clone)]
pub struct MockTools {
    scene: Arc<Scene>,
    config: MockConfig,
}

// A grasp-bearing region: an object, or one of its parts.
struct Region<'a> {
    owner: &'a SceneObject,
    part: Option<usize>,
    bbox: BBox,
    grasps: &'a [GraspRect],
}

impl MockTools {
    pub fn new(scene: Arc<Scene>, config: MockConfig) -> Self {
        Self { scene, config }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> MockConfig {
        self.config
    }

    fn check_source(&self, patch: &ImagePatch) -> Result<(), ToolError> {
        if patch.source != self.scene.fingerprint() {
            return Err(ToolError::InvalidArgument(format!(
                "patch belongs to scene {}, not {}",
                patch.source,
                self.scene.fingerprint()
            )));
        }
        if !patch.bbox.is_valid() {
            return Err(ToolError::InvalidArgument(format!(
                "degenerate patch {}",
                patch.bbox
            )));
        }
        Ok(())
    }

    // Name matches inside `patch`, best first: score desc, then id asc.
    fn matches(&self, patch: &ImagePatch, name: &str) -> Vec<(&SceneObject, f64)> {
        let mut found: Vec<_> = self
            .scene
            .objects_by_id()
            .into_iter()
            .filter(|o| o.bbox.intersects(&patch.bbox))
            .filter_map(|o| {
                o.matches_name(name)
                    .map(|canonical| (o, if canonical { 1.0 } else { SYNONYM_SCORE }))
            })
            .collect();
        found.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.id.cmp(&b.0.id)));
        found
    }

    fn find(&self, patch: &ImagePatch, name: &str) -> Result<Vec<Detection>, ToolError> {
        self.check_source(patch)?;
        if name.trim().is_empty() {
            return Err(ToolError::InvalidArgument(
                "find needs a non-empty name".into(),
            ));
        }
        Ok(self
            .matches(patch, name)
            .into_iter()
            .filter_map(|(obj, score)| {
                let clamped = obj.bbox.intersection(&patch.bbox)?;
                Some(Detection {
                    patch: patch.derive(clamped, format!("find({:?})", name)),
                    score,
                    label: obj.name.clone(),
                })
            })
            .collect())
    }

    fn find_part(&self, patch: &ImagePatch, part_name: &str) -> Result<Vec<Detection>, ToolError> {
        self.check_source(patch)?;
        if part_name.trim().is_empty() {
            return Err(ToolError::InvalidArgument(
                "find_part needs a non-empty part name".into(),
            ));
        }
        let wanted = part_name.trim().to_lowercase();
        let mut out = Vec::new();
        for obj in self.scene.objects_by_id() {
            if !obj.bbox.intersects(&patch.bbox) {
                continue;
            }
            for part in obj.parts.iter().filter(|p| p.name.to_lowercase() == wanted) {
                if let Some(clamped) = part.bbox.intersection(&patch.bbox) {
                    out.push(Detection {
                        patch: patch.derive(clamped, format!("find_part({:?})", part_name)),
                        score: 1.0,
                        label: part.name.clone(),
                    });
                }
            }
        }
        Ok(out)
    }

    fn regions(&self) -> Vec<Region<'_>> {
        let mut regions = Vec::new();
        for obj in self.scene.objects_by_id() {
            regions.push(Region {
                owner: obj,
                part: None,
                bbox: obj.bbox,
                grasps: &obj.grasps,
            });
            for (i, part) in obj.parts.iter().enumerate() {
                regions.push(Region {
                    owner: obj,
                    part: Some(i),
                    bbox: part.bbox,
                    grasps: &part.grasps,
                });
            }
        }
        regions
    }

    fn dominant_region(&self, bbox: &BBox) -> Option<Region<'_>> {
        let mut best: Option<(f64, Region<'_>)> = None;
        for region in self.regions() {
            let iou = region.bbox.iou(bbox);
            if iou > 0.0 && best.as_ref().is_none_or(|(b, _)| iou > *b) {
                best = Some((iou, region));
            }
        }
        best.map(|(_, r)| r)
    }

    fn dominant_object(&self, bbox: &BBox) -> Option<&SceneObject> {
        let mut best: Option<(f64, &SceneObject)> = None;
        for obj in self.scene.objects_by_id() {
            let iou = obj.bbox.iou(bbox);
            if iou > 0.0 && best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, obj));
            }
        }
        best.map(|(_, o)| o)
    }

    fn jitter_rng(&self, owner: u32, part: Option<usize>, index: usize) -> ChaCha8Rng {
        let part_key = part.map_or(0u64, |p| p as u64 + 1);
        let key = self.config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ ((owner as u64) << 40)
            ^ (part_key << 20)
            ^ index as u64;
        ChaCha8Rng::seed_from_u64(key)
    }

    fn grasp_detection(&self, patch: &ImagePatch) -> Result<Vec<GraspRect>, ToolError> {
        self.check_source(patch)?;
        let Some(region) = self.dominant_region(&patch.bbox) else {
            return Ok(Vec::new());
        };
        let (ec, et) = (self.config.noise_center, self.config.noise_angle);
        let mut grasps = Vec::with_capacity(region.grasps.len());
        for (i, g) in region.grasps.iter().enumerate() {
            let mut out = *g;
            if ec > 0.0 || et > 0.0 {
                let mut rng = self.jitter_rng(region.owner.id, region.part, i);
                let dx = if ec > 0.0 {
                    rng.random_range(-ec..=ec)
                } else {
                    0.0
                };
                let dy = if ec > 0.0 {
                    rng.random_range(-ec..=ec)
                } else {
                    0.0
                };
                let dt = if et > 0.0 {
                    rng.random_range(-et..=et)
                } else {
                    0.0
                };
                out = out.jittered(dx, dy, dt);
            }
            if out.score().is_none() {
                out = out.rescored(Some(1.0)).expect("1.0 is a valid score");
            }
            grasps.push(out);
        }
        grasps.sort_by(|a, b| {
            b.score()
                .unwrap_or(1.0)
                .total_cmp(&a.score().unwrap_or(1.0))
        });
        Ok(grasps)
    }

    fn verify_property(
        &self,
        patch: &ImagePatch,
        name: &str,
        property: &str,
    ) -> Result<bool, ToolError> {
        self.check_source(patch)?;
        let (obj, _) = self
            .matches(patch, name)
            .into_iter()
            .next()
            .ok_or_else(|| ToolError::NoSuchObject(name.to_string()))?;
        let prop = property.trim().to_lowercase();
        Ok(obj.attributes.values().any(|v| v.to_lowercase() == prop)
            || obj.affordances.iter().any(|a| a.to_lowercase() == prop))
    }

    fn best_image_match(
        &self,
        patches: &[ImagePatch],
        content: &str,
    ) -> Result<ImagePatch, ToolError> {
        if patches.is_empty() {
            return Err(ToolError::InvalidArgument(
                "best_image_match needs at least one patch".into(),
            ));
        }
        let tokens: Vec<String> = content.split_whitespace().map(str::to_lowercase).collect();
        let mut best: Option<(usize, &ImagePatch)> = None;
        for patch in patches {
            self.check_source(patch)?;
            let score = match self.dominant_object(&patch.bbox) {
                Some(obj) => {
                    let vocab = vocabulary(obj);
                    tokens.iter().filter(|t| vocab.contains(t.as_str())).count()
                }
                None => 0,
            };
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, patch));
            }
        }
        let (_, patch) = best.expect("non-empty patch list");
        Ok(patch.derive(patch.bbox, format!("best_image_match({:?})", content)))
    }

    /// Point depth: the nearest object whose bbox contains the point.
    fn point_depth(&self, p: Point) -> f64 {
        self.scene
            .objects
            .iter()
            .filter(|o| o.bbox.contains(p))
            .map(|o| o.depth)
            .min_by(f64::total_cmp)
            .unwrap_or(self.scene.background_depth)
    }

    fn compute_depth(&self, patch: &ImagePatch) -> Result<f64, ToolError> {
        self.check_source(patch)?;
        let b = patch.bbox;
        let (sx, sy) = (
            b.width() / DEPTH_GRID as f64,
            b.height() / DEPTH_GRID as f64,
        );
        let mut samples = Vec::with_capacity(DEPTH_GRID * DEPTH_GRID);
        for i in 0..DEPTH_GRID {
            for j in 0..DEPTH_GRID {
                let p = Point::new(
                    b.left + (i as f64 + 0.5) * sx,
                    b.top + (j as f64 + 0.5) * sy,
                );
                samples.push(self.point_depth(p));
            }
        }
        samples.sort_by(f64::total_cmp);
        let mid = samples.len() / 2;
        Ok((samples[mid - 1] + samples[mid]) / 2.0)
    }

    fn masks(&self, patch: &ImagePatch, name: &str) -> Result<ToolOutput, ToolError> {
        self.check_source(patch)?;
        self.matches(patch, name)
            .into_iter()
            .next()
            .map(|(obj, _)| ToolOutput::Mask(obj.mask.clone()))
            .ok_or_else(|| ToolError::NoSuchObject(name.to_string()))
    }

    fn llm_query(&self, question: &str, patch: Option<&ImagePatch>) -> Result<String, ToolError> {
        if let Some(p) = patch {
            self.check_source(p)?;
        }
        let key = normalize_question(question);
        let objects = self
            .scene
            .objects_by_id()
            .into_iter()
            .filter(|o| patch.is_none_or(|p| o.bbox.intersects(&p.bbox)));
        for obj in objects {
            if let Some(answer) = lookup(&obj.knowledge, &key) {
                return Ok(answer);
            }
        }
        Ok(lookup(&self.scene.knowledge, &key).unwrap_or_else(|| "unknown".to_string()))
    }
}

fn vocabulary(obj: &SceneObject) -> BTreeSet<String> {
    std::iter::once(&obj.name)
        .chain(&obj.synonyms)
        .chain(obj.attributes.values())
        .flat_map(|s| {
            s.split_whitespace()
                .map(str::to_lowercase)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Lowercase, trimmed, single-spaced, without trailing `?`/`.`.
pub fn normalize_question(q: &str) -> String {
    let words: Vec<_> = q.split_whitespace().collect();
    words
        .join(" ")
        .trim_end_matches(['?', '.', '!'])
        .trim()
        .to_lowercase()
}

fn lookup(map: &std::collections::BTreeMap<String, String>, key: &str) -> Option<String> {
    map.iter()
        .find(|(k, _)| normalize_question(k) == key)
        .map(|(_, v)| v.clone())
}

impl ToolBackend for MockTools {
    fn name(&self) -> &str {
        "mock"
    }

    fn call(&self, call: &ToolCall) -> Result<ToolOutput, ToolError> {
        match call {
            ToolCall::Find { patch, name } => self.find(patch, name).map(ToolOutput::Detections),
            ToolCall::FindPart { patch, part_name } => {
                self.find_part(patch, part_name).map(ToolOutput::Detections)
            }
            ToolCall::GraspDetection { patch } => {
                self.grasp_detection(patch).map(ToolOutput::Grasps)
            }
            ToolCall::Exists { patch, name } => self
                .find(patch, name)
                .map(|d| ToolOutput::Bool(!d.is_empty())),
            ToolCall::VerifyProperty {
                patch,
                name,
                property,
            } => self
                .verify_property(patch, name, property)
                .map(ToolOutput::Bool),
            ToolCall::BestImageMatch { patches, content } => self
                .best_image_match(patches, content)
                .map(ToolOutput::Patch),
            ToolCall::ComputeDepth { patch } => self.compute_depth(patch).map(ToolOutput::Number),
            ToolCall::Masks { patch, name } => self.masks(patch, name),
            ToolCall::LlmQuery { question, patch } => self
                .llm_query(question, patch.as_ref())
                .map(ToolOutput::Text),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::grasp_success;

    fn tools(scene: Scene, config: MockConfig) -> MockTools {
        MockTools::new(Arc::new(scene), config)
    }

    #[test]
    fn find_bottles_in_id_order() {
        let t = tools(fixtures::three_bottles(), MockConfig::noiseless(1));
        let image = t.scene().full_patch();
        let found = t.find(&image, "bottle").unwrap();
        assert_eq!(found.len(), 3);
        let lefts: Vec<_> = found.iter().map(|d| d.patch.bbox.left).collect();
        let ids: Vec<_> = lefts
            .iter()
            .map(|l| {
                t.scene()
                    .objects
                    .iter()
                    .find(|o| o.bbox.left == *l)
                    .unwrap()
                    .id
            })
            .collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert!(t.find(&image, "unicorn").unwrap().is_empty());
        assert!(t.find(&image, "  ").is_err());
    }

    #[test]
    fn synonym_scores_lower() {
        let t = tools(fixtures::kitchen(), MockConfig::noiseless(1));
        let image = t.scene().full_patch();
        let found = t.find(&image, "cup").unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].score, 0.8);
        assert_eq!(found[0].label, "mug");
        assert_eq!(t.find(&image, "MUG").unwrap()[0].score, 1.0);
    }

    #[test]
    fn find_clamps_to_patch() {
        let t = tools(fixtures::three_bottles(), MockConfig::noiseless(1));
        let image = t.scene().full_patch();
        let b = t.scene().object(0).unwrap().bbox;
        let half = image.derive(BBox::new(b.left, b.top, b.right, b.center().y), "crop");
        let found = t.find(&half, "bottle").unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].patch.bbox, half.bbox);
    }

    #[test]
    fn find_part_examples() {
        let t = tools(fixtures::kitchen(), MockConfig::noiseless(1));
        let image = t.scene().full_patch();
        let mug = t.find(&image, "mug").unwrap().remove(0);
        assert_eq!(t.find_part(&mug.patch, "handle").unwrap().len(), 1);
        assert!(t.find_part(&mug.patch, "wheel").unwrap().is_empty());
        // knife and mug both have handles
        let handles = t.find_part(&image, "handle").unwrap();
        assert_eq!(handles.len(), 2);
        let mug_handle = t
            .scene()
            .object(fixtures::KITCHEN_MUG)
            .unwrap()
            .part("handle")
            .unwrap()
            .bbox;
        assert_eq!(handles[0].patch.bbox, mug_handle);
    }

    #[test]
    fn noiseless_grasps_are_ground_truth() {
        let t = tools(fixtures::three_bottles(), MockConfig::noiseless(9));
        let obj = t.scene().object(1).unwrap().clone();
        let patch = t.scene().full_patch().derive(obj.bbox, "crop");
        assert_eq!(t.grasp_detection(&patch).unwrap(), obj.grasps);
    }

    #[test]
    fn empty_region_has_no_grasps() {
        let t = tools(fixtures::three_bottles(), MockConfig::default());
        let patch = t
            .scene()
            .full_patch()
            .derive(BBox::new(0.0, 0.0, 5.0, 5.0), "crop");
        assert!(t.grasp_detection(&patch).unwrap().is_empty());
    }

    #[test]
    fn part_patch_selects_part_grasps() {
        let t = tools(fixtures::kitchen(), MockConfig::noiseless(0));
        let knife = t.scene().object(fixtures::KITCHEN_KNIFE).unwrap();
        let handle = knife.part("handle").unwrap().clone();
        let patch = t.scene().full_patch().derive(handle.bbox, "crop");
        assert_eq!(t.grasp_detection(&patch).unwrap(), handle.grasps);
    }

    #[test]
    fn default_noise_stays_within_success_thresholds() {
        for seed in 0..20 {
            let t = tools(
                fixtures::kitchen(),
                MockConfig {
                    seed,
                    ..MockConfig::default()
                },
            );
            for obj in &t.scene().objects {
                let patch = t.scene().full_patch().derive(obj.bbox, "crop");
                let noisy = t.grasp_detection(&patch).unwrap();
                assert_eq!(noisy.len(), obj.grasps.len());
                for g in &noisy {
                    assert!(
                        grasp_success(g, &obj.grasps).unwrap(),
                        "seed {seed} object {}",
                        obj.id
                    );
                }
            }
        }
    }

    #[test]
    fn noise_is_deterministic() {
        let a = tools(fixtures::kitchen(), MockConfig::default());
        let b = tools(fixtures::kitchen(), MockConfig::default());
        let patch = a
            .scene()
            .full_patch()
            .derive(a.scene().objects[0].bbox, "crop");
        assert_eq!(
            a.grasp_detection(&patch).unwrap(),
            b.grasp_detection(&patch).unwrap()
        );
        let c = tools(
            fixtures::kitchen(),
            MockConfig {
                seed: 7,
                ..MockConfig::default()
            },
        );
        assert_ne!(
            a.grasp_detection(&patch).unwrap(),
            c.grasp_detection(&patch).unwrap()
        );
    }

    #[test]
    fn verify_property_examples() {
        let t = tools(fixtures::kitchen(), MockConfig::default());
        let image = t.scene().full_patch();
        assert!(t.verify_property(&image, "mug", "red").unwrap());
        assert!(t.verify_property(&image, "mug", "RED").unwrap());
        assert!(!t.verify_property(&image, "mug", "blue").unwrap());
        assert!(t.verify_property(&image, "knife", "cut").unwrap());
        assert_eq!(
            t.verify_property(&image, "unicorn", "red"),
            Err(ToolError::NoSuchObject("unicorn".into()))
        );
    }

    #[test]
    fn best_image_match_examples() {
        let t = tools(fixtures::kitchen(), MockConfig::default());
        let image = t.scene().full_patch();
        let mug = t.find(&image, "mug").unwrap().remove(0).patch;
        let tissue = t.find(&image, "tissue box").unwrap().remove(0).patch;
        let pick = t
            .best_image_match(&[mug.clone(), tissue.clone()], "blue box")
            .unwrap();
        assert_eq!(pick.bbox, tissue.bbox);
        let tie = t
            .best_image_match(&[mug.clone(), tissue.clone()], "zebra")
            .unwrap();
        assert_eq!(tie.bbox, mug.bbox);
        assert_eq!(
            t.best_image_match(std::slice::from_ref(&tissue), "red")
                .unwrap()
                .bbox,
            tissue.bbox
        );
        assert!(t.best_image_match(&[], "red").is_err());
    }

    #[test]
    fn depth_background_and_object() {
        let t = tools(fixtures::three_bottles(), MockConfig::default());
        let bg = t
            .scene()
            .full_patch()
            .derive(BBox::new(0.0, 0.0, 40.0, 40.0), "crop");
        assert_eq!(t.compute_depth(&bg).unwrap(), t.scene().background_depth);
        let obj = t.scene().object(2).unwrap();
        let inner = t
            .scene()
            .full_patch()
            .derive(obj.bbox.inflate(-5.0), "crop");
        assert_eq!(t.compute_depth(&inner).unwrap(), obj.depth);
    }

    #[test]
    fn masks_examples() {
        let t = tools(fixtures::three_bottles(), MockConfig::default());
        let image = t.scene().full_patch();
        // two bottles match: lowest id wins
        assert_eq!(
            t.masks(&image, "bottle").unwrap(),
            ToolOutput::Mask(t.scene().object(0).unwrap().mask.clone())
        );
        assert!(matches!(
            t.masks(&image, "unicorn"),
            Err(ToolError::NoSuchObject(_))
        ));
    }

    #[test]
    fn llm_query_lookups() {
        let t = tools(fixtures::kitchen(), MockConfig::default());
        assert_eq!(t.llm_query("Kleenex", None).unwrap(), "tissue box");
        assert_eq!(t.llm_query("  kleenex? ", None).unwrap(), "tissue box");
        assert_eq!(
            t.llm_query("what is a flux capacitor", None).unwrap(),
            "unknown"
        );
        assert_eq!(
            t.llm_query("Kleenex", None).unwrap(),
            t.llm_query("Kleenex", None).unwrap()
        );
        // scene-level knowledge
        assert_eq!(t.llm_query("what can cut", None).unwrap(), "knife");
    }

    #[test]
    fn foreign_patches_are_rejected() {
        let t = tools(fixtures::kitchen(), MockConfig::default());
        let other = fixtures::three_bottles().full_patch();
        assert!(matches!(
            t.find(&other, "mug"),
            Err(ToolError::InvalidArgument(_))
        ));
    }
}

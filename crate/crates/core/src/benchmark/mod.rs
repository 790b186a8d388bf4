//! Synthetic referring-expression benchmark: suite generation, storage,
//! a single-pass baseline and the evaluator.

mod evaluate;
mod generate;

pub use evaluate::{
    evaluate, export_report, harmonic_mean, single_pass_baseline, CaseRecord, CategoryStats,
    EvalConfig, EvalReport, ExportFormat, Runner,
};
pub use generate::{generate_suite, MIN_AXIS_SEPARATION, MIN_RELATIONAL_MARGIN};

use crate::geometry::GraspRect;
use crate::lexicon::{Lexicon, LexiconError};
use crate::scene::{load_scene, Scene, SceneError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub const SUITE_VERSION: &str = "suite.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Direct,
    Attribute,
    SpatialOrdinal,
    Relational,
    Affordance,
    Part,
    Knowledge,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Direct,
        Category::Attribute,
        Category::SpatialOrdinal,
        Category::Relational,
        Category::Affordance,
        Category::Part,
        Category::Knowledge,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Direct => "direct",
            Category::Attribute => "attribute",
            Category::SpatialOrdinal => "spatial_ordinal",
            Category::Relational => "relational",
            Category::Affordance => "affordance",
            Category::Part => "part",
            Category::Knowledge => "knowledge",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// One benchmark query with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCase {
    pub case_id: u32,
    pub query: String,
    pub category: Category,
    pub target_ids: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_part: Option<String>,
    pub truths: Vec<GraspRect>,
}

impl QueryCase {
    pub fn validate(&self, scene: &Scene) -> Result<(), String> {
        if self.query.trim().is_empty() {
            return Err(format!("case {}: empty query", self.case_id));
        }
        if self.target_ids.is_empty() {
            return Err(format!("case {}: no target ids", self.case_id));
        }
        if self.truths.is_empty() {
            return Err(format!("case {}: no truths", self.case_id));
        }
        let mut allowed = Vec::new();
        for id in &self.target_ids {
            let obj = scene
                .object(*id)
                .ok_or_else(|| format!("case {}: target {id} is not in the scene", self.case_id))?;
            match &self.target_part {
                Some(p) => {
                    let part = obj.part(p).ok_or_else(|| {
                        format!("case {}: object {id} has no part {p}", self.case_id)
                    })?;
                    allowed.extend(part.grasps.iter().copied());
                }
                None => allowed.extend(obj.grasps.iter().copied()),
            }
        }
        match self.truths.iter().find(|t| !allowed.contains(t)) {
            Some(t) => Err(format!(
                "case {}: truth {t} is not a grasp of the target",
                self.case_id
            )),
            None => Ok(()),
        }
    }
}

fn default_mix() -> BTreeMap<Category, f64> {
    BTreeMap::from([
        (Category::Direct, 0.10),
        (Category::Attribute, 0.15),
        (Category::SpatialOrdinal, 0.20),
        (Category::Relational, 0.10),
        (Category::Affordance, 0.20),
        (Category::Part, 0.15),
        (Category::Knowledge, 0.10),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub n_cases: usize,
    /// Inclusive range of objects per scene.
    pub objects_per_scene: [usize; 2],
    /// Relative weight of each category.
    pub mix: BTreeMap<Category, f64>,
    /// Lexicon file; the built-in lexicon when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_cases: 200,
            objects_per_scene: [5, 15],
            mix: default_mix(),
            lexicon: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if self.n_cases == 0 {
            return bad("n_cases must be positive");
        }
        let [lo, hi] = self.objects_per_scene;
        if lo == 0 || lo > hi {
            return bad("objects_per_scene must be a non-empty range of positive counts");
        }
        if hi > 40 {
            return bad("at most 40 objects fit in a scene");
        }
        if self.mix.values().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("mix weights must be non-negative");
        }
        if self.mix.values().sum::<f64>() <= 0.0 {
            return bad("mix weights must not all be zero");
        }
        Ok(())
    }

    /// Cases per category by largest remainder; ties go to the earlier category.
    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let total: f64 = self.mix.values().sum();
        let quotas: Vec<(Category, f64)> = self
            .mix
            .iter()
            .map(|(c, w)| (*c, w / total * self.n_cases as f64))
            .collect();
        let mut counts: BTreeMap<Category, usize> = quotas
            .iter()
            .map(|(c, q)| (*c, q.floor() as usize))
            .collect();
        let assigned: usize = counts.values().sum();
        let mut order: Vec<(Category, f64)> =
            quotas.iter().map(|(c, q)| (*c, q - q.floor())).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (c, _) in order.into_iter().take(self.n_cases - assigned) {
            *counts.get_mut(&c).expect("category present") += 1;
        }
        counts.retain(|_, n| *n > 0);
        counts
    }

    pub fn load_lexicon(&self) -> Result<Lexicon, BenchError> {
        match &self.lexicon {
            Some(p) => Ok(Lexicon::load(p)?),
            None => Ok(Lexicon::builtin().clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub scene: Scene,
    pub case: QueryCase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSuite {
    pub seed: u64,
    pub config: SuiteConfig,
    pub cases: Vec<SuiteCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    scene: String,
    #[serde(flatten)]
    case: QueryCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: String,
    seed: u64,
    config: SuiteConfig,
    category_counts: BTreeMap<Category, usize>,
    cases: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot generate a {category} case: {reason}")]
    Infeasible { category: Category, reason: String },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed suite: {0}")]
    Malformed(String),
    #[error("scene {path}: {source}")]
    Scene {
        path: String,
        #[source]
        source: SceneError,
    },
    #[error("evaluation failed: {0}")]
    Eval(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn scene_file(case_id: u32) -> String {
    format!("scenes/case_{case_id:04}.json")
}

impl BenchmarkSuite {
    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut counts = BTreeMap::new();
        for c in &self.cases {
            *counts.entry(c.case.category).or_insert(0) += 1;
        }
        counts
    }

    fn manifest(&self) -> Manifest {
        Manifest {
            version: SUITE_VERSION.to_string(),
            seed: self.seed,
            config: self.config.clone(),
            category_counts: self.category_counts(),
            cases: self
                .cases
                .iter()
                .map(|c| ManifestEntry {
                    scene: scene_file(c.case.case_id),
                    case: c.case.clone(),
                })
                .collect(),
        }
    }

    /// Canonical manifest text.
    pub fn manifest_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.manifest())
            .expect("manifest serialization is infallible");
        text.push('\n');
        text
    }

    /// Writes `dir/manifest.json` and one scene file per case.
    pub fn save(&self, dir: &Path) -> Result<(), BenchError> {
        let scenes = dir.join("scenes");
        std::fs::create_dir_all(&scenes).map_err(io_err(&scenes))?;
        for c in &self.cases {
            let path = dir.join(scene_file(c.case.case_id));
            c.scene.save(&path).map_err(io_err(&path))?;
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, self.manifest_json()).map_err(io_err(&path))
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| BenchError::Malformed(e.to_string()))?;
        if manifest.version != SUITE_VERSION {
            return Err(BenchError::Malformed(format!(
                "unsupported version {:?}",
                manifest.version
            )));
        }
        let mut cases = Vec::with_capacity(manifest.cases.len());
        for entry in manifest.cases {
            let scene_path = dir.join(&entry.scene);
            let scene = load_scene(&scene_path).map_err(|source| BenchError::Scene {
                path: scene_path.display().to_string(),
                source,
            })?;
            entry.case.validate(&scene).map_err(BenchError::Malformed)?;
            cases.push(SuiteCase {
                scene,
                case: entry.case,
            });
        }
        if cases.is_empty() {
            return Err(BenchError::Malformed("suite has no cases".into()));
        }
        Ok(Self {
            seed: manifest.seed,
            config: manifest.config,
            cases,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_counts() {
        let cfg = SuiteConfig::default();
        let counts = cfg.category_counts();
        assert_eq!(counts.values().sum::<usize>(), 200);
        assert_eq!(counts[&Category::SpatialOrdinal], 40);
        assert_eq!(counts[&Category::Affordance], 40);
        assert_eq!(counts[&Category::Direct], 20);

        let cfg = SuiteConfig {
            n_cases: 10,
            mix: BTreeMap::from([
                (Category::Direct, 1.0),
                (Category::Part, 1.0),
                (Category::Knowledge, 1.0),
            ]),
            ..Default::default()
        };
        let counts = cfg.category_counts();
        assert_eq!(counts[&Category::Direct], 4);
        assert_eq!(counts[&Category::Part], 3);
        assert_eq!(counts[&Category::Knowledge], 3);
    }

    #[test]
    fn category_names_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
    }

    #[test]
    fn config_validation() {
        assert!(SuiteConfig::default().validate().is_ok());
        let bad = SuiteConfig {
            objects_per_scene: [6, 3],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SuiteConfig {
            mix: BTreeMap::from([(Category::Direct, 0.0)]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

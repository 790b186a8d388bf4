//! Object vocabulary shared by the benchmark generator and the scripted
//! agents: names, attributes, part layouts, affordances and risk flags.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

pub const LEXICON_VERSION: &str = "lexicon.v1";

const BUILTIN: &str = include_str!("../data/lexicon.v1.json");

/// Smallest allowed side of a generated part, in pixels.
pub const MIN_PART_SIDE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lexicon: {0}")]
    Parse(String),
    #[error("invalid lexicon: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub name: String,
    /// `[left, top, right, bottom]` as fractions of the object's box.
    pub region: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub category: String,
    pub colors: Vec<String>,
    #[serde(default)]
    pub materials: Vec<String>,
    #[serde(default)]
    pub shape: Option<String>,
    #[serde(default)]
    pub affordances: Vec<String>,
    /// Inclusive pixel range.
    pub width: [u32; 2],
    pub height: [u32; 2],
    #[serde(default)]
    pub parts: Vec<PartSpec>,
    #[serde(default)]
    pub knowledge: BTreeMap<String, String>,
    #[serde(default)]
    pub fragile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: String,
    pub objects: Vec<ObjectSpec>,
    /// Verb to candidate object names, in preference order.
    pub affordances: BTreeMap<String, Vec<String>>,
    /// Risky part name to the safe part to grasp instead.
    pub risky_parts: BTreeMap<String, String>,
    pub ordinals: Vec<String>,
    pub stopwords: Vec<String>,
}

impl Lexicon {
    /// The lexicon compiled into the crate.
    pub fn builtin() -> &'static Lexicon {
        static LEXICON: OnceLock<Lexicon> = OnceLock::new();
        LEXICON.get_or_init(|| Lexicon::from_json_str(BUILTIN).expect("bundled lexicon is valid"))
    }

    pub fn from_json_str(text: &str) -> Result<Self, LexiconError> {
        let lex: Lexicon =
            serde_json::from_str(text).map_err(|e| LexiconError::Parse(e.to_string()))?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn object(&self, name: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// 1-based position of an ordinal word.
    pub fn ordinal_rank(&self, word: &str) -> Option<usize> {
        self.ordinals.iter().position(|o| o == word).map(|i| i + 1)
    }

    pub fn ordinal_word(&self, rank: usize) -> Option<&str> {
        rank.checked_sub(1)
            .and_then(|i| self.ordinals.get(i))
            .map(String::as_str)
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.iter().any(|s| s == word)
    }

    pub fn safe_alternative(&self, part: &str) -> Option<&str> {
        self.risky_parts.get(part).map(String::as_str)
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        let bad = |m: String| Err(LexiconError::Invalid(m));
        if self.version != LEXICON_VERSION {
            return bad(format!("unsupported version {:?}", self.version));
        }
        for o in &self.objects {
            if o.colors.is_empty() {
                return bad(format!("{} has no colors", o.name));
            }
            if o.width[0] == 0
                || o.width[0] > o.width[1]
                || o.height[0] == 0
                || o.height[0] > o.height[1]
            {
                return bad(format!("{} has an empty size range", o.name));
            }
            for p in &o.parts {
                let [l, t, r, b] = p.region;
                if !(0.0 <= l && l < r && r <= 1.0 && 0.0 <= t && t < b && b <= 1.0) {
                    return bad(format!("{} part {} has a bad region", o.name, p.name));
                }
                let min_side = ((r - l) * o.width[0] as f64).min((b - t) * o.height[0] as f64);
                if min_side < MIN_PART_SIDE {
                    return bad(format!(
                        "{} part {} can be thinner than {MIN_PART_SIDE}px",
                        o.name, p.name
                    ));
                }
            }
        }
        for (verb, names) in &self.affordances {
            if let Some(n) = names.iter().find(|n| self.object(n).is_none()) {
                return bad(format!("affordance {verb} names unknown object {n}"));
            }
        }
        Ok(())
    }
}

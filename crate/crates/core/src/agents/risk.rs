//! Safety judgements about a proposed grasp.

use crate::geometry::GraspRect;
use crate::lexicon::Lexicon;
use crate::scene::Scene;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Risk {
    Fragile {
        object: String,
    },
    HarmfulPart {
        object: String,
        part: String,
        safe: Option<String>,
    },
}

impl fmt::Display for Risk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Risk::Fragile { object } => write!(f, "the {object} is fragile"),
            Risk::HarmfulPart { object, part, safe } => {
                write!(f, "grasp on the {part} of the {object} is harmful")?;
                match safe {
                    Some(s) => write!(f, "; grasp the {s} instead"),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Judges the grasp by the object (lowest id) and part under its center.
pub fn assess(scene: &Scene, grasp: &GraspRect, lexicon: &Lexicon) -> Option<Risk> {
    let c = grasp.center();
    let obj = scene
        .objects_by_id()
        .into_iter()
        .find(|o| o.bbox.contains(c))?;
    let fragile = obj.attributes.values().any(|v| v == "fragile")
        || lexicon.object(&obj.name).is_some_and(|s| s.fragile);
    if fragile {
        return Some(Risk::Fragile {
            object: obj.name.clone(),
        });
    }
    let part = obj.parts.iter().find(|p| p.bbox.contains(c))?;
    let safe = lexicon.safe_alternative(&part.name)?;
    Some(Risk::HarmfulPart {
        object: obj.name.clone(),
        part: part.name.clone(),
        safe: obj.part(safe).map(|p| p.name.clone()),
    })
}

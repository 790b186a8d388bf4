use super::{BenchError, BenchmarkSuite, Category, QueryCase, SuiteCase, SuiteConfig};
use crate::fixtures::{
    center_grasp, default_workspace, BACKGROUND_DEPTH, IMAGE_HEIGHT, IMAGE_WIDTH,
};
use crate::geometry::{GraspRect, Point, Polygon};
use crate::lexicon::{Lexicon, ObjectSpec};
use crate::scene::{BBox, Part, Scene, SceneObject};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Minimum center separation, along the sort axis, between same-name objects
/// in ordinal cases.
pub const MIN_AXIS_SEPARATION: f64 = 5.0;
/// Minimum lead of the closest object over the runner-up in relational cases.
pub const MIN_RELATIONAL_MARGIN: f64 = 10.0;

const PLACEMENT_ATTEMPTS: usize = 1000;
const SCENE_ATTEMPTS: usize = 200;
const GAP: f64 = 4.0;
const AREA: (f64, f64, f64, f64) = (40.0, 40.0, 600.0, 440.0);
const RISKY_SCORE: f64 = 0.95;
const SAFE_SCORE: f64 = 0.9;

fn pick<'a, T, R: Rng>(rng: &mut R, items: &'a [T]) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[rng.random_range(0..items.len())])
}

fn shuffle<T, R: Rng>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// `k` distinct elements in random order.
fn sample<T: Clone, R: Rng>(rng: &mut R, items: &[T], k: usize) -> Vec<T> {
    let mut v = items.to_vec();
    shuffle(rng, &mut v);
    v.truncate(k);
    v
}

fn case_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (index as u64)
            .wrapping_add(1)
            .wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn octagon(b: BBox) -> Polygon {
    let c = 0.2 * b.width().min(b.height());
    let (l, t, r, bt) = (b.left, b.top, b.right, b.bottom);
    Polygon::new(vec![
        Point::new(l + c, t),
        Point::new(r - c, t),
        Point::new(r, t + c),
        Point::new(r, bt - c),
        Point::new(r - c, bt),
        Point::new(l + c, bt),
        Point::new(l, bt - c),
        Point::new(l, t + c),
    ])
    .expect("octagon of a valid box")
}

fn separated(a: &BBox, b: &BBox) -> bool {
    a.right + GAP <= b.left
        || b.right + GAP <= a.left
        || a.bottom + GAP <= b.top
        || b.bottom + GAP <= a.top
}

fn try_place<R: Rng>(rng: &mut R, w: f64, h: f64, placed: &[BBox]) -> Option<BBox> {
    let (x0, y0, x1, y1) = AREA;
    if x0 + w > x1 || y0 + h > y1 {
        return None;
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let l = rng.random_range(x0 as u32..=(x1 - w) as u32) as f64;
        let t = rng.random_range(y0 as u32..=(y1 - h) as u32) as f64;
        let b = BBox::new(l, t, l + w, t + h);
        if placed.iter().all(|p| separated(p, &b)) {
            return Some(b);
        }
    }
    None
}

/// Rejection sampling at a random size, then once more at the minimum size.
fn place<R: Rng>(rng: &mut R, spec: &ObjectSpec, placed: &[BBox]) -> Option<BBox> {
    let w = rng.random_range(spec.width[0]..=spec.width[1]) as f64;
    let h = rng.random_range(spec.height[0]..=spec.height[1]) as f64;
    try_place(rng, w, h, placed)
        .or_else(|| try_place(rng, spec.width[0] as f64, spec.height[0] as f64, placed))
}

struct Draft<'a> {
    spec: &'a ObjectSpec,
    color: String,
}

fn build_object(
    id: u32,
    draft: &Draft<'_>,
    bbox: BBox,
    depth: f64,
    lex: &Lexicon,
    material: &str,
) -> SceneObject {
    let spec = draft.spec;
    let mut attributes = BTreeMap::from([("color".to_string(), draft.color.clone())]);
    if !material.is_empty() {
        attributes.insert("material".into(), material.to_string());
    }
    if let Some(shape) = &spec.shape {
        attributes.insert("shape".into(), shape.clone());
    }
    if spec.fragile {
        attributes.insert("fragility".into(), "fragile".into());
    }
    let parts: Vec<Part> = spec
        .parts
        .iter()
        .map(|p| {
            let [l, t, r, b] = p.region;
            let pb = BBox::new(
                (bbox.left + l * bbox.width()).round(),
                (bbox.top + t * bbox.height()).round(),
                (bbox.left + r * bbox.width()).round(),
                (bbox.top + b * bbox.height()).round(),
            );
            let score = if lex.safe_alternative(&p.name).is_some() {
                RISKY_SCORE
            } else {
                SAFE_SCORE
            };
            Part {
                name: p.name.clone(),
                bbox: pb,
                grasps: vec![center_grasp(pb, score)],
            }
        })
        .collect();
    let grasps = if parts.is_empty() {
        vec![center_grasp(bbox, 1.0)]
    } else {
        parts
            .iter()
            .flat_map(|p| p.grasps.iter().copied())
            .collect()
    };
    SceneObject {
        id,
        name: spec.name.clone(),
        synonyms: spec.synonyms.clone(),
        category: spec.category.clone(),
        attributes,
        affordances: spec.affordances.clone(),
        bbox,
        mask: octagon(bbox),
        depth,
        parts,
        grasps,
        knowledge: spec.knowledge.clone(),
    }
}

/// Truth grasps for a whole-object target: the safe part when the object
/// has a risky one.
fn object_truths(obj: &SceneObject, lex: &Lexicon) -> (Option<String>, Vec<GraspRect>) {
    for p in &obj.parts {
        if let Some(safe) = lex.safe_alternative(&p.name).and_then(|s| obj.part(s)) {
            return (Some(safe.name.clone()), safe.grasps.clone());
        }
    }
    (None, obj.grasps.clone())
}

enum Plan {
    Single,
    Attribute { target: usize },
    Ordinal { rank: usize, dir: &'static str },
    Relational,
    Affordance { verb: String },
    Part { part: String, by_its: bool },
    Knowledge { brand: String },
}

fn try_case<R: Rng>(
    rng: &mut R,
    case_id: u32,
    category: Category,
    cfg: &SuiteConfig,
    lex: &Lexicon,
) -> Result<(Scene, QueryCase), String> {
    let [lo, hi] = cfg.objects_per_scene;
    let n_total = rng.random_range(lo..=hi);
    let eligible: Vec<&ObjectSpec> = lex.objects.iter().filter(|o| !o.fragile).collect();
    let color =
        |rng: &mut R, spec: &ObjectSpec| pick(rng, &spec.colors).cloned().unwrap_or_default();

    let mut core: Vec<Draft<'_>> = Vec::new();
    let mut excluded: BTreeSet<String> = BTreeSet::new();
    let plan = match category {
        Category::Direct | Category::SpatialOrdinal | Category::Relational => {
            let spec = *pick(rng, &eligible).ok_or("no eligible objects")?;
            excluded.insert(spec.name.clone());
            let count = match category {
                Category::Direct => 1,
                Category::SpatialOrdinal => {
                    rng.random_range(2..=4usize.min(lex.ordinals.len().max(2)))
                }
                _ => rng.random_range(2..=3usize),
            };
            for _ in 0..count {
                let c = color(rng, spec);
                core.push(Draft { spec, color: c });
            }
            match category {
                Category::Direct => Plan::Single,
                Category::SpatialOrdinal => {
                    let rank = rng.random_range(1..=count.min(lex.ordinals.len()));
                    let dir = *pick(rng, &["left", "right", "top", "bottom"]).expect("non-empty");
                    Plan::Ordinal { rank, dir }
                }
                _ => {
                    let others: Vec<&ObjectSpec> = eligible
                        .iter()
                        .copied()
                        .filter(|o| o.name != spec.name)
                        .collect();
                    let anchor = *pick(rng, &others).ok_or("no anchor candidates")?;
                    excluded.insert(anchor.name.clone());
                    let c = color(rng, anchor);
                    core.push(Draft {
                        spec: anchor,
                        color: c,
                    });
                    Plan::Relational
                }
            }
        }
        Category::Attribute => {
            let multi: Vec<&ObjectSpec> = eligible
                .iter()
                .copied()
                .filter(|o| o.colors.len() >= 2)
                .collect();
            let spec = *pick(rng, &multi).ok_or("no object has two colors")?;
            excluded.insert(spec.name.clone());
            let k = rng.random_range(2..=spec.colors.len().min(3));
            for c in sample(rng, &spec.colors, k) {
                core.push(Draft { spec, color: c });
            }
            Plan::Attribute {
                target: rng.random_range(0..k),
            }
        }
        Category::Affordance => {
            let verbs: Vec<&String> = lex
                .affordances
                .iter()
                .filter(|(_, names)| {
                    names
                        .iter()
                        .any(|n| lex.object(n).is_some_and(|o| !o.fragile))
                })
                .map(|(v, _)| v)
                .collect();
            let verb = (*pick(rng, &verbs).ok_or("no affordances")?).clone();
            let names: Vec<&String> = lex.affordances[&verb]
                .iter()
                .filter(|n| lex.object(n).is_some_and(|o| !o.fragile))
                .collect();
            let spec = lex
                .object(pick(rng, &names).expect("non-empty"))
                .expect("validated lexicon");
            excluded.extend(lex.affordances[&verb].iter().cloned());
            let c = color(rng, spec);
            core.push(Draft { spec, color: c });
            Plan::Affordance { verb }
        }
        Category::Part => {
            let with_parts: Vec<&ObjectSpec> = eligible
                .iter()
                .copied()
                .filter(|o| {
                    o.parts
                        .iter()
                        .any(|p| lex.safe_alternative(&p.name).is_none())
                })
                .collect();
            let spec = *pick(rng, &with_parts).ok_or("no object has a safe part")?;
            excluded.insert(spec.name.clone());
            let safe: Vec<&String> = spec
                .parts
                .iter()
                .map(|p| &p.name)
                .filter(|n| lex.safe_alternative(n).is_none())
                .collect();
            let part = (*pick(rng, &safe).expect("non-empty")).clone();
            let c = color(rng, spec);
            core.push(Draft { spec, color: c });
            Plan::Part {
                part,
                by_its: rng.random_bool(0.5),
            }
        }
        Category::Knowledge => {
            let known: Vec<&ObjectSpec> = eligible
                .iter()
                .copied()
                .filter(|o| !o.knowledge.is_empty())
                .collect();
            let spec = *pick(rng, &known).ok_or("no object carries knowledge")?;
            excluded.insert(spec.name.clone());
            let brands: Vec<&String> = spec.knowledge.keys().collect();
            let brand = (*pick(rng, &brands).expect("non-empty")).clone();
            let c = color(rng, spec);
            core.push(Draft { spec, color: c });
            Plan::Knowledge { brand }
        }
    };
    if core.len() > hi {
        return Err(format!(
            "needs {} objects but at most {hi} are allowed",
            core.len()
        ));
    }

    let fillers: Vec<&ObjectSpec> = lex
        .objects
        .iter()
        .filter(|o| !excluded.contains(&o.name))
        .collect();
    let mut drafts = core;
    let n_core = drafts.len();
    while drafts.len() < n_total.max(n_core) && !fillers.is_empty() {
        let spec = *pick(rng, &fillers).expect("non-empty");
        let c = color(rng, spec);
        drafts.push(Draft { spec, color: c });
    }

    let mut boxes: Vec<BBox> = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let b =
            place(rng, d.spec, &boxes).ok_or_else(|| format!("no room for a {}", d.spec.name))?;
        boxes.push(b);
    }
    let mut ids: Vec<u32> = (0..drafts.len() as u32).collect();
    shuffle(rng, &mut ids);
    let mut objects = Vec::with_capacity(drafts.len());
    for (i, d) in drafts.iter().enumerate() {
        let depth = rng.random_range(100..=600u32) as f64 / 100.0;
        let material = pick(rng, &d.spec.materials).cloned().unwrap_or_default();
        objects.push(build_object(ids[i], d, boxes[i], depth, lex, &material));
    }

    let target_idx;
    let mut query_part = None;
    let query = match &plan {
        Plan::Single => {
            target_idx = 0;
            format!("grasp the {}", drafts[0].spec.name)
        }
        Plan::Attribute { target } => {
            target_idx = *target;
            format!(
                "grasp the {} {}",
                drafts[*target].color, drafts[*target].spec.name
            )
        }
        Plan::Ordinal { rank, dir } => {
            let axis = |b: &BBox| {
                if matches!(*dir, "left" | "right") {
                    b.center().x
                } else {
                    b.center().y
                }
            };
            let mut order: Vec<usize> = (0..n_core).collect();
            order.sort_by(|a, b| axis(&boxes[*a]).total_cmp(&axis(&boxes[*b])));
            if matches!(*dir, "right" | "bottom") {
                order.reverse();
            }
            let gaps_ok = order
                .windows(2)
                .all(|w| (axis(&boxes[w[0]]) - axis(&boxes[w[1]])).abs() >= MIN_AXIS_SEPARATION);
            if !gaps_ok {
                return Err("same-name objects are too close along the sort axis".into());
            }
            target_idx = order[rank - 1];
            let name = &drafts[0].spec.name;
            if *rank == 1 && rng.random_bool(0.5) {
                format!("grasp the {dir}most {name}")
            } else {
                let ord = lex
                    .ordinal_word(*rank)
                    .ok_or("rank beyond the ordinal vocabulary")?;
                format!("grasp the {ord} {name} from the {dir}")
            }
        }
        Plan::Relational => {
            let anchor = boxes[n_core - 1].center();
            let mut dists: Vec<(f64, usize)> = (0..n_core - 1)
                .map(|i| (boxes[i].center().distance(&anchor), i))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0));
            if dists[1].0 - dists[0].0 < MIN_RELATIONAL_MARGIN {
                return Err("the closest object is not clearly closest".into());
            }
            target_idx = dists[0].1;
            let word = if rng.random_bool(0.5) {
                "closest"
            } else {
                "nearest"
            };
            format!(
                "grasp the {} {word} to the {}",
                drafts[0].spec.name,
                drafts[n_core - 1].spec.name
            )
        }
        Plan::Affordance { verb } => {
            target_idx = 0;
            format!("I need something to {verb}")
        }
        Plan::Part { part, by_its } => {
            target_idx = 0;
            query_part = Some(part.clone());
            let name = &drafts[0].spec.name;
            if *by_its {
                format!("grasp the {name} by its {part}")
            } else {
                format!("grasp the {part} of the {name}")
            }
        }
        Plan::Knowledge { brand } => {
            target_idx = 0;
            format!("grasp the {brand}")
        }
    };

    let target = &objects[target_idx];
    let (target_part, truths) = match query_part {
        Some(p) => {
            let grasps = target.part(&p).ok_or("part missing")?.grasps.clone();
            (Some(p), grasps)
        }
        None => object_truths(target, lex),
    };
    let case = QueryCase {
        case_id,
        query,
        category,
        target_ids: vec![target.id],
        target_part,
        truths,
    };
    objects.sort_by_key(|o| o.id);
    let scene = Scene::new(
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
        BACKGROUND_DEPTH,
        default_workspace(),
        BTreeMap::new(),
        objects,
    )
    .map_err(|e| e.to_string())?;
    case.validate(&scene)?;
    Ok((scene, case))
}

fn generate_case(
    index: usize,
    category: Category,
    cfg: &SuiteConfig,
    lex: &Lexicon,
    seed: u64,
) -> Result<SuiteCase, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, index));
    let mut reason = String::new();
    for _ in 0..SCENE_ATTEMPTS {
        match try_case(&mut rng, index as u32, category, cfg, lex) {
            Ok((scene, case)) => return Ok(SuiteCase { scene, case }),
            Err(r) => reason = r,
        }
    }
    Err(BenchError::Infeasible { category, reason })
}

/// Builds a suite; a pure function of `(config, seed)`.
pub fn generate_suite(config: &SuiteConfig, seed: u64) -> Result<BenchmarkSuite, BenchError> {
    config.validate()?;
    let lex = config.load_lexicon()?;
    let needs = |c: Category| match c {
        Category::SpatialOrdinal | Category::Attribute => 2,
        Category::Relational => 3,
        _ => 1,
    };
    for (c, _) in config.category_counts() {
        if needs(c) > config.objects_per_scene[1] {
            return Err(BenchError::Infeasible {
                category: c,
                reason: format!(
                    "needs at least {} objects per scene, the range allows {}",
                    needs(c),
                    config.objects_per_scene[1]
                ),
            });
        }
    }
    let mut categories: Vec<Category> = config
        .category_counts()
        .into_iter()
        .flat_map(|(c, n)| std::iter::repeat_n(c, n))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut rng, &mut categories);
    let cases = categories
        .into_iter()
        .enumerate()
        .map(|(i, c)| generate_case(i, c, config, &lex, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchmarkSuite {
        seed,
        config: config.clone(),
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(category: Category, n: usize) -> SuiteConfig {
        SuiteConfig {
            n_cases: n,
            mix: BTreeMap::from([(category, 1.0)]),
            ..Default::default()
        }
    }

    #[test]
    fn every_category_generates_valid_cases() {
        for c in Category::ALL {
            let suite = generate_suite(&small(c, 15), 3).unwrap();
            assert_eq!(suite.cases.len(), 15);
            for sc in &suite.cases {
                assert_eq!(sc.case.category, c);
                sc.case.validate(&sc.scene).unwrap();
                let n = sc.scene.objects.len();
                assert!((5..=15).contains(&n), "{n} objects");
                for (i, a) in sc.scene.objects.iter().enumerate() {
                    for b in &sc.scene.objects[i + 1..] {
                        assert!(!a.bbox.intersects(&b.bbox));
                    }
                }
            }
        }
    }

    #[test]
    fn direct_case_echoes_the_name() {
        let suite = generate_suite(&small(Category::Direct, 1), 7).unwrap();
        let sc = &suite.cases[0];
        let target = sc.scene.object(sc.case.target_ids[0]).unwrap();
        assert_eq!(sc.case.query, format!("grasp the {}", target.name));
        assert_eq!(
            sc.scene
                .objects
                .iter()
                .filter(|o| o.name == target.name)
                .count(),
            1
        );
    }

    #[test]
    fn ordinal_target_matches_brute_force_sort() {
        let suite = generate_suite(&small(Category::SpatialOrdinal, 30), 11).unwrap();
        let lex = Lexicon::builtin();
        for sc in &suite.cases {
            let q = &sc.case.query;
            let target = sc.scene.object(sc.case.target_ids[0]).unwrap();
            let mut same: Vec<_> = sc
                .scene
                .objects
                .iter()
                .filter(|o| o.name == target.name)
                .collect();
            let words: Vec<&str> = q.split(' ').collect();
            let (rank, dir) = if let Some(d) = words[2].strip_suffix("most") {
                (1, d)
            } else {
                (lex.ordinal_rank(words[2]).unwrap(), *words.last().unwrap())
            };
            let key = |o: &&SceneObject| match dir {
                "left" => o.bbox.center().x,
                "right" => -o.bbox.center().x,
                "top" => o.bbox.center().y,
                _ => -o.bbox.center().y,
            };
            same.sort_by(|a, b| key(a).total_cmp(&key(b)));
            assert_eq!(same[rank - 1].id, target.id, "{q}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SuiteConfig {
            n_cases: 20,
            ..Default::default()
        };
        let a = generate_suite(&cfg, 5).unwrap();
        let b = generate_suite(&cfg, 5).unwrap();
        assert_eq!(a.manifest_json(), b.manifest_json());
        for (x, y) in a.cases.iter().zip(&b.cases) {
            assert_eq!(x.scene.to_json_string(), y.scene.to_json_string());
        }
        let c = generate_suite(&cfg, 6).unwrap();
        assert_ne!(a.manifest_json(), c.manifest_json());
    }

    #[test]
    fn infeasible_config_names_the_category() {
        let cfg = SuiteConfig {
            objects_per_scene: [1, 2],
            ..small(Category::Relational, 3)
        };
        match generate_suite(&cfg, 1) {
            Err(BenchError::Infeasible { category, .. }) => {
                assert_eq!(category, Category::Relational)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

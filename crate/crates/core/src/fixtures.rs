//! Small hand-built scenes used by tests, examples and benches.

use crate::geometry::{GraspRect, Point, Polygon, Workspace};
use crate::scene::{BBox, Part, Scene, SceneObject};
use std::collections::BTreeMap;

pub const IMAGE_WIDTH: u32 = 640;
pub const IMAGE_HEIGHT: u32 = 480;
pub const BACKGROUND_DEPTH: f64 = 9.0;

pub const KITCHEN_MUG: u32 = 0;
pub const KITCHEN_KNIFE: u32 = 1;
pub const KITCHEN_PLANT: u32 = 2;
pub const KITCHEN_TISSUE: u32 = 3;
pub const KITCHEN_GLASS: u32 = 4;

/// The workspace used by generated scenes and most fixtures.
pub fn default_workspace() -> Workspace {
    Workspace::new(16.0, 16.0, 624.0, 464.0, 4.0).expect("static workspace is valid")
}

pub fn rect_mask(b: BBox) -> Polygon {
    Polygon::new(vec![
        Point::new(b.left, b.top),
        Point::new(b.left, b.bottom),
        Point::new(b.right, b.bottom),
        Point::new(b.right, b.top),
    ])
    .expect("bbox mask has positive area")
}

/// Centered grasp sized from the box's shorter side; the jaws close across
/// the shorter dimension.
pub fn center_grasp(b: BBox, score: f64) -> GraspRect {
    let m = b.width().min(b.height());
    let c = b.center();
    let theta = if b.width() <= b.height() { 0.0 } else { 90.0 };
    GraspRect::with_score(c.x, c.y, 0.6 * m, 0.3 * m, theta, Some(score))
        .expect("valid by construction")
}

pub fn object(id: u32, name: &str, category: &str, bbox: BBox, depth: f64) -> SceneObject {
    SceneObject {
        id,
        name: name.to_string(),
        synonyms: Vec::new(),
        category: category.to_string(),
        attributes: BTreeMap::new(),
        affordances: Vec::new(),
        bbox,
        mask: rect_mask(bbox),
        depth,
        parts: Vec::new(),
        grasps: vec![center_grasp(bbox, 1.0)],
        knowledge: BTreeMap::new(),
    }
}

pub fn part(name: &str, bbox: BBox, score: f64) -> Part {
    Part {
        name: name.to_string(),
        bbox,
        grasps: vec![center_grasp(bbox, score)],
    }
}

fn attrs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Object whose grasps are exactly its parts' grasps.
fn with_parts(mut obj: SceneObject, parts: Vec<Part>) -> SceneObject {
    obj.grasps = parts.iter().flat_map(|p| p.grasps.clone()).collect();
    obj.parts = parts;
    obj
}

/// Three bottles whose id order is the reverse of their left-to-right order,
/// plus a mug.
pub fn three_bottles() -> Scene {
    let mut objects = Vec::new();
    for (id, left, depth, color) in [
        (0, 500.0, 4.0, "clear"),
        (1, 300.0, 3.0, "brown"),
        (2, 80.0, 2.0, "green"),
    ] {
        let mut o = object(
            id,
            "bottle",
            "container",
            BBox::new(left, 150.0, left + 60.0, 330.0),
            depth,
        );
        o.attributes = attrs(&[("color", color), ("material", "glass")]);
        o.affordances = strings(&["contain", "pour"]);
        objects.push(o);
    }
    let mut mug = object(
        3,
        "mug",
        "kitchenware",
        BBox::new(200.0, 360.0, 260.0, 420.0),
        2.5,
    );
    mug.attributes = attrs(&[("color", "red")]);
    mug.synonyms = strings(&["cup"]);
    objects.push(mug);
    Scene::new(
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
        BACKGROUND_DEPTH,
        default_workspace(),
        BTreeMap::new(),
        objects,
    )
    .expect("fixture scene is valid")
}

/// A red mug, a knife, a potted plant, a tissue box and a fragile glass.
pub fn kitchen() -> Scene {
    let mut mug = with_parts(
        object(
            KITCHEN_MUG,
            "mug",
            "kitchenware",
            BBox::new(60.0, 60.0, 180.0, 180.0),
            2.5,
        ),
        vec![
            part("body", BBox::new(60.0, 60.0, 150.0, 180.0), 0.9),
            part("handle", BBox::new(150.0, 90.0, 180.0, 150.0), 0.9),
        ],
    );
    mug.synonyms = strings(&["cup"]);
    mug.attributes = attrs(&[
        ("color", "red"),
        ("material", "ceramic"),
        ("shape", "cylinder"),
    ]);
    mug.affordances = strings(&["contain", "drink"]);

    let mut knife = with_parts(
        object(
            KITCHEN_KNIFE,
            "knife",
            "utensil",
            BBox::new(240.0, 80.0, 480.0, 120.0),
            2.0,
        ),
        vec![
            part("blade", BBox::new(240.0, 80.0, 380.0, 120.0), 0.95),
            part("handle", BBox::new(380.0, 80.0, 480.0, 120.0), 0.9),
        ],
    );
    knife.attributes = attrs(&[("color", "silver"), ("material", "steel")]);
    knife.affordances = strings(&["cut"]);

    let mut plant = with_parts(
        object(
            KITCHEN_PLANT,
            "plant",
            "plant",
            BBox::new(500.0, 60.0, 600.0, 260.0),
            3.5,
        ),
        vec![
            part("foliage", BBox::new(500.0, 60.0, 600.0, 180.0), 0.95),
            part("pot", BBox::new(520.0, 180.0, 580.0, 260.0), 0.9),
        ],
    );
    plant.attributes = attrs(&[("color", "green")]);
    plant.affordances = strings(&["decorate"]);

    let mut tissue = object(
        KITCHEN_TISSUE,
        "tissue box",
        "household",
        BBox::new(80.0, 280.0, 220.0, 380.0),
        3.0,
    );
    tissue.synonyms = strings(&["box"]);
    tissue.attributes = attrs(&[("color", "blue"), ("shape", "box")]);
    tissue.affordances = strings(&["wipe"]);
    tissue.knowledge = attrs(&[("kleenex", "tissue box")]);

    let mut glass = object(
        KITCHEN_GLASS,
        "glass",
        "glassware",
        BBox::new(300.0, 300.0, 360.0, 420.0),
        2.8,
    );
    glass.attributes = attrs(&[
        ("color", "clear"),
        ("fragility", "fragile"),
        ("material", "glass"),
    ]);
    glass.affordances = strings(&["contain", "drink"]);

    Scene::new(
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
        BACKGROUND_DEPTH,
        default_workspace(),
        attrs(&[("what can cut", "knife")]),
        vec![mug, knife, plant, tissue, glass],
    )
    .expect("fixture scene is valid")
}

/// A single bottle whose every grasp lies right of the workspace.
pub fn out_of_reach() -> Scene {
    let workspace =
        Workspace::new(16.0, 16.0, 400.0, 464.0, 4.0).expect("static workspace is valid");
    let mut bottle = object(
        0,
        "bottle",
        "container",
        BBox::new(480.0, 150.0, 540.0, 330.0),
        3.0,
    );
    bottle.attributes = attrs(&[("color", "green")]);
    let mut mug = object(
        1,
        "mug",
        "kitchenware",
        BBox::new(100.0, 200.0, 160.0, 260.0),
        2.0,
    );
    mug.attributes = attrs(&[("color", "red")]);
    Scene::new(
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
        BACKGROUND_DEPTH,
        workspace,
        BTreeMap::new(),
        vec![bottle, mug],
    )
    .expect("fixture scene is valid")
}

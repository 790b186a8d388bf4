//! Oriented grasp rectangles, rotated IoU and the grasp success criterion.
//!
//! Image frame convention used throughout the crate: origin at the top-left
//! corner, `y` grows downward, units are pixels. Angles are in degrees and
//! measured counter-clockwise in `(x, y-down)` coordinates, i.e. corners are
//! produced with the standard rotation matrix applied to `(±w/2, ±h/2)`.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Rotated IoU must strictly exceed this value for a grasp to count.
pub const IOU_THRESHOLD: f64 = 0.25;
/// Orientation difference (degrees) allowed for a grasp to count, inclusive.
pub const ANGLE_THRESHOLD_DEG: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grasp rectangle: {0}")]
    InvalidRect(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),
    #[error("no ground-truth grasps to compare against")]
    NoGroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle in degrees into `[0, 180)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(180.0);
    // rem_euclid can round up to exactly 180 for tiny negative inputs
    if wrapped >= 180.0 {
        0.0
    } else {
        wrapped
    }
}

/// A 5-parameter grasp rectangle with an optional confidence.
///
/// `w` is the extent along the rectangle's own axis (the axis at angle
/// `theta` from the image x-axis) and `h` the extent perpendicular to it.
/// `theta` is always stored in `[0, 180)` since a parallel-jaw grasp is
/// unchanged by a half turn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspRect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    theta: f64,
    score: Option<f64>,
}

impl GraspRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64, theta: f64) -> Result<Self, GeometryError> {
        Self::with_score(x, y, w, h, theta, None)
    }

    pub fn with_score(
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        theta: f64,
        score: Option<f64>,
    ) -> Result<Self, GeometryError> {
        if ![x, y, w, h, theta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRect("non-finite parameter".into()));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidRect(format!(
                "extents must be positive (w={w}, h={h})"
            )));
        }
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(GeometryError::InvalidRect(format!(
                    "score {s} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            x,
            y,
            w,
            h,
            theta: normalize_angle(theta),
            score,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Radius of the circle through the four corners.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.w.hypot(self.h)
    }

    /// Same rectangle with a different score.
    pub fn rescored(mut self, score: Option<f64>) -> Result<Self, GeometryError> {
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(GeometryError::InvalidRect(format!(
                    "score {s} outside [0, 1]"
                )));
            }
        }
        self.score = score;
        Ok(self)
    }

    /// Translated and rotated copy, used by noise models.
    pub fn jittered(&self, dx: f64, dy: f64, dtheta: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            theta: normalize_angle(self.theta + dtheta),
            ..*self
        }
    }

    /// Uniformly scales the rectangle about `origin`.
    pub fn scaled_about(&self, origin: Point, s: f64) -> Result<Self, GeometryError> {
        Self::with_score(
            origin.x + (self.x - origin.x) * s,
            origin.y + (self.y - origin.y) * s,
            self.w * s,
            self.h * s,
            self.theta,
            self.score,
        )
    }

    /// Axis-aligned bounds `(min_x, min_y, max_x, max_y)` of the corners.
    pub fn aabb(&self) -> (f64, f64, f64, f64) {
        let corners = rect_corners(self);
        corners.vertices().iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }
}

impl fmt::Display for GraspRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grasp(x={}, y={}, w={}, h={}, theta={}",
            self.x, self.y, self.w, self.h, self.theta
        )?;
        if let Some(s) = self.score {
            write!(f, ", score={s}")?;
        }
        write!(f, ")")
    }
}

// On the wire a grasp is `[x, y, w, h, theta, score]`; score may be null or omitted.
impl Serialize for GraspRect {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(6))?;
        seq.serialize_element(&self.x)?;
        seq.serialize_element(&self.y)?;
        seq.serialize_element(&self.w)?;
        seq.serialize_element(&self.h)?;
        seq.serialize_element(&self.theta)?;
        seq.serialize_element(&self.score)?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for GraspRect {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RectVisitor;

        impl<'de> Visitor<'de> for RectVisitor {
            type Value = GraspRect;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array [x, y, w, h, theta, score?]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<GraspRect, A::Error> {
                let mut params = [0.0; 5];
                for (i, slot) in params.iter_mut().enumerate() {
                    *slot = seq
                        .next_element()?
                        .ok_or_else(|| de::Error::invalid_length(i, &self))?;
                }
                let score: Option<f64> = seq.next_element::<Option<f64>>()?.flatten();
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(7, &self));
                }
                let [x, y, w, h, theta] = params;
                GraspRect::with_score(x, y, w, h, theta, score).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(RectVisitor)
    }
}

/// A simple polygon stored counter-clockwise (positive shoelace area).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, reversing the vertex order if it was given clockwise.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(GeometryError::InvalidPolygon("non-finite vertex".into()));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }
}

impl Serialize for Polygon {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.vertices.iter().map(|p| [p.x, p.y]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        Polygon::new(pairs.into_iter().map(|[x, y]| Point::new(x, y)).collect())
            .map_err(de::Error::custom)
    }
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum();
    0.5 * twice
}

/// The four corners of `rect`, counter-clockwise.
pub fn rect_corners(rect: &GraspRect) -> Polygon {
    let (sin, cos) = rect.theta.to_radians().sin_cos();
    let (hw, hh) = (rect.w / 2.0, rect.h / 2.0);
    let vertices = [(hw, hh), (-hw, hh), (-hw, -hh), (hw, -hh)]
        .into_iter()
        .map(|(dx, dy)| Point::new(rect.x + cos * dx - sin * dy, rect.y + sin * dx + cos * dy))
        .collect();
    // rotation preserves orientation, so the offsets' CCW order carries over
    Polygon { vertices }
}

/// Area of the intersection of two convex polygons (Sutherland–Hodgman).
///
/// Degenerate inputs yield 0.
pub fn convex_intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if a.area() <= 0.0 || b.area() <= 0.0 {
        return 0.0;
    }
    let mut output = a.vertices.clone();
    let clip = &b.vertices;
    for i in 0..clip.len() {
        if output.is_empty() {
            return 0.0;
        }
        let (edge_start, edge_end) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let current = input[j];
            let next = input[(j + 1) % input.len()];
            let current_side = side(edge_start, edge_end, current);
            let next_side = side(edge_start, edge_end, next);
            if current_side >= 0.0 {
                output.push(current);
            }
            if (current_side >= 0.0) != (next_side >= 0.0) {
                let t = current_side / (current_side - next_side);
                output.push(Point::new(
                    current.x + t * (next.x - current.x),
                    current.y + t * (next.y - current.y),
                ));
            }
        }
    }
    if output.len() < 3 {
        return 0.0;
    }
    signed_area(&output).abs()
}

// > 0 when `p` is left of the directed edge, i.e. inside a CCW polygon.
fn side(start: Point, end: Point, p: Point) -> f64 {
    (end.x - start.x) * (p.y - start.y) - (end.y - start.y) * (p.x - start.x)
}

/// Intersection over union of two oriented rectangles, in `[0, 1]`.
pub fn rotated_iou(a: &GraspRect, b: &GraspRect) -> f64 {
    if a.center().distance(&b.center()) >= a.circumradius() + b.circumradius() {
        return 0.0;
    }
    let inter = convex_intersection_area(&rect_corners(a), &rect_corners(b));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Smallest orientation difference between two grasp angles, in `[0, 90]`.
pub fn angle_delta(ta: f64, tb: f64) -> f64 {
    let d = (ta - tb).rem_euclid(180.0);
    d.min(180.0 - d).max(0.0)
}

/// The threshold test on an already computed IoU / angle pair.
pub fn meets_thresholds(iou: f64, delta_deg: f64) -> bool {
    iou > IOU_THRESHOLD && delta_deg <= ANGLE_THRESHOLD_DEG
}

/// True iff `pred` matches at least one ground-truth grasp.
pub fn grasp_success(pred: &GraspRect, truths: &[GraspRect]) -> Result<bool, GeometryError> {
    if truths.is_empty() {
        return Err(GeometryError::NoGroundTruth);
    }
    Ok(truths
        .iter()
        .any(|t| meets_thresholds(rotated_iou(pred, t), angle_delta(pred.theta, t.theta))))
}

/// Axis-aligned reachable region of the robot, in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    #[serde(default)]
    pub margin: f64,
}

impl Workspace {
    pub fn new(
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        margin: f64,
    ) -> Result<Self, GeometryError> {
        let ws = Self {
            x_min,
            y_min,
            x_max,
            y_max,
            margin,
        };
        ws.validate()?;
        Ok(ws)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max, self.margin]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidWorkspace("non-finite bound".into()));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(GeometryError::InvalidWorkspace(format!(
                "empty bounds [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        if self.margin < 0.0 {
            return Err(GeometryError::InvalidWorkspace(format!(
                "negative margin {}",
                self.margin
            )));
        }
        Ok(())
    }

    /// Closed containment test against the bounds shrunk by `margin`.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min + self.margin
            && p.x <= self.x_max - self.margin
            && p.y >= self.y_min + self.margin
            && p.y <= self.y_max - self.margin
    }
}

/// True iff all four corners of `rect` lie in the margin-shrunk workspace.
/// Points on the shrunk boundary count as inside.
pub fn within_workspace(rect: &GraspRect, ws: &Workspace) -> bool {
    rect_corners(rect)
        .vertices()
        .iter()
        .all(|&p| ws.contains(p))
}

//! Oracles and corpora shared by the integration tests.
#![allow(dead_code)]

pub mod tools;

use grasploop_core::geometry::rect_corners;
use grasploop_core::script::builtins;
use grasploop_core::script::lexer::{escape, KEYWORDS};
use grasploop_core::GraspRect;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- IoU oracle

/// Membership by projection onto the rectangle's own axes, independent of
/// polygon clipping.
pub fn rect_contains(r: &GraspRect, px: f64, py: f64) -> bool {
    let (sin, cos) = r.theta().to_radians().sin_cos();
    let (dx, dy) = (px - r.x(), py - r.y());
    let u = cos * dx + sin * dy;
    let v = -sin * dx + cos * dy;
    u.abs() <= r.w() / 2.0 && v.abs() <= r.h() / 2.0
}

fn bounds(r: &GraspRect) -> (f64, f64, f64, f64) {
    let c = rect_corners(r);
    let xs = c.vertices().iter().map(|p| p.x);
    let ys = c.vertices().iter().map(|p| p.y);
    (
        xs.clone().fold(f64::INFINITY, f64::min),
        ys.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
        ys.fold(f64::NEG_INFINITY, f64::max),
    )
}

/// IoU estimated from uniform samples over the joint bounding box.
pub fn monte_carlo_iou(a: &GraspRect, b: &GraspRect, samples: usize, seed: u64) -> f64 {
    let (ax0, ay0, ax1, ay1) = bounds(a);
    let (bx0, by0, bx1, by1) = bounds(b);
    let (x0, y0, x1, y1) = (ax0.min(bx0), ay0.min(by0), ax1.max(bx1), ay1.max(by1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut both, mut either) = (0u64, 0u64);
    for _ in 0..samples {
        let px = rng.random_range(x0..x1);
        let py = rng.random_range(y0..y1);
        let (ia, ib) = (rect_contains(a, px, py), rect_contains(b, px, py));
        both += (ia && ib) as u64;
        either += (ia || ib) as u64;
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// Pairs whose second rectangle is placed near the first, so most overlap.
pub fn random_rect_pairs(seed: u64, n: usize) -> Vec<(GraspRect, GraspRect)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = GraspRect::new(
                rng.random_range(100.0..500.0),
                rng.random_range(100.0..400.0),
                rng.random_range(5.0..80.0),
                rng.random_range(5.0..80.0),
                rng.random_range(0.0..180.0),
            )
            .unwrap();
            let spread = 0.6 * a.w().max(a.h());
            let b = GraspRect::new(
                a.x() + rng.random_range(-spread..spread),
                a.y() + rng.random_range(-spread..spread),
                rng.random_range(5.0..80.0),
                rng.random_range(5.0..80.0),
                rng.random_range(0.0..180.0),
            )
            .unwrap();
            (a, b)
        })
        .collect()
}

// ----------------------------------------------------------- program corpora

/// Valid programs over the kitchen and three-bottle fixtures.
pub const SEED_PROGRAMS: [&str; 12] = [
    "let bottles = find(image, \"bottle\");\nlet ordered = sort_by(bottles, \"center_x\", \"asc\");\nlet target = ordered[1];\nlet grasp = grasp_detection(target)[0];\nreturn grasp;\n",
    "let knives = find(image, \"knife\");\nlet handle = find_part(knives[0], \"handle\")[0];\nlet grasp = first(reachable(grasp_detection(handle)));\nreturn grasp;\n",
    "let mugs = find(image, \"mug\");\nif count(mugs) == 0 {\n    return null;\n}\nlet grasp = grasp_detection(mugs[0])[0];\nreturn grasp;\n",
    "let xs = find(image, \"bottle\");\nlet best = best_image_match(xs, \"green bottle\");\nreturn grasp_detection(best)[0];\n",
    "let name = llm_query(\"kleenex\");\nlet hits = find(image, name);\nlet grasp = grasp_detection(hits[0])[0];\nreturn grasp;\n",
    "let anchor = find(image, \"mug\")[0];\nlet xs = find(image, \"bottle\");\nlet target = closest_to(xs, anchor);\nlet grasp = grasp_detection(target)[0];\nif in_workspace(grasp) {\n    log(\"reachable\");\n}\nreturn grasp;\n",
    "let xs = find(image, \"bottle\");\nlet total = 0;\nfor x in xs {\n    let total = total + area(x);\n    log(center_x(x));\n}\nreturn total;\n",
    "let xs = find(image, \"bottle\");\nlet near = min_by(xs, \"depth\");\nlet far = max_by(xs, \"depth\");\nlog(distance(near, far));\nreturn compute_depth(near);\n",
    "let ok = exists(image, \"glass\");\nlet fragile = false;\nif ok {\n    let g = find(image, \"glass\")[0];\n    let fragile = verify_property(g, \"fragility\", \"fragile\");\n}\nreturn fragile;\n",
    "let m = masks(image, \"plant\");\nlet r = reverse(find(image, \"plant\"));\nlog(m);\nreturn count(r) * 2 - 1 / 4;\n",
    "let a = 1;\nlet b = (a + 2) * 3;\nlet c = not (a < b and b >= 9 or false);\nlet s = \"quote \\\" back \\\\ nl \\n\";\nreturn a + b;\n",
    "let ordered = sort_by(find(image, \"bottle\"), \"center_y\", \"desc\");\nlet grasp = grasp_detection(ordered[-1])[0];\nreturn grasp;\n",
];

const TOKENS: [&str; 34] = [
    "let", "if", "else", "for", "in", "return", "log", "and", "or", "not", "true", "false", "null",
    "(", ")", "[", "]", "{", "}", ",", ";", "=", "==", "<", "+", "-", "*", "/", "image", "find",
    "\"", "0", "1e309", "grasp",
];

fn pick<'a, T>(rng: &mut impl Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn char_boundary(s: &str, mut i: usize) -> usize {
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

/// One random edit of `src`.
fn mutate(src: &str, rng: &mut impl Rng) -> String {
    let at = char_boundary(src, rng.random_range(0..=src.len()));
    let end = char_boundary(src, (at + rng.random_range(1..12)).min(src.len()));
    match rng.random_range(0..12) {
        0 => format!("{}{}", &src[..at], &src[end..]),
        1 => format!("{} {} {}", &src[..at], pick(rng, &TOKENS), &src[at..]),
        2 => {
            let c = *pick(rng, &['@', '#', '\u{0}', 'é', '\\', '"', '\n', '$', '~', '{', '}']);
            format!("{}{}{}", &src[..at], c, &src[at..])
        }
        3 => src.replacen(*pick(rng, &["[0]", "[1]"]), pick(rng, &["[99]", "[-7]", "[\"a\"]", "[1.5]", "[true]"]), 1),
        4 => src.replacen(
            *pick(rng, &["\"bottle\"", "\"knife\"", "\"mug\"", "\"asc\""]),
            pick(rng, &["\"\"", "\"unicorn\"", "42", "null", "image", "\"sideways\""]),
            1,
        ),
        5 => src.replacen("image", pick(rng, &["1", "\"image\"", "null", "(image)", "true"]), 1),
        6 => format!("let deep = {}1{};\n{src}", "(".repeat(rng.random_range(20..400)), ")".repeat(rng.random_range(0..400))),
        7 => format!(
            "let xs = find(image, \"bottle\");\nfor a in xs {{ for b in xs {{ for c in xs {{ for d in xs {{ for e in xs {{ for f in xs {{ for g in xs {{ for h in xs {{ log(area(a) * area(h)); }} }} }} }} }} }} }} }}\n{src}"
        ),
        8 => format!("let s = \"{}\";\n{src}", "x".repeat(rng.random_range(0..5000))),
        9 => src.replacen(*pick(rng, &["+", "*", "==", "<", " and "]), pick(rng, &["/ 0 +", "+ \"s\" +", "< null <", " and 3 and "]), 1),
        10 => {
            let mut lines: Vec<&str> = src.lines().collect();
            if lines.is_empty() {
                return src.to_string();
            }
            let i = rng.random_range(0..lines.len());
            let j = rng.random_range(0..lines.len());
            lines.swap(i, j);
            lines.join("\n")
        }
        _ => {
            let bytes: Vec<u8> = (0..rng.random_range(0..64)).map(|_| rng.random::<u8>()).collect();
            format!("{}{}{}", &src[..at], String::from_utf8_lossy(&bytes), &src[at..])
        }
    }
}

/// `n` programs derived from [`SEED_PROGRAMS`] by one to three edits.
pub fn fuzz_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut src = pick(&mut rng, &SEED_PROGRAMS).to_string();
            for _ in 0..rng.random_range(1..=3) {
                src = mutate(&src, &mut rng);
            }
            src
        })
        .collect()
}

// True when `e` is one parenthesised group, as in `(a) + (b)` it is not.
fn single_group(e: &str) -> bool {
    if !e.starts_with('(') {
        return false;
    }
    let mut depth = 0;
    for (i, c) in e.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth == 0 {
            return i == e.len() - 1;
        }
    }
    false
}

struct ProgramGen {
    rng: ChaCha8Rng,
    scopes: Vec<Vec<String>>,
    fresh: usize,
}

const STRINGS: [&str; 8] = [
    "bottle",
    "mug",
    "center_x",
    "asc",
    "a \"quoted\" word",
    "tab\there",
    "back\\slash",
    "café\n",
];
const BINOPS: [&str; 13] = [
    "+", "-", "*", "/", "==", "!=", "<", "<=", ">", ">=", "and", "or", "+",
];

impl ProgramGen {
    fn visible(&self) -> Vec<String> {
        self.scopes.iter().flatten().cloned().collect()
    }

    fn expr(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.rng.random_bool(0.3);
        if leaf {
            return match self.rng.random_range(0..6) {
                0 => self.rng.random_range(0..1000).to_string(),
                1 => format!(
                    "{}.{}",
                    self.rng.random_range(0..100),
                    self.rng.random_range(1..100)
                ),
                2 => escape(pick(&mut self.rng, &STRINGS)),
                3 => pick(&mut self.rng, &["true", "false", "null"]).to_string(),
                _ => {
                    let names = self.visible();
                    pick(&mut self.rng, &names).clone()
                }
            };
        }
        let d = depth - 1;
        match self.rng.random_range(0..7) {
            0 | 1 => {
                let op = *pick(&mut self.rng, &BINOPS);
                format!("{} {op} {}", self.operand(d), self.operand(d))
            }
            2 => {
                let op = *pick(&mut self.rng, &["-", "not "]);
                let e = self.operand(d);
                if e.starts_with('-') {
                    format!("{op}({e})")
                } else {
                    format!("{op}{e}")
                }
            }
            3 => {
                let names = builtins::names();
                let name = *pick(&mut self.rng, &names);
                let (lo, hi) = builtins::arity(name).unwrap();
                let n = self.rng.random_range(lo..=hi);
                let args: Vec<String> = (0..n).map(|_| self.expr(d)).collect();
                format!("{name}({})", args.join(", "))
            }
            4 | 5 => format!("{}[{}]", self.operand(d), self.expr(d)),
            _ => format!("({})", self.expr(d)),
        }
    }

    // Parenthesised unless atomic, so generated precedence is unambiguous.
    fn operand(&mut self, depth: u32) -> String {
        let e = self.expr(depth);
        if e.contains(' ') && !single_group(&e) {
            format!("({e})")
        } else {
            e
        }
    }

    fn name(&mut self) -> String {
        let visible = self.visible();
        if !visible.is_empty() && self.rng.random_bool(0.3) {
            let v = pick(&mut self.rng, &visible).clone();
            if v != "image" {
                return v;
            }
        }
        self.fresh += 1;
        let n = format!("v{}", self.fresh);
        debug_assert!(!KEYWORDS.contains(&n.as_str()));
        n
    }

    fn block(&mut self, depth: u32, indent: usize, out: &mut String) {
        self.scopes.push(Vec::new());
        for _ in 0..self.rng.random_range(1..4) {
            self.stmt(depth, indent, out);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, depth: u32, indent: usize, out: &mut String) {
        let pad = "    ".repeat(indent);
        let kind = if depth == 0 {
            self.rng.random_range(0..2)
        } else {
            self.rng.random_range(0..5)
        };
        match kind {
            0 => {
                let e = self.expr(3);
                let name = self.name();
                out.push_str(&format!("{pad}let {name} = {e};\n"));
                if !self.visible().contains(&name) {
                    self.scopes.last_mut().unwrap().push(name);
                }
            }
            1 => {
                let e = self.expr(2);
                out.push_str(&format!("{pad}log({e});\n"));
            }
            2 => {
                let c = self.expr(2);
                out.push_str(&format!("{pad}if {c} {{\n"));
                self.block(depth - 1, indent + 1, out);
                if self.rng.random_bool(0.5) {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    self.block(depth - 1, indent + 1, out);
                }
                out.push_str(&format!("{pad}}}\n"));
            }
            3 => {
                let e = self.expr(2);
                self.fresh += 1;
                let var = format!("v{}", self.fresh);
                out.push_str(&format!("{pad}for {var} in {e} {{\n"));
                self.scopes.push(vec![var]);
                self.block(depth - 1, indent + 1, out);
                self.scopes.pop();
                out.push_str(&format!("{pad}}}\n"));
            }
            _ => {
                let e = self.expr(2);
                out.push_str(&format!("{pad}return {e};\n"));
            }
        }
    }
}

/// A random program that parses: every name is bound before use and every
/// call has a valid arity. It need not run without errors.
pub fn random_program(seed: u64) -> String {
    let mut g = ProgramGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        scopes: vec![vec!["image".to_string()]],
        fresh: 0,
    };
    let mut out = String::new();
    for _ in 0..g.rng.random_range(1..8) {
        g.stmt(2, 0, &mut out);
    }
    out
}

/// The seed programs followed by random ones, `n` in total.
pub fn roundtrip_corpus(n: usize) -> Vec<String> {
    SEED_PROGRAMS
        .iter()
        .map(|s| s.to_string())
        .chain((0..).map(|i| random_program(7000 + i)))
        .take(n)
        .collect()
}

// ------------------------------------------------------------------ agents

use grasploop_core::agents::{AgentError, CodeRequest, Coder, ObserveContext, Observer};
use grasploop_core::ObserverFeedback;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// Emits the same program on every iteration.
pub struct FixedCoder(pub String);

impl Coder for FixedCoder {
    fn code(&self, _: &CodeRequest<'_>) -> Result<String, AgentError> {
        Ok(self.0.clone())
    }
}

/// Counts its calls and always asks for a revision.
#[derive(Clone, Default)]
pub struct CountingObserver(pub Arc<AtomicUsize>);

impl CountingObserver {
    pub fn calls(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }
}

impl Observer for CountingObserver {
    fn observe(&self, ctx: &ObserveContext<'_>) -> Result<ObserverFeedback, AgentError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(ObserverFeedback::revise(format!(
            "seen iteration {}",
            ctx.iteration
        )))
    }
}

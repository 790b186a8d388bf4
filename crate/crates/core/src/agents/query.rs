//! Rule-based reading of natural-language grasp queries.

use crate::lexicon::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
    Top,
    Bottom,
}

impl Direction {
    fn parse(word: &str) -> Option<Self> {
        match word {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            "top" => Some(Direction::Top),
            "bottom" => Some(Direction::Bottom),
            _ => None,
        }
    }

    /// Sort key and order that put the first object in this direction first.
    pub fn sort(&self) -> (&'static str, &'static str) {
        match self {
            Direction::Left => ("center_x", "asc"),
            Direction::Right => ("center_x", "desc"),
            Direction::Top => ("center_y", "asc"),
            Direction::Bottom => ("center_y", "desc"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Only,
    Attribute(String),
    Ordinal { rank: usize, from: Direction },
    ClosestTo(String),
    NearestToCamera,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Intent {
    Object {
        name: String,
        selection: Selection,
        part: Option<String>,
    },
    Affordance {
        verb: String,
    },
}

pub fn normalize(query: &str) -> String {
    let cleaned: String = query
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == ' ' || c == '-' {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_any<'a>(text: &'a str, prefixes: &[&str]) -> &'a str {
    for p in prefixes {
        if let Some(rest) = text.strip_prefix(p) {
            return rest.trim_start();
        }
    }
    text
}

fn strip_article(text: &str) -> &str {
    strip_any(text, &["the ", "a ", "an "])
}

/// Splits `text` at the first occurrence of any marker.
fn split_on<'a>(text: &'a str, markers: &[&str]) -> Option<(&'a str, &'a str)> {
    markers
        .iter()
        .filter_map(|m| text.find(m).map(|i| (i, std::cmp::Reverse(m.len()))))
        .min()
        .map(|(i, len)| (text[..i].trim(), text[i + len.0..].trim()))
}

/// Reads `query` given the object names visible in the scene.
pub fn parse_query(query: &str, lexicon: &Lexicon, known: &[String]) -> Option<Intent> {
    let text = normalize(query);
    if text.is_empty() {
        return None;
    }
    for marker in [
        "something to ",
        "something that can ",
        "something for ",
        "something i can ",
    ] {
        if let Some(i) = text.find(marker) {
            let rest = &text[i + marker.len()..];
            let verb = rest
                .split(' ')
                .find(|w| lexicon.affordances.contains_key(*w))
                .or_else(|| rest.split(' ').next())?;
            return Some(Intent::Affordance {
                verb: verb.to_string(),
            });
        }
    }

    let mut phrase = strip_any(&text, &["please "]);
    phrase = strip_any(
        phrase,
        &[
            "grasp ", "grab ", "pick up ", "pick ", "get ", "hand me ", "fetch ",
        ],
    );
    phrase = strip_article(phrase);

    let mut part = None;
    if let Some((head, tail)) = split_on(phrase, &[" by its ", " by the "]) {
        part = Some(tail.to_string());
        phrase = head;
    } else if let Some((head, tail)) = split_on(phrase, &[" of the ", " of a "]) {
        if !head.contains(' ') {
            part = Some(head.to_string());
            phrase = tail;
        }
    }
    phrase = strip_article(phrase);

    let (phrase, selection) = if let Some((head, anchor)) =
        split_on(phrase, &[" closest to ", " nearest to ", " next to "])
    {
        if matches!(anchor, "the camera" | "camera" | "me" | "the robot") {
            (head, Selection::NearestToCamera)
        } else {
            (
                head,
                Selection::ClosestTo(strip_article(anchor).to_string()),
            )
        }
    } else if let Some((head, side)) = split_on(phrase, &[" from the ", " from "]) {
        let from = Direction::parse(side)?;
        let (ord, name) = head.split_once(' ')?;
        let rank = lexicon.ordinal_rank(ord)?;
        (name, Selection::Ordinal { rank, from })
    } else if let Some((word, name)) = phrase.split_once(' ') {
        let extreme = match word {
            "leftmost" => Some(Direction::Left),
            "rightmost" => Some(Direction::Right),
            "topmost" => Some(Direction::Top),
            "bottommost" => Some(Direction::Bottom),
            _ => None,
        };
        match (extreme, word) {
            (Some(from), _) => (name, Selection::Ordinal { rank: 1, from }),
            (None, "nearest" | "closest") => (name, Selection::NearestToCamera),
            _ => (phrase, Selection::Only),
        }
    } else {
        (phrase, Selection::Only)
    };
    let phrase = phrase.trim();
    if phrase.is_empty() {
        return None;
    }

    let (name, selection) = if selection == Selection::Only {
        let longest = known
            .iter()
            .filter(|k| phrase == k.as_str() || phrase.ends_with(&format!(" {k}")))
            .max_by_key(|k| k.len());
        match longest {
            Some(k) if k == phrase => (k.clone(), Selection::Only),
            Some(k) => {
                let attr = phrase[..phrase.len() - k.len()].trim();
                (k.clone(), Selection::Attribute(attr.to_string()))
            }
            None => (phrase.to_string(), Selection::Only),
        }
    } else {
        (phrase.to_string(), selection)
    };
    Some(Intent::Object {
        name,
        selection,
        part,
    })
}

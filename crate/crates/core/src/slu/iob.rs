//! IOB2 tag handling: parsing, validation, repair and chunk extraction.

use crate::error::{Error, Result};

pub const OUTSIDE: &str = "O";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(tag: &'a str) -> Result<Self> {
        if tag == OUTSIDE {
            return Ok(Tag::Outside);
        }
        match tag.split_once('-') {
            Some(("B", t)) if !t.is_empty() => Ok(Tag::Begin(t)),
            Some(("I", t)) if !t.is_empty() => Ok(Tag::Inside(t)),
            _ => Err(Error::InvalidIob(format!("malformed tag {tag:?}"))),
        }
    }

    pub fn slot_type(self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) => Some(t),
        }
    }
}

/// A chunk of type `label` covering tokens `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// Every tag well-formed and every `I-X` preceded by `B-X` or `I-X`.
pub fn validate<S: AsRef<str>>(tags: &[S]) -> Result<()> {
    let mut prev: Option<&str> = None;
    for (i, t) in tags.iter().enumerate() {
        let tag = Tag::parse(t.as_ref())?;
        if let Tag::Inside(x) = tag {
            if prev != Some(x) {
                return Err(Error::InvalidIob(format!("I-{x} at position {i} does not continue a {x} chunk")));
            }
        }
        prev = tag.slot_type();
    }
    Ok(())
}

pub fn is_valid<S: AsRef<str>>(tags: &[S]) -> bool {
    validate(tags).is_ok()
}

/// Rewrites each orphan `I-X` as `B-X`. Malformed tags become `O`.
pub fn repair<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev: Option<String> = None;
    for t in tags {
        let fixed = match Tag::parse(t.as_ref()) {
            Ok(Tag::Inside(x)) if prev.as_deref() != Some(x) => format!("B-{x}"),
            Ok(_) => t.as_ref().to_string(),
            Err(_) => OUTSIDE.to_string(),
        };
        prev = Tag::parse(&fixed).ok().and_then(Tag::slot_type).map(str::to_string);
        out.push(fixed);
    }
    out
}

/// Maximal chunks. Orphan `I-X` tags open a new chunk, as conlleval does,
/// so the result equals `spans` of the repaired sequence.
pub fn spans<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    let mut open: Option<(String, usize)> = None;
    let mut prev: Option<String> = None;
    for (i, t) in tags.iter().enumerate() {
        let tag = Tag::parse(t.as_ref()).unwrap_or(Tag::Outside);
        let continues = matches!(tag, Tag::Inside(x) if prev.as_deref() == Some(x));
        if !continues {
            if let Some((label, start)) = open.take() {
                out.push(Span { label, start, end: i - 1 });
            }
            if let Some(x) = tag.slot_type() {
                open = Some((x.to_string(), i));
            }
        }
        prev = tag.slot_type().map(str::to_string);
    }
    if let Some((label, start)) = open {
        out.push(Span { label, start, end: tags.len() - 1 });
    }
    out
}

//! SLU samples and the tab-separated dataset format.
//!
//! ```text
//! show<TAB>O
//! flights<TAB>O
//! to<TAB>O
//! boston<TAB>B-toloc.city_name
//! #intent<TAB>flight
//!
//! ```

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::iob::{self, Tag, OUTSIDE};
use crate::error::{Error, Result};
use crate::textcore::{Vocab, CLS};

const INTENT_MARKER: &str = "#intent";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedUtterance {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub intent: String,
}

impl TaggedUtterance {
    pub fn new(tokens: Vec<String>, tags: Vec<String>, intent: impl Into<String>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::LengthMismatch {
                expected: tokens.len(),
                actual: tags.len(),
            });
        }
        iob::validate(&tags)?;
        Ok(TaggedUtterance {
            tokens,
            tags,
            intent: intent.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `[CLS] tokens...` ids.
    pub fn input_ids(&self, vocab: &Vocab) -> Vec<u32> {
        let mut ids = Vec::with_capacity(self.len() + 1);
        ids.push(CLS);
        ids.extend(vocab.encode_tokens(&self.tokens));
        ids
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SluDataset {
    pub utterances: Vec<TaggedUtterance>,
}

impl SluDataset {
    pub fn new(utterances: Vec<TaggedUtterance>) -> Self {
        SluDataset { utterances }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn intents(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.intent.clone()).collect()
    }

    pub fn tag_sequences(&self) -> Vec<Vec<String>> {
        self.utterances.iter().map(|u| u.tags.clone()).collect()
    }

    /// Parses the dataset format; `path` only labels diagnostics.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut out = Vec::new();
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        let mut intent: Option<String> = None;
        let mut start_line = 1;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                if tokens.is_empty() && intent.is_none() {
                    start_line = lineno + 1;
                    continue;
                }
                let label = intent.take().ok_or_else(|| err(lineno, "utterance without #intent line".into()))?;
                let u = TaggedUtterance::new(std::mem::take(&mut tokens), std::mem::take(&mut tags), label)
                    .map_err(|e| err(start_line, e.to_string()))?;
                out.push(u);
                start_line = lineno + 1;
                continue;
            }
            if intent.is_some() {
                return Err(err(lineno, "expected blank line after #intent".into()));
            }
            let (left, right) = line
                .split_once('\t')
                .ok_or_else(|| err(lineno, format!("expected two tab-separated fields, got {line:?}")))?;
            if right.contains('\t') {
                return Err(err(lineno, "too many fields".into()));
            }
            if left == INTENT_MARKER {
                intent = Some(right.to_string());
            } else {
                if left.is_empty() {
                    return Err(err(lineno, "empty token".into()));
                }
                Tag::parse(right).map_err(|e| err(lineno, e.to_string()))?;
                tokens.push(left.to_string());
                tags.push(right.to_string());
            }
        }
        if !tokens.is_empty() || intent.is_some() {
            let lineno = text.lines().count();
            let label = intent.ok_or_else(|| err(lineno, "utterance without #intent line".into()))?;
            out.push(TaggedUtterance::new(tokens, tags, label).map_err(|e| err(start_line, e.to_string()))?);
        }
        Ok(SluDataset { utterances: out })
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for u in &self.utterances {
            for (tok, tag) in u.tokens.iter().zip(&u.tags) {
                s.push_str(tok);
                s.push('\t');
                s.push_str(tag);
                s.push('\n');
            }
            s.push_str(INTENT_MARKER);
            s.push('\t');
            s.push_str(&u.intent);
            s.push_str("\n\n");
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&crate::error::read_to_string(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::error::write(path, self.to_file_string())?;
        Ok(())
    }
}

/// Ordered label inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for LabelSet {
    fn from(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        LabelSet { labels, index }
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(s: LabelSet) -> Self {
        s.labels
    }
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Intent and tag inventories of a task. Tags are `O` followed by
/// `B-X`, `I-X` for every slot type, so any repaired sequence is encodable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SluLabels {
    pub intents: LabelSet,
    pub tags: LabelSet,
}

impl SluLabels {
    pub fn from_datasets(sets: &[&SluDataset]) -> Result<Self> {
        let mut intents = BTreeSet::new();
        let mut types = BTreeSet::new();
        for u in sets.iter().flat_map(|s| &s.utterances) {
            intents.insert(u.intent.clone());
            for t in &u.tags {
                if let Some(x) = Tag::parse(t)?.slot_type() {
                    types.insert(x.to_string());
                }
            }
        }
        if intents.is_empty() {
            return Err(Error::config("no utterances to derive labels from"));
        }
        let mut tags = vec![OUTSIDE.to_string()];
        for x in types {
            tags.push(format!("B-{x}"));
            tags.push(format!("I-{x}"));
        }
        Ok(SluLabels {
            intents: intents.into_iter().collect::<Vec<_>>().into(),
            tags: tags.into(),
        })
    }
}

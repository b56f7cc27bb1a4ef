use std::collections::HashMap;

use crate::error::{Error, Result};

pub type TagId = usize;

/// Which of the two tagsets a label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Y,
    Z,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Y => Side::Z,
            Side::Z => Side::Y,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Y => "y",
            Side::Z => "z",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Side> {
        match s {
            "y" | "Y" => Ok(Side::Y),
            "z" | "Z" => Ok(Side::Z),
            other => Err(Error::Data(format!(
                "unknown side {other:?}, expected y or z"
            ))),
        }
    }
}

/// Ordered inventory of tag strings with a stable index↔tag bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagset {
    pub name: String,
    tags: Vec<String>,
    index: HashMap<String, TagId>,
}

impl Tagset {
    pub fn new(name: &str, tags: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate tag {t:?} in tagset {name}")));
            }
        }
        Ok(Tagset {
            name: name.to_string(),
            tags,
            index,
        })
    }

    /// Empty open-world tagset that grows as tags are first seen.
    pub fn open(name: &str) -> Self {
        Tagset {
            name: name.to_string(),
            tags: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn id(&self, tag: &str) -> Option<TagId> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, id: TagId) -> &str {
        &self.tags[id]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Look up a tag, inserting it when absent.
    pub fn intern(&mut self, tag: &str) -> TagId {
        match self.index.get(tag) {
            Some(id) => *id,
            None => {
                let id = self.tags.len();
                self.tags.push(tag.to_string());
                self.index.insert(tag.to_string(), id);
                id
            }
        }
    }
}

/// A token sequence with tags for one side (training data) or, rarely,
/// both. Tag sequences, when present, run parallel to the tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub y_tags: Option<Vec<TagId>>,
    pub z_tags: Option<Vec<TagId>>,
    pub source: String,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tags(&self, side: Side) -> Option<&[TagId]> {
        match side {
            Side::Y => self.y_tags.as_deref(),
            Side::Z => self.z_tags.as_deref(),
        }
    }

    /// Tokens joined by single spaces; the key used for duplicate detection.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn validate(&self) -> Result<()> {
        for (side, tags) in [(Side::Y, &self.y_tags), (Side::Z, &self.z_tags)] {
            if let Some(t) = tags {
                if t.len() != self.tokens.len() {
                    return Err(Error::Data(format!(
                        "sentence {:?}: {} tags on side {side} for {} tokens",
                        self.text(),
                        t.len(),
                        self.tokens.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A sentence carrying gold labels in both tagsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub tokens: Vec<String>,
    pub y_tags: Vec<TagId>,
    pub z_tags: Vec<TagId>,
}

impl ParallelPair {
    pub fn new(tokens: Vec<String>, y_tags: Vec<TagId>, z_tags: Vec<TagId>) -> Result<Self> {
        if tokens.len() != y_tags.len() || tokens.len() != z_tags.len() {
            return Err(Error::Data(format!(
                "parallel pair lengths differ: {} tokens, {} y tags, {} z tags",
                tokens.len(),
                y_tags.len(),
                z_tags.len()
            )));
        }
        Ok(ParallelPair {
            tokens,
            y_tags,
            z_tags,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tags(&self, side: Side) -> &[TagId] {
        match side {
            Side::Y => &self.y_tags,
            Side::Z => &self.z_tags,
        }
    }
}

/// Token→id map with UNK and PAD reserved at indices 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    pub min_freq: usize,
}

pub const UNK_ID: usize = 0;
pub const PAD_ID: usize = 1;

impl Vocab {
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Count token frequencies and keep everything at or above `min_freq`,
/// ordered by frequency descending then lexicographically. Everything
/// else maps to UNK.
pub fn build_vocab<'a, I>(sentences: I, min_freq: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    if min_freq == 0 {
        return Err(Error::Data("min_freq must be at least 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for tok in &s.tokens {
            *freq.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq.into_iter().filter(|(_, c)| *c >= min_freq).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut id_to_token = vec!["<unk>".to_string(), "<pad>".to_string()];
    id_to_token.extend(kept.iter().map(|(t, _)| t.to_string()));
    let token_to_id = id_to_token
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocab {
        token_to_id,
        id_to_token,
        min_freq,
    })
}

//! Named-entity replacement and the table that undoes it.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tag that marks a token outside any entity.
pub const OUTSIDE: &str = "O";

/// Subscripted entity tags (`person_1`) and the surface tokens they stand for,
/// in first-occurrence order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchingTable {
    entries: Vec<(String, Vec<String>)>,
}

impl MatchingTable {
    pub fn new() -> Self {
        MatchingTable::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Inserts `key` unless present. Returns false on a duplicate key.
    pub fn insert(&mut self, key: String, surface: Vec<String>) -> bool {
        if self.get(&key).is_some() {
            return false;
        }
        self.entries.push((key, surface));
        true
    }

    fn key_for(&self, tag_prefix: &str, surface: &[String]) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, v)| v.as_slice() == surface && tag_of(k) == Some(tag_prefix))
            .map(|(k, _)| k.as_str())
    }

    /// Replaces every occurrence of a table surface span inside `tokens`
    /// by its key, longest spans first.
    pub fn substitute_surfaces(&self, tokens: &[String]) -> Vec<String> {
        let mut order: Vec<&(String, Vec<String>)> = self.entries.iter().collect();
        order.sort_by_key(|e| std::cmp::Reverse(e.1.len()));
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        'outer: while i < tokens.len() {
            for (key, surface) in &order {
                let n = surface.len();
                if n > 0 && i + n <= tokens.len() && tokens[i..i + n] == surface[..] {
                    out.push(key.clone());
                    i += n;
                    continue 'outer;
                }
            }
            out.push(tokens[i].clone());
            i += 1;
        }
        out
    }
}

fn tag_of(key: &str) -> Option<&str> {
    key.rsplit_once('_').map(|(tag, _)| tag)
}

/// Replaces each entity mention (a maximal run of one non-`O` tag) with a
/// lowercase subscripted tag token. The same surface string under the same
/// tag always maps to the same subscript; distinct entities of a tag are
/// numbered from 1 in order of first appearance.
pub fn ner_replace(tokens: &[String], tags: &[String]) -> Result<(Vec<String>, MatchingTable)> {
    if tokens.len() != tags.len() {
        return Err(Error::invalid(format!(
            "{} tokens but {} NER tags",
            tokens.len(),
            tags.len()
        )));
    }
    let mut table = MatchingTable::new();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if tags[i] == OUTSIDE {
            out.push(tokens[i].clone());
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < tokens.len() && tags[j] == tags[i] {
            j += 1;
        }
        let prefix = tags[i].to_lowercase();
        let surface = tokens[i..j].to_vec();
        let key = match table.key_for(&prefix, &surface) {
            Some(k) => k.to_string(),
            None => {
                let k = table
                    .iter()
                    .filter(|(k, _)| tag_of(k) == Some(&prefix))
                    .count()
                    + 1;
                let key = format!("{prefix}_{k}");
                table.insert(key.clone(), surface);
                key
            }
        };
        out.push(key);
        i = j;
    }
    Ok((out, table))
}

/// Expands table keys back into their surface tokens. Tokens that look like
/// subscripted tags but are missing from the table pass through unchanged
/// and are counted.
pub fn restore_entities(tokens: &[String], table: &MatchingTable) -> (Vec<String>, usize) {
    let mut unknown = 0;
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        match table.get(tok) {
            Some(surface) => out.extend(surface.iter().cloned()),
            None => {
                if looks_like_tag(tok) {
                    unknown += 1;
                }
                out.push(tok.clone());
            }
        }
    }
    (out, unknown)
}

fn looks_like_tag(tok: &str) -> bool {
    match tok.rsplit_once('_') {
        Some((tag, k)) => {
            !tag.is_empty()
                && tag.chars().all(|c| c.is_ascii_lowercase() || c == '_')
                && !k.is_empty()
                && k.chars().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

impl Serialize for MatchingTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, &v.join(" "))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for MatchingTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TableVisitor;

        impl<'de> Visitor<'de> for TableVisitor {
            type Value = MatchingTable;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from entity tag to surface string")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut table = MatchingTable::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    let surface = v.split_whitespace().map(str::to_string).collect();
                    if !table.insert(k.clone(), surface) {
                        return Err(serde::de::Error::custom(format!("duplicate tag {k}")));
                    }
                }
                Ok(table)
            }
        }

        deserializer.deserialize_map(TableVisitor)
    }
}

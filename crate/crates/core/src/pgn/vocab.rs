use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::codec::SEP;
use crate::sparql::SparqlVocabulary;

pub const PAD: &str = "<pad>";
pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const PAD_ID: usize = 0;
pub const START_ID: usize = 1;
pub const END_ID: usize = 2;
pub const SEP_ID: usize = 3;

const SPECIALS: [&str; 4] = [PAD, START, END, SEP];

/// Canonical variable names always present in the fixed vocabulary.
pub const CANONICAL_VARIABLES: usize = 10;

/// Output tokens the decoder can generate without copying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FixedVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for FixedVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        FixedVocab { tokens, index }
    }
}

impl From<FixedVocab> for Vec<String> {
    fn from(v: FixedVocab) -> Self {
        v.tokens
    }
}

impl FixedVocab {
    /// Special symbols followed by `extra` in sorted order.
    pub fn new<I, S>(extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let extra: BTreeSet<String> = extra
            .into_iter()
            .map(Into::into)
            .filter(|t| !SPECIALS.contains(&t.as_str()))
            .collect();
        let tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).chain(extra).collect();
        tokens.into()
    }

    /// SPARQL vocabulary, canonical variables and every training target token
    /// that cannot be copied from its own input.
    pub fn build<'a, I>(sparql: &SparqlVocabulary, samples: I) -> Self
    where
        I: IntoIterator<Item = (&'a [String], &'a [String])>,
    {
        let mut extra: BTreeSet<String> = sparql.iter().map(str::to_string).collect();
        extra.extend((0..CANONICAL_VARIABLES).map(|i| format!("?var{i}")));
        for (input, target) in samples {
            let copyable: BTreeSet<&str> = input.iter().map(|t| copy_form(t)).collect();
            for t in target {
                if !copyable.contains(t.as_str()) {
                    extra.insert(t.clone());
                }
            }
        }
        Self::new(extra)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// The form an input token takes when copied: surrounding sentence
/// punctuation is dropped, so `22.4?` copies as `22.4`.
pub fn copy_form(token: &str) -> &str {
    let trimmed = token
        .trim_start_matches(['"', '\'', '(', '«', '“'])
        .trim_end_matches(['?', '!', ',', ';', '"', '\'', ')', '»', '”', '.']);
    if trimmed.is_empty() {
        token
    } else {
        trimmed
    }
}

/// Fixed vocabulary extended with one sample's input tokens.
#[derive(Debug, Clone)]
pub struct ExtendedVocab<'a> {
    fixed: &'a FixedVocab,
    dynamic: Vec<String>,
    dynamic_index: HashMap<String, usize>,
    /// Extended ID of every input position.
    source_ids: Vec<usize>,
}

impl<'a> ExtendedVocab<'a> {
    pub fn new<S: AsRef<str>>(fixed: &'a FixedVocab, input: &[S]) -> Self {
        let mut dynamic = Vec::new();
        let mut dynamic_index = HashMap::new();
        let mut source_ids = Vec::with_capacity(input.len());
        for tok in input {
            let form = copy_form(tok.as_ref());
            let id = match fixed.id(tok.as_ref()).or_else(|| fixed.id(form)) {
                Some(id) => id,
                None => *dynamic_index.entry(form.to_string()).or_insert_with(|| {
                    dynamic.push(form.to_string());
                    fixed.len() + dynamic.len() - 1
                }),
            };
            source_ids.push(id);
        }
        ExtendedVocab { fixed, dynamic, dynamic_index, source_ids }
    }

    pub fn fixed(&self) -> &'a FixedVocab {
        self.fixed
    }

    pub fn len(&self) -> usize {
        self.fixed.len() + self.dynamic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dynamic(&self) -> &[String] {
        &self.dynamic
    }

    pub fn source_ids(&self) -> &[usize] {
        &self.source_ids
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.fixed.id(token).or_else(|| self.dynamic_index.get(token).copied())
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        if id < self.fixed.len() {
            self.fixed.token(id)
        } else {
            self.dynamic.get(id - self.fixed.len()).map(String::as_str)
        }
    }

    /// Renders IDs up to (not including) the end symbol.
    pub fn render(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != END_ID)
            .filter_map(|&id| self.token(id))
            .map(str::to_string)
            .collect()
    }
}

/// Input-word vocabulary for the trainable lookup; ID 0 is the unknown slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct InputVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub const UNK: &str = "<unk>";

impl From<Vec<String>> for InputVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        InputVocab { tokens, index }
    }
}

impl From<InputVocab> for Vec<String> {
    fn from(v: InputVocab) -> Self {
        v.tokens
    }
}

impl InputVocab {
    pub fn build<'a, I>(inputs: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for input in inputs {
            for t in input {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let kept: BTreeSet<&str> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && *t != UNK)
            .map(|(t, _)| t)
            .collect();
        let tokens: Vec<String> = std::iter::once(UNK).chain(kept).map(str::to_string).collect();
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }
}

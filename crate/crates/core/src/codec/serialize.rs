use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Separator between question, entity and relation segments.
pub const SEP: &str = "[SEP]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    Entity,
    Relation,
}

/// A gold entity or relation with its knowledge-graph label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkedItem {
    pub iri: String,
    /// Empty only when the graph has no label for `iri`.
    pub label: String,
    pub kind: ItemKind,
}

impl LinkedItem {
    pub fn entity(iri: impl Into<String>, label: impl Into<String>) -> Self {
        LinkedItem { iri: iri.into(), label: label.into(), kind: ItemKind::Entity }
    }

    pub fn relation(iri: impl Into<String>, label: impl Into<String>) -> Self {
        LinkedItem { iri: iri.into(), label: label.into(), kind: ItemKind::Relation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    QuestionWord,
    Sep,
    EntityIri,
    EntityLabel,
    RelationIri,
    RelationLabel,
}

/// Linearized model input with one provenance tag per whitespace token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedInput {
    pub text: String,
    pub provenance: Vec<Provenance>,
    /// Order in which the original entities were emitted.
    pub entity_order: Vec<usize>,
    pub relation_order: Vec<usize>,
    pub seed: u64,
}

impl SerializedInput {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

/// Builds `w1 .. wn [SEP] E1 Elab1 .. [SEP] R1 Rlab1 ..`, shuffling entities
/// and relations (each within its own segment) with a seeded RNG.
pub fn serialize_input(
    question: &str,
    entities: &[LinkedItem],
    relations: &[LinkedItem],
    seed: u64,
) -> SerializedInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entity_order: Vec<usize> = (0..entities.len()).collect();
    let mut relation_order: Vec<usize> = (0..relations.len()).collect();
    entity_order.shuffle(&mut rng);
    relation_order.shuffle(&mut rng);

    let mut words: Vec<&str> = Vec::new();
    let mut provenance = Vec::new();
    for w in question.split_whitespace() {
        words.push(w);
        provenance.push(Provenance::QuestionWord);
    }
    let segments = [
        (entities, &entity_order, Provenance::EntityIri, Provenance::EntityLabel),
        (relations, &relation_order, Provenance::RelationIri, Provenance::RelationLabel),
    ];
    for (items, order, iri_tag, label_tag) in segments {
        words.push(SEP);
        provenance.push(Provenance::Sep);
        for &i in order.iter() {
            let item = &items[i];
            words.push(&item.iri);
            provenance.push(iri_tag);
            for w in item.label.split_whitespace() {
                words.push(w);
                provenance.push(label_tag);
            }
        }
    }
    SerializedInput { text: words.join(" "), provenance, entity_order, relation_order, seed }
}

/// One line of a serialized training corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub input_text: String,
    pub target_text: String,
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> std::io::Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> std::io::Result<Vec<T>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dolley_madison_example() {
        let si = serialize_input(
            "Who is the spouse of Dolley Madison?",
            &[LinkedItem::entity("http://dbpedia.org/resource/Dolley_Madison", "Dolley Madison")],
            &[LinkedItem::relation("http://dbpedia.org/ontology/spouse", "spouse")],
            7,
        );
        assert_eq!(
            si.text,
            "Who is the spouse of Dolley Madison? [SEP] http://dbpedia.org/resource/Dolley_Madison Dolley Madison [SEP] http://dbpedia.org/ontology/spouse spouse"
        );
        assert_eq!(si.provenance.len(), si.tokens().count());
        assert_eq!(si.provenance[7], Provenance::Sep);
        assert_eq!(si.provenance[8], Provenance::EntityIri);
        assert_eq!(si.provenance[10], Provenance::EntityLabel);
    }

    #[test]
    fn no_links_gives_adjacent_separators() {
        let si = serialize_input("How many rivers ?", &[], &[], 0);
        assert_eq!(si.text, "How many rivers ? [SEP] [SEP]");
        assert_eq!(si.provenance.iter().filter(|p| **p == Provenance::Sep).count(), 2);
    }

    #[test]
    fn seeded_shuffle() {
        let ents: Vec<_> = (0..3).map(|i| LinkedItem::entity(format!("wd:Q{i}"), "")).collect();
        let a = serialize_input("q", &ents, &[], 11);
        let b = serialize_input("q", &ents, &[], 11);
        assert_eq!(a, b);
        let orders: std::collections::HashSet<Vec<usize>> =
            (0..100).map(|s| serialize_input("q", &ents, &[], s).entity_order).collect();
        assert!(orders.len() > 1);
        // every seed yields a permutation
        assert!(orders.iter().all(|o| {
            let mut s = o.clone();
            s.sort();
            s == vec![0, 1, 2]
        }));
    }
}

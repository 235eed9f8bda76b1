use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Number of sentinel markers a text-to-text vocabulary reserves.
pub const SENTINEL_CAPACITY: usize = 100;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("{requested} sentinel entries requested, capacity is {SENTINEL_CAPACITY}")]
    CapacityExceeded { requested: usize },
    #[error("sentinel entries must be non-empty")]
    EmptyEntry,
    #[error("sentinel <extra_id_{0}> is not in the table")]
    UnknownSentinel(usize),
    #[error("prefix sentinel <extra_id_{0}> has no local part after it")]
    DanglingPrefix(usize),
    #[error("line {line}: expected `surface<TAB>id`")]
    Parse { line: usize },
    #[error("sentinel table is not injective at `{0}`")]
    NotInjective(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentinelKind {
    /// A namespace IRI or prefix label; glued to the following local part on decode.
    Prefix,
    /// A SPARQL keyword or punctuation mark; stands alone.
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentinelEntry {
    pub surface: String,
    pub id: usize,
    pub kind: SentinelKind,
}

/// Bijection between prefixes / vocabulary items and `<extra_id_k>` markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentinelTable {
    entries: Vec<SentinelEntry>,
    by_surface: HashMap<String, usize>,
    by_id: HashMap<usize, usize>,
}

pub fn marker(id: usize) -> String {
    format!("<extra_id_{id}>")
}

/// Prefix entries end in `:`, `/` or `#`; a lone `/` is the division operator.
fn infer_kind(surface: &str) -> SentinelKind {
    if surface.len() > 1 && surface.ends_with([':', '/', '#']) {
        SentinelKind::Prefix
    } else {
        SentinelKind::Keyword
    }
}

/// Assigns ascending IDs to the sorted prefixes, then the sorted vocabulary.
pub fn build_sentinel_table<P, V>(prefixes: P, vocab: V) -> Result<SentinelTable, CodecError>
where
    P: IntoIterator,
    P::Item: AsRef<str>,
    V: IntoIterator,
    V::Item: AsRef<str>,
{
    let prefixes: BTreeSet<String> = prefixes.into_iter().map(|s| s.as_ref().to_string()).collect();
    let vocab: BTreeSet<String> = vocab
        .into_iter()
        .map(|s| s.as_ref().to_string())
        .filter(|s| !prefixes.contains(s))
        .collect();
    let requested = prefixes.len() + vocab.len();
    if requested > SENTINEL_CAPACITY {
        return Err(CodecError::CapacityExceeded { requested });
    }
    let mut entries = Vec::with_capacity(requested);
    for (kind, group) in [(SentinelKind::Prefix, prefixes), (SentinelKind::Keyword, vocab)] {
        for surface in group {
            if surface.is_empty() {
                return Err(CodecError::EmptyEntry);
            }
            entries.push(SentinelEntry { id: entries.len(), surface, kind });
        }
    }
    SentinelTable::from_entries(entries)
}

impl SentinelTable {
    fn from_entries(entries: Vec<SentinelEntry>) -> Result<Self, CodecError> {
        if entries.len() > SENTINEL_CAPACITY {
            return Err(CodecError::CapacityExceeded { requested: entries.len() });
        }
        let mut by_surface = HashMap::new();
        let mut by_id = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.surface.is_empty() {
                return Err(CodecError::EmptyEntry);
            }
            if e.id >= SENTINEL_CAPACITY {
                return Err(CodecError::CapacityExceeded { requested: e.id + 1 });
            }
            if by_surface.insert(e.surface.clone(), i).is_some() || by_id.insert(e.id, i).is_some() {
                return Err(CodecError::NotInjective(e.surface.clone()));
            }
        }
        Ok(SentinelTable { entries, by_surface, by_id })
    }

    pub fn entries(&self) -> &[SentinelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_of(&self, surface: &str) -> Option<usize> {
        self.by_surface.get(surface).map(|&i| self.entries[i].id)
    }

    pub fn entry(&self, id: usize) -> Option<&SentinelEntry> {
        self.by_id.get(&id).map(|&i| &self.entries[i])
    }

    fn keyword(&self, token: &str) -> Option<&SentinelEntry> {
        self.by_surface
            .get(token)
            .map(|&i| &self.entries[i])
            .filter(|e| e.kind == SentinelKind::Keyword)
    }

    /// Longest prefix entry that `token` starts with, leaving a non-empty rest.
    fn longest_prefix<'t>(&self, token: &'t str) -> Option<(&SentinelEntry, &'t str)> {
        self.entries
            .iter()
            .filter(|e| e.kind == SentinelKind::Prefix && token.len() > e.surface.len())
            .filter(|e| token.starts_with(e.surface.as_str()))
            .max_by_key(|e| e.surface.len())
            .map(|e| (e, &token[e.surface.len()..]))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}", e.surface, e.id);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, CodecError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, id) = line.rsplit_once('\t').ok_or(CodecError::Parse { line: i + 1 })?;
            let id: usize = id.trim().parse().map_err(|_| CodecError::Parse { line: i + 1 })?;
            entries.push(SentinelEntry { surface: surface.to_string(), id, kind: infer_kind(surface) });
        }
        Self::from_entries(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CodecError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CodecError> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

/// Replaces vocabulary tokens with their markers and splits prefixed IRIs into
/// `marker local`. A bracketed IRI keeps its closing `>` on the local part.
pub fn encode_sentinels(text: &str, table: &SentinelTable) -> String {
    let mut out: Vec<String> = Vec::new();
    for token in text.split_whitespace() {
        if let Some(e) = table.keyword(token) {
            out.push(marker(e.id));
            continue;
        }
        let (body, bracketed) = match token.strip_prefix('<') {
            Some(rest) if rest.ends_with('>') => (rest, true),
            _ => (token, false),
        };
        match table.longest_prefix(body) {
            Some((e, rest)) if bracketed || !rest.ends_with('>') => {
                out.push(marker(e.id));
                out.push(rest.to_string());
            }
            _ => out.push(token.to_string()),
        }
    }
    out.join(" ")
}

enum Piece<'a> {
    Marker(usize),
    Text(&'a str),
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    for token in text.split_whitespace() {
        let mut rest = token;
        while !rest.is_empty() {
            match find_marker(rest) {
                Some((start, end, id)) => {
                    if start > 0 {
                        out.push(Piece::Text(&rest[..start]));
                    }
                    out.push(Piece::Marker(id));
                    rest = &rest[end..];
                }
                None => {
                    out.push(Piece::Text(rest));
                    break;
                }
            }
        }
    }
    out
}

fn find_marker(s: &str) -> Option<(usize, usize, usize)> {
    let mut from = 0;
    while let Some(off) = s[from..].find("<extra_id_") {
        let start = from + off;
        let digits_start = start + "<extra_id_".len();
        let digits_end = s[digits_start..]
            .find(|c: char| !c.is_ascii_digit())
            .map(|i| digits_start + i)
            .unwrap_or(s.len());
        if digits_end > digits_start && s[digits_end..].starts_with('>') {
            let id = s[digits_start..digits_end].parse().ok()?;
            return Some((start, digits_end + 1, id));
        }
        from = digits_start;
    }
    None
}

/// Inverse of [`encode_sentinels`] on single-space normalized text.
pub fn decode_sentinels(output: &str, table: &SentinelTable) -> Result<String, CodecError> {
    let pieces = pieces(output);
    let mut out: Vec<String> = Vec::with_capacity(pieces.len());
    let mut i = 0;
    while i < pieces.len() {
        match pieces[i] {
            Piece::Text(t) => out.push(t.to_string()),
            Piece::Marker(id) => {
                let e = table.entry(id).ok_or(CodecError::UnknownSentinel(id))?;
                match e.kind {
                    SentinelKind::Keyword => out.push(e.surface.clone()),
                    SentinelKind::Prefix => {
                        let Some(Piece::Text(local)) = pieces.get(i + 1) else {
                            return Err(CodecError::DanglingPrefix(id));
                        };
                        if local.ends_with('>') {
                            out.push(format!("<{}{}", e.surface, local));
                        } else {
                            out.push(format!("{}{}", e.surface, local));
                        }
                        i += 1;
                    }
                }
            }
        }
        i += 1;
    }
    Ok(out.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dbpedia_fixture() -> SentinelTable {
        build_sentinel_table(
            [
                "http://dbpedia.org/ontology/",
                "http://dbpedia.org/class/yago/",
                "http://dbpedia.org/datatype/",
                "http://dbpedia.org/resource/",
                "http://dbpedia.org/resource/Category:",
                "http://dbpedia.org/property/",
            ],
            ["SELECT", "DISTINCT", "WHERE", "{", "}", "ASK"],
        )
        .unwrap()
    }

    fn wikidata_fixture() -> SentinelTable {
        build_sentinel_table(["wd:", "wdt:", "p:", "ps:"], ["ASK", "WHERE", "{", "}"]).unwrap()
    }

    #[test]
    fn ontology_namespace_gets_id_two() {
        assert_eq!(dbpedia_fixture().id_of("http://dbpedia.org/ontology/"), Some(2));
        assert_eq!(wikidata_fixture().id_of("wdt:"), Some(3));
    }

    #[test]
    fn keywords_only() {
        let t = build_sentinel_table(Vec::<String>::new(), ["WHERE", "ASK", "SELECT"]).unwrap();
        let ids: Vec<_> = ["ASK", "SELECT", "WHERE"].iter().map(|s| t.id_of(s).unwrap()).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn capacity_boundary() {
        let vocab: Vec<String> = (0..100).map(|i| format!("K{i}")).collect();
        assert!(build_sentinel_table(Vec::<String>::new(), &vocab).is_ok());
        assert!(matches!(
            build_sentinel_table(["x:"], &vocab),
            Err(CodecError::CapacityExceeded { requested: 101 })
        ));
        assert!(matches!(build_sentinel_table([""], ["A"]), Err(CodecError::EmptyEntry)));
    }

    #[test]
    fn encodes_prefix_examples() {
        assert_eq!(
            encode_sentinels("http://dbpedia.org/ontology/spouse", &dbpedia_fixture()),
            "<extra_id_2> spouse"
        );
        assert_eq!(encode_sentinels("wdt:P31", &wikidata_fixture()), "<extra_id_3> P31");
        assert_eq!(encode_sentinels("who is it", &wikidata_fixture()), "who is it");
    }

    #[test]
    fn longest_namespace_wins() {
        let t = dbpedia_fixture();
        let enc = encode_sentinels("http://dbpedia.org/resource/Category:Rivers", &t);
        let id = t.id_of("http://dbpedia.org/resource/Category:").unwrap();
        assert_eq!(enc, format!("<extra_id_{id}> Rivers"));
    }

    #[test]
    fn decodes_prefix_example() {
        assert_eq!(decode_sentinels("<extra_id_3> P31", &wikidata_fixture()).unwrap(), "wdt:P31");
        assert_eq!(decode_sentinels("<extra_id_3>P31", &wikidata_fixture()).unwrap(), "wdt:P31");
    }

    #[test]
    fn decode_errors() {
        let ten = build_sentinel_table(Vec::<String>::new(), (0..10).map(|i| format!("K{i}"))).unwrap();
        assert!(matches!(decode_sentinels("<extra_id_99>", &ten), Err(CodecError::UnknownSentinel(99))));
        assert!(matches!(
            decode_sentinels("ASK <extra_id_3>", &wikidata_fixture()),
            Err(CodecError::DanglingPrefix(3))
        ));
    }

    #[test]
    fn bracketed_iris_round_trip() {
        let t = dbpedia_fixture();
        let q = "SELECT DISTINCT ?uri WHERE { <http://dbpedia.org/resource/Dolley_Madison> <http://dbpedia.org/ontology/spouse> ?uri }";
        let enc = encode_sentinels(q, &t);
        assert!(!enc.contains("http://"), "{enc}");
        assert_eq!(decode_sentinels(&enc, &t).unwrap(), q);
    }

    #[test]
    fn tsv_round_trip() {
        let t = dbpedia_fixture();
        let back = SentinelTable::from_tsv(&t.to_tsv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.entry(2).unwrap().kind, SentinelKind::Prefix);
        assert_eq!(back.entry(back.id_of("{").unwrap()).unwrap().kind, SentinelKind::Keyword);
    }
}

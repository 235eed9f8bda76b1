use std::collections::BTreeSet;

use super::lexer::{SparqlToken, TokenKind};

/// Keywords every vocabulary starts from.
pub const CORE_KEYWORDS: &[&str] = &[
    "SELECT", "ASK", "WHERE", "FILTER", "DISTINCT", "COUNT", "LIMIT", "ORDER", "BY", "ASC", "DESC",
    "OFFSET", "UNION", "OPTIONAL", "AS",
];

pub const CORE_PUNCT: &[&str] = &["{", "}", "(", ")", "=", "!=", "<", ">", "<=", ">=", ".", ","];

/// Keywords and built-in functions the lexer recognises beyond the core list.
/// They only enter a vocabulary once observed in a corpus.
pub const EXTENDED_KEYWORDS: &[&str] = &[
    "PREFIX", "BASE", "GROUP", "HAVING", "MINUS", "BIND", "VALUES", "NOT", "EXISTS", "IN",
    "CONTAINS", "LCASE", "UCASE", "YEAR", "MONTH", "DAY", "STRSTARTS", "STRENDS", "LANG",
    "LANGMATCHES", "STR", "REGEX", "MAX", "MIN", "AVG", "SUM", "SAMPLE", "BOUND", "IF", "ISIRI",
    "ISURI", "ISLITERAL", "DATATYPE", "STRLEN", "SUBSTR", "CONCAT", "ABS", "NOW", "a",
];

pub const EXTENDED_PUNCT: &[&str] = &[";", "&&", "||", "!", "*", "+", "-", "/"];

/// Returns the normalized keyword form of `word` if the lexer knows it.
///
/// `a` (the `rdf:type` shorthand) is case-sensitive in SPARQL and stays lowercase.
pub fn known_keyword(word: &str) -> Option<&'static str> {
    if word == "a" {
        return Some("a");
    }
    let upper = word.to_ascii_uppercase();
    CORE_KEYWORDS
        .iter()
        .chain(EXTENDED_KEYWORDS.iter())
        .find(|k| **k == upper)
        .copied()
}

pub fn is_punct(text: &str) -> bool {
    CORE_PUNCT.contains(&text) || EXTENDED_PUNCT.contains(&text)
}

/// The fixed SPARQL vocabulary: keywords and punctuation a model may emit
/// without copying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparqlVocabulary {
    entries: BTreeSet<String>,
}

impl SparqlVocabulary {
    pub fn core() -> Self {
        let entries = CORE_KEYWORDS
            .iter()
            .chain(CORE_PUNCT.iter())
            .map(|s| s.to_string())
            .collect();
        SparqlVocabulary { entries }
    }

    /// Core vocabulary plus every keyword and punctuation token seen in `queries`.
    pub fn observed<'a, I>(queries: I) -> Self
    where
        I: IntoIterator<Item = &'a [SparqlToken]>,
    {
        let mut vocab = Self::core();
        for tokens in queries {
            vocab.observe(tokens);
        }
        vocab
    }

    pub fn observe(&mut self, tokens: &[SparqlToken]) {
        for t in tokens {
            if matches!(t.kind, TokenKind::Keyword | TokenKind::Punct) {
                self.entries.insert(t.text.clone());
            }
        }
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.contains(text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_lookup_normalizes_case() {
        assert_eq!(known_keyword("select"), Some("SELECT"));
        assert_eq!(known_keyword("lcase"), Some("LCASE"));
        assert_eq!(known_keyword("a"), Some("a"));
        assert_eq!(known_keyword("A"), None);
        assert_eq!(known_keyword("frobnicate"), None);
    }

    #[test]
    fn observed_extends_core() {
        let toks = super::super::tokenize_sparql("SELECT ?x WHERE { ?x ?p ?y FILTER(CONTAINS(?y, 'a')) }")
            .unwrap();
        let v = SparqlVocabulary::observed([toks.as_slice()]);
        assert!(v.contains("CONTAINS"));
        assert!(v.contains("SELECT"));
        assert!(!SparqlVocabulary::core().contains("CONTAINS"));
    }
}

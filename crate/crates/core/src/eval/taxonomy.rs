use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::copy::{literal_lexical, literal_words, question_words, contains_run};
use crate::codec::LinkedItem;
use crate::sparql::{
    expand_prefixes, local_part, PrefixTable, SparqlQuery, SparqlToken, Term, TokenKind, TriplePattern,
};

/// Primary error class of a mismatching prediction. Variants are listed in
/// the order they are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    SyntaxError,
    WrongIntent,
    CopyMorph,
    CopyError,
    TripleFlip,
    WrongVar,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 7] = [
        ErrorCategory::TripleFlip,
        ErrorCategory::WrongVar,
        ErrorCategory::WrongIntent,
        ErrorCategory::CopyError,
        ErrorCategory::CopyMorph,
        ErrorCategory::SyntaxError,
        ErrorCategory::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorCategory::TripleFlip => "Triple flip",
            ErrorCategory::WrongVar => "Wrong variable",
            ErrorCategory::WrongIntent => "Wrong intent",
            ErrorCategory::CopyError => "Copy error",
            ErrorCategory::CopyMorph => "Copy morphing",
            ErrorCategory::SyntaxError => "Syntax error",
            ErrorCategory::Other => "Other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const MORPH_DISTANCE: usize = 4;

/// Assigns the first matching category in precedence order: syntax, intent,
/// copy morphing, copy error, triple flip, wrong variable, other.
pub fn categorize_error(gold: &SparqlQuery, pred: &str, linked: &[LinkedItem], question: &str) -> ErrorCategory {
    let table = PrefixTable::standard();
    let Ok(pred) = SparqlQuery::parse_with(pred, &table) else {
        return ErrorCategory::SyntaxError;
    };
    if gold.form != pred.form {
        return ErrorCategory::WrongIntent;
    }
    let gold_x = expand_prefixes(gold, &table).unwrap_or_else(|_| gold.clone());
    let pred_x = expand_prefixes(&pred, &table).unwrap_or_else(|_| pred.clone());

    if is_copy_morph(&gold_x, &pred_x, linked, &table) {
        return ErrorCategory::CopyMorph;
    }
    if is_copy_error(&gold_x, &pred_x, question) {
        return ErrorCategory::CopyError;
    }
    if is_triple_flip(&gold_x, &pred_x) {
        return ErrorCategory::TripleFlip;
    }
    if gold_x != pred_x && same_skeleton(&gold_x.tokens, &pred_x.tokens) {
        return ErrorCategory::WrongVar;
    }
    ErrorCategory::Other
}

fn full_iri(text: &str, table: &PrefixTable) -> String {
    if let Some(inner) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        return inner.to_string();
    }
    table.expand(text).unwrap_or_else(|_| text.to_string())
}

fn query_iris(q: &SparqlQuery) -> BTreeSet<String> {
    q.iris().map(|t| full_iri(&t.text, &PrefixTable::standard())).collect()
}

fn is_copy_morph(gold: &SparqlQuery, pred: &SparqlQuery, linked: &[LinkedItem], table: &PrefixTable) -> bool {
    let linked_iris: BTreeSet<String> = linked.iter().map(|l| full_iri(&l.iri, table)).collect();
    let gold_iris = query_iris(gold);
    query_iris(pred)
        .iter()
        .filter(|iri| !linked_iris.contains(*iri) && !gold_iris.contains(*iri))
        .any(|iri| {
            let local = local_part(iri);
            linked_iris.iter().any(|l| edit_distance(local, local_part(l)) <= MORPH_DISTANCE)
        })
}

fn is_copy_error(gold: &SparqlQuery, pred: &SparqlQuery, question: &str) -> bool {
    let norm = |q: &SparqlQuery| -> BTreeSet<String> { q.literals().map(literal_lexical).collect() };
    let (g, p) = (norm(gold), norm(pred));
    if g == p {
        return false;
    }
    let words = question_words(question);
    g.symmetric_difference(&p).chain(g.intersection(&p)).any(|lit| {
        let lw = literal_words(lit);
        !lw.is_empty() && contains_run(&words, &lw)
    })
}

fn term_key(t: &Term) -> String {
    match t {
        Term::Literal(l) => format!("L{}", literal_lexical(l)),
        Term::Iri(i) => format!("I{}", full_iri(i, &PrefixTable::standard())),
        Term::Variable(v) => format!("V{v}"),
    }
}

fn triple_key(t: &TriplePattern) -> (String, String, String) {
    (term_key(&t.subject), term_key(&t.predicate), term_key(&t.object))
}

fn is_triple_flip(gold: &SparqlQuery, pred: &SparqlQuery) -> bool {
    let pred_triples: BTreeSet<_> = pred.triples.iter().map(triple_key).collect();
    gold.triples.iter().map(triple_key).any(|(s, p, o)| {
        s != o && pred_triples.contains(&(o.clone(), p.clone(), s.clone())) && !pred_triples.contains(&(s, p, o))
    })
}

/// Token sequences equal once every variable is replaced by a placeholder.
fn same_skeleton(a: &[SparqlToken], b: &[SparqlToken]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x.kind, y.kind) {
            (TokenKind::Variable, TokenKind::Variable) => true,
            _ => x == y,
        })
}

/// Levenshtein distance over characters.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

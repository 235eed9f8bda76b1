use crate::kg_client::canonical_number;
use crate::pgn::copy_form;
use crate::sparql::SparqlQuery;

/// Lexical value of a literal token: quotes, language tag and datatype
/// removed, numbers canonicalized.
pub fn literal_lexical(token: &str) -> String {
    let t = token.trim();
    for q in ["\"\"\"", "'''", "\"", "'"] {
        if let Some(rest) = t.strip_prefix(q) {
            if let Some(end) = rest.rfind(q) {
                let body = &rest[..end];
                return canonical_number(body).unwrap_or_else(|| body.to_string());
            }
        }
    }
    let bare = t.split("^^").next().unwrap_or(t);
    canonical_number(bare).unwrap_or_else(|| bare.to_string())
}

fn normalize_word(w: &str) -> Option<String> {
    let w = copy_form(w);
    if w.is_empty() || w.chars().all(|c| !c.is_alphanumeric()) {
        return None;
    }
    Some(canonical_number(w).unwrap_or_else(|| w.to_lowercase()))
}

/// Whitespace words, sentence punctuation trimmed, lowercased, numbers
/// canonicalized.
pub fn question_words(question: &str) -> Vec<String> {
    question.split_whitespace().filter_map(normalize_word).collect()
}

pub fn literal_words(lexical: &str) -> Vec<String> {
    lexical.split_whitespace().filter_map(normalize_word).collect()
}

pub(crate) fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// True when some literal of the gold query occurs in the question as a
/// contiguous run of words. Matching ignores case and sentence punctuation
/// and compares numbers by value (`22.40` matches `22.4`).
pub fn copy_required(question: &str, gold: &SparqlQuery) -> bool {
    let words = question_words(question);
    gold.literals().any(|lit| contains_run(&words, &literal_words(&literal_lexical(lit))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> SparqlQuery {
        SparqlQuery::parse(s).unwrap()
    }

    #[test]
    fn lexical_forms() {
        assert_eq!(literal_lexical("\"Dune\"@en"), "Dune");
        assert_eq!(literal_lexical("'22.40'^^xsd:decimal"), "22.4");
        assert_eq!(literal_lexical("22.40"), "22.4");
        assert_eq!(literal_lexical("\"a 'b' c\""), "a 'b' c");
    }

    #[test]
    fn numeric_literal_in_question() {
        let gold = q("ASK WHERE { wd:Q2084454 wdt:P5066 ?obj FILTER(?obj = 22.4) }");
        assert!(copy_required("Is the operating temperature of Hamburg Eastern Railway equal to 22.4?", &gold));
        assert!(!copy_required("Is the operating temperature of Hamburg Eastern Railway equal to 22?", &gold));
    }

    #[test]
    fn no_literals() {
        let gold = q("SELECT ?x WHERE { wd:Q76 wdt:P26 ?x }");
        assert!(!copy_required("Who is the spouse of Barack Obama?", &gold));
    }

    #[test]
    fn string_literal_case_insensitive() {
        let gold = q("SELECT ?x WHERE { ?x wdt:P31 wd:Q5 . ?x rdfs:label ?l FILTER(CONTAINS(LCASE(?l), 'new york')) }");
        assert!(copy_required("Which humans have New York in their name?", &gold));
        assert!(!copy_required("Which humans have York in their name?", &gold));
    }
}

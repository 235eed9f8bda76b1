use crate::sparql::{SparqlQuery, TokenKind};

fn is_quote(tok: &str) -> bool {
    tok == "'" || tok == "\""
}

/// Splits a query into the whitespace tokens a sequence model emits: full
/// IRIs lose their angle brackets and string literals are broken into quote,
/// word and suffix tokens so their words can be copied one by one.
pub fn to_model_tokens(query: &SparqlQuery) -> Vec<String> {
    let mut out = Vec::with_capacity(query.tokens.len());
    for t in &query.tokens {
        match t.kind {
            TokenKind::FullIri => out.push(t.text[1..t.text.len() - 1].to_string()),
            TokenKind::Literal if t.text.starts_with(['\'', '"']) => {
                let quote = &t.text[..1];
                let close = t.text.rfind(quote).unwrap_or(0);
                out.push(quote.to_string());
                out.extend(t.text[1..close.max(1)].split_whitespace().map(str::to_string));
                out.push(quote.to_string());
                let suffix = &t.text[close + 1..];
                if !suffix.is_empty() {
                    out.push(suffix.to_string());
                }
            }
            _ => out.push(t.text.clone()),
        }
    }
    out
}

/// Inverse of [`to_model_tokens`]; the result is a candidate query string and
/// may fail to parse when the tokens came from a model.
pub fn from_model_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i].as_ref();
        if is_quote(tok) {
            if let Some(end) = (i + 1..tokens.len()).find(|&j| tokens[j].as_ref() == tok) {
                let words: Vec<&str> = tokens[i + 1..end].iter().map(AsRef::as_ref).collect();
                let mut lit = format!("{tok}{}{tok}", words.join(" "));
                i = end + 1;
                if let Some(next) = tokens.get(i).map(AsRef::as_ref) {
                    if next.starts_with('@') || next.starts_with("^^") {
                        lit.push_str(next);
                        i += 1;
                    }
                }
                parts.push(lit);
                continue;
            }
        }
        if tok.starts_with("http://") || tok.starts_with("https://") {
            parts.push(format!("<{tok}>"));
        } else {
            parts.push(tok.to_string());
        }
        i += 1;
    }
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::canonicalize;

    #[test]
    fn literal_words_become_tokens() {
        let q = SparqlQuery::parse(
            "SELECT ?x WHERE { ?x rdfs:label 'Bob the Builder'@en . ?x wdt:P2 \"22.40\"^^xsd:decimal }",
        )
        .unwrap();
        let toks = to_model_tokens(&q);
        let s: Vec<&str> = toks.iter().map(String::as_str).collect();
        assert!(s.windows(6).any(|w| w == ["'", "Bob", "the", "Builder", "'", "@en"]));
        assert!(s.windows(4).any(|w| w == ["\"", "22.40", "\"", "^^xsd:decimal"]));
        assert_eq!(SparqlQuery::parse(&from_model_tokens(&toks)).unwrap(), q);
    }

    #[test]
    fn full_iris_are_bare() {
        let q = SparqlQuery::parse(
            "SELECT DISTINCT ?uri WHERE { <http://dbpedia.org/resource/Dolley_Madison> <http://dbpedia.org/ontology/spouse> ?uri }",
        )
        .unwrap();
        let toks = to_model_tokens(&canonicalize(&q));
        assert_eq!(toks[5], "http://dbpedia.org/resource/Dolley_Madison");
        assert_eq!(SparqlQuery::parse(&from_model_tokens(&toks)).unwrap(), canonicalize(&q));
    }

    #[test]
    fn empty_literal_and_unclosed_quote() {
        let q = SparqlQuery::parse("ASK WHERE { ?x rdfs:label '' }").unwrap();
        let toks = to_model_tokens(&q);
        assert_eq!(from_model_tokens(&toks), "ASK WHERE { ?x rdfs:label '' }");
        assert_eq!(from_model_tokens(&["'", "a"]), "' a");
    }
}

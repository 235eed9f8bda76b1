use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{detokenize, LexError, Lexer, SparqlToken, TokenKind};
use super::prefix::{PrefixError, PrefixTable};
use super::validate::{parse_tokens, SyntaxIssue};

#[derive(Debug, Error)]
pub enum SparqlError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("malformed query: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    MalformedQuery(Vec<SyntaxIssue>),
    #[error(transparent)]
    Prefix(#[from] PrefixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryForm {
    Ask,
    Select,
    SelectCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Variable(String),
    /// IRI as written: `<...>`, a prefixed name, or `a`.
    Iri(String),
    Literal(String),
}

impl Term {
    pub fn text(&self) -> &str {
        match self {
            Term::Variable(s) | Term::Iri(s) | Term::Literal(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

/// A validated query with its token and structural views.
///
/// Equality compares token sequences; `raw` keeps the original spacing.
#[derive(Debug, Clone)]
pub struct SparqlQuery {
    pub raw: String,
    pub tokens: Vec<SparqlToken>,
    pub form: QueryForm,
    pub triples: Vec<TriplePattern>,
    /// Variable names in order of first occurrence.
    pub variables: Vec<String>,
}

impl SparqlQuery {
    /// Tokenizes with the built-in prefix tables and validates.
    pub fn parse(text: &str) -> Result<Self, SparqlError> {
        Self::parse_with(text, &PrefixTable::standard())
    }

    pub fn parse_with(text: &str, prefixes: &PrefixTable) -> Result<Self, SparqlError> {
        let tokens = Lexer::new(prefixes).tokenize(text)?;
        Self::from_tokens(text.to_string(), tokens)
    }

    pub fn from_tokens(raw: String, tokens: Vec<SparqlToken>) -> Result<Self, SparqlError> {
        let parsed = parse_tokens(&tokens);
        if !parsed.issues.is_empty() {
            return Err(SparqlError::MalformedQuery(parsed.issues));
        }
        let form = parsed.form.expect("validated query has a form");
        let mut variables: Vec<String> = Vec::new();
        for t in &tokens {
            if t.kind == TokenKind::Variable && !variables.contains(&t.text) {
                variables.push(t.text.clone());
            }
        }
        Ok(SparqlQuery { raw, tokens, form, triples: parsed.triples, variables })
    }

    fn rebuild(tokens: Vec<SparqlToken>) -> Result<Self, SparqlError> {
        Self::from_tokens(detokenize(&tokens), tokens)
    }

    /// Single-space joined tokens.
    pub fn normalized(&self) -> String {
        detokenize(&self.tokens)
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter(|t| t.kind == TokenKind::Literal).map(|t| t.text.as_str())
    }

    /// Every IRI token (prefixed or full) in textual order.
    pub fn iris(&self) -> impl Iterator<Item = &SparqlToken> {
        self.tokens
            .iter()
            .filter(|t| matches!(t.kind, TokenKind::PrefixedName | TokenKind::FullIri))
    }
}

impl PartialEq for SparqlQuery {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Eq for SparqlQuery {}

impl fmt::Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized())
    }
}

/// Normalizes whitespace and keyword case and renames variables to
/// `?var0, ?var1, ...` in first-occurrence order.
pub fn canonicalize(query: &SparqlQuery) -> SparqlQuery {
    let names: HashMap<&str, String> = query
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), format!("?var{i}")))
        .collect();
    let tokens = query
        .tokens
        .iter()
        .map(|t| match t.kind {
            TokenKind::Variable => SparqlToken::new(TokenKind::Variable, names[t.text.as_str()].clone()),
            _ => t.clone(),
        })
        .collect();
    SparqlQuery::rebuild(tokens).expect("renaming variables preserves validity")
}

/// Replaces every prefixed name with its full `<IRI>` form.
pub fn expand_prefixes(query: &SparqlQuery, table: &PrefixTable) -> Result<SparqlQuery, SparqlError> {
    let mut changed = false;
    let mut tokens = Vec::with_capacity(query.tokens.len());
    for t in &query.tokens {
        if t.kind == TokenKind::PrefixedName {
            tokens.push(SparqlToken::new(TokenKind::FullIri, format!("<{}>", table.expand(&t.text)?)));
            changed = true;
        } else {
            tokens.push(t.clone());
        }
    }
    if !changed {
        return Ok(query.clone());
    }
    SparqlQuery::rebuild(tokens)
}

/// Compacts full IRIs whose namespace is in `table` into prefixed names.
pub fn contract_prefixes(query: &SparqlQuery, table: &PrefixTable) -> SparqlQuery {
    let mut changed = false;
    let tokens = query
        .tokens
        .iter()
        .map(|t| {
            if t.kind == TokenKind::FullIri {
                if let Some(p) = table.contract(&t.text[1..t.text.len() - 1]) {
                    changed = true;
                    return SparqlToken::new(TokenKind::PrefixedName, p);
                }
            }
            t.clone()
        })
        .collect();
    if !changed {
        return query.clone();
    }
    SparqlQuery::rebuild(tokens).expect("contraction preserves validity")
}

/// Triple patterns of the WHERE clause in textual order.
pub fn extract_triples(query: &SparqlQuery) -> Result<Vec<TriplePattern>, SparqlError> {
    let parsed = parse_tokens(&query.tokens);
    if !parsed.issues.is_empty() {
        return Err(SparqlError::MalformedQuery(parsed.issues));
    }
    Ok(parsed.triples)
}

/// Full IRI string behind an IRI token, without angle brackets.
pub fn iri_of(token: &SparqlToken, table: &PrefixTable) -> Option<String> {
    match token.kind {
        TokenKind::FullIri => Some(token.text[1..token.text.len() - 1].to_string()),
        TokenKind::PrefixedName => table.expand(&token.text).ok(),
        _ => None,
    }
}

/// Local name of an IRI: the part after the last `/`, `#` or prefix colon.
pub fn local_part(iri: &str) -> &str {
    let iri = iri.trim_start_matches('<').trim_end_matches('>');
    if !iri.contains("://") {
        if let Some((_, local)) = iri.split_once(':') {
            return local;
        }
    }
    let cut = iri.rfind(['/', '#']).map(|i| i + 1).unwrap_or(0);
    &iri[cut..]
}

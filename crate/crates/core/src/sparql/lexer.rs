use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prefix::PrefixTable;
use super::vocab::known_keyword;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Variable,
    PrefixedName,
    FullIri,
    Literal,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparqlToken {
    pub kind: TokenKind,
    pub text: String,
}

impl SparqlToken {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        SparqlToken { kind, text: text.into() }
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punct, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    /// Variables, IRIs and literals.
    pub fn is_term(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Variable | TokenKind::PrefixedName | TokenKind::FullIri | TokenKind::Literal
        )
    }
}

impl fmt::Display for SparqlToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("empty query")]
    Empty,
    #[error("unexpected character {ch:?} at byte {position}")]
    UnexpectedChar { position: usize, ch: char },
    #[error("unknown keyword `{word}` at byte {position}")]
    UnknownKeyword { position: usize, word: String },
    #[error("unknown prefix `{prefix}` at byte {position}")]
    UnknownPrefix { position: usize, prefix: String },
    #[error("unterminated string literal starting at byte {position}")]
    UnterminatedString { position: usize },
}

impl LexError {
    pub fn position(&self) -> usize {
        match self {
            LexError::Empty => 0,
            LexError::UnexpectedChar { position, .. }
            | LexError::UnknownKeyword { position, .. }
            | LexError::UnknownPrefix { position, .. }
            | LexError::UnterminatedString { position } => *position,
        }
    }
}

/// Tokenizes with the union of the built-in Wikidata and DBpedia prefix tables.
pub fn tokenize_sparql(text: &str) -> Result<Vec<SparqlToken>, LexError> {
    Lexer::new(&PrefixTable::standard()).tokenize(text)
}

/// Joins token texts with single spaces.
pub fn detokenize(tokens: &[SparqlToken]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

pub struct Lexer<'t> {
    prefixes: &'t PrefixTable,
}

fn is_iri_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_local_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '%')
}

impl<'t> Lexer<'t> {
    pub fn new(prefixes: &'t PrefixTable) -> Self {
        Lexer { prefixes }
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<SparqlToken>, LexError> {
        let mut tokens: Vec<SparqlToken> = Vec::new();
        let bytes = text.as_bytes();
        let mut i = 0;
        let char_at = |i: usize| text[i..].chars().next();
        while let Some(c) = char_at(i) {
            if c.is_whitespace() {
                i += c.len_utf8();
                continue;
            }
            let start = i;
            let next = char_at(i + c.len_utf8());
            match c {
                '?' | '$' => {
                    let body = scan(text, i + 1, is_name_char);
                    if body == i + 1 {
                        return Err(LexError::UnexpectedChar { position: i, ch: c });
                    }
                    tokens.push(SparqlToken::new(
                        TokenKind::Variable,
                        format!("?{}", &text[i + 1..body]),
                    ));
                    i = body;
                }
                '<' => {
                    let end = scan(text, i + 1, is_iri_char);
                    if end > i + 1 && bytes.get(end) == Some(&b'>') && text[i + 1..end].contains(':') {
                        tokens.push(SparqlToken::new(TokenKind::FullIri, &text[i..=end]));
                        i = end + 1;
                    } else if next == Some('=') {
                        tokens.push(SparqlToken::new(TokenKind::Punct, "<="));
                        i += 2;
                    } else {
                        tokens.push(SparqlToken::new(TokenKind::Punct, "<"));
                        i += 1;
                    }
                }
                '>' | '!' => {
                    if next == Some('=') {
                        tokens.push(SparqlToken::new(TokenKind::Punct, format!("{c}=")));
                        i += 2;
                    } else {
                        tokens.push(SparqlToken::new(TokenKind::Punct, c.to_string()));
                        i += 1;
                    }
                }
                '&' | '|' => {
                    if next != Some(c) {
                        return Err(LexError::UnexpectedChar { position: i, ch: c });
                    }
                    tokens.push(SparqlToken::new(TokenKind::Punct, format!("{c}{c}")));
                    i += 2;
                }
                '{' | '}' | '(' | ')' | ',' | ';' | '=' | '*' | '+' | '/' => {
                    tokens.push(SparqlToken::new(TokenKind::Punct, c.to_string()));
                    i += 1;
                }
                '.' => {
                    if next.is_some_and(|n| n.is_ascii_digit()) && !follows_term(&tokens) {
                        let end = scan_number(text, i);
                        tokens.push(SparqlToken::new(TokenKind::Literal, &text[i..end]));
                        i = end;
                    } else {
                        tokens.push(SparqlToken::new(TokenKind::Punct, "."));
                        i += 1;
                    }
                }
                '-' => {
                    if next.is_some_and(|n| n.is_ascii_digit()) && !follows_term(&tokens) {
                        let end = scan_number(text, i + 1);
                        tokens.push(SparqlToken::new(TokenKind::Literal, &text[i..end]));
                        i = end;
                    } else {
                        tokens.push(SparqlToken::new(TokenKind::Punct, "-"));
                        i += 1;
                    }
                }
                '\'' | '"' => {
                    let end = self.scan_string(text, i, c)?;
                    tokens.push(SparqlToken::new(TokenKind::Literal, &text[i..end]));
                    i = end;
                }
                c if c.is_ascii_digit() => {
                    let end = scan_number(text, i);
                    tokens.push(SparqlToken::new(TokenKind::Literal, &text[i..end]));
                    i = end;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let word_end = scan(text, i, |c| is_name_char(c) || c == '-');
                    if bytes.get(word_end) == Some(&b':') {
                        let prefix = &text[i..=word_end];
                        if !self.prefixes.contains_prefix(prefix) {
                            return Err(LexError::UnknownPrefix {
                                position: start,
                                prefix: prefix.to_string(),
                            });
                        }
                        let mut end = scan(text, word_end + 1, is_local_char);
                        while end > word_end + 1 && bytes[end - 1] == b'.' {
                            end -= 1;
                        }
                        tokens.push(SparqlToken::new(TokenKind::PrefixedName, &text[i..end]));
                        i = end;
                        continue;
                    }
                    // keywords never contain '-'
                    let word_end = scan(text, i, is_name_char);
                    let word = &text[i..word_end];
                    if word == "true" || word == "false" {
                        tokens.push(SparqlToken::new(TokenKind::Literal, word));
                    } else if let Some(kw) = known_keyword(word) {
                        tokens.push(SparqlToken::new(TokenKind::Keyword, kw));
                    } else {
                        return Err(LexError::UnknownKeyword { position: start, word: word.to_string() });
                    }
                    i = word_end;
                }
                _ => return Err(LexError::UnexpectedChar { position: i, ch: c }),
            }
        }
        if tokens.is_empty() {
            return Err(LexError::Empty);
        }
        Ok(tokens)
    }

    /// Scans a quoted literal including an attached `@lang` or `^^datatype` suffix.
    fn scan_string(&self, text: &str, start: usize, quote: char) -> Result<usize, LexError> {
        let mut chars = text[start + 1..].char_indices();
        let mut close = None;
        while let Some((off, c)) = chars.next() {
            if c == '\\' {
                chars.next();
            } else if c == quote {
                close = Some(start + 1 + off);
                break;
            }
        }
        let close = close.ok_or(LexError::UnterminatedString { position: start })?;
        let mut end = close + 1;
        let rest = &text[end..];
        if let Some(tag) = rest.strip_prefix('@') {
            let len = tag
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(tag.len());
            end += 1 + len;
        } else if let Some(dt) = rest.strip_prefix("^^") {
            end += 2;
            if dt.starts_with('<') {
                let iri_end = scan(text, end + 1, is_iri_char);
                if text.as_bytes().get(iri_end) != Some(&b'>') {
                    return Err(LexError::UnexpectedChar { position: end, ch: '<' });
                }
                end = iri_end + 1;
            } else {
                let p_end = scan(text, end, |c| is_name_char(c) || c == '-');
                if text.as_bytes().get(p_end) != Some(&b':') {
                    return Err(LexError::UnexpectedChar { position: end, ch: '^' });
                }
                let prefix = &text[end..=p_end];
                if !self.prefixes.contains_prefix(prefix) {
                    return Err(LexError::UnknownPrefix { position: end, prefix: prefix.to_string() });
                }
                end = scan(text, p_end + 1, is_name_char);
            }
        }
        Ok(end)
    }
}

fn scan(text: &str, from: usize, pred: impl Fn(char) -> bool) -> usize {
    text[from..]
        .char_indices()
        .find(|(_, c)| !pred(*c))
        .map(|(off, _)| from + off)
        .unwrap_or(text.len())
}

fn scan_number(text: &str, from: usize) -> usize {
    let b = text.as_bytes();
    let digit = |i: usize| b.get(i).is_some_and(|c| c.is_ascii_digit());
    let mut i = from;
    while digit(i) {
        i += 1;
    }
    if b.get(i) == Some(&b'.') && digit(i + 1) {
        i += 1;
        while digit(i) {
            i += 1;
        }
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(b.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if digit(j) {
            i = j;
            while digit(i) {
                i += 1;
            }
        }
    }
    i
}

/// True when the previous token ends an operand, so a following `-` is binary.
fn follows_term(tokens: &[SparqlToken]) -> bool {
    tokens.last().is_some_and(|t| t.is_term() || t.is_punct(")"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(q: &str) -> Vec<(TokenKind, String)> {
        tokenize_sparql(q).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn tokenizes_copy_example() {
        let got = kinds("ASK WHERE { wd:Q2084454 wdt:P5066 ?obj filter(?obj = 22.4) }");
        let want: Vec<(TokenKind, String)> = [
            (Keyword, "ASK"),
            (Keyword, "WHERE"),
            (Punct, "{"),
            (PrefixedName, "wd:Q2084454"),
            (PrefixedName, "wdt:P5066"),
            (Variable, "?obj"),
            (Keyword, "FILTER"),
            (Punct, "("),
            (Variable, "?obj"),
            (Punct, "="),
            (Literal, "22.4"),
            (Punct, ")"),
            (Punct, "}"),
        ]
        .into_iter()
        .map(|(k, t)| (k, t.to_string()))
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(tokenize_sparql(""), Err(LexError::Empty));
        assert_eq!(tokenize_sparql("   \n"), Err(LexError::Empty));
    }

    #[test]
    fn simple_select_token_count() {
        // hand tokenization: SELECT | ?x | WHERE | { | ?x | ?p | ?y | }
        let toks = tokenize_sparql("SELECT ?x WHERE { ?x ?p ?y }").unwrap();
        assert_eq!(toks.len(), 8);
        assert_eq!(toks[0], SparqlToken::new(Keyword, "SELECT"));
    }

    #[test]
    fn iri_versus_less_than() {
        assert_eq!(
            kinds("FILTER(?x < 5)")[3],
            (Punct, "<".to_string())
        );
        assert_eq!(kinds("?x <= 5")[1], (Punct, "<=".to_string()));
        assert_eq!(
            kinds("<http://dbpedia.org/resource/Dolley_Madison>")[0],
            (FullIri, "<http://dbpedia.org/resource/Dolley_Madison>".to_string())
        );
    }

    #[test]
    fn literals_keep_suffixes() {
        let toks = kinds("'foo bar'@en \"22.40\"^^xsd:decimal 'x'^^<http://www.w3.org/2001/XMLSchema#string> 1.5e3");
        assert_eq!(toks[0], (Literal, "'foo bar'@en".to_string()));
        assert_eq!(toks[1], (Literal, "\"22.40\"^^xsd:decimal".to_string()));
        assert_eq!(toks[2].0, Literal);
        assert_eq!(toks[3], (Literal, "1.5e3".to_string()));
        assert_eq!(kinds("FILTER(?x = -3)")[4], (Literal, "-3".to_string()));
    }

    #[test]
    fn prefixed_name_drops_trailing_dot() {
        let toks = kinds("?x wdt:P31 wd:Q5.");
        assert_eq!(toks[2], (PrefixedName, "wd:Q5".to_string()));
        assert_eq!(toks[3], (Punct, ".".to_string()));
    }

    #[test]
    fn binary_minus_after_term() {
        let toks = kinds("(?x -3)");
        assert_eq!(toks[2], (Punct, "-".to_string()));
    }

    #[test]
    fn glued_modifiers() {
        let toks = kinds("ORDER BY DESC(?obj)LIMIT 5");
        assert_eq!(toks.len(), 8);
        assert_eq!(toks[6], (Keyword, "LIMIT".to_string()));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            tokenize_sparql("SELECT ?x WHERE { ?x ~ ?y }").unwrap_err().position(),
            21
        );
        assert!(matches!(
            tokenize_sparql("SELECT ?x WHERE { ?x zz:p ?y }"),
            Err(LexError::UnknownPrefix { position: 21, .. })
        ));
        assert!(matches!(
            tokenize_sparql("SELEKT ?x"),
            Err(LexError::UnknownKeyword { position: 0, .. })
        ));
        assert!(matches!(
            tokenize_sparql("FILTER(?x = 'abc)"),
            Err(LexError::UnterminatedString { position: 12 })
        ));
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{SparqlToken, TokenKind};
use super::query::{QueryForm, Term, TriplePattern};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntaxIssue {
    MissingForm,
    UnbalancedBrace,
    UnbalancedParen,
    /// A closer that does not match the innermost opener.
    MismatchedClose { index: usize },
    MissingGroupPattern,
    EmptyProjection,
    IncompleteTriple { index: usize },
    LiteralPredicate { index: usize },
    UnexpectedToken { index: usize, text: String },
    UnexpectedEnd,
}

impl fmt::Display for SyntaxIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntaxIssue::MissingForm => write!(f, "no SELECT or ASK"),
            SyntaxIssue::UnbalancedBrace => write!(f, "unbalanced braces"),
            SyntaxIssue::UnbalancedParen => write!(f, "unbalanced parentheses"),
            SyntaxIssue::MismatchedClose { index } => write!(f, "mismatched closer at token {index}"),
            SyntaxIssue::MissingGroupPattern => write!(f, "missing group graph pattern"),
            SyntaxIssue::EmptyProjection => write!(f, "SELECT with nothing projected"),
            SyntaxIssue::IncompleteTriple { index } => write!(f, "incomplete triple at token {index}"),
            SyntaxIssue::LiteralPredicate { index } => write!(f, "literal in predicate position at token {index}"),
            SyntaxIssue::UnexpectedToken { index, text } => write!(f, "unexpected `{text}` at token {index}"),
            SyntaxIssue::UnexpectedEnd => write!(f, "unexpected end of query"),
        }
    }
}

/// Returns `Ok(())` iff the tokens form a structurally complete query.
pub fn validate_syntax(tokens: &[SparqlToken]) -> Result<(), Vec<SyntaxIssue>> {
    let parsed = parse_tokens(tokens);
    if parsed.issues.is_empty() {
        Ok(())
    } else {
        Err(parsed.issues)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ParsedQuery {
    pub form: Option<QueryForm>,
    pub triples: Vec<TriplePattern>,
    pub issues: Vec<SyntaxIssue>,
}

pub(crate) fn parse_tokens(tokens: &[SparqlToken]) -> ParsedQuery {
    let mut issues = bracket_issues(tokens);
    let mut p = Parser { toks: tokens, pos: 0, issues: Vec::new(), triples: Vec::new() };
    let form = p.query();
    for issue in p.issues {
        if !issues.contains(&issue) {
            issues.push(issue);
        }
    }
    ParsedQuery { form, triples: p.triples, issues }
}

fn bracket_issues(tokens: &[SparqlToken]) -> Vec<SyntaxIssue> {
    let mut issues = Vec::new();
    let mut stack = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "{" | "(" => stack.push(t.text.as_str()),
            "}" | ")" => {
                let want = if t.text == "}" { "{" } else { "(" };
                match stack.pop() {
                    Some(open) if open == want => {}
                    _ => issues.push(SyntaxIssue::MismatchedClose { index: i }),
                }
            }
            _ => {}
        }
    }
    if stack.contains(&"{") {
        issues.push(SyntaxIssue::UnbalancedBrace);
    }
    if stack.contains(&"(") {
        issues.push(SyntaxIssue::UnbalancedParen);
    }
    issues
}

struct Parser<'a> {
    toks: &'a [SparqlToken],
    pos: usize,
    issues: Vec<SyntaxIssue>,
    triples: Vec<TriplePattern>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a SparqlToken> {
        self.toks.get(self.pos)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: &str) -> bool {
        if self.at_keyword(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&mut self) {
        match self.peek() {
            Some(t) => self.issues.push(SyntaxIssue::UnexpectedToken { index: self.pos, text: t.text.clone() }),
            None => self.issues.push(SyntaxIssue::UnexpectedEnd),
        }
    }

    fn query(&mut self) -> Option<QueryForm> {
        // prologue
        while self.eat_keyword("PREFIX") {
            let ok_name = self.peek().is_some_and(|t| t.kind == TokenKind::PrefixedName);
            let ok_iri = self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokenKind::FullIri);
            if !(ok_name && ok_iri) {
                self.unexpected();
                return None;
            }
            self.pos += 2;
        }
        let form = if self.eat_keyword("ASK") {
            Some(QueryForm::Ask)
        } else if self.eat_keyword("SELECT") {
            Some(if self.projection() { QueryForm::SelectCount } else { QueryForm::Select })
        } else {
            self.issues.push(SyntaxIssue::MissingForm);
            return None;
        };
        self.eat_keyword("WHERE");
        if self.at_punct("{") {
            self.group();
        } else {
            self.issues.push(SyntaxIssue::MissingGroupPattern);
            return form;
        }
        self.modifiers();
        if self.pos < self.toks.len() {
            self.unexpected();
        }
        form
    }

    /// Parses the SELECT clause; returns whether it aggregates with COUNT.
    fn projection(&mut self) -> bool {
        let _ = self.eat_keyword("DISTINCT");
        let mut count = false;
        let mut items = 0;
        loop {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Variable => {
                    self.pos += 1;
                    items += 1;
                }
                Some(t) if t.is_punct("*") => {
                    self.pos += 1;
                    items += 1;
                }
                Some(t) if t.is_punct("(") => {
                    let start = self.pos;
                    self.skip_balanced();
                    count |= self.toks[start..self.pos].iter().any(|t| t.is_keyword("COUNT"));
                    items += 1;
                }
                Some(t) if t.is_keyword("COUNT") => {
                    // LC-QuAD 1.0 writes `SELECT DISTINCT COUNT(?uri) WHERE`
                    self.pos += 1;
                    if self.at_punct("(") {
                        self.skip_balanced();
                    } else {
                        self.unexpected();
                    }
                    count = true;
                    items += 1;
                }
                _ => break,
            }
        }
        if items == 0 {
            self.issues.push(SyntaxIssue::EmptyProjection);
        }
        count
    }

    /// Skips a parenthesised expression starting at the current `(`.
    fn skip_balanced(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            } else if t.is_punct("{") || t.is_punct("}") {
                // braces never appear inside expressions we accept
                return;
            }
            self.pos += 1;
        }
    }

    fn group(&mut self) {
        debug_assert!(self.at_punct("{"));
        self.pos += 1;
        loop {
            let Some(t) = self.peek() else {
                return;
            };
            if t.is_punct("}") {
                self.pos += 1;
                return;
            }
            if t.is_punct("{") {
                self.group();
                while self.eat_keyword("UNION") {
                    if self.at_punct("{") {
                        self.group();
                    } else {
                        self.unexpected();
                        return;
                    }
                }
            } else if t.is_keyword("OPTIONAL") || t.is_keyword("MINUS") {
                self.pos += 1;
                if self.at_punct("{") {
                    self.group();
                } else {
                    self.unexpected();
                    return;
                }
            } else if t.is_keyword("FILTER") {
                self.pos += 1;
                if self.peek().is_some_and(|t| t.kind == TokenKind::Keyword) {
                    // FILTER CONTAINS(...) / FILTER NOT EXISTS {...}
                    while self.peek().is_some_and(|t| t.kind == TokenKind::Keyword) {
                        self.pos += 1;
                    }
                    if self.at_punct("{") {
                        self.group();
                        continue;
                    }
                }
                if self.at_punct("(") {
                    self.skip_balanced();
                } else {
                    self.unexpected();
                    return;
                }
            } else if t.is_keyword("BIND") {
                self.pos += 1;
                if self.at_punct("(") {
                    self.skip_balanced();
                } else {
                    self.unexpected();
                    return;
                }
            } else if t.is_punct(".") {
                self.pos += 1;
            } else if t.is_term() || t.is_keyword("a") {
                if !self.triples_block() {
                    return;
                }
            } else {
                self.unexpected();
                return;
            }
        }
    }

    fn term(&mut self, slot: Slot) -> Option<Term> {
        let t = self.peek()?;
        let term = match t.kind {
            TokenKind::Variable => Term::Variable(t.text.clone()),
            TokenKind::PrefixedName | TokenKind::FullIri => Term::Iri(t.text.clone()),
            TokenKind::Keyword if t.text == "a" && slot == Slot::Predicate => Term::Iri("a".into()),
            TokenKind::Literal => {
                if slot == Slot::Predicate {
                    self.issues.push(SyntaxIssue::LiteralPredicate { index: self.pos });
                }
                Term::Literal(t.text.clone())
            }
            _ => return None,
        };
        self.pos += 1;
        Some(term)
    }

    /// Subject followed by predicate-object lists joined by `;` and `,`.
    fn triples_block(&mut self) -> bool {
        let start = self.pos;
        let Some(subject) = self.term(Slot::Subject) else {
            self.unexpected();
            return false;
        };
        loop {
            let Some(predicate) = self.term(Slot::Predicate) else {
                self.issues.push(SyntaxIssue::IncompleteTriple { index: start });
                return false;
            };
            loop {
                let Some(object) = self.term(Slot::Object) else {
                    self.issues.push(SyntaxIssue::IncompleteTriple { index: start });
                    return false;
                };
                self.triples.push(TriplePattern {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                break;
            }
            // trailing `;` before `.` or `}`
            if self.at_punct(".") || self.at_punct("}") {
                break;
            }
        }
        true
    }

    fn modifiers(&mut self) {
        loop {
            if self.eat_keyword("GROUP") || self.eat_keyword("ORDER") {
                if !self.eat_keyword("BY") {
                    self.unexpected();
                    return;
                }
                let mut n = 0;
                loop {
                    if self.eat_keyword("ASC") || self.eat_keyword("DESC") {
                        if self.at_punct("(") {
                            self.skip_balanced();
                        } else {
                            self.unexpected();
                            return;
                        }
                    } else if self.peek().is_some_and(|t| t.kind == TokenKind::Variable) {
                        self.pos += 1;
                    } else if self.at_punct("(") {
                        self.skip_balanced();
                    } else {
                        break;
                    }
                    n += 1;
                }
                if n == 0 {
                    self.unexpected();
                    return;
                }
            } else if self.eat_keyword("HAVING") {
                if self.at_punct("(") {
                    self.skip_balanced();
                } else {
                    self.unexpected();
                    return;
                }
            } else if self.eat_keyword("LIMIT") || self.eat_keyword("OFFSET") {
                if self.peek().is_some_and(|t| t.kind == TokenKind::Literal && t.text.bytes().all(|b| b.is_ascii_digit())) {
                    self.pos += 1;
                } else {
                    self.unexpected();
                    return;
                }
            } else {
                return;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Subject,
    Predicate,
    Object,
}

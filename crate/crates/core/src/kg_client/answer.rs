use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::QueryError;
use crate::sparql::{QueryForm, SparqlQuery};

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

const NUMERIC_TYPES: &[&str] = &[
    "integer",
    "decimal",
    "double",
    "float",
    "int",
    "long",
    "short",
    "byte",
    "nonNegativeInteger",
    "nonPositiveInteger",
    "positiveInteger",
    "negativeInteger",
    "unsignedInt",
    "unsignedLong",
    "unsignedShort",
    "unsignedByte",
];

/// A normalized RDF term. Numbers of any numeric datatype share one
/// canonical lexical form so that `22.40` and `22.4` compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum RdfTerm {
    Iri(String),
    Number(String),
    Literal { value: String, lang: Option<String>, datatype: Option<String> },
    Bnode(String),
}

impl RdfTerm {
    /// Builds a term from one binding object of the standard JSON results format.
    pub fn from_binding(v: &Value) -> Result<Self, QueryError> {
        let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| parse_err("binding without type"))?;
        let value = v.get("value").and_then(Value::as_str).ok_or_else(|| parse_err("binding without value"))?;
        Ok(match kind {
            "uri" | "iri" => RdfTerm::Iri(strip_brackets(value).to_string()),
            "bnode" => RdfTerm::Bnode(value.to_string()),
            "literal" | "typed-literal" => {
                let lang = v.get("xml:lang").and_then(Value::as_str).map(str::to_ascii_lowercase);
                let datatype = v.get("datatype").and_then(Value::as_str).map(|d| strip_brackets(d).to_string());
                RdfTerm::literal(value, lang, datatype)
            }
            other => return Err(parse_err(&format!("unknown term type {other}"))),
        })
    }

    /// Numeric datatypes and untyped numeric-looking strings become numbers.
    pub fn literal(value: &str, lang: Option<String>, datatype: Option<String>) -> Self {
        let numeric_type = datatype
            .as_deref()
            .and_then(|d| d.strip_prefix(XSD))
            .is_some_and(|local| NUMERIC_TYPES.contains(&local));
        let plain = lang.is_none() && datatype.as_deref().is_none_or(|d| d == format!("{XSD}string"));
        if numeric_type || plain {
            if let Some(n) = canonical_number(value) {
                return RdfTerm::Number(n);
            }
        }
        let datatype = datatype.filter(|d| *d != format!("{XSD}string"));
        RdfTerm::Literal { value: value.to_string(), lang, datatype }
    }

    pub fn lexical(&self) -> &str {
        match self {
            RdfTerm::Iri(s) | RdfTerm::Number(s) | RdfTerm::Bnode(s) => s,
            RdfTerm::Literal { value, .. } => value,
        }
    }
}

impl fmt::Display for RdfTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RdfTerm::Iri(s) => write!(f, "<{s}>"),
            RdfTerm::Number(s) => f.write_str(s),
            RdfTerm::Bnode(s) => write!(f, "_:{s}"),
            RdfTerm::Literal { value, lang: Some(l), .. } => write!(f, "\"{value}\"@{l}"),
            RdfTerm::Literal { value, datatype: Some(d), .. } => write!(f, "\"{value}\"^^<{d}>"),
            RdfTerm::Literal { value, .. } => write!(f, "\"{value}\""),
        }
    }
}

fn parse_err(msg: &str) -> QueryError {
    QueryError::Parse(msg.to_string())
}

fn strip_brackets(s: &str) -> &str {
    s.strip_prefix('<').and_then(|r| r.strip_suffix('>')).unwrap_or(s)
}

/// Canonical decimal form of a numeric lexical value, or `None` if it is
/// not a number. Exponent forms go through `f64`.
pub fn canonical_number(text: &str) -> Option<String> {
    let s = text.trim();
    let (neg, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    if body.is_empty() {
        return None;
    }
    if body.contains(['e', 'E']) {
        let v: f64 = s.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        return canonical_number(&format_f64(v));
    }
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let mut out = String::new();
    if neg && !(int == "0" && frac.is_empty()) {
        out.push('-');
    }
    out.push_str(int);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    Some(out)
}

fn format_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains(['e', 'E']) {
        format!("{v:.17}")
    } else {
        s
    }
}

pub type Row = BTreeMap<String, RdfTerm>;

/// Normalized result of one query. Bindings are never empty: a SELECT with
/// no rows is `Empty`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnswerSet {
    Boolean { value: bool },
    Bindings { vars: BTreeSet<String>, rows: BTreeSet<Row> },
    Count { value: u64 },
    Empty,
}

impl AnswerSet {
    /// A response usable as system output: any boolean, any non-empty result.
    pub fn is_valid(&self) -> bool {
        !matches!(self, AnswerSet::Empty)
    }

    pub fn len(&self) -> usize {
        match self {
            AnswerSet::Bindings { rows, .. } => rows.len(),
            AnswerSet::Empty => 0,
            _ => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Answer elements for set-based scoring: one string per row, or the count.
    pub fn elements(&self) -> BTreeSet<String> {
        match self {
            AnswerSet::Bindings { rows, .. } => rows.iter().map(render_row).collect(),
            AnswerSet::Count { value } => BTreeSet::from([value.to_string()]),
            AnswerSet::Boolean { value } => BTreeSet::from([value.to_string()]),
            AnswerSet::Empty => BTreeSet::new(),
        }
    }

    /// Replaces a single-cell integer result with `Count` when the query is
    /// a counting SELECT.
    pub fn for_query(self, query: &str) -> Self {
        let counting = SparqlQuery::parse(query).is_ok_and(|q| q.form == QueryForm::SelectCount);
        if !counting {
            return self;
        }
        match &self {
            AnswerSet::Bindings { rows, .. } if rows.len() == 1 => {
                let row = rows.first().expect("one row");
                match row.values().next() {
                    Some(RdfTerm::Number(n)) if row.len() == 1 => match n.parse() {
                        Ok(value) => AnswerSet::Count { value },
                        Err(_) => self,
                    },
                    _ => self,
                }
            }
            _ => self,
        }
    }
}

fn render_row(row: &Row) -> String {
    row.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Parses a body in the standard SPARQL JSON results format.
pub fn normalize_answers(raw: &str) -> Result<AnswerSet, QueryError> {
    let v: Value = serde_json::from_str(raw).map_err(|e| QueryError::Parse(e.to_string()))?;
    if let Some(b) = v.get("boolean") {
        let value = b.as_bool().ok_or_else(|| parse_err("boolean is not a bool"))?;
        return Ok(AnswerSet::Boolean { value });
    }
    let vars: BTreeSet<String> = v
        .pointer("/head/vars")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing head.vars"))?
        .iter()
        .map(|x| x.as_str().map(str::to_string).ok_or_else(|| parse_err("non-string variable")))
        .collect::<Result<_, _>>()?;
    let bindings = v
        .pointer("/results/bindings")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing results.bindings"))?;
    let mut rows = BTreeSet::new();
    for b in bindings {
        let obj = b.as_object().ok_or_else(|| parse_err("binding row is not an object"))?;
        let row: Row = obj
            .iter()
            .map(|(k, t)| RdfTerm::from_binding(t).map(|t| (k.clone(), t)))
            .collect::<Result<_, _>>()?;
        rows.insert(row);
    }
    if rows.is_empty() {
        Ok(AnswerSet::Empty)
    } else {
        Ok(AnswerSet::Bindings { vars, rows })
    }
}

pub fn answers_equal(a: &AnswerSet, b: &AnswerSet) -> bool {
    a == b
}

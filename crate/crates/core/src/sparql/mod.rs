//! SPARQL tokenization, structural inspection and prefix handling for the
//! query shapes found in LC-QuAD 1.0 and 2.0.

mod lexer;
mod prefix;
mod query;
mod validate;
mod vocab;

pub use lexer::{detokenize, tokenize_sparql, LexError, Lexer, SparqlToken, TokenKind};
pub use prefix::{PrefixError, PrefixTable};
pub use query::{
    canonicalize, contract_prefixes, expand_prefixes, extract_triples, iri_of, local_part,
    QueryForm, SparqlError, SparqlQuery, Term, TriplePattern,
};
pub use validate::{validate_syntax, SyntaxIssue};
pub use vocab::{
    is_punct, known_keyword, SparqlVocabulary, CORE_KEYWORDS, CORE_PUNCT, EXTENDED_KEYWORDS,
    EXTENDED_PUNCT,
};

//! Linearized model inputs and the sentinel-marker encoding of IRI prefixes
//! and SPARQL vocabulary.

mod sentinel;
mod serialize;
mod surface;

pub use sentinel::{
    build_sentinel_table, decode_sentinels, encode_sentinels, marker, CodecError, SentinelEntry,
    SentinelKind, SentinelTable, SENTINEL_CAPACITY,
};
pub use serialize::{
    read_jsonl, serialize_input, write_jsonl, ItemKind, LinkedItem, Provenance, SampleRecord,
    SerializedInput, SEP,
};
pub use surface::{from_model_tokens, to_model_tokens};

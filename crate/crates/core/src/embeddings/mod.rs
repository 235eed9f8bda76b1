//! Precomputed contextual and KG embedding stores and the per-question input
//! matrix built from them.

mod matrix;
mod store;

use thiserror::Error;

pub use matrix::{build_input_matrix, init_trainable_lookup, InputMatrix, TrainableLookup, INPUT_DIM};
pub use store::{
    load_kg_embeddings, text_key, ContextualEmbeddingStore, KgEmbeddingStore, CONTEXT_DIM, KG_DIM,
};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vector for {key:?} has {found} values, expected {expected}")]
    DimensionMismatch { key: String, expected: usize, found: usize },
    #[error("parse error on line {line}")]
    Parse { line: usize },
    #[error("not an embedding file (bad magic)")]
    BadMagic,
    #[error("corrupt embedding file: {0}")]
    Corrupt(&'static str),
    #[error("no contextual record for {0:?}")]
    MissingContextual(String),
    #[error("record has {found} vectors for {expected} tokens")]
    TokenCountMismatch { expected: usize, found: usize },
    #[error("id {id} outside table of size {size}")]
    OutOfRange { id: usize, size: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{serialize_input, LinkedItem, Provenance};
    use ndarray::s;

    fn vec_of(x: f32, n: usize) -> Vec<f32> {
        (0..n).map(|i| x + i as f32 * 1e-3).collect()
    }

    #[test]
    fn tsv_load_counts_and_dimension() {
        let mut text = String::new();
        for k in ["wd:Q76", "wd:Q5", "wdt:P26"] {
            text.push_str(k);
            for v in vec_of(0.5, KG_DIM) {
                text.push_str(&format!("\t{v}"));
            }
            text.push('\n');
        }
        let store = KgEmbeddingStore::from_tsv(text.as_bytes()).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.get("wd:Q76").unwrap(), vec_of(0.5, KG_DIM).as_slice());
        assert!(store.get("wd:Q1").is_none());
    }

    #[test]
    fn short_row_is_rejected() {
        let mut line = "wd:Q76".to_string();
        for v in vec_of(0.1, KG_DIM - 1) {
            line.push_str(&format!("\t{v}"));
        }
        assert!(matches!(
            KgEmbeddingStore::from_tsv(line.as_bytes()),
            Err(EmbeddingError::DimensionMismatch { found: 199, .. })
        ));
        assert!(matches!(
            KgEmbeddingStore::from_tsv("wd:Q1\t0.1\tabc".as_bytes()),
            Err(EmbeddingError::Parse { line: 1 })
        ));
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = KgEmbeddingStore::new();
        let v: Vec<f32> = (0..KG_DIM).map(|i| (i as f32).sin() * 1e-3 + f32::EPSILON).collect();
        store.insert("wd:Q76", v.clone()).unwrap();
        store.insert("wd:Q5", vec_of(-2.0, KG_DIM)).unwrap();
        let path = dir.path().join("kg.bin");
        store.save(&path).unwrap();
        let back = load_kg_embeddings(&path).unwrap();
        let got = back.get("wd:Q76").unwrap();
        assert!(got.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back, store);

        let mut ctx = ContextualEmbeddingStore::new();
        ctx.insert("a b", vec![vec_of(1.0, CONTEXT_DIM), vec_of(2.0, CONTEXT_DIM)]).unwrap();
        let cpath = dir.path().join("ctx.bin");
        ctx.save(&cpath).unwrap();
        assert_eq!(ContextualEmbeddingStore::load(&cpath).unwrap(), ctx);
        assert!(matches!(KgEmbeddingStore::load(&cpath), Err(EmbeddingError::DimensionMismatch { .. })));
    }

    #[test]
    fn contextual_record_must_align_with_tokens() {
        let mut ctx = ContextualEmbeddingStore::new();
        assert!(matches!(
            ctx.insert("a b c", vec![vec_of(0.0, CONTEXT_DIM)]),
            Err(EmbeddingError::TokenCountMismatch { expected: 3, found: 1 })
        ));
    }

    fn fixture() -> (crate::codec::SerializedInput, ContextualEmbeddingStore, KgEmbeddingStore) {
        let si = serialize_input(
            "Who married Barack Obama ?",
            &[LinkedItem::entity("wd:Q76", "Barack Obama"), LinkedItem::entity("wd:Q999", "")],
            &[LinkedItem::relation("wdt:P26", "spouse")],
            3,
        );
        let mut ctx = ContextualEmbeddingStore::new();
        let n = si.len();
        ctx.insert(&si.text, (0..n).map(|i| vec_of(i as f32, CONTEXT_DIM)).collect()).unwrap();
        let mut kg = KgEmbeddingStore::new();
        kg.insert("wd:Q76", vec_of(-0.3, KG_DIM)).unwrap();
        kg.insert("wdt:P26", vec_of(0.7, KG_DIM)).unwrap();
        (si, ctx, kg)
    }

    #[test]
    fn matrix_layout() {
        let (si, ctx, kg) = fixture();
        let m = build_input_matrix(&si, &ctx, &kg).unwrap();
        assert_eq!(m.rows.dim(), (si.len(), INPUT_DIM));
        let tokens: Vec<&str> = si.tokens().collect();
        let record = ctx.get(&si.text).unwrap();
        for (i, p) in si.provenance.iter().enumerate() {
            let row = m.rows.row(i);
            match p {
                Provenance::Sep => assert!(row.iter().all(|&x| x == -1.0)),
                Provenance::QuestionWord | Provenance::EntityLabel | Provenance::RelationLabel => {
                    assert!(row.slice(s![CONTEXT_DIM..]).iter().all(|&x| x == 1.0));
                }
                Provenance::EntityIri | Provenance::RelationIri => {
                    let ctx_part: Vec<f64> = record[i].iter().map(|&x| f64::from(x)).collect();
                    assert_eq!(row.slice(s![..CONTEXT_DIM]).to_vec(), ctx_part);
                    let expected: Vec<f64> = match kg.get(tokens[i]) {
                        Some(v) => v.iter().map(|&x| f64::from(x)).collect(),
                        None => vec![1.0; KG_DIM],
                    };
                    assert_eq!(row.slice(s![CONTEXT_DIM..]).to_vec(), expected);
                }
            }
        }
        assert_eq!(m.kg_misses, vec!["wd:Q999".to_string()]);
    }

    #[test]
    fn missing_contextual_record() {
        let (si, _, kg) = fixture();
        assert!(matches!(
            build_input_matrix(&si, &ContextualEmbeddingStore::new(), &kg),
            Err(EmbeddingError::MissingContextual(_))
        ));
    }

    #[test]
    fn ablation_fills_kg_part() {
        let (si, ctx, kg) = fixture();
        let full = build_input_matrix(&si, &ctx, &kg).unwrap();
        let mut ablated = full.clone();
        ablated.ablate_kg();
        assert_ne!(full.rows, ablated.rows);
        for (i, p) in si.provenance.iter().enumerate() {
            let tail = ablated.rows.slice(s![i, CONTEXT_DIM..]).to_owned();
            let want = if *p == Provenance::Sep { -1.0 } else { 1.0 };
            assert!(tail.iter().all(|&x| x == want));
        }
    }

    #[test]
    fn trainable_lookup() {
        let a = init_trainable_lookup(50, 8, 9);
        assert_eq!(a, init_trainable_lookup(50, 8, 9));
        assert_ne!(a, init_trainable_lookup(50, 8, 10));
        assert!(a.table.iter().all(|x| x.abs() <= 0.1));
        let empty = init_trainable_lookup(0, INPUT_DIM, 1);
        assert!(matches!(empty.lookup(0), Err(EmbeddingError::OutOfRange { .. })));
    }

    #[test]
    fn trainable_lookup_mean_is_centred() {
        let t = init_trainable_lookup(100, 100, 2024);
        let n = t.table.len() as f64;
        let mean = t.table.sum() / n;
        // uniform on [-0.1, 0.1]: sigma = 0.2 / sqrt(12)
        let sigma_of_mean = 0.2 / 12f64.sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * sigma_of_mean, "mean {mean}");
    }
}

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::links::{extract_gold_links, normalize_gold};
use super::{DatasetError, KnowledgeGraph, QuestionRecord};

/// Which question text of an LC-QuAD 1.0 record to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionField {
    #[default]
    Corrected,
    Intermediary,
}

impl QuestionField {
    fn key(self) -> &'static str {
        match self {
            QuestionField::Corrected => "corrected_question",
            QuestionField::Intermediary => "intermediary_question",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Records in the file (or in the subset, when one is given).
    pub total: usize,
    pub loaded: usize,
    pub missing_question: usize,
    pub invalid_query: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Lcquad1Options {
    pub question_field: QuestionField,
    /// Restricts loading to these record IDs.
    pub subset: Option<HashSet<String>>,
}

fn read_array(path: &Path) -> Result<Vec<Value>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    if text.trim().is_empty() {
        return Err(DatasetError::Schema(format!("{} is empty", path.display())));
    }
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| DatasetError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    match v {
        Value::Array(items) if !items.is_empty() => Ok(items),
        Value::Array(_) => Err(DatasetError::Schema(format!("{} holds no records", path.display()))),
        _ => Err(DatasetError::Schema(format!("{} is not a list of records", path.display()))),
    }
}

fn text_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("n/a"))
}

fn id_field(v: &Value, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match v.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn build(
    id: String,
    question: Option<&str>,
    sparql: &str,
    kg: KnowledgeGraph,
    report: &mut LoadReport,
) -> Option<QuestionRecord> {
    let Some(question) = question else {
        log::warn!("record {id}: no question text, skipped");
        report.missing_question += 1;
        return None;
    };
    let gold = match normalize_gold(sparql, kg) {
        Ok(q) => q,
        Err(e) => {
            log::warn!("record {id}: gold query rejected: {e}");
            report.invalid_query += 1;
            return None;
        }
    };
    let (entities, relations) = extract_gold_links(&gold, kg);
    report.loaded += 1;
    Some(QuestionRecord {
        id,
        question: question.to_string(),
        gold_sparql: gold.normalized(),
        kg,
        entities,
        relations,
    })
}

/// Loads an LC-QuAD 1.0 style file: a list of objects with `_id`,
/// `corrected_question`, `intermediary_question` and `sparql_query`.
pub fn load_lcquad1(path: impl AsRef<Path>, opts: &Lcquad1Options) -> Result<(Vec<QuestionRecord>, LoadReport), DatasetError> {
    let path = path.as_ref();
    let items = read_array(path)?;
    let mut report = LoadReport::default();
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let id = id_field(item, &["_id", "id"]).unwrap_or_else(|| i.to_string());
        if opts.subset.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        report.total += 1;
        let sparql = text_field(item, "sparql_query")
            .ok_or_else(|| DatasetError::Schema(format!("record {id} has no sparql_query")))?;
        let question = text_field(item, opts.question_field.key()).or_else(|| text_field(item, "question"));
        out.extend(build(id, question, sparql, KnowledgeGraph::DBpedia, &mut report));
    }
    log::info!("{}: {} of {} records loaded", path.display(), report.loaded, report.total);
    Ok((out, report))
}

/// Loads an LC-QuAD 2.0 style file: a list of objects with `uid`,
/// `question` and `sparql_wikidata`.
pub fn load_lcquad2(path: impl AsRef<Path>) -> Result<(Vec<QuestionRecord>, LoadReport), DatasetError> {
    let path = path.as_ref();
    let items = read_array(path)?;
    let mut report = LoadReport::default();
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        report.total += 1;
        let id = id_field(item, &["uid", "id"]).unwrap_or_else(|| i.to_string());
        let sparql = text_field(item, "sparql_wikidata")
            .ok_or_else(|| DatasetError::Schema(format!("record {id} has no sparql_wikidata")))?;
        out.extend(build(id, text_field(item, "question"), sparql, KnowledgeGraph::Wikidata, &mut report));
    }
    log::info!(
        "{}: {} of {} records loaded ({} without question text)",
        path.display(),
        report.loaded,
        report.total,
        report.missing_question
    );
    Ok((out, report))
}

/// Reads a whitespace- or line-separated list of record IDs.
pub fn read_id_list(path: impl AsRef<Path>) -> Result<HashSet<String>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    Ok(text.split_whitespace().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn empty_file_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_lcquad2(write(&dir, "a.json", "")), Err(DatasetError::Schema(_))));
        assert!(matches!(load_lcquad2(write(&dir, "b.json", "[]")), Err(DatasetError::Schema(_))));
        assert!(matches!(load_lcquad2(write(&dir, "c.json", "{")), Err(DatasetError::Parse { .. })));
    }

    #[test]
    fn missing_question_is_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"[
          {"uid": 1, "question": "What is the operating temperature of Hamburg Eastern Railway?", "sparql_wikidata": "select distinct ?obj where { wd:Q2084454 wdt:P5066 ?obj }"},
          {"uid": 2, "question": null, "sparql_wikidata": "select distinct ?obj where { wd:Q76 wdt:P26 ?obj }"},
          {"uid": 3, "question": "n/a", "sparql_wikidata": "select distinct ?obj where { wd:Q76 wdt:P26 ?obj }"}
        ]"#;
        let (records, report) = load_lcquad2(write(&dir, "t.json", body)).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report, LoadReport { total: 3, loaded: 1, missing_question: 2, invalid_query: 0 });
        assert_eq!(records[0].gold_sparql, "SELECT DISTINCT ?var0 WHERE { wd:Q2084454 wdt:P5066 ?var0 }");
    }

    #[test]
    fn lcquad1_subset_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"[
          {"_id": "10", "corrected_question": "Who is the spouse of Barack Obama?", "intermediary_question": "What is the <spouse> of <Barack Obama>?",
           "sparql_query": "SELECT DISTINCT ?uri WHERE { <http://dbpedia.org/resource/Barack_Obama> <http://dbpedia.org/ontology/spouse> ?uri } "},
          {"_id": "11", "corrected_question": "Where was Angela Merkel born?", "intermediary_question": "x",
           "sparql_query": "SELECT DISTINCT ?uri WHERE { <http://dbpedia.org/resource/Angela_Merkel> <http://dbpedia.org/ontology/birthPlace> ?uri }"}
        ]"#;
        let path = write(&dir, "l1.json", body);
        let opts = Lcquad1Options { question_field: QuestionField::Intermediary, subset: Some(HashSet::from(["10".to_string()])) };
        let (records, report) = load_lcquad1(&path, &opts).unwrap();
        assert_eq!(report.total, 1);
        assert_eq!(records[0].question, "What is the <spouse> of <Barack Obama>?");
        assert_eq!(records[0].entities[0].iri, "http://dbpedia.org/resource/Barack_Obama");
        let (all, _) = load_lcquad1(&path, &Lcquad1Options::default()).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].question, "Where was Angela Merkel born?");
    }
}

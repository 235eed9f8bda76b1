use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparqlgen_core::datasets::{KnowledgeGraph, QuestionField};
use sparqlgen_core::kg_client::EndpointConfig;
use sparqlgen_core::pgn::PgnConfig;
use sparqlgen_core::reranker::RerankConfig;

use crate::artifacts::MissingInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Lcquad1,
    #[default]
    Lcquad2,
}

impl DatasetKind {
    pub fn kg(self) -> KnowledgeGraph {
        match self {
            DatasetKind::Lcquad1 => KnowledgeGraph::DBpedia,
            DatasetKind::Lcquad2 => KnowledgeGraph::Wikidata,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Files pooled into the cross-validation corpus, or the training pool
    /// when `test_paths` is set.
    pub paths: Vec<PathBuf>,
    /// Fixed test files. When set, a single fold is built: these files are
    /// the test set and the pool is split into train and dev.
    pub test_paths: Vec<PathBuf>,
    /// LC-QuAD 1.0 only: IDs of the evaluated subset.
    pub subset_ids: Option<PathBuf>,
    /// LC-QuAD 1.0 only.
    pub question_field: QuestionField,
    /// Read-only `iri<TAB>label` file seeding the label cache.
    pub labels: Option<PathBuf>,
}

/// Everything a pipeline run needs, loadable from one TOML file. Relative
/// paths resolve against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds splits and the order of linked items in serialized inputs.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub folds: usize,
    pub dataset: DatasetConfig,
    /// Needed by label fetching, train-reranker and evaluate.
    pub endpoint: Option<EndpointConfig>,
    pub pgn: PgnConfig,
    pub reranker: RerankConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 13,
            output_dir: PathBuf::from("runs/default"),
            folds: 5,
            dataset: DatasetConfig::default(),
            endpoint: None,
            pgn: PgnConfig::default(),
            reranker: RerankConfig::default(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub endpoint_url: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|_| MissingInput::file(p, None))?;
                toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(url) = &overrides.endpoint_url {
            let mut ep = cfg.endpoint.take().unwrap_or_default();
            ep.url = url.clone();
            cfg.endpoint = Some(ep);
        }
        cfg.pgn.validate()?;
        cfg.reranker.validate()?;
        if let Some(ep) = &cfg.endpoint {
            ep.validate()?;
        }
        Ok(cfg)
    }

    pub fn endpoint(&self) -> anyhow::Result<&EndpointConfig> {
        self.endpoint.as_ref().ok_or_else(|| {
            MissingInput::setting("endpoint", "set [endpoint] url in the config or pass --endpoint-url").into()
        })
    }
}

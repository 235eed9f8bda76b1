use std::fmt;
use std::path::{Path, PathBuf};

/// An input that is absent: a file, optionally with the command that
/// produces it, or a required setting. Maps to exit code 2.
#[derive(Debug)]
pub struct MissingInput {
    what: String,
    hint: Option<String>,
}

impl MissingInput {
    pub fn file(path: &Path, producer: Option<&str>) -> Self {
        MissingInput {
            what: format!("missing input file {}", path.display()),
            hint: producer.map(|p| format!("run `sparqlgen {p}` first")),
        }
    }

    pub fn setting(name: &str, hint: &str) -> Self {
        MissingInput { what: format!("missing setting `{name}`"), hint: Some(hint.to_string()) }
    }
}

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.hint {
            Some(h) => write!(f, "{} ({h})", self.what),
            None => f.write_str(&self.what),
        }
    }
}

impl std::error::Error for MissingInput {}

/// Fails with [`MissingInput`] unless `path` exists.
pub fn require(path: &Path, producer: Option<&str>) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MissingInput::file(path, producer).into())
    }
}

/// File names inside the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Artifacts { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> PathBuf {
        self.root.join("records.jsonl")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.tsv")
    }

    pub fn sentinels(&self) -> PathBuf {
        self.root.join("sentinels.tsv")
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("splits.json")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats.json")
    }

    pub fn query_cache(&self) -> PathBuf {
        self.root.join("query_cache.jsonl")
    }

    pub fn fold_dir(&self, fold: usize) -> PathBuf {
        self.root.join(format!("fold{fold}"))
    }

    pub fn samples(&self, fold: usize, split: Split) -> PathBuf {
        self.fold_dir(fold).join(format!("{}.jsonl", split.name()))
    }

    pub fn uncoverable(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("uncoverable.tsv")
    }

    pub fn model(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("pgn.ckpt")
    }

    pub fn train_log(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("train_log.jsonl")
    }

    pub fn beams(&self, fold: usize, split: Split) -> PathBuf {
        self.fold_dir(fold).join(format!("beams_{}.jsonl", split.name()))
    }

    pub fn reranker(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("reranker.ckpt")
    }

    pub fn reranker_samples(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("reranker_samples.jsonl")
    }

    pub fn reranker_log(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("reranker_log.jsonl")
    }

    pub fn eval(&self, fold: usize, reranked: bool) -> PathBuf {
        self.fold_dir(fold).join(if reranked { "eval_reranked.jsonl" } else { "eval.jsonl" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

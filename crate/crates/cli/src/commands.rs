use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sparqlgen_core::codec::{from_model_tokens, read_jsonl, write_jsonl, LinkedItem, SampleRecord};
use sparqlgen_core::datasets::{
    fetch_labels, fixed_test_split, load_lcquad1, load_lcquad2, make_splits, read_id_list, to_sample,
    uncoverable_tokens, LabelCache, Lcquad1Options, LoadReport, QuestionRecord, SplitPlan,
};
use sparqlgen_core::eval::{
    categorize_error, copy_required, error_breakdown, evaluate, format_breakdown, ErrorCategory, EvalError, EvalItem,
    EvalRecord,
};
use sparqlgen_core::kg_client::{KgClient, ResponseCache};
use sparqlgen_core::pgn::{decode_sample, train, Example, FixedVocab, InputSpec, InputVocab, PgnModel, PgnSample};
use sparqlgen_core::reranker::{collect_training_data, train_reranker, CandidateScorer, RerankModel};
use sparqlgen_core::sparql::{SparqlQuery, SparqlVocabulary};

use crate::artifacts::{require, Artifacts, MissingInput, Split};
use crate::config::{DatasetKind, RunConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamOutput {
    pub query: String,
    pub log_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamRecord {
    pub id: String,
    pub beams: Vec<BeamOutput>,
}

#[derive(Debug, Serialize)]
struct FoldStats {
    train: usize,
    dev: usize,
    test: usize,
    /// Dev and test samples with a target token outside the train-built
    /// vocabulary and their own input.
    uncoverable_samples: usize,
}

#[derive(Debug, Serialize)]
struct CorpusStats {
    kind: DatasetKind,
    files: BTreeMap<String, LoadReport>,
    records: usize,
    copy_required: usize,
    copy_required_fraction: f64,
    label_fallbacks: usize,
    sentinels: usize,
    folds: Vec<FoldStats>,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn client(cfg: &RunConfig, art: &Artifacts) -> Result<KgClient> {
    let ep = cfg.endpoint()?.clone();
    let cache_path = ep.cache_path.clone().unwrap_or_else(|| art.query_cache());
    let cache = ResponseCache::open(&cache_path).with_context(|| format!("opening {}", cache_path.display()))?;
    Ok(KgClient::with_cache(ep, Some(cache)))
}

fn load_file(cfg: &RunConfig, path: &Path) -> Result<(Vec<QuestionRecord>, LoadReport)> {
    require(path, None)?;
    Ok(match cfg.dataset.kind {
        DatasetKind::Lcquad1 => {
            let subset = match &cfg.dataset.subset_ids {
                Some(p) => {
                    require(p, None)?;
                    Some(read_id_list(p)?)
                }
                None => None,
            };
            let opts = Lcquad1Options { question_field: cfg.dataset.question_field, subset };
            load_lcquad1(path, &opts)?
        }
        DatasetKind::Lcquad2 => load_lcquad2(path)?,
    })
}

fn read_records(art: &Artifacts) -> Result<Vec<QuestionRecord>> {
    require(&art.records(), Some("prepare"))?;
    read_jsonl(art.records()).with_context(|| format!("reading {}", art.records().display()))
}

fn read_samples(path: &Path) -> Result<Vec<PgnSample>> {
    require(path, Some("prepare"))?;
    let records: Vec<SampleRecord> = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(records.into_iter().map(|r| PgnSample::from_text(r.id, &r.input_text, &r.target_text)).collect())
}

fn check_fold(art: &Artifacts, fold: usize) -> Result<()> {
    require(&art.splits(), Some("prepare"))?;
    let plan: SplitPlan = serde_json::from_reader(BufReader::new(File::open(art.splits())?))?;
    if fold >= plan.folds.len() {
        bail!("fold {fold} out of range: {} has {} folds", art.splits().display(), plan.folds.len());
    }
    Ok(())
}

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    if cfg.dataset.paths.is_empty() {
        return Err(MissingInput::setting("dataset.paths", "list the dataset files in the config").into());
    }
    let art = Artifacts::new(&cfg.output_dir);
    let mut files = BTreeMap::new();
    let mut pool = Vec::new();
    let mut test = Vec::new();
    for (paths, into) in [(&cfg.dataset.paths, &mut pool), (&cfg.dataset.test_paths, &mut test)] {
        for p in paths {
            let (records, report) = load_file(cfg, p)?;
            log::info!("{}: {} of {} records loaded", p.display(), report.loaded, report.total);
            files.insert(p.display().to_string(), report);
            into.extend(records);
        }
    }
    let mut records: Vec<QuestionRecord> = pool.iter().chain(&test).cloned().collect();
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = records.iter().find(|r| !seen.insert(r.id.clone())) {
        bail!("duplicate record ID {}", dup.id);
    }
    create_dir(art.root())?;

    let mut labels = match &cfg.dataset.labels {
        Some(p) => {
            require(p, None)?;
            LabelCache::open(p)?.to_map()
        }
        None => BTreeMap::new(),
    };
    let iris: Vec<String> = {
        let mut all: Vec<String> = records.iter().flat_map(|r| r.linked_iris().map(str::to_string)).collect();
        all.sort();
        all.dedup();
        all.retain(|i| !labels.contains_key(i));
        all
    };
    let mut label_fallbacks = iris.len();
    if cfg.endpoint.is_some() && !iris.is_empty() {
        let mut cache = LabelCache::open(art.labels())?;
        let report = fetch_labels(&iris, &client(cfg, &art)?, &mut cache)?;
        label_fallbacks = report.fallbacks.len();
        for (iri, label) in report.labels {
            if !report.fallbacks.contains(&iri) {
                labels.insert(iri, label);
            }
        }
    }
    records = records.iter().map(|r| r.with_labels(&labels)).collect();
    write_jsonl(art.records(), &records)?;

    let golds: Vec<SparqlQuery> = records.iter().map(QuestionRecord::gold).collect();
    let vocab = SparqlVocabulary::observed(golds.iter().map(|q| q.tokens.as_slice()));
    let table = cfg.dataset.kind.kg().sentinel_table(&vocab)?;
    table.save(art.sentinels())?;

    let plan = if test.is_empty() {
        let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
        make_splits(&ids, cfg.folds, cfg.seed)?
    } else {
        let ids = |rs: &[QuestionRecord]| rs.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        fixed_test_split(&ids(&pool), &ids(&test), cfg.seed)
    };
    std::fs::write(art.splits(), serde_json::to_string_pretty(&plan)? + "\n")?;

    let samples: HashMap<&str, SampleRecord> =
        records.iter().map(|r| (r.id.as_str(), to_sample(r, cfg.seed))).collect();
    let mut fold_stats = Vec::new();
    for (k, fold) in plan.folds.iter().enumerate() {
        create_dir(&art.fold_dir(k))?;
        let pick = |ids: &[String]| -> Vec<SampleRecord> { ids.iter().map(|id| samples[id.as_str()].clone()).collect() };
        let (train_s, dev_s, test_s) = (pick(&fold.train), pick(&fold.dev), pick(&fold.test));
        for (split, set) in Split::ALL.iter().zip([&train_s, &dev_s, &test_s]) {
            write_jsonl(art.samples(k, *split), set)?;
        }
        let tokenized: Vec<PgnSample> =
            train_s.iter().map(|s| PgnSample::from_text(&s.id, &s.input_text, &s.target_text)).collect();
        let fixed = FixedVocab::build(
            &SparqlVocabulary::core(),
            tokenized.iter().map(|s| (s.input.as_slice(), s.target.as_slice())),
        );
        let mut out = BufWriter::new(File::create(art.uncoverable(k))?);
        let mut bad = 0;
        for s in dev_s.iter().chain(&test_s) {
            let missing = uncoverable_tokens(&fixed, s);
            if !missing.is_empty() {
                bad += 1;
            }
            for t in missing {
                writeln!(out, "{}\t{t}", s.id)?;
            }
        }
        out.flush()?;
        fold_stats.push(FoldStats { train: train_s.len(), dev: dev_s.len(), test: test_s.len(), uncoverable_samples: bad });
    }

    let copy = records.iter().zip(&golds).filter(|(r, g)| copy_required(&r.question, g)).count();
    let stats = CorpusStats {
        kind: cfg.dataset.kind,
        files,
        records: records.len(),
        copy_required: copy,
        copy_required_fraction: if records.is_empty() { 0.0 } else { copy as f64 / records.len() as f64 },
        label_fallbacks,
        sentinels: table.len(),
        folds: fold_stats,
    };
    std::fs::write(art.stats(), serde_json::to_string_pretty(&stats)? + "\n")?;
    println!("records: {}", stats.records);
    println!(
        "copy-required: {} ({:.1}%)",
        stats.copy_required,
        100.0 * stats.copy_required_fraction
    );
    println!("label fallbacks: {}", stats.label_fallbacks);
    println!("sentinel entries: {}", stats.sentinels);
    for (k, f) in stats.folds.iter().enumerate() {
        println!(
            "fold {k}: train {} dev {} test {} (uncoverable {})",
            f.train, f.dev, f.test, f.uncoverable_samples
        );
    }
    Ok(())
}

pub fn train_model(cfg: &RunConfig, fold: usize) -> Result<()> {
    let art = Artifacts::new(&cfg.output_dir);
    check_fold(&art, fold)?;
    let samples = read_samples(&art.samples(fold, Split::Train))?;
    if samples.is_empty() {
        bail!("{} has no samples", art.samples(fold, Split::Train).display());
    }
    let fixed = FixedVocab::build(
        &SparqlVocabulary::core(),
        samples.iter().map(|s| (s.input.as_slice(), s.target.as_slice())),
    );
    let vocab = InputVocab::build(samples.iter().map(|s| s.input.as_slice()), cfg.pgn.min_count);
    let input = InputSpec::Lookup { vocab, dim: cfg.pgn.input_dim };
    let mut model = PgnModel::new(cfg.pgn.clone(), fixed, input)?;
    let examples: Vec<Example> = samples.iter().map(|s| model.prepare(s)).collect::<Result<_, _>>()?;
    log::info!("training on {} samples, {} parameters", examples.len(), model.parameter_count());
    let mut log_file = BufWriter::new(File::create(art.train_log(fold))?);
    let history = train(&mut model, &examples, Some(&mut log_file))?;
    log_file.flush()?;
    model.save(art.model(fold))?;
    if let Some(last) = history.last() {
        println!("epoch {} train loss {:.4}", last.epoch, last.loss);
    }
    let dev = read_samples(&art.samples(fold, Split::Dev))?;
    let dev_losses: Vec<f64> = dev.iter().filter_map(|s| model.prepare(s).ok()).map(|ex| model.loss(&ex)).collect::<Result<_, _>>()?;
    if !dev_losses.is_empty() {
        println!(
            "dev loss {:.4} on {} of {} samples",
            dev_losses.iter().sum::<f64>() / dev_losses.len() as f64,
            dev_losses.len(),
            dev.len()
        );
    }
    println!("wrote {}", art.model(fold).display());
    Ok(())
}

pub fn decode(cfg: &RunConfig, fold: usize, split: Split) -> Result<()> {
    let art = Artifacts::new(&cfg.output_dir);
    check_fold(&art, fold)?;
    require(&art.model(fold), Some("train"))?;
    let samples = read_samples(&art.samples(fold, split))?;
    let model = PgnModel::load(art.model(fold))?;
    let width = cfg.pgn.beam_width;
    let mut out = BufWriter::new(File::create(art.beams(fold, split))?);
    for s in &samples {
        let beams = decode_sample(&model, &s.input, width)?
            .into_iter()
            .map(|(tokens, log_prob)| BeamOutput { query: from_model_tokens(&tokens), log_prob })
            .collect();
        serde_json::to_writer(&mut out, &BeamRecord { id: s.id.clone(), beams })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    println!("decoded {} samples with beam width {width} into {}", samples.len(), art.beams(fold, split).display());
    Ok(())
}

fn eval_items(art: &Artifacts, fold: usize, split: Split) -> Result<Vec<EvalItem>> {
    let path = art.beams(fold, split);
    require(&path, Some(&format!("decode --split {}", split.name())))?;
    let beams: Vec<BeamRecord> = read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
    let records: HashMap<String, QuestionRecord> = read_records(art)?.into_iter().map(|r| (r.id.clone(), r)).collect();
    beams
        .into_iter()
        .map(|b| {
            let r = records
                .get(&b.id)
                .with_context(|| format!("{}: ID {} not in {}", path.display(), b.id, art.records().display()))?;
            Ok(EvalItem {
                id: b.id,
                question: r.question.clone(),
                gold_query: r.gold_sparql.clone(),
                linked: r.linked(),
                beams: b.beams.into_iter().map(|x| x.query).collect(),
            })
        })
        .collect()
}

pub fn train_reranker_cmd(cfg: &RunConfig, fold: usize) -> Result<()> {
    let art = Artifacts::new(&cfg.output_dir);
    check_fold(&art, fold)?;
    let items = eval_items(&art, fold, Split::Train)?;
    let client = client(cfg, &art)?;
    let samples = collect_training_data(&items, &client)?;
    write_jsonl(art.reranker_samples(fold), &samples)?;
    let positives = samples.iter().filter(|s| s.label == 1).count();
    log::info!("{} reranker samples, {positives} positive", samples.len());
    let (model, history) = train_reranker(&samples, cfg.reranker.clone())?;
    write_jsonl(art.reranker_log(fold), &history)?;
    model.save(art.reranker(fold))?;
    println!("{} samples ({positives} positive); wrote {}", samples.len(), art.reranker(fold).display());
    Ok(())
}

pub fn evaluate_cmd(cfg: &RunConfig, fold: usize, rerank: bool) -> Result<()> {
    let art = Artifacts::new(&cfg.output_dir);
    check_fold(&art, fold)?;
    let items = eval_items(&art, fold, Split::Test)?;
    let scorer = if rerank {
        require(&art.reranker(fold), Some("train-reranker"))?;
        Some(RerankModel::load(art.reranker(fold))?)
    } else {
        None
    };
    let client = client(cfg, &art)?;
    let path = art.eval(fold, rerank);
    let mut sink = BufWriter::new(File::create(&path)?);
    let result = evaluate(&items, &client, scorer.as_ref().map(|s| s as &dyn CandidateScorer), Some(&mut sink));
    sink.flush()?;
    let report = match result {
        Ok(r) => r,
        Err(EvalError::Aborted { completed, source, .. }) => {
            bail!("evaluation stopped after {completed} of {} questions: {source}; partial records in {}", items.len(), path.display())
        }
        Err(e) => return Err(e.into()),
    };
    let s = &report.summary;
    println!("questions: {}", s.questions);
    println!("answered: {}", s.answered);
    println!("precision: {:.4}", s.precision);
    println!("recall: {:.4}", s.recall);
    println!("f1: {:.4}", s.f1);
    println!("exact match: {:.4}", s.exact_match);
    println!("records: {}", path.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ErrorPair {
    question: String,
    gold: String,
    pred: String,
    #[serde(default)]
    entities: Vec<String>,
    #[serde(default)]
    relations: Vec<String>,
}

fn read_eval_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if value.get("summary").is_some() {
            continue;
        }
        out.push(serde_json::from_value(value).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn analyze_errors(cfg: &RunConfig, fold: usize, rerank: bool, pairs: Option<PathBuf>) -> Result<()> {
    let counts = match pairs {
        Some(p) => {
            require(&p, None)?;
            let pairs: Vec<ErrorPair> = serde_json::from_reader(BufReader::new(File::open(&p)?))
                .with_context(|| format!("parsing {}", p.display()))?;
            let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
            for pair in &pairs {
                let gold = SparqlQuery::parse(&pair.gold).with_context(|| format!("gold query {:?}", pair.gold))?;
                let linked: Vec<LinkedItem> = pair
                    .entities
                    .iter()
                    .map(|e| LinkedItem::entity(e.as_str(), ""))
                    .chain(pair.relations.iter().map(|r| LinkedItem::relation(r.as_str(), "")))
                    .collect();
                *counts.entry(categorize_error(&gold, &pair.pred, &linked, &pair.question)).or_default() += 1;
            }
            counts
        }
        None => {
            let art = Artifacts::new(&cfg.output_dir);
            let path = art.eval(fold, rerank);
            require(&path, Some(if rerank { "evaluate --rerank" } else { "evaluate" }))?;
            error_breakdown(&read_eval_records(&path)?)
        }
    };
    print!("{}", format_breakdown(&counts));
    Ok(())
}

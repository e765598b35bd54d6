use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use lexattr::corpus::{
    corpus_stats, export_conll, project_corpus, read_tagged, render_stats_table, render_stats_tsv, write_annotation_file, write_tagged,
    LabelScheme, LabeledSequence,
};
use lexattr::crf::{extract_spans, serialize, train_model, EmissionMode, TrainConfig};
use lexattr::emission::{EmbeddingSource, DEFAULT_FEATURE_DIM};
use lexattr::eval::{render_report, token_accuracy_labels};
use lexattr::judgment::{prepare_document, render_judgment_table, run_experiment, CompositionMode, LogRegConfig};
use lexattr::synthetic::{attribute_corpus, judgment_corpus, JudgmentCorpusConfig, SyntheticConfig};
use lexattr::{Error, Tag};

use crate::inputs::{load_documents, load_model, load_sequences, read_text, EmbeddingSpec};
use crate::manifest::{FileRecord, RunManifest};
use crate::*;

struct Run<'a> {
    command: &'static str,
    argv: &'a [String],
    started: Instant,
    inputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(command: &'static str, argv: &'a [String]) -> Self {
        Run {
            command,
            argv,
            started: Instant::now(),
            inputs: Vec::new(),
        }
    }

    /// Registers inputs and refuses outputs that would overwrite one.
    fn inputs(&mut self, paths: &[&Path], outputs: &[&Path]) -> Result<()> {
        for out in outputs {
            if let Some(p) = paths.iter().find(|p| same_file(p, out)) {
                return Err(Error::invalid(format!("output {} would overwrite an input", p.display())).into());
            }
        }
        self.inputs.extend(paths.iter().map(|p| p.to_path_buf()));
        Ok(())
    }

    fn finish(self, out: &Path, outputs: &[&Path], config: Value, seed: Option<u64>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv: self.argv.to_vec(),
            config,
            inputs: self.inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            seed,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        manifest.write(out)?;
        Ok(())
    }
}

fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub(crate) fn run(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Convert(a) => convert(a, argv),
        Command::Stats(a) => stats(a, argv),
        Command::Train(a) => train(a, argv),
        Command::Tag(a) => tag(a, argv),
        Command::Eval(a) => eval(a, argv),
        Command::Judge(a) => judge(a, argv),
        Command::Synth(a) => synth(a, argv),
        Command::Rerun(a) => rerun(a),
    }
}

fn convert(a: ConvertArgs, argv: &[String]) -> Result<()> {
    let mut run = Run::new("convert", argv);
    run.inputs(&[&a.input], &[&a.out])?;
    let seqs = project_corpus(&load_documents(&a.input)?)?;
    let scheme = match a.scheme {
        Scheme::Io => LabelScheme::Io,
        Scheme::Bio => LabelScheme::Bio,
    };
    let mut buf = Vec::new();
    export_conll(&seqs, scheme, &mut buf)?;
    write_file(&a.out, &buf)?;
    let config = json!({ "scheme": format!("{:?}", a.scheme).to_lowercase(), "sentences": seqs.len() });
    run.finish(&a.out, &[&a.out], config, None)
}

fn stats(a: StatsArgs, argv: &[String]) -> Result<()> {
    let mut run = Run::new("stats", argv);
    let splits: Vec<(String, PathBuf)> = a
        .splits
        .iter()
        .map(|s| match s.split_once('=') {
            Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
            _ => ("all".to_string(), PathBuf::from(s)),
        })
        .collect();
    let paths: Vec<&Path> = splits.iter().map(|(_, p)| p.as_path()).collect();
    run.inputs(&paths, &[&a.out])?;
    let reports = splits
        .iter()
        .map(|(name, path)| corpus_stats(&load_documents(path)?, name))
        .collect::<lexattr::Result<Vec<_>>>()?;
    let text = match a.format {
        StatsFormat::Table => render_stats_table(&reports),
        StatsFormat::Tsv => render_stats_tsv(&reports),
    };
    print!("{text}");
    write_file(&a.out, text.as_bytes())?;
    let names: Vec<&str> = splits.iter().map(|(n, _)| n.as_str()).collect();
    let config = json!({ "splits": names, "format": format!("{:?}", a.format).to_lowercase() });
    run.finish(&a.out, &[&a.out], config, None)
}

fn train(a: TrainArgs, argv: &[String]) -> Result<()> {
    let mut run = Run::new("train", argv);
    let mut paths: Vec<&Path> = vec![&a.train];
    paths.extend(a.dev.as_deref());
    paths.extend(a.embeddings.as_ref().and_then(EmbeddingSpec::table_path));
    run.inputs(&paths, &[&a.out])?;

    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        l2: a.l2,
        clip: a.clip,
        seed: a.seed,
        patience: a.patience,
        include_untagged: a.include_untagged,
        ..TrainConfig::with_seed(a.seed)
    };
    config.validate()?;
    let source = match (a.mode, &a.embeddings) {
        (Mode::Sparse, None) => None,
        (Mode::Sparse, Some(_)) => return Err(Error::invalid("--embeddings applies to dense mode only").into()),
        (Mode::Dense, Some(spec)) => Some(spec.load()?),
        (Mode::Dense, None) => return Err(Error::invalid("dense mode needs --embeddings").into()),
    };
    let mode = match &source {
        None => EmissionMode::Sparse {
            feature_dim: DEFAULT_FEATURE_DIM,
        },
        Some(src) => EmissionMode::Dense(src),
    };
    let train_seqs = load_sequences(&a.train)?;
    let dev_seqs = match &a.dev {
        Some(p) => load_sequences(p)?,
        None => Vec::new(),
    };
    let model = train_model(&train_seqs, &dev_seqs, mode, &config)?;
    write_file(&a.out, &serialize(&model))?;
    println!(
        "trained {} epochs, objective {:.6}",
        model.meta.epochs_run, model.meta.final_objective
    );

    let resolved = json!({
        "train": config,
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "feature_dim": source.is_none().then_some(DEFAULT_FEATURE_DIM),
        "embeddings": a.embeddings.as_ref().map(ToString::to_string),
        "meta": model.meta,
    });
    run.finish(&a.out, &[&a.out], resolved, Some(a.seed))
}

#[derive(Serialize)]
struct SpanRecord<'a> {
    sentence: usize,
    tag: Tag,
    start: usize,
    end: usize,
    text: &'a str,
}

fn tag(a: TagArgs, argv: &[String]) -> Result<()> {
    let spans_path = with_suffix(&a.out, ".spans.jsonl");
    let mut run = Run::new("tag", argv);
    let mut paths: Vec<&Path> = vec![&a.model, &a.input];
    paths.extend(a.embeddings.as_ref().and_then(EmbeddingSpec::table_path));
    run.inputs(&paths, &[&a.out, &spans_path])?;

    let model = load_model(&a.model)?;
    let source = match (&a.embeddings, model.is_dense()) {
        (Some(spec), true) => Some(spec.load()?),
        (None, true) => return Err(Error::invalid("dense model needs --embeddings").into()),
        (Some(_), false) => return Err(Error::invalid("--embeddings applies to dense models only").into()),
        (None, false) => None,
    };
    let seqs = load_sequences(&a.input)?;
    let predicted = seqs
        .iter()
        .map(|s| model.tag(s, source.as_ref()).map(|p| p.tags()))
        .collect::<lexattr::Result<Vec<_>>>()?;

    let mut tsv = Vec::new();
    write_tagged(&seqs, &predicted, &mut tsv)?;
    write_file(&a.out, &tsv)?;
    write_file(&spans_path, &spans_jsonl(&seqs, &predicted)?)?;

    let config = json!({
        "embeddings": a.embeddings.as_ref().map(ToString::to_string),
        "sentences": seqs.len(),
    });
    run.finish(&a.out, &[&a.out, &spans_path], config, Some(model.meta.seed))
}

/// One line per document: `{"doc_id": .., "spans": [..]}`.
fn spans_jsonl(seqs: &[LabeledSequence], predicted: &[Vec<Tag>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < seqs.len() {
        let doc = &seqs[i].doc_id;
        let mut extracted = Vec::new();
        while i < seqs.len() && &seqs[i].doc_id == doc {
            extracted.push((seqs[i].sentence_index, extract_spans(&seqs[i].tokens, &predicted[i])?));
            i += 1;
        }
        let spans: Vec<SpanRecord<'_>> = extracted
            .iter()
            .flat_map(|(sentence, spans)| {
                spans.iter().map(move |s| SpanRecord {
                    sentence: *sentence,
                    tag: s.tag,
                    start: s.start,
                    end: s.end,
                    text: &s.text,
                })
            })
            .collect();
        serde_json::to_writer(&mut out, &json!({ "doc_id": doc, "spans": spans }))?;
        out.push(b'\n');
    }
    Ok(out)
}

fn eval(a: EvalArgs, argv: &[String]) -> Result<()> {
    let mut run = Run::new("eval", argv);
    run.inputs(&[&a.input], &[&a.out])?;
    let text = read_text(&a.input)?;
    let (gold, predicted) = read_tagged(text.as_bytes())?;
    let report = token_accuracy_labels(&gold, &predicted)?;
    print!("{}", render_report(&report, &a.method));
    let mut body = json!({ "method": a.method });
    if let (Value::Object(dst), Value::Object(src)) = (&mut body, report.to_json()) {
        dst.extend(src);
    }
    let mut data = serde_json::to_vec_pretty(&body)?;
    data.push(b'\n');
    write_file(&a.out, &data)?;
    run.finish(&a.out, &[&a.out], json!({ "method": a.method }), None)
}

fn all_modes() -> Vec<CompositionMode> {
    CompositionMode::ALL.to_vec()
}

/// Judgment experiment config. Relative paths resolve against the config
/// file's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    /// Annotation JSONL with a `judgment` on every document.
    pub train: PathBuf,
    pub test: PathBuf,
    pub crf_model: PathBuf,
    /// Embeddings for a dense CRF.
    #[serde(default)]
    pub crf_embeddings: Option<String>,
    #[serde(default = "all_modes")]
    pub modes: Vec<CompositionMode>,
    /// Document embedding sources; each yields one row per mode.
    pub embeddings: Vec<String>,
    #[serde(default)]
    pub logreg: LogRegConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn resolve_spec(base: &Path, s: &str) -> Result<EmbeddingSpec> {
    let mut spec: EmbeddingSpec = s.parse().map_err(Error::Invalid)?;
    if let Some(t) = &spec.table {
        spec.table = Some(resolve(base, Path::new(t)).display().to_string());
    }
    Ok(spec)
}

fn judge(a: JudgeArgs, argv: &[String]) -> Result<()> {
    let table_path = with_suffix(&a.out, ".tsv");
    let mut run = Run::new("judge", argv);
    let base = a.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let config: JudgeConfig = serde_json::from_str(&read_text(&a.config)?).map_err(Error::from)?;
    if config.modes.is_empty() || config.embeddings.is_empty() {
        return Err(Error::invalid("judge config needs at least one mode and one embedding source").into());
    }
    let train_path = resolve(&base, &config.train);
    let test_path = resolve(&base, &config.test);
    let model_path = resolve(&base, &config.crf_model);
    let crf_spec = config.crf_embeddings.as_deref().map(|s| resolve_spec(&base, s)).transpose()?;
    let doc_specs = config
        .embeddings
        .iter()
        .map(|s| resolve_spec(&base, s))
        .collect::<Result<Vec<_>>>()?;
    let mut paths: Vec<&Path> = vec![&a.config, &train_path, &test_path, &model_path];
    paths.extend(crf_spec.iter().filter_map(EmbeddingSpec::table_path));
    paths.extend(doc_specs.iter().filter_map(EmbeddingSpec::table_path));
    run.inputs(&paths, &[&a.out, &table_path])?;

    let crf = load_model(&model_path)?;
    let crf_source: Option<EmbeddingSource> = crf_spec.as_ref().map(EmbeddingSpec::load).transpose()?;
    if crf.is_dense() != crf_source.is_some() {
        return Err(Error::invalid("crf_embeddings must be given exactly when the CRF is dense").into());
    }
    let prepare = |path: &Path| -> lexattr::Result<Vec<_>> {
        load_documents(path)?
            .iter()
            .map(|d| prepare_document(d, &crf, crf_source.as_ref()))
            .collect()
    };
    let train_docs = prepare(&train_path)?;
    let test_docs = prepare(&test_path)?;
    let mut rows = Vec::new();
    for spec in &doc_specs {
        let source = spec.load()?;
        rows.extend(run_experiment(&train_docs, &test_docs, &source, &config.modes, &config.logreg)?);
    }

    let table = render_judgment_table(&rows);
    print!("{table}");
    let mut data = serde_json::to_vec_pretty(&json!({ "rows": rows }))?;
    data.push(b'\n');
    write_file(&a.out, &data)?;
    write_file(&table_path, table.as_bytes())?;
    let seed = config.logreg.seed;
    run.finish(&a.out, &[&a.out, &table_path], serde_json::to_value(&config)?, Some(seed))
}

fn synth(a: SynthArgs, argv: &[String]) -> Result<()> {
    let run = Run::new("synth", argv);
    let cfg = SyntheticConfig {
        train_sentences: a.train_sentences,
        test_sentences: a.test_sentences,
        ..SyntheticConfig::new(a.seed)
    };
    let jcfg = JudgmentCorpusConfig {
        train_documents: a.judgment_train,
        test_documents: a.judgment_test,
        ..JudgmentCorpusConfig::new(a.seed)
    };
    let (vocab, train, test) = attribute_corpus(&cfg);
    let (jtrain, jtest) = judgment_corpus(&vocab, &jcfg);
    let files = [
        ("train.jsonl", &train),
        ("test.jsonl", &test),
        ("judgment-train.jsonl", &jtrain),
        ("judgment-test.jsonl", &jtest),
    ];
    let mut written = Vec::new();
    for (name, docs) in files {
        let path = a.out.join(name);
        let mut buf = Vec::new();
        write_annotation_file(docs, &mut buf)?;
        write_file(&path, &buf)?;
        written.push(path);
    }
    let config = json!({
        "train_sentences": cfg.train_sentences,
        "test_sentences": cfg.test_sentences,
        "words_per_tag": cfg.words_per_tag,
        "untagged_fraction": cfg.untagged_fraction,
        "judgment_train": jcfg.train_documents,
        "judgment_test": jcfg.test_documents,
        "spans_per_document": jcfg.spans_per_document,
        "span_length": jcfg.span_length,
        "filler_tokens": jcfg.filler_tokens,
    });
    let outs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    run.finish(&a.out, &outs, config, Some(a.seed))
}

fn rerun(a: RerunArgs) -> Result<()> {
    let recorded = RunManifest::read(&a.manifest)?;
    if recorded.argv.get(1).map(String::as_str) == Some("rerun") {
        return Err(Error::invalid("manifest records a rerun").into());
    }
    let cli = Cli::try_parse_from(&recorded.argv)
        .map_err(|e| Error::invalid(format!("recorded arguments no longer parse: {e}")))?;
    run(cli.command, &recorded.argv)?;
    if !a.check {
        return Ok(());
    }
    let mut stdout = std::io::stdout().lock();
    let mut differing = 0;
    for old in &recorded.outputs {
        let new = FileRecord::of(Path::new(&old.path))?;
        let same = new == *old;
        differing += usize::from(!same);
        writeln!(stdout, "{}\t{}", if same { "identical" } else { "differs" }, old.path)?;
    }
    if differing > 0 {
        bail!("{differing} output(s) differ from the recorded run");
    }
    Ok(())
}

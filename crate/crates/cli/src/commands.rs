//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use asqg_core::autodiff::SeedRng;
use asqg_core::eval::{evaluate, summarize, EvalReport};
use asqg_core::inference::{
    generate, postprocess, read_generations, write_generations, AttentionTrace, DecodeConfig,
    GeneratedQuestion,
};
use asqg_core::model::{ExampleIds, Model};
use asqg_core::text::vocab::MASK_TOKEN;
use asqg_core::text::{
    load_embeddings, preprocess, read_masked, read_triplets, restore_entities, write_jsonl,
    Embeddings, MaskedTriplet, PreprocessOptions, Vocab, GLOVE_DIM,
};
use asqg_core::train::{
    build_vocab, encode_all, filter_lengths, train, Checkpoint, CheckpointKind, TrainConfig,
};
use asqg_core::{Error, Result};
use log::{info, warn};

use crate::manifest::{sidecar, RunManifest};

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    Vocab::read(open(path)?)
}

fn write_vocab(vocab: &Vocab, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    vocab.write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub struct PreprocessArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub no_mask: bool,
    pub no_ner: bool,
    pub vocab: Option<PathBuf>,
    pub vocab_cap: usize,
}

/// `train.jsonl` -> `train.vocab.txt`
pub fn default_vocab_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().unwrap_or_default().to_string_lossy();
    output.with_file_name(format!("{stem}.vocab.txt"))
}

pub fn preprocess_cmd(a: &PreprocessArgs) -> Result<()> {
    let mut manifest = RunManifest::start("preprocess");
    let triplets = read_triplets(open(&a.input)?)?;
    let opts = PreprocessOptions {
        mask_answer: !a.no_mask,
        replace_entities: !a.no_ner,
    };
    let masked = triplets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            preprocess(t, opts).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let vocab = build_vocab(&masked, a.vocab_cap)?;

    let mut w = BufWriter::new(File::create(&a.output)?);
    write_jsonl(&mut w, &masked)?;
    w.flush()?;
    drop(w);
    let vocab_path = a
        .vocab
        .clone()
        .unwrap_or_else(|| default_vocab_path(&a.output));
    write_vocab(&vocab, &vocab_path)?;
    info!("{} examples, vocabulary of {}", masked.len(), vocab.len());

    manifest.input(&a.input)?;
    manifest.output(&a.output)?;
    manifest.output(&vocab_path)?;
    manifest.finish(&sidecar(&a.output))
}

pub struct TrainArgs {
    pub config: PathBuf,
    pub data_dir: PathBuf,
    pub out: Option<PathBuf>,
}

/// Seed override from the environment, if set.
fn env_seed() -> Result<Option<u64>> {
    match std::env::var("ASQG_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            Error::InvalidArgument(format!("ASQG_SEED={v:?} is not an unsigned integer"))
        }),
        Err(_) => Ok(None),
    }
}

fn read_masked_file(path: &Path) -> Result<Vec<MaskedTriplet>> {
    read_masked(open(path)?)
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::start("train");
    let mut cfg = TrainConfig::parse(&std::fs::read_to_string(&a.config)?)?;
    if let Some(seed) = env_seed()? {
        info!("seed {seed} from ASQG_SEED");
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out = a.out.clone().unwrap_or_else(|| a.data_dir.join("run"));
    std::fs::create_dir_all(&out)?;
    manifest.input(&a.config)?;

    let train_path = a.data_dir.join("train.jsonl");
    let dev_path = a.data_dir.join("dev.jsonl");
    let train_raw = read_masked_file(&train_path)?;
    manifest.input(&train_path)?;
    let dev_raw = if dev_path.exists() {
        manifest.input(&dev_path)?;
        read_masked_file(&dev_path)?
    } else {
        Vec::new()
    };
    if cfg.ablation.mask_answer
        && train_raw
            .iter()
            .any(|m| !m.masked_passage.iter().any(|t| t == MASK_TOKEN))
    {
        warn!("config expects masked passages but some training passages carry no mask token");
    }

    let vocab_path = a.data_dir.join("train.vocab.txt");
    let vocab = if vocab_path.exists() {
        manifest.input(&vocab_path)?;
        read_vocab(&vocab_path)?
    } else {
        info!("no {} found, building the vocabulary", vocab_path.display());
        build_vocab(&train_raw, cfg.vocab_cap)?
    };

    let mut rng = SeedRng::new(cfg.seed);
    let model_cfg = cfg.model_config(vocab.len());
    let mut model = if cfg.glove.is_empty() {
        Model::random(model_cfg, &mut rng)?
    } else {
        if cfg.emb_dim != GLOVE_DIM {
            return Err(Error::InvalidArgument(format!(
                "glove vectors are {GLOVE_DIM}-d but emb_dim = {}",
                cfg.emb_dim
            )));
        }
        let glove = Path::new(&cfg.glove);
        let emb: Embeddings = load_embeddings(&vocab, glove, &mut rng)?;
        info!(
            "{} embedding rows frozen from {}",
            emb.frozen_rows(),
            glove.display()
        );
        manifest.input(glove)?;
        Model::new(model_cfg, emb, &mut rng)?
    };
    info!("{} parameters", model.parameter_count());

    let (train_set, _) = filter_lengths(encode_all(&vocab, &train_raw), &cfg);
    let (dev_set, _) = filter_lengths(encode_all(&vocab, &dev_raw), &cfg);

    let best_path = out.join("best.ckpt");
    let outcome = train(&cfg, &mut model, &train_set, &dev_set, |ck, kind| {
        let path = match kind {
            CheckpointKind::Epoch(e) => out.join(format!("epoch_{e}.ckpt")),
            CheckpointKind::Best => best_path.clone(),
        };
        ck.save(&path)
    })?;
    info!(
        "best epoch {} with selection loss {:.5}",
        outcome.best_epoch, outcome.best_loss
    );

    let csv_path = out.join("loss.csv");
    std::fs::write(&csv_path, outcome.loss_csv())?;
    let vocab_out = out.join("vocab.txt");
    write_vocab(&vocab, &vocab_out)?;

    manifest.config = Some(cfg.render());
    manifest.seed = Some(cfg.seed);
    manifest.output(&best_path)?;
    manifest.output(&csv_path)?;
    manifest.output(&vocab_out)?;
    manifest.checkpoint(&best_path)?;
    manifest.finish(&out.join("manifest.json"))
}

pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    pub vocab: Option<PathBuf>,
    pub decode: DecodeConfig,
    pub trace: bool,
}

pub fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("generate");
    a.decode.validate()?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let vocab_path = a.vocab.clone().unwrap_or_else(|| {
        a.checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("vocab.txt")
    });
    let vocab = read_vocab(&vocab_path)?;
    if vocab.len() != ck.model.config.vocab_size {
        return Err(Error::InvalidArgument(format!(
            "vocabulary has {} entries but the checkpoint expects {}",
            vocab.len(),
            ck.model.config.vocab_size
        )));
    }
    let examples = read_masked_file(&a.input)?;

    let mut out = Vec::with_capacity(examples.len());
    for (i, m) in examples.iter().enumerate() {
        let ids = ExampleIds::from_masked(&vocab, m);
        let g = generate(&ck.model, &ids.passage, &ids.answer, &a.decode)?;
        if !g.finished {
            warn!(
                "example {}: no end token within {} steps",
                i + 1,
                a.decode.max_len
            );
        }
        let words = vocab.decode(&g.tokens)?;
        let attention = if a.trace {
            Some(AttentionTrace::from_rows(&g.attention)?)
        } else {
            None
        };
        out.push(GeneratedQuestion {
            question_tokens: postprocess(&words, &m.matching_table),
            score: g.score,
            attention,
        });
    }

    let mut w = BufWriter::new(File::create(&a.output)?);
    write_generations(&mut w, &out)?;
    w.flush()?;
    drop(w);

    manifest.input(&a.checkpoint)?;
    manifest.input(&vocab_path)?;
    manifest.input(&a.input)?;
    manifest.output(&a.output)?;
    manifest.checkpoint(&a.checkpoint)?;
    manifest.finish(&sidecar(&a.output))
}

pub struct EvaluateArgs {
    pub generated: PathBuf,
    pub gold: PathBuf,
    pub json: Option<PathBuf>,
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("evaluate");
    let generated: Vec<Vec<String>> = read_generations(open(&a.generated)?)?
        .into_iter()
        .map(|g| g.question_tokens)
        .collect();
    let gold = read_masked_file(&a.gold)?;
    let questions: Vec<Vec<String>> = gold
        .iter()
        .map(|m| restore_entities(&m.question_tokens, &m.matching_table).0)
        .collect();
    let answers: Vec<Vec<String>> = gold.into_iter().map(|m| m.answer_tokens).collect();
    let report = evaluate(&generated, &questions, &answers)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.json {
        std::fs::write(path, report.to_json()? + "\n")?;
        manifest.input(&a.generated)?;
        manifest.input(&a.gold)?;
        manifest.output(path)?;
        manifest.finish(&sidecar(path))?;
    }
    Ok(())
}

pub struct AnalyzeArgs {
    pub reports: Vec<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Mean ± std over the reports of repeated runs.
pub fn analyze_cmd(a: &AnalyzeArgs) -> Result<()> {
    let mut manifest = RunManifest::start("analyze");
    let mut reports = Vec::with_capacity(a.reports.len());
    for path in &a.reports {
        let text = std::fs::read_to_string(path)?;
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        reports.push(r);
    }
    let summary = summarize(&reports)?;
    print!("{}", summary.to_table());
    if let Some(path) = &a.json {
        std::fs::write(path, summary.to_json()? + "\n")?;
        for r in &a.reports {
            manifest.input(r)?;
        }
        manifest.output(path)?;
        manifest.finish(&sidecar(path))?;
    }
    Ok(())
}

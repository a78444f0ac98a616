use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use trial_evidence::checkpoint::{Checkpoint, ModelKind};
use trial_evidence::config::Config;
use trial_evidence::corpus::{load_corpus, read_jsonl, write_corpus, write_jsonl, write_predictions, AnnotatedDocument, Document};
use trial_evidence::encoder::build_encoder;
use trial_evidence::eval::{evaluate, render_table, EvalInputs};
use trial_evidence::extraction::{train_evidence_classifier, train_tagger, EvidenceClassifier, TaggerModel};
use trial_evidence::inference::train_inference;
use trial_evidence::linking::train_linker;
use trial_evidence::pipeline::{split_docs, split_samples, Ablation, DocLinks, Pipeline, RunOutput, DEV_FRACTION};
use trial_evidence::supervision::distant::{build_training_corpus, load_prompts, Sample};
use trial_evidence::supervision::{default_grid, tune_threshold};
use trial_evidence::synth::{generate, HardCase, SynthConfig};
use trial_evidence::{Error, Result};

#[derive(Parser)]
#[command(name = "trial-evidence", version, about = "Extract, link and infer findings from trial abstracts")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus with prompts.
    Synth {
        #[arg(long, default_value_t = 100)]
        num_docs: usize,
        #[arg(long, default_value = "doc")]
        prefix: String,
        #[arg(long, default_value_t = 0.1)]
        hard_fraction: f64,
        #[arg(long, default_value_t = 0.2)]
        three_arm_fraction: f64,
    },
    /// Tag raw abstracts and project prompts onto them.
    BuildDistant {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        /// Tagger checkpoint; defaults to the configured one.
        #[arg(long)]
        tagger: Option<PathBuf>,
    },
    /// Train one model and write its checkpoint to --out.
    Train {
        #[command(subcommand)]
        model: TrainTarget,
    },
    /// Pick the grouping threshold with the best B-cubed F1 on a dev corpus.
    TuneThreshold {
        #[arg(long)]
        dev: PathBuf,
    },
    /// Run the pipeline over documents.
    Predict {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        ablation: AblationArgs,
    },
    /// Score a predicted corpus against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        /// Predicted corpus written by `predict`.
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        extra: EvalArgs,
    },
    /// Run the pipeline over a gold corpus and report every metric.
    Report {
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        ablation: AblationArgs,
        #[command(flatten)]
        extra: EvalArgs,
    },
}

#[derive(Subcommand)]
enum TrainTarget {
    /// CRF tagger from an annotated corpus.
    Tagger(TrainDocs),
    /// Evidence sentence classifier from a samples file.
    Evidence(TrainSamples),
    Linker(TrainSamples),
    Inference(TrainSamples),
}

#[derive(Args)]
struct TrainDocs {
    #[arg(long)]
    train: PathBuf,
    /// Held-out corpus; by default a hashed tenth of --train.
    #[arg(long)]
    dev: Option<PathBuf>,
}

#[derive(Args)]
struct TrainSamples {
    /// A `*.samples.jsonl` file from build-distant.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    dev_samples: Option<PathBuf>,
}

#[derive(Args)]
struct ModelsArg {
    /// Directory holding tagger.json, evidence.json, linker.json and
    /// inference.json; fills checkpoint paths the config leaves unset.
    #[arg(long)]
    models: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct AblationArgs {
    #[arg(long)]
    gold_mentions: bool,
    #[arg(long)]
    gold_evidence: bool,
    #[arg(long)]
    gold_links: bool,
}

impl From<AblationArgs> for Ablation {
    fn from(a: AblationArgs) -> Ablation {
        Ablation {
            gold_mentions: a.gold_mentions,
            gold_evidence: a.gold_evidence,
            gold_links: a.gold_links,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// links.jsonl from `predict`, for linking accuracy.
    #[arg(long)]
    links: Option<PathBuf>,
    /// hard_cases.jsonl from `synth`.
    #[arg(long)]
    hard_cases: Option<PathBuf>,
    /// Also report overlap-matched entity scores.
    #[arg(long)]
    partial: bool,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    Ok(config.with_seed(seed))
}

fn fill_models(config: &mut Config, models: &ModelsArg) {
    if let Some(dir) = &models.models {
        let c = &mut config.checkpoints;
        for (slot, name) in [
            (&mut c.tagger, "tagger.json"),
            (&mut c.evidence, "evidence.json"),
            (&mut c.linker, "linker.json"),
            (&mut c.inference, "inference.json"),
        ] {
            slot.get_or_insert_with(|| dir.join(name));
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Synth {
            num_docs,
            prefix,
            hard_fraction,
            three_arm_fraction,
        } => {
            let corpus = generate(
                &SynthConfig {
                    num_docs,
                    seed: config.seed,
                    hard_fraction,
                    three_arm_fraction,
                },
                &prefix,
            )?;
            create_dir(out)?;
            write_corpus(&corpus.docs, &out.join("corpus.jsonl"))?;
            let raw: Vec<AnnotatedDocument> = corpus
                .docs
                .iter()
                .map(|d| AnnotatedDocument::unannotated(d.document.clone()))
                .collect();
            write_corpus(&raw, &out.join("raw.jsonl"))?;
            write_jsonl(&out.join("prompts.jsonl"), &corpus.prompts)?;
            write_jsonl(&out.join("hard_cases.jsonl"), &corpus.hard_cases)?;
            println!(
                "wrote {} documents, {} prompts, {} hard cases to {}",
                corpus.docs.len(),
                corpus.prompts.len(),
                corpus.hard_cases.len(),
                out.display()
            );
        }
        Command::BuildDistant { raw, prompts, tagger } => {
            let path = tagger
                .or_else(|| config.checkpoints.tagger.clone())
                .ok_or_else(|| Error::Config("build-distant needs --tagger or checkpoints.tagger".into()))?;
            let ckpt: Checkpoint<TaggerModel> = Checkpoint::load(&path, ModelKind::Tagger)?;
            if ckpt.encoder.dim != config.encoder.dim {
                return Err(Error::Config(format!(
                    "tagger encoder dim {} differs from configured {}",
                    ckpt.encoder.dim, config.encoder.dim
                )));
            }
            let backend = build_encoder(&config.encoder)?;
            let raw: Vec<Document> = load_corpus(&raw)?.into_iter().map(|d| d.document).collect();
            let prompts = load_prompts(&prompts)?;
            let distant = build_training_corpus(&raw, &prompts, &ckpt.model, backend.as_ref(), &config.distant())?;
            create_dir(out)?;
            write_corpus(&distant.docs, &out.join("distant.jsonl"))?;
            write_jsonl(&out.join("distant.samples.jsonl"), &distant.samples)?;
            write_json(&out.join("distant_report.json"), &distant.report)?;
            println!(
                "{} documents, {} relations, {} samples",
                distant.report.documents,
                distant.report.relations,
                distant.samples.len()
            );
        }
        Command::Train { model } => {
            let backend = build_encoder(&config.encoder)?;
            let b = backend.as_ref();
            create_parent(out)?;
            match model {
                TrainTarget::Tagger(args) => {
                    let train = load_corpus(&args.train)?;
                    let (train, dev) = match &args.dev {
                        Some(p) => (train, load_corpus(p)?),
                        None => split_docs(&train, config.seed, DEV_FRACTION),
                    };
                    let model = train_tagger(b, &train, &dev, &config.tagger)?;
                    println!("tagger dev token F1 {:.4}", model.dev_token_f1);
                    let mut ckpt = Checkpoint::new(ModelKind::Tagger, &config.encoder, &config.tagger, &model)?;
                    ckpt.tag_set = Some(model.tagset.labels.clone());
                    ckpt.save(out)?;
                }
                TrainTarget::Evidence(args) => {
                    let (train, dev) = split_task_samples(&args, config.seed)?;
                    let model: EvidenceClassifier =
                        train_evidence_classifier(b, &train.evidence, &dev.evidence, &config.evidence)?;
                    println!("evidence dev accuracy {:.4}", model.dev_accuracy);
                    Checkpoint::new(ModelKind::Evidence, &config.encoder, &config.evidence, &model)?.save(out)?;
                }
                TrainTarget::Linker(args) => {
                    let (train, dev) = split_task_samples(&args, config.seed)?;
                    let model = train_linker(b, &train.link, &dev.link, &config.linker.train)?;
                    println!("linker dev accuracy {:.4}", model.dev_accuracy);
                    Checkpoint::new(ModelKind::Linker, &config.encoder, &config.linker, &model)?.save(out)?;
                }
                TrainTarget::Inference(args) => {
                    let (train, dev) = split_task_samples(&args, config.seed)?;
                    let model = train_inference(b, &train.infer, &dev.infer, &config.inference.train)?;
                    println!("inference dev macro F1 {:.4}", model.dev_macro_f1);
                    Checkpoint::new(ModelKind::Inference, &config.encoder, &config.inference, &model)?.save(out)?;
                }
            }
        }
        Command::TuneThreshold { dev } => {
            let backend = build_encoder(&config.encoder)?;
            let dev = load_corpus(&dev)?;
            let best = tune_threshold(&dev, backend.as_ref(), &default_grid())?;
            create_parent(out)?;
            write_json(out, &serde_json::json!({ "similarity_threshold": best }))?;
            println!("similarity_threshold = {best}");
        }
        Command::Predict { input, models, ablation } => {
            fill_models(&mut config, &models);
            let pipeline = Pipeline::load(&config)?;
            let docs = load_corpus(&input)?;
            let run = pipeline.run_end_to_end(&docs, ablation.into());
            write_run(out, &run)?;
            println!(
                "{} documents, {} relations, {} failures",
                run.report.documents,
                run.report.relations,
                run.report.failures.len()
            );
        }
        Command::Evaluate { gold, pred, extra } => {
            let gold = load_corpus(&gold)?;
            let pred = load_corpus(&pred)?;
            let links = match &extra.links {
                Some(p) => Some(align_links(&pred, read_jsonl(p)?)?),
                None => None,
            };
            score(out, &gold, &pred, links.as_deref(), &extra)?;
        }
        Command::Report {
            gold,
            models,
            ablation,
            extra,
        } => {
            fill_models(&mut config, &models);
            let pipeline = Pipeline::load(&config)?;
            let gold = load_corpus(&gold)?;
            let run = pipeline.run_end_to_end(&gold, ablation.into());
            write_run(out, &run)?;
            score(out, &gold, &run.docs, Some(&run.links), &extra)?;
        }
    }
    Ok(())
}

fn split_task_samples(
    args: &TrainSamples,
    seed: u64,
) -> Result<(trial_evidence::pipeline::TaskSamples, trial_evidence::pipeline::TaskSamples)> {
    use trial_evidence::pipeline::TaskSamples;
    let train: Vec<Sample> = read_jsonl(&args.samples)?;
    let dev: Option<Vec<Sample>> = args.dev_samples.as_deref().map(read_jsonl).transpose()?;
    Ok(match dev {
        Some(dev) => (TaskSamples::from_samples(&train), TaskSamples::from_samples(&dev)),
        None => split_samples(&train, seed, DEV_FRACTION),
    })
}

fn write_run(out: &Path, run: &RunOutput) -> Result<()> {
    create_dir(out)?;
    write_predictions(&run.relations(), &out.join("predictions.jsonl"))?;
    write_corpus(&run.docs, &out.join("predicted_corpus.jsonl"))?;
    write_jsonl(&out.join("links.jsonl"), run.doc_links())?;
    write_json(&out.join("run_report.json"), &run.report)
}

fn align_links(pred: &[AnnotatedDocument], records: Vec<DocLinks>) -> Result<Vec<Vec<trial_evidence::linking::Link>>> {
    if records.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} link records for {} predicted documents",
            records.len(),
            pred.len()
        )));
    }
    pred.iter()
        .zip(records)
        .map(|(d, r)| {
            if r.doc_id != d.doc_id() {
                return Err(Error::InvalidInput(format!(
                    "links for {} where {} was expected",
                    r.doc_id,
                    d.doc_id()
                )));
            }
            Ok(r.links)
        })
        .collect()
}

fn score(
    out: &Path,
    gold: &[AnnotatedDocument],
    pred: &[AnnotatedDocument],
    links: Option<&[Vec<trial_evidence::linking::Link>]>,
    extra: &EvalArgs,
) -> Result<()> {
    let hard_cases: Vec<HardCase> = match &extra.hard_cases {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    let metrics = evaluate(
        gold,
        pred,
        EvalInputs {
            links,
            hard_cases: &hard_cases,
            partial: extra.partial,
        },
    )?;
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    let table = render_table(&metrics);
    std::fs::write(out.join("metrics.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use maskvec::corpus::{build_vocab, load_sts, sample_sentences, Corpus, SubwordConvention, Vocabulary};
use maskvec::embeddings::{
    pca_2d, resolve_filter, sentence_anisotropy, BiasFilterSpec, CaseMode, EmbeddingMatrix, SentenceEncoder,
    StaticAvgEncoder,
};
use maskvec::eval::{cumulative_ladder, eval_sts, run_bias_ablation, run_objective_comparison, EvalReport, ObjectiveExperiment, ReportRow, StsPair, StsSet};
use maskvec::model::{init_model, pretrain_mlm, ModelParams, PooledEncoder, Pooling};
use maskvec::prompt::{
    encode_prompts, greedy_template_search, parse_template, train_continuous_template, PromptEncoder, Representation,
    Template, DEFAULT_TEMPLATES, DEFAULT_TEMPLATES_BEGIN_MARKED, DEFAULT_TOP_K,
};
use maskvec::synth::{
    biased_world, paraphrase_corpus, paraphrase_sts, vocabulary_text, Split, PREFIX_CANDIDATES, RELATIONSHIP_CANDIDATES,
    TEMPLATE_SUITE,
};
use maskvec::training::{self, write_trace, DevSet, TrainConfig};

use crate::config::RunConfig;
use crate::output::{write_file, Stamp};
use crate::{ConfigArgs, UsageError};

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::load(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let file = File::open(path).with_context(|| format!("opening vocabulary {}", path.display()))?;
    Vocabulary::read_tsv(BufReader::new(file)).with_context(|| format!("reading vocabulary {}", path.display()))
}

fn load_model(path: &Path, vocab: &Vocabulary) -> Result<ModelParams> {
    let params = ModelParams::load(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    if params.config().vocab_size != vocab.len() {
        return Err(maskvec::Error::DimensionMismatch { expected: vocab.len(), found: params.config().vocab_size })
            .context(format!("checkpoint {} does not match the vocabulary", path.display()));
    }
    Ok(params)
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::load(path).with_context(|| format!("reading embeddings {}", path.display()))
}

fn read_sts(path: &Path) -> Result<Vec<StsPair>> {
    load_sts(path).with_context(|| format!("reading STS file {}", path.display()))
}

/// Every `*.tsv` file of `dir`, named by file stem, in name order.
fn load_sts_dir(dir: &Path) -> Result<Vec<StsSet>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing STS directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "tsv"));
    files.sort();
    if files.is_empty() {
        return Err(maskvec::Error::Format(format!("no .tsv files in {}", dir.display())).into());
    }
    files
        .iter()
        .map(|p| Ok((p.file_stem().expect("file").to_string_lossy().into_owned(), read_sts(p)?)))
        .collect()
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
}

fn default_templates(vocab: &Vocabulary) -> [&'static str; 2] {
    match vocab.convention() {
        SubwordConvention::Continuation => DEFAULT_TEMPLATES,
        SubwordConvention::BeginMarked => DEFAULT_TEMPLATES_BEGIN_MARKED,
    }
}

#[derive(Args, Debug)]
pub struct TemplateArgs {
    /// Template text containing [X] and [MASK].
    #[arg(long, conflicts_with = "template_file")]
    template: Option<String>,
    /// Continuous template file (TPL1).
    #[arg(long)]
    template_file: Option<PathBuf>,
}

impl TemplateArgs {
    fn resolve(&self, vocab: &Vocabulary) -> Result<Template> {
        match (&self.template, &self.template_file) {
            (Some(text), _) => Ok(parse_template(text, vocab).with_context(|| format!("template {text:?}"))?),
            (None, Some(path)) => {
                Template::load_tpl1(path, vocab).with_context(|| format!("reading template {}", path.display()))
            }
            (None, None) => Ok(parse_template(default_templates(vocab)[0], vocab)?),
        }
    }
}

fn fmt_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.8}")).collect::<Vec<_>>().join("\t")
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    /// Line-per-sentence corpus.
    corpus: PathBuf,
    #[arg(long, default_value_t = 2000)]
    max_size: usize,
    /// continuation (BERT-style `##`) or begin-marked (RoBERTa-style `Ġ`).
    #[arg(long, default_value = "continuation")]
    convention: SubwordConvention,
    #[arg(long)]
    output: PathBuf,
}

pub fn vocab(a: &VocabArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let vocab = build_vocab(&corpus, a.max_size, a.convention)?;
    let mut bytes = Vec::new();
    vocab.write_tsv(&mut bytes)?;
    write_file(&a.output, &bytes)?;
    eprintln!("{} tokens written to {}", vocab.len(), a.output.display());
    Ok(())
}

fn output_dir(a: &ConfigArgs, config: &RunConfig) -> Result<PathBuf> {
    a.output_dir.clone().map_or_else(|| config.require_path("output_dir"), Ok)
}

pub fn pretrain(a: &ConfigArgs, stamp: &Stamp) -> Result<()> {
    let config = RunConfig::load(&a.config)?;
    let vocab = load_vocab(&config.require_path("vocab")?)?;
    let corpus = load_corpus(&config.require_path("corpus")?)?;
    let out = output_dir(a, &config)?;
    let model = config.model(vocab.len())?;
    let outcome = pretrain_mlm(init_model(&model)?, &corpus.tokenize(&vocab), &vocab.specials(), &config.pretrain()?)?;

    let checkpoint = out.join("pretrained.mlm1");
    write_file(&checkpoint, &outcome.params.to_bytes())?;
    let mut body = String::from("step\tloss\n");
    for (step, loss) in outcome.losses.iter().enumerate() {
        body.push_str(&format!("{}\t{loss:.6}\n", step + 1));
    }
    stamp.write(Some(&out.join("pretrain_loss.tsv")), &body)?;
    let last = outcome.losses.last().copied().unwrap_or(f64::NAN);
    eprintln!("pretrained {} steps, final loss {last:.4}; checkpoint {}", outcome.losses.len(), checkpoint.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EncoderChoice {
    StaticAvg,
    LastAvg,
    FirstLastAvg,
    PromptMask,
    PromptTopk,
}

#[derive(Args, Debug)]
pub struct ModelSource {
    /// EMB1 embedding table (static-avg encoder).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// MLM1 checkpoint (model-based encoders); needs --vocab.
    #[arg(long, requires = "vocab")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
}

impl ModelSource {
    fn model(&self) -> Result<(ModelParams, Vocabulary)> {
        let (Some(ckpt), Some(vocab)) = (&self.checkpoint, &self.vocab) else {
            return Err(usage("this encoder needs --checkpoint and --vocab"));
        };
        let vocab = load_vocab(vocab)?;
        Ok((load_model(ckpt, &vocab)?, vocab))
    }

    fn embeddings(&self) -> Result<EmbeddingMatrix> {
        let path = self.embeddings.as_ref().ok_or_else(|| usage("this encoder needs --embeddings"))?;
        load_embeddings(path)
    }
}

#[derive(Args, Debug)]
pub struct AnisotropyArgs {
    #[arg(long, value_enum)]
    encoder: EncoderChoice,
    #[arg(long)]
    corpus: PathBuf,
    /// Sentences sampled from the corpus (all when omitted).
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    source: ModelSource,
    #[command(flatten)]
    template: TemplateArgs,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    k: usize,
    /// Report TSV; the scalar is always printed to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn analyze_anisotropy(a: &AnisotropyArgs, stamp: &Stamp) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let sample = match a.sample_n {
        Some(n) => sample_sentences(&corpus, n, a.seed)?,
        None => corpus,
    };
    let value = match a.encoder {
        EncoderChoice::StaticAvg => {
            let matrix = a.source.embeddings()?;
            sentence_anisotropy(&StaticAvgEncoder::new(&matrix, &BiasFilterSpec::NONE), &sample)?
        }
        EncoderChoice::LastAvg | EncoderChoice::FirstLastAvg => {
            let (params, vocab) = a.source.model()?;
            let pooling = if matches!(a.encoder, EncoderChoice::LastAvg) { Pooling::LastAvg } else { Pooling::FirstLastAvg };
            sentence_anisotropy(&PooledEncoder { params: &params, vocab: &vocab, pooling }, &sample)?
        }
        EncoderChoice::PromptMask | EncoderChoice::PromptTopk => {
            let (params, vocab) = a.source.model()?;
            let template = a.template.resolve(&vocab)?;
            let mut encoder = PromptEncoder::new(&params, &vocab, &template);
            if matches!(a.encoder, EncoderChoice::PromptTopk) {
                encoder.representation = Representation::TopK(a.k);
            }
            sentence_anisotropy(&encoder, &sample)?
        }
    };
    println!("{value:.6}");
    if let Some(path) = &a.output {
        let name = a.encoder.to_possible_value().expect("named").get_name().to_string();
        stamp.write(Some(path), &format!("encoder\tsentences\tanisotropy\n{name}\t{}\t{value:.6}\n", sample.len()))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Ladder {
    /// none, freq, +sub, +case, +pun.
    Cumulative,
    /// Each filter on its own, then all together.
    Individual,
}

#[derive(Args, Debug)]
pub struct BiasArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Directory of `sentence1<TAB>sentence2<TAB>score` files.
    #[arg(long)]
    sts_dir: PathBuf,
    #[arg(long, value_enum, default_value = "cumulative")]
    ladder: Ladder,
    /// How many of the most frequent tokens the frequency filter removes.
    #[arg(long, default_value_t = 36)]
    top_freq: usize,
    /// lowercase (lowercase the input) or drop (remove uppercase tokens).
    #[arg(long, default_value = "lowercase")]
    case: CaseMode,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn analyze_bias(a: &BiasArgs, stamp: &Stamp) -> Result<()> {
    let matrix = load_embeddings(&a.embeddings)?;
    let sets = load_sts_dir(&a.sts_dir)?;
    let ladder = match a.ladder {
        Ladder::Cumulative => cumulative_ladder(a.top_freq, a.case),
        Ladder::Individual => {
            let none = BiasFilterSpec::NONE;
            vec![
                none,
                BiasFilterSpec { top_freq_count: a.top_freq, ..none },
                BiasFilterSpec { remove_subwords: true, ..none },
                BiasFilterSpec { case_mode: a.case, ..none },
                BiasFilterSpec { remove_punctuation: true, ..none },
                BiasFilterSpec { case_mode: a.case, ..BiasFilterSpec::all(a.top_freq) },
            ]
        }
    };
    let report = run_bias_ablation(&matrix, &sets, &ladder)?;
    stamp.write(a.output.as_deref(), &report.to_tsv())
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Tokens flagged as frequent.
    #[arg(long, default_value_t = 36)]
    top_freq: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn pca_export(a: &PcaArgs, stamp: &Stamp) -> Result<()> {
    let matrix = load_embeddings(&a.embeddings)?;
    let pca = pca_2d(&matrix)?;
    let vocab = matrix.vocab();
    let frequent = resolve_filter(vocab, &BiasFilterSpec { top_freq_count: a.top_freq, ..BiasFilterSpec::NONE });
    let flag = |b: bool| u8::from(b);
    let mut body = String::from("id\ttoken\tx\ty\tfrequency\tfrequent\tsubword\tuppercase\tpunctuation\tspecial\n");
    for (record, xy) in vocab.records().iter().zip(pca.coordinates.rows()) {
        body.push_str(&format!(
            "{}\t{}\t{:.8}\t{:.8}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            record.id,
            record.surface,
            xy[0],
            xy[1],
            record.frequency,
            flag(frequent.contains(record.id)),
            flag(record.is_subword),
            flag(record.has_uppercase),
            flag(record.is_punctuation),
            flag(vocab.is_special(record.id)),
        ));
    }
    stamp.write(a.output.as_deref(), &body)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    Mask,
    Topk,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[command(flatten)]
    template: TemplateArgs,
    #[arg(long, value_enum, default_value = "mask")]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    k: usize,
    /// Subtract the template bias (mask method only).
    #[arg(long)]
    denoise: bool,
    /// One sentence per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn encode(a: &EncodeArgs, stamp: &Stamp) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let params = load_model(&a.checkpoint, &vocab)?;
    let template = a.template.resolve(&vocab)?;
    let representation = match a.method {
        Method::Mask => Representation::Mask,
        Method::Topk => Representation::TopK(a.k),
    };
    let encoder = PromptEncoder::new(&params, &vocab, &template);
    let ids = load_corpus(&a.input)?.sentences().iter().map(|s| encoder.tokenize(s)).collect::<maskvec::Result<Vec<_>>>()?;
    let vectors = encode_prompts(&params, &template, &ids, representation, a.denoise)?;
    let mut body = String::new();
    for v in &vectors {
        body.push_str(&fmt_vector(v));
        body.push('\n');
    }
    stamp.write(a.output.as_deref(), &body)
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// One relationship phrase per line (an empty line is the empty phrase).
    #[arg(long)]
    rel_file: PathBuf,
    /// One prefix or `... [X] ...` wrapper per line.
    #[arg(long)]
    prefix_file: PathBuf,
    /// STS file used for scoring.
    #[arg(long)]
    dev: PathBuf,
    /// Trace TSV; the best template is printed to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn template_search(a: &SearchArgs, stamp: &Stamp) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let params = load_model(&a.checkpoint, &vocab)?;
    let dev = read_sts(&a.dev)?;
    let rels = read_lines(&a.rel_file)?;
    let prefixes: Vec<String> = read_lines(&a.prefix_file)?.into_iter().filter(|l| !l.trim().is_empty()).collect();
    let outcome = greedy_template_search(&rels, &prefixes, |text| {
        let template = parse_template(text, &vocab)?;
        eval_sts(&PromptEncoder::new(&params, &vocab, &template), &dev)
    })?;
    let mut body = String::from("stage\tcandidate\ttemplate\tspearman\n");
    for step in &outcome.trace {
        body.push_str(&format!("{}\t{}\t{}\t{:.6}\n", step.stage.name(), step.candidate, step.template, step.score));
    }
    if let Some(path) = &a.output {
        stamp.write(Some(path), &body)?;
    }
    println!("{}\t{:.6}", outcome.best, outcome.best_score);
    Ok(())
}

fn train_config(config: &RunConfig, vocab: &Vocabulary) -> Result<TrainConfig> {
    let defaults = default_templates(vocab);
    let a = config.raw("train", "template_a").unwrap_or(defaults[0]);
    let b = config.raw("train", "template_b").unwrap_or(defaults[1]);
    let templates = vec![parse_template(a, vocab)?, parse_template(b, vocab)?];
    let mut train = TrainConfig::new(config.objective()?, templates);
    let d = train.clone();
    train.batch_size = config.get("train", "batch_size")?.unwrap_or(d.batch_size);
    train.temperature = config.get("train", "temperature")?.unwrap_or(d.temperature);
    train.learning_rate = config.get("train", "learning_rate")?.unwrap_or(d.learning_rate);
    train.epochs = config.get("train", "epochs")?.unwrap_or(d.epochs);
    train.max_steps = config.get("train", "max_steps")?.or(d.max_steps);
    train.valid_steps = config.get("train", "valid_steps")?.unwrap_or(d.valid_steps);
    train.seed = config.get("train", "seed")?.unwrap_or(d.seed);
    train.validate()?;
    Ok(train)
}

/// `[paths] init_checkpoint` when given, else a fresh `[model]` initialization.
fn starting_model(config: &RunConfig, vocab: &Vocabulary) -> Result<ModelParams> {
    match config.path("init_checkpoint") {
        Some(path) => load_model(&path, vocab),
        None => Ok(init_model(&config.model(vocab.len())?)?),
    }
}

fn dev_set(config: &RunConfig, vocab: &Vocabulary) -> Result<Option<DevSet>> {
    config.path("dev").map(|p| Ok(DevSet::new(&read_sts(&p)?, vocab)?)).transpose()
}

pub fn train(a: &ConfigArgs, stamp: &Stamp) -> Result<()> {
    let config = RunConfig::load(&a.config)?;
    let vocab = load_vocab(&config.require_path("vocab")?)?;
    let corpus = load_corpus(&config.require_path("corpus")?)?;
    let out = output_dir(a, &config)?;
    let train = train_config(&config, &vocab)?;
    let dev = dev_set(&config, &vocab)?;
    let start = starting_model(&config, &vocab)?;
    let outcome = training::train(start, &corpus.tokenize(&vocab), dev.as_ref(), &train)?;

    let checkpoint = out.join("trained.mlm1");
    write_file(&checkpoint, &outcome.params.to_bytes())?;
    let mut trace = Vec::new();
    write_trace(&outcome.trace, &mut trace)?;
    stamp.write(Some(&out.join("train_trace.tsv")), &String::from_utf8(trace).expect("utf-8"))?;
    match (outcome.best_step, outcome.best_dev) {
        (Some(step), Some(score)) => eprintln!("best dev spearman {score:.4} at step {step}; checkpoint {}", checkpoint.display()),
        _ => eprintln!("trained {} steps; checkpoint {}", outcome.trace.len(), checkpoint.display()),
    }
    Ok(())
}

pub fn train_template(a: &ConfigArgs) -> Result<()> {
    let config = RunConfig::load(&a.config)?;
    let vocab = load_vocab(&config.require_path("vocab")?)?;
    let corpus = load_corpus(&config.require_path("corpus")?)?;
    let out = output_dir(a, &config)?;
    let params = load_model(&config.require_path("checkpoint")?, &vocab)?;
    let text = config.raw("continuous", "template").unwrap_or(default_templates(&vocab)[0]);
    let manual = parse_template(text, &vocab)?;
    let learned = train_continuous_template(&params, &manual, &corpus.tokenize(&vocab), &config.continuous()?)?;

    let path = out.join("continuous.tpl1");
    write_file(&path, &learned.to_tpl1()?)?;
    if let Some(dev) = config.path("dev") {
        let dev = read_sts(&dev)?;
        let before = eval_sts(&PromptEncoder::new(&params, &vocab, &manual), &dev)?;
        let after = eval_sts(&PromptEncoder::new(&params, &vocab, &learned), &dev)?;
        eprintln!("dev spearman: manual {before:.4}, continuous {after:.4}");
    }
    eprintln!("continuous template written to {}", path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    source: ModelSource,
    #[command(flatten)]
    template: TemplateArgs,
    /// Directory of STS files, one dataset per `*.tsv`.
    #[arg(long)]
    sts_dir: PathBuf,
    /// Frequency cut for the filtered static-avg row.
    #[arg(long, default_value_t = 36)]
    top_freq: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn scores(encoder: &dyn SentenceEncoder, sets: &[StsSet]) -> Result<Vec<f64>> {
    sets.iter().map(|(_, pairs)| Ok(eval_sts(encoder, pairs)?)).collect()
}

pub fn eval(a: &EvalArgs, stamp: &Stamp) -> Result<()> {
    let sets = load_sts_dir(&a.sts_dir)?;
    let mut report = EvalReport::new("method", sets.iter().map(|(n, _)| n.clone()).collect());
    match (&a.source.embeddings, &a.source.checkpoint) {
        (Some(_), None) => {
            let matrix = a.source.embeddings()?;
            for filter in [BiasFilterSpec::NONE, BiasFilterSpec::all(a.top_freq)] {
                let encoder = StaticAvgEncoder::new(&matrix, &filter);
                report.rows.push(ReportRow::new(format!("static-avg[{filter}]"), scores(&encoder, &sets)?));
            }
        }
        (None, Some(_)) => {
            let (params, vocab) = a.source.model()?;
            for (name, pooling) in [("last-avg", Pooling::LastAvg), ("first-last-avg", Pooling::FirstLastAvg)] {
                let encoder = PooledEncoder { params: &params, vocab: &vocab, pooling };
                report.rows.push(ReportRow::new(name, scores(&encoder, &sets)?));
            }
            let template = a.template.resolve(&vocab)?;
            let encoder = PromptEncoder::new(&params, &vocab, &template);
            report.rows.push(ReportRow::new("prompt-mask", scores(&encoder, &sets)?));
        }
        _ => return Err(usage("give exactly one of --embeddings or --checkpoint")),
    }
    stamp.write(a.output.as_deref(), &report.to_tsv())
}

#[derive(Args, Debug)]
pub struct ObjectivesArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds, at least two.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn objectives(a: &ObjectivesArgs, stamp: &Stamp) -> Result<()> {
    let config = RunConfig::load(&a.config)?;
    let vocab = load_vocab(&config.require_path("vocab")?)?;
    let sentences = load_corpus(&config.require_path("corpus")?)?.tokenize(&vocab);
    let sets = load_sts_dir(&config.require_path("sts_dir")?)?;
    let dev = dev_set(&config, &vocab)?;
    let initial = config.path("init_checkpoint").map(|p| load_model(&p, &vocab)).transpose()?;
    let experiment = ObjectiveExperiment {
        initial: initial.as_ref(),
        model: config.model(vocab.len())?,
        train: train_config(&config, &vocab)?,
        vocab: &vocab,
        sentences: &sentences,
        dev: dev.as_ref(),
        eval_sets: &sets,
    };
    let report = run_objective_comparison(&experiment, &a.seeds)?;
    stamp.write(a.output.as_deref(), &report.to_tsv())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    output_dir: PathBuf,
    /// Training sentences in the paraphrase corpus.
    #[arg(long, default_value_t = 4000)]
    sentences: usize,
    /// Pairs per STS file.
    #[arg(long, default_value_t = 300)]
    pairs: usize,
}

/// Run configuration written next to the synthetic data.
const DESK_CONF: &str = "\
# Desk-scale run on the synthetic paraphrase world.
# Paths are relative to this file.

[paths]
corpus = corpus.txt
vocab = vocab.tsv
dev = sts-dev.tsv
sts_dir = sts-test
output_dir = runs
init_checkpoint = runs/pretrained.mlm1
checkpoint = runs/trained.mlm1

[model]
seed = 0

[pretrain]
steps = 1000
seed = 0

[train]
objective = two-templates-denoised
batch_size = 16
learning_rate = 0.001
max_steps = 1000
valid_steps = 125
seed = 0

[continuous]
template = [X] [MASK] .
steps = 300
seed = 0
";

fn sts_text(pairs: &[StsPair]) -> String {
    pairs.iter().map(|p| format!("{}\t{}\t{:.4}\n", p.sentence1, p.sentence2, p.gold)).collect()
}

fn lines(items: &[&str]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let dir = &a.output_dir;
    let corpus = paraphrase_corpus(a.sentences, 1);
    write_file(&dir.join("corpus.txt"), lines(&corpus.sentences().iter().map(String::as_str).collect::<Vec<_>>()).as_bytes())?;
    let vocab = build_vocab(&vocabulary_text(&corpus), 2000, SubwordConvention::Continuation)?;
    let mut bytes = Vec::new();
    vocab.write_tsv(&mut bytes)?;
    write_file(&dir.join("vocab.tsv"), &bytes)?;
    write_file(&dir.join("sts-dev.tsv"), sts_text(&paraphrase_sts(a.pairs, Split::Dev, 7)).as_bytes())?;
    write_file(&dir.join("sts-test/paraphrase.tsv"), sts_text(&paraphrase_sts(a.pairs, Split::Test, 11)).as_bytes())?;

    let world = biased_world(64, 500, 7)?;
    let emb = dir.join("biased/biased.emb");
    fs::create_dir_all(dir.join("biased")).with_context(|| format!("creating {}", dir.display()))?;
    world.matrix.save(&emb).with_context(|| format!("writing {}", emb.display()))?;
    for (name, pairs) in &world.sts {
        write_file(&dir.join(format!("biased/sts/{name}.tsv")), sts_text(pairs).as_bytes())?;
    }
    write_file(&dir.join("templates.txt"), lines(&TEMPLATE_SUITE).as_bytes())?;
    write_file(&dir.join("relationships.txt"), lines(&RELATIONSHIP_CANDIDATES).as_bytes())?;
    write_file(&dir.join("prefixes.txt"), lines(&PREFIX_CANDIDATES).as_bytes())?;
    write_file(&dir.join("desk.conf"), DESK_CONF.as_bytes())?;
    eprintln!("synthetic data written to {}", dir.display());
    Ok(())
}

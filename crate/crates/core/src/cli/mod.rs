//! Command-line surface: `synth`, `split`, `train`, `eval`, `probe`,
//! `analyze {qwk, tfidf, snr, srr, stats, probe}` and `report`.
//!
//! Every command resolves and validates its inputs before writing anything.

mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::RunConfig;

use crate::adversarial::trace_csv;
use crate::attr::{Attribute, PerAttribute, Role};
use crate::corpus::{
    manifest_to_jsonl, pairwise_agreement, qwk, read_manifest, read_rater_table, read_waveform,
    snr_estimate, speaker_disjoint_split, srr_components, tfidf_top_terms, token_stats,
    whitespace_tokenize, encode_features, CorpusManifest, Split, tfidf_csv,
};
use crate::error::{Error, Result};
use crate::eval::{confusion_csv, probe, render_results_table, EvalReport, ResultRow};
use crate::fsutil;
use crate::model::{read_checkpoint, encode_checkpoint, ModelState};
use crate::pipeline::{evaluate_split, fit, TrainMode};
use crate::synth::{generate, stats};

#[derive(Debug, Parser)]
#[command(name = "mtadv", version, about = "Adversarial multi-attribute training and corpus tools")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (or file, for `split` and `report`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus: manifest.jsonl plus MRVF1 feature files.
    Synth(SynthArgs),
    /// Assign whole speakers to train/val/test.
    Split(SplitArgs),
    /// Train, checkpoint, and evaluate on the test split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Linear probe on frozen encoder outputs.
    Probe(ProbeArgs),
    /// Corpus and model analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Collect train reports into one results table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Quadratic weighted kappa of an `item,rating_a,rating_b` CSV.
    Qwk(QwkArgs),
    /// Most distinctive transcript terms per dialect.
    Tfidf(TfidfArgs),
    /// Frame-energy SNR of an MRVF1 waveform.
    Snr(SnrArgs),
    /// SRR from separate direct and reverberant components.
    Srr(SrrArgs),
    /// Corpus size, hours and token statistics.
    Stats(StatsArgs),
    /// Same as the top-level `probe`.
    Probe(ProbeArgs),
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub samples_per_speaker: Option<usize>,
    #[arg(long)]
    pub input_dim: Option<usize>,
    #[arg(long)]
    pub leak_dialect: Option<f64>,
    #[arg(long)]
    pub leak_gender: Option<f64>,
    #[arg(long)]
    pub leak_age: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<f64>,
    #[arg(long)]
    pub val: Option<f64>,
    #[arg(long)]
    pub test: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `fixed-gamma` or `meta`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub primary: Option<String>,
    /// Comma-separated adversarial attributes.
    #[arg(long, value_delimiter = ',')]
    pub adversarial: Option<Vec<String>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub gamma_init: Option<f64>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub meta_learning_rate: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    /// Model name used in result tables.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "dialect")]
    pub attribute: String,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ProbeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub attribute: Option<String>,
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Args, Default)]
pub struct QwkArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct TfidfArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Restrict to one split.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SnrArgs {
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    pub frame_len: usize,
    #[arg(long, default_value_t = 160)]
    pub hop: usize,
}

#[derive(Debug, Args, Default)]
pub struct SrrArgs {
    #[arg(long)]
    pub direct: Option<PathBuf>,
    #[arg(long)]
    pub reverberant: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ReportArgs {
    /// Directories written by `train` (each holding report.json).
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub mode: String,
    pub split: Split,
    pub roles: BTreeMap<Attribute, Role>,
    pub gamma: BTreeMap<Attribute, f64>,
    pub primary: Attribute,
    pub reports: BTreeMap<Attribute, ReportMetrics>,
}

/// Serializable mirror of [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetrics {
    pub num_samples: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Vec<Vec<f64>>,
    pub zero_support: Vec<usize>,
}

impl From<&EvalReport> for ReportMetrics {
    fn from(r: &EvalReport) -> Self {
        Self {
            num_samples: r.num_samples,
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            confusion: r.confusion.clone(),
            zero_support: r.zero_support.clone(),
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out_dir(&self, command: &str) -> Result<PathBuf> {
        self.out.clone().ok_or_else(|| missing("--out", command))
    }
}

fn missing(flag: &str, command: &str) -> Error {
    Error::Config(format!("{command}: missing required {flag}"))
}

fn required<'a>(flag: Option<&'a PathBuf>, fallback: Option<&'a PathBuf>, name: &str, command: &str) -> Result<&'a Path> {
    let p = flag.or(fallback).ok_or_else(|| missing(name, command))?;
    if !p.exists() {
        return Err(Error::Config(format!("{command}: {name} {} does not exist", p.display())));
    }
    Ok(p)
}

fn load_manifest_with_features(path: &Path) -> Result<CorpusManifest> {
    let mut m = read_manifest(path)?;
    m.load_features(path.parent().unwrap_or(Path::new(".")))?;
    Ok(m)
}

fn marker_roles(state: &ModelState, primary: Attribute) -> PerAttribute<Role> {
    PerAttribute::from_fn(|a| {
        if a == primary {
            Role::Primary
        } else if state.gamma.contains_key(&a) {
            Role::Adversarial
        } else {
            Role::Off
        }
    })
}

fn role_map(roles: &PerAttribute<Role>) -> BTreeMap<Attribute, Role> {
    roles.iter().map(|(a, r)| (a, *r)).collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::State(format!("serializing report: {e}")))
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main_with_args() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out: cli.out.or_else(|| cfg.paths.out.clone()),
        cfg,
    };
    match cli.command {
        Command::Synth(a) => run_synth(&ctx, &a, out),
        Command::Split(a) => run_split(&ctx, &a, out),
        Command::Train(a) => run_train(&ctx, &a, out),
        Command::Eval(a) => run_eval(&ctx, &a, out),
        Command::Probe(a) | Command::Analyze(AnalyzeCommand::Probe(a)) => run_probe(&ctx, &a, out),
        Command::Analyze(AnalyzeCommand::Qwk(a)) => run_qwk(&a, out),
        Command::Analyze(AnalyzeCommand::Tfidf(a)) => run_tfidf(&ctx, &a, out),
        Command::Analyze(AnalyzeCommand::Snr(a)) => run_snr(&a, out),
        Command::Analyze(AnalyzeCommand::Srr(a)) => run_srr(&a, out),
        Command::Analyze(AnalyzeCommand::Stats(a)) => run_stats(&ctx, &a, out),
        Command::Report(a) => run_report(&ctx, &a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn run_synth(ctx: &Ctx, a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut sc = ctx.cfg.synth_config(ctx.seed);
    sc.num_speakers = a.speakers.unwrap_or(sc.num_speakers);
    sc.samples_per_speaker = a.samples_per_speaker.unwrap_or(sc.samples_per_speaker);
    sc.input_dim = a.input_dim.unwrap_or(sc.input_dim);
    sc.leak.0[0] = a.leak_dialect.unwrap_or(sc.leak.0[0]);
    sc.leak.0[1] = a.leak_gender.unwrap_or(sc.leak.0[1]);
    sc.leak.0[2] = a.leak_age.unwrap_or(sc.leak.0[2]);
    sc.noise_std = a.noise_std.unwrap_or(sc.noise_std);
    sc.validate()?;
    let dir = ctx.out_dir("synth")?;

    let mut manifest = generate(&sc)?;
    let mut files = Vec::with_capacity(manifest.len());
    for s in &mut manifest.samples {
        let rel = format!("features/{}.mrvf", s.id);
        files.push((dir.join(&rel), encode_features(s.frames()?)?));
        s.features_path = Some(rel);
    }
    let jsonl = manifest_to_jsonl(&manifest)?;
    for (path, bytes) in files {
        fsutil::write_atomic(&path, &bytes)?;
    }
    fsutil::write_atomic(&dir.join("manifest.jsonl"), jsonl.as_bytes())?;
    say(out, &format!("wrote {} samples to {}\n", manifest.len(), dir.join("manifest.jsonl").display()))?;
    say(out, &stats(&manifest).render())
}

fn run_split(ctx: &Ctx, a: &SplitArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.manifest.as_ref(), ctx.cfg.paths.manifest.as_ref(), "--manifest", "split")?;
    let mut ratios = ctx.cfg.split_ratios();
    ratios.0[0] = a.train.unwrap_or(ratios.0[0]);
    ratios.0[1] = a.val.unwrap_or(ratios.0[1]);
    ratios.0[2] = a.test.unwrap_or(ratios.0[2]);
    ratios.validate()?;
    let target = match &ctx.out {
        Some(p) => p.clone(),
        None => path.with_extension("split.jsonl"),
    };
    let src_dir = path.parent().unwrap_or(Path::new("."));
    let dst_dir = target.parent().unwrap_or(Path::new("."));

    let mut manifest = read_manifest(path)?;
    manifest.split_assignment = Some(speaker_disjoint_split(&manifest, ratios, ctx.seed)?);
    if std::path::absolute(src_dir).ok() != std::path::absolute(dst_dir).ok() {
        for s in &mut manifest.samples {
            if let Some(rel) = &s.features_path {
                let joined = src_dir.join(rel);
                let abs = std::path::absolute(&joined).map_err(|e| Error::io(&joined, e))?;
                s.features_path = Some(abs.to_string_lossy().into_owned());
            }
        }
    }
    manifest.validate()?;
    fsutil::write_atomic(&target, manifest_to_jsonl(&manifest)?.as_bytes())?;
    say(out, &format!("wrote {}\n", target.display()))?;
    say(out, &stats(&manifest).render())
}

fn run_train(ctx: &Ctx, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.manifest.as_ref(), ctx.cfg.paths.manifest.as_ref(), "--manifest", "train")?;
    let mut cfg = ctx.cfg.clone();
    let t = &mut cfg.task;
    t.primary = a.primary.clone().or(t.primary.take());
    t.adversarial = a.adversarial.clone().or(t.adversarial.take());
    t.epochs = a.epochs.or(t.epochs);
    t.learning_rate = a.learning_rate.or(t.learning_rate);
    t.batch_size = a.batch_size.or(t.batch_size);
    t.gamma_init = a.gamma_init.or(t.gamma_init);
    t.gamma_max = a.gamma_max.or(t.gamma_max);
    t.name = a.name.clone().or(t.name.take());
    cfg.meta.meta_learning_rate = a.meta_learning_rate.or(cfg.meta.meta_learning_rate);
    cfg.encoder.hidden_dim = a.hidden_dim.or(cfg.encoder.hidden_dim);
    cfg.encoder.num_layers = a.num_layers.or(cfg.encoder.num_layers);
    cfg.mode = a.mode.clone().or(cfg.mode);
    let dir = ctx.out_dir("train")?;

    let manifest = load_manifest_with_features(path)?;
    if cfg.encoder.input_dim.is_none() {
        let width = manifest
            .samples
            .first()
            .map(|s| s.frames().map(|f| f.cols()))
            .transpose()?;
        cfg.encoder.input_dim = width;
    }
    let fit_cfg = cfg.fit_config(ctx.seed)?;
    fit_cfg.validate()?;
    for split in Split::ALL {
        if manifest.split(split)?.is_empty() && (split != Split::Val || fit_cfg.mode == TrainMode::Meta) {
            return Err(Error::Data(format!("the {split} split is empty")));
        }
    }

    let outcome = fit(&manifest, &fit_cfg)?;
    let primary = fit_cfg.task.primary()?;
    let adversarial = fit_cfg.task.adversarial();
    let mut heads = vec![primary];
    heads.extend(&adversarial);
    let reports = evaluate_split(&manifest, &outcome.state, Split::Test, &heads)?;
    let name = cfg.task.name.clone().unwrap_or_else(|| format!("mtadv-{}", fit_cfg.mode));
    let primary_report = &reports[0].1;
    let run = RunReport {
        model: name.clone(),
        mode: fit_cfg.mode.name().to_string(),
        split: Split::Test,
        roles: role_map(&fit_cfg.task.roles),
        gamma: outcome.state.gamma.clone(),
        primary,
        reports: reports.iter().map(|(a, r)| (*a, r.into())).collect(),
    };
    let table = render_results_table(&[ResultRow {
        model: name,
        roles: fit_cfg.task.roles,
        report: primary_report.clone(),
    }]);

    let ckpt = encode_checkpoint(&outcome.state)?;
    fsutil::write_atomic(&dir.join("model.ckpt"), &ckpt)?;
    fsutil::write_atomic(&dir.join("trace.csv"), trace_csv(&outcome.trace, &adversarial).as_bytes())?;
    fsutil::write_atomic(&dir.join("report.json"), to_json(&run)?.as_bytes())?;
    fsutil::write_atomic(&dir.join("results.md"), table.as_bytes())?;
    for (attr, report) in &reports {
        let csv = confusion_csv(report, &attr.class_names())?;
        fsutil::write_atomic(&dir.join(format!("confusion_{attr}.csv")), csv.as_bytes())?;
    }
    say(out, &table)?;
    for (attr, g) in &outcome.state.gamma {
        say(out, &format!("final gamma_{attr} = {g:.6}\n"))?;
    }
    Ok(())
}

fn run_eval(ctx: &Ctx, a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.manifest.as_ref(), ctx.cfg.paths.manifest.as_ref(), "--manifest", "eval")?;
    let ckpt = required(a.checkpoint.as_ref(), ctx.cfg.paths.checkpoint.as_ref(), "--checkpoint", "eval")?;
    let split: Split = a.split.parse()?;
    let attr: Attribute = a.attribute.parse()?;
    let state = read_checkpoint(ckpt)?;
    let manifest = load_manifest_with_features(path)?;
    let report = evaluate_split(&manifest, &state, split, &[attr])?.remove(0).1;
    let roles = marker_roles(&state, attr);
    let name = a.name.clone().unwrap_or_else(|| "mtadv".into());
    let table = render_results_table(&[ResultRow {
        model: name.clone(),
        roles,
        report: report.clone(),
    }]);
    let csv = confusion_csv(&report, &attr.class_names())?;
    if let Some(dir) = &ctx.out {
        let run = RunReport {
            model: name,
            mode: "eval".into(),
            split,
            roles: role_map(&roles),
            gamma: state.gamma.clone(),
            primary: attr,
            reports: [(attr, (&report).into())].into_iter().collect(),
        };
        fsutil::write_atomic(&dir.join("report.json"), to_json(&run)?.as_bytes())?;
        fsutil::write_atomic(&dir.join(format!("confusion_{attr}.csv")), csv.as_bytes())?;
    }
    say(out, &table)?;
    say(out, &csv)
}

fn run_probe(ctx: &Ctx, a: &ProbeArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.manifest.as_ref(), ctx.cfg.paths.manifest.as_ref(), "--manifest", "probe")?;
    let ckpt = required(a.checkpoint.as_ref(), ctx.cfg.paths.checkpoint.as_ref(), "--checkpoint", "probe")?;
    let attr: Attribute = a.attribute.as_deref().ok_or_else(|| missing("--attribute", "probe"))?.parse()?;
    let split: Split = a.split.parse()?;
    let state = read_checkpoint(ckpt)?;
    let manifest = load_manifest_with_features(path)?;
    let acc = probe(&state, &manifest.split(split)?, attr, ctx.seed)?;
    say(out, &format!("probe accuracy ({attr}, {split}): {acc:.4}\n"))
}

fn run_qwk(a: &QwkArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.table.as_ref(), None, "--table", "analyze qwk")?;
    let table = read_rater_table(path, a.classes)?;
    let k = qwk(&table)?;
    let agree = pairwise_agreement(&table)?;
    say(out, &format!("qwk: {k:.4}\npairwise agreement: {agree:.4}\n"))
}

fn run_tfidf(ctx: &Ctx, a: &TfidfArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.manifest.as_ref(), ctx.cfg.paths.manifest.as_ref(), "--manifest", "analyze tfidf")?;
    let manifest = read_manifest(path)?;
    let samples = match &a.split {
        Some(s) => manifest.split(s.parse()?)?,
        None => manifest.samples.iter().collect(),
    };
    let mut docs = Vec::with_capacity(samples.len());
    for s in samples {
        let text = s
            .transcript
            .as_deref()
            .ok_or_else(|| Error::Data(format!("sample '{}' has no transcript", s.id)))?;
        let class = s.dialect.map_or("unlabelled", |d| d.name());
        docs.push((class.to_string(), whitespace_tokenize(text)));
    }
    let terms = tfidf_top_terms(&docs, a.top)?;
    let csv = tfidf_csv(&terms);
    if let Some(p) = &ctx.out {
        fsutil::write_atomic(p, csv.as_bytes())?;
    }
    let mut table = String::from("| Dialect | Word | TF-IDF |\n|---|---|---|\n");
    for c in &terms {
        for (t, s) in &c.terms {
            table.push_str(&format!("| {} | {} | {:.4} |\n", c.class, t, s));
        }
    }
    say(out, &table)
}

fn run_snr(a: &SnrArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.waveform.as_ref(), None, "--waveform", "analyze snr")?;
    let snr = snr_estimate(&read_waveform(path)?, a.frame_len, a.hop)?;
    say(out, &format!("snr_db: {snr:.4}\n"))
}

fn run_srr(a: &SrrArgs, out: &mut dyn Write) -> Result<()> {
    let d = required(a.direct.as_ref(), None, "--direct", "analyze srr")?;
    let r = required(a.reverberant.as_ref(), None, "--reverberant", "analyze srr")?;
    let srr = srr_components(&read_waveform(d)?, &read_waveform(r)?)?;
    say(out, &format!("srr_db: {srr:.4}\n"))
}

fn run_stats(ctx: &Ctx, a: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    let path = required(a.manifest.as_ref(), ctx.cfg.paths.manifest.as_ref(), "--manifest", "analyze stats")?;
    let manifest = read_manifest(path)?;
    if manifest.is_empty() {
        return Err(Error::Data("manifest is empty".into()));
    }
    say(out, &stats(&manifest).render())?;
    let samples: Vec<_> = manifest.samples.iter().collect();
    if samples.iter().all(|s| s.transcript.is_some()) {
        say(out, "\n")?;
        say(out, &token_stats(&samples, whitespace_tokenize)?.render())?;
    }
    Ok(())
}

fn run_report(ctx: &Ctx, a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let mut rows = Vec::with_capacity(a.runs.len());
    for dir in &a.runs {
        let path = dir.join("report.json");
        let run: RunReport = serde_json::from_str(&fsutil::read_to_string(&path)?)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let m = run
            .reports
            .get(&run.primary)
            .ok_or_else(|| Error::Data(format!("{}: no report for {}", path.display(), run.primary)))?;
        let roles = PerAttribute::from_fn(|attr| run.roles.get(&attr).copied().unwrap_or(Role::Off));
        rows.push(ResultRow {
            model: run.model.clone(),
            roles,
            report: EvalReport {
                num_samples: m.num_samples,
                accuracy: m.accuracy,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                per_class: Vec::new(),
                confusion: m.confusion.clone(),
                zero_support: m.zero_support.clone(),
            },
        });
    }
    let table = render_results_table(&rows);
    if let Some(p) = &ctx.out {
        fsutil::write_atomic(p, table.as_bytes())?;
    }
    say(out, &table)
}

//! The `vadtl` command line.
//!
//! Exit codes: 0 success, 1 some training runs failed, 2 invalid usage or
//! configuration, 3 I/O or file-format failure.

pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, TrainOverrides};

use crate::corpus::surrogate::{generate_noise, surrogate_clean_pool, NoiseKind};
use crate::corpus::{
    draw_adaptation_segment, extract_corpus, load_split, read_clean_pool, synthesize_corpus, AdaptationSegment,
    CorpusManifest, Split, SplitCounts,
};
use crate::error::{Error, Result};
use crate::eval::report::{render_text, render_timings, ResultTable, RunRecord};
use crate::eval::{emit_hinton_svg, similarity_matrix};
use crate::features::{fit_normalizer, FeatureMatrix};
use crate::signal::{read_wav, write_wav, SAMPLE_RATE};
use crate::transfer::{run_task_matrix, Domain, MatrixOptions, MatrixSpec, TransferContext};

pub const OUTPUT_ROOT_ENV: &str = "VADTL_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_TASK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vadtl", version, about = "Denoising deep network VAD with transfer between noise conditions")]
pub struct Cli {
    /// Root that relative output paths are resolved against.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV, default_value = ".")]
    pub output_root: PathBuf,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic noise recording.
    GenNoise(GenNoiseArgs),
    /// Mix clean speech with a noise recording into train/dev/test splits.
    GenCorpus(GenCorpusArgs),
    /// Extract and cache features for a corpus and fit its normalizer.
    Extract(ExtractArgs),
    /// Run a transfer experiment described by a JSON config.
    Run(RunArgs),
    /// Centroid similarity between corpora, as CSV and a Hinton diagram.
    Similarity(SimilarityArgs),
    /// Render a results CSV as a text table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenNoiseArgs {
    /// white, pink, brown, babble, car or band:<hz>
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = SAMPLE_RATE)]
    pub sample_rate: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Noise recording (16-bit mono WAV).
    #[arg(long)]
    pub noise: PathBuf,
    /// Corpus name; defaults to the noise file's stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Directory of clean WAVs; generated surrogates are used when absent.
    #[arg(long)]
    pub clean_dir: Option<PathBuf>,
    /// Seed of the surrogate clean pool. Corpora sharing it share speech.
    #[arg(long, default_value_t = 0)]
    pub clean_seed: u64,
    /// Length of each surrogate utterance in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub utterance_secs: f64,
    #[arg(long, default_value_t = crate::corpus::DEFAULT_SNR_DB, allow_hyphen_values = true)]
    pub snr: f64,
    /// train,dev,test utterance counts.
    #[arg(long, default_value = "30,30,40")]
    pub counts: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corpus directory; defaults to the corpus name.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus directory or manifest.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Splits to extract, comma-separated.
    #[arg(long, default_value = "train,dev,test")]
    pub splits: String,
    /// Splits the corpus normalizer is fit on (noisy and clean frames).
    #[arg(long, default_value = "train")]
    pub fit_scope: String,
    /// Also write CSV copies of every feature file.
    #[arg(long)]
    pub export_csv: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Skip (pair, depth, scheme, seed) cells already in the results CSV.
    #[arg(long)]
    pub resume: bool,
    /// Concurrent training runs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed list, comma-separated.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Overrides the config's scheme list, comma-separated.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Overrides the config's depth list, comma-separated.
    #[arg(long)]
    pub depths: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    /// Corpus directories (at least two).
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<PathBuf>,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Output directory for similarity.csv and similarity.svg.
    #[arg(long, default_value = "similarity")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// text or csv
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Append the pre-training time table.
    #[arg(long)]
    pub timings: bool,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    TaskFailures(usize),
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::TaskFailures(_)) => EXIT_TASK_FAILED,
        Err(e) if e.is_io() => EXIT_IO,
        Err(_) => EXIT_USAGE,
    }
}

fn resolve_out(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn require_input(p: &Path, what: &str) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} {} does not exist", p.display())))
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<T>().map_err(|_| Error::InvalidConfig(format!("bad {what} '{p}'"))))
        .collect()
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::from(e).at(p))
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    if let Some(parent) = p.parent() {
        if !parent.as_os_str().is_empty() {
            mkdir(parent)?;
        }
    }
    std::fs::write(p, text).map_err(|e| Error::from(e).at(p))
}

pub fn cmd_gen_noise(root: &Path, a: &GenNoiseArgs) -> Result<Outcome> {
    let kind: NoiseKind = a.kind.parse()?;
    if !(a.duration > 0.0) {
        return Err(Error::InvalidConfig("duration must be positive".into()));
    }
    let out = resolve_out(root, &a.out);
    if let Some(parent) = out.parent() {
        mkdir(parent)?;
    }
    write_wav(&out, &generate_noise(kind, a.duration, a.sample_rate, a.seed))?;
    println!("{}", out.display());
    Ok(Outcome::Ok)
}

pub fn cmd_gen_corpus(root: &Path, a: &GenCorpusArgs) -> Result<Outcome> {
    require_input(&a.noise, "noise file")?;
    if let Some(d) = &a.clean_dir {
        require_input(d, "clean directory")?;
    }
    let counts: SplitCounts = a.counts.parse()?;
    let noise = read_wav(&a.noise)?;
    let pool = match &a.clean_dir {
        Some(d) => read_clean_pool(d)?,
        None => {
            if !(a.utterance_secs > 0.0) {
                return Err(Error::InvalidConfig("utterance length must be positive".into()));
            }
            surrogate_clean_pool(counts.total(), a.utterance_secs, noise.sample_rate, a.clean_seed)
        }
    };
    let name = a
        .name
        .clone()
        .unwrap_or_else(|| a.noise.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let out = resolve_out(root, a.out.as_deref().unwrap_or(Path::new(&name)));
    mkdir(&out)?;
    let m = synthesize_corpus(&pool, &noise, &name, a.snr, counts, a.seed, &out)?;
    let clipped: usize = m.utterances.iter().map(|u| u.clipped).sum();
    if clipped > 0 {
        log::warn!("{clipped} samples clipped while mixing");
    }
    println!("{}: {} utterances", out.join(crate::corpus::MANIFEST_FILE).display(), m.utterances.len());
    Ok(Outcome::Ok)
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<Outcome> {
    require_input(&a.corpus, "corpus")?;
    let m = CorpusManifest::load(&a.corpus)?;
    let splits: Vec<Split> = parse_list(&a.splits, "split")?;
    let scope: Vec<Split> = parse_list(&a.fit_scope, "split")?;
    let n = extract_corpus(&m, &splits, a.export_csv)?;
    if !scope.is_empty() {
        let parts = scope.iter().map(|&s| load_split(&m, s)).collect::<Result<Vec<_>>>()?;
        let mats: Vec<&FeatureMatrix> = parts.iter().flat_map(|p| [&p.noisy, &p.clean]).collect();
        let label = format!("{} {}", m.noise_type, a.fit_scope);
        let norm = fit_normalizer(&mats, label)?;
        norm.save_csv(m.root.join("normalizer.csv"))?;
    }
    println!("{}: {n} utterances extracted", m.root.display());
    Ok(Outcome::Ok)
}

fn load_domains(cfg: &ExperimentConfig, names: &BTreeSet<String>) -> Result<BTreeMap<String, Domain>> {
    let mut out = BTreeMap::new();
    for name in names {
        let m = CorpusManifest::load(&cfg.corpora[name])?;
        let seg = if cfg.adaptation_seconds > 0.0 {
            draw_adaptation_segment(&m, cfg.adaptation_seconds, cfg.adaptation_seed)?
        } else {
            AdaptationSegment::empty(m.noise_type.clone(), m.sample_rate)
        };
        log::info!(
            "corpus {name}: {} utterances, adaptation segment {:.2} s",
            m.utterances.len(),
            seg.duration_secs()
        );
        let mut d = Domain::from_manifest(&m, &seg)?;
        d.name = name.clone();
        out.insert(name.clone(), d);
    }
    Ok(out)
}

pub fn cmd_run(root: &Path, a: &RunArgs) -> Result<Outcome> {
    require_input(&a.config, "config")?;
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_list(s, "seed")?;
    }
    if let Some(s) = &a.schemes {
        cfg.schemes = parse_list(s, "scheme")?;
    }
    if let Some(s) = &a.depths {
        cfg.depths = parse_list(s, "depth")?;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    let out_dir = resolve_out(root, a.out.as_deref().or(cfg.output_dir.as_deref()).unwrap_or(Path::new("results")));
    mkdir(&out_dir)?;
    let csv_path = out_dir.join("results.csv");

    let existing = if a.resume && csv_path.exists() {
        ResultTable::load_csv(&csv_path)?
    } else {
        ResultTable::new()
    };
    let pairs = cfg.pairs();
    let names: BTreeSet<String> = pairs.iter().flat_map(|(s, t)| [s.clone(), t.clone()]).collect();
    let domains = load_domains(&cfg, &names)?;
    let spec = MatrixSpec {
        pairs,
        schemes: cfg.schemes.clone(),
        depths: cfg.depths.clone(),
        seeds: cfg.seeds.clone(),
        cfg: cfg.train_config(),
        mode: cfg.pretrain_target,
    };
    write_file(&out_dir.join("config.json"), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;

    let live = Mutex::new(existing.clone());
    let write_error: Mutex<Option<Error>> = Mutex::new(None);
    let on_record = |r: &RunRecord| {
        let mut t = live.lock().unwrap();
        t.push(r.clone());
        if let Err(e) = t.to_csv().and_then(|text| write_file(&csv_path, &text)) {
            write_error.lock().unwrap().get_or_insert(e);
        }
    };
    let skip = |c: &crate::transfer::CellId| existing.contains(&c.pair(), c.depth, c.scheme, c.seed);
    let opts = MatrixOptions {
        jobs: cfg.jobs,
        skip: Some(&skip),
        model_dir: cfg.save_models.then(|| out_dir.join("models")),
        on_record: Some(&on_record),
    };
    let outcome = run_task_matrix(&domains, &spec, &opts, &TransferContext::new())?;
    if let Some(e) = write_error.into_inner().unwrap() {
        return Err(e);
    }
    log::info!("{} runs executed, {} skipped", outcome.executed, outcome.skipped);

    let mut table = existing;
    table.extend(outcome.table);
    table.sort();
    write_file(&csv_path, &table.to_csv()?)?;
    let failures = table.failures.len();
    if failures > 0 {
        write_file(&out_dir.join("failures.json"), &table.failures_json()?)?;
    } else if out_dir.join("failures.json").exists() {
        std::fs::remove_file(out_dir.join("failures.json")).map_err(|e| Error::from(e).at(out_dir.join("failures.json")))?;
    }
    if !table.is_empty() {
        let mut text = render_text(&table)?;
        text.push('\n');
        text.push_str(&render_timings(&table)?);
        write_file(&out_dir.join("results.txt"), &text)?;
    }
    println!("{}: {} records, {} runs this invocation", csv_path.display(), table.records.len(), outcome.executed);
    if failures > 0 {
        for f in &table.failures {
            eprintln!("failed: {} depth {} {} seed {}: {}", f.pair, f.depth, f.scheme.heading(), f.seed, f.error);
        }
        return Ok(Outcome::TaskFailures(failures));
    }
    Ok(Outcome::Ok)
}

pub fn cmd_similarity(root: &Path, a: &SimilarityArgs) -> Result<Outcome> {
    if a.corpora.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "similarity needs at least two corpora, got {}",
            a.corpora.len()
        )));
    }
    let split: Split = a.split.parse()?;
    let mut names = Vec::new();
    let mut mats = Vec::new();
    for p in &a.corpora {
        require_input(p, "corpus")?;
        let m = CorpusManifest::load(p)?;
        names.push(m.noise_type.clone());
        mats.push(load_split(&m, split)?.noisy.without_labels());
    }
    let refs: Vec<&FeatureMatrix> = mats.iter().collect();
    let matrix = similarity_matrix(&names, &refs)?;
    let out = resolve_out(root, &a.out);
    mkdir(&out)?;
    write_file(&out.join("similarity.csv"), &matrix.to_csv())?;
    emit_hinton_svg(&matrix, out.join("similarity.svg"))?;
    println!("{}", out.join("similarity.svg").display());
    Ok(Outcome::Ok)
}

pub fn cmd_report(root: &Path, a: &ReportArgs) -> Result<Outcome> {
    require_input(&a.results, "results file")?;
    let table = ResultTable::load_csv(&a.results)?;
    let mut text = match a.format.parse()? {
        crate::eval::ReportFormat::Text => render_text(&table)?,
        crate::eval::ReportFormat::Csv => table.to_csv()?,
    };
    if a.timings {
        text.push('\n');
        text.push_str(&render_timings(&table)?);
    }
    match &a.out {
        Some(p) => write_file(&resolve_out(root, p), &text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::Ok)
}

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let root = cli.output_root.as_path();
    match &cli.command {
        Command::GenNoise(a) => cmd_gen_noise(root, a),
        Command::GenCorpus(a) => cmd_gen_corpus(root, a),
        Command::Extract(a) => cmd_extract(a),
        Command::Run(a) => cmd_run(root, a),
        Command::Similarity(a) => cmd_similarity(root, a),
        Command::Report(a) => cmd_report(root, a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = dispatch(&cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}

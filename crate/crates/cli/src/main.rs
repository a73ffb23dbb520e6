use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use langsup_core::captionops::{
    filter_dataset, paraphrase_dataset, remote_paraphrase, train_filter, FilterConfig, HttpEndpoint, NGramFilterModel,
    ParaphraseRequest, TOKEN_ENV, URL_ENV,
};
use langsup_core::evalkit::{build_suite, evaluate, ProbeConfig};
use langsup_core::experiment::{emit_report, load_rows, run_plan, ExperimentPlan, ReportFormat, RunOptions};
use langsup_core::rng::derive_seed;
use langsup_core::synthworld::{
    build_dataset, load_dataset, save_dataset, CaptionKnobs, DatasetSpec, Example, ObjectUniverse, UniverseConfig,
    Vocabulary,
};
use langsup_core::trainer::{default_config, desk_config, load_checkpoint, save_checkpoint, train};
use langsup_core::{ContrastiveMode, EncoderConfig};

#[derive(Parser)]
#[command(name = "langsup", version, about = "Image-only vs image-language contrastive pre-training experiments")]
struct Cli {
    /// Root seed for everything the command draws; plans keep their own
    /// seeds unless this is given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel experiment cells.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Where outputs go when no explicit path is given.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// World definition (TOML); the built-in world when absent.
    #[arg(long, global = true)]
    universe: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic dataset file.
    Gen(GenArgs),
    /// Pre-train an encoder stack on a dataset file.
    Train(TrainArgs),
    /// Linear-probe a checkpoint on the transfer suite.
    Probe(ProbeArgs),
    /// Caption quality filter.
    #[command(subcommand)]
    Filter(FilterCommand),
    /// Add paraphrased captions to a dataset.
    Paraphrase(ParaphraseArgs),
    /// Experiment plans.
    #[command(subcommand)]
    Plan(PlanCommand),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    captions_per_image: usize,
    #[arg(long, default_value_t = 1.0)]
    descriptiveness: f64,
    #[arg(long)]
    inconsistent: bool,
    #[arg(long)]
    incomplete: bool,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// simclr, clip or clip_s(K).
    #[arg(long, default_value = "clip")]
    mode: String,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeOutput {
    Table,
    Records,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long, value_enum, default_value = "table")]
    format: ProbeOutput,
}

#[derive(Subcommand)]
enum FilterCommand {
    /// Fit a filter on descriptive (positive) vs noisy (negative) captions.
    Fit {
        #[arg(long)]
        positive: PathBuf,
        #[arg(long)]
        negative: PathBuf,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Keep the examples whose first caption passes the filter.
    Apply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParaphraseArgs {
    #[arg(long)]
    data: PathBuf,
    /// Captions per image afterwards, the original included.
    #[arg(short, default_value_t = 5)]
    k: usize,
    /// Completion endpoint; paraphrases locally from the world's grammar when unset.
    #[arg(long, env = URL_ENV)]
    endpoint: Option<String>,
    #[arg(long, env = TOKEN_ENV, hide_env_values = true)]
    token: Option<String>,
    #[arg(long, default_value_t = 0.8)]
    temperature: f64,
    #[arg(long, default_value_t = 60)]
    timeout_s: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Records,
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Run (or resume) a plan file.
    Run {
        plan: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Report the finished cells of a plan directory.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
            Format::Records => ReportFormat::Records,
        }
    }
}

fn universe(path: Option<&Path>) -> Result<ObjectUniverse> {
    let cfg = match path {
        Some(p) => toml::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => UniverseConfig::default(),
    };
    Ok(ObjectUniverse::generate(cfg)?)
}

fn output(explicit: Option<PathBuf>, out_dir: &Path, name: &str) -> Result<PathBuf> {
    let p = explicit.unwrap_or_else(|| out_dir.join(name));
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(p)
}

fn load_data(path: &Path, u: &ObjectUniverse) -> Result<Vec<Example>> {
    let (header, ds) = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    if header.universe_hash != u.content_hash() {
        bail!("{} was generated from a different world", path.display());
    }
    Ok(ds)
}

fn save_data(path: &Path, u: &ObjectUniverse, ds: &[Example]) -> Result<()> {
    save_dataset(path, None, &u.content_hash(), ds).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let out_dir = cli.out_dir.as_path();
    let seed = cli.seed.unwrap_or(0);

    match cli.command {
        Command::Gen(a) => {
            let u = universe(cli.universe.as_deref())?;
            let knobs = CaptionKnobs {
                descriptiveness: a.descriptiveness,
                ..CaptionKnobs::variability(!a.inconsistent, !a.incomplete)
            };
            let mut spec = DatasetSpec::new(a.n, a.captions_per_image, knobs, seed);
            spec.image_noise_sigma = a.sigma;
            let ds = build_dataset(&spec, &u)?;
            let path = output(a.output, out_dir, "dataset.jsonl")?;
            save_dataset(&path, Some(&spec), &u.content_hash(), &ds)?;
            println!("wrote {} examples to {}", ds.len(), path.display());
        }
        Command::Train(a) => {
            let u = universe(cli.universe.as_deref())?;
            let ds = load_data(&a.data, &u)?;
            let mode: ContrastiveMode = a.mode.parse()?;
            let mut cfg = match a.preset {
                Preset::Desk => desk_config(mode),
                Preset::Paper => default_config(mode),
            }
            .with_seed(seed);
            if let Some(e) = a.epochs {
                cfg = cfg.with_epochs(e);
            }
            cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
            cfg.lr = a.lr.unwrap_or(cfg.lr);
            cfg.weight_decay = a.weight_decay.unwrap_or(cfg.weight_decay);
            cfg.temperature = a.temperature.unwrap_or(cfg.temperature);
            let vocab = Vocabulary::new(&u);
            let arch = EncoderConfig::desk(u.embed_dim(), vocab.len());
            let model = train(&ds, &cfg, &arch, &vocab)?;
            let path = output(a.output, out_dir, &format!("{}.ckpt", mode.to_string().replace(['(', ')'], "")))?;
            save_checkpoint(&path, &model)?;
            println!(
                "{mode}: final loss {:.4}, checkpoint {}",
                model.loss_curve.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Command::Probe(a) => {
            let u = universe(cli.universe.as_deref())?;
            let model = load_checkpoint(&a.checkpoint, None)?;
            let suite = build_suite(&u)?;
            let cfg = match a.preset {
                Preset::Desk => ProbeConfig::desk(),
                Preset::Paper => ProbeConfig::default(),
            };
            let report = evaluate(&model, &suite, &cfg, seed)?;
            match a.format {
                ProbeOutput::Table => print!("{}", report.to_table()),
                ProbeOutput::Records => print!("{}", report.to_records()?),
            }
        }
        Command::Filter(FilterCommand::Fit { positive, negative, epochs, output: out }) => {
            let u = universe(cli.universe.as_deref())?;
            let first = |p: &Path| -> Result<Vec<Vec<String>>> {
                Ok(load_data(p, &u)?
                    .into_iter()
                    .filter_map(|mut e| (!e.captions.is_empty()).then(|| e.captions.swap_remove(0)))
                    .collect())
            };
            let cfg = FilterConfig { epochs, seed, ..FilterConfig::default() };
            let fit = train_filter(&first(&positive)?, &first(&negative)?, &cfg)?;
            let path = output(out, out_dir, "filter.bin")?;
            fit.model.save(&path)?;
            println!(
                "held-out accuracy {:.3} ({} held out), model {}",
                fit.heldout_accuracy,
                fit.heldout_size,
                path.display()
            );
        }
        Command::Filter(FilterCommand::Apply { model, data, output: out }) => {
            let u = universe(cli.universe.as_deref())?;
            let m = NGramFilterModel::load(&model)?;
            let ds = load_data(&data, &u)?;
            let kept = filter_dataset(&m, &ds);
            let path = output(out, out_dir, "filtered.jsonl")?;
            save_data(&path, &u, &kept)?;
            println!("kept {} of {} examples, wrote {}", kept.len(), ds.len(), path.display());
        }
        Command::Paraphrase(a) => {
            if a.k == 0 {
                bail!("k must be >= 1");
            }
            let u = universe(cli.universe.as_deref())?;
            let ds = load_data(&a.data, &u)?;
            let out = match &a.endpoint {
                None => paraphrase_dataset(&ds, &u, a.k, derive_seed(seed, "cli/paraphrase", 0))?,
                Some(url) => {
                    let endpoint = HttpEndpoint::new(
                        url.clone(),
                        a.token.clone(),
                        Duration::from_secs(a.timeout_s),
                        cli.workers.max(1),
                    );
                    remote_dataset(&ds, a.k, a.temperature, &endpoint)?
                }
            };
            let path = output(a.output, out_dir, "paraphrased.jsonl")?;
            save_data(&path, &u, &out)?;
            println!("wrote {} examples with {} captions each to {}", out.len(), a.k, path.display());
        }
        Command::Plan(PlanCommand::Run { plan, format }) => {
            let mut plan = ExperimentPlan::load(&plan)?;
            if let Some(s) = cli.seed {
                plan = plan.with_seed(s);
            }
            let run = run_plan(&plan, &RunOptions { workers: cli.workers, out_dir: out_dir.to_path_buf() })?;
            eprintln!(
                "{} cells trained, {} from the ledger, results in {}",
                run.executed,
                run.rows.len() - run.executed,
                run.dir.display()
            );
            print!("{}", emit_report(&run.rows, format.into())?);
        }
        Command::Plan(PlanCommand::Report { dir, format, output: out }) => {
            let rows = load_rows(&dir)?;
            let text = emit_report(&rows, format.into())?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

/// Original caption plus `k - 1` remote completions per example. Captions
/// travel as space-joined tokens.
fn remote_dataset(ds: &[Example], k: usize, temperature: f64, endpoint: &HttpEndpoint) -> Result<Vec<Example>> {
    let mut out = Vec::with_capacity(ds.len());
    for (i, ex) in ds.iter().enumerate() {
        let original = ex.captions.first().with_context(|| format!("example {i} has no caption"))?;
        let mut captions = vec![original.clone()];
        if k > 1 {
            let req = ParaphraseRequest::new(original.join(" "), k - 1, temperature, vec!["\n".into()]);
            let got = remote_paraphrase(&req, endpoint).with_context(|| format!("paraphrasing example {i}"))?;
            captions.extend(got.iter().map(|c| c.split_whitespace().map(str::to_owned).collect::<Vec<_>>()));
            // pad short answers with the original
            captions.resize(k, original.clone());
        }
        out.push(Example { captions, ..ex.clone() });
    }
    Ok(out)
}

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand};
use popbias::ingest::{self, RatingColumns};
use popbias::pipeline::{self, PipelineError, KEYS};
use popbias::synth::{self, SynthConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

static CONFIG_KEYS_HELP: LazyLock<String> = LazyLock::new(|| {
    let width = KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut help = String::from("Config keys (file `key = value`, or --set key=value):\n");
    for (key, default, about) in KEYS {
        let default = if default.is_empty() { "none" } else { default };
        help.push_str(&format!("  {key:<width$}  {about} [default: {default}]\n"));
    }
    help.push_str("\nPrecedence: flags and --set over AUDIT_OUTPUT_DIR over the config file.\n");
    help.push_str("Exit codes: 0 success, 2 config error, 3 input error, 4 runtime error.");
    help
});

#[derive(Parser)]
#[command(
    name = "audit",
    version,
    about = "Popularity-bias audit for collaborative-filtering recommenders"
)]
struct Cli {
    /// Log progress to stderr (RUST_LOG takes precedence).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full audit and write reports, per-user metrics and a manifest.
    #[command(after_help = CONFIG_KEYS_HELP.as_str())]
    Run(RunArgs),
    /// Print dataset statistics as CSV.
    Stats(StatsArgs),
    /// Write a synthetic dataset in the canonical ratings/genre format.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<String>,
    #[arg(long)]
    genres: Option<String>,
    /// userknn, nmf or both.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    factors: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, env = "AUDIT_OUTPUT_DIR")]
    output_dir: Option<String>,
    /// Any config key, e.g. `--set synth_users=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut pairs = Vec::new();
        let flags = [
            ("ratings", &self.ratings),
            ("genres", &self.genres),
            ("algorithm", &self.algorithm),
            ("k", &self.k),
            ("factors", &self.factors),
            ("iterations", &self.iterations),
            ("n", &self.n),
            ("test_fraction", &self.test_fraction),
            ("alpha", &self.alpha),
            ("seed", &self.seed),
            ("output_dir", &self.output_dir),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                pairs.push((key.to_owned(), value.clone()));
            }
        }
        for raw in &self.set {
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got '{raw}'"))?;
            pairs.push((key.trim().to_owned(), value.to_owned()));
        }
        Ok(pairs)
    }
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long, default_value_t = 0)]
    user_column: usize,
    #[arg(long, default_value_t = 1)]
    item_column: usize,
    #[arg(long, default_value_t = 2)]
    value_column: usize,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    genres: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    range_min: f64,
    #[arg(long, default_value_t = 5.0)]
    range_max: f64,
    #[command(flatten)]
    columns: ColumnArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving ratings.tsv and genres.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Start from the desk-scale preset instead of the plain defaults.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    genres: Option<usize>,
    #[arg(long)]
    zipf_exponent: Option<f64>,
    #[arg(long)]
    mean_profile_size: Option<usize>,
    #[arg(long)]
    range_min: Option<f64>,
    #[arg(long)]
    range_max: Option<f64>,
    #[arg(long)]
    affinity_min: Option<f64>,
    #[arg(long)]
    affinity_max: Option<f64>,
    #[arg(long)]
    quality_weight: Option<f64>,
    #[arg(long)]
    rating_noise: Option<f64>,
    #[arg(long)]
    genre_skew: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let mut c = if self.desk_scale {
            SynthConfig::desk_scale()
        } else {
            SynthConfig::default()
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        apply!(
            users,
            items,
            genres,
            zipf_exponent,
            mean_profile_size,
            range_min,
            range_max,
            affinity_min,
            affinity_max,
            quality_weight,
            rating_noise,
            genre_skew,
            seed
        );
        c
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Stats(args) => stats(args),
        Command::Synth(args) => synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            Failure::new(
                EXIT_CONFIG,
                format!("cannot read config {}: {e}", path.display()),
            )
        })?,
        None => String::new(),
    };
    let overrides = args.overrides().map_err(|m| Failure::new(EXIT_CONFIG, m))?;
    let config =
        pipeline::validate_config(&text, &overrides).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let summary = pipeline::run_audit(&config).map_err(|e: PipelineError| {
        let code = u8::try_from(e.exit_code()).unwrap_or(EXIT_RUNTIME);
        Failure::new(code, e)
    })?;

    let reports: Vec<_> = summary.results.iter().map(|r| r.report.clone()).collect();
    print!("{}", popbias::stats::render_markdown(&reports));
    println!();
    for r in &summary.results {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
        println!(
            "{}: popularity vs. recommendation frequency: Spearman {}, Pearson {}",
            r.algorithm.label(),
            fmt(r.correlation.spearman),
            fmt(r.correlation.pearson)
        );
    }
    println!("outputs in {}", summary.output_dir.display());
    Ok(())
}

fn stats(args: &StatsArgs) -> Result<(), Failure> {
    if !(args.range_min < args.range_max) {
        return Err(Failure::new(
            EXIT_CONFIG,
            "range-min must be below range-max",
        ));
    }
    let columns = RatingColumns {
        user: args.columns.user_column,
        item: args.columns.item_column,
        value: args.columns.value_column,
    };
    let loaded = ingest::load_dataset::<f64>(
        &args.ratings,
        args.genres.as_deref(),
        (args.range_min, args.range_max),
        columns,
    )
    .map_err(|e| Failure::new(EXIT_INPUT, e))?;
    let statistics =
        ingest::compute_statistics(&loaded.dataset).map_err(|e| Failure::new(EXIT_INPUT, e))?;
    let csv = pipeline::statistics_csv(&statistics);
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let config = args.config();
    config
        .validate()
        .map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let dataset = synth::generate(&config).map_err(|e| Failure::new(EXIT_RUNTIME, e))?;
    let out: &Path = &args.out;
    std::fs::create_dir_all(out).map_err(|e| {
        Failure::new(
            EXIT_RUNTIME,
            format!("cannot create {}: {e}", out.display()),
        )
    })?;
    ingest::write_dataset(&dataset, &out.join("ratings.tsv"), &out.join("genres.tsv"))
        .map_err(|e| Failure::new(EXIT_RUNTIME, e))?;
    println!(
        "wrote {} ratings by {} users on {} items to {}",
        dataset.ratings().len(),
        dataset.num_users(),
        dataset.num_items(),
        out.display()
    );
    Ok(())
}

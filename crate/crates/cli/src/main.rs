//! `gs-audit`: ingest rating corpora, measure stereotype prevalence, run the
//! gender-inference attack and fit the survey regression.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use gsaudit::{ClassifierKind, DegreeMode};

/// Exit status for each failure class.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input, bad flags or config.
    Input(String),
    /// A solver stopped at its iteration cap under `--strict`.
    NonConvergence(String),
    /// Rank deficiency, separation or a diverging survey fit.
    Degenerate(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NonConvergence(m) | CliError::Degenerate(m) => m,
        }
    }
}

pub fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "gs-audit", version, about = "Gender-stereotype audit for movie-rating corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InputFormat {
    Ml1m,
    Interchange,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Cardinality,
    ItemCount,
}

impl From<ModeArg> for DegreeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cardinality => DegreeMode::Cardinality,
            ModeArg::ItemCount => DegreeMode::ItemCount,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a raw corpus, apply genre aliases and overrides, write it in
    /// interchange form with an ingest report.
    Ingest {
        #[arg(long, value_enum)]
        format: InputFormat,
        #[arg(long)]
        root: PathBuf,
        /// `raw,canonical` alias lines added to the built-in table.
        #[arg(long)]
        genre_map: Option<PathBuf>,
        /// `movie_id,Genre1|Genre2` per-movie replacements.
        #[arg(long = "override")]
        override_file: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Share of users whose ratings lean toward their own gender's genres.
    Prevalence {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON file with `male_genres` and `female_genres`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cardinality")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Infer user gender from ratings, optionally with stereotype degrees.
    #[command(group(ArgGroup::new("features").required(true).args(["with_gs", "no_gs"])))]
    Attack {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        classifier: ClassifierKind,
        #[arg(long)]
        with_gs: bool,
        #[arg(long)]
        no_gs: bool,
        /// `holdout:<test fraction>` or `cv:<k>`.
        #[arg(long, default_value = "holdout:0.2")]
        harness: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON array of classifier configs.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Exit 3 when any fit stops at its iteration cap.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Logistic regression of gender on genre preferences, both orientations.
    SurveyFit {
        #[arg(long)]
        input: PathBuf,
        /// JSON report path; coefficient tables go next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GS_AUDIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("GS_AUDIT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(input_err)
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Ingest { format, root, genre_map, override_file, out } => {
            commands::ingest(argv, format, &root, genre_map.as_deref(), override_file.as_deref(), &out)
        }
        Command::Prevalence { corpus, model, mode, out } => {
            commands::prevalence(argv, &corpus, model.as_deref(), mode.into(), &out)
        }
        Command::Attack { corpus, classifier, with_gs, no_gs: _, harness, seed, grid, strict, out } => {
            commands::attack(commands::AttackArgs {
                argv,
                corpus,
                classifier,
                with_gs,
                harness,
                seed,
                grid,
                strict,
                out,
            })
        }
        Command::SurveyFit { input, out } => commands::survey_fit(argv, &input, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gs-audit: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

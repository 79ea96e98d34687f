//! One function per subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use gsaudit::classifiers::default_grid;
use gsaudit::corpus::{
    corpus_stats, load_interchange_with, load_ml1m_with, sha256_hex, IngestOptions,
};
use gsaudit::eval::{run_cv, run_holdout};
use gsaudit::report::{AttackResult, SurveySection};
use gsaudit::stereotype::prevalence as measure_prevalence;
use gsaudit::surveystats::{fit_survey, read_survey_csv, write_summary_csv};
use gsaudit::{
    AuditReport, ClassifierKind, DegreeMode, FitConfig, Gender, GenreVocabulary,
    Harness, RatingCorpus, RunManifest, StereotypeModel, SurveyError,
};
use log::info;
use serde_json::json;

use crate::output::{self, write_report};
use crate::{input_err, CliError, InputFormat};

/// Dataset-specific genres written by the exporter.
const GENRE_FILE: &str = "genres.map";
const INGEST_REPORT: &str = "ingest-report.json";

fn vocabulary_for(format: InputFormat, genre_map: Option<&Path>) -> Result<GenreVocabulary, CliError> {
    let mut vocab = match format {
        InputFormat::Ml1m => GenreVocabulary::movielens(),
        InputFormat::Interchange => GenreVocabulary::yahoo(),
    };
    if let Some(path) = genre_map {
        vocab.extend_from_file(path).map_err(input_err)?;
    }
    Ok(vocab)
}

/// Loads a raw ML-1M directory (has `users.dat`) or an interchange directory.
pub fn load_corpus(dir: &Path) -> Result<RatingCorpus, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!("corpus directory {} not found", dir.display())));
    }
    let options = IngestOptions::default();
    let loaded = if dir.join("users.dat").exists() {
        load_ml1m_with(dir, GenreVocabulary::movielens(), &options)
    } else {
        let mut vocab = GenreVocabulary::canonical();
        let extra = dir.join(GENRE_FILE);
        if extra.exists() {
            vocab.extend_from_file(&extra).map_err(input_err)?;
        }
        load_interchange_with(dir, vocab, &options)
    };
    loaded.map(|(c, _)| c).map_err(input_err)
}

fn manifest_for(argv: Vec<String>, corpus: &RatingCorpus) -> RunManifest {
    RunManifest::new(argv).with_provenance(corpus.provenance())
}

pub fn ingest(
    argv: Vec<String>,
    format: InputFormat,
    root: &Path,
    genre_map: Option<&Path>,
    override_file: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let vocab = vocabulary_for(format, genre_map)?;
    let mut options = IngestOptions::default();
    if let Some(path) = override_file {
        options = options.with_override_file(path).map_err(input_err)?;
    }
    let (corpus, ingest) = match format {
        InputFormat::Ml1m => load_ml1m_with(root, vocab, &options),
        InputFormat::Interchange => load_interchange_with(root, vocab, &options),
    }
    .map_err(input_err)?;

    let stats = corpus_stats(&corpus);
    let mut manifest = manifest_for(argv, &corpus);
    let mut hashes = manifest.dataset_hashes.clone();
    for (flag, path) in [("genre_map", genre_map), ("override", override_file)] {
        if let Some(p) = path {
            let bytes = fs::read(p).map_err(input_err)?;
            hashes.insert(flag.to_owned(), sha256_hex(&bytes));
        }
    }
    manifest.dataset_hashes = hashes;
    manifest.config = json!({
        "command": "ingest",
        "format": format!("{format:?}").to_lowercase(),
    });
    let mut report = AuditReport::new(manifest);
    report.corpus_stats = Some(stats.clone());
    report.ingest = Some(ingest);
    let report = report.finish();

    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    let staging = tempfile::Builder::new()
        .prefix(".gs-audit-")
        .tempdir_in(out)
        .map_err(input_err)?;
    corpus.export(staging.path()).map_err(input_err)?;
    fs::write(staging.path().join(INGEST_REPORT), report.to_json()).map_err(input_err)?;
    output::move_files(staging.path(), out)?;

    output::print_corpus_stats(&stats);
    if let Some(ing) = &report.ingest {
        for (raw, a) in &ing.alias_applications {
            println!("alias {raw} -> {}: {}", a.target, a.count);
        }
        println!(
            "dropped movies {}, dropped ratings {}, duplicate ratings {}, overrides {}",
            ing.dropped_movies.len(),
            ing.dropped_ratings,
            ing.duplicate_ratings,
            ing.overrides_applied
        );
    }
    Ok(())
}

fn stereotype_model(path: Option<&Path>, corpus: &RatingCorpus) -> Result<StereotypeModel, CliError> {
    let model = match path {
        Some(p) => StereotypeModel::from_json_file(p).map_err(input_err)?,
        None => StereotypeModel::default_model(),
    };
    model.resolve_against(corpus.vocabulary()).map_err(input_err)
}

pub fn prevalence(
    argv: Vec<String>,
    corpus_dir: &Path,
    model_path: Option<&Path>,
    mode: DegreeMode,
    out: &Path,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus_dir)?;
    let model = stereotype_model(model_path, &corpus)?;
    let prev = measure_prevalence(&corpus, &model, mode).map_err(input_err)?;

    let mut manifest = manifest_for(argv, &corpus);
    manifest.stereotype_model = Some(model);
    manifest.config = json!({ "command": "prevalence", "degree_mode": mode });
    let mut report = AuditReport::new(manifest);
    report.corpus_stats = Some(corpus_stats(&corpus));
    report.prevalence = Some(prev.clone());
    write_report(&report.finish(), out)?;

    println!("users       {:>8}", prev.total_users);
    println!("aligned     {:>8}  ({:.2}%)", prev.total_users - prev.misaligned_count, prev.aligned_percent);
    println!("misaligned  {:>8}  ({:.2}%)", prev.misaligned_count, prev.misaligned_percent);
    println!("ties        {:>8}  (counted aligned)", prev.tie_count);
    Ok(())
}

pub struct AttackArgs {
    pub argv: Vec<String>,
    pub corpus: PathBuf,
    pub classifier: ClassifierKind,
    pub with_gs: bool,
    pub harness: String,
    pub seed: u64,
    pub grid: Option<PathBuf>,
    pub strict: bool,
    pub out: PathBuf,
}

fn read_grid(path: &Path) -> Result<Vec<FitConfig>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read grid {}: {e}", path.display())))?;
    let grid: Vec<FitConfig> = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("grid {}: {e}", path.display())))?;
    if grid.is_empty() {
        return Err(CliError::Input(format!("grid {} is empty", path.display())));
    }
    for c in &grid {
        c.validate().map_err(|e| CliError::Input(format!("grid {}: {e}", path.display())))?;
    }
    Ok(grid)
}

pub fn attack(a: AttackArgs) -> Result<(), CliError> {
    let harness: Harness = a.harness.parse().map_err(input_err)?;
    let grid = a.grid.as_deref().map(read_grid).transpose()?;
    let corpus = load_corpus(&a.corpus)?;
    let model = if a.with_gs {
        Some(stereotype_model(None, &corpus)?)
    } else {
        None
    };
    let mode = DegreeMode::Cardinality;
    let base = FitConfig::for_kind(a.classifier).with_seed(a.seed);
    let harness_tag = harness.to_string();
    info!("{} {} on {} users", a.classifier, harness_tag, corpus.users().len());

    let mut manifest = manifest_for(a.argv, &corpus);
    manifest.seed = Some(a.seed);
    manifest.stereotype_model = model.clone();

    let (result, column) = match harness {
        Harness::Holdout { test_fraction } => {
            let config = match grid {
                Some(g) if g.len() == 1 => g.into_iter().next().expect("one entry"),
                Some(g) => {
                    return Err(CliError::Input(format!(
                        "holdout takes a single config; the grid lists {}",
                        g.len()
                    )))
                }
                None => base,
            };
            manifest.config = json!({
                "command": "attack",
                "classifier": a.classifier,
                "with_gs": a.with_gs,
                "harness": harness,
                "degree_mode": mode,
                "fit": config,
            });
            let r = run_holdout(&corpus, model.as_ref(), mode, a.classifier, &config, test_fraction, a.seed)
                .map_err(input_err)?;
            (AttackResult::holdout(a.with_gs, harness_tag, r), gs_column(a.classifier, a.with_gs))
        }
        Harness::Cv { k } => {
            let grid = grid.unwrap_or_else(|| default_grid(a.classifier, &base));
            manifest.config = json!({
                "command": "attack",
                "classifier": a.classifier,
                "with_gs": a.with_gs,
                "harness": harness,
                "degree_mode": mode,
                "grid": grid,
            });
            let r = run_cv(&corpus, model.as_ref(), mode, a.classifier, &grid, k, a.seed)
                .map_err(input_err)?;
            (AttackResult::cv(a.with_gs, harness_tag, r), gs_column(a.classifier, a.with_gs))
        }
    };

    let converged = result.converged;
    let mut report = AuditReport::new(manifest);
    report.corpus_stats = Some(corpus_stats(&corpus));
    report.attacks.push(result);
    let report = report.finish();
    write_report(&report, &a.out)?;

    match &report.attacks[0].outcome {
        gsaudit::report::AttackOutcome::Holdout(h) => output::print_holdout(&column, &h.metrics),
        gsaudit::report::AttackOutcome::Cv(c) => output::print_cv(&column, &c.mean, &c.std),
    }
    if !converged {
        let msg = format!("{} stopped at its iteration cap", a.classifier.display_name());
        if a.strict {
            return Err(CliError::NonConvergence(msg));
        }
        log::warn!("{msg}");
    }
    Ok(())
}

fn gs_column(kind: ClassifierKind, with_gs: bool) -> String {
    format!("{} ({})", kind.display_name(), if with_gs { "GS" } else { "no GS" })
}

fn survey_error(e: SurveyError) -> CliError {
    match e {
        SurveyError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
        e if e.is_degenerate() => CliError::Degenerate(e.to_string()),
        e => CliError::Input(e.to_string()),
    }
}

/// `<stem>.<suffix>` beside `out`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "survey".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

pub fn survey_fit(argv: Vec<String>, input: &Path, out: &Path) -> Result<(), CliError> {
    let records = read_survey_csv(input).map_err(survey_error)?;
    let male = fit_survey(&records, Gender::Male).map_err(survey_error)?;
    let female = fit_survey(&records, Gender::Female).map_err(survey_error)?;

    let bytes = fs::read(input).map_err(input_err)?;
    let mut manifest = RunManifest::new(argv);
    let name = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    manifest.dataset_hashes.insert(name, sha256_hex(&bytes));
    manifest.config = json!({ "command": "survey-fit", "positive_classes": ["male", "female"] });
    let mut report = AuditReport::new(manifest);
    report.survey = Some(SurveySection {
        respondents: records.len(),
        male_positive: male.clone(),
        female_positive: female.clone(),
    });

    for (suffix, summary) in [("male_positive.csv", &male), ("female_positive.csv", &female)] {
        output::write_via_temp(&sibling(out, suffix), |tmp| {
            write_summary_csv(summary, tmp).map_err(survey_error)
        })?;
    }
    write_report(&report.finish(), out)?;

    output::print_survey("Male = 1", &male);
    println!();
    output::print_survey("Female = 1", &female);
    Ok(())
}

//! Atomic file output and the plain-text tables printed to stdout.

use std::fs;
use std::io::Write;
use std::path::Path;

use gsaudit::eval::MetricSummary;
use gsaudit::{AuditReport, CorpusStats, MetricSet};
use gsaudit::surveystats::FitSummary;

use crate::{input_err, CliError};

/// Runs `fill` on a temp file beside `path`, then renames it into place.
pub fn write_via_temp<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&Path) -> Result<(), CliError>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = tempfile::Builder::new()
        .prefix(".gs-audit-")
        .tempfile_in(dir)
        .map_err(|e| CliError::Input(format!("cannot write in {}: {e}", dir.display())))?;
    fill(tmp.path())?;
    tmp.persist(path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_via_temp(path, |tmp| {
        let mut f = fs::File::create(tmp).map_err(input_err)?;
        f.write_all(bytes).map_err(input_err)?;
        f.sync_all().map_err(input_err)
    })
}

/// Moves every file of `from` into `to`, one rename each.
pub fn move_files(from: &Path, to: &Path) -> Result<(), CliError> {
    for entry in fs::read_dir(from).map_err(input_err)? {
        let entry = entry.map_err(input_err)?;
        let target = to.join(entry.file_name());
        fs::rename(entry.path(), &target)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", target.display())))?;
    }
    Ok(())
}

pub fn write_report(report: &AuditReport, path: &Path) -> Result<(), CliError> {
    write_atomic(path, report.to_json().as_bytes())
}

pub fn print_corpus_stats(s: &CorpusStats) {
    println!("{:<16}{:>12}", "users", s.users);
    println!("{:<16}{:>12}  ({:.2}%)", "male", s.male, s.male_percent);
    println!("{:<16}{:>12}  ({:.2}%)", "female", s.female, s.female_percent);
    println!("{:<16}{:>12}", "movies", s.movies);
    println!("{:<16}{:>12}", "max movie id", s.max_movie_id);
    println!("{:<16}{:>12}", "ratings", s.ratings);
    println!("{:<16}{:>12}", "genres", s.genres);
    println!("{:<16}{:>11.2}%", "density", s.density_percent);
}

const METRIC_LABELS: [&str; 7] = [
    "Accuracy",
    "Accuracy (male)",
    "Accuracy (female)",
    "Precision",
    "Recall",
    "F-measure",
    "AUC",
];

pub fn print_holdout(column: &str, m: &MetricSet) {
    println!("{:<20}{:>16}", "Metric", column);
    for (label, v) in METRIC_LABELS.iter().zip(m.values()) {
        println!("{label:<20}{:>16.2}", 100.0 * v);
    }
    let c = &m.confusion;
    println!("confusion: tp={} fp={} tn={} fn={}", c.tp, c.fp, c.tn, c.fn_);
    if !m.undefined.is_empty() {
        println!("undefined (reported as 0): {}", m.undefined.join(", "));
    }
}

pub fn print_cv(column: &str, mean: &MetricSummary, std: &MetricSummary) {
    println!("{:<20}{:>20}", "Metric", column);
    for ((label, m), s) in METRIC_LABELS.iter().zip(mean.values()).zip(std.values()) {
        println!("{label:<20}{:>12.2} ± {:>5.2}", 100.0 * m, 100.0 * s);
    }
}

pub fn print_survey(title: &str, s: &FitSummary) {
    println!("{title}");
    println!(
        "{:<24}{:>9}{:>9}{:>10}{:>21}{:>9}",
        "term", "b", "SE", "odds", "95% CI", "p"
    );
    for r in &s.rows {
        println!(
            "{:<24}{:>9.3}{:>9.3}{:>10.3}{:>10.3} .. {:<7.3}{:>9.4}",
            r.term, r.coefficient, r.std_error, r.odds_ratio, r.ci_lower, r.ci_upper, r.p_value
        );
    }
    if let Some(g) = &s.gof {
        let p = |v: Option<f64>| v.map_or("n/a".to_owned(), |p| format!("{p:.4}"));
        println!(
            "goodness of fit: deviance {:.3} (p {}), Pearson {:.3} (p {}), df {}",
            g.deviance,
            p(g.deviance_p),
            g.pearson,
            p(g.pearson_p),
            g.df
        );
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsaudit::corpus::synthetic::{generate, SyntheticCorpusConfig};
use gsaudit::report::REPORT_JSON_SCHEMA;
use gsaudit::surveystats::{generate_survey, write_survey_csv, SyntheticSurveyConfig};
use gsaudit::AuditReport;
use serde_json::Value;
use tempfile::TempDir;

fn gs_audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gs-audit"))
        .args(args)
        .env("GS_AUDIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_report(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(REPORT_JSON_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
    v
}

fn small_corpus(dir: &Path) -> PathBuf {
    let root = dir.join("corpus");
    generate(&SyntheticCorpusConfig::small(7)).export(&root).unwrap();
    root
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Yahoo-style raw corpus: aliased, removed and unresolved genres.
fn yahoo_fixture(dir: &Path) -> PathBuf {
    let root = dir.join("yahoo");
    fs::create_dir_all(&root).unwrap();
    write(&root.join("users.csv"), "user_id,gender\n1,M\n2,F\n3,M\n");
    write(
        &root.join("movies.csv"),
        "movie_id,title,genres\n\
         10,A,Suspense|Gangster\n\
         11,B,Kids|Performing Arts\n\
         12,C,Adult Audience\n\
         13,D,Adult Audience|Drama\n\
         14,E,Miscellaneous\n\
         15,F,Features\n\
         16,G,Suspense\n\
         17,H,Anime\n",
    );
    let mut ratings = String::from("user_id,movie_id,rating,timestamp\n");
    for u in 1..=3 {
        for m in 10..=17 {
            ratings.push_str(&format!("{u},{m},{},0\n", 1 + (u + m) % 5));
        }
    }
    write(&root.join("ratings.csv"), &ratings);
    root
}

#[test]
fn ingest_counts_alias_applications() {
    let tmp = TempDir::new().unwrap();
    let root = yahoo_fixture(tmp.path());
    let map = tmp.path().join("map.csv");
    write(&map, "Anime,Animation\n");
    let over = tmp.path().join("override.csv");
    write(&over, "14,Comedy\n");
    let out = tmp.path().join("clean");
    let o = gs_audit(&["ingest", "--format", "interchange", "--root", p(&root), "--genre-map", p(&map),
        "--override", p(&over), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let r = read_report(&out.join("ingest-report.json"));
    let aliases = &r["ingest"]["alias_applications"];
    let count = |raw: &str| aliases[raw]["count"].as_u64().unwrap();
    assert_eq!(count("Suspense"), 2);
    assert_eq!(count("Gangster"), 1);
    assert_eq!(count("Kids"), 1);
    assert_eq!(count("Performing Arts"), 1);
    assert_eq!(count("Adult Audience"), 2);
    assert_eq!(count("Anime"), 1);
    assert_eq!(aliases["Suspense"]["target"], "Thriller");
    let dropped: Vec<u64> = r["ingest"]["dropped_movies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["movie_id"].as_u64().unwrap())
        .collect();
    assert_eq!(dropped, vec![12, 15]);
    assert_eq!(r["ingest"]["overrides_applied"], 1);
    assert_eq!(r["ingest"]["dropped_ratings"], 6);
    assert_eq!(r["corpus_stats"]["movies"], 6);

    // The cleaned corpus reloads for the next stage.
    let prev = tmp.path().join("prev.json");
    let o = gs_audit(&["prevalence", "--corpus", p(&out), "--out", p(&prev)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn ingest_missing_file_names_it() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("ml");
    fs::create_dir_all(&root).unwrap();
    write(&root.join("movies.dat"), "1::Toy Story (1995)::Animation\n");
    write(&root.join("ratings.dat"), "1::1::5::0\n");
    let o = gs_audit(&["ingest", "--format", "ml1m", "--root", p(&root), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("users.dat"), "{}", stderr(&o));
}

#[test]
fn prevalence_report_and_neutral_fixture() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = tmp.path().join("prev.json");
    let o = gs_audit(&["prevalence", "--corpus", p(&corpus), "--mode", "item-count", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("misaligned"));
    let r = read_report(&out);
    let prev = &r["prevalence"];
    assert_eq!(prev["mode"], "item-count");
    let a = prev["aligned_percent"].as_f64().unwrap();
    let m = prev["misaligned_percent"].as_f64().unwrap();
    assert!((a + m - 100.0).abs() < 1e-9);
    assert!(r["manifest"]["dataset_hashes"]["ratings.csv"].as_str().unwrap().len() == 64);

    // Only neutral genres: every user ties and counts as aligned.
    let neutral = tmp.path().join("neutral");
    fs::create_dir_all(&neutral).unwrap();
    write(&neutral.join("users.csv"), "user_id,gender\n1,M\n2,F\n3,F\n");
    write(&neutral.join("movies.csv"), "movie_id,title,genres\n1,A,Documentary\n2,B,Western|Sci-Fi\n");
    write(&neutral.join("ratings.csv"), "user_id,movie_id,rating,timestamp\n1,1,4,0\n2,2,3,0\n3,1,5,0\n");
    let out = tmp.path().join("neutral.json");
    let o = gs_audit(&["prevalence", "--corpus", p(&neutral), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_report(&out);
    assert_eq!(r["prevalence"]["aligned_percent"], 100.0);
    assert_eq!(r["prevalence"]["tie_count"], 3);
}

#[test]
fn prevalence_bad_corpus_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = gs_audit(&["prevalence", "--corpus", p(&tmp.path().join("nope")), "--out", p(&tmp.path().join("x.json"))]);
    assert_eq!(code(&o), 2);
}

fn strip_timestamps(mut v: Value) -> Value {
    v["manifest"]["started_unix_ms"] = Value::from(0);
    v["manifest"]["finished_unix_ms"] = Value::from(0);
    v
}

#[test]
fn attack_holdout_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = tmp.path().join("attack.json");
    let run = |gs: &str| {
        let o = gs_audit(&["attack", "--corpus", p(&corpus), "--classifier", "lr", gs, "--harness", "holdout:0.2",
            "--seed", "11", "--out", p(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let table = String::from_utf8_lossy(&o.stdout).into_owned();
        assert!(table.contains("AUC") && table.contains("Accuracy (male)"), "{table}");
        read_report(&out)
    };
    let a = run("--with-gs");
    let b = run("--with-gs");
    assert_eq!(strip_timestamps(a.clone()), strip_timestamps(b));
    let typed: AuditReport = serde_json::from_value(a.clone()).unwrap();
    assert_eq!(typed.attacks.len(), 1);
    let attack = &a["attacks"][0];
    assert_eq!(attack["classifier"], "lr");
    assert_eq!(attack["with_gs"], true);
    assert_eq!(attack["harness"], "holdout:0.2");
    assert_eq!(a["manifest"]["seed"], 11);
    assert!(a["manifest"]["stereotype_model"]["male_genres"].is_array());
    let auc = attack["outcome"]["metrics"]["auc"].as_f64().unwrap();
    assert!(auc > 0.5, "auc {auc}");

    let c = run("--no-gs");
    assert_eq!(c["attacks"][0]["with_gs"], false);
    assert!(c["manifest"]["stereotype_model"].is_null());
}

#[test]
fn attack_cv_with_grid_file() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let grid = tmp.path().join("grid.json");
    write(&grid, r#"[{"c": 0.1, "tolerance": 1e-3}, {"c": 1.0, "tolerance": 1e-3}]"#);
    let out = tmp.path().join("cv.json");
    let o = gs_audit(&["attack", "--corpus", p(&corpus), "--classifier", "svm", "--no-gs", "--harness", "cv:3",
        "--grid", p(&grid), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains('±'));
    let r = read_report(&out);
    let cv = &r["attacks"][0]["outcome"];
    assert_eq!(cv["kind"], "cv");
    assert_eq!(cv["folds"].as_array().unwrap().len(), 3);
    assert_eq!(cv["grid"].as_array().unwrap().len(), 2);
}

#[test]
fn attack_config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = tmp.path().join("x.json");
    let base = ["attack", "--corpus", p(&corpus), "--out", p(&out)];
    let cases: [&[&str]; 4] = [
        &["--classifier", "knn", "--with-gs"],
        &["--classifier", "lr", "--with-gs", "--harness", "holdout:1.5"],
        &["--classifier", "lr", "--with-gs", "--harness", "cv:1"],
        &["--classifier", "lr"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        let o = gs_audit(&args);
        assert_eq!(code(&o), 2, "{extra:?}: {}", stderr(&o));
    }
    let grid = tmp.path().join("bad.json");
    write(&grid, r#"[{"c": -1.0}]"#);
    let o = gs_audit(&[&base[..], &["--classifier", "lr", "--with-gs", "--grid", p(&grid)]].concat());
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn strict_non_convergence_exits_3() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let grid = tmp.path().join("cap.json");
    write(&grid, r#"[{"max_iterations": 1, "tolerance": 1e-14}]"#);
    let out = tmp.path().join("s.json");
    let args = ["attack", "--corpus", p(&corpus), "--classifier", "lr", "--with-gs", "--grid", p(&grid), "--out", p(&out)];
    let o = gs_audit(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_report(&out)["attacks"][0]["converged"], false);
    let o = gs_audit(&[&args[..], &["--strict"]].concat());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

fn survey_rows(path: &Path, respondents: usize) {
    let recs = generate_survey(&SyntheticSurveyConfig {
        respondents,
        seed: 3,
        ..SyntheticSurveyConfig::default()
    });
    write_survey_csv(&recs, path).unwrap();
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|row| row.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn survey_fit_emits_both_orientations() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("survey.csv");
    survey_rows(&input, 2000);
    let out = tmp.path().join("fit.json");
    let o = gs_audit(&["survey-fit", "--input", p(&input), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_report(&out);
    assert_eq!(r["survey"]["respondents"], 2000);

    let male = tmp.path().join("fit.male_positive.csv");
    let female = tmp.path().join("fit.female_positive.csv");
    let bm = csv_column(&male, "coefficient");
    let bf = csv_column(&female, "coefficient");
    assert_eq!(bm.len(), 43);
    for (a, b) in bm.iter().zip(&bf) {
        assert!((a + b).abs() < 2e-6, "{a} vs {b}");
    }
    for row in r["survey"]["male_positive"]["rows"].as_array().unwrap() {
        let b = row["coefficient"].as_f64().unwrap();
        let odds = row["odds_ratio"].as_f64().unwrap();
        assert!((odds - b.exp()).abs() <= 1e-12 * odds.max(1.0));
    }
}

#[test]
fn survey_bad_level_exits_2() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("survey.csv");
    survey_rows(&input, 5);
    let text = fs::read_to_string(&input).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let cells: Vec<&str> = lines[3].split(',').collect();
    let mut cells: Vec<String> = cells.iter().map(|s| s.to_string()).collect();
    cells[4] = "Maybe".into();
    lines[3] = cells.join(",");
    write(&input, &(lines.join("\n") + "\n"));
    let o = gs_audit(&["survey-fit", "--input", p(&input), "--out", p(&tmp.path().join("f.json"))]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("row 3") && err.contains("Animation") && err.contains("Maybe"), "{err}");
}

#[test]
fn survey_degenerate_exits_4() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("survey.csv");
    survey_rows(&input, 300);
    // Nobody prefers Western at any level: its two columns are all zero.
    let mut r = csv::Reader::from_path(&input).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "Western").unwrap();
    let mut w = csv::Writer::from_path(tmp.path().join("flat.csv")).unwrap();
    w.write_record(&headers).unwrap();
    for row in r.records() {
        let mut row: Vec<String> = row.unwrap().iter().map(str::to_owned).collect();
        row[col] = "No".into();
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    let o = gs_audit(&["survey-fit", "--input", p(&tmp.path().join("flat.csv")), "--out", p(&tmp.path().join("f.json"))]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("Western=MaxPrefer"), "{}", stderr(&o));
}

#[test]
fn bad_thread_setting_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gs-audit"))
        .args(["prevalence", "--corpus", p(tmp.path()), "--out", p(&tmp.path().join("x.json"))])
        .env("GS_AUDIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("GS_AUDIT_THREADS"));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/deu.tsv");

fn lemmasplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lemmasplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn split_sample(dir: &Path, mode: &str, seed: &str) -> PathBuf {
    let out = dir.join(format!("{mode}-{seed}"));
    let o = lemmasplit(&[
        "split",
        "--input",
        SAMPLE,
        "--mode",
        mode,
        "--seed",
        seed,
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    out
}

#[test]
fn split_writes_three_parts_and_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = split_sample(tmp.path(), "lemma", "5");
    for ext in ["trn", "dev", "tst", "split.json"] {
        assert!(
            out.join(format!("deu.{ext}")).is_file(),
            "missing deu.{ext}"
        );
    }
    let sidecar: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("deu.split.json")).unwrap()).unwrap();
    assert_eq!(sidecar["mode"], "lemma");
    assert_eq!(sidecar["seed"], 5);
    assert_eq!(
        sidecar["proportions"],
        serde_json::json!(["7/10", "1/10", "1/5"])
    );
    let total: u64 = ["train", "dev", "test"]
        .iter()
        .map(|k| sidecar["counts"][k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 1088);
    assert_eq!(sidecar["unit_counts"]["train"], 95);
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let tmp = tempfile::tempdir().unwrap();
    let a = split_sample(tmp.path(), "form", "9");
    let b = split_sample(&tmp.path().join("again"), "form", "9");
    let c = split_sample(tmp.path(), "form", "10");
    for ext in ["trn", "dev", "tst", "split.json"] {
        let name = format!("deu.{ext}");
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name}"
        );
    }
    assert_ne!(
        fs::read(a.join("deu.tst")).unwrap(),
        fs::read(c.join("deu.tst")).unwrap()
    );
}

#[test]
fn verify_reports_leaked_lemma() {
    let tmp = tempfile::tempdir().unwrap();
    let out = split_sample(tmp.path(), "lemma", "1");
    let ok = lemmasplit(&["verify", "--dir", s(&out)]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("OK, 0 violations"));

    // move one test line into train
    let tst = fs::read_to_string(out.join("deu.tst")).unwrap();
    let (first, rest) = tst.split_once('\n').unwrap();
    let mut trn = fs::read_to_string(out.join("deu.trn")).unwrap();
    trn.push_str(first);
    trn.push('\n');
    fs::write(out.join("deu.trn"), trn).unwrap();
    fs::write(out.join("deu.tst"), rest).unwrap();

    let bad = lemmasplit(&["verify", "--dir", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
    let lemma = first.split('\t').next().unwrap();
    let text = stdout(&bad);
    assert!(
        text.contains(&format!("lemma {lemma:?} appears in train, test")),
        "{text}"
    );
    assert!(text.contains("FAILED, 1 violations"), "{text}");
}

#[test]
fn verify_detects_missing_rows_through_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = split_sample(tmp.path(), "form", "1");
    let dev = fs::read_to_string(out.join("deu.dev")).unwrap();
    let (_, rest) = dev.split_once('\n').unwrap();
    fs::write(out.join("deu.dev"), rest).unwrap();
    let o = lemmasplit(&["--json", "verify", "--dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["ok"], false);
    assert_eq!(
        summary["languages"][0]["report"]["violations"][0]["kind"],
        "incomplete"
    );
}

#[test]
fn eval_rejects_misaligned_predictions_without_touching_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = split_sample(tmp.path(), "form", "2");
    let gold = out.join("deu.tst");
    let n = fs::read_to_string(&gold).unwrap().lines().count();
    let pred = tmp.path().join("short.txt");
    fs::write(&pred, "Hund\n".repeat(n - 1)).unwrap();
    let result = tmp.path().join("result.json");
    fs::write(&result, "previous").unwrap();

    let o = lemmasplit(&[
        "eval",
        "--gold",
        s(&gold),
        "--pred",
        s(&pred),
        "--out",
        s(&result),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("{n}")));
    assert_eq!(fs::read_to_string(&result).unwrap(), "previous");
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let out = split_sample(tmp.path(), "lemma", "2");
    let gold = out.join("deu.dev");
    let o = lemmasplit(&[
        "--json",
        "eval",
        "--gold",
        s(&gold),
        "--pred",
        s(&gold),
        "--system",
        "oracle",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["accuracy"], 1.0);
    assert_eq!(r["mean_edit_distance"], 0.0);
    // mode comes from the provenance file next to the gold data
    assert_eq!(r["split_mode"], "lemma");
    assert_eq!(r["system"], "oracle");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["split", "--input", SAMPLE, "--mode", "lemma", "--out", "x"][..],
        &[
            "split",
            "--input",
            SAMPLE,
            "--mode",
            "lemma",
            "--seed",
            "1",
            "--out",
            "x",
            "--proportions",
            "0.5,0.5,0.5",
        ],
        &[
            "split", "--input", SAMPLE, "--dir", ".", "--mode", "form", "--seed", "1", "--out", "x",
        ],
        &[
            "split", "--input", SAMPLE, "--mode", "stem", "--seed", "1", "--out", "x",
        ],
        &["no-such-command"],
    ] {
        let o = lemmasplit(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bad_input_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.tsv");
    fs::write(&bad, "Hund\tHunde\n").unwrap();
    let o = lemmasplit(&[
        "split",
        "--input",
        s(&bad),
        "--mode",
        "form",
        "--seed",
        "1",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert!(!tmp.path().join("bad.trn").exists());
}

#[test]
fn stats_summarizes_the_sample() {
    let o = lemmasplit(&["--json", "stats", "--input", SAMPLE]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let deu = &v["languages"][0];
    assert_eq!(deu["triplets"], 1088);
    assert_eq!(deu["tables"], 136);
    assert_eq!(deu["min_table_size"], 8);
    assert_eq!(deu["distinct_bundles"], 8);
}

#[test]
fn family_report_renders_best_system() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("results.json");
    let mut rows = Vec::new();
    for (lang, a, b) in [
        ("ara", 0.5, 0.7),
        ("heb", 0.6, 0.8),
        ("amh", 0.4, 0.9),
        ("fin", 0.3, 0.1),
    ] {
        for (system, acc) in [("alpha", a), ("beta", b)] {
            rows.push(serde_json::json!({
                "language": lang, "system": system, "split_mode": "lemma",
                "accuracy": acc, "mean_edit_distance": 0.0, "n": 10
            }));
        }
    }
    fs::write(&results, serde_json::to_string(&rows).unwrap()).unwrap();
    let families = tmp.path().join("families.tsv");
    fs::write(
        &families,
        "ara\tAfro-Asiatic\nheb\tAfro-Asiatic\namh\tAfro-Asiatic\nfin\tUralic\n",
    )
    .unwrap();
    let abbrev = tmp.path().join("abbrev.tsv");
    fs::write(&abbrev, "alpha\ta\nbeta\tb\n").unwrap();
    let table = tmp.path().join("table.tsv");

    let o = lemmasplit(&[
        "report-family",
        "--results",
        s(&results),
        "--families",
        s(&families),
        "--abbreviations",
        s(&abbrev),
        "--table",
        s(&table),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.contains("Afro-Asiatic\t-\t0.65 (0.80)_b"), "{text}");
    assert!(text.contains("misc\t-\t0.20 (0.30)_a"), "{text}");
}

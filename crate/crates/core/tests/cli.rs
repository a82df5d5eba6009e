mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, refused_url, MockServer, TOY_SMOOTHING};

fn qaforge(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qaforge"));
    cmd.args(args)
        .env_remove("QAFORGE_SEED")
        .env_remove("QAFORGE_GENERATOR_URL");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&mut qaforge(&[]))), 1);
    assert_eq!(code(&run(&mut qaforge(&["frobnicate"]))), 1);
    assert_eq!(code(&run(&mut qaforge(&["ingest", "--input", "x"]))), 1);
    let bad_mode = run(&mut qaforge(&[
        "eval",
        "--dataset",
        "d",
        "--predictions",
        "p",
        "--mode",
        "xquad",
    ]));
    assert_eq!(code(&bad_mode), 1);
    assert!(String::from_utf8_lossy(&bad_mode.stderr).contains("xquad"));
    assert_eq!(code(&run(&mut qaforge(&["--help"]))), 0);
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.jsonl");
    let out = run(&mut qaforge(&[
        "ingest",
        "--input",
        path(&missing),
        "--language",
        "en",
        "--output",
        path(&tmp.path().join("o")),
    ]));
    assert_eq!(code(&out), 2);

    let dataset = fixture("metrics/dataset.json");
    let preds = tmp.path().join("preds.json");
    fs::write(&preds, r#"{"en-1": "Denver Broncos"}"#).unwrap();
    let out = run(&mut qaforge(&[
        "eval",
        "--dataset",
        path(&dataset),
        "--predictions",
        path(&preds),
    ]));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("es-1"));

    let lenient = run(&mut qaforge(&[
        "eval",
        "--dataset",
        path(&dataset),
        "--predictions",
        path(&preds),
        "--missing-as-zero",
    ]));
    assert_eq!(code(&lenient), 0);
    let report: serde_json::Value = serde_json::from_slice(&lenient.stdout).unwrap();
    assert_eq!(report["total"], 6);
    assert_eq!(report["exact_match"], 100.0 / 6.0);
}

#[test]
fn transport_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(qaforge(&[
        "run",
        "--input",
        path(&fixture("toy/passages.jsonl")),
        "--output-dir",
        path(tmp.path()),
        "--language",
        "en",
        "--backend",
        "remote",
        "--sample",
        "1",
    ])
    .env("QAFORGE_GENERATOR_URL", refused_url()));
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("checkpoint.jsonl").exists());
}

#[test]
fn remote_generate_through_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let reply =
        r#"{"candidates":[{"text":"question when was it mapped answer 1892","lm_score":-3.0}]}"#;
    let server = MockServer::start(vec![(200, reply.into())]);
    let passages = tmp.path().join("p.jsonl");
    let first = fs::read_to_string(fixture("toy/passages.jsonl")).unwrap();
    fs::write(&passages, first.lines().next().unwrap()).unwrap();
    let cands = tmp.path().join("c.jsonl");
    let out = run(qaforge(&[
        "generate",
        "--passages",
        path(&passages),
        "--backend",
        "remote",
        "--num-samples",
        "1",
        "--output",
        path(&cands),
    ])
    .env("QAFORGE_GENERATOR_URL", &server.url));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let line: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&cands).unwrap().trim()).unwrap();
    assert_eq!(line["passage_id"], "toy-00");
    assert_eq!(line["lm_score"], -3.0);
}

/// ingest → generate → filter → emit must write the same bytes as `run`.
#[test]
fn stepwise_commands_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    let train = fixture("toy/train.json");
    let smoothing = TOY_SMOOTHING.to_string();

    let steps: Vec<Vec<String>> = vec![
        vec![
            "ingest".into(),
            "--input".into(),
            path(&fixture("toy/passages.jsonl")).into(),
            "--language".into(),
            "en".into(),
            "--sample".into(),
            "9".into(),
            "--output".into(),
            path(&t("p.jsonl")).into(),
        ],
        vec![
            "generate".into(),
            "--passages".into(),
            path(&t("p.jsonl")).into(),
            "--backend".into(),
            "reference".into(),
            "--training-data".into(),
            path(&train).into(),
            "--smoothing".into(),
            smoothing.clone(),
            "--output".into(),
            path(&t("c.jsonl")).into(),
        ],
        vec![
            "filter".into(),
            "--candidates".into(),
            path(&t("c.jsonl")).into(),
            "--passages".into(),
            path(&t("p.jsonl")).into(),
            "--keep".into(),
            "10".into(),
            "--per-passage".into(),
            "20".into(),
            "--stats".into(),
            path(&t("stats.json")).into(),
            "--output".into(),
            path(&t("e.jsonl")).into(),
        ],
        vec![
            "emit".into(),
            "--examples".into(),
            path(&t("e.jsonl")).into(),
            "--passages".into(),
            path(&t("p.jsonl")).into(),
            "--output".into(),
            path(&t("d.json")).into(),
        ],
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let out = run(qaforge(&args).env("QAFORGE_SEED", "11"));
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let out = run(qaforge(&[
        "run",
        "--input",
        path(&fixture("toy/passages.jsonl")),
        "--output-dir",
        path(&t("run")),
        "--language",
        "en",
        "--sample",
        "9",
        "--backend",
        "reference",
        "--training-data",
        path(&train),
        "--smoothing",
        &smoothing,
    ])
    .env("QAFORGE_SEED", "11"));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.starts_with("stage"));

    assert_eq!(
        fs::read(t("d.json")).unwrap(),
        fs::read(t("run/dataset.json")).unwrap()
    );
    assert!(fs::read(t("d.json")).unwrap().len() > 100);

    let stats = run(&mut qaforge(&[
        "stats",
        "--report",
        path(&t("run/report.json")),
    ]));
    assert_eq!(code(&stats), 0);
    assert_eq!(stats.stdout, out.stdout);
}

#[test]
fn run_reads_a_config_file_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "input = {:?}\noutput_dir = {:?}\nlanguage = \"en\"\nsample_n = 3\n\n[backend]\nkind = \"reference\"\ntraining_data = {:?}\nsmoothing = {TOY_SMOOTHING}\n\n[filter]\nkeep_per_passage = 4\n",
            path(&fixture("toy/passages.jsonl")),
            path(&tmp.path().join("from-file")),
            path(&fixture("toy/train.json")),
        ),
    )
    .unwrap();
    let out = run(&mut qaforge(&[
        "run",
        "--config",
        path(&config),
        "--output-dir",
        path(&tmp.path().join("flag")),
        "--keep",
        "2",
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("from-file").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("flag/report.json")).unwrap()).unwrap();
    let sampled = report["counts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["stage"] == "sampled")
        .unwrap();
    assert_eq!(sampled["count"], 3);
    assert!(report["filter"]["kept"].as_u64().unwrap() <= 6);

    fs::write(&config, "input = 3").unwrap();
    assert_eq!(
        code(&run(&mut qaforge(&["run", "--config", path(&config)]))),
        1
    );
}

#[test]
fn mix_and_bleu() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("m.json");
    let out = run(&mut qaforge(&[
        "mix",
        "--synthetic",
        "s1.json",
        "s2.json",
        "--gold",
        "g.json",
        "--gold-epochs",
        "3",
        "--output",
        path(&manifest),
    ]));
    assert_eq!(code(&out), 0);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["stages"][0]["name"], "synthetic");
    assert_eq!(m["stages"][0]["dataset_paths"].as_array().unwrap().len(), 2);
    assert_eq!(m["stages"][1]["epochs"], 3);
    assert_eq!(m["stages"][1]["batch_size"], 64);
    assert_eq!(
        code(&run(&mut qaforge(&["mix", "--output", path(&manifest)]))),
        1
    );

    let (hyp, reference) = (tmp.path().join("h.txt"), tmp.path().join("r.txt"));
    fs::write(&hyp, "a b c d\n").unwrap();
    fs::write(&reference, "a b c d e\n").unwrap();
    let out = run(&mut qaforge(&[
        "bleu",
        "--hyp",
        path(&hyp),
        "--ref",
        path(&reference),
    ]));
    assert_eq!(code(&out), 0);
    let score: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((score["score"].as_f64().unwrap() - 100.0 * (-0.25f64).exp()).abs() < 1e-9);

    fs::write(&reference, "a b c d e\nextra line\n").unwrap();
    let out = run(&mut qaforge(&[
        "bleu",
        "--hyp",
        path(&hyp),
        "--ref",
        path(&reference),
    ]));
    assert_eq!(code(&out), 2);
}

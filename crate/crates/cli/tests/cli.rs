use std::path::Path;
use std::process::{Command, Output};

fn rswc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rswc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn simulate_writes_identical_outputs_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let sub = dir.path().join(threads);
        let cfg = format!(
            r#"{{"scheme":"one_sided","decoder":"ip","pmf":{{"dsbs":0.11}},"n_grid":[8,10],"trials":60,
                "overlays":["p1"],
                "outputs":{{"summary_csv":"{0}/s.csv","trials_jsonl":"{0}/t.jsonl","plot_tsv":"{0}/p.tsv"}}}}"#,
            sub.display()
        );
        let path = write(dir.path(), &format!("c{threads}.json"), &cfg);
        let o = rswc(&["simulate", "--config", &path, "--threads", threads, "--seed", "9"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("scheme,decoder,n,trials"));
        let files: Vec<Vec<u8>> = ["s.csv", "t.jsonl", "p.tsv"]
            .iter()
            .map(|f| std::fs::read(sub.join(f)).unwrap())
            .collect();
        outs.push(files);
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn trials_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.json", r#"{"scheme":"joint","pmf":{"dsbs":0.11},"n_grid":[6],"trials":500}"#);
    let o = rswc(&["simulate", "--config", &path, "--trials", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().nth(1).unwrap().to_owned();
    assert_eq!(line.split(',').nth(3), Some("7"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"scheme":"one_sided","pmf":{"dsbs":0.11},"n_grid":[8,4]}"#);
    assert_eq!(rswc(&["simulate", "--config", &bad]).status.code(), Some(2));
    let garbage = write(dir.path(), "g.json", "{not json");
    assert_eq!(rswc(&["simulate", "--config", &garbage]).status.code(), Some(2));
    assert_eq!(rswc(&["simulate", "--config", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(rswc(&["decode", "--config", &garbage]).status.code(), Some(2));
}

#[test]
fn inconclusive_campaign_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "c.json",
        r#"{"scheme":"one_sided","decoder":"ip","pmf":{"dsbs":0.11},"n_grid":[12],"eps":1.0,"trials":20,"node_budget":1}"#,
    );
    assert_eq!(rswc(&["simulate", "--config", &path]).status.code(), Some(3));
}

#[test]
fn decode_prints_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "r.json",
        r#"{"kind":"ip","instance":{"n_vars":3,"rows":[{"coeffs":[1,1,1],"lower":3,"upper":3}]}}"#,
    );
    let o = rswc(&["decode", "--config", &path]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "unique");
    assert_eq!(v["solutions"][0], serde_json::json!([1, 1, 1]));
}

#[test]
fn bounds_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "b.json", r#"{"samples":200,"n_grid":[64]}"#);
    let o = rswc(&["bounds", "--config", &path]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("name,n,eps,params,bound_log2,empirical_freq,ucb99,verdict\n"));
    assert!(out.lines().any(|l| l.starts_with("p1,64,")));
}

#[test]
fn nsn_reports_violations_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "t.json",
        r#"{"sources":[{"name":"a"},{"name":"b"}],
            "encoders":[{"source":0,"rate":1.0},{"source":1,"rate":1.0}],
            "decoders":[{"encoders":[0,1],"demands":[0]}]}"#,
    );
    let o = rswc(&["nsn", "--topology", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("source 1 is a helper at decoder 0"));

    let topo = configs().join("three_sources.json");
    let pmf = configs().join("three_sources_pmf.json");
    let o = rswc(&[
        "nsn",
        "--topology",
        topo.to_str().unwrap(),
        "--pmf",
        pmf.to_str().unwrap(),
        "--eps",
        "2",
        "--trials",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\nnsn,typicality,6,5,"));
}

#[test]
fn rate_region_queries() {
    let topo = configs().join("three_sources.json");
    let pmf = configs().join("three_sources_pmf.json");
    let (t, p) = (topo.to_str().unwrap(), pmf.to_str().unwrap());
    let o = rswc(&["rate-region", "--topology", t, "--pmf", p]);
    assert!(stdout(&o).ends_with("achievable: true\n"));
    let o = rswc(&["rate-region", "--topology", t, "--pmf", p, "--rates", "1,0.6,0.6"]);
    let out = stdout(&o);
    assert!(out.ends_with("achievable: false\n"));
    assert!(out.contains("1\t{1}\t0.6\t"));
    assert_eq!(rswc(&["rate-region", "--topology", t, "--pmf", p, "--rates", "1"]).status.code(), Some(2));
}

mod common;

use common::*;
use recall_core::fixture::FixtureName;
use std::fs;

#[test]
fn fixture_pipeline_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["pipeline", "--fixture", "table2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("cluster: 36 clusters"), "{}", lines[2]);
    assert!(lines[3].ends_with("-> 25 groups"), "{}", lines[3]);

    let out = dir.path().join("out");
    for name in [
        "dataset.csv",
        "cleaning_report.json",
        "clusters.json",
        "groups.json",
        "report.md",
        "report.csv",
        "report.json",
        "report.svg",
        "effective_config.toml",
        "fetch.meta.json",
        "dataset.meta.json",
        "clusters.meta.json",
        "groups.meta.json",
        "report.meta.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let clusters = read_json(out.join("clusters.json"));
    assert_eq!(clusters["cluster_count"], 36);
    let groups = read_json(out.join("groups.json"));
    assert_eq!(groups["group_count"], 25);
    let report = read_json(out.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["metadata"]["dataset_records"], 6991);
}

#[test]
fn sidecar_hashes_match_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        run_in(dir.path(), &["pipeline", "--fixture", "figure1", "--min-pts", "1"])
            .status
            .success()
    );
    let out = dir.path().join("out");
    let hashes = tree_hashes(&out);
    for stage in ["dataset", "clusters", "groups", "report"] {
        let meta = read_json(out.join(format!("{stage}.meta.json")));
        assert_eq!(meta["stage"], stage);
        for o in meta["outputs"].as_array().unwrap() {
            let path = o["path"].as_str().unwrap();
            assert_eq!(hashes[path], o["sha256"].as_str().unwrap(), "{stage}: {path}");
        }
        assert!(!meta["inputs"].as_array().unwrap().is_empty());
        assert!(meta["generated_at"].is_string());
    }
    // each stage's input digest is the previous stage's output digest
    let clusters_meta = read_json(out.join("clusters.meta.json"));
    assert_eq!(
        clusters_meta["inputs"][0]["sha256"].as_str().unwrap(),
        hashes["dataset.csv"]
    );
}

#[test]
fn stages_can_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["fetch", "build", "cluster", "aggregate", "report"] {
        let o = run_in(dir.path(), &[stage, "--fixture", "table2", "--format", "json"]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let out = dir.path().join("out");
    assert!(out.join("report.json").is_file());
    assert!(!out.join("report.md").exists());
}

#[test]
fn cluster_on_empty_dataset_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    let header = recall_core::dataset::CSV_HEADER.join(",");
    fs::write(out.join("dataset.csv"), format!("{header}\r\n")).unwrap();
    let o = run_in(dir.path(), &["cluster", "--eps", "0.1", "--min-pts", "4"]);
    assert_eq!(o.status.code(), Some(4));
    let err = error_line(&o);
    assert_eq!(err["error"], "data");
    assert_eq!(err["code"], 4);
    assert!(err["message"].as_str().unwrap().contains("no records"));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn failure_kinds_have_distinct_exit_codes() {
    // usage: malformed config
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[dbscan]\neps = \"wide\"\n").unwrap();
    let usage = run_in(dir.path(), &["cluster", "--config", "bad.toml"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_line(&usage)["error"], "usage");

    // usage: invalid parameter
    let bad_param = run_in(dir.path(), &["cluster", "--eps", "-1"]);
    assert_eq!(bad_param.status.code(), Some(2));

    // data: missing input
    let missing = run_in(dir.path(), &["aggregate"]);
    assert_eq!(missing.status.code(), Some(4));
    assert!(error_line(&missing)["message"]
        .as_str()
        .unwrap()
        .contains("clusters.json"));

    // contract: duplicate cluster labels handed to aggregation
    let out = dir.path().join("out");
    fs::write(
        out.join("clusters.json"),
        r#"{"params":{"eps":0.1,"min_pts":4},"cluster_count":2,
            "clusters":[{"id":0,"label":"Other","count":3},{"id":1,"label":"Other","count":2}],"noise":[]}"#,
    )
    .unwrap();
    let contract = run_in(dir.path(), &["aggregate"]);
    assert_eq!(contract.status.code(), Some(5), "{}", stderr(&contract));
    assert_eq!(error_line(&contract)["error"], "contract");

    // output: out path is a regular file
    fs::write(dir.path().join("blocked"), "").unwrap();
    let output = run_in(dir.path(), &["pipeline", "--fixture", "figure1", "--out", "blocked"]);
    assert_eq!(output.status.code(), Some(6));
    assert_eq!(error_line(&output)["error"], "output");

    // network: nothing listening and nothing cached
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let base = format!("http://127.0.0.1:{port}");
    let net = run_in(
        dir.path(),
        &["fetch", "--base-url", &base, "--cache-dir", "empty-cache"],
    );
    assert_eq!(net.status.code(), Some(3), "{}", stderr(&net));
    assert_eq!(error_line(&net)["error"], "network");

    let codes = [&usage, &missing, &contract, &output, &net].map(|o| o.status.code().unwrap());
    let mut unique = codes.to_vec();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), codes.len());
}

#[test]
fn effective_config_replays_to_identical_outputs() {
    let first = tempfile::tempdir().unwrap();
    let o = run_in(
        first.path(),
        &[
            "pipeline",
            "--fixture",
            "table2",
            "--theta",
            "0.8",
            "--top",
            "5",
            "--format",
            "md,csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let config = fs::read_to_string(first.path().join("out/effective_config.toml")).unwrap();
    assert!(config.contains("theta = 0.8"));

    let second = tempfile::tempdir().unwrap();
    fs::write(second.path().join("replay.toml"), &config).unwrap();
    let o = run_in(second.path(), &["pipeline", "--config", "replay.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let strip_meta = |m: std::collections::BTreeMap<String, String>| {
        m.into_iter()
            .filter(|(k, _)| !k.ends_with(".meta.json"))
            .collect::<Vec<_>>()
    };
    let a = strip_meta(tree_hashes(&first.path().join("out")));
    let b = strip_meta(tree_hashes(&second.path().join("out")));
    assert_eq!(a, b);
    assert!(!second.path().join("out/report.json").exists());
    let groups = read_json(second.path().join("out/groups.json"));
    assert_eq!(groups["group_count"], 24);
}

#[test]
fn api_key_is_never_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with_env(
        dir.path(),
        &["fetch", "--fixture", "figure1"],
        &[("OPENFDA_API_KEY", "sekret-123")],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for (path, _) in tree_hashes(dir.path()) {
        let text = fs::read_to_string(dir.path().join(&path)).unwrap();
        assert!(!text.contains("sekret-123"), "key leaked into {path}");
    }
}

#[test]
fn populated_cache_needs_no_network() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(FixtureName::Table2);
    let base = server.base_url.clone();
    let first = run_in(dir.path(), &["pipeline", "--base-url", &base]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(server.hits.load(std::sync::atomic::Ordering::SeqCst), 8);
    let before = tree_hashes(dir.path());
    server.shutdown();

    // the port is closed now; any request would fail with exit code 3
    let second = run_in(dir.path(), &["pipeline", "--base-url", &base]);
    assert!(second.status.success(), "{}", stderr(&second));
    let after = tree_hashes(dir.path());
    let body = |m: &std::collections::BTreeMap<String, String>| {
        m.iter()
            .filter(|(k, _)| !k.ends_with(".meta.json"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(body(&before), body(&after));
    assert!(stdout(&second).contains("25 groups"));
}

#[test]
fn cache_from_another_query_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["fetch", "--fixture", "table2"]).status.success());
    let o = run_in(dir.path(), &["build", "--fixture", "table2", "--page-size", "500"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(
        error_line(&o)["message"].as_str().unwrap().contains("different query"),
        "{}",
        stderr(&o)
    );
}

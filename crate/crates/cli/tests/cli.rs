use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lakefuse_core::align::IntegrationMapping;
use lakefuse_core::fixtures::{example1, write_tables};
use lakefuse_core::integrate::fd_oracle;
use lakefuse_core::lake::Lake;
use lakefuse_core::table::{HeaderMode, Table};
use lakefuse_core::Exec;
use lakefuse_service::app::{AlignBody, DiscoverBody, IntegrateBody};
use lakefuse_service::{App, ServiceConfig};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }

    fn error(&self) -> Value {
        serde_json::from_str(self.stderr.trim()).unwrap_or_else(|e| panic!("{e}: {}", self.stderr))
    }
}

fn lakefuse(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("lakefuse").chain(args.iter().copied());
    let code = lakefuse_cli::run_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows_of(path: &Path) -> BTreeSet<Vec<Option<String>>> {
    let t = Table::load(path, HeaderMode::Present).unwrap();
    t.rows()
        .iter()
        .map(|r| r.iter().map(|c| c.as_str().map(str::to_string)).collect())
        .collect()
}

#[test]
fn integrate_example1_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("example1");
    write_tables(&set, &example1()).unwrap();
    let out = dir.path().join("fd.csv");
    let r = lakefuse(&["integrate", "--set", s(&set), "--operator", "fd", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let summary = r.json();
    assert_eq!(summary["operator"], "fd");
    assert!(dir.path().join("fd.lineage.json").is_file());

    let mapping: IntegrationMapping = serde_json::from_value(summary["mapping"].clone()).unwrap();
    let tables: Vec<Arc<_>> = Lake::ingest(&set, Exec::Sequential).unwrap().tables().cloned().collect();
    let oracle = fd_oracle(&tables, &mapping).unwrap();
    let expected: BTreeSet<Vec<Option<String>>> = oracle
        .rows
        .iter()
        .map(|r| r.values().into_iter().map(|v| v.map(str::to_string)).collect())
        .collect();
    assert_eq!(rows_of(&out), expected);
    assert_eq!(summary["rows"], expected.len());
}

#[test]
fn missing_lake_is_a_user_error() {
    let r = lakefuse(&["discover", "--lake", "/no/such/lake", "--query", "/no/q.csv", "--method", "joinable-lsh"]);
    assert_eq!(r.code, 1);
    let e = r.error();
    assert_eq!(e["code"], "io");
    assert_eq!(e["stage"], "discover");
    assert!(r.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let r = lakefuse(&["integrate", "--bogus"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("Usage"), "{}", r.stderr);
    let r = lakefuse(&["frobnicate"]);
    assert_eq!(r.code, 1);
    let r = lakefuse(&["align", "--select", "T2", "--out", "x"]);
    assert_eq!(r.code, 1);
    let r = lakefuse(&["integrate", "--set", "a", "--from-results", "b", "--operator", "fd", "--out", "x"]);
    assert_eq!(r.code, 1, "--set and --from-results are exclusive");
    let r = lakefuse(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("discover"));
}

#[test]
fn pearson_on_exact_line() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("line.csv");
    std::fs::write(&table, "x,y\n1,2\n2,4\n3,6\n4,8\n").unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind": "correlate", "x": "x", "y": "y"}"#).unwrap();
    let out = dir.path().join("result.json");
    let r = lakefuse(&["analyze", "--table", s(&table), "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert!((v["output"]["coefficient"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert_eq!(v["spec"]["kind"], "correlate");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), r.stdout);
}

#[test]
fn aggregate_writes_csv_too() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "city,rate\nBoston,62\nToronto,83\nBoston,64\n").unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind": "aggregate", "measure": "rate", "function": "max", "group_by": ["city"]}"#).unwrap();
    let out = dir.path().join("agg.json");
    let r = lakefuse(&["analyze", "--table", s(&table), "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("agg.csv")).unwrap(),
        "city,max(rate)\nBoston,64\nToronto,83\n"
    );
}

#[test]
fn engine_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set");
    std::fs::create_dir_all(&set).unwrap();
    let rows: String = (0..30).map(|i| format!("k{},{}\n", i % 3, i)).collect();
    std::fs::write(set.join("a.csv"), format!("k,x\n{rows}")).unwrap();
    std::fs::write(set.join("b.csv"), format!("k,y\n{rows}")).unwrap();
    let out = dir.path().join("o.csv");
    let r = lakefuse(&["integrate", "--set", s(&set), "--operator", "fd", "--row-limit", "50", "--out", s(&out)]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let e = r.error();
    assert_eq!(e["code"], "row_limit_exceeded");
    assert_eq!(e["stage"], "integrate");
}

#[test]
fn gen_query_is_deterministic() {
    let a = lakefuse(&["gen-query", "--prompt", "COVID-19 cases", "--rows", "5", "--cols", "5"]);
    let b = lakefuse(&["gen-query", "--prompt", "COVID-19 cases", "--rows", "5", "--cols", "5"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let v = a.json();
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v["columns"].as_array().unwrap().len(), 5);
    let z = lakefuse(&["gen-query", "--prompt", "x", "--rows", "0", "--cols", "5"]);
    assert_eq!(z.code, 1);
    assert_eq!(z.error()["code"], "bad_request");
}

#[test]
fn pretty_output_is_plain_text() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("example1");
    write_tables(&set, &example1()).unwrap();
    let out = dir.path().join("fd.csv");
    let r = lakefuse(&["--pretty", "integrate", "--set", s(&set), "--operator", "fd", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(serde_json::from_str::<Value>(&r.stdout).is_err());
    assert!(r.stdout.lines().next().unwrap().starts_with("I0"));
    assert!(r.stdout.contains("Boston"));
}

fn example1_lake(root: &Path) -> (PathBuf, PathBuf) {
    let lake = root.join("lake");
    let t = example1();
    write_tables(&lake, &t[1..]).unwrap();
    std::fs::write(lake.join("drugs.csv"), "brand,dose\naspirin,10\nibuprofen,20\n").unwrap();
    let qdir = root.join("q");
    std::fs::create_dir_all(&qdir).unwrap();
    let query = qdir.join("query.csv");
    std::fs::write(&query, t[0].to_csv_string()).unwrap();
    (lake, query)
}

#[test]
fn index_is_saved_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let (lake, query) = example1_lake(dir.path());
    let r = lakefuse(&["index", "--lake", s(&lake), "--k", "64"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["params"]["num_perm"], 64);
    assert!(lake.join("join.index.bin").is_file());
    assert!(lake.join("lake.manifest.json").is_file());
    let r = lakefuse(&["discover", "--lake", s(&lake), "--query", s(&query), "--method", "joinable-lsh", "--column", "City"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let ids: Vec<String> = r.json()["result"]["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["table_id"].as_str().unwrap().to_string())
        .collect();
    assert!(ids.contains(&"T3.csv".to_string()), "{ids:?}");
}

/// The same stage inputs through the CLI and through a service session
/// yield byte-identical artifacts.
#[test]
fn cli_and_service_artifacts_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (lake, query) = example1_lake(dir.path());
    let cli = dir.path().join("cli");
    std::fs::create_dir_all(&cli).unwrap();

    let mut results = Vec::new();
    for (method, column) in [("unionable-match", None), ("joinable-lsh", Some("City"))] {
        let out = cli.join(format!("{method}.json"));
        let mut args = vec!["discover", "--lake", s(&lake), "--query", s(&query), "--method", method, "--k", "2"];
        if let Some(c) = column {
            args.extend(["--column", c]);
        }
        args.extend(["--out", s(&out)]);
        let r = lakefuse(&args);
        assert_eq!(r.code, 0, "{}", r.stderr);
        results.push(out);
    }
    let mapping = cli.join("mapping.json");
    let mut args = vec!["align", "--from-results"];
    args.extend(results.iter().map(|p| s(p)));
    args.extend(["--tau", "0.5", "--out", s(&mapping)]);
    let r = lakefuse(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let integrated = cli.join("integrated.fd.csv");
    let mut args = vec!["integrate", "--from-results"];
    args.extend(results.iter().map(|p| s(p)));
    args.extend(["--operator", "fd", "--mapping", s(&mapping), "--out", s(&integrated)]);
    let r = lakefuse(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let app = App::new(ServiceConfig::new(&lake, dir.path().join("state"))).unwrap();
    let sid = app.create_session().unwrap().session_id;
    app.upload_query(&sid, Some("query.csv"), HeaderMode::Auto, &std::fs::read_to_string(&query).unwrap())
        .unwrap();
    for (method, column) in [("unionable-match", None), ("joinable-lsh", Some("City"))] {
        let body = DiscoverBody {
            method: method.into(),
            k: Some(2),
            query_column: column.map(str::to_string),
            threshold: None,
        };
        let resp = app.discover(&sid, &body).unwrap();
        let run: Value = serde_json::from_str(&std::fs::read_to_string(cli.join(format!("{method}.json"))).unwrap()).unwrap();
        assert_eq!(serde_json::to_value(&resp.result).unwrap(), run["result"]);
    }
    app.align(&sid, &AlignBody { tau: Some(0.5) }).unwrap();
    app.integrate(
        &sid,
        &IntegrateBody {
            operator: "fd".into(),
            order: vec![],
            row_limit: None,
        },
    )
    .unwrap();
    let session = app.store().dir(&sid);
    for (cli_file, svc_file) in [
        (mapping.clone(), "mapping.json"),
        (integrated.clone(), "integrated.fd.csv"),
        (cli.join("integrated.fd.lineage.json"), "integrated.fd.lineage.json"),
    ] {
        assert_eq!(
            std::fs::read(&cli_file).unwrap(),
            std::fs::read(session.join(svc_file)).unwrap(),
            "{svc_file}"
        );
    }
}

#[test]
fn select_narrows_the_result_set() {
    let dir = tempfile::tempdir().unwrap();
    let (lake, query) = example1_lake(dir.path());
    let res = dir.path().join("u.json");
    let r = lakefuse(&["discover", "--lake", s(&lake), "--query", s(&query), "--method", "unionable-match", "--out", s(&res)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let ids: Vec<String> = r.json()["result"]["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["table_id"].as_str().unwrap().to_string())
        .collect();
    assert!(ids.len() > 1, "{ids:?}");
    let out = dir.path().join("m.json");
    let r = lakefuse(&["align", "--from-results", s(&res), "--select", &ids[0], "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let tables: BTreeSet<String> = r.json()["mapping"]
        .as_object()
        .unwrap()
        .values()
        .flat_map(|v| v.as_array().unwrap().iter().map(|m| m[0].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(tables, BTreeSet::from(["query.csv".to_string(), ids[0].clone()]));
}

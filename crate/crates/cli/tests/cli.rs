use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_foldfinder");

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn problem(name: &str) -> String {
    problems().join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("FOLDFINDER_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Data rows of a CSV artifact after the schema line and the header.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema_version: 1"));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn pf_nose() -> f64 {
    (2f64.sqrt() - 1.0) / 2.0
}

#[test]
fn solve_bratu_single_node() {
    let out = run(&[
        "solve",
        &problem("bratu.toml"),
        "--strategy",
        "epigraph-slp",
    ]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "solve");
    let l = doc["result"]["lambda_star"].as_f64().unwrap();
    // u = 1 maximizes 8u e^{-u}
    assert!((l - 8.0 / std::f64::consts::E).abs() < 1e-9, "{l}");
    assert!((doc["result"]["x_star"][0].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(doc["result"]["profile"].is_object());
    assert_eq!(doc["result"]["unbounded_suspected"], false);
}

#[test]
fn solve_linear_is_the_perron_root() {
    let out = run(&["solve", &problem("linear.toml")]);
    assert_eq!(code(&out), 0);
    let l = json(&out)["result"]["lambda_star"].as_f64().unwrap();
    assert!((l - 3.0).abs() < 1e-9, "{l}");
}

#[test]
fn grid_oracle_refines_consistently() {
    let lam = |res: &str| {
        let out = run(&[
            "solve",
            &problem("power_flow.toml"),
            "--strategy",
            "grid-oracle",
            "--resolution",
            res,
        ]);
        assert_eq!(code(&out), 0);
        json(&out)["result"]["lambda_star"].as_f64().unwrap()
    };
    let (coarse, fine) = (lam("400"), lam("800"));
    assert!((fine - coarse).abs() < 1e-3);
    assert!(fine <= pf_nose() + 1e-12 && pf_nose() - fine < 1e-3);
}

#[test]
fn solve_writes_trace_csv() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = run(&[
        "solve",
        &problem("bratu.toml"),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["result"]["trace_path"], trace.to_str().unwrap());
    let (header, rows) = csv_rows(&std::fs::read_to_string(&trace).unwrap());
    assert_eq!(
        header,
        [
            "iteration",
            "lambda",
            "step",
            "accepted",
            "mu",
            "smoothed_lambda"
        ]
    );
    assert!(!rows.is_empty());
}

#[test]
fn unbounded_functional_is_flagged_not_failed() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "ray.toml",
        "kind = \"custom\"\nn = 1\nsampling_box = { lower = [0.5], upper = [2.0] }\n\
         domain = { lower = [0.0], upper = [inf] }\n[expressions]\ng = [\"x1\"]\nh = [\"1\"]\n",
    );
    let out = run(&["solve", &p]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["result"]["unbounded_suspected"], true);
}

#[test]
fn certify_verdicts() {
    let dir = TempDir::new().unwrap();
    let solved = dir.path().join("s.json");
    assert_eq!(
        code(&run(&[
            "solve",
            &problem("bratu.toml"),
            "--out",
            solved.to_str().unwrap()
        ])),
        0
    );

    let out = run(&[
        "certify",
        &problem("bratu.toml"),
        "--from",
        solved.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["result"]["verdict"], "certified-fold");

    let out = run(&[
        "certify",
        &problem("bratu.toml"),
        "--x",
        "1.1",
        "--lambda",
        "2.9",
    ]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["result"]["verdict"], "failed-solution");

    let out = run(&[
        "certify",
        &problem("linear.toml"),
        "--x",
        "1,1",
        "--lambda",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["result"]["verdict"], "certified-fold");

    let out = run(&[
        "certify",
        &problem("linear.toml"),
        "--x",
        "1,1",
        "--format",
        "text",
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: CertifiedFold"));
}

#[test]
fn certify_accepts_every_solve_output() {
    let dir = TempDir::new().unwrap();
    let files = [
        "bratu.toml",
        "linear.toml",
        "power_flow.toml",
        "convex_concave.toml",
        "custom.toml",
    ];
    for (k, f) in files.iter().enumerate() {
        for strategy in ["epigraph-slp", "smoothed-ascent", "subgradient"] {
            let path = dir.path().join(format!("{k}-{strategy}.json"));
            let out = run(&[
                "solve",
                &problem(f),
                "--strategy",
                strategy,
                "--out",
                path.to_str().unwrap(),
            ]);
            assert_eq!(code(&out), 0, "{f} {strategy}");
            let out = run(&["certify", &problem(f), "--from", path.to_str().unwrap()]);
            assert!(
                matches!(code(&out), 0 | 1),
                "{f} {strategy}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            assert!(json(&out)["result"]["verdict"].is_string());
        }
    }
}

#[test]
fn trace_bratu_locates_the_fold() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("branch.csv");
    let out = run(&[
        "trace",
        &problem("bratu.toml"),
        "--step",
        "0.05",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let fold = doc["result"]["folds"][0]["lambda"].as_f64().unwrap();
    assert!((fold - 8.0 / std::f64::consts::E).abs() < 1e-6, "{fold}");
    let (header, rows) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(header, ["s", "lambda", "x_1", "tangent_lambda"]);
    assert_eq!(rows.len() as u64, doc["result"]["points"].as_u64().unwrap());
}

#[test]
fn trace_from_solve_output_reaches_the_power_flow_nose() {
    let dir = TempDir::new().unwrap();
    let solved = dir.path().join("s.json");
    assert_eq!(
        code(&run(&[
            "solve",
            &problem("power_flow.toml"),
            "--out",
            solved.to_str().unwrap()
        ])),
        0
    );
    let out = run(&[
        "trace",
        &problem("power_flow.toml"),
        "--from",
        solved.to_str().unwrap(),
        "--max-points",
        "40",
    ]);
    assert_eq!(code(&out), 0);
    let (_, rows) = csv_rows(&String::from_utf8_lossy(&out.stdout));
    let max = rows
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((max - pf_nose()).abs() < 1e-6, "{max}");
}

#[test]
fn probe_is_empty_above_and_finds_roots_below() {
    let l = 8.0 / std::f64::consts::E;
    let above = run(&[
        "probe",
        &problem("bratu.toml"),
        "--lambda",
        &(l * 1.01).to_string(),
        "--starts",
        "50",
    ]);
    assert_eq!(code(&above), 0);
    assert_eq!(json(&above)["result"]["distinct_roots"], 0);
    let below = run(&[
        "probe",
        &problem("bratu.toml"),
        "--lambda",
        &(l * 0.8).to_string(),
        "--starts",
        "50",
    ]);
    assert_eq!(json(&below)["result"]["distinct_roots"], 2);
}

#[test]
fn sweep_bratu_mesh_table() {
    let out = run(&[
        "sweep",
        &problem("bratu.toml"),
        "--param",
        "n",
        "--values",
        "9,19",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&String::from_utf8_lossy(&out.stdout));
    assert_eq!(header[..2], ["n", "lambda_star"]);
    // repeated single solves of the same meshes
    for (row, n) in rows.iter().zip(["9", "19"]) {
        let file = TempDir::new().unwrap();
        let p = write(
            &file,
            "b.toml",
            &format!("kind = \"bratu-fd\"\nn = {n}\nL = 1.0\n"),
        );
        let single = json(&run(&["solve", &p]))["result"]["lambda_star"]
            .as_f64()
            .unwrap();
        assert_eq!(row[0], n);
        assert!((row[1].parse::<f64>().unwrap() - single).abs() <= 1e-12 * single);
    }
    assert!((rows[0][1].parse::<f64>().unwrap() - 3.49549329).abs() < 1e-7);
}

#[test]
fn sweep_power_flow_decreases_in_q() {
    let out = run(&[
        "sweep",
        &problem("power_flow.toml"),
        "--param",
        "q",
        "--values",
        "0.5,1,2,4",
    ]);
    assert_eq!(code(&out), 0);
    let (_, rows) = csv_rows(&String::from_utf8_lossy(&out.stdout));
    let l: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(l.len(), 4);
    assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
}

#[test]
fn single_value_sweep_has_one_row() {
    let out = run(&[
        "sweep",
        &problem("power_flow.toml"),
        "--param",
        "p",
        "--values",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(csv_rows(&String::from_utf8_lossy(&out.stdout)).1.len(), 1);
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "kind = \"bratu-fd\"\nn = \n");
    let out = run(&["solve", &bad]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let unknown = write(
        &dir,
        "u.toml",
        "kind = \"custom\"\nn = 1\n[expressions]\ng = [\"y\"]\nh = [\"1\"]\n",
    );
    assert_eq!(code(&run(&["solve", &unknown])), 2);
    assert_eq!(
        code(&run(&[
            "solve",
            &problem("bratu.toml"),
            "--strategy",
            "newton"
        ])),
        2
    );
    assert_eq!(code(&run(&["solve", "/nonexistent/problem.toml"])), 2);
    assert_eq!(code(&run(&["certify", &problem("bratu.toml")])), 2);
    assert_eq!(
        code(&run(&[
            "sweep",
            &problem("linear.toml"),
            "--param",
            "matrix",
            "--values",
            "x"
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "certify",
            &problem("bratu.toml"),
            "--x",
            "1,2",
            "--lambda",
            "1"
        ])),
        2
    );
}

#[test]
fn numerical_failure_exits_3() {
    let out = run(&[
        "trace",
        &problem("bratu.toml"),
        "--x",
        "0.5",
        "--lambda",
        "1",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn fixed_seed_gives_byte_identical_json() {
    let solve = |threads: &str| {
        run(&[
            "--threads",
            threads,
            "solve",
            &problem("power_flow.toml"),
            "--seed",
            "7",
        ])
        .stdout
    };
    let a = solve("1");
    assert_eq!(a, solve("1"));
    assert_eq!(a, solve("4"));
    let probe = |threads: &str| {
        run(&[
            "--threads",
            threads,
            "probe",
            &problem("bratu.toml"),
            "--lambda",
            "2",
            "--seed",
            "3",
        ])
        .stdout
    };
    assert_eq!(probe("1"), probe("3"));
}

#[test]
fn threads_env_is_honoured() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.json");
    let out = Command::new(BIN)
        .args([
            "--manifest",
            m.to_str().unwrap(),
            "solve",
            &problem("linear.toml"),
        ])
        .env("FOLDFINDER_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(manifest["metadata"]["threads"], 3);
    let bad = Command::new(BIN)
        .args(["solve", &problem("linear.toml")])
        .env("FOLDFINDER_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn pipeline_manifest_reproduces() {
    let dir = TempDir::new().unwrap();
    let runs: Vec<(Value, Value)> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("p{k}.json"));
            let man = dir.path().join(format!("m{k}.json"));
            let r = run(&[
                "--manifest",
                man.to_str().unwrap(),
                "pipeline",
                &problem("bratu.toml"),
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
            let read =
                |p: &Path| serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
            (read(&out), read(&man))
        })
        .collect();
    let stage = |m: &Value, name: &str| {
        m["stages"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["name"] == name)
            .unwrap()["output"]
            .clone()
    };
    let (a, b) = (&runs[0].1, &runs[1].1);
    assert_eq!(a["schema_version"], 1);
    assert_eq!(a["problem"]["sha256"], b["problem"]["sha256"]);
    assert_eq!(a["seed"], 11);
    let la = stage(a, "solve")["lambda_star"].as_f64().unwrap();
    let lb = stage(b, "solve")["lambda_star"].as_f64().unwrap();
    assert!((la - lb).abs() <= 1e-12);
    assert_eq!(
        stage(a, "certify")["verdict"],
        stage(b, "certify")["verdict"]
    );
    assert_eq!(stage(a, "certify")["verdict"], "certified-fold");
    assert_eq!(stage(a, "probe")["distinct_roots"], 0);
    for s in ["solve", "certify", "trace", "probe"] {
        assert!(a["metadata"]["wall_clock_seconds"][s].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(runs[0].0, runs[1].0);

    let from = dir.path().join("p0.json");
    let out = run(&[
        "certify",
        &problem("bratu.toml"),
        "--from",
        from.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
}

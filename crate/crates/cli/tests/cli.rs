use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lie_feynman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lie-feynman")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

/// Parses CSV text, checks the header, and returns every record as floats where possible.
fn reparse(text: &str, header: &[&str]) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let got: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(got, header);
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    for row in &rows {
        assert_eq!(row.len(), header.len());
    }
    rows
}

fn column(rows: &[csv::StringRecord], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse::<f64>().unwrap()).collect()
}

#[test]
fn validate_builtin_su2() {
    let o = lie_feynman(&["validate", "--group", "su2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = reparse(&stdout(&o), &["check", "residual", "passed"]);
    assert_eq!(rows.len(), 3);
    assert!(column(&rows, 1).iter().all(|&r| r == 0.0));
    assert!(stderr(&o).contains("validate: PASS"));
}

#[test]
fn malformed_quadruple_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.toml", "name = \"bad\"\ndim = 3\nstructure = [\n  [1, 2, 3, 1.0],\n  [2, 3],\n]\n");
    let o = lie_feynman(&["validate", "--group", &p]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 5") && err.contains("column 3"), "{err}");
}

#[test]
fn non_bi_invariant_algebra_fails_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "ax_b.toml", "dim = 2\nstructure = [[1, 2, 1, 1.0], [2, 1, 1, -1.0]]\n");
    let o = lie_feynman(&["validate", "--group", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not bi-invariant"));
}

#[test]
fn unknown_group_is_usage_error() {
    let o = lie_feynman(&["spectrum", "--group", "so3x", "--reps", "k<=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lie_feynman(&["spectrum", "--group", "u1", "--reps", "spin:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_labels_u1_and_su2() {
    let o = lie_feynman(&["spectrum", "--group", "u1", "--reps", "k<=2"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = reparse(&stdout(&o), &["block", "block_lambda", "index", "basis_label", "block_dim"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(column(&rows, 1), vec![0.0, 1.0, 1.0, 4.0, 4.0]);

    let o = lie_feynman(&["spectrum", "--group", "su2", "--reps", "spin:1,2"]);
    let rows = reparse(&stdout(&o), &["block", "block_lambda", "index", "basis_label", "block_dim"]);
    assert_eq!(column(&rows, 1), vec![0.75, 0.75, 2.0, 2.0, 2.0]);
    assert_eq!(&rows[2][3], "D[1;1,1]");
}

#[test]
fn u1_chernoff_is_exact_at_one_step() {
    let o = lie_feynman(&["chernoff-converge", "--group", "u1", "--reps", "k<=4", "--t", "1", "--n-list", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = reparse(
        &stdout(&o),
        &["n", "block_lambda", "error_fro", "error_op", "phase_drift", "wall_ms"],
    );
    assert_eq!(rows.len(), 5);
    for e in column(&rows, 2).into_iter().chain(column(&rows, 3)) {
        assert!(e <= 1e-10, "error {e}");
    }
}

#[test]
fn reproducible_runs_are_bit_identical() {
    let args = [
        "chernoff-converge",
        "--group",
        "su2",
        "--reps",
        "spin:1,2",
        "--n-list",
        "4,8",
        "--reproducible",
    ];
    let a = lie_feynman(&args);
    let b = lie_feynman(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let rows = reparse(
        &stdout(&a),
        &["n", "block_lambda", "error_fro", "error_op", "phase_drift", "wall_ms"],
    );
    assert!(column(&rows, 5).iter().all(|&w| w == 0.0));
}

#[test]
fn json_mirrors_csv_rows() {
    let csv_out = lie_feynman(&["validate", "--group", "torus:2"]);
    let json_out = lie_feynman(&["validate", "--group", "torus:2", "--format", "json"]);
    let rows = reparse(&stdout(&csv_out), &["check", "residual", "passed"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), rows.len());
    for (obj, row) in arr.iter().zip(&rows) {
        assert_eq!(obj["check"].as_str().unwrap(), &row[0]);
        assert_eq!(obj["residual"].as_f64().unwrap(), row[1].parse::<f64>().unwrap());
        assert_eq!(obj["passed"].as_bool().unwrap(), row[2].parse::<bool>().unwrap());
    }
}

#[test]
fn oracle_compare_u1_single_step() {
    let o = lie_feynman(&["oracle-compare", "--group", "u1", "--reps", "k<=1", "--tau-list", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = reparse(&stdout(&o), &["tau", "route", "block", "entry_re", "entry_im", "residual"]);
    assert!(rows.iter().any(|r| &r[1] == "gaussian") && rows.iter().any(|r| &r[1] == "oracle"));
}

#[test]
fn develop_writes_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "path.toml",
        "group = \"su2\"\nt_total = 1.0\nvelocities = [[0.3, -0.2, 0.5], [1.0, 0.1, -0.4]]\n",
    );
    let out = dir.path().join("dev.csv");
    let o = lie_feynman(&["develop", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = reparse(&fs::read_to_string(out).unwrap(), &["segment", "component", "v", "v_hat"]);
    assert_eq!(rows.len(), 6);
    // the first developed velocity equals the first velocity
    assert_eq!(column(&rows[..3], 2), column(&rows[..3], 3));
}

const V_FILE: &str = "block_lambda,index,re,im\n# constant plus cos(x)\n0,0,1,0\n1,0,0.5,0\n1,1,0.5,0\n";

#[test]
fn dyson_routes_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let v = write(dir.path(), "v.csv", V_FILE);
    let psi = write(dir.path(), "psi.csv", "block_lambda,index,re,im\n1,1,1,0\n");
    let o = lie_feynman(&["dyson", "--group", "u1", "--band", "2", "--V", &v, "--psi0", &psi, "--t", "0.5", "--m-max", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = reparse(&stdout(&o), &["m", "route", "term_norm", "route_gap"]);
    for r in rows.iter().filter(|r| r[0].parse::<usize>().unwrap() <= 3) {
        assert!(r[3].parse::<f64>().unwrap() <= 1e-8);
    }
}

#[test]
fn bad_coefficient_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let v = write(dir.path(), "v.csv", "block_lambda,index,re,im\n0,0,1\n");
    let o = lie_feynman(&["dyson", "--group", "u1", "--band", "2", "--V", &v, "--psi0", &v]);
    assert_eq!(o.status.code(), Some(2));
    let v = write(dir.path(), "v2.csv", "block_lambda,index,re,im\n2.5,0,1,0\n");
    let o = lie_feynman(&["dyson", "--group", "u1", "--band", "2", "--V", &v, "--psi0", &v]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cylinder_error_halves_per_doubling() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.csv", V_FILE);
    let factors = format!("{f},{f}");
    let o = lie_feynman(&[
        "cylinder",
        "--group",
        "u1",
        "--band",
        "2",
        "--times",
        "0.3333333333333333,0.6666666666666666",
        "--factors",
        &factors,
        "--x",
        "0.7",
        "--t",
        "1",
        "--n-list",
        "64,128,256",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = reparse(&stdout(&o), &["n", "s_chain_re", "s_chain_im", "u_chain_re", "u_chain_im", "error"]);
    let err = column(&rows, 5);
    assert!(err.windows(2).all(|w| w[0] / w[1] >= 1.3), "{err:?}");
}

#[test]
fn run_maps_config_to_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let cfg = write(
        dir.path(),
        "exp.toml",
        &format!(
            "command = \"chernoff-converge\"\ngroup = \"u1\"\nreproducible = true\n\n[parameters]\nreps = \"k<=3\"\nn_list = [1, 4]\n\n[output]\npath = {:?}\nformat = \"json\"\n",
            out.to_str().unwrap()
        ),
    );
    let o = lie_feynman(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);

    let bad = write(dir.path(), "bad.toml", "command = \"chernoff-converge\"\n[parameters]\nwarp = 9\n");
    assert_eq!(lie_feynman(&["run", "--config", &bad]).status.code(), Some(2));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kmvnmf"))
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn data_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn single_grid_point_gives_one_metrics_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "generator = blobs\nk = 3\ntheta = 0\n");
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(text.starts_with("# kmvnmf"), "provenance line missing");
    assert!(text.contains("scaling=none"));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    for metric in ["accuracy", "nmi", "rand_index", "mirkin_index"] {
        assert!(header.iter().any(|h| h == metric));
    }
    assert_eq!(reader.records().count(), 1);
    assert!(out.join("trace_gp000.csv").exists());
    let assignments = data_rows(&out.join("assignments_gp000.csv"));
    assert_eq!(assignments.len(), 60);
}

#[test]
fn paper_sigma_grid_gives_thirteen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "generator = rings\ngen_n = 40\nk = 2\nkernel = gaussian\n\
         sigma_exp = -2, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10\nmax_iter = 10\nrestarts = 2\n",
    );
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("metrics.csv")).len(), 13);
    assert!(out.join("trace_gp012.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "generator = blobs\nk = 3\nmethod = awmnmf\nlambda = 0.5, 1\nseeds = 3\nmax_iter = 25\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["run", "--seed", "3"], &cfg, &a).status.success());
    assert!(run(&["run", "--seed", "3"], &cfg, &b).status.success());
    for name in ["metrics.csv", "trace_gp000.csv", "trace_gp001.csv", "assignments_gp001.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let c = dir.path().join("c");
    assert!(run(&["run", "--seed", "4"], &cfg, &c).status.success());
    assert_ne!(fs::read(a.join("trace_gp000.csv")).unwrap(), fs::read(c.join("trace_gp000.csv")).unwrap());
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.contains("minmax"), "baselines must record their scaling");
}

#[test]
fn trace_columns_follow_views() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "generator = blobs\nk = 3\nmax_iter = 5\nrestarts = 1\nrel_tol = 0\n");
    let out = dir.path().join("out");
    assert!(run(&["run"], &cfg, &out).status.success());
    let mut reader = csv::Reader::from_path(out.join("trace_gp000.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["seed", "iteration", "objective", "q_view0", "q_view1", "beta_view0", "beta_view1"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let objectives: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(objectives.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn compare_writes_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "generator = blobs\nk = 3\ntheta = 0\nseeds = 2\n");
    let out = dir.path().join("out");
    let o = run(&["compare"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("comparison.csv"))
        .unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["metric", "sv_view0", "sv_view1", "cnmf", "mnmf", "awmnmf", "kernel_mvnmf"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.iter().map(|r| r[0].to_string()).collect::<Vec<_>>(), ["Acc", "NMI", "RI", "MI"]);
    for row in &rows {
        for cell in row.iter().skip(1) {
            let decimals = cell.split('.').nth(1).unwrap();
            assert_eq!(decimals.len(), 2, "{cell}");
        }
    }
}

#[test]
fn single_view_compare_has_equal_sv_and_cnmf() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "generator = blobs\ngen_dims = 4\nk = 3\ntheta = 0\nseeds = 2\nmax_iter = 30\n",
    );
    let out = dir.path().join("out");
    assert!(run(&["compare"], &cfg, &out).status.success());
    for row in data_rows(&out.join("comparison.csv")) {
        assert_eq!(&row[1], &row[2], "sv and cnmf differ: {row:?}");
    }
}

#[test]
fn gen_then_run_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = write_config(dir.path(), "gen.cfg", "generator = rings\ngen_n = 20\n");
    let data = dir.path().join("data");
    assert!(run(&["gen"], &gen_cfg, &data).status.success());
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        "views = data/view0.csv, data/view1.csv\nlabels = data/labels.txt\nmax_iter = 10\n",
    );
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("assignments_gp000.csv")).len(), 20);
}

#[test]
fn importance_ranks_linear_views_and_refuses_others() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "generator = blobs\nk = 3\ntheta = 0\nimportance_view = view1\n");
    let out = dir.path().join("out");
    assert!(run(&["importance"], &cfg, &out).status.success());
    let rows = data_rows(&out.join("importance_view1.csv"));
    assert_eq!(rows.len(), 5);
    let values: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));

    let cfg = write_config(dir.path(), "g.cfg", "generator = blobs\nk = 3\nkernel = gaussian\n");
    let o = run(&["importance"], &cfg, &dir.path().join("g"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("linear kernel"));
}

#[test]
fn exit_codes_follow_error_categories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let cfg = write_config(dir.path(), "typo.cfg", "generator = blobs\nlamda = 1\n");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("error (input)") && stderr.contains("typo.cfg:2"), "{stderr}");

    let o = run(&["run"], &dir.path().join("missing.cfg"), &out);
    assert_eq!(o.status.code(), Some(4));

    let cfg = write_config(dir.path(), "k.cfg", "generator = blobs\nk = 3\ngen_n = 6\n");
    let blocked = dir.path().join("file");
    fs::write(&blocked, "not a directory").unwrap();
    let o = run(&["run"], &cfg, &blocked);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = write_config(dir.path(), "sv.cfg", "generator = blobs\nk = 3\nmethod = sv\nview_index = 5\n");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gp000"), "grid-point context missing");

    let o = bin().args(["run"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "generator = blobs\nk = 3\nseed = 9\nmax_iter = 5\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["run"], &cfg, &a).status.success());
    assert!(run(&["run", "--seed", "9"], &cfg, &b).status.success());
    assert_eq!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    let text = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(text.contains("base_seed=9"));
}

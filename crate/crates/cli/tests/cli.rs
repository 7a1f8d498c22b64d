use std::path::Path;
use std::process::{Command, Output};

use kronpcg_cli::runlog::RunLogFile;

fn kronpcg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronpcg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_log(path: &Path) -> RunLogFile {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_header_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.kten");
    let b = dir.path().join("b.kten");
    for out in [&a, &b] {
        let o = kronpcg(&[
            "gen",
            "--problem",
            "p1",
            "--size",
            "50x100",
            "--out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert!(bytes.starts_with(b"KTEN 2 50 100\n"));
    assert_eq!(bytes.len(), "KTEN 2 50 100\n".len() + 8 * 5000);
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.kten.json").exists());
}

#[test]
fn seeded_random_problem_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<_> = ["x", "y", "z"].iter().map(|n| dir.path().join(n)).collect();
    for (out, seed) in outs.iter().zip(["7", "7", "8"]) {
        let o = kronpcg(&[
            "gen",
            "--problem",
            "p3",
            "--variant",
            "3d_128x64x8",
            "--seed",
            seed,
            "--out",
            p(out),
        ]);
        assert!(o.status.success());
    }
    let read = |i: usize| std::fs::read(&outs[i]).unwrap();
    assert_eq!(read(0), read(1));
    assert_ne!(read(0), read(2));
}

#[test]
fn too_small_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronpcg(&[
        "gen",
        "--problem",
        "p1",
        "--size",
        "2x2",
        "--out",
        p(&dir.path().join("t")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 3"));
}

#[test]
fn pinv_solve_with_boundary_flags() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("p2.kten");
    let log = dir.path().join("log.json");
    let dat = dir.path().join("run.dat");
    let sol = dir.path().join("u.kten");
    assert!(kronpcg(&["gen", "--problem", "p2", "--out", p(&h)])
        .status
        .success());
    let o = kronpcg(&[
        "solve",
        "--input",
        p(&h),
        "--bc",
        "x=dirichlet-neumann,y=periodic",
        "--uB",
        "x=0",
        "--eE",
        "x=-0.5",
        "--precond",
        "pinv",
        "--max-iter",
        "5",
        "--log",
        p(&log),
        "--dat",
        p(&dat),
        "--solution",
        p(&sol),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = read_log(&log);
    run.validate().unwrap();
    assert!(run.iterations_to(1e-10).is_some_and(|k| k <= 3));
    assert!(std::fs::read(&sol).unwrap().starts_with(b"KTEN 2 40 120\n"));
    let rows = std::fs::read_to_string(&dat).unwrap();
    assert_eq!(rows.lines().count(), 2 + run.iterations.len());

    // The sidecar carries the same BCs and face values.
    let log2 = dir.path().join("log2.json");
    let o = kronpcg(&[
        "solve",
        "--input",
        p(&h),
        "--spec",
        &format!("{}.json", p(&h)),
        "--precond",
        "pinv",
        "--max-iter",
        "5",
        "--log",
        p(&log2),
    ]);
    assert!(o.status.success());
    let a = run
        .iterations
        .iter()
        .map(|e| e.true_res)
        .collect::<Vec<_>>();
    let b = read_log(&log2)
        .iterations
        .iter()
        .map(|e| e.true_res)
        .collect::<Vec<_>>();
    assert_eq!(a, b);
}

#[test]
fn none_matches_identity() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("p1");
    assert!(
        kronpcg(&["gen", "--problem", "p1", "--size", "20x40", "--out", p(&h)])
            .status
            .success()
    );
    let mut series = Vec::new();
    for pc in ["none", "identity"] {
        let log = dir.path().join(format!("{pc}.json"));
        let o = kronpcg(&[
            "solve",
            "--input",
            p(&h),
            "--bc",
            "periodic",
            "--precond",
            pc,
            "--max-iter",
            "60",
            "--log",
            p(&log),
        ]);
        assert!(o.status.success());
        series.push(
            read_log(&log)
                .iterations
                .iter()
                .map(|e| e.computed_res)
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(series[0], series[1]);
}

#[test]
fn lowrank_is_refused_in_3d() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("p3");
    let o = kronpcg(&[
        "gen",
        "--problem",
        "p3",
        "--variant",
        "3d_128x64x8",
        "--out",
        p(&h),
    ]);
    assert!(o.status.success());
    let o = kronpcg(&[
        "solve",
        "--input",
        p(&h),
        "--bc",
        "periodic",
        "--precond",
        "lowrank:r=2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2D-only"));
}

#[test]
fn uncentered_singular_problem() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("ones");
    std::fs::write(
        &h,
        kronpcg_cli::tensor_file::encode(&kronpcg::DenseTensor::from_fn(
            kronpcg::Shape::d2(6, 7),
            |ix| 1.0 + ix[0] as f64,
        )),
    )
    .unwrap();
    let o = kronpcg(&[
        "solve",
        "--input",
        p(&h),
        "--bc",
        "neumann",
        "--center",
        "off",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));

    let log = dir.path().join("l.json");
    let o = kronpcg(&[
        "solve",
        "--input",
        p(&h),
        "--bc",
        "neumann",
        "--log",
        p(&log),
    ]);
    assert!(o.status.success());
    let run = read_log(&log);
    assert!(run.notes.iter().any(|n| n.contains("centered")));
    assert!(run.final_norms.relative_true_res.unwrap() < 1e-10);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(kronpcg(&[]).status.code(), Some(1));
    assert_eq!(kronpcg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        kronpcg(&["experiment", "exp9", "--out", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(
        kronpcg(&["solve", "--input", "/nonexistent/file", "--bc", "periodic"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(kronpcg(&["--help"]).status.code(), Some(0));
    assert_eq!(kronpcg(&["--version"]).status.code(), Some(0));
}

#[test]
fn malformed_precond_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("p1");
    assert!(
        kronpcg(&["gen", "--problem", "p1", "--size", "5x10", "--out", p(&h)])
            .status
            .success()
    );
    for bad in ["lowrank", "jacobi:omega=0.5", "ilu"] {
        let o = kronpcg(&[
            "solve",
            "--input",
            p(&h),
            "--bc",
            "periodic",
            "--precond",
            bad,
        ]);
        assert_eq!(o.status.code(), Some(1), "{bad}");
    }
}

#[test]
fn exp3_writes_nine_logs() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronpcg(&["experiment", "exp3", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let logs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    assert_eq!(logs.len(), 9);
    for l in &logs {
        let run = read_log(l);
        run.validate().unwrap();
        assert!(
            run.iterations_to(1e-9).is_some_and(|k| k <= 3),
            "{}",
            run.problem
        );
    }
    let mut csv = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    assert_eq!(
        csv.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "problem",
            "preconditioner",
            "iters_to_1e-9",
            "final_true_res",
            "ops_cum"
        ]
    );
    assert_eq!(csv.records().count(), 9);
}

#[test]
fn spectrum_csv() {
    let o = kronpcg(&["spectrum", "--n", "3", "--bc", "dirichlet", "--extrema"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let vals: Vec<f64> = text
        .lines()
        .skip(1)
        .take(3)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let expect = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
    for (v, e) in vals.iter().zip(expect) {
        assert!((v - e).abs() < 1e-14);
    }
    assert!(text.contains("sum,max,"));
}

#[test]
fn breakdown_exits_two_with_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("p1");
    let log = dir.path().join("l.json");
    assert!(kronpcg(&["gen", "--problem", "p1", "--out", p(&h)])
        .status
        .success());
    let o = kronpcg(&[
        "solve",
        "--input",
        p(&h),
        "--bc",
        "periodic",
        "--precond",
        "lowrank:r=4",
        "--max-iter",
        "300",
        "--log",
        p(&log),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let run = read_log(&log);
    assert!(run.breakdown.is_some());
    assert!(!run.iterations.is_empty());
}

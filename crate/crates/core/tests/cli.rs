use std::path::Path;
use std::process::{Command, Output};

fn flowstitch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowstitch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_solve_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    ok(&flowstitch(&["gen", "--n", "18", "--classes", "3", "--seed", "5", "--out", p(&inst)]));
    let again = dir.path().join("again.txt");
    ok(&flowstitch(&["gen", "--n", "18", "--classes", "3", "--seed", "5", "--out", p(&again)]));
    assert_eq!(std::fs::read(&inst).unwrap(), std::fs::read(&again).unwrap());

    let report = dir.path().join("report.csv");
    let r2c = dir.path().join("r2c");
    for (name, extra) in [
        ("plain", vec!["--stitch", "none"]),
        ("standard", vec!["--stitch", "standard", "--report", p(&report), "--r2c-dir", p(&r2c)]),
        ("windowed", vec!["--stitch", "windowed", "--window", "2"]),
        ("derived", vec!["--stitch", "windowed", "--eps", "2/5"]),
        ("pruned", vec!["--prune-eps", "1/2"]),
    ] {
        let sched = dir.path().join(format!("{name}.sched"));
        let mut args = vec!["solve", "--alg", "hdf", "--in", p(&inst), "--out", p(&sched)];
        args.extend(extra);
        let stdout = ok(&flowstitch(&args));
        assert!(stdout.starts_with("wF = "), "{name}: {stdout}");
        let verified = ok(&flowstitch(&["verify", "--in", p(&inst), "--schedule", p(&sched)]));
        assert!(verified.contains(stdout.trim_start_matches("wF = ").trim()), "{name}");
    }
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("k,n_k,Q,dangerous,frac_cost,cover_cost,ext_cost,wF_Sk,wF_bold"));
    assert_eq!(csv.lines().count(), 2);
    assert!(std::fs::read_dir(&r2c).unwrap().count() >= 1);
}

#[test]
fn verify_rejects_bad_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    std::fs::write(&inst, "0 2 1\n1 1 3\n").unwrap();
    let sched = dir.path().join("s.txt");
    // Job 1 runs before its release.
    std::fs::write(&sched, "1 0 1\n0 1 3\n").unwrap();
    let out = flowstitch(&["verify", "--in", p(&inst), "--schedule", p(&sched)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid schedule"));
}

#[test]
fn bad_parameters_fail() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    std::fs::write(&inst, "0 2 1\n1 1 3\n").unwrap();
    let out_path = dir.path().join("o.txt");
    let out = flowstitch(&["solve", "--alg", "magic", "--in", p(&inst), "--out", p(&out_path)]);
    assert!(!out.status.success());
    let out = flowstitch(&[
        "solve", "--stitch", "windowed", "--eps", "1/4", "--in", p(&inst), "--out", p(&out_path),
    ]);
    assert!(!out.status.success(), "n = 2 is too small for eps = 1/4");
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for seed in 0..3 {
        let f = corpus.join(format!("i{seed}.txt"));
        ok(&flowstitch(&["gen", "--n", "6", "--classes", "2", "--seed", &seed.to_string(), "--out", p(&f)]));
    }
    let csv = dir.path().join("bench.csv");
    let stdout = ok(&flowstitch(&[
        "bench", "--corpus", p(&corpus), "--algs", "exact,hdf,standard:exact", "--csv", p(&csv),
    ]));
    assert!(stdout.contains("standard:exact"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(text.lines().skip(1).all(|l| l.contains(",exact,")));
}

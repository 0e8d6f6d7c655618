use std::path::Path;
use std::process::{Command, Output};

fn rwre(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rwre"));
    c.args(args).env_remove("RWRE_SEED");
    if let Some(s) = seed_env {
        c.env("RWRE_SEED", s);
    }
    c.output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn identical_configs_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, extra) in [
        ("compare-dist", vec!["--n-list", "16,64", "--samples", "200"]),
        ("converge", vec!["--n-list", "16,64", "--envs", "4", "--dx", "1e-4", "--gamma", "0"]),
        ("walk", vec!["--n", "256"]),
        ("brox", vec!["--t", "0.5"]),
    ] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        for dir in [&a, &b] {
            let mut args = vec![cmd, "--seed", "42", "--out", dir.to_str().unwrap()];
            args.extend(&extra);
            let o = rwre(&args, None);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let files = csv_files(&a);
        assert!(!files.is_empty());
        assert_eq!(files, csv_files(&b));
        for f in &files {
            assert_eq!(read(&a, f), read(&b, f), "{cmd}/{f} differs");
        }
    }
}

#[test]
fn converge_defaults_write_one_summary_row_per_n() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = rwre(&["converge", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = String::from_utf8(read(&out, "convergence_summary.csv")).unwrap();
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "n,rms_error,mean_error,max_error");
    let ns: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["64", "256", "1024", "4096"]);
    let rows = String::from_utf8(read(&out, "convergence.csv")).unwrap();
    assert!(rows.starts_with("n,env_id,discrete_value,limit_value,abs_error\n"));
    assert_eq!(rows.lines().count(), 1 + 4 * 100);
}

#[test]
fn compare_dist_smoke_run_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cd");
    let start = std::time::Instant::now();
    let o = rwre(&["compare-dist", "--n", "100", "--samples", "100", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed().as_secs() < 30);
    let m: serde_json::Value = serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    for key in ["config", "seed_root", "version", "wall_clock_seconds", "convention", "n", "dx", "window", "horizon"] {
        assert!(m.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(m["config"]["n_list"], serde_json::json!([100]));
    let ks = String::from_utf8(read(&out, "ks.csv")).unwrap();
    assert!(ks.starts_with("comparison,n,statistic,size_a,size_b,threshold,reject_at_5pct,brox_censored\n"));
    let samples = String::from_utf8(read(&out, "samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("source,n,value"));
}

#[test]
fn seed_precedence_file_env_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let out = tmp.path().join("o");
    std::fs::write(&cfg, format!("command = env\nn = 64\nseed = 1\nout = {}\n", out.display())).unwrap();
    let cfg = cfg.to_str().unwrap();
    let seed_of = |o: &Output| -> u64 {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let m: serde_json::Value = serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
        m["seed_root"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&rwre(&["--config", cfg], None)), 1);
    assert_eq!(seed_of(&rwre(&["--config", cfg], Some("2"))), 2);
    assert_eq!(seed_of(&rwre(&["--config", cfg, "--seed", "3"], Some("2"))), 3);
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rwre(&["converge", "--n-list", "64,16"], None);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly increasing"));

    let o = rwre(&["frobnicate"], None);
    assert!(!o.status.success());

    let o = rwre(&["walk"], Some("not-a-number"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("RWRE_SEED"));

    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = rwre(&["env", "--n", "16", "--out", blocker.join("sub").to_str().unwrap()], None);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("env failed"));
}

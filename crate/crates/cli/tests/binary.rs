use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn catbreed(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catbreed"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&catbreed(&["--help"], dir.path())), 0);
    assert_eq!(code(&catbreed(&["--version"], dir.path())), 0);
    assert_eq!(code(&catbreed(&["pipeline", "--help"], dir.path())), 0);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--bogus"][..],
        &["simulate", "--alpha", "-1"],
        &["simulate", "--eta", "1.5"],
        &["simulate", "--state", "squeezed", "--alpha", "1"],
        &["pipeline", "--samples", "10"],
        &["simulate", "--grid", "1:2"],
        &["frobnicate"],
    ] {
        let o = catbreed(args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(code(&catbreed(&["simulate", "--config", "bad.cfg"], dir.path())), 1);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&catbreed(&["reconstruct", "missing.bin"], dir.path())), 3);
    assert_eq!(code(&catbreed(&["report", "--out", "nowhere"], dir.path())), 3);
    assert_eq!(code(&catbreed(&["simulate", "--config", "missing.cfg"], dir.path())), 3);
    fs::write(dir.path().join("junk.csv"), "x,y\n1,oops\n").unwrap();
    assert_eq!(code(&catbreed(&["breed", "junk.csv"], dir.path())), 3);
}

#[test]
fn staged_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "# small run\nsamples = 20000\nseed = 9\nmax_iters = 40\n").unwrap();
    let o = catbreed(&["simulate", "--config", "run.cfg", "--out", "s.bin"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("20000 samples"));

    let o = catbreed(&["breed", "s.bin", "--out", "bred", "--steps", "2"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("bred/gen1/samples.bin").exists() && d.join("bred/gen2/samples.bin").exists());

    let o = catbreed(&["reconstruct", "bred/gen1/samples.bin", "--config", "run.cfg", "--out", "rec"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("rec/density.txt").exists());

    let o = catbreed(&["quasiprob", "rec/density.txt", "--data", "bred/gen1/samples.bin", "--grid", "-4:4:21", "--out", "qp"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["wigner.csv", "q_reconstructed.csv", "q_empirical.csv"] {
        assert!(d.join("qp").join(f).exists(), "{f}");
    }
}

#[test]
fn pipeline_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["pipeline", "--samples", "10000", "--max-iters", "30", "--grid", "-4:4:21", "--out", "p", "--threads", "1"];
    let o = catbreed(&args, d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(d.join("p/report.json")).unwrap();
    let o = catbreed(&["report", "--out", "p", "--threads", "1"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(d.join("p/report.json")).unwrap(), first);
    assert!(d.join("p/timings.json").exists());
}

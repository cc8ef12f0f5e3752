use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn xrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xrt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = xrt(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn value(r: &BTreeMap<String, String>, key: &str) -> f64 {
    r.get(key).unwrap_or_else(|| panic!("no {key} in report")).parse().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn xray_then_adjoint_equals_normal_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.rgf");
    let g = dir.path().join("g.rsg");
    let a = dir.path().join("a.rgf");
    let nf = dir.path().join("nf.rgf");
    let csv = dir.path().join("f.csv");
    ok(&["phantom", "--config", s(&fixture("disc_phantom.cfg")), "--out", s(&f), "--csv", s(&csv)]);
    ok(&["xray", "--input", s(&f), "--out", s(&g)]);
    ok(&["adjoint", "--input", s(&g), "-p", "n=64", "--out", s(&a)]);
    ok(&["normal", "--input", s(&f), "--out", s(&nf)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&nf).unwrap());
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 64);
    assert_eq!(rows.lines().next().unwrap().split(',').count(), 64);
}

#[test]
fn invert_recovers_interior_bump_at_256() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.rgf");
    let nf = dir.path().join("nf.rgf");
    let r = dir.path().join("r.rgf");
    ok(&["phantom", "--config", s(&fixture("interior_bump_256.cfg")), "--out", s(&f)]);
    ok(&["normal", "--input", s(&f), "--config", s(&fixture("normal_256.cfg")), "--out", s(&nf)]);
    let out = ok(&["invert", "--input", s(&nf), "--truth", s(&f), "--out", s(&r)]);
    let err = value(&report(&out), "relative_error");
    assert!(err <= 0.05, "relative error {err}");
}

#[test]
fn riesz_potential_writes_field() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.rgf");
    let p = dir.path().join("p.rgf");
    ok(&["phantom", "--config", s(&fixture("disc_phantom.cfg")), "--out", s(&f)]);
    let out = ok(&["riesz", "--input", s(&f), "--config", s(&fixture("riesz.cfg")), "--out", s(&p)]);
    assert!(out.contains("alpha=1"));
    assert!(std::fs::metadata(&p).unwrap().len() > 64 * 64 * 8);
    let lap = dir.path().join("l.rgf");
    ok(&["riesz", "--input", s(&f), "-p", "op=laplacian", "-p", "s=0.5", "--out", s(&lap)]);
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = xrt(&["xray", "--input", "/nonexistent/f.rgf", "--out", s(&dir.path().join("g"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn unknown_key_and_bad_output_dir_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = xrt(&["phantom", "-p", "n=16", "-p", "region=ball:0,0,0.5", "-p", "colour=red", "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = xrt(&["phantom", "-p", "n=16", "-p", "region=ball:0,0,0.5", "--out", "/nonexistent/dir/f.rgf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_input_exits_2_and_overflow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("ok.rgf");
    ok(&["phantom", "-p", "n=16", "-p", "region=ball:0,0,0.5", "--out", s(&good)]);
    let mut bytes = std::fs::read(&good).unwrap();
    let last = bytes.len() - 8;
    bytes[last..].copy_from_slice(&f64::NAN.to_le_bytes());
    let bad = dir.path().join("nan.rgf");
    std::fs::write(&bad, &bytes).unwrap();
    let out = xrt(&["invert", "--input", s(&bad), "--out", s(&dir.path().join("r.rgf"))]);
    assert_eq!(out.status.code(), Some(2));

    let big = dir.path().join("big.rgf");
    ok(&["phantom", "-p", "n=16", "-p", "region=ball:0,0,0.5", "-p", "amplitude=1e306", "--out", s(&big)]);
    let out = xrt(&["invert", "--input", s(&big), "--out", s(&dir.path().join("r.rgf"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn lemma_verify_passes_and_rejects_hypothesis() {
    let out = ok(&["lemma-verify", "--config", s(&fixture("lemma_2d.cfg"))]);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 28);
    assert!(!out.contains("FAIL"));
    let out = ok(&["lemma-verify", "-p", "d=3", "-p", "alpha=5/2", "-p", "degree=6"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 84);
    let out = xrt(&["lemma-verify", "-p", "d=3", "-p", "alpha=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 - alpha"));
}

#[test]
fn lemma_verify_dump_lists_expansion_terms() {
    let out = ok(&["lemma-verify", "-p", "d=2", "-p", "alpha=1", "-p", "degree=1", "-p", "dump=true"]);
    assert!(out.lines().any(|l| l.starts_with("beta=(")));
}

#[test]
fn abel_tables_match_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("abel.txt");
    let out = ok(&["abel-tables", "--config", s(&fixture("abel.cfg")), "--out", s(&t)]);
    assert!(out.contains("oracle_mismatches=0"));
    let table = std::fs::read_to_string(&t).unwrap();
    assert_eq!(table.lines().count(), 9 * 41);
    // A_0^2 = (1!!)^2 = 1, A_0^4 = (3!!)^2 = 9
    assert!(table.lines().any(|l| l == "0 2 1"));
    assert!(table.lines().any(|l| l == "0 4 9"));
}

#[test]
fn roi_recon_central_ball_within_five_percent() {
    let out = ok(&["roi-recon", "--config", s(&fixture("central_ball.cfg"))]);
    let r = report(&out);
    assert!(value(&r, "relative_error") <= 0.05, "{out}");
}

#[test]
fn roi_recon_half_local_runs() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.rgf");
    let rep = dir.path().join("report.txt");
    let out = ok(&[
        "roi-recon",
        "--config",
        s(&fixture("half_local.cfg")),
        "--out",
        s(&rec),
        "--report",
        s(&rep),
    ]);
    assert_eq!(std::fs::read_to_string(&rep).unwrap(), out);
    let r = report(&out);
    assert!(value(&r, "relative_residual") < 1e-3);
    assert!(value(&r, "relative_error") < 0.5);
}

#[test]
fn spectrum_masked_is_worse_conditioned() {
    let out = ok(&["spectrum", "--config", s(&fixture("spectrum_32.cfg"))]);
    assert!(out.contains("masked_worse_conditioned=true"), "{out}");
}

#[test]
fn seismo_recovers_layer_difference() {
    let out = ok(&["seismo", "--config", s(&fixture("seismo.cfg"))]);
    let r = report(&out);
    assert!(value(&r, "relative_error") <= 0.05, "{out}");
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let rec = dir.path().join(format!("rec{threads}.rgf"));
        let rep = ok(&[
            "--threads",
            threads,
            "--seed",
            "7",
            "roi-recon",
            "--config",
            s(&fixture("half_local.cfg")),
            "-p",
            "noise=0.01",
            "-p",
            "probe_trials=2",
            "-p",
            "max_iter=200",
            "--out",
            s(&rec),
        ]);
        files.push((std::fs::read(&rec).unwrap(), rep));
    }
    assert_eq!(files[0], files[1]);
}

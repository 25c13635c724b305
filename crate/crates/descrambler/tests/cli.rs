use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

use descrambler::io::{load_matrix, load_network, save_matrix, save_network, Report};
use descrambler_core::netlab::glorot_init;
use descrambler_core::{Activation, DenseMatrix, FeedForwardNet, Layer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_descrambler")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn gen(dir: &Path, out: &str, n: &str, points: &str, seed: &str) {
    ok(dir, &["gen-deer", "--n", n, "--time-points", points, "--dist-points", points, "--seed", seed, "--out", out]);
}

#[test]
fn gen_deer_is_deterministic_and_shaped() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-deer", "--n", "10", "--seed", "1", "--out", "a"]);
    ok(d, &["gen-deer", "--n", "10", "--seed", "1", "--out", "b"]);
    for f in ["time.dmat", "dist.dmat", "inputs.dmat", "targets.dmat", "meta"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    assert_eq!(load_matrix(d.join("a/inputs.dmat")).unwrap().shape(), (64, 10));
    ok(d, &["gen-deer", "--n", "2000", "--time-points", "64", "--out", "big"]);
    assert_eq!(load_matrix(d.join("big/inputs.dmat")).unwrap().shape(), (64, 2000));
}

#[test]
fn gen_deer_without_out_is_usage_error() {
    let dir = tempdir().unwrap();
    let out = run(dir.path(), &["gen-deer", "--n", "10"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"));
    assert!(err.contains("error kind=usage code=2"));
}

#[test]
fn gen_deer_bad_config_exits_2() {
    let dir = tempdir().unwrap();
    let out = run(dir.path(), &["gen-deer", "--n", "10", "--r-min", "6", "--r-max", "2", "--out", "x"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error kind="));
}

#[test]
fn train_zero_epochs_is_seeded_init() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    gen(d, "data", "20", "16", "4");
    ok(d, &["train", "--data", "data", "--layers", "16:tansig,16:logsig", "--epochs", "0", "--seed", "9", "--out", "n"]);
    let net = load_network(d.join("n/net.net")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let init = glorot_init(16, &[(16, Activation::TanhSigmoid), (16, Activation::LogSigmoid)], &mut rng).unwrap();
    assert_eq!(net, init);
}

#[test]
fn train_is_bit_reproducible() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    gen(d, "data", "40", "16", "5");
    for out in ["a", "b"] {
        ok(d, &["train", "--data", "data", "--layers", "16:tansig,16:logsig", "--epochs", "3", "--seed", "2", "--out", out]);
    }
    for f in ["net.net", "net.layer1.dmat", "net.layer2.dmat", "report.txt", "losses.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let losses = fs::read_to_string(d.join("a/losses.csv")).unwrap();
    assert_eq!(losses.lines().count(), 1 + 4);
}

#[test]
fn train_topology_mismatch_exits_2() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    gen(d, "data", "20", "16", "4");
    let out = run(d, &["train", "--data", "data", "--layers", "16:tansig,8:logsig", "--out", "n"]);
    assert_eq!(code(&out), 2);
    let out = run(d, &["train", "--data", "data", "--layers", "16:relu,16:logsig", "--out", "n"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_divergence_exits_3() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    gen(d, "data", "40", "16", "4");
    let out = run(d, &["train", "--data", "data", "--layers", "16:purelin,16:purelin", "--lr", "1e300", "--epochs", "5", "--out", "n"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("code=3"));
}

/// Inputs whose layer-1 pre-activation signal is constant down each column.
fn constant_signal_fixture(d: &Path) {
    let w1 = DenseMatrix::from_fn(8, 8, |_, j| 0.1 + 0.05 * j as f64);
    let w2 = DenseMatrix::from_fn(8, 8, |i, j| if i == j { 1.0 } else { 0.0 });
    let net = FeedForwardNet::new(vec![Layer::new(w1, Activation::TanhSigmoid), Layer::new(w2, Activation::LogSigmoid)]).unwrap();
    save_network(&net, d.join("c/net.net")).unwrap();
    ok(d, &["gen-deer", "--n", "12", "--time-points", "8", "--dist-points", "8", "--out", "cdata"]);
}

#[test]
fn descramble_constant_signal_is_stationary() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    constant_signal_fixture(d);
    ok(d, &["descramble", "--net", "c/net.net", "--data", "cdata", "--out", "s"]);
    let r = Report::load(d.join("s/report.txt")).unwrap();
    assert_eq!(r.get("iterations"), Some("0"));
    assert_eq!(r.get("converged"), Some("true"));
    let eta: f64 = r.get("eta_final").unwrap().parse().unwrap();
    assert!(eta.abs() < 1e-9, "η = {eta}");
    assert_eq!(load_matrix(d.join("s/P.dmat")).unwrap(), DenseMatrix::identity(8));
}

#[test]
fn descramble_output_passes_analyze_checks() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    gen(d, "data", "60", "16", "6");
    ok(d, &["train", "--data", "data", "--layers", "16:tansig,16:logsig", "--epochs", "5", "--out", "n"]);
    ok(d, &["descramble", "--net", "n/net.net", "--data", "data", "--max-iters", "200", "--seed", "1", "--out", "s"]);
    for f in ["P.dmat", "q.dmat", "descrambled.dmat", "trace.csv", "report.txt"] {
        assert!(d.join("s").join(f).exists(), "{f}");
    }
    assert_eq!(ok(d, &["analyze", "det-sign", "--in", "s/P.dmat"]).trim(), "+1");
    let defect: f64 = ok(d, &["analyze", "orthogonality", "--in", "s/P.dmat"]).trim().parse().unwrap();
    assert!(defect < 1e-10);
    let r = Report::load(d.join("s/report.txt")).unwrap();
    let (start, end): (f64, f64) = (r.get("eta_initial").unwrap().parse().unwrap(), r.get("eta_final").unwrap().parse().unwrap());
    assert!(end < start);
    // post-activation wiretap with link smoothing writes the conjugate
    ok(d, &["descramble", "--net", "n/net.net", "--data", "data", "--position", "post", "--alpha", "0.5", "--max-iters", "50", "--out", "p"]);
    assert_eq!(load_matrix(d.join("p/next_conjugate.dmat")).unwrap().shape(), (16, 16));
    // diagonal functionals need no data
    ok(d, &["descramble", "--net", "n/net.net", "--layer", "2", "--functional", "mdns", "--max-iters", "100", "--out", "m"]);
    ok(d, &["descramble", "--net", "n/net.net", "--functional", "mds", "--d-kind", "fd", "--max-iters", "100", "--out", "m2"]);
}

#[test]
fn descramble_bad_requests_exit_2() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    constant_signal_fixture(d);
    for args in [
        &["descramble", "--net", "c/net.net", "--data", "cdata", "--layer", "99", "--out", "s"][..],
        &["descramble", "--net", "c/net.net", "--out", "s"][..],
        &["descramble", "--net", "c/net.net", "--data", "cdata", "--alpha", "1", "--out", "s"][..],
        &["descramble", "--net", "c/net.net", "--data", "cdata", "--functional", "frobnicate", "--out", "s"][..],
        &["descramble", "--net", "missing.net", "--data", "cdata", "--out", "s"][..],
    ] {
        assert_eq!(code(&run(d, args)), 2, "{args:?}");
    }
}

#[test]
fn analyze_identity_and_svd() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    save_matrix(&DenseMatrix::identity(4), d.join("eye.dmat")).unwrap();
    let out = run(d, &["analyze", "det-sign", "--in", "eye.dmat"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "+1");
    let m = DenseMatrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
    save_matrix(&m, d.join("m.dmat")).unwrap();
    ok(d, &["analyze", "svd", "--in", "m.dmat", "--out", "svd"]);
    assert_eq!(load_matrix(d.join("svd/U.dmat")).unwrap().shape(), (5, 4));
    assert_eq!(load_matrix(d.join("svd/V.dmat")).unwrap().shape(), (4, 4));
    let s: Vec<f64> = fs::read_to_string(d.join("svd/S.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(s.len(), 4);
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
    ok(d, &["analyze", "autocorr", "--in", "m.dmat", "--out", "ac.csv"]);
    ok(d, &["analyze", "spectrum2d", "--in", "m.dmat", "--out", "sp.dmat"]);
    assert_eq!(load_matrix(d.join("sp.dmat")).unwrap().shape(), (5, 4));
    let out = run(d, &["analyze", "block-average", "--in", "m.dmat", "--block-cols", "3", "--sv-keep", "1", "--out", "ba.dmat"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropped_cols=1"));
    assert_eq!(code(&run(d, &["analyze", "orthogonality", "--in", "m.dmat"])), 2);
}

#[test]
fn fourier_conjugate_of_circulant_is_diagonal() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let c = [1.0, -0.4, 0.25, 0.1, 0.0, 0.3, -0.2, 0.05];
    let m = DenseMatrix::from_fn(8, 8, |i, j| c[(i + 8 - j) % 8]);
    save_matrix(&m, d.join("circ.dmat")).unwrap();
    let stdout = ok(d, &["analyze", "fourier-conjugate", "--in", "circ.dmat", "--out", "fc"]);
    let r = Report::parse(&stdout, "stdout".as_ref()).unwrap();
    let off: f64 = r.get("offdiag_max").unwrap().parse().unwrap();
    assert!(off < 1e-8, "off-diagonal {off}");
    assert!(d.join("fc/magnitude.dmat").exists());
}

#[test]
fn heatmap_structure_and_errors() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    save_matrix(&DenseMatrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]).unwrap(), d.join("m.dmat")).unwrap();
    ok(d, &["heatmap", "--in", "m.dmat", "--out", "m.svg"]);
    let svg = fs::read_to_string(d.join("m.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 4);
    save_matrix(&DenseMatrix::from_fn(3, 3, |_, _| 2.5), d.join("c.dmat")).unwrap();
    ok(d, &["heatmap", "--in", "c.dmat", "--out", "c.svg"]);
    let svg = fs::read_to_string(d.join("c.svg")).unwrap();
    let fills: Vec<&str> = svg.split("fill=\"").skip(1).map(|s| s.split('"').next().unwrap()).collect();
    assert_eq!(fills.len(), 9);
    assert!(fills.iter().all(|f| *f == fills[0]));
    fs::write(d.join("nan.dmat"), "1 2\n1.0 NaN\n").unwrap();
    let out = run(d, &["heatmap", "--in", "nan.dmat", "--out", "n.svg"]);
    assert_eq!(code(&out), 2);
    assert!(!d.join("n.svg").exists());
}

#[test]
fn replica_design_fit_run() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let echo = ok(d, &["replica", "design", "--kind", "lowpass", "--order", "32", "--pass", "0.01", "--stop", "0.3", "--out", "lp.dmat", "--response", "lp.csv"]);
    assert!(echo.contains("kind = lowpass") && echo.contains("order = 32"));
    assert_eq!(load_matrix(d.join("lp.dmat")).unwrap().shape(), (33, 1));
    assert!(d.join("lp.dmat.spec").exists());
    assert_eq!(fs::read_to_string(d.join("lp.csv")).unwrap().lines().count(), 1025);
    ok(d, &["replica", "design", "--kind", "notch", "--order", "256", "--pass", "0.008", "--stop", "0.001", "--out", "notch.dmat"]);
    let out = run(d, &["replica", "design", "--kind", "notch", "--order", "8", "--pass", "0.008", "--stop", "0.001", "--out", "x.dmat"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("minimum order 208"));

    ok(d, &["gen-deer", "--n", "400", "--time-points", "320", "--t-max", "10", "--dist-points", "32", "--out", "data"]);
    let report = ok(d, &["replica", "fit", "--data", "data", "--lowpass", "lp.dmat", "--notch", "notch.dmat", "--out", "fit"]);
    let r = Report::parse(&report, "stdout".as_ref()).unwrap();
    assert!(r.get("lambda_grid_source").unwrap().starts_with("default"));
    assert_eq!(r.get("lambda_grid").unwrap().split(',').count(), 40);
    assert_eq!(fs::read_to_string(d.join("fit/lcurve.csv")).unwrap().lines().count(), 41);
    assert_eq!(load_matrix(d.join("fit/T.dmat")).unwrap().shape(), (32, 320));
    let user = ok(d, &["replica", "fit", "--data", "data", "--lowpass", "lp.dmat", "--notch", "notch.dmat", "--lambda-grid", "0.1,1,10", "--out", "fit2"]);
    assert!(user.contains("lambda_grid_source = user"));
    assert_eq!(code(&run(d, &["replica", "fit", "--data", "data", "--lowpass", "lp.dmat", "--notch", "notch.dmat", "--lambda-grid", "0,1", "--out", "f3"])), 2);

    ok(d, &["replica", "run", "--data", "data", "--trace", "3", "--lowpass", "lp.dmat", "--notch", "notch.dmat", "--transform", "fit/T.dmat", "--out", "p.csv"]);
    let csv = fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 32);
    let total: f64 = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn pipeline_writes_manifest() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["pipeline", "--n", "100", "--points", "16", "--epochs", "3", "--out", "run"]);
    let manifest = fs::read_to_string(d.join("run/manifest.txt")).unwrap();
    assert!(manifest.lines().count() >= 20);
    for line in manifest.lines() {
        assert!(d.join(line).exists(), "{line}");
    }
}

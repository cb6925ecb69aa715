use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use logconcave::lcmle::read_fit;
use logconcave::{certify, CertTolerances, CertificateReport, SortedSample};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logconcave")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `(x, stat, gamma) -> (value, n_minus_inf)` rows of a quantile CSV.
fn quantile_rows(text: &str) -> Vec<(f64, String, f64, f64, usize)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,stat,gamma,value,n_minus_inf"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].to_string(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
                f[4].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn fit_two_points_and_recertify() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let out = dir.path().join("fit.txt");
    fs::write(&input, "0.2\n0.7\n").unwrap();
    let o = run(&["fit", "--input", path(&input), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let fit = read_fit(text.as_bytes()).unwrap();
    assert_eq!(fit.knots(), &[0.2, 0.7]);
    assert!(fit.slopes()[0].abs() < 1e-12);
    assert!((fit.values()[0] + 0.5f64.ln()).abs() < 1e-12);
    // trailer row written by the CLI, and an independent re-certification
    let row = text.lines().last().unwrap();
    assert!(text.contains(CertificateReport::CSV_HEADER));
    assert!(CertificateReport::from_csv_row(row).unwrap().pass);
    let sample = SortedSample::new(&[0.2, 0.7]).unwrap();
    assert!(certify(&fit, &sample, &CertTolerances::default()).pass);
}

#[test]
fn fit_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.txt");
    fs::write(&one, "0.5\n").unwrap();
    let o = run(&["fit", "--input", path(&one)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    let junk = dir.path().join("junk.txt");
    fs::write(&junk, "0.5\nabc\n").unwrap();
    assert_eq!(run(&["fit", "--input", path(&junk)]).status.code(), Some(1));
    let missing = dir.path().join("missing.txt");
    assert_eq!(run(&["fit", "--input", path(&missing)]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--n", "abc"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--grid", "1:0:0.1"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--gammas", "0.5,0.2"]).status.code(), Some(1));
    assert_eq!(run(&["tailprob", "--tau", "1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn single_replication_rows_are_the_fit() {
    let o = run(&["simulate", "--n", "40", "--reps", "1", "--grid", "0:1:0.25", "--seed", "4"]);
    assert!(o.status.success());
    let rows = quantile_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 5 * 2 * 7);
    for chunk in rows.chunks(7) {
        assert!(chunk.iter().all(|r| r.3 == chunk[0].3 || (r.3.is_nan() && chunk[0].3.is_nan())));
    }
}

/// The concave fit of a flat density sits above it in the middle of the
/// hull: a constant fit on `[X_(1), X_(n)]` is already `-log(X_(n) - X_(1)) > 0`.
/// The outer band covers the truth and the median bias is small.
#[test]
fn uniform_bands_at_the_center() {
    let o = run(&[
        "simulate", "--family", "uniform:0,1", "--n", "150", "--reps", "500", "--grid", "0.5:0.5:1", "--seed", "8",
    ]);
    assert!(o.status.success());
    let rows = quantile_rows(&String::from_utf8(o.stdout).unwrap());
    let phi: Vec<_> = rows.iter().filter(|r| r.1 == "phi").collect();
    let q = |g: f64| phi.iter().find(|r| r.2 == g).unwrap().3;
    assert!(q(0.01) <= 0.0 && 0.0 <= q(0.99), "{} {}", q(0.01), q(0.99));
    assert!(q(0.5) > 0.0 && q(0.5) < 0.1, "{}", q(0.5));
    for w in phi.windows(2) {
        assert!(w[0].3 <= w[1].3);
    }
}

#[test]
fn gaussian_tail_point_is_reached_more_often_with_more_data() {
    let minus_inf = |n: &str| {
        let o = run(&[
            "simulate", "--family", "gaussian:0,1", "--n", n, "--reps", "200", "--grid", "3.5:3.5:1", "--seed", "21",
        ]);
        assert!(o.status.success());
        let rows = quantile_rows(&String::from_utf8(o.stdout).unwrap());
        rows.iter().find(|r| r.1 == "phi").unwrap().4
    };
    assert!(minus_inf("2000") < minus_inf("150"));
}

#[test]
fn tailprob_rows() {
    let o = run(&[
        "tailprob", "--family", "exponential:1", "--n", "100", "--tau", "2", "--reps", "2000", "--eps", "0,0.3",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,param,tail,observed,bound,mc_sigma"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], "prop2");
    assert!(rows[0][3].parse::<f64>().unwrap() <= 0.02);
    for r in rows.iter().filter(|r| r[0] == "chernov" && r[1] == "0") {
        assert_eq!(r[4], "1");
        assert!(r[3].parse::<f64>().unwrap() <= 1.0);
    }
}

#[test]
fn verify_passes_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.csv");
    let o = run(&["verify", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("suite,pass,detail"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")), "{text}");

    let o = run(&["verify", "--tamper"]);
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("certificates,false")), "{text}");
}

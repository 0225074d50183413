use std::path::Path;
use std::process::{Command, Output};

use ar1risk_core::{sample_moments, theoretical_time_averaged_moments, ModelParams};
use tempfile::TempDir;

fn ar1risk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ar1risk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ar1risk(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn read(p: &str) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Parses a CSV body into rows of fields, skipping the header.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn col(csv: &str, name: &str) -> Vec<f64> {
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    rows(csv).iter().map(|r| r[i].parse().unwrap()).collect()
}

fn json(p: &str) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

#[test]
fn simulate_degenerate_intensity_is_one() {
    let csv = ok(&[
        "simulate",
        "--alpha",
        "0",
        "--mu",
        "0",
        "--sigma2",
        "0",
        "--horizon",
        "20",
    ]);
    assert!(csv.starts_with("t,y,lambda,n_claims,s_total\n"));
    let lambda = col(&csv, "lambda");
    assert_eq!(lambda.len(), 21);
    assert!(lambda.iter().all(|l| *l == 1.0));
}

#[test]
fn simulate_anchors_first_row_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for p in [&a, &b] {
        ok(&["simulate", "--seed", "42", "--horizon", "30", "--out", p]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(col(&read(&a), "y")[0], 2.0);
    let c = path(&dir, "c.csv");
    ok(&["simulate", "--seed", "43", "--horizon", "30", "--out", &c]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn simulate_cumulative_counts_never_decrease() {
    let csv = ok(&[
        "simulate",
        "--sampling",
        "cumulative",
        "--horizon",
        "40",
        "--seed",
        "3",
    ]);
    let n = col(&csv, "n_claims");
    assert!(n.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn moments_rows() {
    let csv = ok(&[
        "moments",
        "--alpha",
        "0",
        "--mu",
        "0",
        "--sigma2",
        "0",
        "--theta",
        "1",
        "--horizon",
        "0",
    ]);
    assert_eq!(csv, "t,m1,m2,m3\n0,1.0,3.0,13.0\n");
    let csv = ok(&["moments", "--horizon", "12", "--paper-m3"]);
    let m1 = col(&csv, "m1");
    assert!((m1[1] - 5.55).abs() < 0.005);
    let (m3, paper) = (col(&csv, "m3"), col(&csv, "m3_paper"));
    assert_eq!(m3.len(), 13);
    assert!(m3.iter().zip(&paper).all(|(a, b)| a != b));
}

#[test]
fn estimate_recovers_truth_from_exact_moment_data() {
    // ten values whose power means equal the time-averaged moments of the
    // reference model over t = 1..10
    let mut values = vec![5.587594274907242; 8];
    values.extend([8.766024413869856, 24.531432514272478]);
    let truth = ModelParams::reference();
    let a = sample_moments(&values).unwrap();
    let target = theoretical_time_averaged_moments(&truth, 10).unwrap();
    for (got, want) in [a.a1, a.a2, a.a3].iter().zip(target) {
        assert!(
            (got / want - 1.0).abs() < 1e-13,
            "fixture drifted: {got} vs {want}"
        );
    }

    let dir = TempDir::new().unwrap();
    let data = path(&dir, "series.csv");
    let mut body = String::from("t,s_total\n");
    for (t, v) in values.iter().enumerate() {
        body.push_str(&format!("{},{v:?}\n", t + 1));
    }
    std::fs::write(&data, body).unwrap();
    let out = path(&dir, "fit.json");
    ok(&["estimate", "--data", &data, "--out", &out]);
    let fit = json(&out);
    for key in [
        "alpha_hat",
        "mu_hat",
        "sigma2_hat",
        "mu_prime_hat",
        "s2_hat",
        "residual",
        "converged",
        "identifiability_note",
    ] {
        assert!(fit.get(key).is_some(), "missing {key}");
    }
    assert!((fit["mu_prime_hat"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((fit["s2_hat"].as_f64().unwrap() - 0.625).abs() < 1e-6);
    assert_eq!(fit["converged"], true);
    assert_eq!(fit["identifiability_note"], true);
}

#[test]
fn estimate_on_simulated_series() {
    let dir = TempDir::new().unwrap();
    let mut mu_prime = Vec::new();
    for seed in 0..40u64 {
        let data = path(&dir, &format!("s{seed}.csv"));
        ok(&[
            "simulate",
            "--horizon",
            "50",
            "--seed",
            &seed.to_string(),
            "--out",
            &data,
        ]);
        // drop the t = 0 row: the estimator expects S_1..S_n
        let text = read(&data);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with("0,")).collect();
        std::fs::write(&data, body.join("\n") + "\n").unwrap();
        let fit: serde_json::Value = serde_json::from_str(&ok(&["estimate", "--data", &data])).unwrap();
        if fit["converged"] == true {
            mu_prime.push(fit["mu_prime_hat"].as_f64().unwrap());
        }
    }
    assert!(mu_prime.len() >= 30);
    let mean = mu_prime.iter().sum::<f64>() / mu_prime.len() as f64;
    assert!((mean - 2.0).abs() < 0.25, "replication mean mu' = {mean}");
}

#[test]
fn estimate_autocov_flag_switches_estimator() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "s.csv");
    ok(&["simulate", "--horizon", "60", "--seed", "8", "--out", &data]);
    let raw: serde_json::Value = serde_json::from_str(&ok(&["estimate", "--data", &data])).unwrap();
    let auto: serde_json::Value =
        serde_json::from_str(&ok(&["estimate", "--data", &data, "--use-autocov"])).unwrap();
    assert_eq!(raw["identifiability_note"], true);
    assert_eq!(auto["identifiability_note"], false);
    assert_ne!(raw["alpha_hat"], auto["alpha_hat"]);
}

#[test]
fn estimate_reports_the_bad_line() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "bad.csv");
    std::fs::write(&data, "t,s_total\n1,2.5\n2,3.0\n3,oops\n4,5.0\n").unwrap();
    let out = ar1risk(&["estimate", "--data", &data]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
    std::fs::write(&data, "t,claims\n1,2.5\n").unwrap();
    let err = String::from_utf8(ar1risk(&["estimate", "--data", &data]).stderr).unwrap();
    assert!(err.contains("s_total"), "{err}");
}

#[test]
fn table1_layout_and_single_replication() {
    let dir = TempDir::new().unwrap();
    let md = path(&dir, "t.md");
    ok(&[
        "table1", "--reps", "1", "--n-list", "5,20", "--seed", "4", "--out", &md,
    ]);
    let text = read(&md);
    for row in ["| α |", "| μ |", "| σ² |"] {
        assert!(text.contains(row), "missing {row} in\n{text}");
    }
    assert!(
        text.contains("n=5 estimation") && text.contains("n=20 MSE"),
        "{text}"
    );
    let csv = read(&path(&dir, "t.csv"));
    assert!(csv.starts_with("parameter,truth,n,estimation,deviation,mse\n"));
    // with one replication, MSE is the squared deviation
    for r in rows(&csv) {
        let (dev, mse): (f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!((dev * dev - mse).abs() <= 1e-12 * mse.max(1.0), "{r:?}");
    }
}

#[test]
fn bound_json_fields() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "b.csv");
    ok(&[
        "bound", "--theta", "0.5", "--c", "1", "--u-grid", "0:1:0.5", "--out", &out,
    ]);
    assert_eq!(json(&path(&dir, "b.json"))["R"], 1.0);

    let out = path(&dir, "s4.csv");
    ok(&[
        "bound",
        "--c",
        "6",
        "--truncation",
        "20",
        "--u-grid",
        "0:1:0.5",
        "--out",
        &out,
    ]);
    let s = json(&path(&dir, "s4.json"));
    assert_eq!(s["z"], 11.0);
    assert_eq!(s["divergence_flag"], true);
    assert_eq!(s["C_N"].as_array().unwrap().len(), 21);
}

#[test]
fn bound_halves_over_ln2_over_r() {
    let r: f64 = 1.0;
    let step = std::f64::consts::LN_2 / r;
    let grid = format!("0:{}:{step:?}", 6.0 * step);
    let csv = ok(&["bound", "--theta", "0.5", "--c", "1", "--u-grid", &grid]);
    let b = col(&csv, "bound");
    assert_eq!(b.len(), 6);
    for w in b.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() <= 1e-12);
    }
}

#[test]
fn bound_rejects_premium_equal_to_mean_claim() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "b.csv");
    let res = ar1risk(&["bound", "--theta", "0.5", "--c", "0.5", "--out", &out]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("no positive adjustment coefficient"));
    assert!(!Path::new(&out).exists());
}

#[test]
fn invalid_config_fails_before_writing() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "cfg.json");
    std::fs::write(&cfg, r#"{"params": {"alpha": 1.5}}"#).unwrap();
    let out = path(&dir, "sim.csv");
    let res = ar1risk(&["simulate", "--config", &cfg, "--out", &out]);
    assert!(!res.status.success());
    assert!(!Path::new(&out).exists());
    // the flag overrides the bad file value
    ok(&["simulate", "--config", &cfg, "--alpha", "0.5", "--out", &out]);
    assert!(Path::new(&out).exists());
}

#[test]
fn ruin_mc_properties() {
    let dir = TempDir::new().unwrap();
    let common = [
        "--alpha", "0.3", "--mu", "0.2", "--sigma2", "0.2", "--theta", "0.5",
    ];
    let mc = path(&dir, "mc.csv");
    let mut args = vec![
        "ruin-mc",
        "--c",
        "1.2",
        "--u-grid",
        "0:8:0.5",
        "--horizon",
        "60",
        "--reps",
        "4000",
    ];
    args.extend(common);
    args.extend(["--out", &mc]);
    ok(&args);
    let psi = col(&read(&mc), "psi_hat");
    assert!(psi.windows(2).all(|w| w[1] <= w[0]));

    let bound = path(&dir, "bound.csv");
    let mut args = vec!["bound", "--c", "1.2", "--u-grid", "0:8:0.5"];
    args.extend(common);
    args.extend(["--out", &bound]);
    ok(&args);
    for (p, b) in psi.iter().zip(col(&read(&bound), "bound")) {
        assert!(*p <= b);
    }

    let mut args = vec![
        "ruin-mc",
        "--c",
        "1.2",
        "--u-grid",
        "1000000:1000001:1",
        "--reps",
        "200",
    ];
    args.extend(common);
    assert_eq!(col(&ok(&args), "psi_hat"), vec![0.0]);
    let summary = json(&path(&dir, "mc.json"));
    assert!(summary.get("fitted_slope").is_some());
}

#[test]
fn thread_count_does_not_change_bytes() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = path(&dir, &format!("r{threads}.csv"));
        ok(&[
            "ruin-mc",
            "--c",
            "6",
            "--u-grid",
            "0:40:4",
            "--reps",
            "500",
            "--threads",
            threads,
            "--seed",
            "11",
            "--out",
            &out,
        ]);
        outputs.push((read(&out), read(&path(&dir, &format!("r{threads}.json")))));
    }
    assert_eq!(outputs[0], outputs[1]);
}

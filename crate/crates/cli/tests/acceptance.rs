//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Monte Carlo expectations are computed here from the simulator,
//! independently of the closed-form moment code they check.

use std::process::{Command, ExitCode};
use std::time::Instant;

use ar1risk_core::estimation::moment_residuals;
use ar1risk_core::ruin::{exponential_claim_mgf, NewtonOptions};
use ar1risk_core::series::term_ratio;
use ar1risk_core::simulator::{draw_stationary_y, replicate};
use ar1risk_core::*;
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mild() -> ModelParams {
    ModelParams::new(0.3, 0.2, 0.2, 0.5).unwrap()
}

/// Mean and standard error of a sample.
fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Number of standard errors between a sample mean and `target`.
fn z_of(x: &[f64], target: f64) -> f64 {
    let (m, se) = mean_se(x);
    (m - target).abs() / se
}

const MC_PATHS: u64 = 2_000_000;
const MC_TIMES: [u32; 3] = [1, 5, 10];

/// `S_t` at t = 1, 5, 10 from marginal-mode paths with a stationary start.
fn marginal_claims(params: &ModelParams) -> Vec<[f64; 3]> {
    let cfg = SimConfig::new(*params, 10, 2024)
        .with_init(InitMode::StationaryDraw)
        .with_sampling(SamplingMode::Marginal);
    replicate(cfg.seed, MC_PATHS, |_, rng| {
        let r = sample_aggregate_series(&cfg, rng).unwrap();
        MC_TIMES.map(|t| r[t as usize - 1].s_total)
    })
}

fn criterion_1() -> Outcome {
    let law = stationary_law(&ModelParams::reference()).unwrap();
    check(law.mean_y == 2.0, format!("mean_y = {:?}", law.mean_y))
}

fn criterion_2(paths: &[[f64; 3]]) -> Outcome {
    let p = mild();
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, &t) in MC_TIMES.iter().enumerate() {
        let ms = moment_set(&p, t).unwrap();
        let s: Vec<f64> = paths.iter().map(|r| r[k]).collect();
        let zs: Vec<f64> = [ms.m1, ms.m2, ms.m3]
            .iter()
            .enumerate()
            .map(|(j, target)| {
                let pw: Vec<f64> = s.iter().map(|v| v.powi(j as i32 + 1)).collect();
                z_of(&pw, *target)
            })
            .collect();
        pass &= zs[0] <= 3.0 && zs[1] <= 5.0 && zs[2] <= 5.0;
        detail.push(format!("t={t}: |z| = {:.2}/{:.2}/{:.2}", zs[0], zs[1], zs[2]));
    }
    check(pass, format!("{} (limits 3/5/5 SE)", detail.join(", ")))
}

fn criterion_3(paths: &[[f64; 3]]) -> Outcome {
    let p = mild();
    let law = p.stationary_law().unwrap();
    let s0 = replicate(77, MC_PATHS, |_, rng| {
        let lambda = draw_stationary_y(&law, rng).exp();
        simulator::sample_claims_at(0, lambda, p.theta, rng)
            .unwrap()
            .1
            .powi(3)
    });
    let s1: Vec<f64> = paths.iter().map(|r| r[0].powi(3)).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (t, cubes) in [(0u32, &s0), (1, &s1)] {
        let z_paper = z_of(cubes, third_moment_s_paper(&p, t).unwrap());
        let z_derived = z_of(cubes, third_moment_s(&p, t).unwrap());
        pass &= z_paper > 10.0 && z_derived <= 5.0;
        detail.push(format!(
            "t={t}: printed {z_paper:.1} SE, derived {z_derived:.2} SE"
        ));
    }
    let degenerate = ModelParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
    let (derived, printed) = (
        third_moment_s(&degenerate, 0).unwrap(),
        third_moment_s_paper(&degenerate, 0).unwrap(),
    );
    pass &= derived == 13.0 && printed == 1.0;
    detail.push(format!("degenerate derived {derived:?} vs printed {printed:?}"));
    check(pass, detail.join(", "))
}

fn criterion_4() -> Outcome {
    let n_list = [5, 20, 50];
    let report = replication_study(
        &ModelParams::reference(),
        &n_list,
        500,
        20240601,
        Estimator::Moments,
        &SolverOptions::default(),
    )
    .unwrap();
    println!("{}", report.to_markdown());
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["mu_prime", "s2"] {
        let cells: Vec<_> = n_list.iter().map(|n| report.cell(name, *n).unwrap()).collect();
        let decreasing = cells.windows(2).all(|w| w[1].mse < w[0].mse);
        let approaching = cells[2].deviation.abs() < cells[0].deviation.abs();
        pass &= decreasing && approaching;
        detail.push(format!(
            "{name}: mean {} deviation {} MSE {}",
            cells
                .iter()
                .map(|c| format!("{:.4}", c.estimation))
                .collect::<Vec<_>>()
                .join("/"),
            cells
                .iter()
                .map(|c| format!("{:+.4}", c.deviation))
                .collect::<Vec<_>>()
                .join("/"),
            cells
                .iter()
                .map(|c| format!("{:.4}", c.mse))
                .collect::<Vec<_>>()
                .join("/")
        ));
    }
    let alpha50 = report.cell("alpha", 50).unwrap().estimation;
    detail.push(format!(
        "alpha_hat(n=50) = {alpha50:.4} [manifold-dependent; published anchor 0.60063 not asserted]"
    ));
    check(pass, detail.join("; "))
}

fn criterion_5() -> Outcome {
    let truth = ModelParams::reference();
    let n = 50;
    let [a1, a2, a3] = theoretical_time_averaged_moments(&truth, n).unwrap();
    let a = SampleMoments {
        a1,
        a2,
        a3,
        n: n as usize,
    };
    let at_truth = moment_residuals(&a, truth.theta, truth.alpha, truth.mu, truth.sigma2).unwrap();
    let at_truth_norm = at_truth.iter().map(|r| r * r).sum::<f64>().sqrt();
    let fit = solve_moments(&a, truth.theta, &SolverOptions::default()).unwrap();
    let law = truth.stationary_law().unwrap();
    let norms: Vec<f64> = [-0.5, 0.0, 0.3, 0.6, 0.9]
        .iter()
        .map(|alpha: &f64| {
            let mu = law.mean_y * (1.0 - alpha);
            let sigma2 = law.var_y * (1.0 - alpha * alpha);
            let r = moment_residuals(&a, truth.theta, *alpha, mu, sigma2).unwrap();
            r.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    let spread =
        norms.iter().cloned().fold(f64::MIN, f64::max) - norms.iter().cloned().fold(f64::MAX, f64::min);
    let recovered = (fit.mu_prime_hat - 2.0).abs() < 1e-6 && (fit.s2_hat - 0.625).abs() < 1e-6;
    check(
        at_truth_norm <= 1e-12 && spread <= 1e-10 && recovered && fit.converged,
        format!(
            "residual at truth {at_truth_norm:.1e}, manifold spread {spread:.1e}, fit (mu', s2) = ({:.9}, {:.9})",
            fit.mu_prime_hat, fit.s2_hat
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for theta in [0.2, 0.5, 1.0] {
        for ratio in [1.1, 2.0, 5.0] {
            let c = theta * ratio;
            let closed = adjustment_coefficient_closed(c, theta).unwrap().r_value;
            let newton = adjustment_coefficient_newton(
                exponential_claim_mgf(theta),
                c,
                theta,
                &NewtonOptions::default(),
            )
            .unwrap()
            .r_value;
            worst = worst.max((closed - newton).abs());
        }
    }
    let boundary = adjustment_coefficient_closed(0.5, 0.5);
    let boundary_newton =
        adjustment_coefficient_newton(exponential_claim_mgf(0.5), 0.5, 0.5, &NewtonOptions::default());
    let rejected = matches!(boundary, Err(RiskError::NoPositiveSolution { .. }))
        && matches!(boundary_newton, Err(RiskError::NoPositiveSolution { .. }));
    check(
        worst <= 1e-12 && rejected,
        format!("max |newton - closed| = {worst:.1e} over 9 points, c = theta rejected: {rejected}"),
    )
}

fn criterion_7() -> Outcome {
    let chk = mgf_identity_check(&mild(), 1.0, 1.2, -0.5, 5, 1_000_000, 7).unwrap();
    check(
        chk.z_score.abs() <= 3.0,
        format!(
            "MC {:.6} +- {:.1e} vs closed {:.6}, z = {:.2}",
            chk.mc_mean, chk.mc_se, chk.closed, chk.z_score
        ),
    )
}

fn criterion_8() -> Outcome {
    let p = mild();
    let c = 1.5 * net_profit_min_premium(&p).unwrap();
    let grid: Vec<f64> = (0..48).map(|i| 0.25 * f64::from(i)).collect();
    let rep = bound_vs_mc_report(&p, c, &grid, 100, 200_000, 10, 8, InitMode::StationaryMean).unwrap();
    let r = rep.adjustment.r_value;
    let mc = rep.mc_comparison.as_ref().unwrap();
    let under = mc
        .estimates
        .iter()
        .zip(&rep.bound_values)
        .all(|(e, b)| e.psi_hat <= *b);
    let slope = mc.fitted_slope;
    let pass = under && slope.is_some_and(|s| s <= -0.8 * r);
    check(
        pass,
        format!(
            "c = {c:.4}, R = {r:.4}, slope {} over {} points (limit {:.4}), C_10 = {:.4}, psi_hat(0) = {:.4}, all under bound: {under}",
            slope.map_or("none".to_string(), |s| format!("{s:.4}")),
            mc.fit_points,
            -0.8 * r,
            rep.constant(),
            mc.estimates[0].psi_hat
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = ModelParams::reference();
    let law = p.stationary_law().unwrap();
    let s = exp_lambda_series(&p, 11.0, 20).unwrap();
    let increasing = s.partial_sums.windows(2).all(|w| w[1] > w[0]);
    let worst = s
        .terms
        .windows(2)
        .enumerate()
        .map(|(n, w)| ((w[1] / w[0]) / term_ratio(&law, 11.0, n as u32) - 1.0).abs())
        .fold(0.0, f64::max);
    check(
        s.divergence_flag && increasing && worst <= 1e-12,
        format!(
            "flag {}, partial sums strictly increasing {increasing}, max ratio rel. error {worst:.1e}",
            s.divergence_flag
        ),
    )
}

fn run_cli(args: &[String]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ar1risk"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_10() -> Outcome {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let data = p("data.csv");
    if let Err(e) = run_cli(&["simulate", "--horizon", "50", "--seed", "5", "--out", &data].map(String::from))
    {
        return check(false, e);
    }
    let commands: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "simulate",
            vec!["simulate", "--horizon", "200", "--init", "stationary-draw"],
            vec!["csv"],
        ),
        (
            "simulate-cumulative",
            vec!["simulate", "--horizon", "200", "--sampling", "cumulative"],
            vec!["csv"],
        ),
        (
            "moments",
            vec!["moments", "--horizon", "30", "--paper-m3"],
            vec!["csv"],
        ),
        (
            "estimate",
            vec!["estimate", "--data", &data, "--multistart"],
            vec!["json"],
        ),
        ("table1", vec!["table1", "--reps", "40"], vec!["md", "csv"]),
        (
            "bound",
            vec![
                "bound", "--c", "6", "--mc", "--reps", "2000", "--u-grid", "0:30:2",
            ],
            vec!["csv", "json"],
        ),
        (
            "ruin-mc",
            vec!["ruin-mc", "--c", "6", "--reps", "2000", "--u-grid", "0:30:2"],
            vec!["csv", "json"],
        ),
    ];
    let mut mismatched = Vec::new();
    for (name, args, exts) in &commands {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "4", "4"].iter().enumerate() {
            let stem = format!("{name}-{run}");
            let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            let out = p(&format!("{stem}.{}", exts[0]));
            full.extend(["--seed", "99", "--threads", threads, "--out", &out].map(String::from));
            if let Err(e) = run_cli(&full) {
                return check(false, e);
            }
            let bytes: Vec<Vec<u8>> = exts
                .iter()
                .map(|ext| std::fs::read(p(&format!("{stem}.{ext}"))).unwrap_or_default())
                .collect();
            if bytes.iter().any(Vec::is_empty) {
                return check(false, format!("{name}: missing output"));
            }
            outputs.push(bytes);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatched.push(*name);
        }
    }
    check(
        mismatched.is_empty(),
        format!(
            "{} commands x threads {{1, 4, 4}}, mismatched: {:?}",
            commands.len(),
            mismatched
        ),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut results = Vec::new();
    let mut record = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let line = format!(
            "{} criterion {id} ({name}): {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        println!("{line}");
        results.push((o.pass, line));
    };

    record(1, "stationary anchor", &mut criterion_1);
    let paths = marginal_claims(&mild());
    record(2, "moment oracle", &mut || criterion_2(&paths));
    record(3, "third-moment erratum", &mut || criterion_3(&paths));
    drop(paths);
    record(4, "estimator consistency", &mut criterion_4);
    record(5, "fixed point and manifold", &mut criterion_5);
    record(6, "adjustment coefficient", &mut criterion_6);
    record(7, "MGF identity", &mut criterion_7);
    record(8, "Lundberg decay", &mut criterion_8);
    record(9, "series divergence", &mut criterion_9);
    record(10, "determinism", &mut criterion_10);

    println!("\nacceptance summary ({:.1}s):", start.elapsed().as_secs_f64());
    for (_, line) in &results {
        println!("  {line}");
    }
    if results.iter().all(|r| r.0) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//!
//! `ACCEPTANCE_ONLY=3,7` restricts the run to the listed criteria.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use widthest::caps_proj::{project_capped_simplex, project_spectahedron};
use widthest::estimators::{EstimationConfig, RobustConfig};
use widthest::geometry::{BodySpec, ConvexBody, InnerNorm};
use widthest::harness::fixtures::{check_qco_type2, qco_power_fixture, qco_quadratic_fixture};
use widthest::harness::{
    check_non_qco_witness, exact_width_ellipsoid, mc_risk, Adversary, BodyEntry, EstimatorId,
    ExperimentPlan, NoiseKind, RiskRow, SignalRule, Suite,
};
use widthest::linalg::{symmetric_eigen, SymmetricMatrix};
use widthest::qfm::{qfm_box_sdp, qfm_bruteforce, qfm_ellipsoid, qfm_norm_image, EllipsoidOracle};
use widthest::rng;
use widthest::width_sdp::{solve_width_sdp, WidthSdpConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn random_orthogonal(r: &mut rng::Stream, n: usize) -> DMatrix<f64> {
    let g = rng::gaussian_vector(r, n * n);
    DMatrix::from_column_slice(n, n, g.as_slice()).qr().q()
}

fn random_psd(r: &mut rng::Stream, n: usize) -> SymmetricMatrix {
    let g = rng::gaussian_vector(r, n * n);
    let b = DMatrix::from_column_slice(n, n, g.as_slice());
    SymmetricMatrix::new(&b * b.transpose()).unwrap()
}

/// θ by bisection on the monotone capped sum, independent of the breakpoint scan.
fn capped_simplex_bisection(v: &[f64], k: usize) -> Vec<f64> {
    let sum = |t: f64| v.iter().map(|x| (x - t).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > k as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|x| (x - t).clamp(0.0, 1.0)).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(1, &[]);
    let mut worst_feas: f64 = 0.0;
    let mut worst_obj: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(1..=12);
        let k = r.random_range(0..=n);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let res = project_capped_simplex(&v, k).unwrap();
        let box_viol = res
            .w
            .iter()
            .map(|w| (-w).max(w - 1.0).max(0.0))
            .fold(0.0, f64::max);
        let sum_viol = (res.w.iter().sum::<f64>() - k as f64).abs();
        worst_feas = worst_feas.max(box_viol).max(sum_viol);
        let oracle = capped_simplex_bisection(&v, k);
        let obj = |w: &[f64]| 0.5 * w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        worst_obj = worst_obj.max((obj(&res.w) - obj(&oracle)).abs());
    }
    let t = start.elapsed();
    outcome(
        worst_feas <= 1e-9 && worst_obj <= 1e-8 && within(t, 5.0),
        format!(
            "max feasibility error {worst_feas:.1e}, max objective gap {worst_obj:.1e}, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(2, &[]);
    let mut worst_eig: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    let mut expansions = 0usize;
    for _ in 0..100 {
        let n = r.random_range(1..=8);
        let k = r.random_range(0..=n);
        let y = random_psd(&mut r, n);
        let shifted =
            SymmetricMatrix::new(y.as_matrix() - DMatrix::identity(n, n) * 0.5 * n as f64).unwrap();
        let p = project_spectahedron(&shifted, k).unwrap();
        let spec = symmetric_eigen(p.as_matrix()).unwrap();
        worst_eig = worst_eig.max(
            spec.values
                .iter()
                .map(|v| (-v).max(v - 1.0).max(0.0))
                .fold(0.0, f64::max),
        );
        worst_trace = worst_trace.max((p.trace() - k as f64).abs());

        let d: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let pd = project_spectahedron(&SymmetricMatrix::from_diagonal(&d), k).unwrap();
        let cs = project_capped_simplex(&d, k).unwrap();
        let diag_err =
            (pd.as_matrix() - DMatrix::from_diagonal(&DVector::from_column_slice(&cs.w))).amax();
        worst_diag = worst_diag.max(diag_err);

        for _ in 0..1000 {
            let q = random_orthogonal(&mut r, n);
            let raw: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..2.0)).collect();
            let lam = project_capped_simplex(&raw, k).unwrap().w;
            let w = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&lam)) * q.transpose();
            let lhs = (p.as_matrix() - &w).norm();
            let rhs = (shifted.as_matrix() - &w).norm();
            if lhs > rhs + 1e-9 {
                expansions += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst_eig <= 1e-10 && worst_trace <= 1e-8 && worst_diag <= 1e-12 && expansions == 0 && within(t, 10.0),
        format!(
            "eigenvalue violation {worst_eig:.1e}, trace error {worst_trace:.1e}, diagonal mismatch {worst_diag:.1e}, \
             {expansions} expansions, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(3, &[]);

    let mut worst_ell: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..=10);
        let m =
            SymmetricMatrix::new(random_psd(&mut r, n).as_matrix() + DMatrix::identity(n, n) * 0.1)
                .unwrap();
        let x = random_psd(&mut r, n);
        let res = qfm_ellipsoid(&m, &x).unwrap();
        let spec = symmetric_eigen(m.as_matrix()).unwrap();
        let root_inv = &spec.vectors
            * DMatrix::from_diagonal(&spec.values.map(|v| 1.0 / v.sqrt()))
            * spec.vectors.transpose();
        let lam = symmetric_eigen(&(&root_inv * x.as_matrix() * &root_inv))
            .unwrap()
            .values[0];
        worst_ell = worst_ell.max((res.value - lam).abs() / lam.max(1.0));
    }

    let mut box_ok = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=15);
        let h: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
        let x = random_psd(&mut r, n);
        let res = qfm_box_sdp(&h, &x, 200, r.random()).unwrap();
        let mut vertex_max: f64 = 0.0;
        for mask in 0u32..(1 << n) {
            let v = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { h[i] } else { -h[i] });
            vertex_max = vertex_max.max(x.quadratic_form(&v));
        }
        let upper = res.relax_upper.unwrap();
        if vertex_max >= res.value * (1.0 - 1e-12)
            && res.value >= (2.0 / std::f64::consts::PI - 0.02) * upper
        {
            box_ok += 1;
        }
    }

    let mut norm_ok = 0;
    for i in 0..100 {
        let n = r.random_range(2..=6);
        let g = rng::gaussian_vector(&mut r, n * n);
        let a = DMatrix::from_column_slice(n, n, g.as_slice()) + DMatrix::identity(n, n) * 2.0;
        let inner = if i % 2 == 0 {
            InnerNorm::Lp { p: 4.0 }
        } else {
            InnerNorm::Linf
        };
        let x = random_psd(&mut r, n);
        let res = qfm_norm_image(&a, inner, &x, 200, r.random()).unwrap();
        let body = ConvexBody::norm_image(a, inner).unwrap();
        let brute = qfm_bruteforce(&body, &x, 64, r.random()).unwrap();
        if res.value >= brute.value / res.kappa.unwrap() {
            norm_ok += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        worst_ell <= 1e-9 && box_ok >= 190 && norm_ok >= 90 && within(t, 300.0),
        format!(
            "ellipsoid max relative gap {worst_ell:.1e}, box {box_ok}/200, norm image {norm_ok}/100, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(4, &[]);
    let cfg = WidthSdpConfig::default();
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..50 {
        let n = r.random_range(2..=16);
        let mut axes: Vec<f64> = (0..n).map(|_| r.random_range(0.1..4.0)).collect();
        axes.sort_by(|a, b| b.total_cmp(a));
        let m = r.random_range(1..n);
        let body = ConvexBody::ellipsoid(axes.clone()).unwrap();
        let oracle = EllipsoidOracle::new(body.as_ellipsoid().unwrap().clone());
        let res = solve_width_sdp(&body, m, &oracle, &cfg, i).unwrap();
        let sup = qfm_ellipsoid(
            &SymmetricMatrix::from_diagonal(&axes.iter().map(|a| a.powi(-2)).collect::<Vec<_>>()),
            &res.x_star2,
        )
        .unwrap()
        .value;
        let d_tilde = body.diameter_bound();
        let dm = exact_width_ellipsoid(&axes, m).unwrap();
        let bound = res.kappa * (d_tilde * d_tilde / (cfg.c * cfg.c) + dm * dm);
        worst_ratio = worst_ratio.max(sup / bound);
        if sup > bound {
            violations += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        violations == 0 && within(t, 120.0),
        format!(
            "{violations} violations, max sup/bound {worst_ratio:.3}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn suite_axes(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 4.0 / i as f64).collect()
}

fn ellipsoid_entry(id: &str, axes: Vec<f64>) -> BodyEntry {
    BodyEntry {
        id: id.into(),
        spec: BodySpec::Ellipsoid { semi_axes: axes },
    }
}

fn gsm_rows() -> (Vec<RiskRow>, Duration) {
    let start = Instant::now();
    let plan = ExperimentPlan {
        bodies: vec![ellipsoid_entry("harmonic32", suite_axes(32))],
        suite: Suite::Sequence {
            sigmas: vec![0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2],
        },
        trials: 200,
        seed: 5,
        estimators: vec![EstimatorId::Gsm, EstimatorId::Identity],
        signal: SignalRule::Boundary,
        config: EstimationConfig::default(),
        robust: RobustConfig::default(),
        output_dir: None,
    };
    let rep = mc_risk(&plan).unwrap();
    (rep.rows, start.elapsed())
}

fn criterion_5_and_6(rows: &[RiskRow], elapsed: Duration) -> (Outcome, Outcome) {
    let mut ok = true;
    let mut cells = Vec::new();
    let mut failed = 0;
    for g in rows.iter().filter(|r| r.estimator == "gsm") {
        let id = rows
            .iter()
            .find(|r| r.estimator == "identity" && r.sigma == g.sigma)
            .unwrap();
        let pinsker = g.pinsker.unwrap();
        let c_emp = g.pinsker_ratio.unwrap_or(f64::NAN);
        let n_sigma2 = 32.0 * g.sigma * g.sigma;
        let beats_identity = n_sigma2 < 10.0 * pinsker || g.mse <= id.mse;
        ok &= c_emp <= 50.0 && beats_identity;
        failed += g.failed;
        cells.push(format!(
            "σ={}:C_emp={c_emp:.2}{}",
            g.sigma,
            if beats_identity { "" } else { "(worse than Y)" }
        ));
        eprintln!(
            "  gsm sigma={} mse={:.4e} se={:.1e} pinsker={:.4e} C_emp={:.3} identity_mse={:.4e}",
            g.sigma, g.mse, g.std_err, pinsker, c_emp, id.mse
        );
    }
    let total_trials: usize = rows
        .iter()
        .filter(|r| r.estimator == "gsm")
        .map(|r| r.trials + r.failed)
        .sum();
    let fail_ok = (failed as f64) < 0.02 * total_trials as f64;
    let five = outcome(
        ok && fail_ok && within(elapsed, 1800.0),
        format!(
            "{}; {failed} failed trials; {:.0}s",
            cells.join(" "),
            elapsed.as_secs_f64()
        ),
    );
    let trapped: usize = rows.iter().filter_map(|r| r.trapped).sum();
    let checked: usize = rows.iter().filter_map(|r| r.trap_checked).sum();
    let frac = trapped as f64 / checked.max(1) as f64;
    let six = outcome(
        checked > 0 && frac >= 0.95,
        format!("{trapped}/{checked} pairs trapped ({:.2}%)", 100.0 * frac),
    );
    (five, six)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let n = 16;
    let samples = 20 * n;
    let sigma = 1.0;
    let body = ellipsoid_entry("harmonic16", suite_axes(n));
    let plan = ExperimentPlan {
        bodies: vec![body.clone()],
        suite: Suite::Robust {
            sigma,
            samples,
            epsilons: vec![0.0, 0.05, 0.1],
            adversaries: vec![
                Adversary::FarCluster,
                Adversary::MeanShift,
                Adversary::TopEigenvector,
            ],
            noise: NoiseKind::StudentT3,
        },
        trials: 200,
        seed: 7,
        estimators: vec![EstimatorId::Robust],
        signal: SignalRule::Boundary,
        config: EstimationConfig::default(),
        robust: RobustConfig::default(),
        output_dir: None,
    };
    let rep = mc_risk(&plan).unwrap();
    let gsm_plan = ExperimentPlan {
        suite: Suite::Sequence {
            sigmas: vec![sigma / (samples as f64).sqrt()],
        },
        estimators: vec![EstimatorId::Gsm],
        ..plan.clone()
    };
    let gsm = mc_risk(&gsm_plan).unwrap().rows[0].mse;
    let clean = rep
        .rows
        .iter()
        .find(|r| r.epsilon == Some(0.0))
        .unwrap()
        .mse;
    let mut ok = true;
    let mut parts = vec![format!("mse(0)={clean:.3e} gsm={gsm:.3e}")];
    ok &= clean <= 3.0 * gsm;
    let mut max_gauge: f64 = 0.0;
    let mut failed = 0;
    let mut total = 0;
    for row in &rep.rows {
        max_gauge = max_gauge.max(row.max_gauge);
        failed += row.failed;
        total += row.trials + row.failed;
        eprintln!(
            "  robust eps={:?} adversary={:?} mse={:.4e} se={:.1e} max_gauge={:.6}",
            row.epsilon, row.adversary, row.mse, row.std_err, row.max_gauge
        );
        let eps = row.epsilon.unwrap();
        if eps == 0.1 {
            let limit = 10.0 * clean + 4.0 * eps * sigma * sigma;
            ok &= row.mse <= limit;
            parts.push(format!(
                "{}={:.3e}/{limit:.3e}",
                row.adversary.as_deref().unwrap(),
                row.mse
            ));
        }
    }
    ok &= max_gauge <= 1.0 + 1e-9 && (failed as f64) < 0.02 * total as f64;
    let t = start.elapsed();
    outcome(
        ok && within(t, 1800.0),
        format!(
            "{}; max gauge {max_gauge:.9}; {failed} failed; {:.0}s",
            parts.join(" "),
            t.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let n = 16;
    let axes: Vec<f64> = (0..n).map(|i| 2.0 - i as f64 / n as f64).collect();
    let ns: Vec<usize> = [2, 4, 8, 16].iter().map(|f| f * n).collect();
    let plan = ExperimentPlan {
        bodies: vec![ellipsoid_entry("near_ball16", axes.clone())],
        suite: Suite::Regression {
            samples: ns.clone(),
            center: false,
        },
        trials: 200,
        seed: 8,
        estimators: vec![EstimatorId::Regression],
        signal: SignalRule::Boundary,
        config: EstimationConfig::default(),
        robust: RobustConfig::default(),
        output_dir: None,
    };
    let rep = mc_risk(&plan).unwrap();
    let xs: Vec<f64> = rep
        .rows
        .iter()
        .map(|r| (r.samples.unwrap() as f64).ln())
        .collect();
    let ys: Vec<f64> = rep.rows.iter().map(|r| r.mse.ln()).collect();
    for row in &rep.rows {
        eprintln!(
            "  regression N={:?} mse={:.4e} se={:.1e}",
            row.samples, row.mse, row.std_err
        );
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let failed: usize = rep.rows.iter().map(|r| r.failed).sum();

    // Noiseless recovery.
    let noiseless = ExperimentPlan {
        config: EstimationConfig {
            noise_scale: 0.0,
            ..Default::default()
        },
        trials: 30,
        ..plan.clone()
    };
    let worst_noiseless = mc_risk(&noiseless)
        .unwrap()
        .rows
        .iter()
        .map(|r| r.mse.sqrt())
        .fold(0.0, f64::max);
    let t = start.elapsed();
    outcome(
        (-1.3..=-0.7).contains(&slope)
            && worst_noiseless <= 1e-4
            && failed == 0
            && within(t, 1200.0),
        format!(
            "slope {slope:.3}; noiseless max error {worst_noiseless:.1e}; {failed} failed; {:.0}s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut witness_err: f64 = 0.0;
    for n in [2, 9, 100] {
        let rep = check_non_qco_witness(n).unwrap();
        witness_err = witness_err.max((rep.w_norm_sq - rep.expected).abs());
    }
    let mut r = rng::stream(9, &[]);
    let theta: Vec<f64> = (0..16).map(|_| r.random_range(0.25..4.0)).collect();
    let fixtures = [
        qco_quadratic_fixture(&theta).unwrap(),
        qco_power_fixture(&theta, 4.0).unwrap(),
    ];
    let bound = 8.0 * 16f64.ln();
    let mut worst: f64 = 0.0;
    for (i, body) in fixtures.iter().enumerate() {
        let rep = check_qco_type2(body, 10_000, 90 + i as u64).unwrap();
        worst = worst.max(rep.max_ratio);
    }
    outcome(
        witness_err <= 1e-12 && worst <= bound,
        format!("witness error {witness_err:.1e}; max type-2 ratio {worst:.3} vs {bound:.2}"),
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_widthest"))
        .args(args)
        .output()
        .expect("run cli")
}

fn criterion_10() -> Outcome {
    let root = std::env::temp_dir().join(format!("widthest-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let write = |name: &str, text: &str| -> PathBuf {
        let p = root.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let body = write(
        "body.json",
        r#"{"kind":"ellipsoid","semi_axes":[3.0,2.0,1.0,0.5]}"#,
    );
    let matrix = write(
        "x.json",
        r#"{"rows":4,"cols":4,"data":[2,1,0,0, 1,2,0,0, 0,0,1,0, 0,0,0,1]}"#,
    );
    let obs = write("y.csv", "y\n1.5\n-0.5\n0.2\n0.1\n");
    let mut reg = String::from("y,z1,z2,z3,z4\n");
    let mut rr = rng::stream(10, &[]);
    for _ in 0..24 {
        let z = rng::gaussian_vector(&mut rr, 4);
        let y = z[0] * 1.0 - z[1] * 0.5 + rng::gaussian_vector(&mut rr, 1)[0] * 0.3;
        reg.push_str(&format!("{y},{},{},{},{}\n", z[0], z[1], z[2], z[3]));
    }
    let reg = write("reg.csv", &reg);
    let (b, x, o, g) = (
        body.to_str().unwrap(),
        matrix.to_str().unwrap(),
        obs.to_str().unwrap(),
        reg.to_str().unwrap(),
    );
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "width",
            vec!["width", "--body", b, "--m", "2", "--seed", "3"],
        ),
        (
            "qfm-check",
            vec!["qfm-check", "--body", b, "--matrix", x, "--seed", "3"],
        ),
        (
            "estimate",
            vec![
                "estimate",
                "--body",
                b,
                "--observation",
                o,
                "--sigma",
                "0.5",
                "--seed",
                "3",
            ],
        ),
        (
            "regress",
            vec![
                "regress",
                "--body",
                b,
                "--data",
                g,
                "--noise-scale",
                "0.3",
                "--seed",
                "3",
            ],
        ),
        (
            "bench",
            vec![
                "bench", "--body", b, "--sigma", "0.5", "--trials", "30", "--seed", "3",
            ],
        ),
        (
            "robust-bench",
            vec![
                "robust-bench",
                "--body",
                b,
                "--sigma",
                "0.5",
                "--samples",
                "40",
                "--trials",
                "30",
                "--seed",
                "3",
            ],
        ),
        (
            "fixtures-check",
            vec![
                "fixtures-check",
                "--n",
                "8",
                "--trials",
                "200",
                "--seed",
                "3",
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args) in &runs {
        let mut bodies = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("{name}-{rep}"));
            let mut full = args.clone();
            full.extend(["--out", out.to_str().unwrap()]);
            let res = cli(&full);
            if !res.status.success() {
                bad.push(format!(
                    "{name} exited with {:?}: {}",
                    res.status.code(),
                    String::from_utf8_lossy(&res.stderr)
                ));
                break;
            }
            let mut csvs: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            csvs.sort();
            bodies.push(
                csvs.iter()
                    .map(|p| std::fs::read(p).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        if bodies.len() == 2 && (bodies[0].is_empty() || bodies[0] != bodies[1]) {
            bad.push(format!("{name} produced differing or missing CSV output"));
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} subcommands byte-identical", runs.len())
        } else {
            bad.join("; ")
        },
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));
    let mut all_pass = true;
    let mut report = |c: u32, title: &str, o: Outcome| {
        all_pass &= o.pass;
        println!(
            "criterion {c:>2} {}: {title}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    if wanted(1) {
        report(1, "capped simplex exactness", criterion_1());
    }
    if wanted(2) {
        report(2, "spectahedron projection", criterion_2());
    }
    if wanted(3) {
        report(3, "QFM validation", criterion_3());
    }
    if wanted(4) {
        report(4, "width SDP certification", criterion_4());
    }
    if wanted(5) || wanted(6) {
        let (rows, elapsed) = gsm_rows();
        let (five, six) = criterion_5_and_6(&rows, elapsed);
        if wanted(5) {
            report(5, "sequence model vs Pinsker", five);
        }
        if wanted(6) {
            report(6, "trapping", six);
        }
    }
    if wanted(7) {
        report(7, "robust suite", criterion_7());
    }
    if wanted(8) {
        report(8, "regression scaling", criterion_8());
    }
    if wanted(9) {
        report(9, "fixtures", criterion_9());
    }
    if wanted(10) {
        report(10, "CLI determinism", criterion_10());
    }
    if !all_pass {
        std::process::exit(1);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use widthest::estimators::{
    center_pairs, EstimationConfig, EstimationTrace, Estimator, RegressionData, RobustConfig,
};
use widthest::geometry::{BodySpec, ConvexBody};
use widthest::harness::fixtures::{qco_power_fixture, qco_quadratic_fixture};
use widthest::harness::report::to_csv;
use widthest::harness::{
    check_non_qco_witness, check_qco_type2, exact_width_ellipsoid, mc_risk, Adversary, BodyEntry,
    EstimatorId, ExperimentPlan, NoiseKind, SignalRule, Suite,
};
use widthest::linalg::{MatrixRecord, SymmetricMatrix};
use widthest::qfm::{oracle_for, qfm_bruteforce};
use widthest::rng;
use widthest::width_sdp::{select_width_rank, solve_width_sdp, WidthSdpRecord};

#[derive(Parser)]
#[command(
    name = "widthest",
    version,
    about = "Width-based constrained estimation over convex bodies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// BodySpec JSON file. Without it, `--n` selects the ellipsoid with semi-axes 4/i.
    #[arg(long)]
    body: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// EstimationConfig JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the width SDP for rank m and certify the result.
    Width {
        #[command(flatten)]
        common: Common,
        /// Target rank; chosen from `--sigma` when omitted.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Run the body's quadratic-form oracle against multi-start search.
    QfmCheck {
        #[command(flatten)]
        common: Common,
        /// Matrix JSON file `{rows, cols, data}` in row-major order.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 64)]
        starts: usize,
    },
    /// Estimate the mean of one Gaussian observation.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Observation vector as a JSON array or CSV column.
        #[arg(long)]
        observation: PathBuf,
    },
    /// Constrained regression on CSV records `y, z_1, …, z_n`.
    Regress {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Noise level of the responses; overrides the config.
        #[arg(long)]
        noise_scale: Option<f64>,
        /// Difference consecutive pairs of records first.
        #[arg(long)]
        center: bool,
    },
    /// Monte Carlo risk of the sequence-model estimators.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Full ExperimentPlan JSON; the other flags are ignored when given.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Noise grid, comma separated; defaults to `--sigma`.
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
    },
    /// Monte Carlo risk of the robust estimator under contamination.
    RobustBench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1")]
        epsilons: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "far_cluster,mean_shift,top_eigenvector"
        )]
        adversaries: Vec<String>,
        /// `gaussian` or `student_t3`.
        #[arg(long, default_value = "student_t3")]
        noise: String,
    },
    /// Check the type-2 fixtures and the non-QCO witness.
    FixturesCheck {
        #[command(flatten)]
        common: Common,
    },
}

fn invalid(msg: impl Into<String>) -> widthest::Error {
    widthest::Error::InvalidInput(msg.into())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_body(common: &Common) -> anyhow::Result<(BodySpec, ConvexBody)> {
    let spec = match (&common.body, common.n) {
        (Some(path), _) => BodySpec::from_json(&read(path)?)?,
        (None, Some(n)) if n > 0 => BodySpec::Ellipsoid {
            semi_axes: (1..=n).map(|i| 4.0 / i as f64).collect(),
        },
        _ => bail!(invalid("give --body or a positive --n")),
    };
    let body = spec.build()?;
    if let Some(n) = common.n {
        if n != body.dim() {
            bail!(invalid(format!(
                "--n {n} disagrees with body dimension {}",
                body.dim()
            )));
        }
    }
    Ok((spec, body))
}

fn load_config(common: &Common) -> anyhow::Result<EstimationConfig> {
    let mut cfg: EstimationConfig = match &common.config {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?,
        None => EstimationConfig::default(),
    };
    cfg.seed = common.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn require_sigma(common: &Common) -> anyhow::Result<f64> {
    common
        .sigma
        .ok_or_else(|| anyhow!(invalid("--sigma is required")))
}

/// Rows of numbers from a CSV file, skipping a leading header line if present.
fn read_numeric_csv(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match parsed {
            Ok(row) if !row.is_empty() => rows.push(row),
            Ok(_) => {}
            Err(_) if i == 0 => {}
            Err(e) => bail!(invalid(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(rows)
}

fn read_vector(path: &Path) -> anyhow::Result<DVector<f64>> {
    let values: Vec<f64> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&read(path)?)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?
    } else {
        read_numeric_csv(path)?.concat()
    };
    Ok(DVector::from_vec(values))
}

fn emit(out: &Path, stem: &str, csv: String, sidecar: &impl Serialize) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    fs::write(out.join(format!("{stem}.csv")), csv)?;
    fs::write(
        out.join(format!("{stem}.json")),
        serde_json::to_string_pretty(sidecar)?,
    )?;
    println!("{}", out.join(format!("{stem}.csv")).display());
    Ok(())
}

#[derive(Serialize)]
struct WidthRow {
    n: usize,
    m: usize,
    best_value: f64,
    certified_sup: f64,
    bound: Option<f64>,
    width: Option<f64>,
    kappa: f64,
    iterations_run: usize,
    iterations_planned: usize,
    capped: bool,
    degenerate: bool,
}

fn width(common: &Common, m: Option<usize>) -> anyhow::Result<()> {
    let (spec, body) = load_body(common)?;
    let cfg = load_config(common)?;
    let wcfg = cfg.width_config();
    let n = body.dim();
    let d_tilde = body.diameter_bound();
    let m = match m {
        Some(m) => m,
        None => select_width_rank(d_tilde, require_sigma(common)?, wcfg.c, n)?,
    };
    let oracle = oracle_for(&body, &cfg.qfm);
    let res = solve_width_sdp(
        &body,
        m,
        oracle.as_ref(),
        &wcfg,
        rng::derive_seed(common.seed, &[0x1D]),
    )?;
    let certified_sup = oracle
        .maximize(
            &res.x_star2,
            cfg.qfm.fail_prob,
            rng::derive_seed(common.seed, &[0x1E]),
        )?
        .value;
    let width = match &spec {
        BodySpec::Ellipsoid { semi_axes } => {
            let mut axes = semi_axes.clone();
            axes.sort_by(|a, b| b.total_cmp(a));
            Some(exact_width_ellipsoid(&axes, m)?)
        }
        _ => None,
    };
    let bound = width.map(|w| res.kappa * (d_tilde * d_tilde / (wcfg.c * wcfg.c) + w * w));
    let row = WidthRow {
        n,
        m,
        best_value: res.best_value,
        certified_sup,
        bound,
        width,
        kappa: res.kappa,
        iterations_run: res.iterations_run,
        iterations_planned: res.iterations_planned,
        capped: res.capped,
        degenerate: res.degenerate,
    };
    let sidecar =
        serde_json::json!({ "result": WidthSdpRecord::from(&res), "certification": &row });
    emit(&common.out, "width", to_csv([&row])?, &sidecar)
}

#[derive(Serialize)]
struct QfmRow {
    n: usize,
    value: f64,
    relax_upper: Option<f64>,
    kappa: Option<f64>,
    bruteforce_value: f64,
    ratio: f64,
}

fn qfm_check(common: &Common, matrix: &Path, starts: usize) -> anyhow::Result<()> {
    let (_, body) = load_body(common)?;
    let cfg = load_config(common)?;
    let record: MatrixRecord = serde_json::from_str(&read(matrix)?)
        .map_err(|e| invalid(format!("{}: {e}", matrix.display())))?;
    let x = SymmetricMatrix::new(record.to_matrix()?)?;
    let oracle = oracle_for(&body, &cfg.qfm);
    let res = oracle.maximize(
        &x,
        cfg.qfm.fail_prob,
        rng::derive_seed(common.seed, &[0xF1]),
    )?;
    let brute = qfm_bruteforce(&body, &x, starts, rng::derive_seed(common.seed, &[0xF2]))?;
    let row = QfmRow {
        n: body.dim(),
        value: res.value,
        relax_upper: res.relax_upper,
        kappa: res.kappa,
        bruteforce_value: brute.value,
        ratio: if brute.value > 0.0 {
            res.value / brute.value
        } else {
            1.0
        },
    };
    let sidecar = serde_json::json!({ "oracle": &res, "bruteforce": &brute });
    emit(&common.out, "qfm", to_csv([&row])?, &sidecar)
}

#[derive(Serialize)]
struct CoordRow {
    i: usize,
    input: Option<f64>,
    estimate: f64,
}

#[derive(Serialize)]
struct TraceRow {
    j: usize,
    d_tilde: f64,
    d_tilde_next: f64,
    m: usize,
    oracle_value: f64,
    step_norm: f64,
    fail_budget: f64,
}

fn trace_csv(trace: &EstimationTrace) -> anyhow::Result<String> {
    Ok(to_csv(trace.records.iter().map(|r| TraceRow {
        j: r.j,
        d_tilde: r.d_tilde,
        d_tilde_next: r.d_tilde_next,
        m: r.m,
        oracle_value: r.oracle_value,
        step_norm: r.step_norm,
        fail_budget: r.fail_budget,
    }))?)
}

fn estimate(common: &Common, observation: &Path) -> anyhow::Result<()> {
    let (_, body) = load_body(common)?;
    let cfg = load_config(common)?;
    let sigma = require_sigma(common)?;
    let y = read_vector(observation)?;
    let (mu, trace) = Estimator::new(body, cfg)?.gsm(&y, sigma)?;
    let rows = mu.iter().enumerate().map(|(i, v)| CoordRow {
        i,
        input: Some(y[i]),
        estimate: *v,
    });
    emit(&common.out, "estimate", to_csv(rows)?, &trace)?;
    emit(&common.out, "trace", trace_csv(&trace)?, &trace)
}

fn regress(
    common: &Common,
    data: &Path,
    noise_scale: Option<f64>,
    center: bool,
) -> anyhow::Result<()> {
    let (_, body) = load_body(common)?;
    let mut cfg = load_config(common)?;
    if let Some(s) = noise_scale.or(common.sigma) {
        cfg.noise_scale = s;
    }
    cfg.validate()?;
    let rows = read_numeric_csv(data)?;
    let width = rows.first().map_or(0, Vec::len);
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        bail!(invalid(
            "regression records need a response and at least one design column"
        ));
    }
    let z = DMatrix::from_fn(rows.len(), width - 1, |i, j| rows[i][j + 1]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][0]);
    let mut data = RegressionData::new(z, y)?;
    if center {
        data = center_pairs(&data)?;
    }
    let (beta, trace) = Estimator::new(body, cfg)?.regression(&data)?;
    let rows = beta.iter().enumerate().map(|(i, v)| CoordRow {
        i,
        input: None,
        estimate: *v,
    });
    emit(&common.out, "regress", to_csv(rows)?, &trace)?;
    emit(&common.out, "trace", trace_csv(&trace)?, &trace)
}

fn run_plan(plan: &ExperimentPlan, out: &Path, stem: &str) -> anyhow::Result<()> {
    let report = mc_risk(plan)?;
    let dir = plan
        .output_dir
        .as_deref()
        .map_or(out.to_path_buf(), PathBuf::from);
    let (csv, _) = report.write(&dir, stem)?;
    println!("{}", csv.display());
    Ok(())
}

fn base_plan(
    common: &Common,
    suite: Suite,
    estimators: Vec<EstimatorId>,
) -> anyhow::Result<ExperimentPlan> {
    let (spec, _) = load_body(common)?;
    let id = common
        .body
        .as_ref()
        .and_then(|p| p.file_stem())
        .map_or("body".into(), |s| s.to_string_lossy().into_owned());
    Ok(ExperimentPlan {
        bodies: vec![BodyEntry { id, spec }],
        suite,
        trials: common.trials.unwrap_or(200),
        seed: common.seed,
        estimators,
        signal: SignalRule::Boundary,
        config: load_config(common)?,
        robust: RobustConfig::default(),
        output_dir: None,
    })
}

fn bench(common: &Common, plan: Option<&Path>, sigmas: &[f64]) -> anyhow::Result<()> {
    let plan = match plan {
        Some(path) => ExperimentPlan::from_json(&read(path)?)?,
        None => {
            let sigmas = if sigmas.is_empty() {
                vec![require_sigma(common)?]
            } else {
                sigmas.to_vec()
            };
            let (spec, _) = load_body(common)?;
            let mut estimators = vec![
                EstimatorId::Gsm,
                EstimatorId::Identity,
                EstimatorId::Projection,
            ];
            if matches!(spec, BodySpec::Ellipsoid { .. }) {
                estimators.push(EstimatorId::TruncatedSeries);
            }
            base_plan(common, Suite::Sequence { sigmas }, estimators)?
        }
    };
    run_plan(&plan, &common.out, "bench")
}

fn parse_tag<T: serde::de::DeserializeOwned>(tag: &str, what: &str) -> anyhow::Result<T> {
    serde_json::from_value(serde_json::Value::String(tag.trim().to_string()))
        .map_err(|_| anyhow!(invalid(format!("unknown {what} '{tag}'"))))
}

fn robust_bench(
    common: &Common,
    samples: usize,
    epsilons: &[f64],
    adversaries: &[String],
    noise: &str,
) -> anyhow::Result<()> {
    let (_, body) = load_body(common)?;
    let samples = if samples == 0 {
        20 * body.dim()
    } else {
        samples
    };
    let adversaries = adversaries
        .iter()
        .map(|a| parse_tag::<Adversary>(a, "adversary"))
        .collect::<anyhow::Result<_>>()?;
    let suite = Suite::Robust {
        sigma: require_sigma(common)?,
        samples,
        epsilons: epsilons.to_vec(),
        adversaries,
        noise: parse_tag::<NoiseKind>(noise, "noise")?,
    };
    let plan = base_plan(
        common,
        suite,
        vec![EstimatorId::Robust, EstimatorId::SampleMean],
    )?;
    run_plan(&plan, &common.out, "robust_bench")
}

#[derive(Serialize)]
struct FixtureRow {
    check: &'static str,
    n: usize,
    trials: usize,
    value: f64,
    reference: f64,
    pass: bool,
}

fn fixtures_check(common: &Common) -> anyhow::Result<()> {
    let n = common.n.unwrap_or(16);
    let trials = common.trials.unwrap_or(10_000);
    let mut rows = Vec::new();
    let witness = check_non_qco_witness(n)?;
    rows.push(FixtureRow {
        check: "non_qco_witness",
        n,
        trials: 1,
        value: witness.w_norm_sq,
        reference: witness.expected,
        pass: (witness.w_norm_sq - witness.expected).abs() <= 1e-12,
    });
    let mut r = rng::stream(common.seed, &[0xF1C]);
    let theta: Vec<f64> = rng::gaussian_vector(&mut r, n)
        .iter()
        .map(|g| (0.5 * g).exp())
        .collect();
    let mut reports = Vec::new();
    for (check, body) in [
        ("type2_quadratic", qco_quadratic_fixture(&theta)?),
        ("type2_power4", qco_power_fixture(&theta, 4.0)?),
    ] {
        let rep = check_qco_type2(
            &body,
            trials,
            rng::derive_seed(common.seed, &[0xF1D, rows.len() as u64]),
        )?;
        rows.push(FixtureRow {
            check,
            n,
            trials,
            value: rep.max_ratio,
            reference: rep.bound,
            pass: rep.within_bound,
        });
        reports.push(rep);
    }
    let all_pass = rows.iter().all(|r| r.pass);
    let sidecar = serde_json::json!({ "theta": theta, "witness": witness, "type2": reports });
    emit(&common.out, "fixtures", to_csv(&rows)?, &sidecar)?;
    if !all_pass {
        bail!(widthest::Error::ToleranceNotMet {
            message: "a fixture check failed".into(),
            best_point: Vec::new(),
            best_value: f64::NAN,
        });
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Width { common, m } => width(&common, m),
        Command::QfmCheck {
            common,
            matrix,
            starts,
        } => qfm_check(&common, &matrix, starts),
        Command::Estimate {
            common,
            observation,
        } => estimate(&common, &observation),
        Command::Regress {
            common,
            data,
            noise_scale,
            center,
        } => regress(&common, &data, noise_scale, center),
        Command::Bench {
            common,
            plan,
            sigmas,
        } => bench(&common, plan.as_deref(), &sigmas),
        Command::RobustBench {
            common,
            samples,
            epsilons,
            adversaries,
            noise,
        } => robust_bench(&common, samples, &epsilons, &adversaries, &noise),
        Command::FixturesCheck { common } => fixtures_check(&common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            // Library errors carry their own code; unreadable or malformed files count as bad input.
            let code = err
                .downcast_ref::<widthest::Error>()
                .map_or(2, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}

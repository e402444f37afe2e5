//! Command-line interface: DPP sampling, weight computation, worst-case
//! error reports, the deterministic identity suite, Monte-Carlo experiments
//! and statistical verification of the expectation identities.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 statistical
//! verification failure.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kbiq::dpp::{sample_projection_dpp, NodeSet, RngStream};
use kbiq::gexpr::parse_g_expr;
use kbiq::harness::{
    fit_loglog_slope, run_experiment, run_identity_suite, trial_stream, verify_covariance,
    verify_theorem1, verify_theorem5, write_experiment_csv, write_trial_dump, ExperimentConfig,
    GammaChoice, RuleSpec, StatReport,
};
use kbiq::plot::{write_loglog_svg, Series};
use kbiq::spectral::SpectralModel;
use kbiq::wce::{error_decomposition, wce_squared};
use kbiq::weights::{
    ez_weights, kbiq_weights, okq_weights_jittered, CoefficientVector, KbiqParams, Truncation,
};
use kbiq::{Error, SpectralModel64};

#[derive(Parser)]
#[command(name = "kbiq", about = "Kernel-based interpolation quadrature with DPP nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw projection-DPP samples and print them as CSV.
    Sample(SampleArgs),
    /// Compute quadrature weights for a node configuration.
    Weights(WeightsArgs),
    /// Evaluate the squared worst-case integration error of a rule.
    Wce(WceArgs),
    /// Run the deterministic identity suite.
    CheckIdentities(CheckIdentitiesArgs),
    /// Run a Monte-Carlo convergence experiment.
    Experiment(ExperimentArgs),
    /// Statistically verify an expectation identity.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Smoothness order
    #[arg(long, default_value_t = 2)]
    s: u32,
    /// Number of nodes per sample
    #[arg(long)]
    n: usize,
    /// Number of configurations to draw
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long, default_value_t = 2)]
    s: u32,
    /// Rule: ezq | okq | kbiq
    #[arg(long)]
    rule: String,
    /// Gamma selector for kbiq: unit | mercer
    #[arg(long, default_value = "mercer")]
    gamma: String,
    /// KBIQ truncation factor, M = ceil(m_factor * N)
    #[arg(long, default_value_t = 2.0)]
    m_factor: f64,
    /// Coefficient expression, e.g. "e1" or "0.5*e3+2*e10"
    #[arg(long)]
    g: String,
    /// CSV file of nodes (last comma-separated field per line is x)
    #[arg(long)]
    nodes: Option<String>,
    /// Sample N nodes instead of reading them
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Diagonal jitter added to the kernel matrix (exploratory only)
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct WceArgs {
    #[arg(long, default_value_t = 2)]
    s: u32,
    #[arg(long)]
    rule: String,
    #[arg(long, default_value = "mercer")]
    gamma: String,
    #[arg(long, default_value_t = 2.0)]
    m_factor: f64,
    #[arg(long)]
    g: String,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Also print the report as a JSON object
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckIdentitiesArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Number of random configurations
    #[arg(long, default_value_t = 200)]
    configs: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 2)]
    s: u32,
    #[arg(long)]
    rule: String,
    #[arg(long, default_value = "mercer")]
    gamma: String,
    #[arg(long, default_value_t = 2.0)]
    m_factor: f64,
    #[arg(long)]
    g: String,
    /// N grid: comma list "5,10,20" or range "a:b:step"
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    out: Option<String>,
    /// Optional SVG plot path
    #[arg(long)]
    svg: Option<String>,
    /// Optional trial-level dump path
    #[arg(long)]
    dump: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which identity: theorem1 | theorem5 | covariance
    identity: String,
    #[arg(long, default_value_t = 2)]
    s: u32,
    /// Number of nodes N
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 20000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test function f for theorem1/covariance
    #[arg(long)]
    f: Option<String>,
    /// Rule index n for theorem1, first index for covariance
    #[arg(long, default_value_t = 1)]
    index: usize,
    /// Second rule index for covariance
    #[arg(long, default_value_t = 2)]
    index2: usize,
    /// Epsilon expression for theorem5
    #[arg(long)]
    eps: Option<String>,
    /// Epsilon-tilde expression for theorem5 (defaults to eps)
    #[arg(long)]
    eps_tilde: Option<String>,
    /// Spectral index m > N for theorem5
    #[arg(long, default_value_t = 0)]
    m: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version output still exits 0
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) | Error::IndexOutOfRange(_) => ExitCode::from(1),
                Error::StatisticalFailure(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> kbiq::Result<ExitCode> {
    match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Weights(args) => cmd_weights(args),
        Command::Wce(args) => cmd_wce(args),
        Command::CheckIdentities(args) => cmd_check_identities(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn open_out(path: &Option<String>) -> kbiq::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_sample(args: SampleArgs) -> kbiq::Result<ExitCode> {
    let model = SpectralModel64::new(args.s)?;
    let mut out = open_out(&args.out)?;
    writeln!(out, "trial,point_index,x")?;
    for t in 0..args.trials {
        let mut rng = RngStream::new(args.seed, trial_stream(args.seed, args.n, t));
        let nodes = sample_projection_dpp(&model, args.n, &mut rng)?;
        for (i, x) in nodes.points().iter().enumerate() {
            writeln!(out, "{t},{i},{x:.17}")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_nodes_csv(path: &str) -> kbiq::Result<Vec<f64>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut points = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        if last == "x" {
            continue; // header
        }
        let x: f64 = last.parse().map_err(|_| {
            Error::InvalidParameter(format!("cannot parse node value '{last}' in {path}"))
        })?;
        points.push(x);
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter(format!("no nodes found in {path}")));
    }
    Ok(points)
}

fn resolve_nodes(
    model: &SpectralModel64,
    nodes_path: &Option<String>,
    n: Option<usize>,
    seed: u64,
) -> kbiq::Result<NodeSet<f64>> {
    match (nodes_path, n) {
        (Some(path), _) => NodeSet::from_points(model, read_nodes_csv(path)?),
        (None, Some(n)) => {
            let mut rng = RngStream::new(seed, trial_stream(seed, n, 0));
            sample_projection_dpp(model, n, &mut rng)
        }
        (None, None) => Err(Error::InvalidParameter(
            "provide --nodes <csv> or --n <count>".into(),
        )),
    }
}

struct RuleChoice {
    spec: RuleSpec,
}

fn parse_rule(rule: &str, gamma: &str, m_factor: f64) -> kbiq::Result<RuleChoice> {
    let gamma = match gamma {
        "unit" => GammaChoice::Unit,
        "mercer" => GammaChoice::Mercer,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown gamma selector '{other}' (expected unit|mercer)"
            )))
        }
    };
    let spec = match rule {
        "ezq" => RuleSpec::Ezq,
        "okq" => RuleSpec::Okq,
        "kbiq" => RuleSpec::Kbiq { gamma, m_factor },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown rule '{other}' (expected ezq|okq|kbiq)"
            )))
        }
    };
    Ok(RuleChoice { spec })
}

fn compute_weights(
    model: &SpectralModel64,
    rule: &RuleSpec,
    nodes: &NodeSet<f64>,
    g: &CoefficientVector<f64>,
    jitter: f64,
) -> kbiq::Result<kbiq::WeightVector64> {
    match rule {
        RuleSpec::Ezq => ez_weights(nodes, g),
        RuleSpec::Okq => okq_weights_jittered(model, nodes, g, jitter),
        RuleSpec::Kbiq { gamma, m_factor } => {
            let m = ((m_factor * nodes.len() as f64).ceil() as usize).max(nodes.len());
            let seq = match gamma {
                GammaChoice::Unit => kbiq::spectral::EigenvalueSequence::Unit,
                GammaChoice::Mercer => kbiq::spectral::EigenvalueSequence::Mercer,
            };
            let mut params = KbiqParams::new(seq, Truncation::Finite(m));
            params.jitter = jitter;
            kbiq_weights(model, nodes, g, &params)
        }
    }
}

fn cmd_weights(args: WeightsArgs) -> kbiq::Result<ExitCode> {
    let model = SpectralModel64::new(args.s)?;
    let rule = parse_rule(&args.rule, &args.gamma, args.m_factor)?;
    let g = parse_g_expr(&args.g)?;
    let nodes = resolve_nodes(&model, &args.nodes, args.n, args.seed)?;
    let w = compute_weights(&model, &rule.spec, &nodes, &g, args.jitter)?;
    let mut out = open_out(&args.out)?;
    writeln!(out, "# rule: {}, s = {}, g = {}", w.rule(), args.s, args.g)?;
    if w.ill_conditioned() {
        writeln!(out, "# warning: ill-conditioned system, cond = {:.3e}", w.condition())?;
    }
    writeln!(out, "i,x_i,w_i")?;
    for (i, (x, wi)) in nodes.points().iter().zip(w.weights()).enumerate() {
        writeln!(out, "{i},{x:.17},{wi:.17}")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_wce(args: WceArgs) -> kbiq::Result<ExitCode> {
    let model = SpectralModel64::new(args.s)?;
    let rule = parse_rule(&args.rule, &args.gamma, args.m_factor)?;
    let g = parse_g_expr(&args.g)?;
    let nodes = resolve_nodes(&model, &args.nodes, args.n, args.seed)?;
    let w = compute_weights(&model, &rule.spec, &nodes, &g, args.jitter)?;
    let mut report = wce_squared(&model, &nodes, &w, &g)?;
    // the decomposition route only applies to EZQ with g supported on [N]
    if matches!(rule.spec, RuleSpec::Ezq) && g.support() <= nodes.len() {
        report.decomposition_value = Some(error_decomposition(&model, &nodes, &g)?);
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "rule={}", w.rule())?;
    writeln!(out, "n={}", nodes.len())?;
    writeln!(out, "wce_squared={:.17e}", report.wce_squared)?;
    writeln!(out, "embedding_norm_squared={:.17e}", report.embedding_norm_squared)?;
    writeln!(out, "cross_term={:.17e}", report.cross_term)?;
    writeln!(out, "quad_form={:.17e}", report.quad_form)?;
    if let Some(d) = report.decomposition_value {
        writeln!(out, "decomposition_value={d:.17e}")?;
    }
    if args.json {
        let decomposition = report
            .decomposition_value
            .map_or("null".to_string(), |d| format!("{d:.17e}"));
        writeln!(
            out,
            r#"{{"rule":"{}","n":{},"wce_squared":{:.17e},"embedding_norm_squared":{:.17e},"cross_term":{:.17e},"quad_form":{:.17e},"decomposition_value":{}}}"#,
            w.rule(),
            nodes.len(),
            report.wce_squared,
            report.embedding_norm_squared,
            report.cross_term,
            report.quad_form,
            decomposition
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_identities(args: CheckIdentitiesArgs) -> kbiq::Result<ExitCode> {
    let report = run_identity_suite(args.seed, args.configs)?;
    println!("configs={}", report.configs);
    println!("max_tau_deviation={:.3e} (tolerance 1e-7)", report.max_tau_deviation);
    println!(
        "max_decomposition_rel={:.3e} (tolerance 1e-8)",
        report.max_decomposition_rel
    );
    println!(
        "max_heavy1_deviation={:.3e} (tolerance 1e-8)",
        report.max_heavy1_deviation
    );
    println!(
        "max_gamma_invariance_rel={:.3e} (tolerance 1e-8)",
        report.max_gamma_invariance_rel
    );
    println!(
        "max_exactness_deviation={:.3e} (tolerance 1e-9)",
        report.max_exactness_deviation
    );
    if report.passes() {
        println!("identity suite: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("identity suite: FAIL");
        Err(Error::StatisticalFailure("identity suite failed".into()))
    }
}

fn parse_n_list(spec: &str) -> kbiq::Result<Vec<usize>> {
    let bad = |msg: String| Error::InvalidParameter(msg);
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("range '{spec}' must be a:b:step")));
        }
        let a: usize = parts[0].parse().map_err(|_| bad(format!("bad range start in '{spec}'")))?;
        let b: usize = parts[1].parse().map_err(|_| bad(format!("bad range end in '{spec}'")))?;
        let step: usize = parts[2].parse().map_err(|_| bad(format!("bad range step in '{spec}'")))?;
        if step == 0 {
            return Err(bad("range step must be positive".into()));
        }
        Ok((a..=b).step_by(step).collect())
    } else {
        spec.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| bad(format!("bad N value '{p}'")))
            })
            .collect()
    }
}

fn cmd_experiment(args: ExperimentArgs) -> kbiq::Result<ExitCode> {
    let rule = parse_rule(&args.rule, &args.gamma, args.m_factor)?;
    let cfg = ExperimentConfig {
        s: args.s,
        rule: rule.spec,
        g_spec: args.g.clone(),
        n_list: parse_n_list(&args.n)?,
        trials: args.trials,
        master_seed: args.seed,
        jitter: args.jitter,
    };
    let (series, records) = run_experiment(&cfg)?;
    let mut out = open_out(&args.out)?;
    write_experiment_csv(&mut *out, &cfg, &series)?;
    drop(out);
    if let Some(fit) = &series.slope {
        eprintln!("fitted slope: {:.4} (intercept {:.4})", fit.slope, fit.intercept);
        let refs: Vec<(f64, f64)> = series
            .points
            .iter()
            .map(|p| (p.n as f64, p.ref_r_n))
            .collect();
        if let Ok(rfit) = fit_loglog_slope(&refs) {
            eprintln!("reference r_N slope: {:.4}", rfit.slope);
        }
    }
    if let Some(path) = &args.dump {
        let mut dump = BufWriter::new(File::create(path)?);
        write_trial_dump(&mut dump, &records)?;
    }
    if let Some(path) = &args.svg {
        let mut svg = BufWriter::new(File::create(path)?);
        let series_plots = vec![
            Series {
                name: format!("{} mean wce^2", cfg.rule.label()),
                points: series
                    .points
                    .iter()
                    .map(|p| (p.n as f64, p.mean))
                    .collect(),
                dashed: false,
            },
            Series {
                name: "r_N".into(),
                points: series
                    .points
                    .iter()
                    .map(|p| (p.n as f64, p.ref_r_n))
                    .collect(),
                dashed: true,
            },
            Series {
                name: "sigma_{N+1}".into(),
                points: series
                    .points
                    .iter()
                    .map(|p| (p.n as f64, p.ref_sigma_n1))
                    .collect(),
                dashed: true,
            },
        ];
        write_loglog_svg(
            &mut svg,
            &format!("s = {}, g = {}", cfg.s, cfg.g_spec),
            "N",
            "mean squared worst-case error",
            &series_plots,
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(name: &str, report: &StatReport) -> kbiq::Result<ExitCode> {
    let mut pass = true;
    for check in &report.checks {
        let ok = check.passes(3.0);
        pass &= ok;
        println!(
            "{name} {}: estimate={:.6e} target={:.6e} stderr={:.3e} z={:.3} [{}]",
            check.name,
            check.estimate,
            check.target,
            check.stderr,
            check.z,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::StatisticalFailure(format!(
            "{name} verification exceeded |z| = 3"
        )))
    }
}

fn cmd_verify(args: VerifyArgs) -> kbiq::Result<ExitCode> {
    let model = SpectralModel::new(args.s)?;
    match args.identity.as_str() {
        "theorem1" => {
            let f = parse_g_expr(args.f.as_deref().ok_or_else(|| {
                Error::InvalidParameter("theorem1 needs --f <expr>".into())
            })?)?;
            let report =
                verify_theorem1(&model, args.n, args.index, &f, args.trials, args.seed)?;
            print_report("theorem1", &report)
        }
        "covariance" => {
            let f = parse_g_expr(args.f.as_deref().ok_or_else(|| {
                Error::InvalidParameter("covariance needs --f <expr>".into())
            })?)?;
            let report = verify_covariance(
                &model,
                args.n,
                args.index,
                args.index2,
                &f,
                args.trials,
                args.seed,
            )?;
            print_report("covariance", &report)
        }
        "theorem5" => {
            let eps = parse_g_expr(args.eps.as_deref().ok_or_else(|| {
                Error::InvalidParameter("theorem5 needs --eps <expr>".into())
            })?)?;
            let eps_tilde = match &args.eps_tilde {
                Some(expr) => parse_g_expr(expr)?,
                None => eps.clone(),
            };
            if args.m == 0 {
                return Err(Error::InvalidParameter("theorem5 needs --m > N".into()));
            }
            let report = verify_theorem5(
                &model,
                args.n,
                &eps,
                &eps_tilde,
                args.m,
                args.trials,
                args.seed,
            )?;
            print_report("theorem5", &report)
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown identity '{other}' (expected theorem1|theorem5|covariance)"
        ))),
    }
}

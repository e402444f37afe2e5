//! Monte-Carlo engine: repeated DPP trials, per-N aggregation, log-log rate
//! fits, and the statistical checks of the expectation identities.
//!
//! Everything here is deterministic for a fixed master seed: each trial gets
//! its own counter-based stream derived from `(master_seed, N, trial)`, and
//! aggregation always runs in ascending trial order regardless of how many
//! workers executed the trials.

use rayon::prelude::*;

use crate::dpp::{sample_projection_dpp, NodeSet, RngStream};
use crate::error::{Error, Result};
use crate::gexpr::parse_g_expr;
use crate::linalg::lu_factor;
use crate::spectral::{EigenvalueSequence, SpectralModel};
use crate::wce::{cross_term, error_decomposition, tau_matrix, wce_squared};
use crate::weights::{
    apply_quadrature, ez_weights, kbiq_weights, okq_weights_jittered, CoefficientVector,
    KbiqParams, Truncation, WeightVector,
};

const RESAMPLE_BUDGET: u32 = 10;
const CONDITION_GUARD: f64 = 1e10;

/// Gamma selector exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaChoice {
    Unit,
    Mercer,
}

/// Which quadrature rule an experiment exercises.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleSpec {
    Ezq,
    Okq,
    /// KBIQ with `M = ceil(m_factor * N)`.
    Kbiq { gamma: GammaChoice, m_factor: f64 },
}

impl RuleSpec {
    pub fn label(&self) -> String {
        match self {
            RuleSpec::Ezq => "ezq".into(),
            RuleSpec::Okq => "okq".into(),
            RuleSpec::Kbiq { gamma, m_factor } => {
                let gname = match gamma {
                    GammaChoice::Unit => "unit",
                    GammaChoice::Mercer => "mercer",
                };
                format!("kbiq[{gname},m={m_factor}]")
            }
        }
    }
}

/// Configuration of one Monte-Carlo experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub s: u32,
    pub rule: RuleSpec,
    pub g_spec: String,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub jitter: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return Err(Error::InvalidParameter(
                "n list must contain values >= 1".into(),
            ));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "n list must be strictly ascending".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        if let RuleSpec::Kbiq { m_factor, .. } = self.rule {
            if m_factor.is_nan() || m_factor < 1.0 {
                return Err(Error::InvalidParameter(
                    "m-factor must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of a single trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub n: usize,
    pub trial_index: usize,
    pub seed_stream: u64,
    pub wce_squared: f64,
    pub condition_phi: f64,
    pub resample_count: u32,
    pub failed: bool,
}

/// Aggregated statistics for one N.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
    pub failed: usize,
    pub ref_r_n: f64,
    pub ref_sigma_n1: f64,
}

/// Per-N means with the fitted log-log slope and the analytic references.
#[derive(Debug, Clone)]
pub struct RateSeries {
    pub points: Vec<RatePoint>,
    pub slope: Option<SlopeFit>,
}

#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// 64-bit mix so that adding N values or trials never perturbs existing
/// streams (splitmix64 finalizer over the packed inputs).
pub fn trial_stream(master_seed: u64, n: usize, trial: usize) -> u64 {
    let mut z = master_seed
        ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (trial as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples a configuration, resampling on the condition guard.
fn sample_guarded(
    model: &SpectralModel<f64>,
    n: usize,
    stream: u64,
    master_seed: u64,
) -> Result<(NodeSet<f64>, f64, u32)> {
    let mut rng = RngStream::new(master_seed, stream);
    let mut resamples = 0u32;
    loop {
        match sample_projection_dpp(model, n, &mut rng) {
            Ok(nodes) => {
                let cond = match lu_factor(nodes.feature_matrix()) {
                    Ok(f) => f.condition_estimate(),
                    Err(_) => f64::INFINITY,
                };
                if cond <= CONDITION_GUARD {
                    return Ok((nodes, cond, resamples));
                }
            }
            Err(Error::SamplerStall { .. }) => {}
            Err(e) => return Err(e),
        }
        resamples += 1;
        if resamples > RESAMPLE_BUDGET {
            return Err(Error::Inconsistent(format!(
                "resample budget exhausted for N = {n}, stream {stream}"
            )));
        }
        rng = rng.next_stream();
    }
}

fn weights_for_rule(
    model: &SpectralModel<f64>,
    rule: &RuleSpec,
    nodes: &NodeSet<f64>,
    g: &CoefficientVector<f64>,
    jitter: f64,
) -> Result<WeightVector<f64>> {
    match rule {
        RuleSpec::Ezq => ez_weights(nodes, g),
        RuleSpec::Okq => okq_weights_jittered(model, nodes, g, jitter),
        RuleSpec::Kbiq { gamma, m_factor } => {
            let m = ((m_factor * nodes.len() as f64).ceil() as usize).max(nodes.len());
            let gamma = match gamma {
                GammaChoice::Unit => EigenvalueSequence::Unit,
                GammaChoice::Mercer => EigenvalueSequence::Mercer,
            };
            let mut params = KbiqParams::new(gamma, Truncation::Finite(m));
            params.jitter = jitter;
            kbiq_weights(model, nodes, g, &params)
        }
    }
}

fn run_trial(
    model: &SpectralModel<f64>,
    cfg: &ExperimentConfig,
    g: &CoefficientVector<f64>,
    n: usize,
    trial_index: usize,
) -> TrialRecord {
    let stream = trial_stream(cfg.master_seed, n, trial_index);
    let failed = TrialRecord {
        n,
        trial_index,
        seed_stream: stream,
        wce_squared: f64::NAN,
        condition_phi: f64::NAN,
        resample_count: 0,
        failed: true,
    };
    let (nodes, cond, resamples) = match sample_guarded(model, n, stream, cfg.master_seed) {
        Ok(v) => v,
        Err(_) => return failed,
    };
    let weights = match weights_for_rule(model, &cfg.rule, &nodes, g, cfg.jitter) {
        Ok(w) => w,
        Err(_) => return TrialRecord { resample_count: resamples, ..failed },
    };
    match wce_squared(model, &nodes, &weights, g) {
        Ok(report) => TrialRecord {
            n,
            trial_index,
            seed_stream: stream,
            wce_squared: report.wce_squared,
            condition_phi: cond,
            resample_count: resamples,
            failed: false,
        },
        Err(_) => TrialRecord { resample_count: resamples, ..failed },
    }
}

/// Runs the full experiment; trials execute in parallel but are aggregated
/// in ascending trial order, so the output is identical for any worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RateSeries, Vec<TrialRecord>)> {
    cfg.validate()?;
    let model = SpectralModel::<f64>::new(cfg.s)?;
    let g = parse_g_expr(&cfg.g_spec)?;
    let mut all_records = Vec::with_capacity(cfg.n_list.len() * cfg.trials);
    let mut points = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let records: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(&model, cfg, &g, n, t))
            .collect();
        let ok: Vec<f64> = records
            .iter()
            .filter(|r| !r.failed)
            .map(|r| r.wce_squared)
            .collect();
        let failed = records.len() - ok.len();
        let (mean, stderr) = mean_and_stderr(&ok);
        points.push(RatePoint {
            n,
            mean,
            stderr,
            count: ok.len(),
            failed,
            ref_r_n: model.tail_sum(n),
            ref_sigma_n1: model.eigenvalue(n + 1)?,
        });
        all_records.extend(records);
    }
    let fit_points: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mean > 0.0)
        .map(|p| (p.n as f64, p.mean))
        .collect();
    let slope = if fit_points.len() >= 2 {
        Some(fit_loglog_slope(&fit_points)?)
    } else {
        None
    };
    Ok((RateSeries { points, slope }, all_records))
}

/// Mean and standard error, summed in slice order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ordinary least squares of `ln(mean)` on `ln(N)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two points".into(),
        ));
    }
    if let Some(&(_, bad)) = points.iter().find(|&&(_, y)| y.is_nan() || y <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "non-positive mean {bad} in slope fit"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidParameter(
            "degenerate abscissae in slope fit".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = logs
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
    })
}

/// Writes the experiment CSV: one row per N.
pub fn write_experiment_csv(
    out: &mut dyn std::io::Write,
    cfg: &ExperimentConfig,
    series: &RateSeries,
) -> Result<()> {
    writeln!(
        out,
        "rule,s,g,N,trials,mean_wce2,stderr,ref_rN,ref_sigmaN1,failed_trials"
    )?;
    for p in &series.points {
        writeln!(
            out,
            "{},{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            cfg.rule.label(),
            cfg.s,
            cfg.g_spec,
            p.n,
            cfg.trials,
            p.mean,
            p.stderr,
            p.ref_r_n,
            p.ref_sigma_n1,
            p.failed
        )?;
    }
    Ok(())
}

/// Writes the optional trial-level dump.
pub fn write_trial_dump(out: &mut dyn std::io::Write, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "N,trial,wce2,cond_phi,resamples")?;
    for r in records {
        writeln!(
            out,
            "{},{},{:.17e},{:.6e},{}",
            r.n, r.trial_index, r.wce_squared, r.condition_phi, r.resample_count
        )?;
    }
    Ok(())
}

/// Result of a mean / variance z-test.
#[derive(Debug, Clone)]
pub struct StatCheck {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    pub stderr: f64,
    pub z: f64,
}

impl StatCheck {
    fn new(name: &str, estimate: f64, target: f64, stderr: f64) -> Self {
        // a deviation at rounding scale counts as exact even when the
        // empirical spread collapses to zero
        let z = if (estimate - target).abs() <= 1e-9 * (1.0 + target.abs()) {
            0.0
        } else if stderr > 0.0 {
            (estimate - target) / stderr
        } else {
            f64::INFINITY
        };
        Self {
            name: name.into(),
            estimate,
            target,
            stderr,
            z,
        }
    }

    pub fn passes(&self, z_max: f64) -> bool {
        self.z.abs() <= z_max
    }
}

/// Report of one statistical verification: every check must satisfy |z| <= 3.
#[derive(Debug, Clone)]
pub struct StatReport {
    pub checks: Vec<StatCheck>,
}

impl StatReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passes(3.0))
    }
}

fn ezq_estimates(
    model: &SpectralModel<f64>,
    n_nodes: usize,
    rule_indices: &[usize],
    f: &CoefficientVector<f64>,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let values: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let stream = trial_stream(master_seed, n_nodes, t);
            let (nodes, _, _) = sample_guarded(model, n_nodes, stream, master_seed)?;
            rule_indices
                .iter()
                .map(|&idx| {
                    let w = ez_weights(&nodes, &CoefficientVector::basis(idx))?;
                    Ok(apply_quadrature(&w, |x| {
                        f.eval(model, x).expect("x sampled in domain")
                    }))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(values)
}

/// Monte-Carlo check of the unbiasedness and variance of `I^{EZ,n}(f)`:
/// mean target `<f, phi_n>`, variance target `sum_{m > N} <f, phi_m>^2`.
pub fn verify_theorem1(
    model: &SpectralModel<f64>,
    n_nodes: usize,
    rule_index: usize,
    f: &CoefficientVector<f64>,
    trials: usize,
    master_seed: u64,
) -> Result<StatReport> {
    if rule_index == 0 || rule_index > n_nodes {
        return Err(Error::InvalidParameter(format!(
            "rule index {rule_index} must lie in 1..=N"
        )));
    }
    let samples = ezq_estimates(model, n_nodes, &[rule_index], f, trials, master_seed)?;
    let values: Vec<f64> = samples.into_iter().map(|v| v[0]).collect();
    let (mean, mean_se) = mean_and_stderr(&values);
    let t = values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0);
    let m4 = values
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d * d * d
        })
        .sum::<f64>()
        / t;
    let var_se = ((m4 - var * var).max(0.0) / t).sqrt();
    let mean_target = f.coeff(rule_index);
    let mut var_target = 0.0;
    for m in n_nodes + 1..=f.support() {
        let c = f.coeff(m);
        var_target += c * c;
    }
    Ok(StatReport {
        checks: vec![
            StatCheck::new("mean", mean, mean_target, mean_se),
            StatCheck::new("variance", var, var_target, var_se),
        ],
    })
}

/// Monte-Carlo check that distinct EZQ estimators are uncorrelated.
pub fn verify_covariance(
    model: &SpectralModel<f64>,
    n_nodes: usize,
    rule_a: usize,
    rule_b: usize,
    f: &CoefficientVector<f64>,
    trials: usize,
    master_seed: u64,
) -> Result<StatReport> {
    if rule_a == rule_b {
        return Err(Error::InvalidParameter(
            "covariance check needs two distinct rule indices".into(),
        ));
    }
    for idx in [rule_a, rule_b] {
        if idx == 0 || idx > n_nodes {
            return Err(Error::InvalidParameter(format!(
                "rule index {idx} must lie in 1..=N"
            )));
        }
    }
    let samples = ezq_estimates(model, n_nodes, &[rule_a, rule_b], f, trials, master_seed)?;
    let a: Vec<f64> = samples.iter().map(|v| v[0]).collect();
    let b: Vec<f64> = samples.iter().map(|v| v[1]).collect();
    let (mean_a, _) = mean_and_stderr(&a);
    let (mean_b, _) = mean_and_stderr(&b);
    let products: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| (x - mean_a) * (y - mean_b))
        .collect();
    let (cov, cov_se) = mean_and_stderr(&products);
    Ok(StatReport {
        checks: vec![StatCheck::new("covariance", cov, 0.0, cov_se)],
    })
}

/// Monte-Carlo check of the cross-term expectation
/// `E eps^T Phi^-T phi_m(x) phi_m(x)^T Phi^-1 eps~ = sum_n eps_n eps~_n`.
pub fn verify_theorem5(
    model: &SpectralModel<f64>,
    n_nodes: usize,
    eps: &CoefficientVector<f64>,
    eps_tilde: &CoefficientVector<f64>,
    m: usize,
    trials: usize,
    master_seed: u64,
) -> Result<StatReport> {
    if m <= n_nodes {
        return Err(Error::InvalidParameter(format!(
            "spectral index m = {m} must exceed N = {n_nodes}"
        )));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let stream = trial_stream(master_seed, n_nodes, t);
            let (nodes, _, _) = sample_guarded(model, n_nodes, stream, master_seed)?;
            cross_term(model, &nodes, eps, eps_tilde, m)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_stderr(&values);
    let mut target = 0.0;
    for n in 1..=n_nodes {
        target += eps.coeff(n) * eps_tilde.coeff(n);
    }
    Ok(StatReport {
        checks: vec![StatCheck::new("cross-term mean", mean, target, se)],
    })
}

/// Outcome of the deterministic identity suite.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub configs: usize,
    pub max_tau_deviation: f64,
    pub max_decomposition_rel: f64,
    pub max_heavy1_deviation: f64,
    pub max_gamma_invariance_rel: f64,
    pub max_exactness_deviation: f64,
}

impl IdentityReport {
    pub fn passes(&self) -> bool {
        self.max_tau_deviation <= 1e-7
            && self.max_decomposition_rel <= 1e-8
            && self.max_heavy1_deviation <= 1e-8
            && self.max_gamma_invariance_rel <= 1e-8
            && self.max_exactness_deviation <= 1e-9
    }
}

/// Runs the deterministic identity suite over `configs` random DPP
/// configurations with `N` in `2..=12` and `s` in `{2, 3}`.
pub fn run_identity_suite(master_seed: u64, configs: usize) -> Result<IdentityReport> {
    use rand::{Rng, SeedableRng};
    let models = [SpectralModel::<f64>::new(2)?, SpectralModel::<f64>::new(3)?];
    let mut report = IdentityReport {
        configs,
        max_tau_deviation: 0.0,
        max_decomposition_rel: 0.0,
        max_heavy1_deviation: 0.0,
        max_gamma_invariance_rel: 0.0,
        max_exactness_deviation: 0.0,
    };
    let mut gamma_rng = rand_chacha::ChaCha8Rng::seed_from_u64(master_seed ^ 0xdead_beef);
    for c in 0..configs {
        let model = &models[c % 2];
        let n = 2 + c % 11;
        let stream = trial_stream(master_seed, n, c);
        let (nodes, _, _) = sample_guarded(model, n, stream, master_seed)?;

        // Lemma: tau matrix is the identity
        let tau = tau_matrix(model, &nodes)?;
        for a in 0..n {
            for b in 0..n {
                let expect = if a == b { 1.0 } else { 0.0 };
                report.max_tau_deviation =
                    report.max_tau_deviation.max((tau[(a, b)] - expect).abs());
            }
        }

        // random unit-norm g supported on the first N coefficients
        let mut coeffs: Vec<f64> = (0..n).map(|_| gamma_rng.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        for v in coeffs.iter_mut() {
            *v /= norm;
        }
        let g = CoefficientVector::new(coeffs)?;

        // decomposition vs. the three-term expansion
        let w = ez_weights(&nodes, &g)?;
        let report_wce = wce_squared(model, &nodes, &w, &g)?;
        let decomposition = error_decomposition(model, &nodes, &g)?;
        let rel = (report_wce.wce_squared - decomposition).abs() / (1.0 + report_wce.wce_squared);
        report.max_decomposition_rel = report.max_decomposition_rel.max(rel);

        // cross-term identity: mu_g(x)^T w = ||mu_g||^2
        report.max_heavy1_deviation = report
            .max_heavy1_deviation
            .max((report_wce.cross_term - report_wce.embedding_norm_squared).abs());

        // gamma invariance at M = N
        let scale = w.weights().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for _ in 0..5 {
            let gamma: Vec<f64> = (0..n).map(|_| gamma_rng.gen::<f64>() + 0.05).collect();
            let alt = kbiq_weights(
                model,
                &nodes,
                &g,
                &KbiqParams::new(EigenvalueSequence::Explicit(gamma), Truncation::Finite(n)),
            )?;
            for (a, b) in w.weights().iter().zip(alt.weights()) {
                report.max_gamma_invariance_rel =
                    report.max_gamma_invariance_rel.max((a - b).abs() / scale);
            }
        }

        // interpolation exactness on the basis
        for rule in 1..=n {
            let wn = ez_weights(&nodes, &CoefficientVector::basis(rule))?;
            for j in 1..=n {
                let got = apply_quadrature(&wn, |x| {
                    model.eigenfunction(j, x).expect("x in domain")
                });
                let expect = if j == rule { 1.0 } else { 0.0 };
                report.max_exactness_deviation =
                    report.max_exactness_deviation.max((got - expect).abs());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [5.0, 10.0, 20.0]
            .iter()
            .map(|&n: &f64| (n, n.powi(-3)))
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = vec![(5.0, 2.0), (10.0, 2.0), (40.0, 2.0)];
        assert!(fit_loglog_slope(&flat).unwrap().slope.abs() < 1e-12);
        assert!(fit_loglog_slope(&[(5.0, 0.0), (10.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(5.0, 1.0)]).is_err());
    }

    #[test]
    fn slope_of_exact_tail_series() {
        let model = SpectralModel::<f64>::new(2).unwrap();
        let pts: Vec<(f64, f64)> = [10usize, 20, 40, 80]
            .iter()
            .map(|&n| (n as f64, model.tail_sum(n)))
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!(
            fit.slope > -3.2 && fit.slope < -2.8,
            "slope {}",
            fit.slope
        );
    }

    #[test]
    fn trial_streams_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for n in [1usize, 5, 80] {
            for t in 0..100 {
                assert!(seen.insert(trial_stream(7, n, t)));
            }
        }
        assert_eq!(trial_stream(7, 5, 3), trial_stream(7, 5, 3));
    }

    #[test]
    fn experiment_zero_g_is_exactly_zero() {
        let cfg = ExperimentConfig {
            s: 2,
            rule: RuleSpec::Ezq,
            g_spec: "0".into(),
            n_list: vec![3],
            trials: 50,
            master_seed: 5,
            jitter: 0.0,
        };
        let (series, records) = run_experiment(&cfg).unwrap();
        assert!(records.iter().all(|r| r.wce_squared == 0.0));
        assert_eq!(series.points[0].mean, 0.0);
    }

    #[test]
    fn experiment_output_independent_of_worker_count() {
        let cfg = ExperimentConfig {
            s: 2,
            rule: RuleSpec::Okq,
            g_spec: "e1".into(),
            n_list: vec![3, 5],
            trials: 40,
            master_seed: 99,
            jitter: 0.0,
        };
        let run_with = |threads: usize| -> Vec<u8> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let (series, _) = pool.install(|| run_experiment(&cfg)).unwrap();
            let mut buf = Vec::new();
            write_experiment_csv(&mut buf, &cfg, &series).unwrap();
            buf
        };
        assert_eq!(run_with(1), run_with(8));
    }

    #[test]
    fn mean_and_stderr_hand_values() {
        let (mean, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((mean - 2.5).abs() < 1e-15);
        // sample variance 5/3, so se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stderr_scales_with_replication() {
        let t = 100usize;
        let values: Vec<f64> = (0..t).map(|i| (i as f64 * 0.77).sin()).collect();
        let replicated: Vec<f64> = values
            .iter()
            .cycle()
            .take(4 * t)
            .copied()
            .collect();
        let (_, se1) = mean_and_stderr(&values);
        let (_, se4) = mean_and_stderr(&replicated);
        // with n-1 denominators the exact ratio is sqrt((4T - 1) / (T - 1))
        let expected = ((4 * t - 1) as f64 / (t - 1) as f64).sqrt();
        assert!((se1 / se4 - expected).abs() < 1e-12);
    }

    #[test]
    fn theorem1_exact_for_in_span_function() {
        let model = SpectralModel::<f64>::new(2).unwrap();
        let f = CoefficientVector::basis(1);
        let report = verify_theorem1(&model, 5, 1, &f, 200, 17).unwrap();
        let mean = &report.checks[0];
        let var = &report.checks[1];
        assert!((mean.estimate - 1.0).abs() < 1e-9);
        assert!(var.estimate.abs() < 1e-9);
        assert!(report.passes());
    }

    #[test]
    fn covariance_rejects_equal_indices() {
        let model = SpectralModel::<f64>::new(2).unwrap();
        let f = CoefficientVector::basis(7);
        assert!(verify_covariance(&model, 5, 1, 1, &f, 10, 3).is_err());
    }

    #[test]
    fn theorem5_rejects_low_index() {
        let model = SpectralModel::<f64>::new(2).unwrap();
        let e1 = CoefficientVector::basis(1);
        assert!(verify_theorem5(&model, 5, &e1, &e1, 5, 10, 3).is_err());
    }

    #[test]
    fn identity_suite_small_run_passes() {
        let report = run_identity_suite(2024, 20).unwrap();
        assert!(report.passes(), "{report:?}");
    }
}

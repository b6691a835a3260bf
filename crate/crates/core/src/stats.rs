//! Replication harness and the statistical test kit.
//!
//! `run_replications` fans M independent splitting runs over a thread pool,
//! one counter substream per run, then reduces the results sequentially in
//! replication order; summaries are therefore byte-identical no matter how
//! many threads did the work. On top of the summaries sit the acceptance
//! tests: normal z-tests for means, a chi-square test against a reference
//! Poisson law, Kolmogorov-Smirnov one- and two-sample tests, and a paired
//! bit-exactness check that a run under any inverse-CDF model coincides
//! with its image under the hazard transform.
//!
//! Every test emits a [`TestReport`] with the uniform convention that the
//! test passes iff `statistic <= threshold`, so a report line reads the
//! same way regardless of which family produced it.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

use crate::ams::{run_ams_from, AmsConfig, AmsError};
use crate::models::{Exponential, RandomModel};
use crate::real::Real;
use crate::rng::CounterRng;

// --- replication harness ----------------------------------------------------

/// How many runs, from which seed, and whether to keep per-run records.
#[derive(Clone, Copy, Debug)]
pub struct ReplicationPlan {
    pub m_reps: u64,
    pub base_seed: u64,
    /// Retain per-run records for distributional tests. Summaries never
    /// need them, so the default path drops them to bound memory.
    pub keep_runs: bool,
}

/// The per-run statistics the summary is built from. Replication `i` of a
/// plan consumes exactly the substream `(base_seed, i)`, so run 0 equals a
/// single `run_ams` with the same seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerRun {
    pub estimate: f64,
    pub j_count: u64,
    pub n_above: u32,
    pub samples_drawn: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub m_reps: u64,
    pub mean_estimate: f64,
    /// Unbiased sample variance of the estimate.
    pub var_estimate: f64,
    /// Standard error of `mean_estimate`.
    pub se_mean: f64,
    /// Standard error of `var_estimate`, from the fourth central moment.
    pub se_variance: f64,
    pub mean_j: f64,
    pub var_j: f64,
    pub se_mean_j: f64,
    pub mean_samples: f64,
    /// (j, count) pairs ascending in j; counts sum to `m_reps`.
    pub j_histogram: Vec<(u64, u64)>,
    /// Per-run records if the plan kept them, in replication order.
    pub runs: Vec<PerRun>,
}

/// Sequential two-pass reduction of per-run records.
pub fn summarize(runs: Vec<PerRun>, keep_runs: bool) -> ReplicationSummary {
    assert!(runs.len() >= 2, "need at least two replications");
    let m = runs.len() as f64;

    let mean_estimate = runs.iter().map(|r| r.estimate).sum::<f64>() / m;
    let mut sum2 = 0.0;
    let mut sum4 = 0.0;
    for r in &runs {
        let d = r.estimate - mean_estimate;
        sum2 += d * d;
        sum4 += d * d * d * d;
    }
    let var_estimate = sum2 / (m - 1.0);
    let mu4 = sum4 / m;
    let se_mean = (var_estimate / m).sqrt();
    // Var(s^2) = (mu_4 - sigma^4 (M - 3)/(M - 1)) / M, with sample moments
    // plugged in; clamped since the plug-in can go negative for tiny M.
    let var_of_var = ((mu4 - var_estimate * var_estimate * (m - 3.0) / (m - 1.0)) / m).max(0.0);
    let se_variance = var_of_var.sqrt();

    let mean_j = runs.iter().map(|r| r.j_count as f64).sum::<f64>() / m;
    let var_j = runs
        .iter()
        .map(|r| {
            let d = r.j_count as f64 - mean_j;
            d * d
        })
        .sum::<f64>()
        / (m - 1.0);
    let se_mean_j = (var_j / m).sqrt();
    let mean_samples = runs.iter().map(|r| r.samples_drawn as f64).sum::<f64>() / m;

    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for r in &runs {
        *hist.entry(r.j_count).or_insert(0) += 1;
    }

    ReplicationSummary {
        m_reps: runs.len() as u64,
        mean_estimate,
        var_estimate,
        se_mean,
        se_variance,
        mean_j,
        var_j,
        se_mean_j,
        mean_samples,
        j_histogram: hist.into_iter().collect(),
        runs: if keep_runs { runs } else { Vec::new() },
    }
}

/// Run the plan in parallel and reduce. Errors from any replication (budget
/// exhaustion, config problems) abort the whole plan.
pub fn run_replications<T, M>(
    model: &M,
    config: &AmsConfig<T>,
    plan: &ReplicationPlan,
) -> Result<ReplicationSummary, AmsError>
where
    T: Real,
    M: RandomModel<T> + Sync,
{
    let runs = (0..plan.m_reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::substream(plan.base_seed, i);
            let r = run_ams_from(model, config, &mut rng)?;
            Ok(PerRun {
                estimate: r.estimate.to_f64().expect("estimate representable"),
                j_count: r.j_count,
                n_above: r.n_above,
                samples_drawn: r.samples_drawn,
            })
        })
        .collect::<Result<Vec<PerRun>, AmsError>>()?;
    Ok(summarize(runs, plan.keep_runs))
}

// --- reports ------------------------------------------------------------------

/// Outcome of one statistical check. `pass` always means
/// `statistic <= threshold`; the p-value, when a law for the statistic is
/// available, is informational only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub context: String,
}

impl TestReport {
    pub fn from_statistic(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        p_value: Option<f64>,
        context: impl Into<String>,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            threshold,
            p_value,
            pass: statistic <= threshold,
            context: context.into(),
        }
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{verdict}] {}: statistic {:.4e} vs threshold {:.4e}",
            self.name, self.statistic, self.threshold
        )?;
        if let Some(p) = self.p_value {
            write!(f, " (p = {p:.3e})")?;
        }
        if !self.context.is_empty() {
            write!(f, " | {}", self.context)?;
        }
        Ok(())
    }
}

// --- mean tests ---------------------------------------------------------------

/// Two-sided z-test: |observed - expected| / se against `z_max` standard
/// errors.
pub fn z_test(
    name: &str,
    observed: f64,
    expected: f64,
    se: f64,
    z_max: f64,
    context: &str,
) -> TestReport {
    let statistic = if se > 0.0 {
        (observed - expected).abs() / se
    } else if observed == expected {
        0.0
    } else {
        f64::INFINITY
    };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_value = 2.0 * (1.0 - normal.cdf(statistic));
    TestReport::from_statistic(
        name,
        statistic,
        z_max,
        Some(p_value),
        format!("observed {observed:.8e}, expected {expected:.8e}, se {se:.3e}; {context}"),
    )
}

// --- chi-square against a Poisson law -----------------------------------------

/// Pearson chi-square of a J histogram against Poisson(lambda). Cells are
/// merged left to right until each holds expected mass at least 5; the top
/// cell absorbs the upper tail. No parameter is estimated, so the degrees
/// of freedom are cells - 1. Passes iff the statistic stays below the
/// (1 - alpha) chi-square quantile.
pub fn chi_square_poisson(
    name: &str,
    histogram: &[(u64, u64)],
    lambda: f64,
    alpha: f64,
    context: &str,
) -> TestReport {
    assert!(!histogram.is_empty(), "empty histogram");
    let m: u64 = histogram.iter().map(|&(_, c)| c).sum();
    let mf = m as f64;
    let pois = Poisson::new(lambda).expect("lambda > 0");

    let j_max = histogram.last().expect("nonempty").0 as usize;
    let mut observed = vec![0.0f64; j_max + 1];
    for &(j, c) in histogram {
        observed[j as usize] = c as f64;
    }
    let mut expected: Vec<f64> = (0..=j_max).map(|j| mf * pois.pmf(j as u64)).collect();
    // Reinterpret the top cell as {j >= j_max} so expectations sum to m.
    let below: f64 = expected[..j_max].iter().sum();
    expected[j_max] = (mf - below).max(0.0);

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0f64, 0.0f64);
    for i in 0..=j_max {
        o_acc += observed[i];
        e_acc += expected[i];
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if o_acc > 0.0 || e_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    assert!(
        cells.len() >= 2,
        "histogram too small for a chi-square test ({} merged cells)",
        cells.len()
    );

    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = (cells.len() - 1) as f64;
    let chi = ChiSquared::new(dof).expect("dof >= 1");
    let threshold = chi.inverse_cdf(1.0 - alpha);
    let p_value = 1.0 - chi.cdf(statistic);
    TestReport::from_statistic(
        name,
        statistic,
        threshold,
        Some(p_value),
        format!(
            "{} cells, dof {dof}, lambda {lambda:.4}, m {m}; {context}",
            cells.len()
        ),
    )
}

// --- Kolmogorov-Smirnov -------------------------------------------------------

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_j (-1)^(j-1) exp(-2 j^2 lambda^2).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=10_000u32 {
        let jf = f64::from(j);
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// The lambda with tail mass `alpha`, found by bisection (Q is strictly
/// decreasing where it matters).
pub fn kolmogorov_critical(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let (mut lo, mut hi) = (0.05f64, 8.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_q(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("KS sample contains NaN"));
    xs
}

/// One-sample KS test against a continuous CDF, with the Stephens
/// finite-sample scaling of the statistic.
pub fn ks_one_sample<F: Fn(f64) -> f64>(
    name: &str,
    sample: &[f64],
    cdf: F,
    alpha: f64,
    context: &str,
) -> TestReport {
    let xs = sorted_copy(sample);
    let n = xs.len() as f64;
    assert!(xs.len() >= 8, "KS needs a nontrivial sample");
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    let root = n.sqrt();
    let lambda = (root + 0.12 + 0.11 / root) * d;
    TestReport::from_statistic(
        name,
        lambda,
        kolmogorov_critical(alpha),
        Some(kolmogorov_q(lambda)),
        format!("D = {d:.4e}, n = {}; {context}", xs.len()),
    )
}

/// Two-sample KS test for equality of distributions.
pub fn ks_two_sample(
    name: &str,
    first: &[f64],
    second: &[f64],
    alpha: f64,
    context: &str,
) -> TestReport {
    let a = sorted_copy(first);
    let b = sorted_copy(second);
    assert!(a.len() >= 8 && b.len() >= 8, "KS needs nontrivial samples");
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let root = (n1 * n2 / (n1 + n2)).sqrt();
    let lambda = (root + 0.12 + 0.11 / root) * d;
    TestReport::from_statistic(
        name,
        lambda,
        kolmogorov_critical(alpha),
        Some(kolmogorov_q(lambda)),
        format!("D = {d:.4e}, n1 = {}, n2 = {}; {context}", a.len(), b.len()),
    )
}

// --- hazard-transform equivalence ----------------------------------------------

/// Paired bit-exactness check: every run of `model` must produce the same
/// (J, count above target) as the unit-exponential run at the transformed
/// levels, replication by replication under identical streams. Requires
/// the one-uniform inverse-CDF sampler, since the pairing argument works
/// draw by draw. The report counts mismatching pairs; any mismatch fails.
pub fn test_lambda_equivalence<T, M>(
    name: &str,
    model: &M,
    config: &AmsConfig<T>,
    m_reps: u64,
    base_seed: u64,
) -> Result<TestReport, AmsError>
where
    T: Real,
    M: RandomModel<T> + Sync,
{
    assert!(
        model.is_inverse_cdf(),
        "hazard equivalence requires the one-uniform sampler"
    );
    let twin = AmsConfig {
        n: config.n,
        k: config.k,
        x: model.lambda(config.x),
        a: model.lambda(config.a),
        max_iterations: config.max_iterations,
    };
    let mismatches: u64 = (0..m_reps)
        .into_par_iter()
        .map(|i| -> Result<u64, AmsError> {
            let mut rng_model = CounterRng::substream(base_seed, i);
            let mut rng_twin = CounterRng::substream(base_seed, i);
            let r = run_ams_from(model, config, &mut rng_model)?;
            let e = run_ams_from(&Exponential, &twin, &mut rng_twin)?;
            Ok(u64::from(r.j_count != e.j_count || r.n_above != e.n_above))
        })
        .collect::<Result<Vec<u64>, AmsError>>()?
        .into_iter()
        .sum();
    Ok(TestReport::from_statistic(
        name,
        mismatches as f64,
        0.5,
        None,
        format!(
            "{m_reps} paired runs, n = {}, k = {}; exact match required",
            config.n, config.k
        ),
    ))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ams::run_ams;
    use crate::models::Pareto;
    use approx::assert_relative_eq;

    fn plan(m: u64, seed: u64) -> ReplicationPlan {
        ReplicationPlan {
            m_reps: m,
            base_seed: seed,
            keep_runs: false,
        }
    }

    #[test]
    fn summaries_do_not_depend_on_thread_count() {
        let cfg = AmsConfig::new(8, 2, 0.0f64, 1.0);
        let p = plan(400, 11);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let s1 = single
            .install(|| run_replications(&Exponential, &cfg, &p))
            .unwrap();
        let s4 = quad
            .install(|| run_replications(&Exponential, &cfg, &p))
            .unwrap();
        assert_eq!(s1, s4);
    }

    #[test]
    fn replication_zero_matches_single_run() {
        let cfg = AmsConfig::new(6, 1, 0.0f64, 0.8);
        let seed = 97;
        let p = ReplicationPlan {
            m_reps: 16,
            base_seed: seed,
            keep_runs: true,
        };
        let summary = run_replications(&Exponential, &cfg, &p).unwrap();
        let single = run_ams(&Exponential, &cfg, seed).unwrap();
        assert_eq!(summary.runs[0].j_count, single.j_count);
        assert_eq!(summary.runs[0].estimate, single.estimate);
        assert_eq!(summary.runs.len(), 16);
    }

    #[test]
    fn summary_identities() {
        let cfg = AmsConfig::new(10, 3, 0.0f64, 1.3);
        let summary = run_replications(&Exponential, &cfg, &plan(500, 5)).unwrap();
        let total: u64 = summary.j_histogram.iter().map(|&(_, c)| c).sum();
        assert_eq!(total, 500);
        // samples = n + k J run by run, hence also in the means.
        assert_relative_eq!(
            summary.mean_samples,
            10.0 + 3.0 * summary.mean_j,
            max_relative = 1e-12
        );
        // The estimate of e^-1.3 should land inside a wide sanity band.
        assert!((summary.mean_estimate - (-1.3f64).exp()).abs() < 10.0 * summary.se_mean);
    }

    #[test]
    fn z_test_verdicts() {
        assert!(z_test("eq", 1.0, 1.0, 0.1, 4.0, "").pass);
        assert!(!z_test("off", 2.0, 1.0, 0.1, 4.0, "").pass);
        assert!(z_test("zero-se-eq", 3.0, 3.0, 0.0, 4.0, "").pass);
        assert!(!z_test("zero-se-ne", 3.0, 3.1, 0.0, 4.0, "").pass);
        let r = z_test("p", 1.2, 1.0, 0.1, 4.0, "");
        assert_relative_eq!(r.statistic, 2.0, max_relative = 1e-12);
        assert!((r.p_value.unwrap() - 0.0455).abs() < 1e-3);
    }

    // Inversion sampler used only to power the chi-square self-test.
    fn poisson_draw(lambda: f64, rng: &mut CounterRng) -> u64 {
        let mut u = rng.next_uniform();
        let mut j = 0u64;
        let mut pmf = (-lambda).exp();
        loop {
            if u <= pmf || j > 10_000 {
                return j;
            }
            u -= pmf;
            j += 1;
            pmf *= lambda / j as f64;
        }
    }

    fn poisson_histogram(lambda: f64, m: u64, seed: u64) -> Vec<(u64, u64)> {
        let mut rng = CounterRng::new(seed);
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..m {
            *hist.entry(poisson_draw(lambda, &mut rng)).or_insert(0) += 1;
        }
        hist.into_iter().collect()
    }

    #[test]
    fn chi_square_accepts_matching_law() {
        let hist = poisson_histogram(5.0, 20_000, 31);
        let r = chi_square_poisson("match", &hist, 5.0, 0.001, "");
        assert!(r.pass, "{r}");
        assert!(r.p_value.unwrap() > 0.001);
    }

    #[test]
    fn chi_square_rejects_shifted_law() {
        let hist = poisson_histogram(5.0, 20_000, 32);
        let r = chi_square_poisson("shifted", &hist, 5.6, 0.001, "");
        assert!(!r.pass, "{r}");
    }

    #[test]
    fn kolmogorov_tail_and_critical_value() {
        // Known point: Q(1.36) is close to 0.049 (the 5% critical scale).
        assert!((kolmogorov_q(1.36) - 0.049).abs() < 2e-3);
        let crit = kolmogorov_critical(0.001);
        assert!((crit - 1.95).abs() < 0.01, "crit {crit}");
        assert!((kolmogorov_q(crit) - 0.001).abs() < 1e-6);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_one_sample_uniform() {
        let mut rng = CounterRng::new(77);
        let xs: Vec<f64> = (0..5_000).map(|_| rng.next_uniform()).collect();
        let ok = ks_one_sample("uniform", &xs, |x| x.clamp(0.0, 1.0), 0.001, "");
        assert!(ok.pass, "{ok}");
        // Against the wrong law the same draws must be rejected.
        let bad = ks_one_sample("wrong-law", &xs, |x| (x * x).clamp(0.0, 1.0), 0.001, "");
        assert!(!bad.pass, "{bad}");
    }

    #[test]
    fn ks_two_sample_verdicts() {
        let mut rng = CounterRng::new(78);
        let xs: Vec<f64> = (0..4_000).map(|_| rng.next_uniform()).collect();
        let ys: Vec<f64> = (0..3_000).map(|_| rng.next_uniform()).collect();
        let same = ks_two_sample("same", &xs, &ys, 0.001, "");
        assert!(same.pass, "{same}");
        let zs: Vec<f64> = ys.iter().map(|&u| u * u).collect();
        let diff = ks_two_sample("squared", &xs, &zs, 0.001, "");
        assert!(!diff.pass, "{diff}");
    }

    #[test]
    fn hazard_equivalence_smoke() {
        let model = Pareto::new(2.0f64).unwrap();
        let cfg = AmsConfig::new(8, 1, 0.0f64, 1.0);
        let r = test_lambda_equivalence("pareto-pairing", &model, &cfg, 200, 901).unwrap();
        assert!(r.pass, "{r}");
    }
}

//! Acceptance suite: every headline property of the estimator checked
//! against an independent reference, one test per criterion.
//!
//! Each check prints one `[PASS]` / `[FAIL]` line (run with
//! `--nocapture` to watch them stream; on failure the harness replays
//! them). The criteria catalog lives in `ams_core::verify`; this file only
//! adds the pass/fail wiring so `cargo test --test acceptance` is the
//! one-command sign-off.

use ams_core::stats::TestReport;
use ams_core::verify;

fn check(reports: Vec<TestReport>) {
    assert!(!reports.is_empty(), "criterion produced no reports");
    let mut failed = 0usize;
    for report in &reports {
        println!("{report}");
        if !report.pass {
            failed += 1;
        }
    }
    assert_eq!(failed, 0, "{failed} of {} checks failed", reports.len());
}

#[test]
fn catalog_is_covered() {
    // One #[test] below per catalog entry; this guards against a criterion
    // being added to the library but forgotten here.
    assert_eq!(verify::CRITERIA.len(), 12);
}

#[test]
fn unbiasedness_exponential() {
    check(verify::unbiasedness_exponential());
}

#[test]
fn unbiasedness_committor() {
    check(verify::unbiasedness_committor());
}

#[test]
fn poisson_iteration_law() {
    check(verify::poisson_iteration_law());
}

#[test]
fn exact_variance_k1() {
    check(verify::exact_variance_k1());
}

#[test]
fn oracle_moment_agreement() {
    check(verify::oracle_moment_agreement());
}

#[test]
fn leading_order_asymptotics() {
    check(verify::leading_order_asymptotics());
}

#[test]
fn cost_limit_convergence() {
    check(verify::cost_limit_convergence());
}

#[test]
fn root_expansions() {
    check(verify::root_expansions());
}

#[test]
fn coefficient_identities() {
    check(verify::coefficient_identities());
}

#[test]
fn lambda_equivalence() {
    check(verify::lambda_equivalence());
}

#[test]
fn grid_solver_identity() {
    check(verify::grid_solver_identity());
}

#[test]
fn iid_structure() {
    check(verify::iid_structure());
}

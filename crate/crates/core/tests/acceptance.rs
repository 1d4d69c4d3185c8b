//! Acceptance suite: one test per criterion, each printing its pass/fail
//! line (visible with `--nocapture`; always shown on failure). The same
//! battery backs `balayage verify`.
//!
//! Criterion 7 contains two checks that are knowingly red; see the check
//! labels and the doc comment on `criterion_radial_dirichlet`. Everything
//! else is green.

use balayage_core::acceptance::{self, CheckLine};

fn run(id: usize, name: &str, budget_secs: u64, f: impl FnOnce() -> balayage_core::Result<Vec<CheckLine>>) {
    let start = std::time::Instant::now();
    let checks = f().expect("criterion errored");
    let elapsed = start.elapsed();
    let pass = checks.iter().all(|c| c.ok);
    println!(
        "criterion {:2} [{}] {:<22} ({} checks, {:.2}s / budget {budget_secs}s)",
        id,
        if pass { "PASS" } else { "FAIL" },
        name,
        checks.len(),
        elapsed.as_secs_f64(),
    );
    for check in &checks {
        println!("    [{}] {}", if check.ok { "ok" } else { "FAIL" }, check.label);
    }
    assert!(
        elapsed.as_secs() <= budget_secs,
        "criterion {id} exceeded its runtime budget: {:.2}s > {budget_secs}s",
        elapsed.as_secs_f64()
    );
    assert!(pass, "criterion {id} ({name}) has failing checks; see the lines above");
}

#[test]
fn criterion_01_circle_atoms() {
    run(1, "circle atoms", 1, acceptance::criterion_circle_atoms);
}

#[test]
fn criterion_02_sphere_cap() {
    run(2, "sphere cap", 2, acceptance::criterion_sphere_cap);
}

#[test]
fn criterion_03_s3_cap() {
    run(3, "s3 cap", 2, acceptance::criterion_s3_cap);
}

#[test]
fn criterion_04_nonexistence_diagnostic() {
    run(4, "nonexistence diagnostic", 10, acceptance::criterion_nonexistence);
}

#[test]
fn criterion_05_harmonic_balls() {
    run(5, "harmonic balls", 5, acceptance::criterion_harmonic_balls);
}

#[test]
fn criterion_06_laplacian_growth() {
    run(6, "laplacian growth", 10, acceptance::criterion_laplacian_growth);
}

/// Knowingly red on two of its checks: the reference outer-matching
/// equation for the radial free boundary carries a boundary-constant sign
/// slip for `n != 2`, so its root (and the `(n-2)/n` limiting fraction
/// derived from it) disagree with the true solution of the jump system.
/// The solver itself is validated against the value/flux-matched route
/// (and by independent ODE shooting); those companion checks pass.
#[test]
fn criterion_07_radial_dirichlet() {
    run(7, "radial dirichlet", 60, acceptance::criterion_radial_dirichlet);
}

#[test]
fn criterion_08_radial_neumann() {
    run(8, "radial neumann", 10, acceptance::criterion_radial_neumann);
}

#[test]
fn criterion_09_weighted_equilibrium() {
    run(9, "weighted equilibrium", 20, acceptance::criterion_equilibrium);
}

#[test]
fn criterion_10_property_battery() {
    run(10, "property battery", 60, || acceptance::criterion_property_battery(42));
}

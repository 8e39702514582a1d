use heitler::acceptance::{self, CriterionResult};

fn report(r: CriterionResult) {
    println!("{r}");
    assert!(r.passed, "{r}");
}

#[test]
fn a01_filtered_values() {
    report(acceptance::check_a1());
}

#[test]
fn a02_compensation_exactness() {
    report(acceptance::check_a2());
}

#[test]
fn a03_reference_point() {
    report(acceptance::check_a3());
}

#[test]
fn a04_joint_zeros() {
    report(acceptance::check_a4());
}

#[test]
fn a05_moment_solvers_agree() {
    report(acceptance::check_a5());
}

#[test]
fn a06_decomposition() {
    report(acceptance::check_a6());
}

#[test]
fn a07_emitter_dynamics() {
    report(acceptance::check_a7());
}

#[test]
fn a08_plateau() {
    report(acceptance::check_a8());
}

#[test]
fn a09_spectrum() {
    report(acceptance::check_a9());
}

#[test]
fn a10_rates() {
    report(acceptance::check_a10());
}

#[test]
fn a11_monte_carlo() {
    report(acceptance::check_a11());
}

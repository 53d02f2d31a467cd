//! The validation catalog as a test target: one test per criterion, each
//! printing its verdict line so `--nocapture` (or a failure) shows the
//! measured numbers behind the decision.
//!
//! The fast ladders keep the whole file in the minutes range; set
//! `LAMEGAP_SLOW=1` to extend every width ladder by a decade.

use lamegap::acceptance::{self, CriterionReport};

fn slow() -> bool {
    std::env::var("LAMEGAP_SLOW").is_ok_and(|v| v == "1")
}

fn check(report: CriterionReport) {
    println!("{}", report.line());
    assert!(report.pass, "{}", report.line());
}

#[test]
fn criterion_01_quadrature_closed_forms() {
    check(acceptance::quadrature_closed_forms());
}

#[test]
fn criterion_02_rate_equivalence_grid() {
    check(acceptance::rate_equivalence_grid(slow()));
}

#[test]
fn criterion_03_patch_and_rigid_nullspace() {
    check(acceptance::patch_and_rigid_nullspace());
}

#[test]
fn criterion_04_gram_structure() {
    check(acceptance::gram_structure(slow()));
}

#[test]
fn criterion_05_stiff_limit_cross_validation() {
    check(acceptance::stiff_limit_cross_validation());
}

#[test]
fn criterion_06_tilted_shortest_line_rate() {
    check(acceptance::tilted_shortest_line_rate(slow()));
}

#[test]
fn criterion_07_shortest_line_log_rate_m3() {
    check(acceptance::shortest_line_log_rate_m3(slow()));
}

#[test]
fn criterion_08_cylinder_surface_rate_m4() {
    check(acceptance::cylinder_surface_rate_m4(slow()));
}

#[test]
fn criterion_09_flat_contact_boundedness() {
    check(acceptance::flat_contact_boundedness(slow()));
}

#[test]
fn criterion_10_parity_suppression_vs_growth() {
    check(acceptance::parity_suppression_vs_growth(slow()));
}

#[test]
fn criterion_11_load_stabilization() {
    check(acceptance::load_stabilization(slow()));
}

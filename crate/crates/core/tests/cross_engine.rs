//! The three step-series engines against each other.

use asep_core::contour::{ContourSpec, QuadNodes};
use asep_core::fredholm::{cdf_term_fredholm, cdf_via_fredholm};
use asep_core::real::cabs;
use asep_core::step::{
    cdf_step, cdf_tasep, cdf_term_nested, pmf_step, Engine, Precision, SeriesSpec, StepKind, StepSeries,
};
use asep_core::{Dd, RateParams};

fn p03() -> RateParams {
    RateParams::new(0.3).unwrap()
}

#[test]
fn per_order_terms_agree_between_graded_and_nested() {
    let p = p03();
    let g = SeriesSpec::graded(&p);
    let mut n = SeriesSpec::nested(&p, 4);
    n.contour = ContourSpec::new(2.5, 64, &p).unwrap();
    for x in [-2i64, 0, 2] {
        let a = cdf_step(x, 0.5, &p, &g).unwrap();
        let b = cdf_step(x, 0.5, &p, &n).unwrap();
        for k in 0..4 {
            assert!((a.terms[k] - b.terms[k]).abs() < 1e-10, "x={x} k={}: {} vs {}", k + 1, a.terms[k], b.terms[k]);
        }
        let a = pmf_step(x, 0.5, &p, &g).unwrap();
        let b = pmf_step(x, 0.5, &p, &n).unwrap();
        for k in 0..4 {
            assert!((a.terms[k] - b.terms[k]).abs() < 1e-10, "pmf x={x} k={}", k + 1);
        }
    }
}

#[test]
fn bridge_identity_in_double_double() {
    let p = p03();
    let nodes: QuadNodes<Dd> = ContourSpec::new(2.0, 48, &p).unwrap().make_nodes();
    for x in [-1i64, 2] {
        for k in 1..=3 {
            let a = cdf_term_nested(x, k, 0.5, &p, &nodes).unwrap();
            let b = cdf_term_fredholm(x, k, 0.5, &p, &nodes).unwrap();
            assert!(cabs(a - b) <= 1e-12 * cabs(b), "x={x} k={k}");
        }
    }
}

#[test]
fn nystrom_engine_tracks_graded() {
    let p = p03();
    let mut s = SeriesSpec::nystrom(&p);
    s.contour = ContourSpec::new(2.0, 64, &p).unwrap();
    s.precision = Precision::Dd;
    let g = SeriesSpec::graded(&p);
    for x in [-2i64, -1, 0] {
        let a = cdf_via_fredholm(x, 0.5, &p, &s).unwrap();
        let b = cdf_step(x, 0.5, &p, &g).unwrap();
        assert!((a.value - b.value).abs() < 1e-8, "x={x}: {} vs {}", a.value, b.value);
    }
    assert!(cdf_via_fredholm(0, 0.5, &RateParams::tasep(), &s).is_err());
}

#[test]
fn contour_entries_are_radius_independent() {
    let p = p03();
    let base = StepSeries::new(p, SeriesSpec::graded(&p)).unwrap().table(StepKind::Cdf, -4, 4, 1.0).unwrap();
    for r in [2.0, 3.0] {
        let mut s = SeriesSpec::graded(&p);
        s.contour = ContourSpec::new(r, 512, &p).unwrap();
        s.contour_entries = true;
        let tab = StepSeries::new(p, s).unwrap().table(StepKind::Cdf, -4, 4, 1.0).unwrap();
        for (a, b) in tab.values().iter().zip(base.values()) {
            assert!((a - b).abs() < 1e-12, "R={r}");
        }
    }
}

#[test]
fn tasep_engines_and_small_tau_continuity() {
    let tasep = RateParams::tasep();
    let g = SeriesSpec::graded(&tasep);
    let mut n = SeriesSpec::nested(&tasep, 5);
    n.contour = ContourSpec::new(2.0, 48, &tasep).unwrap();
    let near = RateParams::new(1e-3 / 1.001).unwrap();
    let gn = SeriesSpec::graded(&near);
    for x in [-2i64, -1, 0, 1] {
        let a = cdf_tasep(x, 1.0, &g).unwrap();
        let b = cdf_tasep(x, 1.0, &n).unwrap();
        assert!((a.value - b.value).abs() < 1e-8, "x={x}: {} vs {}", a.value, b.value);
        let c = cdf_step(x, 1.0, &near, &gn).unwrap();
        assert!((a.value - c.value).abs() < 1e-2);
    }
    assert!(cdf_tasep(-1, 0.0, &g).unwrap().value.abs() < 1e-12);
    assert!((cdf_tasep(30, 1.0, &g).unwrap().value - 1.0).abs() < 1e-6);
}

#[test]
fn time_zero_values() {
    let p = p03();
    let g = SeriesSpec::graded(&p);
    assert!((pmf_step(0, 0.0, &p, &g).unwrap().value - 1.0).abs() < 1e-12);
    assert!(pmf_step(5, 0.0, &p, &g).unwrap().value.abs() < 1e-12);
    assert!(cdf_step(-1, 0.0, &p, &g).unwrap().value.abs() < 1e-12);
    let s = SeriesSpec::nystrom(&p);
    assert!(cdf_via_fredholm(-1, 0.0, &p, &s).unwrap().value.abs() < 1e-8);
    // Eight orders reach the peak term (near k = x + 1) only for x <= 6.
    assert!((cdf_via_fredholm(6, 0.5, &p, &s).unwrap().value - 1.0).abs() < 1e-6);
}

#[test]
fn engine_choice_is_recorded() {
    let p = p03();
    let tab = StepSeries::new(p, SeriesSpec::graded(&p)).unwrap().table(StepKind::Pmf, -3, 3, 0.2).unwrap();
    assert_eq!(tab.engine, Engine::Graded);
    assert!(tab.converged);
    assert!(tab.mass_defect < 1e-3);
}

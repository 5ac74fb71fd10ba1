use asep_core::contour::{default_radius, epsilon, ContourSpec, QuadNodes};
use asep_core::finite::{FiniteSeries, InitialConfig};
use asep_core::fredholm::{build_matrix, coefficients_of, det_coefficients, kernel_eval, tw2_identity_residual};
use asep_core::linalg::det;
use asep_core::qcalc::{collapsed_m_sum, collapsed_m_sum_direct, q_binomial, RateParams};
use asep_core::real::{cexp, lift, to_c64, Dd};
use asep_core::step::{integrand_j, integrand_j2, integrand_jtilde, kfold_integral, Symmetry};
use num_complex::Complex;
use proptest::prelude::*;

type C = Complex<f64>;

/// Gaussian polynomial coefficients of `[n over k]` in `tau`, by the
/// q-Pascal rule `[n,k] = [n-1,k-1] + tau^k [n-1,k]` on integer arrays.
fn gaussian_poly(n: usize, k: usize) -> Vec<u64> {
    let mut rows: Vec<Vec<Vec<u64>>> = vec![vec![vec![1]]];
    for m in 1..=n {
        let mut row = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let deg = j * (m - j);
            let mut c = vec![0u64; deg + 1];
            if j >= 1 {
                for (d, v) in rows[m - 1][j - 1].iter().enumerate() {
                    c[d] += v;
                }
            }
            if j < m {
                for (d, v) in rows[m - 1][j].iter().enumerate() {
                    c[d + j] += v;
                }
            }
            row.push(c);
        }
        rows.push(row);
    }
    rows[n][k].clone()
}

fn horner(c: &[u64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v as f64)
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 { 0.0 } else { (a - b).abs() / s }
}

fn crel(a: C, b: C) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 { 0.0 } else { (a - b).norm() / s }
}

fn params(idx: usize) -> RateParams {
    RateParams::new([0.1, 0.3, 0.45][idx]).unwrap()
}

fn growth(xi: &[C], t: f64, p: &RateParams) -> Vec<C> {
    xi.iter().map(|z| cexp(epsilon(*z, p).unwrap() * t)).collect()
}

fn on_circle(r: f64, angles: &[f64]) -> Vec<C> {
    angles.iter().map(|a| C::from_polar(r, *a)).collect()
}

/// Sum of all principal `k x k` minors.
fn principal_minor_sum(a: &[C], n: usize, k: usize) -> C {
    let mut total = C::new(0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub: Vec<C> = idx.iter().flat_map(|&i| idx.iter().map(move |&j| a[i * n + j])).collect();
        total += det(&sub, k);
    }
    total
}

const TAUS: [f64; 4] = [0.0, 0.1, 0.5, 0.9];
const ZS: [f64; 5] = [-2.0, -1.0, 0.5, 1.0, 3.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tau_binomial_theorem(n in 0usize..=12, zi in 0usize..5, ti in 0usize..4) {
        let (z, tau) = (ZS[zi], TAUS[ti]);
        let mut lhs = 0.0;
        let mut scale = 0.0;
        for j in 0..=n {
            let c = q_binomial(n as i64, j as i64, tau);
            let oracle = horner(&gaussian_poly(n, j), tau);
            prop_assert!(rel(c, oracle) < 1e-13, "[{n} over {j}] = {c} vs {oracle}");
            let term = c * (-z).powi(j as i32) * tau.powi((j * j.saturating_sub(1) / 2) as i32);
            lhs += term;
            scale += term.abs();
        }
        let rhs: f64 = (0..n).map(|j| 1.0 - z * tau.powi(j as i32)).product();
        let err = (lhs - rhs).abs();
        prop_assert!(err <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE) || err <= 1e-14 * scale,
            "n={n} z={z} tau={tau}: {lhs} vs {rhs}");
    }

    #[test]
    fn tau_binomial_symmetry(n in 0i64..=12, k in 0i64..=12, tau in 0.0f64..1.0) {
        prop_assume!(k <= n);
        prop_assert_eq!(q_binomial(n, k, tau), q_binomial(n, n - k, tau));
        prop_assert_eq!(q_binomial(n, k, 0.0), 1.0);
    }

    #[test]
    fn collapsed_sum_matches_closed_form(k in 1i64..=10, tau in prop_oneof![Just(0.1), Just(0.5), Just(0.9), 0.05f64..0.95]) {
        // The alternating m-sum cancels heavily near tau = 1; run both sides in double-double.
        let a = collapsed_m_sum(k, Dd::from(tau)).unwrap().hi();
        let b = collapsed_m_sum_direct(k, Dd::from(tau)).unwrap().hi();
        prop_assert!(rel(a, b) < 1e-12, "k={k} tau={tau}: {a} vs {b}");
    }

    #[test]
    fn integrands_are_permutation_symmetric(
        pi in 0usize..3,
        x in -4i64..6,
        t in 0.0f64..2.0,
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 1..=5),
        perm_seed in any::<u64>(),
    ) {
        let p = params(pi);
        let xi = on_circle(default_radius(&p), &angles);
        let g = growth(&xi, t, &p);
        let mut order: Vec<usize> = (0..xi.len()).collect();
        let mut s = perm_seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let xp: Vec<C> = order.iter().map(|&i| xi[i]).collect();
        let gp: Vec<C> = order.iter().map(|&i| g[i]).collect();
        for f in [integrand_jtilde::<f64>, integrand_j2::<f64>, integrand_j::<f64>] {
            let a = f(x, &xi, &g, &p).unwrap();
            let b = f(x, &xp, &gp, &p).unwrap();
            prop_assert!(crel(a, b) < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn j2_telescopes_to_j(
        pi in 0usize..3,
        x in -3i64..4,
        t in 0.0f64..1.0,
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 1..=4),
    ) {
        let p = params(pi);
        let xi = on_circle(default_radius(&p), &angles);
        let g = growth(&xi, t, &p);
        let mut sum = C::new(0.0, 0.0);
        for z in x - 60..=x {
            sum += integrand_j2(z, &xi, &g, &p).unwrap();
        }
        let j = integrand_j(x, &xi, &g, &p).unwrap();
        prop_assert!(crel(sum, j) < 1e-10, "{sum} vs {j}");
    }

    #[test]
    fn tw2_identity_on_random_tuples(
        pi in 0usize..3,
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 1..=5),
    ) {
        let p = params(pi);
        let xi: Vec<Complex<Dd>> = on_circle(default_radius(&p), &angles).into_iter().map(lift).collect();
        prop_assert!(tw2_identity_residual(&xi, &p).unwrap() < 1e-10);
    }

    #[test]
    fn newton_coefficients_match_principal_minors(
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
    ) {
        let a: Vec<C> = entries.iter().map(|&(re, im)| C::new(re, im)).collect();
        let d = coefficients_of(&a, 6, 6).unwrap();
        for k in 1..=6 {
            let e = principal_minor_sum(&a, 6, k);
            let want = if k % 2 == 0 { e } else { -e };
            prop_assert!((d.c[k] - want).norm() < 1e-12 * want.norm().max(1.0), "k={k}: {} vs {}", d.c[k], want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn finite_density_identity(
        raw in prop::collection::btree_set(1i64..=8, 1..=4),
        x in -6i64..=6,
        t in prop_oneof![Just(0.2), Just(1.0)],
    ) {
        let p = RateParams::new(0.3).unwrap();
        let y = InitialConfig::new(raw.into_iter().collect()).unwrap();
        let series = FiniteSeries::new(p, ContourSpec::new(2.0, 24, &p).unwrap());
        prop_assert!(series.density_identity_residual(&y, x, t).unwrap() < 1e-10);
    }
}

#[test]
fn matrix_entries_are_kernel_times_weight() {
    let p = RateParams::new(0.3).unwrap();
    let nodes: QuadNodes<f64> = QuadNodes::circle(2.0, 4).unwrap();
    let a = build_matrix(2, 0.7, &p, &nodes).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let k = kernel_eval(nodes.nodes[i], nodes.nodes[j], 2, 0.7, &p).unwrap();
            assert!((a.entries[i * 4 + j] - k * nodes.weights[j]).norm() < 1e-15);
        }
    }
}

#[test]
fn trace_is_the_diagonal_quadrature() {
    let p = RateParams::new(0.3).unwrap();
    let nodes: QuadNodes<f64> = ContourSpec::new(2.0, 48, &p).unwrap().make_nodes();
    let a = build_matrix(1, 0.5, &p, &nodes).unwrap();
    let tr: C = (0..a.m).map(|i| a.entries[i * a.m + i]).sum();
    let q = kfold_integral(|z| kernel_eval(z[0], z[0], 1, 0.5, &p), 1, &nodes, Symmetry::None).unwrap();
    assert!((tr - q).norm() < 1e-13);
}

#[test]
fn coefficients_are_k_fold_determinant_integrals() {
    let p = RateParams::new(0.3).unwrap();
    let nodes: QuadNodes<Dd> = ContourSpec::new(2.0, 24, &p).unwrap().make_nodes();
    let a = build_matrix(0, 0.5, &p, &nodes).unwrap();
    let d = det_coefficients(&a, 3).unwrap();
    let mut fact = 1.0;
    for k in 1..=3 {
        fact *= k as f64;
        let integrand = |z: &[Complex<Dd>]| {
            let m: Vec<Complex<Dd>> = z
                .iter()
                .flat_map(|&u| z.iter().map(move |&v| kernel_eval(u, v, 0, 0.5, &p).unwrap()))
                .collect();
            Ok(det(&m, z.len()))
        };
        let full = kfold_integral(integrand, k, &nodes, Symmetry::Symmetric).unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let want = to_c64(full) * (sign / fact);
        let got = to_c64(d.c[k]);
        assert!(crel(got, want) < 1e-12, "k={k}: {got} vs {want}");
    }
}

fn coefficient_gap(x: i64, t: f64, coarse: usize, fine: usize) -> f64 {
    let p = RateParams::new(0.3).unwrap();
    let a: QuadNodes<Dd> = ContourSpec::new(2.0, coarse, &p).unwrap().make_nodes();
    let b: QuadNodes<Dd> = ContourSpec::new(2.0, fine, &p).unwrap().make_nodes();
    let ca = det_coefficients(&build_matrix(x, t, &p, &a).unwrap(), 4).unwrap();
    let cb = det_coefficients(&build_matrix(x, t, &p, &b).unwrap(), 4).unwrap();
    (1..=4).map(|k| to_c64(ca.c[k] - cb.c[k]).norm()).fold(0.0, f64::max)
}

const REFINE_GRID: [(i64, f64); 5] = [(-2, 0.25), (0, 0.5), (1, 0.25), (2, 1.0), (4, 1.0)];

#[test]
fn coefficients_agree_between_48_and_96_nodes() {
    for (x, t) in REFINE_GRID {
        let gap = coefficient_gap(x, t, 48, 96);
        assert!(gap < 1e-10, "x={x} t={t}: gap {gap:e}");
    }
}

#[test]
fn coefficients_agree_between_96_and_192_nodes() {
    for (x, t) in REFINE_GRID {
        let gap = coefficient_gap(x, t, 96, 192);
        assert!(gap < 1e-10, "x={x} t={t}: gap {gap:e}");
    }
}

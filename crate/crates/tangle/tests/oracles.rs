use std::f64::consts::{E, PI};

use proptest::prelude::*;
use tangle::curve::PolyCurve;
use tangle::error::Error;
use tangle::oracles::*;
use tangle::poly::Poly;

#[test]
fn remez_examples() {
    let x = Poly::x();
    let r = remez_check(&x, (0.0, 1.0), &[(0.5, 1.0)]).unwrap();
    assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 8.0).abs() < 1e-12 && r.pass);
    let r = remez_check(&x, (0.0, 1.0), &[(0.0, 0.5)]).unwrap();
    assert!((r.rhs - 4.0).abs() < 1e-12 && r.pass);
    assert!(matches!(remez_check(&x, (0.0, 1.0), &[(0.3, 0.3)]), Err(Error::Precondition(_))));
}

/// Closed-form sublevel measure of `x^2 + b x + c`.
fn quadratic_sublevel(b: f64, c: f64, lambda: f64) -> f64 {
    let width = |s: f64| {
        let disc = b * b - 4.0 * (c - s);
        if disc > 0.0 { disc.sqrt() } else { 0.0 }
    };
    width(lambda) - width(-lambda)
}

#[test]
fn polya_examples() {
    let r = polya_check(&Poly::x(), 1.0).unwrap();
    assert!((r.lhs - 2.0).abs() < 1e-12 && (r.rhs - 2.0).abs() < 1e-12 && r.pass);
    let r = polya_check(&Poly::new(vec![0.0, 0.0, 1.0]), 1.0).unwrap();
    assert!((r.lhs - 2.0).abs() < 1e-12);
    assert!((r.rhs - 2.0 * 2f64.sqrt()).abs() < 1e-12 && r.pass);
    assert!(matches!(polya_check(&Poly::constant(3.0), 1.0), Err(Error::Precondition(_))));
}

#[test]
fn sublevel_matches_quadratic_formula() {
    for i in 0..50 {
        let b = -1.0 + 0.04 * i as f64;
        let c = 0.3 - 0.017 * i as f64;
        for lambda in [0.01, 0.1, 0.5, 2.0] {
            let got = sublevel_measure(&Poly::new(vec![c, b, 1.0]), lambda).unwrap();
            let want = quadratic_sublevel(b, c, lambda);
            assert!((got - want).abs() < 1e-9, "b={b} c={c} λ={lambda}: {got} vs {want}");
        }
    }
}

#[test]
fn derivative_bound_examples() {
    let d = 1e-4;
    let f = PolyCurve::constant(d / 2.0);
    let r = derivative_bound_check(&f, d, (0.2, 0.2 + d.sqrt()), 2).unwrap();
    assert!((r.lhs - 0.5).abs() < 1e-12 && r.pass);

    // s T_2 on I with |I| = δ^{1/2}: sup |f'| = 8 s / |I| gives ratio 8 s / δ
    let (a, len) = (0.3, d.sqrt());
    let s = d / 32.0;
    let t2 = Poly::new(vec![-1.0, 0.0, 2.0]).compose_affine(-1.0 - 2.0 * a / len, 2.0 / len).scale(s);
    let f = PolyCurve::from_poly(t2, (a, a + len)).unwrap();
    let r = derivative_bound_check(&f, d, (a, a + len), 2).unwrap();
    assert!((r.lhs - 0.25).abs() < 1e-9, "{}", r.lhs);
    assert_eq!(r.rhs, 2.0 * 8f64.powi(4) * 2.0);

    let long = derivative_bound_check(&PolyCurve::constant(0.0), d, (0.0, 0.5), 2);
    assert!(matches!(long, Err(Error::Precondition(_))));
}

#[test]
fn long_rect_examples() {
    let f = PolyCurve::constant(0.0);
    let r = long_rect_check(&f, 1e-3, 10.0, 0.1, 2).unwrap();
    assert!(r.margin.is_infinite() && r.pass);

    // T >= δ^{-1/k}: the conclusion interval sits inside I
    let d = 1e-4;
    let f = PolyCurve::constant(d);
    let r = long_rect_check(&f, d, 1.0 / d, 0.0, 2).unwrap();
    assert!((r.lhs - 1.0).abs() < 1e-12);

    // f = c (t - a)^2, I of length Tδ, δ = c (Tδ)^2; on [a, a + ρ^{1/2}] sup |f| = c ρ
    let (a, c, t) = (0.2, 0.1, 4.0);
    let len: f64 = 0.05;
    let delta = c * len * len;
    let t_param = len / delta;
    assert!(t_param >= t);
    let f = PolyCurve::from_poly(Poly::new(vec![0.0, 0.0, c]).compose_affine(-a, 1.0), (0.0, 1.0)).unwrap();
    let r = long_rect_check(&f, delta, t_param, a, 2).unwrap();
    let rho = delta.max(t_param.powi(-2));
    let want = c * rho.min((1.0 - a) * (1.0 - a)) / rho;
    assert!((r.lhs - want).abs() < 1e-9, "{} vs {}", r.lhs, want);
    assert!(r.pass);
}

#[test]
fn pigeonhole_examples() {
    let d = 1e-3;
    let same: Vec<PolyCurve> = (0..5).map(|j| PolyCurve::constant(0.1 * d * j as f64)).collect();
    let (r, w) = pigeonhole_rect_check(&same, 0.2, d, 1.0, 2).unwrap();
    assert_eq!(w.len(), 5);
    assert!(r.pass);

    let ladder: Vec<PolyCurve> = (0..10).map(|j| PolyCurve::constant(0.9 * d * j as f64)).collect();
    let (r, w) = pigeonhole_rect_check(&ladder, 0.2, d, 9.0, 2).unwrap();
    // largest set of points 0.9δ j fitting in a window of width δ
    let best = (0..10).map(|i| (i..10).filter(|&j| 0.9 * (j - i) as f64 <= 1.0).count()).max().unwrap();
    assert_eq!(w.len(), best);
    for &i in &w {
        for &j in &w {
            assert!(0.9 * d * (i as f64 - j as f64).abs() <= d * (1.0 + 1e-12));
        }
    }
    assert!(r.pass && (r.constant - 1.0 / 36.0).abs() < 1e-15);

    let far = vec![PolyCurve::constant(0.0), PolyCurve::constant(5.0 * d)];
    assert!(matches!(pigeonhole_rect_check(&far, 0.2, d, 4.0, 2), Err(Error::Precondition(_))));
}

#[test]
fn pigeonhole_random_fraction() {
    let s = run_suite("pigeonhole", 200, 3).unwrap();
    assert!(s.ok());
    for c in &s.cases {
        assert!(c.rhs >= c.lhs, "{c:?}");
    }
}

#[test]
fn gronwall_constant_field() {
    let rho = 1e-3;
    let zero = |_t: f64, _x: &[f64]| 0.0;
    let f = |_t: f64, i: usize| if i == 0 { 0.3 } else { 0.0 };
    let g = |_t: f64, i: usize| if i == 0 { 0.3 + rho / 2.0 } else { 0.0 };
    let r = gronwall_closeness(&f, &g, &zero, 1.0, rho, (0.0, 1.0), 1, 100).unwrap();
    assert!((r.report.lhs - rho / 2.0).abs() < 1e-15 && r.report.pass);
}

#[test]
fn gronwall_exponential() {
    let rho = 1e-4;
    let field = |_t: f64, x: &[f64]| x[0];
    let f = |t: f64, _i: usize| t.exp();
    let g = |t: f64, _i: usize| (1.0 + rho / 2.0) * t.exp();
    let r = gronwall_closeness(&f, &g, &field, 1.0, rho, (0.0, 1.0), 1, 200).unwrap();
    assert_eq!(r.t0, 0.0);
    assert!((r.report.lhs - rho / 2.0 * E).abs() < 1e-12);
    assert!((r.report.rhs - 8.0 * E * rho).abs() < 1e-15);
    assert!(r.report.pass);
    // the comparison solution is (1 + ρ/4) e^t
    assert!((r.sup_h_f - rho / 4.0 * E).abs() < rho / 100.0, "{}", r.sup_h_f);
    assert!((r.sup_h_g - rho / 4.0 * E).abs() < rho / 100.0);

    let far = |t: f64, _i: usize| 2.0 * t.exp();
    assert!(matches!(gronwall_closeness(&f, &far, &field, 1.0, rho, (0.0, 1.0), 1, 50), Err(Error::Precondition(_))));
}

#[test]
fn ivp_matches_cosine_and_self_consistency() {
    let field = |_t: f64, x: &[f64]| -x[0];
    let ts: Vec<f64> = (1..=20).map(|i| i as f64 * 0.25).collect();
    let mut prev: Option<Vec<f64>> = None;
    let mut tol = 1e-4;
    for _ in 0..4 {
        let s = solve_ivp(&field, 0.0, &[1.0, 0.0], &ts, tol).unwrap();
        for (t, y) in s.ts.iter().zip(&s.ys) {
            assert!((y[0] - t.cos()).abs() <= tol, "t={t}");
        }
        let now: Vec<f64> = s.ys.iter().map(|y| y[0]).collect();
        if let Some(p) = prev {
            let diff = p.iter().zip(&now).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 2.0 * tol);
        }
        prev = Some(now);
        tol /= 2.0;
    }
    let back = solve_ivp(&field, 1.0, &[1f64.cos(), -1f64.sin()], &[0.5, 0.0], 1e-8).unwrap();
    assert!((back.ys[1][0] - 1.0).abs() < 1e-8);
}

#[test]
fn cinematic_norm_examples() {
    let d = 1e-3;
    for k in [2, 3] {
        let f = PolyCurve::constant(d / 2.0);
        let r = cinematic_norm_check(&f, (0.4, 0.6), k as f64 + 1.0, k, d).unwrap();
        assert!(r.pass && (r.lhs - d / 2.0 / ((k as f64 + 1.0) / 0.2).powi(k as i32) / d).abs() < 1e-12);
    }
    // difference of two nearby moment curves u0 + u1 t + u2 t^2
    let (u, v) = ([0.1, -0.2, 0.3], [0.1005, -0.2003, 0.3002]);
    let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
    let f = PolyCurve::new(diff).unwrap();
    let j = (0.25, 0.5);
    let delta = f.poly().sup_abs(j.0, j.1).upper;
    // jet sum >= |f''| = 4e-4 while ||f|| <= 2.3e-3
    let r = cinematic_norm_check(&f, j, 6.0, 2, delta).unwrap();
    assert!(r.pass);
    let bad = cinematic_norm_check(&f, j, 6.0, 2, delta / 10.0);
    assert!(matches!(bad, Err(Error::Precondition(_))));
}

/// Area of `{|x| <= ρ}` inside the unit disk.
fn strip_area(rho: f64) -> f64 {
    2.0 * (rho * (1.0 - rho * rho).sqrt() + rho.asin())
}

#[test]
fn wongkew_strip_and_annulus() {
    let rho = 0.01;
    let strip = MPoly::new(2, vec![(1.0, vec![1, 0])]).unwrap();
    let r = wongkew_volume(&strip, rho, 1.0, &[0.0, 0.0], 400_000, 5, WONGKEW_C).unwrap();
    let exact = strip_area(rho);
    assert!((r.estimate - exact).abs() <= 3.0 * r.sigma, "{} vs {exact} σ {}", r.estimate, r.sigma);
    assert!(r.report.pass && (r.report.rhs - 8.0 * rho).abs() < 1e-15);

    let circle = MPoly::new(2, vec![(1.0, vec![2, 0]), (1.0, vec![0, 2]), (-1.0, vec![0, 0])]).unwrap();
    let r = wongkew_volume(&circle, rho, 1.25, &[0.0, 0.0], 400_000, 6, WONGKEW_C).unwrap();
    // |r^2 - 1| / (2r) <= ρ is the annulus between sqrt(1+ρ^2) ∓ ρ
    let exact = 4.0 * PI * rho * (1.0 + rho * rho).sqrt();
    assert!((r.estimate - exact).abs() <= 3.0 * r.sigma, "{} vs {exact}", r.estimate);
    assert!(r.report.pass && (r.report.rhs - 8.0 * 4.0 * rho * 1.25).abs() < 1e-12);

    let thick = wongkew_volume(&strip, 1.0, 1.0, &[0.0, 0.0], 10_000, 1, WONGKEW_C).unwrap();
    assert!(thick.estimate <= thick.ball_volume + 1e-12);

    let zero = MPoly::new(2, vec![]).unwrap();
    assert!(wongkew_volume(&zero, rho, 1.0, &[0.0, 0.0], 100, 1, 8.0).is_err());
    let flat = MPoly::new(2, vec![(1.0, vec![0, 0])]).unwrap();
    assert!(matches!(wongkew_volume(&flat, rho, 1.0, &[0.0, 0.0], 100, 1, 8.0), Err(Error::Numerical(_))));
}

#[test]
fn suite_reports_render() {
    let s = run_suite("remez", 20, 9).unwrap();
    assert!(s.ok());
    let mut failing = s.clone();
    failing.cases[3].status = CaseStatus::Fail;
    failing.cases[3].repro = Some(repro_command("remez", 9, 3));
    failing.failed = 1;
    let xml = suites_to_junit(&[failing]);
    assert!(xml.contains("tests=\"20\"") && xml.contains("<failure"));
    assert!(xml.contains("tangle lemmas --seed 9 --only remez --instance 3"));
    let json = suites_to_json(&[s.clone()]).unwrap();
    let back: Vec<SuiteReport> = serde_json::from_str(&json).unwrap();
    assert_eq!(back[0].n, 20);
    // each instance is reproducible on its own
    let one = random_instance("remez", 9, 7).unwrap();
    assert_eq!(one.lhs, s.cases[7].lhs);
    assert!(run_suite("nope", 1, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pass_flag_matches_slack(lhs in 0.0f64..10.0, rhs in 0.0f64..10.0) {
        let r = LemmaReport::new("x", String::new(), lhs, rhs, 1.0);
        prop_assert_eq!(r.pass, lhs <= rhs + 1e-9 * rhs);
    }

    #[test]
    fn larger_constant_never_flips(seed in 0u64..1000, grow in 1.0f64..100.0) {
        let d = 1e-3 * (1.0 + (seed % 7) as f64);
        let a = 0.1 + 0.001 * (seed % 13) as f64;
        let len = d.sqrt() * 0.9;
        let f = PolyCurve::new(vec![d / 3.0, -0.01 * (seed % 5) as f64 * d.sqrt(), 0.2]).unwrap();
        if let Ok(base) = derivative_bound_with(&f, d, (a, a + len), 2, 1.0) {
            let big = derivative_bound_with(&f, d, (a, a + len), 2, grow).unwrap();
            prop_assert!(!base.pass || big.pass);
        }
    }

    #[test]
    fn polya_holds_for_random_monic(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, e in -8i32..3) {
        let r = polya_check(&Poly::new(vec![c0, c1, c2, 1.0]), 2f64.powi(e)).unwrap();
        prop_assert!(r.pass);
    }
}

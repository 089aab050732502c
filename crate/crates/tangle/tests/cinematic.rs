use proptest::prelude::*;
use tangle::cinematic::*;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

// Gaussian elimination with partial pivoting, kept separate from nalgebra.
fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap()).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    d
}

// Rows j = 0..m of (d/dt)^j applied to t^i.
fn confluent_vandermonde(m: usize, t: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|j| {
            (0..m)
                .map(|i| if i < j { 0.0 } else { factorial(i) / factorial(i - j) * t.powi((i - j) as i32) })
                .collect()
        })
        .collect()
}

#[test]
fn moment_determinant_is_factorial_product() {
    for m in 2..=4 {
        let spec = CinematicSpec::moment(m, 1).unwrap();
        let want: f64 = (0..m).map(factorial).product();
        for &t in &[0.0, 0.3, 0.9] {
            let u = vec![0.5; m];
            let got = spec.jet_jacobian(&u, t, m).unwrap().determinant();
            let oracle = det(confluent_vandermonde(m, t));
            assert!((oracle - want).abs() < 1e-9 * want);
            assert!((got - want).abs() < 1e-9 * want, "m={m} t={t}: {got}");
        }
        let r = cinematic_check(&spec, 200, 3).unwrap();
        assert!((r.min_abs_det - want).abs() < 1e-9 * want);
    }
    let two = CinematicSpec::moment(2, 1).unwrap();
    assert_eq!(cinematic_check(&two, 50, 1).unwrap().min_abs_det, 1.0);
}

#[test]
fn circle_is_cinematic() {
    let r = cinematic_check(&CinematicSpec::circle(), 10_000, 7).unwrap();
    assert!(r.min_abs_det > 0.0);
    assert_eq!(r.samples, 10_000);
}

#[test]
fn circle_jacobian_matches_finite_differences() {
    let spec = CinematicSpec::circle();
    let u = [0.03, -0.02, 1.05];
    let t = 0.04;
    let jac = spec.jet_jacobian(&u, t, 2).unwrap();
    let h = |u: &[f64], t: f64| (u[2] * u[2] - (t - u[0]).powi(2)).sqrt() - u[1];
    let dt = |u: &[f64]| {
        let e = 1e-6;
        (h(u, t + e) - h(u, t - e)) / (2.0 * e)
    };
    for l in 0..3 {
        let e = 1e-6;
        let mut up = u;
        let mut dn = u;
        up[l] += e;
        dn[l] -= e;
        let d0 = (h(&up, t) - h(&dn, t)) / (2.0 * e);
        assert!((jac[(0, l)] - d0).abs() < 1e-6, "row 0 col {l}");
        let d1 = (dt(&up) - dt(&dn)) / (2.0 * e);
        assert!((jac[(1, l)] - d1).abs() < 1e-3, "row 1 col {l}");
    }
}

// m = 4, s = 1, projection dropping u0: the smallest singular value is
// sqrt(1 - |P_V e0|^2) with V parametrized by the free coordinates (u2, u3).
fn moment4_oracle(t: f64) -> f64 {
    let lift = |u2: f64, u3: f64| {
        let u1 = -2.0 * t * u2 - 3.0 * t * t * u3;
        let u0 = -(t * u1 + t * t * u2 + t * t * t * u3);
        [u0, u1, u2, u3]
    };
    let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let a = lift(1.0, 0.0);
    let b = lift(0.0, 1.0);
    let na = dot(&a, &a).sqrt();
    let e1: [f64; 4] = a.map(|x| x / na);
    let c = dot(&b, &e1);
    let mut e2 = [0.0; 4];
    for i in 0..4 {
        e2[i] = b[i] - c * e1[i];
    }
    let n2 = dot(&e2, &e2).sqrt();
    let e2 = e2.map(|x| x / n2);
    (1.0 - e1[0] * e1[0] - e2[0] * e2[0]).sqrt()
}

#[test]
fn transversality_examples() {
    let spec = CinematicSpec::moment(4, 1).unwrap();
    let r = transversality_rank(&spec, 1, 300, 2).unwrap();
    assert!(!r.vacuous && r.pass);
    assert_eq!(r.rank, 2);
    // exactly 1 at t = 0, where V is orthogonal to the dropped coordinate
    let u = [0.2, 0.4, 0.6, 0.8];
    let (sv0, rank0) = transversality_at(&spec, 1, &u, 0.0).unwrap();
    assert!((sv0 - 1.0).abs() < 1e-12 && rank0 == 2);
    for &t in &[0.1, 0.5, 1.0] {
        let (sv, _) = transversality_at(&spec, 1, &u, t).unwrap();
        let want = moment4_oracle(t);
        assert!((sv - want).abs() < 1e-9, "t={t}: {sv} vs {want}");
    }
    assert!((r.min_singular_value - moment4_oracle(r.argmin_t)).abs() < 1e-9);
    let top = CinematicSpec::moment(4, 3).unwrap();
    assert!(transversality_rank(&top, 3, 10, 2).unwrap().vacuous);
    let c = transversality_rank(&CinematicSpec::circle(), 1, 500, 4).unwrap();
    assert!(c.pass);
    assert_eq!(c.rank, 1);
    assert!(transversality_rank(&spec, 4, 10, 0).is_err());
}

#[test]
fn spec_validation() {
    assert!(CinematicSpec::moment(2, 2).is_err());
    assert!(CinematicSpec::moment(3, 0).is_err());
    let mut bad = CinematicSpec::circle();
    bad.projection = Projection::Coords { indices: vec![0, 0] };
    assert!(bad.validate().is_err());
    assert!(CinematicSpec::ellipse().validate().is_ok());
}

#[test]
fn moment_grid_gives_four_lines() {
    let spec = CinematicSpec::moment(2, 1).unwrap();
    let b = build_family(&spec, &ParamGrid::Counts(vec![2, 2]), 0, &BuildOptions { k: 1, ..Default::default() }).unwrap();
    assert_eq!(b.family.len(), 4);
    assert!(b.family.curves.iter().all(|c| c.degree() <= 1));
    let mut params = b.params.clone();
    params.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(params, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    assert!(b.approx_errors.iter().all(|&e| e == 0.0));
}

#[test]
fn circle_approximant_is_accurate() {
    let spec = CinematicSpec::circle();
    let opts = BuildOptions { k: 2, approx_degree: 10, max_error: 1e-8 };
    let b = build_family(&spec, &ParamGrid::Counts(vec![1, 1, 1]), 0, &opts).unwrap();
    assert_eq!(b.params, vec![vec![0.0, 0.0, 1.0]]);
    let f = &b.family.curves[0];
    let s = b.family.rescale;
    for i in 0..=1001 {
        let t = -0.1 + 0.2 * i as f64 / 1001.0;
        let want = (1.0 - t * t).sqrt();
        assert!((f.eval(t) / s - want).abs() < 1e-8, "t={t}");
    }
}

#[test]
fn ellipse_unit_axes_matches_circle() {
    let e = CinematicSpec::ellipse();
    let c = CinematicSpec::circle();
    for i in 0..=20 {
        let t = -0.1 + 0.01 * i as f64;
        let a = e.eval(&[1.0, 1.0, 0.0, 0.0, 0.0], t).unwrap();
        let b = c.eval(&[0.0, 0.0, 1.0], t).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - (1.0 - t * t).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn build_rejects_loose_tolerance_and_is_deterministic() {
    let spec = CinematicSpec::circle();
    let tight = BuildOptions { k: 2, approx_degree: 2, max_error: 1e-14 };
    assert!(build_family(&spec, &ParamGrid::Counts(vec![1, 1, 1]), 0, &tight).is_err());
    let opts = BuildOptions::default();
    let a = build_family(&spec, &ParamGrid::Random(6), 9, &opts).unwrap();
    let b = build_family(&spec, &ParamGrid::Random(6), 9, &opts).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.family.curves, b.family.curves);
    let c = build_family(&spec, &ParamGrid::Random(6), 10, &opts).unwrap();
    assert_ne!(a.params, c.params);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moment_det_independent_of_point(u in prop::collection::vec(0.0f64..1.0, 3), t in 0.0f64..1.0) {
        let spec = CinematicSpec::moment(3, 1).unwrap();
        let d = spec.jet_jacobian(&u, t, 3).unwrap().determinant();
        prop_assert!((d - 2.0).abs() < 1e-10);
    }

    #[test]
    fn built_norms_are_at_most_one(n in 1usize..6, seed in 0u64..1000) {
        let spec = CinematicSpec::moment(3, 1).unwrap();
        let b = build_family(&spec, &ParamGrid::Random(n), seed, &BuildOptions::default()).unwrap();
        for f in &b.family.curves {
            prop_assert!(tangle::curve::ck_norm(f, 2).unwrap().upper <= 1.0 + tangle::curve::NORM_SLACK);
        }
    }
}

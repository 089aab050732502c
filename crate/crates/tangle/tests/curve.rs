use proptest::prelude::*;
use tangle::curve::*;

fn dense_norm(f: &PolyCurve, k: usize, n: usize) -> f64 {
    let (a, b) = f.domain();
    (0..=k)
        .map(|i| (0..=n).map(|j| f.eval_deriv(i, a + (b - a) * j as f64 / n as f64).abs()).fold(0.0, f64::max))
        .sum()
}

#[test]
fn jet_examples() {
    let sq = PolyCurve::new(vec![0.0, 0.0, 1.0]).unwrap();
    assert_eq!(eval_jet(&sq, 1, 0.5).unwrap().values, vec![0.25, 1.0]);
    let c = PolyCurve::constant(0.7);
    assert_eq!(eval_jet(&c, 3, 0.2).unwrap().values, vec![0.7, 0.0, 0.0, 0.0]);
    assert!(eval_jet(&sq, 1, 1.5).is_err());
}

#[test]
fn jet_matches_finite_differences() {
    let f = PolyCurve::new(vec![0.0, -1.0, 0.0, 1.0]).unwrap();
    let (t, h) = (0.3, 1e-5);
    let j = eval_jet(&f, 2, t).unwrap().values;
    let v = |x: f64| x * x * x - x;
    let d1 = (v(t + h) - v(t - h)) / (2.0 * h);
    let d2 = (v(t + h) - 2.0 * v(t) + v(t - h)) / (h * h);
    assert!((j[1] - d1).abs() < 1e-6);
    assert!((j[2] - d2).abs() < 1e-4);
}

#[test]
fn norm_examples() {
    let id = PolyCurve::new(vec![0.0, 1.0]).unwrap();
    let n = ck_norm(&id, 1).unwrap();
    assert!(n.lower <= 2.0 && 2.0 <= n.upper);
    assert_eq!(ck_norm(&PolyCurve::constant(0.0), 3).unwrap().upper, 0.0);
    let q = PolyCurve::new(vec![0.0, -1.0, 1.0]).unwrap();
    let n = ck_norm(&q, 2).unwrap();
    assert!(n.lower <= 3.25 + 1e-12 && 3.25 - 1e-12 <= n.upper, "{n:?}");
    assert!(n.upper - n.lower < 1e-9);
}

#[test]
fn forbid_line_pair() {
    let f = vec![PolyCurve::constant(0.0), PolyCurve::new(vec![-0.5, 1.0]).unwrap()];
    let r = forbid_constant(&f, 1).unwrap();
    assert!((r.c - 2.0 / 3.0).abs() < 1e-9, "{r:?}");
    let one = forbid_constant(&f[..1], 1).unwrap();
    assert!(one.c.is_infinite());
}

#[test]
fn forbid_matches_grid_refinement() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let curves: Vec<PolyCurve> =
        (0..12).map(|_| PolyCurve::new((0..4).map(|_| rng.gen_range(-0.2..0.2)).collect()).unwrap()).collect();
    let k = 3;
    let r = forbid_constant(&curves, k).unwrap();
    // brute force over a fine t grid
    let grid = |n: usize| {
        let mut best = f64::INFINITY;
        for i in 0..curves.len() {
            for j in i + 1..curves.len() {
                let h = curves[i].sub(&curves[j]);
                let inf = (0..=n)
                    .map(|s| {
                        let t = s as f64 / n as f64;
                        (0..=k).map(|d| h.eval_deriv(d, t).abs()).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                best = best.min(inf / dense_norm(&h, k, n));
            }
        }
        best
    };
    let (g3, g4) = (grid(1000), grid(10000));
    assert!((g3 - g4).abs() < 1e-3);
    assert!(r.c > 0.0);
    assert!((r.c - g4).abs() < 1e-3, "{} vs {}", r.c, g4);
}

#[test]
fn approximation_examples() {
    let p = poly_approximate(|t| 1.0 - 2.0 * t + 0.5 * t * t * t, (0.0, 1.0), 3, 20).unwrap();
    assert!(p.sup_error <= 1e-10);
    let c = poly_approximate(|t| (1.0 - t * t).sqrt(), (-0.5, 0.5), 8, 40).unwrap();
    assert!(c.sup_error < 1e-6);
    // independent residual on a grid the fit never saw
    let worst = (0..=997).map(|i| -0.5 + i as f64 / 997.0).map(|t| (c.curve.eval(t) - (1.0 - t * t).sqrt()).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6);
    let kink = poly_approximate(|t| (t - 0.5).abs(), (0.0, 1.0), 4, 20).unwrap();
    assert!(kink.sup_error >= 0.01);
    assert!(poly_approximate(|t| t, (0.0, 1.0), 5, 3).is_err());
}

#[test]
fn family_json_round_trip() {
    let fam = CurveFamily::new(
        vec![PolyCurve::new(vec![0.1, 0.2]).unwrap(), PolyCurve::new(vec![0.3, -0.1, 0.05]).unwrap()],
        2,
        "test",
    )
    .unwrap();
    let s = fam.to_json().unwrap();
    let back = CurveFamily::from_json(&s).unwrap();
    assert_eq!(back.curves, fam.curves);
    assert_eq!(back.k, 2);
}

#[test]
fn family_rejects_large_norm() {
    let big = PolyCurve::new(vec![0.0, 0.0, 5.0]).unwrap();
    assert!(CurveFamily::new(vec![big.clone()], 2, "x").is_err());
    let n = CurveFamily::normalized(vec![big, PolyCurve::new(vec![0.1]).unwrap()], 2, "x").unwrap();
    assert!(n.curves.iter().all(|f| ck_norm(f, 2).unwrap().upper <= 1.0 + NORM_SLACK));
}

fn coeffs(max_deg: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..=max_deg + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_brackets_dense_grid(c in coeffs(10), k in 0usize..4) {
        let f = PolyCurve::new(c).unwrap();
        let n = ck_norm(&f, k).unwrap();
        let emp = dense_norm(&f, k, 100_000);
        prop_assert!(n.lower <= emp + 1e-9 * emp.max(1.0));
        prop_assert!(emp <= n.upper + 1e-9 * emp.max(1.0));
    }

    #[test]
    fn jet_agrees_with_derivatives(c in coeffs(8), t in 0.0f64..1.0) {
        let f = PolyCurve::new(c).unwrap();
        let j = eval_jet(&f, 4, t).unwrap();
        for i in 0..=4 {
            prop_assert!((j.values[i] - f.deriv(i).eval(t)).abs() <= 1e-12 * j.values[i].abs().max(1.0));
        }
    }

    #[test]
    fn forbid_scale_invariant(a in coeffs(3), b in coeffs(3), lam in 0.1f64..10.0) {
        let f = vec![PolyCurve::new(a).unwrap(), PolyCurve::new(b).unwrap()];
        prop_assume!(!f[0].sub(&f[1]).poly().is_zero());
        let r1 = forbid_constant(&f, 2).unwrap();
        let g: Vec<PolyCurve> = f.iter().map(|x| x.scale(lam)).collect();
        let r2 = forbid_constant(&g, 2).unwrap();
        prop_assert!((r1.c - r2.c).abs() <= 1e-7 * r1.c.max(1e-3));
    }
}

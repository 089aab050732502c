use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangle::curve::{ck_norm, PolyCurve, NORM_SLACK};
use tangle::rect::*;

fn zero_rect(anchor: f64, delta: f64, k: usize) -> TangencyRect {
    TangencyRect::unit_t(PolyCurve::constant(0.0), anchor, delta, k).unwrap()
}

/// Random polynomial of the given degree with C^k norm at most 1/2.
fn random_curve(rng: &mut ChaCha8Rng, deg: usize, k: usize) -> PolyCurve {
    let f = PolyCurve::new((0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let n = ck_norm(&f, k).unwrap().upper;
    f.scale(0.5 / n.max(1e-9))
}

fn dense_sup(f: &PolyCurve, g: &PolyCurve, lo: f64, hi: f64) -> f64 {
    (0..=20_000).map(|i| lo + (hi - lo) * i as f64 / 20_000.0).map(|t| (f.eval(t) - g.eval(t)).abs()).fold(0.0, f64::max)
}

#[test]
fn tangency_examples() {
    let d = 0.01;
    let r = zero_rect(0.2, d, 2);
    let t = is_tangent(&PolyCurve::constant(d / 2.0), &r).unwrap();
    assert!(t.tangent && (t.sup - d / 2.0).abs() < 1e-15);
    assert!(!is_tangent(&PolyCurve::constant(2.0 * d), &r).unwrap().tangent);
    // t^k reaches δ exactly at the right end of [0, δ^{1/k}]
    for k in 1..=3 {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        let f = PolyCurve::new(c).unwrap();
        let t = is_tangent(&f, &zero_rect(0.0, d, k)).unwrap();
        assert!(t.tangent, "k={k}");
        assert!((t.sup - d).abs() < 1e-12);
    }
}

#[test]
fn taylor_model_examples() {
    let lin = PolyCurve::new(vec![0.1, 0.3]).unwrap();
    let r = TangencyRect::unit_t(lin.clone(), 0.4, 0.01, 2).unwrap();
    let m = taylor_model(&r);
    assert!(m.sub(&lin).poly().coeffs().iter().all(|c| c.abs() < 1e-15));

    let sq = PolyCurve::new(vec![0.0, 0.0, 0.4]).unwrap();
    let r = TangencyRect::unit_t(sq.clone(), 0.0, 1e-2, 2).unwrap();
    let m = taylor_model(&r);
    assert!(m.poly().coeffs().iter().all(|c| c.abs() < 1e-15));
    assert!(dense_sup(&sq, &m, 0.0, 0.1) <= 2e-2);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let g = random_curve(&mut rng, 5, 3);
        let a = rng.gen_range(0.0..0.8);
        let r = TangencyRect::unit_t(g.clone(), a, 1e-3, 3).unwrap();
        let m = taylor_model(&r);
        let thick = TangencyRect::unit_t(m.clone(), a, 2e-3, 3).unwrap();
        assert!(is_tangent(&g, &thick).unwrap().tangent);
    }
}

#[test]
fn prism_examples() {
    let k1 = TangencyRect::unit_t(PolyCurve::constant(0.3), 0.5, 0.01, 1).unwrap();
    let p = prism_of(&k1, 3.0).unwrap();
    assert_eq!(p.t_interval(), (0.5, 0.51));
    assert!(p.contains(0.505, &[0.3 + 0.03]));
    assert!(!p.contains(0.505, &[0.3 + 0.031]));
    let wide = TangencyRect::new(PolyCurve::constant(0.3), 0.5, 0.01, 4.0, 1).unwrap();
    assert!(prism_of(&wide, 3.0).is_err());
}

#[test]
fn jets_of_tangent_curves_lie_in_prism() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 1..=3 {
        let kc = default_prism_const(k);
        for _ in 0..40 {
            let f = random_curve(&mut rng, 6, k);
            let d = 2f64.powi(-rng.gen_range(4..12));
            let len = d.powf(1.0 / k as f64);
            let a = rng.gen_range(0.0..1.0 - len);
            let r = nearest_grid_rect(&f, a, d, k).unwrap();
            assert!(is_tangent(&f, &r).unwrap().tangent);
            let p = prism_of(&r, kc).unwrap();
            let mut min_slack = f64::INFINITY;
            for i in 0..100 {
                let t = r.anchor() + r.len() * i as f64 / 99.0;
                let y: Vec<f64> = (0..k).map(|j| f.eval_deriv(j, t)).collect();
                min_slack = min_slack.min(p.slack(t, &y));
            }
            assert!(min_slack >= 0.0, "k={k} slack {min_slack}");
        }
        // f = g leaves at least (K - 1) δ^{1-j/k} in every fiber
        let g = random_curve(&mut rng, k - 1, k);
        let r = TangencyRect::unit_t(g.clone(), 0.25, 1e-3, k).unwrap();
        let p = prism_of(&r, kc).unwrap();
        for i in 0..20 {
            let t = r.anchor() + r.len() * i as f64 / 19.0;
            let y: Vec<f64> = (0..k).map(|j| g.eval_deriv(j, t)).collect();
            for (j, yj) in y.iter().enumerate() {
                let room = p.radius(j) - (yj - p.center(j).eval(t)).abs();
                assert!(room >= (kc - 1.0) * 1e-3f64.powf(1.0 - j as f64 / k as f64));
            }
        }
    }
}

#[test]
fn comparability_examples() {
    let d = 2f64.powi(-8);
    let k = 2;
    let r = zero_rect(0.3, d, k);
    assert!(comparable(&r, &r).unwrap());
    let up = TangencyRect::unit_t(PolyCurve::constant(3.0 * 4.0 * d), 0.3, d, k).unwrap();
    assert!(!comparable(&r, &up).unwrap());
    let far = zero_rect(0.8, d, k);
    assert!(!comparable(&r, &far).unwrap());
    // hull 2δ^{1/2} fits in (4δ)^{1/2}
    let next = zero_rect(0.3 + d.sqrt(), d, k);
    assert!(comparable(&r, &next).unwrap());
    let other_t = TangencyRect::new(PolyCurve::constant(0.0), 0.3, d, 2.0, k).unwrap();
    assert!(comparable(&r, &other_t).is_err());
}

#[test]
fn comparability_symmetric_and_incomparable_disjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let d = 2f64.powi(-6);
    let k = 2;
    let mut checked = 0;
    for _ in 0..2000 {
        let f = random_curve(&mut rng, 3, k);
        let len = d.sqrt();
        let a1 = rng.gen_range(0.0..1.0 - len);
        let a2 = (a1 + rng.gen_range(-2.0..2.0) * len).clamp(0.0, 1.0 - len);
        let (Some(r1), Some(r2)) = (nearest_grid_rect(&f, a1, d, k), nearest_grid_rect(&f, a2, d, k)) else {
            continue;
        };
        let c12 = comparable(&r1, &r2).unwrap();
        assert_eq!(c12, comparable(&r2, &r1).unwrap());
        if !c12 && is_tangent(&f, &r1).unwrap().tangent && is_tangent(&f, &r2).unwrap().tangent {
            let (l1, h1) = r1.interval();
            let (l2, h2) = r2.interval();
            assert!(h1.min(h2) - l1.max(l2) <= 1e-12, "overlapping incomparable rectangles");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn covering_examples() {
    let k = 2;
    let kc = default_prism_const(k);
    let d = 2f64.powi(-10);
    let g = PolyCurve::new(vec![0.1, 0.2]).unwrap();
    let r = TangencyRect::unit_t(g.clone(), 0.5, d, k).unwrap();
    let s = TangencyRect::unit_t(g.clone(), 0.5, 4.0 * d, k).unwrap();
    assert!(covers(&s, &r, kc).unwrap());
    // a 3Kρ vertical shift; k = 1 keeps K small enough for a unit-norm base
    let kc1 = default_prism_const(1);
    let d1 = 2f64.powi(-12);
    let low = PolyCurve::new(vec![0.0, 0.2]).unwrap();
    let s2 = TangencyRect::unit_t(low.add_const(3.0 * kc1 * 2.0 * d1), 0.5, 2.0 * d1, 1).unwrap();
    let r2 = TangencyRect::unit_t(low.clone(), 0.5, d1, 1).unwrap();
    assert!(!covers(&s2, &r2, kc1).unwrap());
    let s3 = TangencyRect::unit_t(low, 0.5, 2.0 * d1, 1).unwrap();
    assert!(covers(&s3, &r2, kc1).unwrap());
    // interval of R outside I(S)
    let out = TangencyRect::unit_t(g, 0.0, d, k).unwrap();
    assert!(!covers(&s, &out, kc).unwrap());
}

#[test]
fn rescale_examples() {
    let k = 2;
    let kc = default_prism_const(k);
    let rho = 2f64.powi(-6);
    let g = PolyCurve::new(vec![0.1, 0.2, 0.05]).unwrap();
    let s = TangencyRect::unit_t(g.clone(), 0.3, rho, k).unwrap();
    let same = rescale_fn(&s, &g, kc).unwrap();
    assert!(same.curve.poly().coeffs().iter().all(|c| c.abs() < 1e-12));

    let s1 = TangencyRect::unit_t(PolyCurve::constant(0.0), 0.2, rho, 1).unwrap();
    let kc1 = default_prism_const(1);
    let half = rescale_fn(&s1, &PolyCurve::constant(rho / 2.0), kc1).unwrap();
    let c = 1.0 / (2.0 * kc1);
    assert!((half.curve.eval(0.37) - c / 2.0).abs() < 1e-15);
    assert!(rescale_fn(&s1, &PolyCurve::constant(2.0 * rho), kc1).is_err());

    let rs = rescale_rect(&s, &s, kc).unwrap();
    assert_eq!(rs.interval(), (0.0, 1.0));
    assert!(rs.base().poly().coeffs().iter().all(|c| c.abs() < 1e-12));
    // rescaling by the unit rectangle is the identity
    let unit = TangencyRect::unit_t(PolyCurve::constant(0.0), 0.0, 1.0, k).unwrap();
    let r = TangencyRect::unit_t(PolyCurve::new(vec![0.001, 0.0]).unwrap(), 0.0, 0.25, k).unwrap();
    let map = RescaleMap::new(&unit, kc).unwrap();
    assert!((map.c - 1.0 / (3.0 * kc)).abs() < 1e-18);
    let _ = r;
}

#[test]
fn random_tangent_rescales_have_unit_norm_and_transport() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut transported = 0;
    for k in 1..=3 {
        let kc = default_prism_const(k);
        for _ in 0..300 {
            let f = random_curve(&mut rng, 5, k);
            let rho = 2f64.powi(-rng.gen_range(3..8));
            let a = rng.gen_range(0.0..1.0 - rho.powf(1.0 / k as f64));
            let s = nearest_grid_rect(&f, a, rho, k).unwrap();
            let fs = rescale_fn(&s, &f, kc).unwrap();
            assert!(fs.norm_upper <= 1.0 + NORM_SLACK, "k={k}: {}", fs.norm_upper);
            let delta = rho * 2f64.powi(-(k as i32) - rng.gen_range(0..3));
            let r = nearest_grid_rect(&f, a, delta, k).unwrap();
            if !covers(&s, &r, kc).unwrap() {
                continue;
            }
            let rs = rescale_rect(&s, &r, kc).unwrap();
            assert!(is_tangent(&fs.curve, &rs).unwrap().tangent);
            transported += 1;
        }
    }
    assert!(transported > 100, "{transported}");
}

#[test]
fn psi_maps_prism_corners_to_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 1..=3 {
        let kc = default_prism_const(k);
        let rho = 2f64.powi(-6);
        let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let g = grid_base(0.25, &b).unwrap();
        let s = TangencyRect::unit_t(g, 0.25, rho, k).unwrap();
        let p = prism_of(&s, kc).unwrap();
        let map = RescaleMap::new(&s, kc).unwrap();
        for i in 0..=10 {
            let t = s.anchor() + s.len() * i as f64 / 10.0;
            for signs in 0..(1u32 << k) {
                let y: Vec<f64> = (0..k)
                    .map(|j| p.center(j).eval(t) + if signs >> j & 1 == 1 { 1.0 } else { -1.0 } * p.radius(j))
                    .collect();
                let (x, z) = map.psi(t, &y);
                assert!((x - i as f64 / 10.0).abs() < 1e-10);
                for zj in z {
                    assert!((zj.abs() - 1.0 / (k as f64 + 1.0)).abs() < 1e-10, "{zj}");
                }
            }
        }
        let (x, y) = map.phi(s.anchor() + s.len(), s.base().eval(s.anchor() + s.len()) + rho);
        assert!((x - 1.0).abs() < 1e-12 && (y - map.c).abs() < 1e-12);
    }
}

#[test]
fn canonical_grid_counts() {
    let g = canonical_rect_grid(0.25, 1, 100_000).unwrap();
    assert_eq!(grid_anchors(0.25, 1), vec![0.0, 0.25, 0.5, 0.75]);
    assert_eq!(g.len(), 4 * 1601);
    assert!((grid_step(0.25, 1, 0) - 1.0 / 800.0).abs() < 1e-18);
    assert!(canonical_rect_grid(2f64.powi(-10), 3, 1000).is_err());
    // zero is on the grid at every anchor
    for a in grid_anchors(0.25, 1) {
        let r = nearest_grid_rect(&PolyCurve::constant(0.0), a, 0.25, 1).unwrap();
        assert!(r.base().poly().is_zero());
    }
}

#[test]
fn nearest_grid_rect_within_half_rho() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let rho = 2f64.powi(-6);
    for _ in 0..100 {
        let f = random_curve(&mut rng, 3, 2);
        for a in grid_anchors(rho, 2) {
            let r = nearest_grid_rect(&f, a, rho, 2).unwrap();
            let (lo, hi) = r.interval();
            assert!(dense_sup(&f, r.base(), lo, hi) <= rho / 2.0);
        }
    }
}

#[test]
fn rect_jsonl_round_trip() {
    let rs = vec![zero_rect(0.1, 0.01, 2), TangencyRect::new(PolyCurve::new(vec![0.2, 0.1]).unwrap(), 0.3, 0.01, 4.0, 2).unwrap()];
    let mut buf = Vec::new();
    write_rects_jsonl(&mut buf, &rs).unwrap();
    let back = read_rects_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back, rs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn comparable_reflexive(b0 in -0.4f64..0.4, b1 in -0.3f64..0.3, a in 0.0f64..0.7, j in 4i32..10) {
        let d = 2f64.powi(-j);
        let r = TangencyRect::unit_t(PolyCurve::new(vec![b0, b1]).unwrap(), a, d, 2).unwrap();
        prop_assert!(comparable(&r, &r).unwrap());
    }

    #[test]
    fn tangency_is_closed_under_shrinking_offsets(off in 0.0f64..1.0, j in 2i32..12) {
        let d = 2f64.powi(-j);
        let r = zero_rect(0.1, d, 1);
        let f = PolyCurve::constant(off * d);
        prop_assert!(is_tangent(&f, &r).unwrap().tangent);
    }
}

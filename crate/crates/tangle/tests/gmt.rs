use tangle::curve::PolyCurve;
use tangle::gmt::*;
use tangle::raster::{rasterize, Raster};

/// Exhaustive minimum number of length-2δ intervals covering points on a line.
fn exact_cover_1d(x: &[f64], delta: f64) -> usize {
    let n = x.len();
    let mut best = n;
    for mask in 0u32..(1 << n) {
        // intervals starting at chosen points
        let starts: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| x[i] - 2.0 * delta).collect();
        let ok = x.iter().all(|&p| starts.iter().any(|&s| p >= s && p <= s + 2.0 * delta));
        if ok {
            best = best.min(mask.count_ones() as usize);
        }
    }
    best
}

#[test]
fn three_point_cover_matches_exhaustive() {
    let x = vec![0.0, 0.5, 1.0];
    assert_eq!(covering_number(&PointSet::Line { x: x.clone() }, 0.4).net, exact_cover_1d(&x, 0.4));
}

#[test]
fn middle_half_cantor_counts() {
    for n in 1..=5 {
        let s = cantor_with(4, n, 0.5, 7).unwrap();
        assert_eq!(s.points.len(), 1 << n);
        let c = covering_number(&PointSet::Line { x: s.points.clone() }, 4f64.powi(-(n as i32)));
        assert_eq!(c.net, 1 << n);
        for j in 0..=n {
            let r = 4f64.powi(-(j as i32));
            let c = covering_number(&PointSet::Line { x: s.points.clone() }, r);
            assert_eq!(c.net, 1 << j, "n={n} j={j}");
        }
    }
}

#[test]
fn delta_alpha_examples() {
    let single = PointSet::Plane { p: vec![[0.3, 0.3]] };
    assert!(is_delta_alpha(&single, 0.01, 0.0, 1.0).holds);
    let d = 1.0 / 64.0;
    let grid = PointSet::Line { x: (0..64).map(|i| i as f64 * d).collect() };
    assert!(is_delta_alpha(&grid, d, 1.0, 4.0).holds);
    // 1/δ points need 1/(3δ) intervals at scale δ, more than 4 δ^{-1/2}
    let d = 1.0 / 1024.0;
    let grid = PointSet::Line { x: (0..1024).map(|i| i as f64 * d).collect() };
    assert!(is_delta_alpha(&grid, d, 1.0, 4.0).holds);
    let r = is_delta_alpha(&grid, d, 0.5, 4.0);
    assert!(!r.holds);
}

#[test]
fn delta_alpha_monotone() {
    for seed in 0..10 {
        let s = cantor_generator(1.0 / 256.0, 0.3 + 0.07 * seed as f64, seed).unwrap();
        let ps = PointSet::Line { x: s.points };
        let base = is_delta_alpha(&ps, s.delta, 0.5, 2.0);
        if base.holds {
            assert!(is_delta_alpha(&ps, s.delta, 0.7, 2.0).holds);
            assert!(is_delta_alpha(&ps, s.delta, 0.5, 3.0).holds);
        }
    }
}

#[test]
fn cantor_sets_certified_with_c4() {
    for (i, alpha) in [0.3, 0.5, 0.6, 0.8, 1.0].iter().enumerate() {
        let s = cantor_generator(1.0 / 256.0, *alpha, i as u64).unwrap();
        assert_eq!(s.delta, 1.0 / 256.0);
        let rep = is_delta_alpha(&PointSet::Line { x: s.points.clone() }, s.delta, *alpha, 4.0);
        assert!(rep.holds, "α={alpha}: {rep:?}");
    }
    let one = cantor_with(4, 4, 1e-9, 1).unwrap();
    assert_eq!(one.points.len(), 1);
}

#[test]
fn net_packing_sandwich() {
    for seed in 0..20u64 {
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|i| {
                let a = ((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 1000.0;
                let b = ((i as u64 * 40503 + seed * 13) % 997) as f64 / 997.0;
                [a, b]
            })
            .collect();
        let ps = PointSet::Plane { p: pts };
        let d = 0.05;
        let full = covering_number(&ps, d);
        let half = covering_number(&ps, d / 2.0);
        assert!(full.packing <= full.net);
        assert!(full.net <= half.packing.max(full.net));
        assert!(full.net <= greedy_net(&ps, d).len());
    }
}

#[test]
fn striped_shading_area() {
    let d = 1.0 / 64.0;
    let raster = Raster::new(d / 4.0).unwrap();
    let f = PolyCurve::new(vec![0.1, 0.05]).unwrap();
    let full = make_striped_shading(&f, 0, d, d, &(0..64).map(|i| (i as f64 + 0.5) * d).collect::<Vec<_>>(), raster).unwrap();
    assert_eq!(full, rasterize(&f, 0, d, raster, None).unwrap());
    assert_eq!(make_striped_shading(&f, 0, d, d, &[], raster).unwrap().cells(), 0);
    let e = cantor_with(4, 3, 0.5, 3).unwrap();
    let mids: Vec<f64> = e.points.iter().map(|p| p + 0.5 * d).collect();
    let s = make_striped_shading(&f, 0, d, d, &mids, raster).unwrap();
    let predicted = 2.0 * d * d * mids.len() as f64;
    assert!((s.area() - predicted).abs() <= 0.25 * predicted, "{} vs {}", s.area(), predicted);
}

#[test]
fn single_curve_full_shading() {
    let d = 1.0 / 256.0;
    let mut p = FurstenbergParams::new(d, 1.0, 0.0, 2, 1);
    p.c = 16.0;
    let inst = furstenberg_instance(&p).unwrap();
    let rep = furstenberg_check(&inst, 0.3).unwrap();
    assert_eq!(rep.n_curves, 1);
    assert!(rep.chain_holds);
    // inner cells of a band of height 4δ at h = δ/4
    let h = d / 4.0;
    assert!(rep.measure_e <= 4.0 * d && rep.measure_e >= 4.0 * d - 4.0 * h, "{}", rep.measure_e);
}

#[test]
fn random_instance_chain() {
    let p = FurstenbergParams::new(1.0 / 256.0, 0.8, 0.5, 2, 11);
    let t = std::time::Instant::now();
    let inst = furstenberg_instance(&p).unwrap();
    let rep = furstenberg_check(&inst, 0.3).unwrap();
    eprintln!("{:?} {:?}", t.elapsed(), rep);
    assert!(rep.chain_holds && rep.bound_holds);
}

#[test]
fn quasi_product_examples() {
    let d = 1.0 / 64.0;
    let raster = Raster::new(d / 4.0).unwrap();
    let n = raster.ncols();
    let full: Vec<(u32, u32)> = (0..n).flat_map(|c| (n..2 * n).map(move |r| (c, r))).collect();
    assert!(quasi_product_bound(&full, raster, d, 1.0, 1.0, 0.0).pass);

    let a = cantor_with(4, 3, 0.5, 1).unwrap();
    let cells: Vec<(u32, u32)> = a
        .points
        .iter()
        .flat_map(|&x| a.points.iter().map(move |&y| (x, y)))
        .flat_map(|(x, y)| {
            let c0 = (x / raster.h()).round() as u32;
            let r0 = ((y + 1.0) / raster.h()).round() as u32;
            (0..4).flat_map(move |i| (0..4).map(move |j| (c0 + i, r0 + j)))
        })
        .collect();
    let rep = quasi_product_bound(&cells, raster, d, 0.5, 0.5, 0.0);
    assert!((rep.measure - d).abs() < 1e-12);
    assert!(rep.pass, "{rep:?}");
    let bad = quasi_product_bound(&cells, raster, d, 0.5, 0.2, 0.0);
    assert!(!bad.pass);
}

use std::f64::consts::PI;

use tangle::cinematic::CinematicSpec;
use tangle::curve::PolyCurve;
use tangle::maximal::*;
use tangle::raster::{lp_count_norm, rasterize, Raster};

#[test]
fn kakeya_unit_square_horizontal() {
    let f = BoxIndicator { bbox: [0.0, 1.0, 0.0, 1.0] };
    let p = kakeya_maximal(&f, 0.1, &[0.0], QuadOptions { h: Some(0.0125), richardson: false }).unwrap();
    assert!((p.values[0] - 2.0).abs() <= 0.05, "{}", p.values[0]);
}

#[test]
fn kakeya_segment_peaks_in_its_direction() {
    let d = 0.05;
    // δ neighborhood of the segment from (0, 0.5) to (1, 0.5)
    let f = FnOf(|x: f64, y: f64| if (0.0..=1.0).contains(&x) && (y - 0.5).abs() <= d { 1.0 } else { 0.0 }, Some([0.0, 1.0, 0.5 - d, 0.5 + d]));
    let dirs = [0.0, 0.2, 0.4];
    let p = kakeya_maximal(&f, d, &dirs, QuadOptions { h: Some(d / 4.0), richardson: false }).unwrap();
    assert!((p.values[0] - 2.0).abs() < 0.1, "{:?}", p.values);
    assert!(p.values[1] < p.values[0] && p.values[2] < p.values[1]);
    // strip crossing at angle θ covers area about (2δ)^2 / sin θ
    for (i, &th) in dirs.iter().enumerate().skip(1) {
        let predicted = 4.0 * d / th.sin();
        assert!(p.values[i] < 1.5 * predicted && p.values[i] > 0.5 * predicted, "{} vs {}", p.values[i], predicted);
    }
}

#[test]
fn wolff_annulus_and_translation() {
    let d = 0.1;
    let ann = |cx: f64, cy: f64| {
        move |x: f64, y: f64| {
            let r = (x - cx).hypot(y - cy);
            if (r - 1.0).abs() <= d { 1.0 } else { 0.0 }
        }
    };
    let f = FnOf(ann(0.0, 0.0), Some([-1.1, 1.1, -1.1, 1.1]));
    let opts = QuadOptions { h: Some(d / 4.0), richardson: false };
    let p = wolff_maximal(&f, d, &[1.0], opts).unwrap();
    assert!((p.values[0] - 4.0 * PI).abs() < 0.1 * 4.0 * PI, "{}", p.values[0]);
    let g = FnOf(ann(0.3, -0.2), Some([-0.8, 1.4, -1.3, 0.9]));
    let q = wolff_maximal(&g, d, &[1.0], opts).unwrap();
    assert!((p.values[0] - q.values[0]).abs() < 1e-6 * p.values[0]);
    let z = wolff_maximal(&Zero, d, &[1.0, 1.5], opts).unwrap();
    assert!(z.values.iter().all(|&v| v == 0.0));
}

#[test]
fn cinematic_strip_and_odd_function() {
    let spec = CinematicSpec::moment(2, 1).unwrap();
    let d = 1.0 / 32.0;
    let (u0, v) = (0.25, 0.5);
    let strip = FnOf(move |x: f64, y: f64| if (y - u0 - v * x).abs() <= d { 1.0 } else { 0.0 }, Some([0.0, 1.0, -1.0, 2.0]));
    let p = cinematic_maximal(&spec, &strip, d, &[vec![v]], CinematicOptions::default()).unwrap();
    assert!((p.values[0] - 2.0).abs() < 0.05, "{}", p.values[0]);

    // odd in y about every curve of slope v: its signed average vanishes
    let odd = FnOf(move |x: f64, y: f64| ((y - v * x) * 40.0 * PI).sin(), Some([0.0, 1.0, -1.0, 2.0]));
    let opts = CinematicOptions { fiber_step: Some(1.0 / 40.0), ..Default::default() };
    let signed = cinematic_maximal(&spec, &odd, 1.0 / 40.0, &[vec![v]], opts).unwrap();
    let abs = cinematic_maximal(&spec, &odd, 1.0 / 40.0, &[vec![v]], CinematicOptions { absolute: true, ..opts }).unwrap();
    assert!(signed.values[0] < 1e-3, "{}", signed.values[0]);
    assert!(abs.values[0] >= signed.values[0]);

    let z = cinematic_maximal(&spec, &Zero, d, &[vec![0.1], vec![0.9]], CinematicOptions::default()).unwrap();
    assert!(z.values.iter().all(|&x| x == 0.0));
}

#[test]
fn knapp_slopes() {
    let deltas: Vec<f64> = (4..=10).map(|j| 2f64.powi(-j)).collect();
    let low = knapp_experiment(1, 1.5, &deltas, 32).unwrap();
    let high = knapp_experiment(1, 3.0, &deltas, 32).unwrap();
    assert!(low.slope <= -0.1, "{}", low.slope);
    assert!(high.slope >= -0.05, "{}", high.slope);
    assert!((low.slope + 1.0 / 3.0).abs() < 0.02);
    assert!((high.slope - 1.0 / 3.0).abs() < 0.02);
}

#[test]
fn sharpness_closed_forms() {
    let rhos: Vec<f64> = (4..=12).map(|j| 2f64.powi(-j)).collect();
    let t = sharpness_log_experiment(1, &rhos).unwrap();
    for r in &t.rows {
        assert!(r.rel_err < 1e-10);
    }
    let one = sharpness_log_experiment(2, &[1.0]).unwrap();
    assert!((one.rows[0].norm_pow - 2f64.ln()).abs() < 1e-12);
    assert!(t.r2 >= 0.98);
    assert!((t.slope - 0.5).abs() < 0.15 * 0.5, "{}", t.slope);
}

#[test]
fn sharpness_line_integral_matches_simpson() {
    // composite Simpson on the substitution t = e^{-x}
    let rho = 2f64.powi(-10);
    let g = |t: f64| (t * t + rho).powf(-0.5) * (1.0 + 4.0 * t * t).sqrt();
    let (a, b, n) = (0.0, 40.0, 400_000);
    let step = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = a + i as f64 * step;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let t = (-x).exp();
        s += w * g(t) * t;
    }
    s *= step / 3.0;
    let t = sharpness_log_experiment(1, &[rho]).unwrap();
    assert!((t.rows[0].line_integral - s).abs() < 1e-8 * s, "{} {}", t.rows[0].line_integral, s);
}

#[test]
fn weighted_norm_homogeneity_and_majorant() {
    let r = Raster::new(2f64.powi(-9)).unwrap();
    let d = 1.0 / 64.0;
    let f = PolyCurve::new(vec![0.1, 0.2, -0.1]).unwrap();
    let one = weighted_dual_norm(std::slice::from_ref(&f), &[1.0], d, 1.5, r).unwrap();
    let s = rasterize(&f, 0, d, r, None).unwrap();
    assert!((one.direct - lp_count_norm(&[s], 1.5).unwrap()).abs() < 1e-12);
    let w = weighted_dual_norm(std::slice::from_ref(&f), &[-3.5], d, 1.5, r).unwrap();
    assert!((w.direct - 3.5 * one.direct).abs() < 1e-12);
    let lines = transverse_lines(d, 5);
    let ws: Vec<f64> = (0..lines.len()).map(|i| 0.3 + 1.7 * ((i * 7919) % 13) as f64).collect();
    let rep = weighted_dual_norm(&lines, &ws, d, 1.5, r).unwrap();
    assert!(rep.direct <= rep.majorant);
}

#[test]
fn cordoba_small() {
    let row = cordoba_trend(2f64.powi(-6), 1).unwrap();
    assert!(row.ball.holds);
    assert!(row.pass, "{row:?}");
}

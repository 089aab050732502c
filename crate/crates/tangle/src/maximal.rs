//! Averages over thickened segments, circles and cinematic curves, the
//! Knapp and log-law sharpness experiments, weighted count norms and the
//! transverse line families used for the `L^2` trend.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cinematic::CinematicSpec;
use crate::curve::{ck_norm, PolyCurve};
use crate::error::{Error, Result};
use crate::raster::{lp_count_norm, rasterize, weighted_lp_norm, Raster, Shading};

/// Bounding box `[x0, x1] x [y0, y1]`.
pub type Bbox = [f64; 4];

pub trait PlaneFn: Sync {
    fn value(&self, x: f64, y: f64) -> f64;

    fn support(&self) -> Option<Bbox> {
        None
    }

    /// `∫_{y0}^{y1} f(x, y) dy`, midpoint rule at step `h` by default.
    fn column_integral(&self, x: f64, y0: f64, y1: f64, h: f64) -> f64 {
        let (mut a, mut b) = (y0, y1);
        if let Some(s) = self.support() {
            if x < s[0] || x > s[1] {
                return 0.0;
            }
            a = a.max(s[2]);
            b = b.min(s[3]);
        }
        if b <= a {
            return 0.0;
        }
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        let step = (b - a) / n as f64;
        (0..n).map(|i| self.value(x, a + (i as f64 + 0.5) * step)).sum::<f64>() * step
    }
}

pub struct Zero;

impl PlaneFn for Zero {
    fn value(&self, _: f64, _: f64) -> f64 {
        0.0
    }

    fn support(&self) -> Option<Bbox> {
        Some([0.0, 0.0, 0.0, 0.0])
    }

    fn column_integral(&self, _: f64, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Indicator of a closed box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxIndicator {
    pub bbox: Bbox,
}

impl PlaneFn for BoxIndicator {
    fn value(&self, x: f64, y: f64) -> f64 {
        let b = self.bbox;
        if x >= b[0] && x <= b[1] && y >= b[2] && y <= b[3] {
            1.0
        } else {
            0.0
        }
    }

    fn support(&self) -> Option<Bbox> {
        Some(self.bbox)
    }

    fn column_integral(&self, x: f64, y0: f64, y1: f64, _: f64) -> f64 {
        let b = self.bbox;
        if x < b[0] || x > b[1] {
            return 0.0;
        }
        (y1.min(b[3]) - y0.max(b[2])).max(0.0)
    }
}

/// Piecewise constant function on a grid of square cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `data[j * nx + i]`.
    pub data: Vec<f64>,
}

impl GridFn {
    pub fn from_fn<F: Fn(f64, f64) -> f64>(x0: f64, y0: f64, h: f64, nx: usize, ny: usize, f: F) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                data.push(f(x0 + (i as f64 + 0.5) * h, y0 + (j as f64 + 0.5) * h));
            }
        }
        GridFn { x0, y0, h, nx, ny, data }
    }
}

impl PlaneFn for GridFn {
    fn value(&self, x: f64, y: f64) -> f64 {
        let i = ((x - self.x0) / self.h).floor();
        let j = ((y - self.y0) / self.h).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return 0.0;
        }
        self.data[j as usize * self.nx + i as usize]
    }

    fn support(&self) -> Option<Bbox> {
        Some([self.x0, self.x0 + self.nx as f64 * self.h, self.y0, self.y0 + self.ny as f64 * self.h])
    }
}

/// A closure with an optional support box.
pub struct FnOf<F>(pub F, pub Option<Bbox>);

impl<F: Fn(f64, f64) -> f64 + Sync> PlaneFn for FnOf<F> {
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }

    fn support(&self) -> Option<Bbox> {
        self.1
    }
}

/// `|f|`.
pub struct Abs<'a>(pub &'a dyn PlaneFn);

impl PlaneFn for Abs<'_> {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.0.value(x, y).abs()
    }

    fn support(&self) -> Option<Bbox> {
        self.0.support()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalProfile {
    pub kind: String,
    pub delta: f64,
    pub h: f64,
    pub params: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// `|value(h) - value(h/2)|`, or zero when not requested.
    pub quad_error: Vec<f64>,
}

impl MaximalProfile {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["parameter", "value", "quadrature_error"])?;
        for ((p, v), e) in self.params.iter().zip(&self.values).zip(&self.quad_error) {
            let ps: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            out.write_record([ps.join(";"), format!("{v}"), format!("{e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    /// Quadrature step; defaults to `δ / 8` when `None`.
    pub h: Option<f64>,
    pub richardson: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { h: None, richardson: false }
    }
}

impl QuadOptions {
    fn step(&self, delta: f64) -> f64 {
        self.h.unwrap_or(delta / 8.0)
    }
}

fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(0.0) as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn profile_with(
    kind: &str,
    delta: f64,
    h: f64,
    params: Vec<Vec<f64>>,
    rich: bool,
    per: &(dyn Fn(usize, f64) -> f64 + Sync),
) -> MaximalProfile {
    let rows: Vec<(f64, f64)> = (0..params.len())
        .into_par_iter()
        .map(|i| {
            let v = per(i, h);
            let e = if rich { (per(i, h / 2.0) - v).abs() } else { 0.0 };
            (v, e)
        })
        .collect();
    MaximalProfile {
        kind: kind.into(),
        delta,
        h,
        params,
        values: rows.iter().map(|r| r.0).collect(),
        quad_error: rows.iter().map(|r| r.1).collect(),
    }
}

fn segment_average(f: &dyn PlaneFn, p: (f64, f64), theta: f64, delta: f64, h: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let ns = (1.0 / h).ceil() as usize;
    let nr = (2.0 * delta / h).ceil() as usize;
    let (hs, hr) = (1.0 / ns as f64, 2.0 * delta / nr as f64);
    let mut acc = 0.0;
    for i in 0..ns {
        let a = (i as f64 + 0.5) * hs;
        for j in 0..nr {
            let r = -delta + (j as f64 + 0.5) * hr;
            acc += f.value(p.0 + a * c - r * s, p.1 + a * s + r * c).abs();
        }
    }
    acc * hs * hr / delta
}

fn boxes_meet(a: Bbox, b: Bbox) -> bool {
    a[0] <= b[1] && b[0] <= a[1] && a[2] <= b[3] && b[2] <= a[3]
}

/// Sup over unit segments in each direction (angle from the x-axis) of
/// `(1/δ) ∫ |f|` over the `δ` neighborhood, translates on a `δ/2` lattice
/// covering the support.
pub fn kakeya_maximal(f: &dyn PlaneFn, delta: f64, directions: &[f64], opts: QuadOptions) -> Result<MaximalProfile> {
    let supp = f.support().ok_or_else(|| Error::Precondition("f needs a bounded support".into()))?;
    let pad = 1.0 + delta;
    let xs = lattice(supp[0] - pad, supp[1] + pad, delta / 2.0);
    let ys = lattice(supp[2] - pad, supp[3] + pad, delta / 2.0);
    let per = |i: usize, h: f64| {
        let theta = directions[i];
        let (c, s) = (theta.cos(), theta.sin());
        let mut best: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                let ends = [x, x + c];
                let ys_ = [y, y + s];
                let bb = [
                    ends[0].min(ends[1]) - delta,
                    ends[0].max(ends[1]) + delta,
                    ys_[0].min(ys_[1]) - delta,
                    ys_[0].max(ys_[1]) + delta,
                ];
                if boxes_meet(bb, supp) {
                    best = best.max(segment_average(f, (x, y), theta, delta, h));
                }
            }
        }
        best
    };
    let params = directions.iter().map(|&d| vec![d]).collect();
    Ok(profile_with("kakeya", delta, opts.step(delta), params, opts.richardson, &per))
}

fn annulus_average(f: &dyn PlaneFn, c: (f64, f64), r: f64, delta: f64, h: f64) -> f64 {
    let nr = (2.0 * delta / h).ceil() as usize;
    let nt = (2.0 * PI * (r + delta) / h).ceil() as usize;
    let (hr, ht) = (2.0 * delta / nr as f64, 2.0 * PI / nt as f64);
    let trig: Vec<(f64, f64)> = (0..nt).map(|j| ((j as f64 + 0.5) * ht).sin_cos()).collect();
    let mut acc = 0.0;
    for i in 0..nr {
        let rho = r - delta + (i as f64 + 0.5) * hr;
        let mut ring = 0.0;
        for &(s, co) in &trig {
            ring += f.value(c.0 + rho * co, c.1 + rho * s).abs();
        }
        acc += ring * rho;
    }
    acc * hr * ht / delta
}

/// Sup over centers on a `δ/2` lattice of `(1/δ) ∫ |f|` over the metric
/// `δ` neighborhood of the circle of each radius.
pub fn wolff_maximal(f: &dyn PlaneFn, delta: f64, radii: &[f64], opts: QuadOptions) -> Result<MaximalProfile> {
    let supp = f.support().ok_or_else(|| Error::Precondition("f needs a bounded support".into()))?;
    let per = |i: usize, h: f64| {
        let r = radii[i];
        let pad = r + delta;
        let xs = lattice(supp[0] - pad, supp[1] + pad, delta / 2.0);
        let ys = lattice(supp[2] - pad, supp[3] + pad, delta / 2.0);
        let mut best: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                let dx = (supp[0] - x).max(x - supp[1]).max(0.0);
                let dy = (supp[2] - y).max(y - supp[3]).max(0.0);
                let near = dx.hypot(dy);
                let fx = (x - supp[0]).abs().max((x - supp[1]).abs());
                let fy = (y - supp[2]).abs().max((y - supp[3]).abs());
                let far = fx.hypot(fy);
                if near > r + delta || far < r - delta {
                    continue;
                }
                best = best.max(annulus_average(f, (x, y), r, delta, h));
            }
        }
        best
    };
    let params = radii.iter().map(|&r| vec![r]).collect();
    Ok(profile_with("wolff", delta, opts.step(delta), params, opts.richardson, &per))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CinematicOptions {
    pub quad: QuadOptions,
    /// Fiber lattice spacing; defaults to `δ / 2`.
    pub fiber_step: Option<f64>,
    /// Integrate `|f|` instead of the signed average.
    pub absolute: bool,
}

impl Default for CinematicOptions {
    fn default() -> Self {
        CinematicOptions { quad: QuadOptions::default(), fiber_step: None, absolute: false }
    }
}

fn curve_average(spec: &CinematicSpec, f: &dyn PlaneFn, u: &[f64], delta: f64, h: f64, absolute: bool) -> f64 {
    let (mut t0, mut t1) = spec.time;
    if let Some(s) = f.support() {
        t0 = t0.max(s[0]);
        t1 = t1.min(s[1]);
    }
    if t1 <= t0 {
        return 0.0;
    }
    let n = ((t1 - t0) / h).ceil().max(1.0) as usize;
    let step = (t1 - t0) / n as f64;
    let abs_f = Abs(f);
    let g: &dyn PlaneFn = if absolute { &abs_f } else { f };
    let mut acc = 0.0;
    for i in 0..n {
        let t = t0 + (i as f64 + 0.5) * step;
        if let Some(y) = spec.eval(u, t) {
            acc += g.column_integral(t, y - delta, y + delta, h);
        }
    }
    (acc * step).abs() / delta
}

/// `(1/δ) sup_{u ∈ Φ^{-1}(v)} |∫_{γ_u^δ} f|` with vertical neighborhoods,
/// the fiber swept on a lattice inside the parameter box.
pub fn cinematic_maximal(
    spec: &CinematicSpec,
    f: &dyn PlaneFn,
    delta: f64,
    v_grid: &[Vec<f64>],
    opts: CinematicOptions,
) -> Result<MaximalProfile> {
    spec.validate()?;
    let free = spec.fiber_coords()?;
    let step = opts.fiber_step.unwrap_or(delta / 2.0);
    let axes: Vec<Vec<f64>> = free
        .iter()
        .map(|&c| {
            let (lo, hi) = spec.param_box[c];
            let n = ((hi - lo) / step).ceil().max(1.0) as usize;
            (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    if total.saturating_mul(v_grid.len()) > 1 << 32 {
        return Err(Error::ResourceCap(format!("fiber lattice of {total} points is too large")));
    }
    let mut fiber = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    loop {
        fiber.push(idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect::<Vec<f64>>());
        let mut d = axes.len();
        loop {
            if d == 0 {
                break;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            if d == 0 {
                d = usize::MAX;
                break;
            }
        }
        if d == usize::MAX || axes.is_empty() {
            break;
        }
    }
    let mut points = Vec::with_capacity(v_grid.len());
    for v in v_grid {
        let us: Result<Vec<Vec<f64>>> = fiber.iter().map(|w| spec.fiber_point(v, w)).collect();
        points.push(us?);
    }
    let per = |i: usize, h: f64| {
        points[i]
            .iter()
            .map(|u| curve_average(spec, f, u, delta, h, opts.absolute))
            .fold(0.0, f64::max)
    };
    let kind = if opts.absolute { "cinematic-abs" } else { "cinematic" };
    Ok(profile_with(kind, delta, opts.quad.step(delta), v_grid.to_vec(), opts.quad.richardson, &per))
}

/// Least-squares fit `y = a x + b` with its `R^2`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnappRow {
    pub delta: f64,
    pub norm_m: f64,
    pub norm_f: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnappTable {
    pub s: usize,
    pub p: f64,
    pub rows: Vec<KnappRow>,
    /// Slope of `log ratio` against `log δ`.
    pub slope: f64,
}

/// `∥M_δ χ∥_p / ∥χ∥_p` for the box `[0, δ^{1/s}] x [0, δ]` and moment
/// curves with `m = s + 1`; `v` sampled at `nv` midpoints of its range.
pub fn knapp_experiment(s: usize, p: f64, deltas: &[f64], nv: usize) -> Result<KnappTable> {
    if s == 0 || !(p >= 1.0) || nv == 0 {
        return Err(Error::Precondition("need s >= 1, p >= 1, nv >= 1".into()));
    }
    let spec = CinematicSpec::moment(s + 1, s)?;
    let (vlo, vhi) = spec.param_box[s];
    let dv = (vhi - vlo) / nv as f64;
    let v_grid: Vec<Vec<f64>> = (0..nv).map(|i| vec![vlo + (i as f64 + 0.5) * dv]).collect();
    let mut rows = Vec::new();
    for &delta in deltas {
        let w = delta.powf(1.0 / s as f64);
        let f = BoxIndicator { bbox: [0.0, w, 0.0, delta] };
        let opts = CinematicOptions { quad: QuadOptions { h: Some(w.min(delta) / 8.0), richardson: false }, ..Default::default() };
        let prof = cinematic_maximal(&spec, &f, delta, &v_grid, opts)?;
        let norm_m = (prof.values.iter().map(|v| v.powf(p)).sum::<f64>() * dv).powf(1.0 / p);
        let norm_f = (w * delta).powf(1.0 / p);
        rows.push(KnappRow { delta, norm_m, norm_f, ratio: norm_m / norm_f });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.delta.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let slope = if rows.len() >= 2 { linear_fit(&lx, &ly).0 } else { f64::NAN };
    Ok(KnappTable { s, p, rows, slope })
}

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_0^1 g` with Gauss–Legendre panels `[0, a], [a, 2a], [2a, 4a], ...`.
pub fn geometric_quad<G: Fn(f64) -> f64>(g: G, a: f64, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    let mut edges = vec![0.0];
    let mut e = a.min(1.0);
    while e < 1.0 {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(1.0);
    let mut acc = 0.0;
    for p in edges.windows(2) {
        let (lo, hi) = (p[0], p[1]);
        let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        acc += x.iter().zip(&w).map(|(xi, wi)| wi * g(m + r * xi)).sum::<f64>() * r;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub rho: f64,
    /// `∥f∥_{s+1}^{s+1}` by quadrature.
    pub norm_pow: f64,
    pub closed_form: f64,
    pub rel_err: f64,
    /// Arclength integral of `f` along `y = t^{s+1}`, `t ∈ [0,1]`.
    pub line_integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessTable {
    pub s: usize,
    pub rows: Vec<SharpnessRow>,
    /// Fit of the line integral against `log(1/ρ)`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub predicted_slope: f64,
}

/// `f(x, y) = (y + ρ)^{-1/(s+1)}` on the unit square.
pub fn sharpness_log_experiment(s: usize, rhos: &[f64]) -> Result<SharpnessTable> {
    if s == 0 || rhos.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Precondition("need s >= 1 and ρ > 0".into()));
    }
    let q = s as f64 + 1.0;
    let rows: Vec<SharpnessRow> = rhos
        .iter()
        .map(|&rho| {
            let norm_pow = geometric_quad(|y| 1.0 / (y + rho), rho, 16);
            let closed_form = ((1.0 + rho) / rho).ln();
            let line_integral = geometric_quad(
                |t| {
                    let ds = (1.0 + (q * t.powi(s as i32)).powi(2)).sqrt();
                    (t.powf(q) + rho).powf(-1.0 / q) * ds
                },
                rho.powf(1.0 / q),
                16,
            );
            SharpnessRow { rho, norm_pow, closed_form, rel_err: (norm_pow - closed_form).abs() / closed_form, line_integral }
        })
        .collect();
    let lx: Vec<f64> = rows.iter().map(|r| (1.0 / r.rho).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.line_integral).collect();
    let (slope, intercept, r2) = if rows.len() >= 2 { linear_fit(&lx, &ly) } else { (f64::NAN, f64::NAN, f64::NAN) };
    Ok(SharpnessTable { s, rows, slope, intercept, r2, predicted_slope: 1.0 / q })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualNormReport {
    pub direct: f64,
    /// `Σ_k 2^{k+1} ∥Σ_{G_k} χ∥_{p'}` over dyadic weight classes.
    pub majorant: f64,
    pub classes: Vec<(i32, usize, f64)>,
}

pub fn weighted_dual_norm(curves: &[PolyCurve], weights: &[f64], delta: f64, p_dual: f64, raster: Raster) -> Result<DualNormReport> {
    if curves.len() != weights.len() {
        return Err(Error::Precondition("one weight per curve required".into()));
    }
    let shadings: Result<Vec<Shading>> = curves.par_iter().enumerate().map(|(i, f)| rasterize(f, i, delta, raster, None)).collect();
    let shadings = shadings?;
    let direct = weighted_lp_norm(&shadings, weights, p_dual)?;
    let mut classes: std::collections::BTreeMap<i32, Vec<Shading>> = Default::default();
    for (s, &w) in shadings.into_iter().zip(weights) {
        if w != 0.0 {
            classes.entry(w.abs().log2().floor() as i32).or_default().push(s);
        }
    }
    let mut majorant = 0.0;
    let mut out = Vec::new();
    for (k, g) in classes {
        let n = lp_count_norm(&g, p_dual)?;
        majorant += 2f64.powi(k + 1) * n;
        out.push((k, g.len(), n));
    }
    Ok(DualNormReport { direct, majorant, classes: out })
}

/// Lines `y = a_i + b_i t` with slopes `b_i = -1/2 + (i + 1/2)/N`,
/// `N = ⌊1/(8δ)⌋`, and uniform random intercepts in `[0, 1/2]`.
pub fn transverse_lines(delta: f64, seed: u64) -> Vec<PolyCurve> {
    let n = ((1.0 / (8.0 * delta)).floor() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let b = -0.5 + (i as f64 + 0.5) / n as f64;
            let a = rng.gen_range(0.0..0.5);
            PolyCurve::new(vec![a, b]).expect("finite")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    pub holds: bool,
    /// Largest `#(F ∩ B(f, 2r)) δ / r` over members and radii `r >= δ`.
    pub worst_ratio: f64,
}

/// Sufficient check of `#(F ∩ B_r) <= r/δ` for `r >= δ` in the `C^k`
/// metric: any ball of radius `r` meeting `F` lies in `B(f, 2r)` for a
/// member `f`.
pub fn ball_condition(curves: &[PolyCurve], k: usize, delta: f64) -> Result<BallReport> {
    let rows: Result<Vec<f64>> = (0..curves.len())
        .into_par_iter()
        .map(|i| {
            let mut d = Vec::with_capacity(curves.len());
            for g in curves {
                d.push(ck_norm(&curves[i].sub(g), k)?.upper);
            }
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut worst: f64 = 0.0;
            for (j, &dj) in d.iter().enumerate() {
                let r = (dj / 2.0).max(delta);
                worst = worst.max((j + 1) as f64 * delta / r);
            }
            Ok(worst)
        })
        .collect();
    let worst = rows?.into_iter().fold(0.0, f64::max);
    Ok(BallReport { holds: worst <= 1.0, worst_ratio: worst })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CordobaRow {
    pub delta: f64,
    pub n: usize,
    pub ball: BallReport,
    pub l2: f64,
    pub l1: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `∥Σχ∥_2` against `4 log(1/δ)^{1/2} δ #F` for transverse lines at
/// raster `h = δ/8`.
pub fn cordoba_trend(delta: f64, seed: u64) -> Result<CordobaRow> {
    let lines = transverse_lines(delta, seed);
    let ball = ball_condition(&lines, 1, delta)?;
    let raster = Raster::for_delta(delta, 8.0)?;
    let shadings: Result<Vec<Shading>> = lines.par_iter().enumerate().map(|(i, f)| rasterize(f, i, delta, raster, None)).collect();
    let shadings = shadings?;
    let l2 = lp_count_norm(&shadings, 2.0)?;
    let l1 = lp_count_norm(&shadings, 1.0)?;
    let n = lines.len();
    let bound = 4.0 * (1.0 / delta).ln().sqrt() * delta * n as f64;
    Ok(CordobaRow { delta, n, pass: ball.holds && l2 < bound, ball, l2, l1, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_function_profiles() {
        let p = kakeya_maximal(&Zero, 0.1, &[0.0, 1.0], QuadOptions::default()).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn knapp_norm_exact() {
        let t = knapp_experiment(1, 2.0, &[1.0 / 16.0], 4).unwrap();
        assert!((t.rows[0].norm_f - (1.0f64 / 256.0).sqrt()).abs() < 1e-15);
    }
}

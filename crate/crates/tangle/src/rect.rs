//! (δ;k;T) tangency rectangles, tangency prisms, covering, comparability
//! and the anisotropic rescaling maps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::{ck_norm, ck_norm_on, PolyCurve, NORM_SLACK};
use crate::error::{Error, Result};
use crate::poly::Poly;

/// Relative slack used for closed-set boundary decisions.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Constant of the derivative bound `sup_I |f^{(i)}| <= K δ |I|^{-i}`:
/// `2 * 8^{k^2} * k`.
pub fn derivative_bound_const(k: usize) -> f64 {
    2.0 * 8f64.powi((k * k) as i32) * k as f64
}

/// Default prism constant `K = 2 * 8^{k^2} * k + 1`.
pub fn default_prism_const(k: usize) -> f64 {
    derivative_bound_const(k) + 1.0
}

fn close_le(a: f64, b: f64) -> bool {
    a <= b + BOUNDARY_RTOL * b.abs().max(f64::MIN_POSITIVE)
}

/// Closed vertical δ-neighborhood of `graph(g)` above `[a, a + (Tδ)^{1/k}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangencyRect {
    base: PolyCurve,
    anchor: f64,
    delta: f64,
    t_param: f64,
    k: usize,
}

#[derive(Serialize, Deserialize)]
struct RectRepr {
    k: usize,
    delta: f64,
    #[serde(rename = "T")]
    t: f64,
    anchor: f64,
    base_coeffs: Vec<f64>,
}

impl Serialize for TangencyRect {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RectRepr {
            k: self.k,
            delta: self.delta,
            t: self.t_param,
            anchor: self.anchor,
            base_coeffs: self.base.coeffs().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TangencyRect {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RectRepr::deserialize(d)?;
        let base = PolyCurve::new(r.base_coeffs).map_err(serde::de::Error::custom)?;
        TangencyRect::new(base, r.anchor, r.delta, r.t, r.k).map_err(serde::de::Error::custom)
    }
}

impl TangencyRect {
    pub fn new(base: PolyCurve, anchor: f64, delta: f64, t_param: f64, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::Precondition("k must be >= 1".into()));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Precondition(format!("δ = {delta} must lie in (0, 1]")));
        }
        if !(t_param >= 1.0 && close_le(t_param, 1.0 / delta)) {
            return Err(Error::Precondition(format!("T = {t_param} must lie in [1, 1/δ]")));
        }
        let r = TangencyRect { base, anchor, delta, t_param, k };
        let (lo, hi) = r.interval();
        let (da, db) = r.base.domain();
        if lo < da - 1e-12 || hi > db + 1e-12 {
            return Err(Error::Domain(format!("interval [{lo}, {hi}] outside base domain [{da}, {db}]")));
        }
        let n = ck_norm_on(&r.base, k, lo.max(da), hi.min(db))?;
        if n.upper > 1.0 + NORM_SLACK {
            return Err(Error::Precondition(format!("base has C^{k} norm {:.6} > 1 on I", n.upper)));
        }
        Ok(r)
    }

    /// `(δ;k)` rectangle (T = 1).
    pub fn unit_t(base: PolyCurve, anchor: f64, delta: f64, k: usize) -> Result<Self> {
        Self::new(base, anchor, delta, 1.0, k)
    }

    pub fn base(&self) -> &PolyCurve {
        &self.base
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn t_param(&self) -> f64 {
        self.t_param
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> f64 {
        (self.t_param * self.delta).powf(1.0 / self.k as f64)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.anchor, self.anchor + self.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Outcome of a tangency test; `sup` is the achieved `sup_I |f - g|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub tangent: bool,
    pub sup: f64,
}

/// `f ∼ R` iff `sup_I |f - g| <= δ` (closed neighborhood).
pub fn is_tangent(f: &PolyCurve, r: &TangencyRect) -> Result<Tangency> {
    let (lo, hi) = r.interval();
    let (da, db) = f.domain();
    if lo < da - 1e-12 || hi > db + 1e-12 {
        return Err(Error::Domain(format!("I(R) = [{lo}, {hi}] not inside [{da}, {db}]")));
    }
    let d = f.poly().sub(r.base.poly());
    let sup = if d.is_zero() { 0.0 } else { d.sup_abs(lo.max(da), hi.min(db)).lower };
    Ok(Tangency { tangent: close_le(sup, r.delta), sup })
}

/// The degree `k-1` Taylor polynomial of the base at the anchor.
pub fn taylor_model(r: &TangencyRect) -> PolyCurve {
    let shifted = r.base.poly().taylor_at(r.anchor);
    let c: Vec<f64> = shifted.coeffs().iter().take(r.k).copied().collect();
    let p = Poly::new(c).compose_affine(-r.anchor, 1.0);
    PolyCurve::from_poly(p, r.base.domain()).expect("finite Taylor model")
}

/// `{(t, y_0..y_{k-1}) : t in [a, a+δ^{1/k}], |y_j - P_j(t)| <= K δ^{1-j/k}}`
/// with `P_j(t) = sum_{i=j}^{k-1} (t-a)^{i-j}/(i-j)! b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangencyPrism {
    pub a: f64,
    pub b: Vec<f64>,
    pub delta: f64,
    pub kconst: f64,
}

impl TangencyPrism {
    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn t_interval(&self) -> (f64, f64) {
        (self.a, self.a + self.delta.powf(1.0 / self.k() as f64))
    }

    /// Half-width of fiber coordinate `j`.
    pub fn radius(&self, j: usize) -> f64 {
        self.kconst * self.delta.powf(1.0 - j as f64 / self.k() as f64)
    }

    /// `P_j` as a polynomial in `t`.
    pub fn center(&self, j: usize) -> Poly {
        let k = self.k();
        let mut c = vec![0.0; k - j];
        let mut fact = 1.0;
        for i in j..k {
            if i > j {
                fact *= (i - j) as f64;
            }
            c[i - j] = self.b[i] / fact;
        }
        Poly::new(c).compose_affine(-self.a, 1.0)
    }

    /// Smallest slack `K δ^{1-j/k} - |y_j - P_j(t)|` over `j`; negative
    /// when outside. `-inf` if `t` is outside the prism interval.
    pub fn slack(&self, t: f64, y: &[f64]) -> f64 {
        let (lo, hi) = self.t_interval();
        if t < lo - 1e-15 || t > hi + 1e-15 {
            return f64::NEG_INFINITY;
        }
        (0..self.k())
            .map(|j| self.radius(j) - (y[j] - self.center(j).eval(t)).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, t: f64, y: &[f64]) -> bool {
        let s = self.slack(t, y);
        s >= -BOUNDARY_RTOL * self.radius(0)
    }
}

pub fn prism_of(r: &TangencyRect, kconst: f64) -> Result<TangencyPrism> {
    if r.t_param != 1.0 {
        return Err(Error::Unsupported("prisms are defined for T = 1 only".into()));
    }
    Ok(TangencyPrism {
        a: r.anchor,
        b: (0..r.k).map(|i| r.base.eval_deriv(i, r.anchor)).collect(),
        delta: r.delta,
        kconst,
    })
}

/// Result of the exact prism containment test `R̂ ⊆ Ŝ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub covered: bool,
    /// `min_j (K ρ^{1-j/k} - K δ^{1-j/k} - sup_{I(R)} |P^R_j - P^S_j|)`.
    pub margin: f64,
}

/// Decides `R̂ ⊆ Ŝ`. Each fiber is a box, so containment reduces to
/// `sup_{t in I(R)} |P^R_j(t) - P^S_j(t)| + K δ^{1-j/k} <= K ρ^{1-j/k}`
/// for every `j`, where the sup of the polynomial difference is certified.
pub fn cover_check(s: &TangencyRect, r: &TangencyRect, kconst: f64) -> Result<Cover> {
    if s.k != r.k {
        return Err(Error::Precondition("rectangles must share k".into()));
    }
    if r.delta > s.delta {
        return Err(Error::Precondition("need δ <= ρ".into()));
    }
    let ps = prism_of(s, kconst)?;
    let pr = prism_of(r, kconst)?;
    let (rl, rh) = pr.t_interval();
    let (sl, sh) = ps.t_interval();
    if rl < sl - 1e-15 || rh > sh + 1e-15 * sh.abs().max(1.0) {
        return Ok(Cover { covered: false, margin: f64::NEG_INFINITY });
    }
    let mut margin = f64::INFINITY;
    for j in 0..r.k {
        let d = pr.center(j).sub(&ps.center(j));
        let sup = if d.is_zero() { 0.0 } else { d.sup_abs(rl, rh).upper };
        margin = margin.min(ps.radius(j) - pr.radius(j) - sup);
    }
    let covered = margin >= -BOUNDARY_RTOL * ps.radius(0);
    Ok(Cover { covered, margin })
}

pub fn covers(s: &TangencyRect, r: &TangencyRect, kconst: f64) -> Result<bool> {
    Ok(cover_check(s, r, kconst)?.covered)
}

/// Comparability through a fixed set of candidate `(2^k δ;k;T)` covers
/// over the interval hull: bases `g1`, `g2` and `(g1 + g2)/2`. The set is
/// symmetric in the two rectangles, so the predicate is symmetric.
pub fn comparable(r1: &TangencyRect, r2: &TangencyRect) -> Result<bool> {
    if r1.k != r2.k || r1.delta != r2.delta || r1.t_param != r2.t_param {
        return Err(Error::Precondition("comparability needs equal k, δ and T".into()));
    }
    let k = r1.k;
    let big = 2f64.powi(k as i32) * r1.delta;
    let (a1, e1) = r1.interval();
    let (a2, e2) = r2.interval();
    let lo = a1.min(a2);
    let hi = e1.max(e2);
    let cover_len = (r1.t_param * big).powf(1.0 / k as f64);
    if !close_le(hi - lo, cover_len) {
        return Ok(false);
    }
    let room = big - r1.delta;
    let inside = |g: &Poly, r: &TangencyRect| -> bool {
        let d = r.base.poly().sub(g);
        let (l, h) = r.interval();
        d.is_zero() || close_le(d.sup_abs(l, h).lower, room)
    };
    let mid = r1.base.poly().add(r2.base.poly()).scale(0.5);
    for g in [r1.base.poly(), r2.base.poly(), &mid] {
        let gc = PolyCurve::from_poly(g.clone(), (lo, hi))?;
        if ck_norm(&gc, k)?.upper > 1.0 + NORM_SLACK {
            continue;
        }
        if inside(g, r1) && inside(g, r2) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The maps `φ^S`, `ψ^S` attached to a `(ρ;k)` rectangle `S`.
#[derive(Clone, Debug)]
pub struct RescaleMap {
    pub s: TangencyRect,
    pub kconst: f64,
    pub c: f64,
}

impl RescaleMap {
    pub fn new(s: &TangencyRect, kconst: f64) -> Result<Self> {
        if s.t_param != 1.0 {
            return Err(Error::Unsupported("rescaling is defined for T = 1 rectangles".into()));
        }
        Ok(RescaleMap { s: s.clone(), kconst, c: 1.0 / ((s.k as f64 + 1.0) * kconst) })
    }

    fn rho(&self) -> f64 {
        self.s.delta
    }

    fn width(&self) -> f64 {
        self.s.len()
    }

    pub fn phi(&self, x: f64, y: f64) -> (f64, f64) {
        let rho = self.rho();
        ((x - self.s.anchor) / self.width(), self.c / rho * (y - self.s.base.eval(x)))
    }

    /// `ψ^S(x, y_0, ..., y_{k-1})`.
    pub fn psi(&self, x: f64, y: &[f64]) -> (f64, Vec<f64>) {
        let rho = self.rho();
        let k = self.s.k as f64;
        let ys = y
            .iter()
            .enumerate()
            .map(|(j, &yj)| {
                self.c * rho.powf(-1.0 + j as f64 / k) * (yj - self.s.base.eval_deriv(j, x))
            })
            .collect();
        ((x - self.s.anchor) / self.width(), ys)
    }

    /// Polynomial `x -> c ρ^{-1} (p - g)(a + ρ^{1/k} x)`.
    fn pull(&self, p: &Poly) -> Poly {
        p.sub(self.s.base.poly())
            .compose_affine(self.s.anchor, self.width())
            .scale(self.c / self.rho())
    }
}

/// `f_S` with its certified C^k norm on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub curve: PolyCurve,
    pub norm_upper: f64,
}

pub fn rescale_fn(s: &TangencyRect, f: &PolyCurve, kconst: f64) -> Result<Rescaled> {
    let map = RescaleMap::new(s, kconst)?;
    if !is_tangent(f, s)?.tangent {
        return Err(Error::Precondition("f is not tangent to S".into()));
    }
    if ck_norm(f, s.k)?.upper > 1.0 + NORM_SLACK {
        return Err(Error::Precondition("f has C^k norm above 1".into()));
    }
    let curve = PolyCurve::from_poly(map.pull(f.poly()), (0.0, 1.0))?;
    let norm_upper = ck_norm(&curve, s.k)?.upper;
    Ok(Rescaled { curve, norm_upper })
}

/// `R_S`: the `(δ/ρ;k)` rectangle over `φ^S(I(R))` based at the image of
/// `R`'s base.
pub fn rescale_rect(s: &TangencyRect, r: &TangencyRect, kconst: f64) -> Result<TangencyRect> {
    if !covers(s, r, kconst)? {
        return Err(Error::Precondition("S does not cover R".into()));
    }
    let map = RescaleMap::new(s, kconst)?;
    let h = PolyCurve::from_poly(map.pull(r.base.poly()), (0.0, 1.0))?;
    let delta = (r.delta / s.delta).min(1.0);
    let anchor = ((r.anchor - s.anchor) / map.width()).max(0.0);
    let len = delta.powf(1.0 / r.k as f64);
    let anchor = anchor.min(1.0 - len).max(0.0);
    TangencyRect::new(h, anchor, delta, 1.0, r.k)
}

/// Anchors `a in ρ^{1/k} Z ∩ [0, 1)`; an anchor whose interval would leave
/// `[0, 1]` is moved left to end at 1.
pub fn grid_anchors(rho: f64, k: usize) -> Vec<f64> {
    let len = rho.powf(1.0 / k as f64);
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let a = i as f64 * len;
        if a >= 1.0 - 1e-15 {
            break;
        }
        let a = if a + len > 1.0 { (1.0 - len).max(0.0) } else { a };
        if out.last().map_or(true, |&l: &f64| a > l) {
            out.push(a);
        }
        i += 1;
    }
    out
}

/// Quantization step of Taylor coefficient `i`: `ρ^{1-i/k} / (100 * 2^k)`.
pub fn grid_step(rho: f64, k: usize, i: usize) -> f64 {
    rho.powf(1.0 - i as f64 / k as f64) / (100.0 * 2f64.powi(k as i32))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Upper estimate of the canonical grid size (before the norm filter).
pub fn grid_size_estimate(rho: f64, k: usize) -> f64 {
    let anchors = grid_anchors(rho, k).len() as f64;
    (0..k).fold(anchors, |acc, i| {
        let range = 1.0 / factorial(i);
        acc * (2.0 * (range / grid_step(rho, k, i)).floor() + 1.0)
    })
}

/// Base `sum_{i<k} (t - a)^i b_i` from quantized Taylor data.
pub fn grid_base(a: f64, b: &[f64]) -> Result<PolyCurve> {
    PolyCurve::from_poly(Poly::new(b.to_vec()).compose_affine(-a, 1.0), (0.0, 1.0))
}

/// All `(ρ;k)` rectangles with quantized Taylor data and base norm `<= 1`
/// on the interval, ordered by `(a, b)` lexicographically.
pub fn canonical_rect_grid(rho: f64, k: usize, cap: usize) -> Result<Vec<TangencyRect>> {
    if !(rho > 0.0 && rho <= 1.0) || k < 1 {
        return Err(Error::Precondition("need ρ in (0, 1] and k >= 1".into()));
    }
    let est = grid_size_estimate(rho, k);
    if est > cap as f64 {
        return Err(Error::ResourceCap(format!(
            "canonical grid at ρ = {rho}, k = {k} has about {est:.3e} rectangles (cap {cap})"
        )));
    }
    let mut out = Vec::new();
    for a in grid_anchors(rho, k) {
        let ranges: Vec<i64> = (0..k)
            .map(|i| (1.0 / factorial(i) / grid_step(rho, k, i)).floor() as i64)
            .collect();
        let mut idx: Vec<i64> = ranges.iter().map(|&r| -r).collect();
        loop {
            let b: Vec<f64> = idx.iter().enumerate().map(|(i, &n)| n as f64 * grid_step(rho, k, i)).collect();
            if let Ok(r) = TangencyRect::new(grid_base(a, &b)?, a, rho, 1.0, k) {
                out.push(r);
            }
            let mut d = k;
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                if idx[d] < ranges[d] {
                    idx[d] += 1;
                    for e in d + 1..k {
                        idx[e] = -ranges[e];
                    }
                    d = usize::MAX;
                    break;
                }
            }
            if d != usize::MAX {
                break;
            }
        }
    }
    Ok(out)
}

/// The grid rectangle at anchor `a` whose base best tracks `f`: the
/// degree `k-1` Chebyshev interpolant of `f` on the interval, with Taylor
/// data rounded to the grid and pulled toward zero if the norm exceeds one.
pub fn nearest_grid_rect(f: &PolyCurve, a: f64, rho: f64, k: usize) -> Option<TangencyRect> {
    let len = rho.powf(1.0 / k as f64);
    let mid = a + 0.5 * len;
    let half = 0.5 * len;
    // interpolate at k Chebyshev nodes via Newton divided differences
    let xs: Vec<f64> = (0..k)
        .map(|i| mid + half * (std::f64::consts::PI * (i as f64 + 0.5) / k as f64).cos())
        .collect();
    let mut dd: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
    for lvl in 1..k {
        for i in (lvl..k).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (xs[i] - xs[i - lvl]);
        }
    }
    let mut p = Poly::constant(dd[k - 1]);
    for i in (0..k - 1).rev() {
        p = p.mul(&Poly::new(vec![-xs[i], 1.0])).add(&Poly::constant(dd[i]));
    }
    let taylor = p.taylor_at(a);
    let steps: Vec<f64> = (0..k).map(|i| grid_step(rho, k, i)).collect();
    let mut n: Vec<i64> = (0..k)
        .map(|i| (taylor.coeffs().get(i).copied().unwrap_or(0.0) / steps[i]).round() as i64)
        .collect();
    for _ in 0..64 {
        let b: Vec<f64> = n.iter().zip(&steps).map(|(&x, s)| x as f64 * s).collect();
        let base = grid_base(a, &b).ok()?;
        if let Ok(r) = TangencyRect::new(base, a, rho, 1.0, k) {
            return Some(r);
        }
        for x in n.iter_mut() {
            *x -= x.signum();
        }
    }
    None
}

/// Writes one JSON object per line.
pub fn write_rects_jsonl<W: Write>(mut w: W, rects: &[TangencyRect]) -> Result<()> {
    for r in rects {
        writeln!(w, "{}", r.to_json()?)?;
    }
    Ok(())
}

pub fn read_rects_jsonl(s: &str) -> Result<Vec<TangencyRect>> {
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

//! Polynomial curves, jets, C^k norms and the tangency-forbidding constant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{chebyshev_t, Poly, SupBound};

/// Slack allowed when certifying `||f||_{C^k} <= 1` after a rescale that
/// targets the bound exactly.
pub const NORM_SLACK: f64 = 1e-12;

/// Tie tolerance for pair minima in [`forbid_constant`].
pub const TIE_TOL: f64 = 1e-9;

/// A polynomial graph `t -> f(t)` over a closed interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCurve {
    poly: Poly,
    derivs: Vec<Poly>,
    domain: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    coeffs: Vec<f64>,
    #[serde(default = "unit_domain")]
    domain: (f64, f64),
}

fn unit_domain() -> (f64, f64) {
    (0.0, 1.0)
}

impl Serialize for PolyCurve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CurveRepr { coeffs: self.coeffs().to_vec(), domain: self.domain }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CurveRepr::deserialize(d)?;
        PolyCurve::with_domain(r.coeffs, r.domain).map_err(serde::de::Error::custom)
    }
}

impl PolyCurve {
    /// Curve on the unit interval.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::with_domain(coeffs, (0.0, 1.0))
    }

    pub fn with_domain(coeffs: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        Self::from_poly(Poly::new(coeffs), domain)
    }

    pub fn from_poly(poly: Poly, domain: (f64, f64)) -> Result<Self> {
        if poly.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        if !(domain.0.is_finite() && domain.1.is_finite()) || domain.0 >= domain.1 {
            return Err(Error::Domain(format!(
                "degenerate domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        let mut derivs = vec![poly.clone()];
        while !derivs.last().unwrap().is_zero() {
            let d = derivs.last().unwrap().deriv();
            derivs.push(d);
        }
        Ok(PolyCurve { poly, derivs, domain })
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![v]).expect("finite constant")
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn coeffs(&self) -> &[f64] {
        self.poly.coeffs()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// The `i`-th derivative polynomial (zero beyond the degree).
    pub fn deriv(&self, i: usize) -> Poly {
        self.derivs.get(i).cloned().unwrap_or_else(Poly::zero)
    }

    pub fn deriv_ref(&self, i: usize) -> Option<&Poly> {
        self.derivs.get(i)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.poly.eval(t)
    }

    pub fn eval_deriv(&self, i: usize, t: f64) -> f64 {
        self.derivs.get(i).map_or(0.0, |p| p.eval(t))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.domain.0 && t <= self.domain.1
    }

    pub fn sub(&self, other: &PolyCurve) -> PolyCurve {
        PolyCurve::from_poly(self.poly.sub(&other.poly), self.domain).expect("same domain")
    }

    pub fn scale(&self, s: f64) -> PolyCurve {
        PolyCurve::from_poly(self.poly.scale(s), self.domain).expect("finite scale")
    }

    pub fn add_const(&self, c: f64) -> PolyCurve {
        PolyCurve::from_poly(self.poly.add(&Poly::constant(c)), self.domain).expect("finite shift")
    }

    pub fn restrict(&self, domain: (f64, f64)) -> Result<PolyCurve> {
        PolyCurve::from_poly(self.poly.clone(), domain)
    }
}

/// `(f(t), f'(t), ..., f^{(j)}(t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub t: f64,
    pub values: Vec<f64>,
}

pub fn eval_jet(f: &PolyCurve, j: usize, t: f64) -> Result<JetPoint> {
    if !f.contains(t) {
        let (a, b) = f.domain();
        return Err(Error::Domain(format!("t = {t} outside [{a}, {b}]")));
    }
    Ok(JetPoint { t, values: (0..=j).map(|i| f.eval_deriv(i, t)).collect() })
}

/// Certified enclosure of `sum_{i<=k} sup |f^{(i)}|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub lower: f64,
    pub upper: f64,
    pub per_order: Vec<SupBound>,
}

pub fn ck_norm(f: &PolyCurve, k: usize) -> Result<NormBounds> {
    let (a, b) = f.domain();
    ck_norm_on(f, k, a, b)
}

/// C^k norm over a subinterval `[lo, hi]`.
pub fn ck_norm_on(f: &PolyCurve, k: usize, lo: f64, hi: f64) -> Result<NormBounds> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
    }
    Ok(poly_ck_norm(&f.derivs, k, lo, hi))
}

fn poly_ck_norm(derivs: &[Poly], k: usize, lo: f64, hi: f64) -> NormBounds {
    let mut per_order = Vec::with_capacity(k + 1);
    let (mut lower, mut upper) = (0.0, 0.0);
    for i in 0..=k {
        let s = match derivs.get(i) {
            Some(p) if !p.is_zero() => p.sup_abs(lo, hi),
            _ => SupBound::zero(lo),
        };
        lower += s.lower;
        upper += s.upper;
        per_order.push(s);
    }
    NormBounds { lower, upper, per_order }
}

/// Certified `inf_{t in [lo,hi]} sum_{i<=k} |h^{(i)}(t)|`, as `(lower, upper)`.
pub fn inf_jet_sum(h: &PolyCurve, k: usize, lo: f64, hi: f64) -> (f64, f64) {
    let ders: Vec<Poly> = (0..=k).map(|i| h.deriv(i)).collect();
    let mut cuts = vec![lo, hi];
    for d in &ders {
        if !d.is_zero() {
            cuts.extend(d.roots_in(lo, hi).iter().map(|r| r.x));
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut best = (f64::INFINITY, f64::INFINITY);
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        let m = 0.5 * (u + v);
        let mut q = Poly::zero();
        for d in &ders {
            let s = if d.eval(m) < 0.0 { -1.0 } else { 1.0 };
            q = q.add(&d.scale(s));
        }
        let (l, up, _) = q.inf(u, v);
        if up < best.1 {
            best = (l.max(0.0), up);
        }
    }
    if cuts.len() == 1 {
        let v: f64 = ders.iter().map(|d| d.eval(lo).abs()).sum();
        best = (v, v);
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForbidReport {
    /// Measured constant; `+inf` for families with fewer than two curves and
    /// NaN when every pair is a duplicate.
    pub c: f64,
    /// Certified lower bound on `c` over the non-duplicate pairs.
    pub c_lower: f64,
    pub argmin_pair: Option<(usize, usize)>,
    /// Pairs of identical curves, for which the ratio is undefined.
    pub duplicates: Vec<(usize, usize)>,
}

/// Minimum over distinct pairs of `inf_t sum_i |f^{(i)} - g^{(i)}| / ||f - g||_{C^k}`.
pub fn forbid_constant(curves: &[PolyCurve], k: usize) -> Result<ForbidReport> {
    if curves.len() < 2 {
        return Ok(ForbidReport {
            c: f64::INFINITY,
            c_lower: f64::INFINITY,
            argmin_pair: None,
            duplicates: vec![],
        });
    }
    let dom = curves[0].domain();
    if curves.iter().any(|f| f.domain() != dom) {
        return Err(Error::Domain("family members must share a domain".into()));
    }
    let mut best: Option<(f64, f64, (usize, usize))> = None;
    let mut duplicates = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let h = curves[i].sub(&curves[j]);
            if h.poly().is_zero() {
                duplicates.push((i, j));
                continue;
            }
            let n = ck_norm(&h, k)?;
            let (il, iu) = inf_jet_sum(&h, k, dom.0, dom.1);
            let ratio = 0.5 * (il + iu) / n.mid();
            let lower = il / n.upper;
            match best {
                Some((b, _, _)) if ratio >= b - TIE_TOL => {}
                _ => best = Some((ratio, lower, (i, j))),
            }
        }
    }
    Ok(match best {
        Some((c, c_lower, pair)) => ForbidReport { c, c_lower, argmin_pair: Some(pair), duplicates },
        None => ForbidReport { c: f64::NAN, c_lower: f64::NAN, argmin_pair: None, duplicates },
    })
}

impl NormBounds {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Curves sharing a domain, each with certified `||f||_{C^k} <= 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveFamily {
    pub k: usize,
    pub domain: (f64, f64),
    pub curves: Vec<PolyCurve>,
    /// Factor applied uniformly to bring every norm under 1 (1 if none).
    #[serde(default = "one")]
    pub rescale: f64,
    /// Smallest pairwise distance in the jet metric, when computed.
    #[serde(default)]
    pub jet_separation: Option<f64>,
    #[serde(default)]
    pub provenance: String,
}

fn one() -> f64 {
    1.0
}

impl CurveFamily {
    pub fn new(curves: Vec<PolyCurve>, k: usize, provenance: impl Into<String>) -> Result<Self> {
        let domain = curves.first().map_or((0.0, 1.0), |c| c.domain());
        for (i, f) in curves.iter().enumerate() {
            if f.domain() != domain {
                return Err(Error::Construction(format!("curve {i} has a different domain")));
            }
            let n = ck_norm(f, k)?;
            if n.upper > 1.0 + NORM_SLACK {
                return Err(Error::Construction(format!(
                    "curve {i} has C^{k} norm up to {:.6} > 1",
                    n.upper
                )));
            }
        }
        Ok(CurveFamily { k, domain, curves, rescale: 1.0, jet_separation: None, provenance: provenance.into() })
    }

    /// Scales every curve by one common factor so that all norms are at most
    /// one, then validates.
    pub fn normalized(curves: Vec<PolyCurve>, k: usize, provenance: impl Into<String>) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for f in &curves {
            worst = worst.max(ck_norm(f, k)?.upper);
        }
        let factor = if worst > 1.0 { (1.0 - 1e-12) / worst } else { 1.0 };
        let curves = if factor < 1.0 { curves.iter().map(|f| f.scale(factor)).collect() } else { curves };
        let mut fam = CurveFamily::new(curves, k, provenance)?;
        fam.rescale = factor;
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fam: CurveFamily = serde_json::from_str(s)?;
        CurveFamily::new(fam.curves.clone(), fam.k, fam.provenance.clone()).map(|mut f| {
            f.rescale = fam.rescale;
            f.jet_separation = fam.jet_separation;
            f
        })
    }
}

/// Least-squares polynomial approximation with its measured sup error.
#[derive(Clone, Debug)]
pub struct Approximation {
    pub curve: PolyCurve,
    /// Max residual on a grid ten times denser than the fit nodes.
    pub sup_error: f64,
    /// Condition estimate of the fit and basis conversion.
    pub condition: f64,
}

/// Largest condition estimate accepted by [`poly_approximate`].
pub const MAX_FIT_CONDITION: f64 = 1e10;

/// Fits `f` on `domain` by degree `degree` in a Chebyshev basis sampled at
/// `samples` Chebyshev nodes, then converts to monomial form.
pub fn poly_approximate<F: Fn(f64) -> f64>(
    f: F,
    domain: (f64, f64),
    degree: usize,
    samples: usize,
) -> Result<Approximation> {
    if samples < degree + 1 {
        return Err(Error::Precondition(format!(
            "need at least {} samples for degree {degree}",
            degree + 1
        )));
    }
    let (lo, hi) = domain;
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let basis: Vec<Poly> = (0..=degree).map(chebyshev_t).collect();
    let nodes: Vec<f64> = (0..samples)
        .map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / samples as f64).cos())
        .collect();
    let a = DMatrix::from_fn(samples, degree + 1, |i, j| basis[j].eval(nodes[i]));
    let y = DVector::from_iterator(samples, nodes.iter().map(|&s| f(mid + half * s)));
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite sample".into()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let fit_cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let mut in_s = Poly::zero();
    for (j, b) in basis.iter().enumerate() {
        in_s = in_s.add(&b.scale(coef[j]));
    }
    // s = (t - mid) / half
    let in_t = in_s.compose_affine(-mid / half, 1.0 / half);
    let extent = lo.abs().max(hi.abs());
    let mut conv: f64 = 1.0;
    for b in &basis {
        let bt = b.compose_affine(-mid / half, 1.0 / half);
        conv = conv.max(bt.abs_eval(extent));
    }
    let condition = fit_cond * conv;
    if !condition.is_finite() || condition > MAX_FIT_CONDITION {
        return Err(Error::IllConditioned { cond: condition });
    }
    let curve = PolyCurve::from_poly(in_t, domain)?;
    let dense = 10 * samples;
    let mut sup_error: f64 = 0.0;
    for i in 0..=dense {
        let t = lo + (hi - lo) * i as f64 / dense as f64;
        sup_error = sup_error.max((f(t) - curve.eval(t)).abs());
    }
    Ok(Approximation { curve, sup_error, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_of_square() {
        let f = PolyCurve::new(vec![0.0, 0.0, 1.0]).unwrap();
        let j = eval_jet(&f, 1, 0.5).unwrap();
        assert_eq!(j.values, vec![0.25, 1.0]);
        assert!(eval_jet(&f, 1, 1.5).is_err());
    }

    #[test]
    fn norm_of_identity() {
        let f = PolyCurve::new(vec![0.0, 1.0]).unwrap();
        let n = ck_norm(&f, 1).unwrap();
        assert!(n.lower <= 2.0 && 2.0 <= n.upper);
    }

    #[test]
    fn forbid_two_constants() {
        let fam = vec![PolyCurve::constant(0.0), PolyCurve::constant(1.0)];
        let r = forbid_constant(&fam, 0).unwrap();
        assert!((r.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forbid_duplicates_reported() {
        let fam = vec![PolyCurve::constant(0.5), PolyCurve::constant(0.5)];
        let r = forbid_constant(&fam, 1).unwrap();
        assert_eq!(r.duplicates, vec![(0, 1)]);
        assert!(r.c.is_nan());
    }
}

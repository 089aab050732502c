//! Dense univariate polynomials over `f64` with real-root isolation and
//! certified sup/inf bounds on closed intervals.
//!
//! Roots are isolated by the derivative cascade: the critical points of `p`
//! are the roots of `p'` (found recursively), `p` is monotone between
//! consecutive critical points, and each sign change is bisected to full
//! precision. Every sup bound carries an explicit error term covering the
//! bisection bracket width and Horner rounding.

use serde::{Deserialize, Serialize};

const UNIT_ROUNDOFF: f64 = f64::EPSILON * 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    c: Vec<f64>,
}

/// A real root together with the bracket it was bisected from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Certified enclosure of a supremum: `lower <= sup <= upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupBound {
    pub lower: f64,
    pub upper: f64,
    /// Point where `lower` was attained.
    pub argmax: f64,
}

impl SupBound {
    pub fn zero(at: f64) -> Self {
        SupBound { lower: 0.0, upper: 0.0, argmax: at }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

impl Poly {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && c[c.len() - 1] == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Poly { c }
    }

    pub fn zero() -> Self {
        Poly { c: vec![0.0] }
    }

    pub fn constant(v: f64) -> Self {
        Poly { c: vec![v] }
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Poly::new(vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.c.len() == 1 && self.c[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        self.c[self.c.len() - 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &ci in self.c.iter().rev() {
            acc = acc * x + ci;
        }
        acc
    }

    /// Forward error bound for Horner evaluation at `x`.
    pub fn eval_error(&self, x: f64) -> f64 {
        let n = self.c.len() as f64;
        let gamma = 2.0 * n * UNIT_ROUNDOFF / (1.0 - 2.0 * n * UNIT_ROUNDOFF);
        gamma * self.abs_eval(x.abs()) + f64::MIN_POSITIVE
    }

    /// `sum |c_i| x^i`, for `x >= 0`.
    pub fn abs_eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &ci in self.c.iter().rev() {
            acc = acc * x + ci.abs();
        }
        acc
    }

    pub fn deriv(&self) -> Poly {
        if self.c.len() == 1 {
            return Poly::zero();
        }
        Poly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &ci)| ci * i as f64)
                .collect(),
        )
    }

    pub fn nth_deriv(&self, n: usize) -> Poly {
        let mut p = self.clone();
        for _ in 0..n {
            p = p.deriv();
        }
        p
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.c.iter().map(|&v| v * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.c.len().max(other.c.len());
        let mut c = vec![0.0; n];
        for (i, v) in self.c.iter().enumerate() {
            c[i] += v;
        }
        for (i, v) in other.c.iter().enumerate() {
            c[i] += v;
        }
        Poly::new(c)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut c = vec![0.0; self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    /// `x -> p(a + s x)`.
    pub fn compose_affine(&self, a: f64, s: f64) -> Poly {
        let lin = Poly::new(vec![a, s]);
        let mut q = Poly::constant(self.leading());
        for &ci in self.c.iter().rev().skip(1) {
            q = q.mul(&lin).add(&Poly::constant(ci));
        }
        q
    }

    /// Coefficients of the Taylor expansion around `a`, i.e. `p(a + x)`.
    pub fn taylor_at(&self, a: f64) -> Poly {
        self.compose_affine(a, 1.0)
    }

    /// Bound on `sup |p'|` over `[-m, m]` from coefficient magnitudes.
    fn deriv_coeff_bound(&self, m: f64) -> f64 {
        self.deriv().abs_eval(m)
    }

    /// Real roots in `[lo, hi]`, sorted, with their bisection brackets.
    /// The zero polynomial reports no roots; callers must special-case it.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<Root> {
        if lo > hi || self.is_zero() || self.degree() == 0 {
            return Vec::new();
        }
        if self.degree() == 1 {
            let x = -self.c[0] / self.c[1];
            if x >= lo && x <= hi {
                return vec![Root { x, lo: x, hi: x }];
            }
            return Vec::new();
        }
        let crit = self.deriv().roots_in(lo, hi);
        let mut pts = Vec::with_capacity(crit.len() + 2);
        pts.push(lo);
        pts.extend(crit.iter().map(|r| r.x));
        pts.push(hi);
        let mut roots: Vec<Root> = Vec::new();
        let push = |roots: &mut Vec<Root>, r: Root| {
            if let Some(last) = roots.last() {
                if r.x <= last.x {
                    return;
                }
            }
            roots.push(r);
        };
        for w in pts.windows(2) {
            let (u, v) = (w[0], w[1]);
            let pu = self.eval(u);
            if pu == 0.0 || pu.abs() <= self.eval_error(u) && u != lo && u != hi {
                // exact zero, or a touching root at a critical point
                push(&mut roots, Root { x: u, lo: u, hi: u });
                continue;
            }
            if u >= v {
                continue;
            }
            let pv = self.eval(v);
            if pv != 0.0 && pu.signum() != pv.signum() {
                push(&mut roots, self.bisect(u, v, pu));
            }
        }
        let ph = self.eval(hi);
        if ph == 0.0 {
            push(&mut roots, Root { x: hi, lo: hi, hi });
        }
        roots
    }

    fn bisect(&self, mut u: f64, mut v: f64, pu: f64) -> Root {
        let su = pu.signum();
        for _ in 0..200 {
            let m = 0.5 * (u + v);
            if m <= u || m >= v {
                break;
            }
            let pm = self.eval(m);
            if pm == 0.0 {
                return Root { x: m, lo: m, hi: m };
            }
            if pm.signum() == su {
                u = m;
            } else {
                v = m;
            }
        }
        Root { x: 0.5 * (u + v), lo: u, hi: v }
    }

    /// Certified bounds on `sup_{[lo,hi]} |p|`.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> SupBound {
        self.extreme(lo, hi, |v| v.abs())
    }

    /// Certified bounds on `max_{[lo,hi]} p`.
    pub fn sup(&self, lo: f64, hi: f64) -> SupBound {
        self.extreme(lo, hi, |v| v)
    }

    /// Certified bounds on `min_{[lo,hi]} p`, returned as `(lower, upper)`
    /// with `lower <= min <= upper`.
    pub fn inf(&self, lo: f64, hi: f64) -> (f64, f64, f64) {
        let s = self.scale(-1.0).sup(lo, hi);
        (-s.upper, -s.lower, s.argmax)
    }

    /// Exact-up-to-rounding `(min, max)` of `p` over `[lo, hi]` using a
    /// precomputed list of critical points (roots of `p'`).
    pub fn range_with_crit(&self, lo: f64, hi: f64, crit: &[f64]) -> (f64, f64) {
        let a = self.eval(lo);
        let b = self.eval(hi);
        let (mut mn, mut mx) = (a.min(b), a.max(b));
        let start = crit.partition_point(|&c| c < lo);
        for &c in &crit[start..] {
            if c > hi {
                break;
            }
            let v = self.eval(c);
            mn = mn.min(v);
            mx = mx.max(v);
        }
        (mn, mx)
    }

    fn extreme<G: Fn(f64) -> f64>(&self, lo: f64, hi: f64, g: G) -> SupBound {
        let m = lo.abs().max(hi.abs());
        let d1 = self.deriv_coeff_bound(m);
        let mut best = SupBound { lower: f64::NEG_INFINITY, upper: f64::NEG_INFINITY, argmax: lo };
        let mut consider = |x: f64, width: f64| {
            let v = g(self.eval(x));
            let err = self.eval_error(x) + width * d1;
            if v > best.lower {
                best.lower = v;
                best.argmax = x;
            }
            best.upper = best.upper.max(v + err);
        };
        consider(lo, 0.0);
        consider(hi, 0.0);
        if self.degree() >= 2 {
            for r in self.deriv().roots_in(lo, hi) {
                consider(r.x, r.hi - r.lo);
            }
        }
        best
    }
}

/// Chebyshev polynomial `T_n` in the monomial basis.
pub fn chebyshev_t(n: usize) -> Poly {
    let mut a = Poly::constant(1.0);
    if n == 0 {
        return a;
    }
    let mut b = Poly::x();
    let two_x = Poly::new(vec![0.0, 2.0]);
    for _ in 1..n {
        let c = two_x.mul(&b).sub(&a);
        a = b;
        b = c;
    }
    b
}

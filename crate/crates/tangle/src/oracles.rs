//! Numerical verifiers for the quantitative lemmas used by the incidence
//! machinery: Remez and Pólya inequalities, derivative bounds from
//! smallness, rectangle upgrades, Gronwall closeness, a cinematic norm
//! bound and a tube-volume bound for algebraic sets.
//!
//! Every checker validates its own hypotheses first and returns
//! `Error::Precondition` when they fail, so a `LemmaReport` with
//! `pass == false` always means the inequality itself failed.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{ck_norm, ck_norm_on, inf_jet_sum, PolyCurve, NORM_SLACK};
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rect::{default_prism_const, derivative_bound_const, prism_of, rescale_fn, TangencyRect};

/// Rounding slack of the pass predicate, relative to the right-hand side.
pub const LEMMA_SLACK: f64 = 1e-9;

/// Constant of the Gronwall closeness check.
pub const GRONWALL_C: f64 = 8.0;

/// Default constant of the tube-volume bound.
pub const WONGKEW_C: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub pass: bool,
    /// `rhs / lhs`; infinite when `lhs == 0`.
    pub margin: f64,
}

impl LemmaReport {
    pub fn new(lemma: &str, instance: String, lhs: f64, rhs: f64, constant: f64) -> Self {
        let pass = lhs <= rhs + LEMMA_SLACK * rhs.abs();
        let margin = if lhs == 0.0 { f64::INFINITY } else { rhs / lhs };
        LemmaReport { lemma: lemma.to_string(), instance, lhs, rhs, constant, pass, margin }
    }
}

fn precondition(msg: String) -> Error {
    Error::Precondition(msg)
}

fn le_slack(a: f64, b: f64) -> bool {
    a <= b + LEMMA_SLACK * b.abs()
}

fn merge_intervals(e: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = e.iter().copied().filter(|(a, b)| b > a).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn sup_abs_mid(p: &Poly, lo: f64, hi: f64) -> f64 {
    if p.is_zero() {
        0.0
    } else {
        p.sup_abs(lo, hi).mid()
    }
}

fn sup_abs_upper(p: &Poly, lo: f64, hi: f64) -> f64 {
    if p.is_zero() {
        0.0
    } else {
        p.sup_abs(lo, hi).upper
    }
}

/// `sup_I |P| <= (4|I|/|E|)^D sup_E |P|` for `E` a finite union of
/// intervals inside `I`.
pub fn remez_check(p: &Poly, i: (f64, f64), e: &[(f64, f64)]) -> Result<LemmaReport> {
    let (lo, hi) = i;
    if !(lo < hi) {
        return Err(precondition(format!("I = [{lo}, {hi}] is empty")));
    }
    let e = merge_intervals(e);
    let measure: f64 = e.iter().map(|(a, b)| b - a).sum();
    if measure <= 0.0 {
        return Err(precondition("|E| = 0".into()));
    }
    if e.iter().any(|&(a, b)| a < lo || b > hi) {
        return Err(precondition("E is not contained in I".into()));
    }
    let d = p.degree() as i32;
    let sup_i = sup_abs_mid(p, lo, hi);
    let sup_e = e.iter().map(|&(a, b)| sup_abs_mid(p, a, b)).fold(0.0, f64::max);
    let factor = (4.0 * (hi - lo) / measure).powi(d);
    Ok(LemmaReport::new(
        "remez",
        format!("deg {d}, I = [{lo}, {hi}], |E| = {measure} in {} pieces", e.len()),
        sup_i,
        factor * sup_e,
        4.0,
    ))
}

/// `|{x in R : |P(x)| <= λ}|`, from the real roots of `P - λ` and `P + λ`.
pub fn sublevel_measure(p: &Poly, lambda: f64) -> Result<f64> {
    if p.degree() == 0 {
        return Err(precondition("P is constant".into()));
    }
    let a = p.leading();
    let shifted = |s: f64| {
        let mut c = p.coeffs().to_vec();
        c[0] -= s;
        Poly::new(c)
    };
    let (pm, pp) = (shifted(lambda), shifted(-lambda));
    let bound = |q: &Poly| {
        let c = q.coeffs();
        1.0 + c[..c.len() - 1].iter().map(|x| (x / a).abs()).fold(0.0, f64::max)
    };
    let b = bound(&pm).max(bound(&pp));
    let mut cuts = vec![-b, b];
    cuts.extend(pm.roots_in(-b, b).iter().map(|r| r.x));
    cuts.extend(pp.roots_in(-b, b).iter().map(|r| r.x));
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    Ok(cuts
        .windows(2)
        .filter(|w| p.eval(0.5 * (w[0] + w[1])).abs() <= lambda)
        .map(|w| w[1] - w[0])
        .sum())
}

/// `|{|P| <= λ}| <= 4 (λ / (2|a|))^{1/D}` with `a` the leading coefficient.
pub fn polya_check(p: &Poly, lambda: f64) -> Result<LemmaReport> {
    if p.is_zero() || p.degree() == 0 {
        return Err(precondition("leading coefficient vanishes (degree 0)".into()));
    }
    if !(lambda > 0.0) {
        return Err(precondition(format!("λ = {lambda} must be positive")));
    }
    let d = p.degree();
    let a = p.leading();
    let m = sublevel_measure(p, lambda)?;
    let rhs = 4.0 * (lambda / (2.0 * a.abs())).powf(1.0 / d as f64);
    Ok(LemmaReport::new("polya", format!("deg {d}, a = {a}, λ = {lambda}"), m, rhs, 4.0))
}

/// `sup_I |f^{(i)}| <= K δ |I|^{-i}` for `i < k`. The report carries
/// `lhs = max_i sup_I |f^{(i)}| / (δ |I|^{-i})` against `rhs = K`.
pub fn derivative_bound_check(f: &PolyCurve, delta: f64, i: (f64, f64), k: usize) -> Result<LemmaReport> {
    derivative_bound_with(f, delta, i, k, derivative_bound_const(k))
}

pub fn derivative_bound_with(f: &PolyCurve, delta: f64, i: (f64, f64), k: usize, kc: f64) -> Result<LemmaReport> {
    let (lo, hi) = i;
    let len = hi - lo;
    if k == 0 || !(len > 0.0) || !(delta > 0.0) {
        return Err(precondition("need k >= 1, |I| > 0 and δ > 0".into()));
    }
    let norm = ck_norm(f, k)?.upper;
    if norm > 1.0 + NORM_SLACK {
        return Err(precondition(format!("||f||_C^k = {norm} > 1")));
    }
    if len > delta.powf(1.0 / k as f64) * (1.0 + LEMMA_SLACK) {
        return Err(precondition(format!("|I| = {len} > δ^(1/k)")));
    }
    let s0 = sup_abs_mid(f.poly(), lo, hi);
    if !le_slack(s0, delta) {
        return Err(precondition(format!("sup_I |f| = {s0} > δ = {delta}")));
    }
    let mut worst = 0.0f64;
    for j in 0..k {
        let s = sup_abs_mid(&f.deriv(j), lo, hi);
        worst = worst.max(s / (delta * len.powi(-(j as i32))));
    }
    Ok(LemmaReport::new("derivative_bound", format!("k {k}, δ = {delta:e}, I = [{lo}, {hi}]"), worst, kc, kc))
}

/// Proof-traced constant of the long-rectangle lemma:
/// `K_B * sum_{i<k} 1/i! + 1/k!`, from the Taylor expansion at `a`.
pub fn long_rect_const(k: usize) -> f64 {
    let mut fact = 1.0;
    let mut sum = 0.0;
    for i in 0..k {
        if i > 0 {
            fact *= i as f64;
        }
        sum += 1.0 / fact;
    }
    derivative_bound_const(k) * sum + 1.0 / (fact * k as f64)
}

/// `|f| <= C ρ` on `[a, a + ρ^{1/k}]` with `ρ = max(δ, T^{-k})`, given
/// `|f| <= δ` on `[a, a + (Tδ)^{1/(k-1)}]`. The conclusion interval is
/// clipped to the domain of `f`. Reports `sup / ρ` against `C`.
pub fn long_rect_check(f: &PolyCurve, delta: f64, t: f64, a: f64, k: usize) -> Result<LemmaReport> {
    if k < 2 {
        return Err(precondition("k >= 2 is required".into()));
    }
    if !(delta > 0.0) || t < 1.0 || !le_slack(t, 1.0 / delta) {
        return Err(precondition(format!("need T in [1, 1/δ], got T = {t}, δ = {delta}")));
    }
    let (da, db) = f.domain();
    let len = (t * delta).powf(1.0 / (k - 1) as f64);
    if a < da || a + len > db * (1.0 + LEMMA_SLACK) {
        return Err(precondition(format!("I = [{a}, {}] leaves the domain", a + len)));
    }
    let norm = ck_norm(f, k)?.upper;
    if norm > 1.0 + NORM_SLACK {
        return Err(precondition(format!("||f||_C^k = {norm} > 1")));
    }
    let s = sup_abs_mid(f.poly(), a, (a + len).min(db));
    if !le_slack(s, delta) {
        return Err(precondition(format!("sup_I |f| = {s} > δ = {delta}")));
    }
    let rho = delta.max(t.powi(-(k as i32)));
    let hi = (a + rho.powf(1.0 / k as f64)).min(db);
    let sup = sup_abs_mid(f.poly(), a, hi);
    let c = long_rect_const(k);
    Ok(LemmaReport::new(
        "long_rect",
        format!("k {k}, δ = {delta:e}, T = {t}, a = {a}, ρ = {rho:e}"),
        sup / rho,
        c,
        c,
    ))
}

/// `ε = 1 / (2 ⌈2A⌉)`.
pub fn pigeonhole_eps(a: f64) -> f64 {
    1.0 / (2.0 * (2.0 * a).ceil())
}

fn pair_sups(curves: &[PolyCurve], lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let n = curves.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if j <= i { 0.0 } else { sup_abs_mid(&curves[i].poly().sub(curves[j].poly()), lo, hi) })
                .collect()
        })
        .collect();
    let mut m = rows;
    for i in 0..n {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    m
}

/// Pigeonhole from `Aδ`-close to `δ`-close over `I = [a, a + δ^{1/k}]`.
/// Returns the report (`lhs = ε #F`, `rhs = #F'`) and the witness `F'`.
/// The witness is the best `δ/2`-star grown greedily, verified pairwise.
pub fn pigeonhole_rect_check(
    curves: &[PolyCurve],
    a: f64,
    delta: f64,
    big_a: f64,
    k: usize,
) -> Result<(LemmaReport, Vec<usize>)> {
    if curves.is_empty() || big_a < 1.0 || !(delta > 0.0) || k == 0 {
        return Err(precondition("need a nonempty family, A >= 1, δ > 0, k >= 1".into()));
    }
    let (lo, hi) = (a, a + delta.powf(1.0 / k as f64));
    for (i, f) in curves.iter().enumerate() {
        let (da, db) = f.domain();
        if lo < da || hi > db * (1.0 + LEMMA_SLACK) {
            return Err(precondition(format!("I leaves the domain of curve {i}")));
        }
        let nrm = ck_norm(f, k)?.upper;
        if nrm > 1.0 + NORM_SLACK {
            return Err(precondition(format!("curve {i} has C^k norm {nrm} > 1")));
        }
    }
    let m = pair_sups(curves, lo, hi.min(curves[0].domain().1));
    let n = curves.len();
    for i in 0..n {
        for j in i + 1..n {
            if !le_slack(m[i][j], big_a * delta) {
                return Err(precondition(format!("sup |f_{i} - f_{j}| = {} > Aδ", m[i][j])));
            }
        }
    }
    let star = |c: usize| (0..n).filter(|&j| m[c][j] <= 0.5 * delta).collect::<Vec<_>>();
    let mut best = star(0);
    for c in 1..n {
        let s = star(c);
        if s.len() > best.len() {
            best = s;
        }
    }
    let mut chosen = best;
    for j in 0..n {
        if !chosen.contains(&j) && chosen.iter().all(|&c| le_slack(m[c][j], delta)) {
            chosen.push(j);
        }
    }
    chosen.sort_unstable();
    for (x, &i) in chosen.iter().enumerate() {
        for &j in &chosen[x + 1..] {
            if !le_slack(m[i][j], delta) {
                return Err(Error::Numerical(format!("witness pair ({i}, {j}) is not δ-close")));
            }
        }
    }
    let eps = pigeonhole_eps(big_a);
    let rep = LemmaReport::new(
        "pigeonhole",
        format!("#F = {n}, A = {big_a}, δ = {delta:e}, k {k}"),
        eps * n as f64,
        chosen.len() as f64,
        eps,
    );
    Ok((rep, chosen))
}

/// Solution values of an order-`n` scalar ODE, one jet per output time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IvpSolution {
    pub ts: Vec<f64>,
    /// `(h, h', ..., h^{(n-1)})` at each output time.
    pub ys: Vec<Vec<f64>>,
    pub steps: usize,
}

const MAX_IVP_STEPS: usize = 2_000_000;

type Field<'a> = &'a (dyn Fn(f64, &[f64]) -> f64 + Sync);

fn system(field: Field, t: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut d = Vec::with_capacity(n);
    d.extend_from_slice(&y[1..]);
    d.push(field(t, y));
    d
}

fn rk4(field: Field, t: f64, y: &[f64], h: f64) -> Vec<f64> {
    let axpy = |y: &[f64], k: &[f64], s: f64| y.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
    let k1 = system(field, t, y);
    let k2 = system(field, t + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = system(field, t + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = system(field, t + h, &axpy(y, &k3, h));
    (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Solves `h^{(n)} = F(t, h, ..., h^{(n-1)})` from the jet `y0` at `t0`
/// and reports the jet at each output time. Outputs must be monotone
/// moving away from `t0`. Classical RK4 with step doubling; the local
/// error per step is held below `tol * |step| / span`, so the global
/// error stays near `tol`.
pub fn solve_ivp(field: Field, t0: f64, y0: &[f64], outputs: &[f64], tol: f64) -> Result<IvpSolution> {
    if y0.is_empty() || !(tol > 0.0) {
        return Err(precondition("need n >= 1 and tol > 0".into()));
    }
    let Some(&last) = outputs.last() else {
        return Ok(IvpSolution { ts: vec![], ys: vec![], steps: 0 });
    };
    let dir = if last >= t0 { 1.0 } else { -1.0 };
    if outputs.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) || (outputs[0] - t0) * dir < 0.0 {
        return Err(precondition("outputs must move monotonically away from t0".into()));
    }
    let span = (last - t0).abs().max(f64::MIN_POSITIVE);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = dir * span / 16.0;
    let mut steps = 0;
    let mut ys = Vec::with_capacity(outputs.len());
    for &target in outputs {
        while (target - t) * dir > 1e-15 * span {
            let hs = if (t + h - target) * dir > 0.0 { target - t } else { h };
            let full = rk4(field, t, &y, hs);
            let half = rk4(field, t, &y, 0.5 * hs);
            let two = rk4(field, t + 0.5 * hs, &half, 0.5 * hs);
            let err = full.iter().zip(&two).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 15.0;
            let allowed = tol * hs.abs() / span;
            steps += 1;
            if steps > MAX_IVP_STEPS {
                return Err(Error::ResourceCap(format!("IVP needed more than {MAX_IVP_STEPS} steps")));
            }
            if !err.is_finite() {
                return Err(Error::Numerical("IVP solution blew up".into()));
            }
            // below roundoff the estimate is noise; further halving cannot help
            let floor = 64.0 * f64::EPSILON * y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if err <= allowed.max(floor) {
                t += hs;
                y = two.iter().zip(&full).map(|(b, a)| b + (b - a) / 15.0).collect();
                let grow = if err == 0.0 { 2.0 } else { (0.9 * (allowed / err).powf(0.2)).min(2.0) };
                if hs == h {
                    h *= grow.max(1.0);
                }
            } else {
                h = hs * (0.9 * (allowed / err).powf(0.2)).max(0.1);
            }
        }
        t = target;
        ys.push(y.clone());
    }
    Ok(IvpSolution { ts: outputs.to_vec(), ys, steps })
}

/// Derivative oracle `(t, i) -> f^{(i)}(t)`.
pub type JetFn<'a> = &'a (dyn Fn(f64, usize) -> f64 + Sync);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub report: LemmaReport,
    pub t0: f64,
    pub residual_f: f64,
    pub residual_g: f64,
    pub jet_gap: f64,
    pub sup_h_f: f64,
    pub sup_h_g: f64,
    pub h: IvpSolution,
}

/// Closeness of two near-solutions of `x^{(n)} = F(t, J_{n-1} x)` on `I`.
/// Hypotheses are checked on a uniform grid of `grid + 1` points; `t0` is
/// the grid point of smallest jet gap. The comparison solution `h` starts
/// from the midpoint of the two `(n-1)`-jets at `t0` and is integrated to
/// tolerance `ρ/100`.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_closeness(
    f: JetFn,
    g: JetFn,
    field: Field,
    l: f64,
    rho: f64,
    i: (f64, f64),
    n: usize,
    grid: usize,
) -> Result<GronwallReport> {
    let (lo, hi) = i;
    if n == 0 || l < 1.0 || !(rho > 0.0) || !(lo < hi) || grid < 2 {
        return Err(precondition("need n >= 1, L >= 1, ρ > 0, a nonempty I and grid >= 2".into()));
    }
    let ts: Vec<f64> = (0..=grid).map(|j| lo + (hi - lo) * j as f64 / grid as f64).collect();
    let jet = |x: JetFn, t: f64, m: usize| (0..m).map(|d| x(t, d)).collect::<Vec<f64>>();
    let residual = |x: JetFn| {
        ts.iter().map(|&t| (x(t, n) - field(t, &jet(x, t, n))).abs()).fold(0.0, f64::max)
    };
    let (rf, rg) = (residual(f), residual(g));
    if !le_slack(rf, rho) {
        return Err(precondition(format!("|f^(n) - F(t, J f)| reaches {rf} > ρ = {rho}")));
    }
    if !le_slack(rg, rho) {
        return Err(precondition(format!("|g^(n) - F(t, J g)| reaches {rg} > ρ = {rho}")));
    }
    let gap = |t: f64| (0..=n).map(|d| (f(t, d) - g(t, d)).powi(2)).sum::<f64>().sqrt();
    let (mut j0, mut best) = (0, f64::INFINITY);
    for (j, &t) in ts.iter().enumerate() {
        let v = gap(t);
        if v < best {
            best = v;
            j0 = j;
        }
    }
    if !le_slack(best, rho) {
        return Err(precondition(format!("|J_n f(t0) - J_n g(t0)| >= {best} > ρ = {rho} at every grid point")));
    }
    let t0 = ts[j0];
    let z: Vec<f64> = (0..n).map(|d| 0.5 * (f(t0, d) + g(t0, d))).collect();
    let tol = rho / 100.0;
    let fwd = solve_ivp(field, t0, &z, &ts[j0..], tol)?;
    let back: Vec<f64> = ts[..j0].iter().rev().copied().collect();
    let bwd = solve_ivp(field, t0, &z, &back, tol)?;
    let mut hs: Vec<f64> = bwd.ys.iter().rev().map(|y| y[0]).collect();
    hs.extend(fwd.ys.iter().map(|y| y[0]));
    let mut h_ts: Vec<f64> = bwd.ts.iter().rev().copied().collect();
    h_ts.extend(&fwd.ts);
    let mut h_ys: Vec<Vec<f64>> = bwd.ys.iter().rev().cloned().collect();
    h_ys.extend(fwd.ys.iter().cloned());
    let (mut dfg, mut dhf, mut dhg) = (0.0f64, 0.0f64, 0.0f64);
    for (k, &t) in ts.iter().enumerate() {
        let (fv, gv) = (f(t, 0), g(t, 0));
        dfg = dfg.max((fv - gv).abs());
        dhf = dhf.max((hs[k] - fv).abs());
        dhg = dhg.max((hs[k] - gv).abs());
    }
    let rhs = GRONWALL_C * (l * (hi - lo)).exp() * rho;
    let report = LemmaReport::new(
        "gronwall",
        format!("n {n}, L = {l}, ρ = {rho:e}, I = [{lo}, {hi}], t0 = {t0}"),
        dfg,
        rhs,
        GRONWALL_C,
    );
    Ok(GronwallReport {
        report,
        t0,
        residual_f: rf,
        residual_g: rg,
        jet_gap: best,
        sup_h_f: dhf,
        sup_h_g: dhg,
        h: IvpSolution { ts: h_ts, ys: h_ys, steps: fwd.steps + bwd.steps },
    })
}

/// `||f||_{C^k(I)} <= C (K/|J|)^k δ` given `sup_J |f| <= δ` and
/// `||f||_{C^k(I)} <= K inf_I sum_j |f^{(j)}|`; `I` is the domain of `f`.
/// Reports `||f|| / ((K/|J|)^k δ)` against `C = K_B`.
pub fn cinematic_norm_check(f: &PolyCurve, j: (f64, f64), kk: f64, k: usize, delta: f64) -> Result<LemmaReport> {
    if k < 2 || kk < 1.0 || !(delta > 0.0) {
        return Err(precondition("need k >= 2, K >= 1 and δ > 0".into()));
    }
    let (lo, hi) = f.domain();
    let (jl, jh) = j;
    if !(jl < jh) || jl < lo || jh > hi || jh - jl > 1.0 {
        return Err(precondition(format!("J = [{jl}, {jh}] must be a subinterval of I of length <= 1")));
    }
    let norm = ck_norm_on(f, k, lo, hi)?.upper;
    if norm > 1.0 + NORM_SLACK {
        return Err(precondition(format!("||f||_C^k(I) = {norm} > 1")));
    }
    let sj = sup_abs_mid(f.poly(), jl, jh);
    if !le_slack(sj, delta) {
        return Err(precondition(format!("sup_J |f| = {sj} > δ = {delta}")));
    }
    let inf = inf_jet_sum(f, k, lo, hi).0;
    if !le_slack(norm, kk * inf) {
        return Err(precondition(format!("||f|| = {norm} > K inf_I sum |f^(j)| = {}", kk * inf)));
    }
    let c = derivative_bound_const(k);
    let scale = (kk / (jh - jl)).powi(k as i32) * delta;
    Ok(LemmaReport::new(
        "cinematic_norm",
        format!("k {k}, K = {kk}, |J| = {}, δ = {delta:e}", jh - jl),
        norm / scale,
        c,
        c,
    ))
}

/// Sparse multivariate polynomial `sum c_a x^a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MPoly {
    pub nvars: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl MPoly {
    pub fn new(nvars: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if terms.iter().any(|(c, e)| e.len() != nvars || !c.is_finite()) {
            return Err(precondition("every exponent vector needs one entry per variable".into()));
        }
        let terms: Vec<_> = terms.into_iter().filter(|(c, _)| *c != 0.0).collect();
        Ok(MPoly { nvars, terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, e)| c * e.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product::<f64>()).sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for (c, e) in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut v = c * e[i] as f64;
                for (j, (&p, &xj)) in e.iter().zip(x).enumerate() {
                    let p = if j == i { p - 1 } else { p };
                    v *= xj.powi(p as i32);
                }
                *gi += v;
            }
        }
        g
    }
}

/// Lower clamp on `|∇Q|` in the distance proxy.
pub const GRAD_FLOOR: f64 = 1e-12;

const MC_CHUNK: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WongkewReport {
    pub report: LemmaReport,
    pub estimate: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ball_volume: f64,
    pub samples: usize,
    /// Membership uses `|Q| / max(|∇Q|, floor) <= ρ`, a first-order proxy
    /// for the distance to the zero set.
    pub proxy: bool,
}

pub fn ball_volume(n: usize, r: f64) -> f64 {
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut m = if n % 2 == 0 { 2 } else { 3 };
    while m <= n {
        v *= 2.0 * std::f64::consts::PI / m as f64;
        m += 2;
    }
    v * r.powi(n as i32)
}

/// Monte Carlo estimate of `|B(center, r) ∩ N_ρ(Z(Q))|` with a 95%
/// interval, compared with `C (deg Q)^n ρ r^{n-1}`. The report's `lhs` is
/// the upper end of the interval.
pub fn wongkew_volume(
    q: &MPoly,
    rho: f64,
    r: f64,
    center: &[f64],
    samples: usize,
    seed: u64,
    c: f64,
) -> Result<WongkewReport> {
    let n = q.nvars;
    if q.is_zero() {
        return Err(precondition("Q vanishes identically".into()));
    }
    if center.len() != n || n == 0 || !(rho > 0.0) || !(r > 0.0) || samples == 0 {
        return Err(precondition("need a center in R^n, ρ > 0, r > 0 and samples > 0".into()));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let counts: Vec<(u64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64 + 1);
            let m = MC_CHUNK.min(samples - ci * MC_CHUNK);
            let (mut hit, mut degenerate) = (0u64, 0u64);
            let mut x = vec![0.0; n];
            for _ in 0..m {
                loop {
                    for v in x.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                        break;
                    }
                }
                let p: Vec<f64> = x.iter().zip(center).map(|(u, c0)| c0 + r * u).collect();
                let gn = q.grad(&p).iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn < GRAD_FLOOR {
                    degenerate += 1;
                }
                if q.eval(&p).abs() / gn.max(GRAD_FLOOR) <= rho {
                    hit += 1;
                }
            }
            (hit, degenerate)
        })
        .collect();
    let hits: u64 = counts.iter().map(|c| c.0).sum();
    let degenerate: u64 = counts.iter().map(|c| c.1).sum();
    if degenerate as usize == samples {
        return Err(Error::Numerical("gradient is degenerate at every sample".into()));
    }
    let vb = ball_volume(n, r);
    let p = hits as f64 / samples as f64;
    let estimate = vb * p;
    let sigma = vb * (p * (1.0 - p) / samples as f64).sqrt();
    let (ci_low, ci_high) = (estimate - 1.96 * sigma, estimate + 1.96 * sigma);
    let rhs = c * (q.degree() as f64).powi(n as i32) * rho * r.powi(n as i32 - 1);
    let report = LemmaReport::new(
        "wongkew",
        format!("n {n}, deg {}, ρ = {rho:e}, r = {r}, {samples} samples, seed {seed}", q.degree()),
        ci_high,
        rhs,
        c,
    );
    Ok(WongkewReport { report, estimate, sigma, ci_low, ci_high, ball_volume: vb, samples, proxy: true })
}

// ---------------------------------------------------------------------
// Randomized suites

/// Lemmas with a randomized admissible generator.
pub const LEMMAS: [&str; 10] = [
    "remez",
    "polya",
    "derivative_bound",
    "long_rect",
    "pigeonhole",
    "gronwall",
    "cinematic_norm",
    "ck_rescaling",
    "prism_vs_rect",
    "tangency_implies_cover",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStatus {
    Pass,
    Fail,
    Precondition,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub index: usize,
    pub status: CaseStatus,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub instance: String,
    pub message: Option<String>,
    pub repro: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub lemma: String,
    pub seed: u64,
    pub n: usize,
    pub passed: usize,
    pub failed: usize,
    pub preconditions: usize,
    pub errors: usize,
    pub min_margin: f64,
    pub cases: Vec<CaseRecord>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0 && self.errors == 0 && self.preconditions == 0
    }
}

pub fn repro_command(lemma: &str, seed: u64, index: usize) -> String {
    format!("tangle lemmas --seed {seed} --only {lemma} --instance {index}")
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Random polynomial of degree `k..=k+3` with `||f||_{C^k[0,1]} <= 1 - 1e-9`.
fn unit_poly(rng: &mut ChaCha8Rng, k: usize) -> Result<PolyCurve> {
    let deg = rng.gen_range(k..=k + 3);
    let c: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = PolyCurve::new(c)?;
    let nrm = ck_norm(&f, k)?.upper;
    Ok(if nrm > 1.0 - 1e-9 { f.scale((1.0 - 1e-9) / nrm) } else { f })
}

/// `f + w (h - f)` with `w` chosen so the sup over `[lo, hi]` of the
/// change is a random fraction in `[0.5, 1]` of `cap`.
fn pull_toward(rng: &mut ChaCha8Rng, f: &PolyCurve, h: &PolyCurve, lo: f64, hi: f64, cap: f64) -> Result<PolyCurve> {
    let d = h.poly().sub(f.poly());
    let s = sup_abs_upper(&d, lo, hi);
    let w = if s > 0.0 { (cap / s).min(1.0) * rng.gen_range(0.5..1.0) } else { 0.0 };
    PolyCurve::from_poly(f.poly().add(&d.scale(w)), f.domain())
}

fn taylor_remainder(g: &PolyCurve, a: f64, k: usize) -> Result<PolyCurve> {
    let shifted = g.poly().taylor_at(a);
    let mut c = shifted.coeffs().to_vec();
    for v in c.iter_mut().take(k) {
        *v = 0.0;
    }
    PolyCurve::from_poly(Poly::new(c).compose_affine(-a, 1.0), g.domain())
}

fn normalized(f: PolyCurve, k: usize) -> Result<PolyCurve> {
    let nrm = ck_norm(&f, k)?.upper;
    Ok(if nrm > 1.0 - 1e-9 { f.scale((1.0 - 1e-9) / nrm) } else { f })
}

/// Runs the randomized instance `index` of `lemma`.
pub fn random_instance(lemma: &str, seed: u64, index: usize) -> Result<LemmaReport> {
    let mut rng = instance_rng(seed, index);
    let rng = &mut rng;
    match lemma {
        "remez" => {
            let deg = rng.gen_range(1..=8);
            let p = Poly::new((0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let lo = rng.gen_range(-1.0..0.5);
            let hi = lo + rng.gen_range(0.05..1.0);
            let mut cuts: Vec<f64> = (0..6).map(|_| rng.gen_range(lo..hi)).collect();
            cuts.sort_by(|a, b| a.total_cmp(b));
            let e: Vec<(f64, f64)> = cuts.chunks(2).map(|w| (w[0], w[1])).collect();
            remez_check(&p, (lo, hi), &e)
        }
        "polya" => {
            let deg = rng.gen_range(1..=6);
            let mut c: Vec<f64> = (0..deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
            c.push(1.0);
            let lambda = 2f64.powi(rng.gen_range(-8..=3));
            polya_check(&Poly::new(c), lambda)
        }
        "derivative_bound" => {
            let k = rng.gen_range(1..=3);
            let g = unit_poly(rng, k)?;
            let a = rng.gen_range(0.0..0.9);
            let center = a + rng.gen_range(0.0..0.1);
            let f = normalized(taylor_remainder(&g, center, k)?, k)?;
            let len = (1.0 - a) * rng.gen_range(0.001f64..1.0).powi(2);
            let s = sup_abs_mid(f.poly(), a, a + len);
            let delta = s.max(len.powi(k as i32));
            derivative_bound_check(&f, delta, (a, a + len), k)
        }
        "long_rect" => {
            let k = rng.gen_range(2..=3);
            let g = unit_poly(rng, k)?;
            let a = rng.gen_range(0.0..0.9);
            let f = normalized(taylor_remainder(&g, a, k - 1)?, k)?;
            let len = (1.0 - a) * rng.gen_range(0.01f64..1.0).powi(2);
            let mut delta = sup_abs_mid(f.poly(), a, a + len);
            if delta == 0.0 {
                delta = len.powi(k as i32 - 1);
            }
            let mut t = len.powi(k as i32 - 1) / delta;
            if t < 1.0 {
                delta = len.powi(k as i32 - 1);
                t = 1.0;
            }
            long_rect_check(&f, delta, t, a, k)
        }
        "pigeonhole" => {
            let k = rng.gen_range(1..=3);
            let big_a = 4.0;
            let delta = 2f64.powi(-rng.gen_range(4..=10));
            let len = delta.powf(1.0 / k as f64);
            let a = rng.gen_range(0.0..(1.0 - len).max(1e-12));
            let n = rng.gen_range(16..=64);
            let mut curves = Vec::with_capacity(n);
            for _ in 0..n {
                let off = rng.gen_range(0.0..0.8 * big_a * delta);
                let deg = rng.gen_range(1..=k + 1);
                let shape = Poly::new((0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect());
                // shape(x) on x in [0, 1] mapped onto I, sup <= 0.05 A δ
                let s = sup_abs_upper(&shape, 0.0, 1.0).max(1e-300);
                let p = shape.compose_affine(-a / len, 1.0 / len).scale(0.05 * big_a * delta / s);
                let f = PolyCurve::from_poly(p.add(&Poly::constant(off)), (0.0, 1.0))?;
                curves.push(f);
            }
            let nrm = curves.iter().map(|f| ck_norm(f, k).map(|b| b.upper)).collect::<Result<Vec<_>>>()?;
            let mx = nrm.iter().copied().fold(0.0, f64::max);
            if mx > 1.0 - 1e-9 {
                curves = curves.iter().map(|f| f.scale((1.0 - 1e-9) / mx)).collect();
            }
            pigeonhole_rect_check(&curves, a, delta, big_a, k).map(|r| r.0)
        }
        "gronwall" => gronwall_instance(rng).map(|r| r.report),
        "cinematic_norm" => {
            let k = rng.gen_range(2..=3);
            let u: Vec<f64> = (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let scale = 10f64.powf(-rng.gen_range(0.0..4.0));
            let v: Vec<f64> = u.iter().map(|x| x + scale * rng.gen_range(-1.0..1.0)).collect();
            let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            let f = normalized(PolyCurve::new(d)?, k)?;
            let jl = rng.gen_range(0.0..0.95);
            let jh = jl + (1.0 - jl) * rng.gen_range(0.01f64..1.0).powi(2);
            let delta = sup_abs_mid(f.poly(), jl, jh);
            let norm = ck_norm(&f, k)?.upper;
            let inf = inf_jet_sum(&f, k, 0.0, 1.0).0;
            if inf <= 0.0 || delta <= 0.0 {
                return Err(precondition("degenerate draw".into()));
            }
            let kk = (norm / inf * (1.0 + 1e-9)).max(1.0);
            cinematic_norm_check(&f, (jl, jh), kk, k, delta)
        }
        "ck_rescaling" | "prism_vs_rect" => {
            let k = 1 + index % 3;
            let rho = 2f64.powi(-rng.gen_range(1..=12));
            let len = rho.powf(1.0 / k as f64);
            let a = rng.gen_range(0.0..=(1.0 - len).max(0.0));
            let g = unit_poly(rng, k)?;
            let h = unit_poly(rng, k)?;
            let f = pull_toward(rng, &g, &h, a, a + len, rho)?;
            let s = TangencyRect::new(g, a, rho, 1.0, k)?;
            let kc = default_prism_const(k);
            if lemma == "ck_rescaling" {
                let r = rescale_fn(&s, &f, kc)?;
                Ok(LemmaReport::new(
                    "ck_rescaling",
                    format!("k {k}, ρ = {rho:e}, a = {a}"),
                    r.norm_upper,
                    1.0 + NORM_SLACK,
                    kc,
                ))
            } else {
                prism_vs_rect_check(&f, &s, kc)
            }
        }
        "tangency_implies_cover" => {
            let k = 1 + index % 3;
            let rho = 2f64.powi(-rng.gen_range(1..=10));
            let delta = rho * 2f64.powi(-(k as i32) - rng.gen_range(0..=4));
            let (ls, lr) = (rho.powf(1.0 / k as f64), delta.powf(1.0 / k as f64));
            let a = rng.gen_range(0.0..=(1.0 - ls).max(0.0));
            let ar = a + rng.gen_range(0.0..=1.0) * (ls - lr);
            let g = unit_poly(rng, k)?;
            let h = unit_poly(rng, k)?;
            let f = pull_toward(rng, &g, &h, a, a + ls, 0.5 * rho)?;
            let h2 = unit_poly(rng, k)?;
            let base_r = pull_toward(rng, &f, &h2, ar, ar + lr, delta)?;
            let s = TangencyRect::new(g, a, rho, 1.0, k)?;
            let r = TangencyRect::new(base_r, ar, delta, 1.0, k)?;
            cover_ratio_check(&s, &r, &f, default_prism_const(k))
        }
        other => Err(Error::Unsupported(format!("no randomized generator for `{other}`"))),
    }
}

/// `J_{k-1} f` inside the prism of `R` over `I(R)`. Reports
/// `max_j sup |f^{(j)} - P_j| / δ^{1-j/k}` against the prism constant.
pub fn prism_vs_rect_check(f: &PolyCurve, r: &TangencyRect, kc: f64) -> Result<LemmaReport> {
    let k = r.k();
    if ck_norm(f, k)?.upper > 1.0 + NORM_SLACK {
        return Err(precondition("f has C^k norm above 1".into()));
    }
    let t = crate::rect::is_tangent(f, r)?;
    if !t.tangent {
        return Err(precondition(format!("f is not tangent to R (sup {})", t.sup)));
    }
    let p = prism_of(r, kc)?;
    let (lo, hi) = p.t_interval();
    let mut worst = 0.0f64;
    for j in 0..k {
        let d = f.deriv(j).sub(&p.center(j));
        let s = sup_abs_upper(&d, lo, hi);
        worst = worst.max(s / r.delta().powf(1.0 - j as f64 / k as f64));
    }
    Ok(LemmaReport::new("prism_vs_rect", format!("k {k}, δ = {:e}, a = {}", r.delta(), r.anchor()), worst, kc, kc))
}

/// `R̂ ⊆ Ŝ` given `sup_{I(S)} |f - g_S| <= ρ/2`, `f ∼ R`, `I(R) ⊆ I(S)`
/// and `ρ >= 2^k δ`. Reports `max_j (sup |P^R_j - P^S_j| + K δ^{1-j/k}) /
/// (K ρ^{1-j/k})` against 1.
pub fn cover_ratio_check(s: &TangencyRect, r: &TangencyRect, f: &PolyCurve, kc: f64) -> Result<LemmaReport> {
    let k = s.k();
    let (rho, delta) = (s.delta(), r.delta());
    if r.k() != k || !(delta < rho) || rho < 2f64.powi(k as i32) * delta * (1.0 - LEMMA_SLACK) || rho > 1.0 {
        return Err(precondition("need 0 < δ < ρ <= 1 with ρ >= 2^k δ".into()));
    }
    let ((sl, sh), (rl, rh)) = (s.interval(), r.interval());
    if rl < sl || rh > sh * (1.0 + 1e-15) {
        return Err(precondition("I(R) is not inside I(S)".into()));
    }
    let dev = sup_abs_mid(&f.poly().sub(s.base().poly()), sl, sh);
    if !le_slack(dev, 0.5 * rho) {
        return Err(precondition(format!("sup_I |f - g| = {dev} > ρ/2")));
    }
    if !crate::rect::is_tangent(f, r)?.tangent {
        return Err(precondition("f is not tangent to R".into()));
    }
    for (name, c) in [("f", f), ("g", s.base()), ("h", r.base())] {
        if ck_norm(c, k)?.upper > 1.0 + NORM_SLACK {
            return Err(precondition(format!("{name} has C^k norm above 1")));
        }
    }
    let (ps, pr) = (prism_of(s, kc)?, prism_of(r, kc)?);
    let mut worst = 0.0f64;
    for j in 0..k {
        let d = pr.center(j).sub(&ps.center(j));
        let sup = sup_abs_upper(&d, rl, rh);
        worst = worst.max((sup + pr.radius(j)) / ps.radius(j));
    }
    Ok(LemmaReport::new(
        "tangency_implies_cover",
        format!("k {k}, ρ = {rho:e}, δ = {delta:e}"),
        worst,
        1.0,
        kc,
    ))
}

/// Random Gronwall instance: a linear field `x'' = a0 x + a1 x' + b` on an
/// interval of length at most 1/2, with two Taylor polynomials of exact
/// solutions as near-solutions. `ρ` is the measured hypothesis maximum.
pub fn gronwall_instance(rng: &mut ChaCha8Rng) -> Result<GronwallReport> {
    let (a0, a1, b): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let l = (a0 * a0 + a1 * a1).sqrt().max(1.0);
    let lo = rng.gen_range(0.0..0.5);
    let hi = lo + rng.gen_range(0.05..0.5);
    let c = 0.5 * (lo + hi);
    let taylor = |x0: f64, x1: f64, deg: usize| -> Poly {
        let mut d = vec![x0, x1];
        d.push(a0 * x0 + a1 * x1 + b);
        while d.len() <= deg {
            let m = d.len();
            d.push(a0 * d[m - 2] + a1 * d[m - 1]);
        }
        let mut coef = Vec::with_capacity(deg + 1);
        let mut fact = 1.0;
        for (i, v) in d.iter().take(deg + 1).enumerate() {
            if i > 0 {
                fact *= i as f64;
            }
            coef.push(v / fact);
        }
        Poly::new(coef).compose_affine(-c, 1.0)
    };
    let (x0, x1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let eps = 10f64.powf(-rng.gen_range(1.0..6.0));
    let (y0, y1) = (x0 + eps * rng.gen_range(-1.0..1.0), x1 + eps * rng.gen_range(-1.0..1.0));
    let pf = PolyCurve::from_poly(taylor(x0, x1, rng.gen_range(3..=8)), (lo, hi))?;
    let pg = PolyCurve::from_poly(taylor(y0, y1, rng.gen_range(3..=8)), (lo, hi))?;
    let field = move |_t: f64, x: &[f64]| a0 * x[0] + a1 * x[1] + b;
    let fj = |t: f64, i: usize| pf.eval_deriv(i, t);
    let gj = |t: f64, i: usize| pg.eval_deriv(i, t);
    let grid = 400;
    let ts: Vec<f64> = (0..=grid).map(|j| lo + (hi - lo) * j as f64 / grid as f64).collect();
    let res = |p: &PolyCurve| {
        ts.iter()
            .map(|&t| (p.eval_deriv(2, t) - field(t, &[p.eval(t), p.eval_deriv(1, t)])).abs())
            .fold(0.0, f64::max)
    };
    let gap = ts
        .iter()
        .map(|&t| (0..=2).map(|d| (pf.eval_deriv(d, t) - pg.eval_deriv(d, t)).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    let rho = res(&pf).max(res(&pg)).max(gap).max(1e-12);
    gronwall_closeness(&fj, &gj, &field, l, rho, (lo, hi), 2, grid)
}

/// Runs `n` randomized instances of `lemma` in parallel.
pub fn run_suite(lemma: &str, n: usize, seed: u64) -> Result<SuiteReport> {
    if !LEMMAS.contains(&lemma) {
        return Err(Error::Unsupported(format!("unknown lemma `{lemma}`")));
    }
    let cases: Vec<CaseRecord> = (0..n).into_par_iter().map(|i| case_record(lemma, seed, i)).collect();
    Ok(collect_suite(lemma, seed, cases))
}

pub fn case_record(lemma: &str, seed: u64, index: usize) -> CaseRecord {
    let repro = Some(repro_command(lemma, seed, index));
    match random_instance(lemma, seed, index) {
        Ok(r) => CaseRecord {
            index,
            status: if r.pass { CaseStatus::Pass } else { CaseStatus::Fail },
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            instance: r.instance,
            message: None,
            repro: if r.pass { None } else { repro },
        },
        Err(e) => CaseRecord {
            index,
            status: if matches!(e, Error::Precondition(_)) { CaseStatus::Precondition } else { CaseStatus::Error },
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            instance: String::new(),
            message: Some(e.to_string()),
            repro,
        },
    }
}

pub fn collect_suite(lemma: &str, seed: u64, cases: Vec<CaseRecord>) -> SuiteReport {
    let count = |s: CaseStatus| cases.iter().filter(|c| c.status == s).count();
    let min_margin = cases
        .iter()
        .filter(|c| c.status == CaseStatus::Pass || c.status == CaseStatus::Fail)
        .map(|c| c.margin)
        .fold(f64::INFINITY, f64::min);
    SuiteReport {
        lemma: lemma.to_string(),
        seed,
        n: cases.len(),
        passed: count(CaseStatus::Pass),
        failed: count(CaseStatus::Fail),
        preconditions: count(CaseStatus::Precondition),
        errors: count(CaseStatus::Error),
        min_margin,
        cases,
    }
}

fn xml_escape(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => o.push_str("&amp;"),
            '<' => o.push_str("&lt;"),
            '>' => o.push_str("&gt;"),
            '"' => o.push_str("&quot;"),
            '\'' => o.push_str("&apos;"),
            c => o.push(c),
        }
    }
    o
}

/// JUnit-style XML, one `testsuite` per lemma and one `testcase` per
/// instance. Failures embed the reproduction command.
pub fn suites_to_junit(suites: &[SuiteReport]) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let tests: usize = suites.iter().map(|x| x.n).sum();
    let failures: usize = suites.iter().map(|x| x.failed).sum();
    let errors: usize = suites.iter().map(|x| x.errors + x.preconditions).sum();
    let _ = writeln!(s, "<testsuites name=\"lemmas\" tests=\"{tests}\" failures=\"{failures}\" errors=\"{errors}\">");
    for su in suites {
        let _ = writeln!(
            s,
            "  <testsuite name=\"{}\" tests=\"{}\" failures=\"{}\" errors=\"{}\">",
            xml_escape(&su.lemma),
            su.n,
            su.failed,
            su.errors + su.preconditions
        );
        for c in &su.cases {
            let name = format!("{}#{}", su.lemma, c.index);
            let _ = write!(s, "    <testcase classname=\"{}\" name=\"{}\"", xml_escape(&su.lemma), xml_escape(&name));
            let repro = c.repro.as_deref().unwrap_or("");
            match c.status {
                CaseStatus::Pass => s.push_str("/>\n"),
                CaseStatus::Fail => {
                    let _ = writeln!(
                        s,
                        ">\n      <failure message=\"lhs {} > rhs {}\">{}\nrepro: {}</failure>\n    </testcase>",
                        c.lhs,
                        c.rhs,
                        xml_escape(&c.instance),
                        xml_escape(repro)
                    );
                }
                CaseStatus::Precondition | CaseStatus::Error => {
                    let kind = if c.status == CaseStatus::Precondition { "precondition" } else { "error" };
                    let _ = writeln!(
                        s,
                        ">\n      <error type=\"{kind}\" message=\"{}\">repro: {}</error>\n    </testcase>",
                        xml_escape(c.message.as_deref().unwrap_or("")),
                        xml_escape(repro)
                    );
                }
            }
        }
        s.push_str("  </testsuite>\n");
    }
    s.push_str("</testsuites>\n");
    s
}

pub fn suites_to_json(suites: &[SuiteReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(suites)?)
}

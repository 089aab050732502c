//! Curve/rectangle incidences, robust broadness certificates, incomparable
//! selection and the rectangle-count experiment, plus the combinatorial
//! subroutines used along the way (random refinement, degree peeling,
//! two-ends interval selection).

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{ck_norm, CurveFamily, PolyCurve, NORM_SLACK};
use crate::error::{Error, Result};
use crate::rect::{comparable, grid_anchors, is_tangent, nearest_grid_rect, TangencyRect};

/// Edge cap for incidence construction.
pub const MAX_EDGES: usize = 100_000_000;

/// Bipartite tangency graph between curves (left) and rectangles (right).
/// Vertex universes are fixed; refinement removes edges only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceGraph {
    pub n_left: usize,
    pub n_right: usize,
    /// Sorted by `(right, left)`.
    pub edges: Vec<(usize, usize)>,
}

impl IncidenceGraph {
    pub fn new(n_left: usize, n_right: usize, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_by_key(|&(l, r)| (r, l));
        edges.dedup();
        IncidenceGraph { n_left, n_right, edges }
    }

    pub fn left_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_left];
        for &(l, _) in &self.edges {
            d[l] += 1;
        }
        d
    }

    pub fn right_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_right];
        for &(_, r) in &self.edges {
            d[r] += 1;
        }
        d
    }

    /// Witness sets `F(R)` for every rectangle.
    pub fn witnesses(&self) -> Vec<Vec<usize>> {
        let mut w = vec![Vec::new(); self.n_right];
        for &(l, r) in &self.edges {
            w[r].push(l);
        }
        w
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["curve", "rect"])?;
        for &(l, r) in &self.edges {
            out.write_record([l.to_string(), r.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Exact tangency edges. Curves whose value at the anchor is more than
/// `δ + 2|I|` from the base are skipped: both have slope at most one.
pub fn build_incidences(curves: &[PolyCurve], rects: &[TangencyRect]) -> Result<IncidenceGraph> {
    let mut by_anchor: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in rects.iter().enumerate() {
        by_anchor.entry(r.anchor().to_bits()).or_default().push(i);
    }
    let groups: Vec<(f64, Vec<usize>)> = by_anchor.into_iter().map(|(a, v)| (f64::from_bits(a), v)).collect();
    let per_group: Vec<Result<Vec<(usize, usize)>>> = groups
        .par_iter()
        .map(|(a, idx)| {
            let mut vals: Vec<(f64, usize)> = curves.iter().enumerate().map(|(i, f)| (f.eval(*a), i)).collect();
            vals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            let mut edges = Vec::new();
            for &ri in idx {
                let r = &rects[ri];
                let g = r.base().eval(*a);
                let slack = r.delta() + 2.0 * r.len() + 1e-12;
                let lo = vals.partition_point(|v| v.0 < g - slack);
                let hi = vals.partition_point(|v| v.0 <= g + slack);
                for &(_, ci) in &vals[lo..hi] {
                    if is_tangent(&curves[ci], r)?.tangent {
                        edges.push((ci, ri));
                    }
                }
            }
            Ok(edges)
        })
        .collect();
    let mut edges = Vec::new();
    for e in per_group {
        edges.extend(e?);
        if edges.len() > MAX_EDGES {
            return Err(Error::ResourceCap(format!("more than {MAX_EDGES} incidences")));
        }
    }
    Ok(IncidenceGraph::new(curves.len(), rects.len(), edges))
}

/// Reference double loop for [`build_incidences`].
pub fn build_incidences_naive(curves: &[PolyCurve], rects: &[TangencyRect]) -> Result<IncidenceGraph> {
    let mut edges = Vec::new();
    for (ri, r) in rects.iter().enumerate() {
        for (ci, f) in curves.iter().enumerate() {
            if is_tangent(f, r)?.tangent {
                edges.push((ci, ri));
            }
        }
    }
    Ok(IncidenceGraph::new(curves.len(), rects.len(), edges))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadnessCertificate {
    pub rect_id: usize,
    pub mu: usize,
    pub eps: f64,
    pub b: f64,
    /// Number of `(ρ, T)` lattice points checked.
    pub lattice_points: usize,
    pub max_ratio: f64,
    /// `(ρ, T, J)` where the worst ratio occurred.
    pub worst: Option<(f64, f64, (f64, f64))>,
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadnessOptions {
    /// Lattice subdivisions per factor of two in `ρ` and `T`.
    pub refine: u32,
}

impl Default for BroadnessOptions {
    fn default() -> Self {
        BroadnessOptions { refine: 1 }
    }
}

fn geometric(start: f64, end: f64, refine: u32) -> Vec<f64> {
    let step = 2f64.powf(1.0 / refine as f64);
    let mut v = Vec::new();
    let mut i = 0;
    loop {
        let x = start * step.powi(i);
        if x > end * (1.0 + 1e-12) {
            break;
        }
        v.push(x.min(end));
        i += 1;
    }
    v
}

fn placements(i: (f64, f64), len: f64) -> Vec<(f64, f64)> {
    if len >= 1.0 {
        return vec![(0.0, 1.0)];
    }
    let fit = |lo: f64| {
        let lo = lo.max(0.0).min(1.0 - len);
        (lo, lo + len)
    };
    let mid = 0.5 * (i.0 + i.1);
    let mut v = vec![fit(i.0), fit(mid - 0.5 * len), fit(i.1 - len)];
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v.dedup();
    v
}

/// Checks `#{f in F(R): f ∼ R'} <= B T^{-ε} #F(R)` over dyadic `ρ` and `T`,
/// with `R'` the vertical `2ρ` neighborhood of a member of `F(R)` above an
/// interval `J ⊇ I(R)` of length `(Tρ)^{1/k}` (left-, center- and
/// right-aligned, clipped to `[0, 1]`). Any `(ρ;k;T)` rectangle containing
/// two tangent curves puts them within `2ρ` of each other, so these counts
/// dominate the true ones.
pub fn broadness_check(
    rect_id: usize,
    r: &TangencyRect,
    fr: &[PolyCurve],
    eps: f64,
    b: f64,
    opts: BroadnessOptions,
) -> BroadnessCertificate {
    let delta = r.delta();
    let k = r.k() as f64;
    let n = fr.len();
    let mut lattice = Vec::new();
    for rho in geometric(delta, 1.0, opts.refine) {
        for t in geometric(1.0, 1.0 / rho, opts.refine) {
            lattice.push((rho, t));
        }
    }
    // group lattice points by interval length so each J is processed once
    let mut by_len: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for &(rho, t) in &lattice {
        let len = (t * rho).powf(1.0 / k).min(1.0);
        by_len.entry(len.to_bits()).or_default().push((rho, t));
    }
    let mut max_ratio: f64 = 0.0;
    let mut worst = None;
    for (len_bits, pts) in by_len {
        let len = f64::from_bits(len_bits);
        for j in placements(r.interval(), len) {
            let mut sup = vec![0.0; n * n];
            for a in 0..n {
                for c in a + 1..n {
                    let d = fr[a].poly().sub(fr[c].poly());
                    let s = if d.is_zero() { 0.0 } else { d.sup_abs(j.0, j.1).lower };
                    sup[a * n + c] = s;
                    sup[c * n + a] = s;
                }
            }
            for &(rho, t) in &pts {
                let cap = b * t.powf(-eps) * n as f64;
                let best = (0..n)
                    .map(|a| (0..n).filter(|&c| sup[a * n + c] <= 2.0 * rho).count())
                    .max()
                    .unwrap_or(0);
                let ratio = best as f64 / cap;
                if ratio > max_ratio {
                    max_ratio = ratio;
                    worst = Some((rho, t, j));
                }
            }
        }
    }
    BroadnessCertificate {
        rect_id,
        mu: n,
        eps,
        b,
        lattice_points: lattice.len(),
        max_ratio,
        worst,
        valid: n > 0 && max_ratio <= 1.0,
    }
}

/// Greedy maximal pairwise-incomparable subset, scanning `order`.
/// Only rectangles whose anchors lie within one cover length can be
/// comparable, so candidates are bucketed by anchor.
pub fn select_incomparable(rects: &[TangencyRect], order: &[usize]) -> Result<Vec<usize>> {
    let mut kept: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut out = Vec::new();
    for &i in order {
        let r = &rects[i];
        let reach = (r.t_param() * 2f64.powi(r.k() as i32) * r.delta()).powf(1.0 / r.k() as f64);
        let lo = (r.anchor() - reach).max(0.0);
        let hi = r.anchor() + reach;
        let mut clash = false;
        'scan: for (_, idx) in kept.range(lo.to_bits()..=hi.to_bits()) {
            for &j in idx {
                if comparable(r, &rects[j])? {
                    clash = true;
                    break 'scan;
                }
            }
        }
        if !clash {
            kept.entry(r.anchor().max(0.0).to_bits()).or_default().push(i);
            out.push(i);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectBoundOptions {
    pub broadness: BroadnessOptions,
    /// Cap on candidate rectangles.
    pub max_candidates: usize,
}

impl Default for RectBoundOptions {
    fn default() -> Self {
        RectBoundOptions { broadness: BroadnessOptions::default(), max_candidates: 2_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeStats {
    pub certificates: usize,
    pub valid: usize,
    pub lattice_points: usize,
    pub max_ratio_valid: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectBoundReport {
    pub n_curves: usize,
    pub delta: f64,
    pub k: usize,
    pub eps: f64,
    pub eta: f64,
    pub mu: usize,
    pub candidates: usize,
    pub edges: usize,
    pub rich: usize,
    pub broad: usize,
    pub observed: usize,
    pub bound: f64,
    pub pass: bool,
    pub lattice_stats: LatticeStats,
}

/// Rectangle-count experiment. Candidates are the grid rectangles nearest
/// each curve at each anchor (the full grid is far too large); tangency
/// edges are exact, richness uses the full witness set and broadness the
/// certificate above with `B = δ^{-η}`.
pub fn verify_rect_bound(
    fam: &CurveFamily,
    delta: f64,
    eps: f64,
    eta: f64,
    mu: usize,
    opts: &RectBoundOptions,
) -> Result<RectBoundReport> {
    let k = fam.k;
    // fixed-degree families are admissible once δ is small; ⌈1/η⌉ stands in
    // for that threshold so moment curves pass at experimental scales
    let max_deg = delta.powf(-eta).max((1.0 / eta).ceil());
    for (i, f) in fam.curves.iter().enumerate() {
        if f.degree() as f64 > max_deg {
            return Err(Error::Precondition(format!("curve {i} has degree {} > max(δ^-η, ⌈1/η⌉)", f.degree())));
        }
        if ck_norm(f, k)?.upper > 1.0 + NORM_SLACK {
            return Err(Error::Precondition(format!("curve {i} has norm above 1")));
        }
    }
    let bound = delta.powf(-eps) * (fam.len() as f64 / mu as f64).powf((k as f64 + 1.0) / k as f64);
    let empty = |candidates, edges| RectBoundReport {
        n_curves: fam.len(),
        delta,
        k,
        eps,
        eta,
        mu,
        candidates,
        edges,
        rich: 0,
        broad: 0,
        observed: 0,
        bound,
        pass: true,
        lattice_stats: LatticeStats { certificates: 0, valid: 0, lattice_points: 0, max_ratio_valid: 0.0 },
    };
    if fam.is_empty() {
        return Ok(empty(0, 0));
    }
    let anchors = grid_anchors(delta, k);
    if anchors.len() * fam.len() > opts.max_candidates {
        return Err(Error::ResourceCap(format!(
            "{} candidate rectangles exceed cap {}",
            anchors.len() * fam.len(),
            opts.max_candidates
        )));
    }
    let seeded: Vec<Vec<TangencyRect>> = fam
        .curves
        .par_iter()
        .map(|f| anchors.iter().filter_map(|&a| nearest_grid_rect(f, a, delta, k)).collect())
        .collect();
    let mut seen = HashSet::new();
    let mut rects = Vec::new();
    for r in seeded.into_iter().flatten() {
        let key: Vec<u64> = std::iter::once(r.anchor().to_bits())
            .chain(r.base().coeffs().iter().map(|c| c.to_bits()))
            .collect();
        if seen.insert(key) {
            rects.push(r);
        }
    }
    rects.sort_by(|a, b| {
        a.anchor()
            .partial_cmp(&b.anchor())
            .unwrap()
            .then_with(|| a.base().coeffs().partial_cmp(b.base().coeffs()).unwrap())
    });
    let graph = build_incidences(&fam.curves, &rects)?;
    let wit = graph.witnesses();
    let rich: Vec<usize> = (0..rects.len()).filter(|&i| wit[i].len() >= mu).collect();
    let b = delta.powf(-eta);
    let certs: Vec<BroadnessCertificate> = rich
        .par_iter()
        .map(|&i| {
            let fr: Vec<PolyCurve> = wit[i].iter().map(|&c| fam.curves[c].clone()).collect();
            broadness_check(i, &rects[i], &fr, eps, b, opts.broadness)
        })
        .collect();
    let mut broad: Vec<(usize, usize)> = certs.iter().filter(|c| c.valid).map(|c| (c.rect_id, c.mu)).collect();
    broad.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let order: Vec<usize> = broad.iter().map(|x| x.0).collect();
    let chosen = select_incomparable(&rects, &order)?;
    let stats = LatticeStats {
        certificates: certs.len(),
        valid: broad.len(),
        lattice_points: certs.iter().map(|c| c.lattice_points).sum(),
        max_ratio_valid: certs.iter().filter(|c| c.valid).map(|c| c.max_ratio).fold(0.0, f64::max),
    };
    let observed = chosen.len();
    Ok(RectBoundReport {
        candidates: rects.len(),
        edges: graph.edges.len(),
        rich: rich.len(),
        broad: broad.len(),
        observed,
        pass: observed as f64 <= bound,
        lattice_stats: stats,
        ..empty(rects.len(), graph.edges.len())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub n: usize,
    pub p: f64,
    pub a: f64,
    pub reps: usize,
    /// Empirical `P(X <= pn/2)` and its bound `e^{-pn/8}`.
    pub freq_low: f64,
    pub bound_low: f64,
    /// Empirical `P(X >= A pn)` and its bound `e^{-A pn/6}`.
    pub freq_high: f64,
    pub bound_high: f64,
}

fn bernoulli_count(n: usize, p: f64, rng: &mut ChaCha8Rng) -> usize {
    (0..n).filter(|_| rng.gen::<f64>() < p).count()
}

/// Keeps each curve independently with probability `p` and reports the
/// Chernoff tail frequencies over `reps` further draws.
pub fn random_refine(
    fam: &CurveFamily,
    p: f64,
    a: f64,
    reps: usize,
    seed: u64,
) -> Result<(CurveFamily, ChernoffReport)> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Precondition(format!("p = {p} must lie in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<PolyCurve> = fam.curves.iter().filter(|_| rng.gen::<f64>() < p).cloned().collect();
    let mut out = CurveFamily::new(kept, fam.k, format!("{} | refined p={p}", fam.provenance))?;
    out.rescale = fam.rescale;
    let report = chernoff_tails(fam.len(), p, a, reps, seed);
    Ok((out, report))
}

pub fn chernoff_tails(n: usize, p: f64, a: f64, reps: usize, seed: u64) -> ChernoffReport {
    let counts: Vec<usize> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            bernoulli_count(n, p, &mut rng)
        })
        .collect();
    let pn = p * n as f64;
    let low = counts.iter().filter(|&&x| (x as f64) <= pn / 2.0).count();
    let high = counts.iter().filter(|&&x| (x as f64) >= a * pn).count();
    let denom = reps.max(1) as f64;
    ChernoffReport {
        n,
        p,
        a,
        reps,
        freq_low: low as f64 / denom,
        bound_low: (-pn / 8.0).exp(),
        freq_high: high as f64 / denom,
        bound_high: (-a * pn / 6.0).exp(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub edges_before: usize,
    pub edges_after: usize,
    pub left_threshold: f64,
    pub right_threshold: f64,
    pub rounds: usize,
}

/// Repeatedly deletes left vertices of degree `< #E/(4 n_left)` and right
/// vertices of degree `< #E/(4 n_right)`, thresholds fixed from the input,
/// until no vertex of positive degree is below threshold.
pub fn graph_refine(g: &IncidenceGraph) -> Result<(IncidenceGraph, RefineReport)> {
    if g.edges.is_empty() {
        return Err(Error::Precondition("graph has no edges".into()));
    }
    let e0 = g.edges.len() as f64;
    let tl = e0 / (4.0 * g.n_left as f64);
    let tr = e0 / (4.0 * g.n_right as f64);
    let mut edges = g.edges.clone();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let cur = IncidenceGraph { n_left: g.n_left, n_right: g.n_right, edges: edges.clone() };
        let dl = cur.left_degrees();
        let dr = cur.right_degrees();
        let before = edges.len();
        edges.retain(|&(l, r)| (dl[l] as f64) >= tl && (dr[r] as f64) >= tr);
        if edges.len() == before {
            break;
        }
    }
    let out = IncidenceGraph::new(g.n_left, g.n_right, edges);
    if (out.edges.len() as f64) < e0 / 2.0 {
        return Err(Error::Numerical(format!(
            "refinement kept {} of {} edges, below half",
            out.edges.len(),
            g.edges.len()
        )));
    }
    let rep = RefineReport {
        edges_before: g.edges.len(),
        edges_after: out.edges.len(),
        left_threshold: tl,
        right_threshold: tr,
        rounds,
    };
    Ok((out, rep))
}

/// Dyadic `J ⊆ [0,1]` with `|J| >= δ^{1/k}` maximizing
/// `|J|^{-ε₁} #{R : I(R) ⊆ J}`; ties go to the leftmost, then shortest.
pub fn two_ends_interval(f: &PolyCurve, rects: &[TangencyRect], eps1: f64) -> Result<(f64, f64)> {
    let first = rects.first().ok_or_else(|| Error::Precondition("no rectangles".into()))?;
    if !(eps1 > 0.0) {
        return Err(Error::Precondition("ε₁ must be positive".into()));
    }
    for r in rects {
        if !is_tangent(f, r)?.tangent {
            return Err(Error::Precondition("rectangle not tangent to f".into()));
        }
    }
    let min_len = first.delta().powf(1.0 / first.k() as f64);
    let mut best: Option<(f64, f64, f64)> = None; // (value, lo, len)
    let mut level = 0;
    loop {
        let len = 0.5f64.powi(level);
        if len < min_len * (1.0 - 1e-12) {
            break;
        }
        let n = 1usize << level;
        for i in 0..n {
            let lo = i as f64 * len;
            let hi = lo + len;
            let count = rects
                .iter()
                .filter(|r| {
                    let (a, b) = r.interval();
                    a >= lo - 1e-12 && b <= hi + 1e-12
                })
                .count();
            let v = len.powf(-eps1) * count as f64;
            let better = match best {
                None => true,
                Some((bv, blo, blen)) => {
                    let tol = 1e-12 * bv.abs().max(1e-300);
                    v > bv + tol || ((v - bv).abs() <= tol && (lo < blo || (lo == blo && len < blen)))
                }
            };
            if better {
                best = Some((v, lo, len));
            }
        }
        level += 1;
    }
    let (_, lo, len) = best.expect("at least the unit interval");
    Ok((lo, lo + len))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_is_stable() {
        let g = IncidenceGraph::new(1, 4, (0..4).map(|r| (0, r)).collect());
        let (h, _) = graph_refine(&g).unwrap();
        assert_eq!(h, g);
    }

    #[test]
    fn p_one_keeps_all() {
        let fam = CurveFamily::new(vec![PolyCurve::constant(0.1), PolyCurve::constant(0.2)], 1, "t").unwrap();
        let (kept, rep) = random_refine(&fam, 1.0, 2.0, 100, 3).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(rep.freq_low, 0.0);
        assert_eq!(rep.freq_high, 0.0);
    }
}

//! Covering numbers, (δ,α;C)-sets, Cantor-type generators, striped
//! shadings and discretized Furstenberg instances of curves.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveFamily, PolyCurve};
use crate::error::{Error, Result};
use crate::raster::{count_histogram, hist_lp_norm, rasterize, rasterize_with, Fit, Raster, Shading, Stripes};

/// Samples per derivative for the jet metric.
pub const JET_GRID: usize = 256;

/// Above this many points, ball centers come from a coarser net.
pub const MAX_EXACT_CENTERS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "kebab-case")]
pub enum PointSet {
    Line { x: Vec<f64> },
    Plane { p: Vec<[f64; 2]> },
    /// Each row holds `f^{(i)}` sampled on the jet grid for `i = 0..=k`.
    Jet { k: usize, samples: Vec<Vec<f64>> },
}

impl PointSet {
    /// Jet samples of curves on a uniform grid over `[0, 1]`. The grid sup
    /// underestimates the true sup of a degree `D` polynomial derivative
    /// by at most the factor `1 / (1 - D^2 π^2 / (8 (n-1)^2))`.
    pub fn jets(curves: &[PolyCurve], k: usize) -> Self {
        let grid: Vec<f64> = (0..JET_GRID).map(|i| i as f64 / (JET_GRID - 1) as f64).collect();
        let samples = curves
            .iter()
            .map(|f| {
                let mut row = Vec::with_capacity((k + 1) * JET_GRID);
                for i in 0..=k {
                    let d = f.deriv(i);
                    row.extend(grid.iter().map(|&t| d.eval(t)));
                }
                row
            })
            .collect();
        PointSet::Jet { k, samples }
    }

    pub fn len(&self) -> usize {
        match self {
            PointSet::Line { x } => x.len(),
            PointSet::Plane { p } => p.len(),
            PointSet::Jet { samples, .. } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match self {
            PointSet::Line { x } => (x[i] - x[j]).abs(),
            PointSet::Plane { p } => (p[i][0] - p[j][0]).hypot(p[i][1] - p[j][1]),
            PointSet::Jet { samples, .. } => {
                let (a, b) = (&samples[i], &samples[j]);
                a.chunks(JET_GRID)
                    .zip(b.chunks(JET_GRID))
                    .map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                    .sum()
            }
        }
    }

    /// A coordinate `c` with `|c(i) - c(j)| <= dist(i, j)`.
    fn key(&self, i: usize) -> f64 {
        match self {
            PointSet::Line { x } => x[i],
            PointSet::Plane { p } => p[i][0],
            PointSet::Jet { samples, .. } => samples[i][0],
        }
    }

    fn subset(&self, idx: &[usize]) -> PointSet {
        match self {
            PointSet::Line { x } => PointSet::Line { x: idx.iter().map(|&i| x[i]).collect() },
            PointSet::Plane { p } => PointSet::Plane { p: idx.iter().map(|&i| p[i]).collect() },
            PointSet::Jet { k, samples } => PointSet::Jet { k: *k, samples: idx.iter().map(|&i| samples[i].clone()).collect() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covering {
    /// Size of a greedy δ-net: an upper bound for the covering number.
    pub net: usize,
    /// Size of a greedy set with separation above 2δ: a lower bound.
    pub packing: usize,
}

/// Greedy net in input order; centers pairwise more than `sep` apart and
/// every point within `sep` of a center. Returns center indices.
pub fn greedy_net(ps: &PointSet, sep: f64) -> Vec<usize> {
    let mut centers: Vec<usize> = Vec::new();
    match ps {
        PointSet::Plane { p } => {
            let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            let cell = |q: [f64; 2]| ((q[0] / sep).floor() as i64, (q[1] / sep).floor() as i64);
            for (i, q) in p.iter().enumerate() {
                let (cx, cy) = cell(*q);
                let mut covered = false;
                'n: for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(v) = grid.get(&(cx + dx, cy + dy)) {
                            if v.iter().any(|&c| ps.dist(i, c) <= sep) {
                                covered = true;
                                break 'n;
                            }
                        }
                    }
                }
                if !covered {
                    grid.entry((cx, cy)).or_default().push(i);
                    centers.push(i);
                }
            }
        }
        _ => {
            let mut by_key: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
            let enc = |x: f64| {
                let b = x.to_bits();
                if x.is_sign_negative() { !b } else { b | (1 << 63) }
            };
            for i in 0..ps.len() {
                let k = ps.key(i);
                let covered = by_key
                    .range(enc(k - sep)..=enc(k + sep))
                    .any(|(_, v)| v.iter().any(|&c| ps.dist(i, c) <= sep));
                if !covered {
                    by_key.entry(enc(k)).or_default().push(i);
                    centers.push(i);
                }
            }
        }
    }
    centers
}

/// `δ`-covering number bounds. On the line the net is the optimal
/// interval cover.
pub fn covering_number(ps: &PointSet, delta: f64) -> Covering {
    if ps.is_empty() {
        return Covering { net: 0, packing: 0 };
    }
    let packing = greedy_net(ps, 2.0 * delta * (1.0 + 1e-12)).len();
    let net = match ps {
        PointSet::Line { x } => {
            let mut v = x.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut n = 0;
            let mut reach = f64::NEG_INFINITY;
            for &p in &v {
                if p > reach {
                    n += 1;
                    reach = p + 2.0 * delta;
                }
            }
            n
        }
        _ => greedy_net(ps, delta).len(),
    };
    Covering { net, packing }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaAlphaReport {
    pub holds: bool,
    /// Largest `𝓔_δ(E ∩ B) / (C (r/δ)^α)` seen.
    pub worst_ratio: f64,
    pub worst_r: f64,
    pub worst_center: usize,
}

/// Tests the covering inequality on dyadic radii `r = δ 2^j <= 1` (plus
/// `r = 1`) and balls centered at data points. With more than
/// [`MAX_EXACT_CENTERS`] points, centers are an `r/4`-net and balls are
/// inflated to `5r/4`, which only overcounts.
pub fn is_delta_alpha(ps: &PointSet, delta: f64, alpha: f64, c: f64) -> DeltaAlphaReport {
    let mut radii = Vec::new();
    let mut r = delta;
    while r < 1.0 {
        radii.push(r);
        r *= 2.0;
    }
    radii.push(1.0);
    let n = ps.len();
    let per_r: Vec<(f64, f64, usize)> = radii
        .par_iter()
        .map(|&r| {
            let (centers, radius) = if n > MAX_EXACT_CENTERS {
                (greedy_net(ps, r / 4.0), 1.25 * r)
            } else {
                ((0..n).collect(), r)
            };
            let cap = c * (r / delta).powf(alpha);
            let mut worst = (0.0, r, 0);
            let order: Vec<usize> = {
                let mut o: Vec<usize> = (0..n).collect();
                o.sort_by(|&a, &b| ps.key(a).partial_cmp(&ps.key(b)).unwrap().then(a.cmp(&b)));
                o
            };
            let keys: Vec<f64> = order.iter().map(|&i| ps.key(i)).collect();
            for &ci in &centers {
                let kc = ps.key(ci);
                let lo = keys.partition_point(|&x| x < kc - radius);
                let hi = keys.partition_point(|&x| x <= kc + radius);
                let mut inside: Vec<usize> = order[lo..hi].iter().copied().filter(|&j| ps.dist(ci, j) <= radius).collect();
                inside.sort_unstable();
                let cov = covering_number(&ps.subset(&inside), delta).net as f64;
                let ratio = cov / cap;
                if ratio > worst.0 {
                    worst = (ratio, r, ci);
                }
            }
            worst
        })
        .collect();
    let w = per_r.into_iter().fold((0.0, delta, 0), |a, b| if b.0 > a.0 { b } else { a });
    DeltaAlphaReport { holds: w.0 <= 1.0 + 1e-12, worst_ratio: w.0, worst_r: w.1, worst_center: w.2 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorSet {
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    /// Children per level.
    pub branching: Vec<usize>,
    /// Left endpoints of the level-`n` intervals, sorted.
    pub points: Vec<f64>,
    pub requested_delta: f64,
}

/// Self-similar set with `M` slots per level. Level `j` keeps `b_j`
/// evenly spread slots where `b_1 ⋯ b_j` tracks `M^{jα}`; each node
/// independently uses the pattern or its mirror image. `δ` is rounded to
/// the nearest `M^{-n}`, trying `M = 4` first.
pub fn cantor_generator(delta: f64, alpha: f64, seed: u64) -> Result<CantorSet> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition("need α in (0,1] and δ in (0,1)".into()));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for m in [4usize, 2, 3, 5, 6, 7, 8, 9, 10, 12, 16] {
        let n = ((1.0 / delta).ln() / (m as f64).ln()).round().max(1.0) as usize;
        let miss = ((m as f64).powi(-(n as i32)).ln() - delta.ln()).abs();
        if best.map_or(true, |b| miss < b.0 - 1e-12) {
            best = Some((miss, m, n));
        }
    }
    let (_, m, n) = best.unwrap();
    let mut set = cantor_with(m, n, alpha, seed)?;
    set.requested_delta = delta;
    Ok(set)
}

pub fn cantor_with(m: usize, n: usize, alpha: f64, seed: u64) -> Result<CantorSet> {
    if m < 2 || n == 0 || n > 40 {
        return Err(Error::Precondition("need M >= 2 and 1 <= n <= 40".into()));
    }
    let mut branching = Vec::with_capacity(n);
    let mut prod = 1.0;
    for j in 1..=n {
        let target = (m as f64).powf(j as f64 * alpha);
        let b = (target / prod).round().clamp(1.0, m as f64) as usize;
        prod *= b as f64;
        branching.push(b);
    }
    let total: f64 = branching.iter().map(|&b| b as f64).product();
    if total > 5e7 {
        return Err(Error::ResourceCap(format!("{total} Cantor points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = vec![0.0f64];
    let mut len = 1.0;
    for &b in &branching {
        let sub = len / m as f64;
        let pattern: Vec<usize> = if b == 1 {
            vec![]
        } else {
            (0..b).map(|i| ((i * (m - 1)) as f64 / (b - 1) as f64).round() as usize).collect()
        };
        let mut next = Vec::with_capacity(level.len() * b);
        for &a in &level {
            if b == 1 {
                next.push(a + rng.gen_range(0..m) as f64 * sub);
            } else {
                let mirror = rng.gen::<bool>();
                for &s in &pattern {
                    let s = if mirror { m - 1 - s } else { s };
                    next.push(a + s as f64 * sub);
                }
            }
        }
        next.sort_by(|x, y| x.partial_cmp(y).unwrap());
        level = next;
        len = sub;
    }
    let delta = (m as f64).powi(-(n as i32));
    Ok(CantorSet { m, n, delta, alpha, branching, points: level, requested_delta: delta })
}

/// `f^δ ∩ (N_τ(E) × ℝ)` with `N_τ(E)` the union of length-`τ` intervals
/// centered at the points of `E`.
pub fn make_striped_shading(f: &PolyCurve, id: usize, delta: f64, tau: f64, e: &[f64], raster: Raster) -> Result<Shading> {
    rasterize(f, id, delta, raster, Some(&Stripes::from_points(e, tau)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergParams {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub c: f64,
    pub seed: u64,
    /// Shadings whose planar (δ,α;C) property is tested directly; every
    /// stripe set is tested on the line.
    pub check_shadings: usize,
}

impl FurstenbergParams {
    pub fn new(delta: f64, alpha: f64, beta: f64, k: usize, seed: u64) -> Self {
        FurstenbergParams { delta, alpha, beta, k, c: 16.0, seed, check_shadings: 4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FurstenbergInstance {
    pub params: FurstenbergParams,
    pub family: CurveFamily,
    pub stripes: Vec<Vec<f64>>,
    pub raster: Raster,
    /// `A_f`: cells inside `f^{2δ}` over columns inside the stripes.
    pub shadings: Vec<Shading>,
}

/// Curves `f_s(t) = (s - 1/2)(0.6 + 0.2 t - 0.1 t^2)` for `s` in a
/// `(δ,β)` Cantor set, each carrying the inner rasterization of `f^{2δ}`
/// striped by its own `(δ,α)` Cantor set, raster `h = δ/4`.
pub fn furstenberg_instance(p: &FurstenbergParams) -> Result<FurstenbergInstance> {
    let delta = p.delta;
    let svals: Vec<f64> = if p.beta == 0.0 {
        vec![0.5]
    } else {
        cantor_generator(delta, p.beta, p.seed)?.points
    };
    let curves: Vec<PolyCurve> = svals
        .iter()
        .map(|&s| PolyCurve::new(vec![0.6 * (s - 0.5), 0.2 * (s - 0.5), -0.1 * (s - 0.5)]))
        .collect::<Result<_>>()?;
    let family = CurveFamily::new(curves, p.k, format!("furstenberg δ={delta} α={} β={} seed={}", p.alpha, p.beta, p.seed))?;
    let raster = Raster::new(delta / 4.0)?;
    let built: Result<Vec<(Vec<f64>, Shading)>> = family
        .curves
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let e = if p.alpha == 0.0 {
                vec![0.5]
            } else {
                cantor_generator(delta, p.alpha, p.seed.wrapping_add(1 + i as u64))?.points
            };
            let stripes = Stripes::from_intervals(e.iter().map(|&x| (x, x + delta)).collect());
            let s = rasterize_with(f, i, 2.0 * delta, raster, Some(&stripes), Fit::Inner)?;
            Ok((e, s))
        })
        .collect();
    let (stripes, shadings) = built?.into_iter().unzip();
    Ok(FurstenbergInstance { params: p.clone(), family, stripes, raster, shadings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceValidation {
    pub n_curves: usize,
    pub min_cardinality: f64,
    pub family: DeltaAlphaReport,
    pub min_shading_area: f64,
    pub area_floor: f64,
    pub worst_stripe: DeltaAlphaReport,
    pub worst_shading: Option<DeltaAlphaReport>,
    pub inside_neighborhood: bool,
}

fn cell_centers(s: &Shading) -> Vec<[f64; 2]> {
    let r = s.raster;
    let h = r.h();
    let mut out = Vec::with_capacity(s.cells() as usize);
    for sp in &s.spans {
        let x = r.col_span(sp.col).0 + 0.5 * h;
        for j in sp.j0..=sp.j1 {
            out.push([x, r.row_span(j).0 + 0.5 * h]);
        }
    }
    out
}

/// Checks every defining condition and fails with a structured error
/// naming the first violated one.
pub fn validate_instance(inst: &FurstenbergInstance) -> Result<InstanceValidation> {
    let p = &inst.params;
    let d = p.delta;
    let fam = is_delta_alpha(&PointSet::jets(&inst.family.curves, p.k), d, p.beta, p.c);
    let n = inst.family.len();
    let min_card = d.powf(-p.beta) / p.c;
    let area_floor = d.powf(2.0 - p.alpha) / p.c;
    let min_area = inst.shadings.iter().map(Shading::area).fold(f64::INFINITY, f64::min);
    let stripe_reports: Vec<DeltaAlphaReport> =
        inst.stripes.par_iter().map(|e| is_delta_alpha(&PointSet::Line { x: e.clone() }, d, p.alpha, p.c)).collect();
    let worst_stripe = stripe_reports
        .into_iter()
        .fold(None::<DeltaAlphaReport>, |a, b| match a {
            Some(a) if a.worst_ratio >= b.worst_ratio => Some(a),
            _ => Some(b),
        })
        .ok_or_else(|| Error::Construction("instance has no curves".into()))?;
    let shading_reports: Vec<DeltaAlphaReport> = inst
        .shadings
        .par_iter()
        .take(p.check_shadings)
        .map(|s| is_delta_alpha(&PointSet::Plane { p: cell_centers(s) }, d, p.alpha, p.c))
        .collect();
    let worst_shading = shading_reports.into_iter().fold(None::<DeltaAlphaReport>, |a, b| match a {
        Some(a) if a.worst_ratio >= b.worst_ratio => Some(a),
        _ => Some(b),
    });
    let inside = inst.family.curves.iter().zip(&inst.shadings).all(|(f, s)| {
        let h = s.raster.h();
        s.spans.iter().all(|sp| {
            let (t0, t1) = s.raster.col_span(sp.col);
            let (y0, y1) = (s.raster.row_span(sp.j0).0, s.raster.row_span(sp.j1).0 + h);
            let top = f.poly().sup(t0, t1).upper;
            let bottom = -f.poly().scale(-1.0).sup(t0, t1).upper;
            y0 >= top - 2.0 * d - 1e-12 && y1 <= bottom + 2.0 * d + 1e-12
        })
    });
    let v = InstanceValidation {
        n_curves: n,
        min_cardinality: min_card,
        family: fam,
        min_shading_area: min_area,
        area_floor,
        worst_stripe,
        worst_shading,
        inside_neighborhood: inside,
    };
    if !v.family.holds {
        return Err(Error::Construction(format!("family is not a (δ,β;C)-set: ratio {}", v.family.worst_ratio)));
    }
    if (n as f64) < min_card {
        return Err(Error::Construction(format!("#F = {n} < C^-1 δ^-β = {min_card}")));
    }
    if min_area < area_floor {
        return Err(Error::Construction(format!("min |A_f| = {min_area} < {area_floor}")));
    }
    if !v.worst_stripe.holds {
        return Err(Error::Construction(format!("stripe set ratio {}", v.worst_stripe.worst_ratio)));
    }
    if let Some(w) = &v.worst_shading {
        if !w.holds {
            return Err(Error::Construction(format!("shading is not a (δ,α;C)-set: ratio {}", w.worst_ratio)));
        }
    }
    if !inside {
        return Err(Error::Construction("a shading leaves f^{2δ}".into()));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergReport {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub eps: f64,
    pub n_curves: usize,
    pub measure_e: f64,
    pub bound: f64,
    /// `∥χ_E Σ χ_{A_f}∥_1 = Σ |A_f|`.
    pub pairing: f64,
    pub sum_areas: f64,
    /// `∥χ_E∥_{k+1}`.
    pub norm_e: f64,
    /// `∥Σ χ_{A_f}∥_{(k+1)/k}`.
    pub norm_sum: f64,
    pub holder_rhs: f64,
    pub chain_holds: bool,
    pub bound_holds: bool,
}

pub fn furstenberg_check(inst: &FurstenbergInstance, eps: f64) -> Result<FurstenbergReport> {
    validate_instance(inst)?;
    let p = &inst.params;
    let k = p.k as f64;
    let h = inst.raster.h();
    let hist = count_histogram(&inst.shadings)?;
    let cells_e: u64 = hist.iter().skip(1).sum();
    let measure_e = cells_e as f64 * h * h;
    let pairing = hist_lp_norm(&hist, h, 1.0);
    let sum_areas: f64 = inst.shadings.iter().map(Shading::area).sum();
    let norm_e = measure_e.powf(1.0 / (k + 1.0));
    let norm_sum = hist_lp_norm(&hist, h, (k + 1.0) / k);
    let holder_rhs = norm_e * norm_sum;
    let bound = p.delta.powf(2.0 - p.alpha - p.beta + eps);
    let chain_holds = (pairing - sum_areas).abs() <= 1e-9 * sum_areas.max(1e-300) && pairing <= holder_rhs * (1.0 + 1e-9);
    Ok(FurstenbergReport {
        delta: p.delta,
        alpha: p.alpha,
        beta: p.beta,
        k: p.k,
        eps,
        n_curves: inst.family.len(),
        measure_e,
        bound,
        pairing,
        sum_areas,
        norm_e,
        norm_sum,
        holder_rhs,
        chain_holds,
        bound_holds: measure_e >= bound,
    })
}

/// Writes `family.json`, `stripes.json`, `shadings.bin` and `report.json`.
pub fn write_bundle(dir: &Path, inst: &FurstenbergInstance, report: &FurstenbergReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("family.json"), inst.family.to_json()?)?;
    fs::write(dir.join("stripes.json"), serde_json::to_string_pretty(&inst.stripes)?)?;
    let mut bin = Vec::new();
    bin.extend_from_slice(&(inst.shadings.len() as u64).to_le_bytes());
    bin.extend_from_slice(&inst.raster.n.to_le_bytes());
    for s in &inst.shadings {
        bin.extend_from_slice(&s.to_bytes());
    }
    fs::write(dir.join("shadings.bin"), bin)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiProductReport {
    pub projection_cover: usize,
    pub projection_cap: f64,
    pub max_fiber_cover: usize,
    pub fiber_cap: f64,
    pub measure: f64,
    pub measure_cap: f64,
    pub pass: bool,
}

/// Projection and fiber covering numbers and measure of a raster set
/// given as `(col, row)` cells.
pub fn quasi_product_bound(cells: &[(u32, u32)], raster: Raster, delta: f64, alpha: f64, q: f64, eta: f64) -> QuasiProductReport {
    let h = raster.h();
    let mut cols: Vec<u32> = cells.iter().map(|c| c.0).collect();
    cols.sort_unstable();
    cols.dedup();
    let xs: Vec<f64> = cols.iter().map(|&c| raster.col_span(c).0 + 0.5 * h).collect();
    let projection_cover = covering_number(&PointSet::Line { x: xs }, delta).net;
    let mut fibers: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
    for &(c, r) in cells {
        fibers.entry(c).or_default().push(raster.row_span(r).0 + 0.5 * h);
    }
    let max_fiber_cover = fibers.into_values().map(|y| covering_number(&PointSet::Line { x: y }, delta).net).max().unwrap_or(0);
    let mut uniq = cells.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let measure = uniq.len() as f64 * h * h;
    let slack = delta.powf(-eta);
    let projection_cap = slack * delta.powf(-alpha);
    let fiber_cap = slack * delta.powf(-q);
    let measure_cap = delta.powf(2.0 - alpha - q - 2.0 * eta);
    let pass = projection_cover as f64 <= projection_cap * (1.0 + 1e-9)
        && max_fiber_cover as f64 <= fiber_cap * (1.0 + 1e-9)
        && measure <= measure_cap * (1.0 + 1e-9);
    QuasiProductReport { projection_cover, projection_cap, max_fiber_cover, fiber_cap, measure, measure_cap, pass }
}

//! Dyadic rasters of `[0,1] x [-1,1]` and shadings stored as one
//! contiguous cell span per column. Counts are accumulated by a per-column
//! sweep, so memory scales with the number of spans rather than cells.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::PolyCurve;
use crate::error::{Error, Result};

/// Cell size `h = 2^{-n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raster {
    pub n: u32,
}

impl Raster {
    pub fn new(h: f64) -> Result<Self> {
        let n = (-h.log2()).round();
        if !(h > 0.0) || (2f64.powf(-n) - h).abs() > 1e-15 * h || !(1.0..=24.0).contains(&n) {
            return Err(Error::Domain(format!("cell size {h} is not 2^-n with 1 <= n <= 24")));
        }
        Ok(Raster { n: n as u32 })
    }

    /// Finest dyadic raster with `h <= δ / factor`.
    pub fn for_delta(delta: f64, factor: f64) -> Result<Self> {
        let n = (factor / delta).log2().ceil().max(1.0);
        Raster::new(2f64.powf(-n))
    }

    pub fn h(&self) -> f64 {
        2f64.powi(-(self.n as i32))
    }

    pub fn ncols(&self) -> u32 {
        1 << self.n
    }

    pub fn nrows(&self) -> u32 {
        1 << (self.n + 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }

    pub fn col_span(&self, i: u32) -> (f64, f64) {
        let h = self.h();
        (i as f64 * h, (i + 1) as f64 * h)
    }

    pub fn row_span(&self, j: u32) -> (f64, f64) {
        let h = self.h();
        (-1.0 + j as f64 * h, -1.0 + (j + 1) as f64 * h)
    }
}

/// Inclusive row range `j0..=j1` in column `col`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub col: u32,
    pub j0: u32,
    pub j1: u32,
}

impl Span {
    pub fn cells(&self) -> u64 {
        (self.j1 - self.j0 + 1) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shading {
    pub curve_id: usize,
    pub delta: f64,
    pub raster: Raster,
    /// Sorted by column, at most one span per column.
    pub spans: Vec<Span>,
}

impl Shading {
    pub fn empty(curve_id: usize, delta: f64, raster: Raster) -> Self {
        Shading { curve_id, delta, raster, spans: Vec::new() }
    }

    pub fn cells(&self) -> u64 {
        self.spans.iter().map(Span::cells).sum()
    }

    pub fn area(&self) -> f64 {
        self.cells() as f64 * self.raster.cell_area()
    }

    pub fn contains(&self, col: u32, row: u32) -> bool {
        match self.spans.binary_search_by_key(&col, |s| s.col) {
            Ok(i) => (self.spans[i].j0..=self.spans[i].j1).contains(&row),
            Err(_) => false,
        }
    }

    /// Little-endian dump: span count, then `(col, j0, run length)` per span.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 * self.spans.len() + 8);
        out.extend_from_slice(&(self.spans.len() as u64).to_le_bytes());
        for s in &self.spans {
            out.extend_from_slice(&s.col.to_le_bytes());
            out.extend_from_slice(&s.j0.to_le_bytes());
            out.extend_from_slice(&(s.j1 - s.j0 + 1).to_le_bytes());
        }
        out
    }
}

/// Finite union of closed intervals in `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stripes {
    pub intervals: Vec<(f64, f64)>,
}

impl Stripes {
    pub fn full() -> Self {
        Stripes { intervals: vec![(0.0, 1.0)] }
    }

    pub fn empty() -> Self {
        Stripes { intervals: Vec::new() }
    }

    /// Union of the intervals of length `tau` centered at the points.
    pub fn from_points(points: &[f64], tau: f64) -> Self {
        let iv: Vec<(f64, f64)> = points.iter().map(|&p| (p - 0.5 * tau, p + 0.5 * tau)).collect();
        Stripes::from_intervals(iv)
    }

    pub fn from_intervals(mut iv: Vec<(f64, f64)>) -> Self {
        iv.retain(|&(a, b)| b > a && b > 0.0 && a < 1.0);
        for x in iv.iter_mut() {
            *x = (x.0.max(0.0), x.1.min(1.0));
        }
        iv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Stripes { intervals: out }
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Open interval `(a, b)` meets the set.
    pub fn meets(&self, a: f64, b: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.1 <= a);
        i < self.intervals.len() && self.intervals[i].0 < b
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.1 < b);
        i < self.intervals.len() && self.intervals[i].0 <= a && self.intervals[i].1 >= b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fit {
    /// Cells meeting the neighborhood.
    Outer,
    /// Cells contained in the neighborhood.
    Inner,
}

/// Outer rasterization of the vertical `δ` neighborhood, optionally
/// restricted to columns meeting `stripes`.
pub fn rasterize(f: &PolyCurve, id: usize, delta: f64, raster: Raster, stripes: Option<&Stripes>) -> Result<Shading> {
    rasterize_with(f, id, delta, raster, stripes, Fit::Outer)
}

pub fn rasterize_with(
    f: &PolyCurve,
    id: usize,
    width: f64,
    raster: Raster,
    stripes: Option<&Stripes>,
    fit: Fit,
) -> Result<Shading> {
    let h = raster.h();
    if !(width > 0.0) {
        return Err(Error::Domain("neighborhood width must be positive".into()));
    }
    if h > width / 4.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("raster h = {h} too coarse for δ = {width}")));
    }
    let (dlo, dhi) = f.domain();
    let crit: Vec<f64> = f.deriv(1).roots_in(0.0, 1.0).into_iter().map(|r| r.x).collect();
    let nrows = raster.nrows() as i64;
    let mut spans = Vec::new();
    for col in 0..raster.ncols() {
        let (t0, t1) = raster.col_span(col);
        if t0 < dlo - 1e-15 || t1 > dhi + 1e-15 {
            if fit == Fit::Inner || t1 <= dlo || t0 >= dhi {
                continue;
            }
        }
        if let Some(s) = stripes {
            let ok = match fit {
                Fit::Outer => s.meets(t0, t1),
                Fit::Inner => s.covers(t0, t1),
            };
            if !ok {
                continue;
            }
        }
        let (a, b) = (t0.max(dlo), t1.min(dhi));
        let (mn, mx) = f.poly().range_with_crit(a, b, &crit);
        let err = 1e-13 * (1.0 + mn.abs().max(mx.abs()));
        let (j0, j1) = match fit {
            Fit::Outer => {
                let lo = ((mn - err - width + 1.0) / h).floor() as i64;
                let hi = ((mx + err + width + 1.0) / h).ceil() as i64 - 1;
                (lo, hi)
            }
            Fit::Inner => {
                let lo = ((mx + err - width + 1.0) / h).ceil() as i64;
                let hi = ((mn - err + width + 1.0) / h).floor() as i64 - 1;
                (lo, hi)
            }
        };
        let (j0, j1) = (j0.max(0), j1.min(nrows - 1));
        if j0 <= j1 {
            spans.push(Span { col, j0: j0 as u32, j1: j1 as u32 });
        }
    }
    Ok(Shading { curve_id: id, delta: width, raster, spans })
}

fn check_raster(shadings: &[Shading]) -> Result<Option<Raster>> {
    let r = match shadings.first() {
        Some(s) => s.raster,
        None => return Ok(None),
    };
    if shadings.iter().any(|s| s.raster != r) {
        return Err(Error::Precondition("shadings use different rasters".into()));
    }
    Ok(Some(r))
}

/// Per-column runs `(value, length)` of the weighted count function.
fn column_runs(shadings: &[Shading], weights: &[f64], ncols: u32) -> Vec<Vec<(f64, u64)>> {
    let mut events: Vec<Vec<(u32, usize, i64, f64)>> = vec![Vec::new(); ncols as usize];
    for (k, s) in shadings.iter().enumerate() {
        for sp in &s.spans {
            events[sp.col as usize].push((sp.j0, k, 1, weights[k]));
            events[sp.col as usize].push((sp.j1 + 1, k, -1, -weights[k]));
        }
    }
    events
        .into_par_iter()
        .map(|mut ev| {
            ev.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut runs = Vec::new();
            let mut cur = 0.0;
            let mut active = 0i64;
            let mut i = 0;
            while i < ev.len() {
                let row = ev[i].0;
                while i < ev.len() && ev[i].0 == row {
                    active += ev[i].2;
                    cur += ev[i].3;
                    i += 1;
                }
                if active == 0 {
                    cur = 0.0;
                }
                if i < ev.len() && active > 0 {
                    runs.push((cur, (ev[i].0 - row) as u64));
                }
            }
            runs
        })
        .collect()
}

/// `hist[c]` = number of cells covered by exactly `c` shadings, `c >= 1`.
pub fn count_histogram(shadings: &[Shading]) -> Result<Vec<u64>> {
    let r = match check_raster(shadings)? {
        Some(r) => r,
        None => return Ok(vec![0]),
    };
    let ones = vec![1.0; shadings.len()];
    let mut hist = vec![0u64; shadings.len() + 1];
    for col in column_runs(shadings, &ones, r.ncols()) {
        for (v, len) in col {
            hist[v.round() as usize] += len;
        }
    }
    Ok(hist)
}

/// `L^p` norm of a function given by its count histogram.
pub fn hist_lp_norm(hist: &[u64], h: f64, p: f64) -> f64 {
    let s: f64 = hist.iter().enumerate().skip(1).map(|(c, &n)| n as f64 * (c as f64).powf(p)).sum();
    (s * h * h).powf(1.0 / p)
}

pub fn lp_count_norm(shadings: &[Shading], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p = {p} < 1")));
    }
    let r = match check_raster(shadings)? {
        Some(r) => r,
        None => return Ok(0.0),
    };
    Ok(hist_lp_norm(&count_histogram(shadings)?, r.h(), p))
}

/// `∥Σ w_j χ_j∥_p` on the raster.
pub fn weighted_lp_norm(shadings: &[Shading], weights: &[f64], p: f64) -> Result<f64> {
    if weights.len() != shadings.len() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Precondition("one finite weight per shading required".into()));
    }
    let r = match check_raster(shadings)? {
        Some(r) => r,
        None => return Ok(0.0),
    };
    let per_col: Vec<f64> = column_runs(shadings, weights, r.ncols())
        .into_iter()
        .map(|runs| runs.iter().map(|&(v, n)| n as f64 * v.abs().powf(p)).sum())
        .collect();
    let s: f64 = per_col.iter().sum();
    Ok((s * r.cell_area()).powf(1.0 / p))
}

/// Binary PGM of the count function, brightest at the maximum count.
/// Row 0 of the image is `y = 1`.
pub fn write_pgm<W: Write>(mut w: W, shadings: &[Shading]) -> Result<()> {
    let r = check_raster(shadings)?.ok_or_else(|| Error::Precondition("no shadings".into()))?;
    let (nc, nr) = (r.ncols() as usize, r.nrows() as usize);
    if nc * nr > 1 << 26 {
        return Err(Error::ResourceCap(format!("{nc}x{nr} image too large")));
    }
    let mut counts = vec![0u32; nc * nr];
    for s in shadings {
        for sp in &s.spans {
            for j in sp.j0..=sp.j1 {
                counts[(nr - 1 - j as usize) * nc + sp.col as usize] += 1;
            }
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0).max(1);
    write!(w, "P5\n{nc} {nr}\n255\n")?;
    let bytes: Vec<u8> = counts.iter().map(|&c| ((c as u64 * 255) / max as u64) as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

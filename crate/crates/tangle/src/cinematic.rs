//! Cinematic curve families `t -> h(u; t)`: moment curves, circles,
//! ellipses and user polynomials in the parameters. Provides the jet
//! Jacobian, the cinematic determinant check, the transversality rank of a
//! projection, and grid sampling into polynomial curve families.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ad::{Dual, Series};
use crate::curve::{poly_approximate, CurveFamily, PolyCurve};
use crate::error::{Error, Result};

/// One term `coef * prod_l u_l^{u_exps[l]} * t^{t_exp}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub u_exps: Vec<u32>,
    pub t_exp: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `h(u; t) = sum_i u_i t^i`.
    Moment,
    /// Parameters `(x, y, r)`, `h = sqrt(r^2 - (t - x)^2) - y`.
    Circle,
    /// Parameters `(a, b, x, y, theta)`; upper branch of the conic.
    Ellipse,
    Custom { terms: Vec<Monomial> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Projection {
    /// Keep the listed parameter coordinates.
    Coords { indices: Vec<usize> },
    /// `u -> matrix * u + offset`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CinematicSpec {
    pub family: FamilyKind,
    pub m: usize,
    pub s: usize,
    pub param_box: Vec<(f64, f64)>,
    pub time: (f64, f64),
    pub projection: Projection,
}

impl CinematicSpec {
    /// Moment curves of `m` coefficients on `[0,1]^m`, projecting to the
    /// last `m - s` coefficients.
    pub fn moment(m: usize, s: usize) -> Result<Self> {
        let spec = CinematicSpec {
            family: FamilyKind::Moment,
            m,
            s,
            param_box: vec![(0.0, 1.0); m],
            time: (0.0, 1.0),
            projection: Projection::Coords { indices: (s..m).collect() },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Circles near `(0, 0, 1)` above `[-0.1, 0.1]`, projected to the center.
    pub fn circle() -> Self {
        CinematicSpec {
            family: FamilyKind::Circle,
            m: 3,
            s: 1,
            param_box: vec![(-0.1, 0.1), (-0.1, 0.1), (0.9, 1.1)],
            time: (-0.1, 0.1),
            projection: Projection::Coords { indices: vec![0, 1] },
        }
    }

    /// Ellipses near axes `(1, 1)`, center 0, rotation 0.
    pub fn ellipse() -> Self {
        CinematicSpec {
            family: FamilyKind::Ellipse,
            m: 5,
            s: 3,
            param_box: vec![(0.9, 1.1), (0.9, 1.1), (-0.1, 0.1), (-0.1, 0.1), (-0.1, 0.1)],
            time: (-0.1, 0.1),
            projection: Projection::Coords { indices: vec![2, 3] },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > self.s && self.s >= 1) {
            return Err(Error::Precondition(format!("need m > s >= 1, got m={}, s={}", self.m, self.s)));
        }
        let expected_m = match &self.family {
            FamilyKind::Moment => self.m,
            FamilyKind::Circle => 3,
            FamilyKind::Ellipse => 5,
            FamilyKind::Custom { terms } => {
                if terms.iter().any(|t| t.u_exps.len() != self.m) {
                    return Err(Error::Precondition("custom term arity differs from m".into()));
                }
                self.m
            }
        };
        if expected_m != self.m {
            return Err(Error::Precondition(format!("family needs m = {expected_m}")));
        }
        if self.param_box.len() != self.m || self.param_box.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::Precondition("parameter box must have positive volume".into()));
        }
        if !(self.time.0 < self.time.1) {
            return Err(Error::Precondition("empty time interval".into()));
        }
        let dphi = self.projection_matrix()?;
        let sv = dphi.clone().svd(false, false).singular_values;
        if sv.len() < self.m - self.s || sv.min() < 1e-12 {
            return Err(Error::Precondition("projection is not of full rank m - s".into()));
        }
        Ok(())
    }

    /// `DPhi` as an `(m - s) x m` matrix.
    pub fn projection_matrix(&self) -> Result<DMatrix<f64>> {
        let rows = self.m - self.s;
        match &self.projection {
            Projection::Coords { indices } => {
                if indices.len() != rows || indices.iter().any(|&i| i >= self.m) {
                    return Err(Error::Precondition("projection must select m - s coordinates".into()));
                }
                Ok(DMatrix::from_fn(rows, self.m, |r, c| if indices[r] == c { 1.0 } else { 0.0 }))
            }
            Projection::Affine { matrix, offset } => {
                if matrix.len() != rows || offset.len() != rows || matrix.iter().any(|r| r.len() != self.m) {
                    return Err(Error::Precondition("affine projection has wrong shape".into()));
                }
                Ok(DMatrix::from_fn(rows, self.m, |r, c| matrix[r][c]))
            }
        }
    }

    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        match &self.projection {
            Projection::Coords { indices } => indices.iter().map(|&i| u[i]).collect(),
            Projection::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, o)| o + row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
        }
    }

    /// Parameter coordinates left free on a fiber `Phi^{-1}(v)`; only
    /// coordinate projections have an explicit chart.
    pub fn fiber_coords(&self) -> Result<Vec<usize>> {
        match &self.projection {
            Projection::Coords { indices } => Ok((0..self.m).filter(|i| !indices.contains(i)).collect()),
            Projection::Affine { .. } => Err(Error::Unsupported("no fiber chart for an affine projection".into())),
        }
    }

    /// Parameter vector on the fiber over `v` with free coordinates `w`.
    pub fn fiber_point(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let Projection::Coords { indices } = &self.projection else {
            return Err(Error::Unsupported("no fiber chart for an affine projection".into()));
        };
        let mut u = vec![0.0; self.m];
        for (&i, &x) in indices.iter().zip(v) {
            u[i] = x;
        }
        for (i, &x) in self.fiber_coords()?.iter().zip(w) {
            u[*i] = x;
        }
        Ok(u)
    }

    /// Taylor series of `h(u; t0 + tau)` in `tau` to the given order, with
    /// gradients in `u`.
    pub fn series(&self, u: &[f64], t0: f64, order: usize) -> Result<Series> {
        let m = self.m;
        let var = |i: usize| Dual::var(i, u[i], m);
        let cst = |v: f64| Dual::constant(v, m);
        let t = Series::time(t0, order, m);
        let out = match &self.family {
            FamilyKind::Moment => {
                let mut acc = Series::constant(&cst(0.0), order);
                let mut pow = Series::constant(&cst(1.0), order);
                for i in 0..m {
                    acc = acc.add(&pow.mul_dual(&var(i)));
                    pow = pow.mul(&t);
                }
                acc
            }
            FamilyKind::Circle => {
                let d = t.add_dual(&-&var(0));
                let r = var(2);
                let inside = Series::constant(&(&r * &r), order).sub(&d.mul(&d));
                let root = inside.sqrt().ok_or_else(|| {
                    Error::Domain(format!("circle undefined at t = {t0} for parameters {u:?}"))
                })?;
                root.add_dual(&-&var(1))
            }
            FamilyKind::Ellipse => {
                let (a, b, x, y, th) = (var(0), var(1), var(2), var(3), var(4));
                let (s, c) = (th.sin(), th.cos());
                let (a2, b2) = (&a * &a, &b * &b);
                let (s2, c2, sc) = (&s * &s, &c * &c, &s * &c);
                let ca = &(&a2 * &s2) + &(&b2 * &c2);
                let cb = (&(&b2 - &a2) * &sc).scale(2.0);
                let cc = &(&a2 * &c2) + &(&b2 * &s2);
                let cd = &(&ca * &x).scale(-2.0) - &(&cb * &y);
                let ce = &(-&(&cb * &x)) - &(&cc * &y).scale(2.0);
                let cf = &(&(&(&ca * &(&x * &x)) + &(&cb * &(&x * &y))) + &(&cc * &(&y * &y))) - &(&a2 * &b2);
                let lin = t.mul_dual(&cb).add_dual(&ce);
                let quad = t.mul(&t).mul_dual(&ca).add(&t.mul_dual(&cd)).add_dual(&cf);
                let disc = lin.mul(&lin).sub(&quad.mul_dual(&cc).scale(4.0));
                let root = disc.sqrt().ok_or_else(|| {
                    Error::Domain(format!("ellipse branch undefined at t = {t0} for parameters {u:?}"))
                })?;
                let num = root.sub(&lin);
                let den = Series::constant(&cc.scale(2.0), order);
                num.div(&den)
            }
            FamilyKind::Custom { terms } => {
                let mut acc = Series::constant(&cst(0.0), order);
                for term in terms {
                    let mut coef = cst(term.coef);
                    for (l, &e) in term.u_exps.iter().enumerate() {
                        coef = &coef * &var(l).powi(e as i32);
                    }
                    acc = acc.add(&t.powi(term.t_exp).mul_dual(&coef));
                }
                acc
            }
        };
        Ok(out)
    }

    /// `h(u; t)`.
    pub fn eval(&self, u: &[f64], t: f64) -> Option<f64> {
        match &self.family {
            FamilyKind::Moment => Some(u.iter().rev().fold(0.0, |acc, &c| acc * t + c)),
            FamilyKind::Circle => {
                let inside = u[2] * u[2] - (t - u[0]) * (t - u[0]);
                (inside >= 0.0).then(|| inside.sqrt() - u[1])
            }
            _ => self.series(u, t, 0).ok().map(|s| s.c[0].v),
        }
    }

    /// The `rows x m` matrix of `d/du (d/dt)^j h`, `j < rows`.
    pub fn jet_jacobian(&self, u: &[f64], t: f64, rows: usize) -> Result<DMatrix<f64>> {
        let s = self.series(u, t, rows.saturating_sub(1))?;
        let mut out = DMatrix::zeros(rows, self.m);
        for j in 0..rows {
            let d = s.derivative(j);
            for l in 0..self.m {
                out[(j, l)] = d.g[l];
            }
        }
        Ok(out)
    }

    /// Exact polynomial in `t` for families polynomial in `t`.
    pub fn exact_curve(&self, u: &[f64]) -> Option<Result<PolyCurve>> {
        match &self.family {
            FamilyKind::Moment => Some(PolyCurve::with_domain(u.to_vec(), self.time)),
            FamilyKind::Custom { terms } => {
                let deg = terms.iter().map(|t| t.t_exp as usize).max().unwrap_or(0);
                let mut c = vec![0.0; deg + 1];
                for term in terms {
                    let w: f64 = term
                        .u_exps
                        .iter()
                        .zip(u)
                        .map(|(&e, &x)| x.powi(e as i32))
                        .product();
                    c[term.t_exp as usize] += term.coef * w;
                }
                Some(PolyCurve::with_domain(c, self.time))
            }
            _ => None,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let u = self.param_box.iter().map(|&(a, b)| rng.gen_range(a..=b)).collect();
        let t = rng.gen_range(self.time.0..=self.time.1);
        (u, t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CinematicReport {
    pub min_abs_det: f64,
    pub argmin_u: Vec<f64>,
    pub argmin_t: f64,
    pub samples: usize,
}

/// Minimum `|det|` of the `m x m` jet Jacobian over random `(u, t)`.
pub fn cinematic_check(spec: &CinematicSpec, samples: usize, seed: u64) -> Result<CinematicReport> {
    if samples == 0 {
        return Err(Error::Precondition("samples must be >= 1".into()));
    }
    let dets: Vec<Result<(f64, Vec<f64>, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (u, t) = spec.sample(&mut rng);
            let d = spec.jet_jacobian(&u, t, spec.m)?.determinant();
            if !d.is_finite() {
                return Err(Error::Numerical(format!("non-finite determinant at u = {u:?}, t = {t}")));
            }
            Ok((d.abs(), u, t))
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for r in dets {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (min_abs_det, argmin_u, argmin_t) = best.expect("samples >= 1");
    Ok(CinematicReport { min_abs_det, argmin_u, argmin_t, samples })
}

/// Default threshold on the smallest singular value for a transversality pass.
pub const TRANSVERSALITY_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    /// `s = m - 1`: the condition holds with nothing to check.
    pub vacuous: bool,
    pub min_singular_value: f64,
    pub argmin_u: Vec<f64>,
    pub argmin_t: f64,
    pub rank: usize,
    pub pass: bool,
}

/// Smallest singular value of `DPhi` restricted to the tangent space of
/// `V_{u;t}` at one point, with the rank of that restriction.
pub fn transversality_at(spec: &CinematicSpec, s: usize, u: &[f64], t: f64) -> Result<(f64, usize)> {
    let m = spec.m;
    let jac = spec.jet_jacobian(u, t, s + 1)?;
    let gram = jac.transpose() * &jac;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let scale = eig.eigenvalues.amax().max(1e-300);
    let jet_rank = order.iter().filter(|&&i| eig.eigenvalues[i] > 1e-20 * scale).count();
    if jet_rank < s + 1 {
        return Err(Error::Numerical(format!(
            "cinematic failure: jet Jacobian has rank {jet_rank} < {} at u = {u:?}, t = {t}",
            s + 1
        )));
    }
    let dim = m - s - 1;
    let null = DMatrix::from_fn(m, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    let restricted = spec.projection_matrix()? * null;
    let sv = restricted.svd(false, false).singular_values;
    let smin = sv.min();
    let rank = sv.iter().filter(|&&x| x > TRANSVERSALITY_THRESHOLD).count();
    Ok((smin, rank))
}

pub fn transversality_rank(
    spec: &CinematicSpec,
    s: usize,
    samples: usize,
    seed: u64,
) -> Result<TransversalityReport> {
    if !(s >= 1 && s < spec.m) {
        return Err(Error::Precondition(format!("need 1 <= s < m, got s = {s}")));
    }
    if s == spec.m - 1 {
        return Ok(TransversalityReport {
            vacuous: true,
            min_singular_value: f64::INFINITY,
            argmin_u: vec![],
            argmin_t: f64::NAN,
            rank: 0,
            pass: true,
        });
    }
    let mut probe = spec.clone();
    probe.s = s;
    let res: Vec<Result<(f64, usize, Vec<f64>, f64)>> = (0..samples.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (u, t) = probe.sample(&mut rng);
            let (sv, rank) = transversality_at(&probe, s, &u, t)?;
            Ok((sv, rank, u, t))
        })
        .collect();
    let mut best: Option<(f64, usize, Vec<f64>, f64)> = None;
    for r in res {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (smin, rank, u, t) = best.unwrap();
    Ok(TransversalityReport {
        vacuous: false,
        min_singular_value: smin,
        argmin_u: u,
        argmin_t: t,
        rank,
        pass: smin > TRANSVERSALITY_THRESHOLD,
    })
}

/// How parameters are chosen for [`build_family`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamGrid {
    /// Tensor grid with the given number of points per axis (endpoints
    /// included; a count of one takes the midpoint).
    Counts(Vec<usize>),
    /// Uniform random draws from the box.
    Random(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub k: usize,
    /// Polynomial degree for non-polynomial families.
    pub approx_degree: usize,
    /// Largest accepted sup error of an approximant.
    pub max_error: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { k: 2, approx_degree: 10, max_error: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct BuiltFamily {
    pub family: CurveFamily,
    pub params: Vec<Vec<f64>>,
    /// Approximation error per curve (zero for exact families), measured
    /// before the family-wide rescale.
    pub approx_errors: Vec<f64>,
}

pub fn grid_points(spec: &CinematicSpec, grid: &ParamGrid, seed: u64) -> Result<Vec<Vec<f64>>> {
    match grid {
        ParamGrid::Counts(counts) => {
            if counts.len() != spec.m || counts.iter().any(|&c| c == 0) {
                return Err(Error::Precondition("grid needs a positive count per parameter".into()));
            }
            let axes: Vec<Vec<f64>> = counts
                .iter()
                .zip(&spec.param_box)
                .map(|(&n, &(a, b))| {
                    if n == 1 {
                        vec![0.5 * (a + b)]
                    } else {
                        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                    }
                })
                .collect();
            let mut pts = vec![vec![]];
            for axis in &axes {
                let mut next = Vec::with_capacity(pts.len() * axis.len());
                for p in &pts {
                    for &x in axis {
                        let mut q: Vec<f64> = p.clone();
                        q.push(x);
                        next.push(q);
                    }
                }
                pts = next;
            }
            Ok(pts)
        }
        ParamGrid::Random(n) => {
            if *n == 0 {
                return Err(Error::Precondition("grid must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..*n).map(|_| spec.sample(&mut rng).0).collect())
        }
    }
}

/// Samples the family on a parameter grid. Non-polynomial members are
/// replaced by least-squares approximants; if any member exceeds C^k norm 1
/// the whole family is scaled by one common factor.
pub fn build_family(spec: &CinematicSpec, grid: &ParamGrid, seed: u64, opts: &BuildOptions) -> Result<BuiltFamily> {
    spec.validate()?;
    let params = grid_points(spec, grid, seed)?;
    for u in &params {
        for (i, (&x, &(a, b))) in u.iter().zip(&spec.param_box).enumerate() {
            if x < a || x > b {
                return Err(Error::Precondition(format!("parameter {i} = {x} outside [{a}, {b}]")));
            }
        }
    }
    let built: Vec<Result<(PolyCurve, f64)>> = params
        .par_iter()
        .map(|u| match spec.exact_curve(u) {
            Some(c) => Ok((c?, 0.0)),
            None => {
                let approx = poly_approximate(
                    |t| spec.eval(u, t).unwrap_or(f64::NAN),
                    spec.time,
                    opts.approx_degree,
                    4 * (opts.approx_degree + 1),
                )
                .map_err(|e| Error::Construction(format!("parameter {u:?}: {e}")))?;
                if !(approx.sup_error <= opts.max_error) {
                    return Err(Error::Construction(format!(
                        "parameter {u:?}: approximation error {:.3e} exceeds {:.3e}",
                        approx.sup_error, opts.max_error
                    )));
                }
                Ok((approx.curve, approx.sup_error))
            }
        })
        .collect();
    let mut curves = Vec::with_capacity(built.len());
    let mut approx_errors = Vec::with_capacity(built.len());
    for b in built {
        let (c, e) = b?;
        curves.push(c);
        approx_errors.push(e);
    }
    let family = CurveFamily::normalized(curves, opts.k, format!("{:?} grid {:?}", spec.family, grid))?;
    Ok(BuiltFamily { family, params, approx_errors })
}

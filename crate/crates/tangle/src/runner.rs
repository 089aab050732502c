//! Experiment orchestration: a versioned TOML config goes in; a manifest,
//! a byte-deterministic `results.csv`, a JSON report and SVG plots come
//! out. `report` folds result directories into one markdown summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cinematic::{build_family, BuildOptions, CinematicSpec, ParamGrid};
use crate::curve::ck_norm;
use crate::error::{Error, Result};
use crate::gmt::{furstenberg_check, furstenberg_instance, write_bundle, FurstenbergParams};
use crate::incidence::{verify_rect_bound, BroadnessOptions, RectBoundOptions};
use crate::maximal::{
    cinematic_maximal, cordoba_trend, kakeya_maximal, knapp_experiment, sharpness_log_experiment, wolff_maximal,
    BoxIndicator, CinematicOptions, FnOf, MaximalProfile, PlaneFn, QuadOptions,
};
use crate::oracles::{case_record, collect_suite, run_suite, suites_to_json, suites_to_junit, wongkew_volume, MPoly, LEMMAS};

pub const SCHEMA_VERSION: i64 = 1;

/// Largest raster (in cells) a run may allocate.
pub const MAX_RASTER_CELLS: f64 = (1u64 << 28) as f64;

/// Exit status for a failed inequality in a `lemmas` run.
pub const EXIT_LEMMA_FAILURE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Family,
    RectBound,
    Maximal,
    Knapp,
    Sharpness,
    Furstenberg,
    Lemmas,
    Wongkew,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Family,
        Kind::RectBound,
        Kind::Maximal,
        Kind::Knapp,
        Kind::Sharpness,
        Kind::Furstenberg,
        Kind::Lemmas,
        Kind::Wongkew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Family => "family",
            Kind::RectBound => "rect-bound",
            Kind::Maximal => "maximal",
            Kind::Knapp => "knapp",
            Kind::Sharpness => "sharpness",
            Kind::Furstenberg => "furstenberg",
            Kind::Lemmas => "lemmas",
            Kind::Wongkew => "wongkew",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    fn randomized(self) -> bool {
        matches!(self, Kind::Family | Kind::RectBound | Kind::Furstenberg | Kind::Lemmas | Kind::Wongkew)
    }

    /// The inequality each kind checks, as printed in reports.
    pub fn anchor(self) -> &'static str {
        match self {
            Kind::Family => "||f||_{C^k} <= 1 for every member after the common rescale",
            Kind::RectBound => "#R <= δ^{-ε} (#F/μ)^{(k+1)/k} for incomparable rich broad rectangles",
            Kind::Maximal => "maximal averages over δ-tubes; Córdoba: ||Σχ||_2 <= 4 log(1/δ)^{1/2} δ #F",
            Kind::Knapp => "slope of log(||K_δ χ||_p / ||χ||_p) vs log δ: <= -0.1 for p < 2, >= -0.05 for p >= 2",
            Kind::Sharpness => "||f||_{s+1}^{s+1} = log((1+ρ)/ρ); line integral ≈ c log(1/ρ) with R² >= 0.98",
            Kind::Furstenberg => "|E| >= δ^{2-α-β+ε} and the Hölder chain |E|·Σ|A_f| <= ... <= ||χ_E||_p ||Σχ_A||_p'",
            Kind::Lemmas => "per-lemma inequalities with proof-traced constants (lhs <= rhs)",
            Kind::Wongkew => "|B ∩ N_ρ(Z(Q))| <= C (deg Q)^n ρ r^{n-1}",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub family: String,
    pub m: usize,
    pub s: usize,
    pub k: usize,
    pub n: usize,
    pub grid: Option<Vec<usize>>,
    pub approx_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectBoundParams {
    pub k: usize,
    pub deltas: Vec<f64>,
    pub n_curves: Vec<usize>,
    pub mu: Vec<usize>,
    pub eps: f64,
    pub eta: f64,
    pub refine: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalParams {
    pub operator: String,
    pub input: String,
    pub deltas: Vec<f64>,
    pub n_params: usize,
    pub radii: Vec<f64>,
    /// Quadrature step is `δ / h_div`.
    pub h_div: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnappParams {
    pub s: usize,
    pub p: Vec<f64>,
    pub deltas: Vec<f64>,
    pub nv: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessParams {
    pub s: usize,
    pub rhos: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergRunParams {
    pub delta: f64,
    pub k: usize,
    /// `(α, β)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub instances: usize,
    pub eps: f64,
    pub c: f64,
    pub check_shadings: usize,
    pub bundle: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmasParams {
    pub lemmas: Vec<String>,
    pub n: usize,
    pub only: Option<String>,
    pub instance: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WongkewParams {
    pub cases: Vec<String>,
    pub rho: f64,
    pub samples: usize,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Params {
    Family(FamilyParams),
    RectBound(RectBoundParams),
    Maximal(MaximalParams),
    Knapp(KnappParams),
    Sharpness(SharpnessParams),
    Furstenberg(FurstenbergRunParams),
    Lemmas(LemmasParams),
    Wongkew(WongkewParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: i64,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub params: Params,
}

fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|j| 2f64.powi(-j)).collect()
}

impl ExperimentConfig {
    pub fn kind(&self) -> Kind {
        match self.params {
            Params::Family(_) => Kind::Family,
            Params::RectBound(_) => Kind::RectBound,
            Params::Maximal(_) => Kind::Maximal,
            Params::Knapp(_) => Kind::Knapp,
            Params::Sharpness(_) => Kind::Sharpness,
            Params::Furstenberg(_) => Kind::Furstenberg,
            Params::Lemmas(_) => Kind::Lemmas,
            Params::Wongkew(_) => Kind::Wongkew,
        }
    }

    /// Defaults for a kind; randomized kinds still need a seed.
    pub fn defaults(kind: Kind) -> Self {
        let empty = toml::Table::new();
        let params = read_params(kind, &empty).expect("defaults are valid");
        ExperimentConfig { schema: SCHEMA_VERSION, seed: None, threads: None, out: None, params }
    }

    /// SHA-256 of the canonical JSON of `(schema, kind, seed, params)`.
    pub fn hash(&self) -> String {
        let canon = json!({ "schema": self.schema, "seed": self.seed, "params": self.params });
        let digest = Sha256::digest(canon.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn cfg_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

struct Reader<'a> {
    t: &'a toml::Table,
    seen: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(t: &'a toml::Table) -> Self {
        Reader { t, seen: BTreeSet::new() }
    }

    fn get(&mut self, key: &str) -> Option<&'a toml::Value> {
        self.seen.insert(key.to_string());
        self.t.get(key)
    }

    fn num(v: &toml::Value, path: &str) -> Result<f64> {
        match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(i) => Ok(*i as f64),
            _ => Err(cfg_err(path, "expected a number")),
        }
    }

    fn int(v: &toml::Value, path: &str) -> Result<usize> {
        match v {
            toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(cfg_err(path, "expected a non-negative integer")),
        }
    }

    fn f64(&mut self, key: &str, def: f64) -> Result<f64> {
        self.get(key).map_or(Ok(def), |v| Self::num(v, &format!("params.{key}")))
    }

    fn usize(&mut self, key: &str, def: usize) -> Result<usize> {
        self.get(key).map_or(Ok(def), |v| Self::int(v, &format!("params.{key}")))
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.get(key).map(|v| Self::int(v, &format!("params.{key}"))).transpose()
    }

    fn string(&mut self, key: &str, def: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(def.to_string()),
            Some(toml::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(cfg_err(format!("params.{key}"), "expected a string")),
        }
    }

    fn opt_string(&mut self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(cfg_err(format!("params.{key}"), "expected a string")),
        }
    }

    fn bool(&mut self, key: &str, def: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(def),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(cfg_err(format!("params.{key}"), "expected a boolean")),
        }
    }

    fn array(&mut self, key: &str) -> Result<Option<&'a Vec<toml::Value>>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(cfg_err(format!("params.{key}"), "expected an array")),
        }
    }

    fn f64_list(&mut self, key: &str, def: Vec<f64>) -> Result<Vec<f64>> {
        match self.array(key)? {
            None => Ok(def),
            Some(a) => a.iter().enumerate().map(|(i, v)| Self::num(v, &format!("params.{key}[{i}]"))).collect(),
        }
    }

    fn usize_list(&mut self, key: &str, def: Vec<usize>) -> Result<Vec<usize>> {
        match self.array(key)? {
            None => Ok(def),
            Some(a) => a.iter().enumerate().map(|(i, v)| Self::int(v, &format!("params.{key}[{i}]"))).collect(),
        }
    }

    fn string_list(&mut self, key: &str, def: Vec<String>) -> Result<Vec<String>> {
        match self.array(key)? {
            None => Ok(def),
            Some(a) => a
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    _ => Err(cfg_err(format!("params.{key}[{i}]"), "expected a string")),
                })
                .collect(),
        }
    }

    fn pair_list(&mut self, key: &str, def: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
        match self.array(key)? {
            None => Ok(def),
            Some(a) => a
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let path = format!("params.{key}[{i}]");
                    match v {
                        toml::Value::Array(p) if p.len() == 2 => Ok((Self::num(&p[0], &path)?, Self::num(&p[1], &path)?)),
                        _ => Err(cfg_err(path, "expected a pair of numbers")),
                    }
                })
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.t.keys() {
            if !self.seen.contains(key) {
                return Err(cfg_err(format!("params.{key}"), "unknown field"));
            }
        }
        Ok(())
    }
}

fn check_dyadic(path: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(cfg_err(path, "must not be empty"));
    }
    for (i, &d) in xs.iter().enumerate() {
        let j = -d.log2();
        let ok = d > 0.0 && d < 1.0 && j.fract() == 0.0 && 2f64.powi(-(j as i32)) == d;
        if !ok {
            return Err(cfg_err(format!("{path}[{i}]"), format!("{d} is not a negative power of two")));
        }
    }
    Ok(())
}

fn check(path: &str, ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(cfg_err(path, msg))
    }
}

fn read_params(kind: Kind, t: &toml::Table) -> Result<Params> {
    let mut r = Reader::new(t);
    let p = match kind {
        Kind::Family => {
            let family = r.string("family", "moment")?;
            let (dm, ds) = match family.as_str() {
                "moment" => (3, 1),
                "circle" => (3, 1),
                "ellipse" => (5, 3),
                _ => return Err(cfg_err("params.family", "expected moment, circle or ellipse")),
            };
            let p = FamilyParams {
                m: r.usize("m", dm)?,
                s: r.usize("s", ds)?,
                k: r.usize("k", 2)?,
                n: r.usize("n", 64)?,
                grid: match r.array("grid")? {
                    None => None,
                    Some(_) => Some(r.usize_list("grid", vec![])?),
                },
                approx_degree: r.usize("approx_degree", 10)?,
                family,
            };
            check("params.k", p.k >= 1, "must be at least 1")?;
            check("params.n", p.n >= 1, "must be positive")?;
            Params::Family(p)
        }
        Kind::RectBound => {
            let p = RectBoundParams {
                k: r.usize("k", 2)?,
                deltas: r.f64_list("deltas", dyadic(6, 8))?,
                n_curves: r.usize_list("n_curves", vec![100, 200])?,
                mu: r.usize_list("mu", vec![2, 4, 8])?,
                eps: r.f64("eps", 0.3)?,
                eta: r.f64("eta", 0.05)?,
                refine: r.usize("refine", 1)?,
            };
            check_dyadic("params.deltas", &p.deltas)?;
            check("params.k", p.k >= 1, "must be at least 1")?;
            check("params.n_curves", !p.n_curves.is_empty() && p.n_curves.iter().all(|&n| n > 0), "needs positive counts")?;
            check("params.mu", !p.mu.is_empty() && p.mu.iter().all(|&m| m > 0), "needs positive thresholds")?;
            check("params.eps", p.eps > 0.0, "must be positive")?;
            check("params.eta", p.eta > 0.0, "must be positive")?;
            check("params.refine", p.refine >= 1, "must be at least 1")?;
            Params::RectBound(p)
        }
        Kind::Maximal => {
            let p = MaximalParams {
                operator: r.string("operator", "kakeya")?,
                input: r.string("input", "segment")?,
                deltas: r.f64_list("deltas", dyadic(3, 5))?,
                n_params: r.usize("n_params", 16)?,
                radii: r.f64_list("radii", vec![0.5, 1.0, 1.5])?,
                h_div: r.f64("h_div", 8.0)?,
            };
            check(
                "params.operator",
                ["kakeya", "wolff", "cinematic", "cordoba"].contains(&p.operator.as_str()),
                "expected kakeya, wolff, cinematic or cordoba",
            )?;
            check("params.input", ["square", "segment", "annulus"].contains(&p.input.as_str()), "expected square, segment or annulus")?;
            check_dyadic("params.deltas", &p.deltas)?;
            check("params.n_params", p.n_params >= 1, "must be positive")?;
            check("params.h_div", p.h_div >= 1.0, "must be at least 1")?;
            Params::Maximal(p)
        }
        Kind::Knapp => {
            let p = KnappParams {
                s: r.usize("s", 1)?,
                p: r.f64_list("p", vec![1.5, 3.0])?,
                deltas: r.f64_list("deltas", dyadic(4, 10))?,
                nv: r.usize("nv", 32)?,
            };
            check_dyadic("params.deltas", &p.deltas)?;
            check("params.s", p.s >= 1, "must be at least 1")?;
            check("params.p", !p.p.is_empty() && p.p.iter().all(|&x| x >= 1.0), "needs exponents >= 1")?;
            check("params.nv", p.nv >= 1, "must be positive")?;
            Params::Knapp(p)
        }
        Kind::Sharpness => {
            let p = SharpnessParams { s: r.usize("s", 1)?, rhos: r.f64_list("rhos", dyadic(4, 12))? };
            check_dyadic("params.rhos", &p.rhos)?;
            check("params.s", p.s >= 1, "must be at least 1")?;
            Params::Sharpness(p)
        }
        Kind::Furstenberg => {
            let p = FurstenbergRunParams {
                delta: r.f64("delta", 2f64.powi(-8))?,
                k: r.usize("k", 2)?,
                pairs: r.pair_list("pairs", vec![(0.8, 0.5), (1.0, 1.0), (0.6, 0.6)])?,
                instances: r.usize("instances", 2)?,
                eps: r.f64("eps", 0.3)?,
                c: r.f64("c", 16.0)?,
                check_shadings: r.usize("check_shadings", 4)?,
                bundle: r.bool("bundle", false)?,
            };
            check_dyadic("params.delta", &[p.delta])?;
            check("params.pairs", !p.pairs.is_empty(), "must not be empty")?;
            for (i, &(a, b)) in p.pairs.iter().enumerate() {
                check(&format!("params.pairs[{i}]"), (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b), "α and β must lie in [0, 1]")?;
            }
            check("params.instances", p.instances >= 1, "must be positive")?;
            Params::Furstenberg(p)
        }
        Kind::Lemmas => {
            let p = LemmasParams {
                lemmas: r.string_list("lemmas", LEMMAS.iter().map(|s| s.to_string()).collect())?,
                n: r.usize("n", 1000)?,
                only: r.opt_string("only")?,
                instance: r.opt_usize("instance")?,
            };
            for (i, l) in p.lemmas.iter().enumerate() {
                check(&format!("params.lemmas[{i}]"), LEMMAS.contains(&l.as_str()), "unknown lemma")?;
            }
            if let Some(o) = &p.only {
                check("params.only", LEMMAS.contains(&o.as_str()), "unknown lemma")?;
            }
            check("params.n", p.n >= 1, "must be positive")?;
            Params::Lemmas(p)
        }
        Kind::Wongkew => {
            let p = WongkewParams {
                cases: r.string_list("cases", vec!["strip".into(), "annulus".into()])?,
                rho: r.f64("rho", 0.01)?,
                samples: r.usize("samples", 400_000)?,
                c: r.f64("c", crate::oracles::WONGKEW_C)?,
            };
            for (i, c) in p.cases.iter().enumerate() {
                check(&format!("params.cases[{i}]"), wongkew_case(c).is_some(), "expected strip, annulus or sphere")?;
            }
            check("params.rho", p.rho > 0.0, "must be positive")?;
            check("params.samples", p.samples >= 1, "must be positive")?;
            Params::Wongkew(p)
        }
    };
    r.finish()?;
    Ok(p)
}

/// Parses and validates a config. Errors carry the offending field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let t: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err("<root>", e.message().to_string()))?;
    for key in t.keys() {
        if !["schema", "kind", "seed", "threads", "out", "params"].contains(&key.as_str()) {
            return Err(cfg_err(key.as_str(), "unknown field"));
        }
    }
    let schema = match t.get("schema") {
        Some(toml::Value::Integer(v)) => *v,
        Some(_) => return Err(cfg_err("schema", "expected an integer")),
        None => return Err(cfg_err("schema", "missing field")),
    };
    if schema != SCHEMA_VERSION {
        return Err(cfg_err("schema", format!("unsupported version {schema}, expected {SCHEMA_VERSION}")));
    }
    let kind = match t.get("kind") {
        Some(toml::Value::String(s)) => Kind::parse(s).ok_or_else(|| cfg_err("kind", format!("unknown kind `{s}`")))?,
        Some(_) => return Err(cfg_err("kind", "expected a string")),
        None => return Err(cfg_err("kind", "missing field")),
    };
    let seed = match t.get("seed") {
        None => None,
        Some(toml::Value::Integer(v)) if *v >= 0 => Some(*v as u64),
        Some(_) => return Err(cfg_err("seed", "expected a non-negative integer")),
    };
    let threads = match t.get("threads") {
        None => None,
        Some(toml::Value::Integer(v)) if *v >= 1 => Some(*v as usize),
        Some(_) => return Err(cfg_err("threads", "expected a positive integer")),
    };
    let out = match t.get("out") {
        None => None,
        Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(cfg_err("out", "expected a string")),
    };
    let empty = toml::Table::new();
    let params = match t.get("params") {
        None => &empty,
        Some(toml::Value::Table(p)) => p,
        Some(_) => return Err(cfg_err("params", "expected a table")),
    };
    let cfg = ExperimentConfig { schema, seed, threads, out, params: read_params(kind, params)? };
    Ok(cfg)
}

/// Checks that hold after command-line overrides are applied.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.kind().randomized() && cfg.seed.is_none() {
        return Err(cfg_err("seed", format!("a seed is required for `{}`", cfg.kind().name())));
    }
    if cfg.threads == Some(0) {
        return Err(cfg_err("threads", "must be positive"));
    }
    if let Params::Lemmas(p) = &cfg.params {
        if let Some(o) = &p.only {
            check("params.only", LEMMAS.contains(&o.as_str()), "unknown lemma")?;
        }
    }
    Ok(())
}

/// Thread count: explicit value, else `TANGLE_THREADS`, else the config.
pub fn resolve_threads(explicit: Option<usize>, cfg: &ExperimentConfig) -> Result<Option<usize>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    if let Ok(v) = std::env::var("TANGLE_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| cfg_err("TANGLE_THREADS", format!("`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(cfg_err("TANGLE_THREADS", "must be positive"));
        }
        return Ok(Some(n));
    }
    Ok(cfg.threads)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_SCHEMA,
        Error::ResourceCap(_) => EXIT_RESOURCE,
        _ => EXIT_RUNTIME,
    }
}

/// CSV table; every cell is preformatted so output bytes are fixed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(cols: &[&str]) -> Self {
        Table { header: cols.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(bytes);
        let header = r.headers()?.iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(|s| s.to_string()).collect());
        }
        Ok(Table { header, rows })
    }
}

fn fs_(x: f64) -> String {
    format!("{x}")
}

/// A line series for an SVG plot.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal SVG 1.1 line plot with markers and a legend.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", w / 2.0, esc(title));
    let _ = writeln!(
        s,
        "<path d=\"M{m} {m} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        h - m,
        w - m
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{:.3}</text>", sx(fx), h - m + 16.0, fx);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{:.3}</text>", m - 6.0, sy(fy) + 4.0, fy);
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>", w / 2.0, h - 14.0, esc(xlabel));
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>",
        h / 2.0,
        h / 2.0,
        esc(ylabel)
    );
    for (i, se) in series.iter().enumerate() {
        let col = PALETTE[i % PALETTE.len()];
        let good: Vec<(f64, f64)> = se.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        if good.len() > 1 {
            let d: Vec<String> = good
                .iter()
                .enumerate()
                .map(|(j, &(x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, sx(x), sy(y)))
                .collect();
            let _ = writeln!(s, "<path d=\"{}\" stroke=\"{col}\" fill=\"none\" stroke-width=\"1.5\"/>", d.join(" "));
        }
        for &(x, y) in &good {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{col}\"/>", sx(x), sy(y));
        }
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{col}\"/>", w - m - 130.0, ly);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>", w - m - 115.0, ly + 9.0, esc(&se.name));
    }
    s.push_str("</svg>\n");
    s
}

/// Everything a run produces before it is written to disk.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub table: Table,
    pub report: serde_json::Value,
    pub plots: Vec<(String, String)>,
    /// Extra files, relative to the output directory.
    pub files: Vec<(String, Vec<u8>)>,
    pub failed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub schema: i64,
    pub kind: Kind,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    pub failed: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs the experiment on a pool of `threads` workers (rayon default when
/// `None`) and writes the artifacts under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<RunOutcome> {
    validate(cfg)?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    let output = pool.install(|| execute(cfg, out))?;
    fs::create_dir_all(out.join("plots"))?;
    fs::write(out.join("results.csv"), output.table.to_csv()?)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&output.report)? + "\n")?;
    for (name, svg) in &output.plots {
        fs::write(out.join("plots").join(name), svg)?;
    }
    for (name, bytes) in &output.files {
        let p = out.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(p, bytes)?;
    }
    let manifest = Manifest {
        tool: "tangle".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema: cfg.schema,
        kind: cfg.kind(),
        seed: cfg.seed,
        threads,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        failed: output.failed,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let exit_code = if output.failed && cfg.kind() == Kind::Lemmas { EXIT_LEMMA_FAILURE } else { 0 };
    Ok(RunOutcome { exit_code, out_dir: out.to_path_buf(), manifest })
}

fn raster_cap(h: f64) -> Result<()> {
    let cells = 2.0 / (h * h);
    if cells > MAX_RASTER_CELLS {
        return Err(Error::ResourceCap(format!("raster with step {h:e} needs {cells:.3e} cells")));
    }
    Ok(())
}

/// Runs the experiment and returns its artifacts without touching disk
/// (except bundles requested by the config, written under `out`).
pub fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let seed = cfg.seed.unwrap_or(0);
    match &cfg.params {
        Params::Family(p) => run_family(p, seed),
        Params::RectBound(p) => run_rect_bound(p, seed),
        Params::Maximal(p) => run_maximal(p, seed),
        Params::Knapp(p) => run_knapp(p),
        Params::Sharpness(p) => run_sharpness(p),
        Params::Furstenberg(p) => run_furstenberg(p, seed, out),
        Params::Lemmas(p) => run_lemmas(p, seed),
        Params::Wongkew(p) => run_wongkew(p, seed),
    }
}

fn family_spec(p: &FamilyParams) -> Result<CinematicSpec> {
    let spec = match p.family.as_str() {
        "moment" => CinematicSpec::moment(p.m, p.s).map_err(|e| cfg_err("params.m", e.to_string()))?,
        "circle" => CinematicSpec::circle(),
        _ => CinematicSpec::ellipse(),
    };
    if spec.m != p.m || spec.s != p.s {
        return Err(cfg_err("params.m", format!("the {} family has m = {}, s = {}", p.family, spec.m, spec.s)));
    }
    Ok(spec)
}

fn run_family(p: &FamilyParams, seed: u64) -> Result<RunOutput> {
    let spec = family_spec(p)?;
    let grid = match &p.grid {
        Some(g) => ParamGrid::Counts(g.clone()),
        None => ParamGrid::Random(p.n),
    };
    let opts = BuildOptions { k: p.k, approx_degree: p.approx_degree, ..Default::default() };
    let built = build_family(&spec, &grid, seed, &opts)?;
    let mut cols: Vec<String> = vec!["curve".into()];
    cols.extend((0..spec.m).map(|i| format!("u{i}")));
    cols.extend(["degree", "ck_norm", "approx_error", "pass"].map(String::from));
    let mut t = Table { header: cols, rows: vec![] };
    let mut all = true;
    for (i, f) in built.family.curves.iter().enumerate() {
        let norm = ck_norm(f, p.k)?.upper;
        let ok = norm <= 1.0 + crate::curve::NORM_SLACK;
        all &= ok;
        let mut row = vec![i.to_string()];
        row.extend(built.params[i].iter().map(|&x| fs_(x)));
        row.extend([f.degree().to_string(), fs_(norm), fs_(built.approx_errors[i]), ok.to_string()]);
        t.push(row);
    }
    let norms: Vec<(f64, f64)> = t.rows.iter().map(|r| (r[0].parse().unwrap_or(0.0), r[spec.m + 2].parse().unwrap_or(0.0))).collect();
    let report = json!({
        "kind": "family",
        "family": p.family,
        "n_curves": built.family.len(),
        "rescale": built.family.rescale,
        "all_norms_ok": all,
    });
    Ok(RunOutput {
        table: t,
        report,
        plots: vec![("norms.svg".into(), svg_plot("C^k norms", "curve", "norm", &[Series { name: "norm".into(), points: norms }]))],
        files: vec![("family.json".into(), built.family.to_json()?.into_bytes())],
        failed: !all,
    })
}

fn run_rect_bound(p: &RectBoundParams, seed: u64) -> Result<RunOutput> {
    let spec = CinematicSpec::moment(p.k + 1, 1)?;
    let opts = RectBoundOptions { broadness: BroadnessOptions { refine: p.refine as u32 }, ..Default::default() };
    let mut t = Table::new(&[
        "n_curves", "delta", "mu", "candidates", "edges", "rich", "broad", "observed", "bound", "pass",
    ]);
    let mut reports = Vec::new();
    let mut failed = false;
    let mut series: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for &n in &p.n_curves {
        let built = build_family(
            &spec,
            &ParamGrid::Random(n),
            seed.wrapping_add(n as u64),
            &BuildOptions { k: p.k, ..Default::default() },
        )?;
        for &d in &p.deltas {
            for &mu in &p.mu {
                let r = verify_rect_bound(&built.family, d, p.eps, p.eta, mu, &opts)?;
                failed |= !r.pass;
                t.push(vec![
                    n.to_string(),
                    fs_(d),
                    mu.to_string(),
                    r.candidates.to_string(),
                    r.edges.to_string(),
                    r.rich.to_string(),
                    r.broad.to_string(),
                    r.observed.to_string(),
                    fs_(r.bound),
                    r.pass.to_string(),
                ]);
                series.entry(mu).or_default().push((d.log2(), (r.observed as f64 + 1.0).log2() - r.bound.log2()));
                reports.push(r);
            }
        }
    }
    let plot = svg_plot(
        "observed / bound",
        "log2 δ",
        "log2((observed+1)/bound)",
        &series.into_iter().map(|(mu, pts)| Series { name: format!("μ = {mu}"), points: pts }).collect::<Vec<_>>(),
    );
    Ok(RunOutput {
        table: t,
        report: json!({ "kind": "rect-bound", "rows": reports, "all_pass": !failed }),
        plots: vec![("rect_bound.svg".into(), plot)],
        files: vec![],
        failed,
    })
}

fn maximal_input(name: &str, delta: f64) -> Box<dyn PlaneFn> {
    match name {
        "square" => Box::new(BoxIndicator { bbox: [0.0, 1.0, 0.0, 1.0] }),
        "annulus" => Box::new(FnOf(
            move |x: f64, y: f64| if (x.hypot(y) - 1.0).abs() <= delta { 1.0 } else { 0.0 },
            Some([-1.0 - delta, 1.0 + delta, -1.0 - delta, 1.0 + delta]),
        )),
        _ => Box::new(FnOf(
            move |x: f64, y: f64| if (0.0..=1.0).contains(&x) && (y - 0.5).abs() <= delta { 1.0 } else { 0.0 },
            Some([0.0, 1.0, 0.5 - delta, 0.5 + delta]),
        )),
    }
}

fn run_maximal(p: &MaximalParams, seed: u64) -> Result<RunOutput> {
    if p.operator == "cordoba" {
        let mut t = Table::new(&["delta", "lines", "ball_condition", "l2", "l1", "bound", "pass"]);
        let mut rows = Vec::new();
        let mut failed = false;
        for &d in &p.deltas {
            raster_cap(d / 8.0)?;
            let r = cordoba_trend(d, seed)?;
            failed |= !r.pass;
            t.push(vec![fs_(d), r.n.to_string(), r.ball.holds.to_string(), fs_(r.l2), fs_(r.l1), fs_(r.bound), r.pass.to_string()]);
            rows.push(r);
        }
        let pts = |f: fn(&crate::maximal::CordobaRow) -> f64| rows.iter().map(|r| (r.delta.log2(), f(r).log2())).collect();
        let plot = svg_plot(
            "Córdoba L2 norm",
            "log2 δ",
            "log2 value",
            &[Series { name: "||Σχ||_2".into(), points: pts(|r| r.l2) }, Series { name: "bound".into(), points: pts(|r| r.bound) }],
        );
        return Ok(RunOutput {
            table: t,
            report: json!({ "kind": "maximal", "operator": "cordoba", "rows": rows }),
            plots: vec![("cordoba.svg".into(), plot)],
            files: vec![],
            failed,
        });
    }
    let mut t = Table::new(&["operator", "delta", "parameter", "value", "quadrature_error"]);
    let mut profiles: Vec<MaximalProfile> = Vec::new();
    let mut series = Vec::new();
    for &d in &p.deltas {
        let h = d / p.h_div;
        raster_cap(h)?;
        let f = maximal_input(&p.input, d);
        let opts = QuadOptions { h: Some(h), richardson: false };
        let np = p.n_params;
        let prof = match p.operator.as_str() {
            "kakeya" => {
                let dirs: Vec<f64> = (0..np).map(|i| std::f64::consts::PI * i as f64 / np as f64).collect();
                kakeya_maximal(f.as_ref(), d, &dirs, opts)?
            }
            "wolff" => wolff_maximal(f.as_ref(), d, &p.radii, opts)?,
            _ => {
                let spec = CinematicSpec::moment(2, 1)?;
                let v: Vec<Vec<f64>> = (0..np).map(|i| vec![(i as f64 + 0.5) / np as f64]).collect();
                cinematic_maximal(&spec, f.as_ref(), d, &v, CinematicOptions { quad: opts, ..Default::default() })?
            }
        };
        let mut pts = Vec::new();
        for (i, v) in prof.values.iter().enumerate() {
            let param = prof.params[i].iter().map(|x| fs_(*x)).collect::<Vec<_>>().join(";");
            t.push(vec![p.operator.clone(), fs_(d), param, fs_(*v), fs_(prof.quad_error[i])]);
            pts.push((prof.params[i].first().copied().unwrap_or(i as f64), *v));
        }
        series.push(Series { name: format!("δ = {d}"), points: pts });
        profiles.push(prof);
    }
    let plot = svg_plot(&format!("{} maximal profile", p.operator), "parameter", "value", &series);
    Ok(RunOutput {
        table: t,
        report: json!({ "kind": "maximal", "operator": p.operator, "input": p.input, "profiles": profiles }),
        plots: vec![("maximal.svg".into(), plot)],
        files: vec![],
        failed: false,
    })
}

/// Slope rule for the Knapp example: decay below `L^2`, no decay above.
pub fn knapp_slope_ok(p: f64, slope: f64) -> bool {
    if p < 2.0 {
        slope <= -0.1
    } else {
        slope >= -0.05
    }
}

fn run_knapp(p: &KnappParams) -> Result<RunOutput> {
    let mut t = Table::new(&["record", "p", "delta", "norm_m", "norm_f", "ratio", "slope", "pass"]);
    let mut tables = Vec::new();
    let mut series = Vec::new();
    let mut failed = false;
    for &exp in &p.p {
        let k = knapp_experiment(p.s, exp, &p.deltas, p.nv)?;
        for r in &k.rows {
            t.push(vec!["row".into(), fs_(exp), fs_(r.delta), fs_(r.norm_m), fs_(r.norm_f), fs_(r.ratio), String::new(), String::new()]);
        }
        let ok = knapp_slope_ok(exp, k.slope);
        failed |= !ok;
        t.push(vec!["slope".into(), fs_(exp), String::new(), String::new(), String::new(), String::new(), fs_(k.slope), ok.to_string()]);
        series.push(Series { name: format!("p = {exp}"), points: k.rows.iter().map(|r| (r.delta.log2(), r.ratio.log2())).collect() });
        tables.push(k);
    }
    Ok(RunOutput {
        table: t,
        report: json!({ "kind": "knapp", "tables": tables }),
        plots: vec![("knapp.svg".into(), svg_plot("Knapp ratio", "log2 δ", "log2 ratio", &series))],
        files: vec![],
        failed,
    })
}

fn run_sharpness(p: &SharpnessParams) -> Result<RunOutput> {
    let tab = sharpness_log_experiment(p.s, &p.rhos)?;
    let mut t = Table::new(&["record", "rho", "norm_pow", "closed_form", "rel_err", "line_integral", "slope", "intercept", "r2", "pass"]);
    for r in &tab.rows {
        t.push(vec![
            "row".into(),
            fs_(r.rho),
            fs_(r.norm_pow),
            fs_(r.closed_form),
            fs_(r.rel_err),
            fs_(r.line_integral),
            String::new(),
            String::new(),
            String::new(),
            (r.rel_err <= 0.01).to_string(),
        ]);
    }
    let ok = tab.r2 >= 0.98 && tab.rows.iter().all(|r| r.rel_err <= 0.01);
    let e = String::new();
    t.push(vec!["fit".into(), e.clone(), e.clone(), e.clone(), e.clone(), e, fs_(tab.slope), fs_(tab.intercept), fs_(tab.r2), ok.to_string()]);
    let pts: Vec<(f64, f64)> = tab.rows.iter().map(|r| ((1.0 / r.rho).ln(), r.line_integral)).collect();
    let fit: Vec<(f64, f64)> = pts.iter().map(|&(x, _)| (x, tab.intercept + tab.slope * x)).collect();
    let plot = svg_plot(
        "line integral vs log(1/ρ)",
        "log(1/ρ)",
        "integral",
        &[Series { name: "measured".into(), points: pts }, Series { name: "fit".into(), points: fit }],
    );
    Ok(RunOutput { table: t, report: json!({ "kind": "sharpness", "table": tab }), plots: vec![("sharpness.svg".into(), plot)], files: vec![], failed: !ok })
}

fn run_furstenberg(p: &FurstenbergRunParams, seed: u64, out: &Path) -> Result<RunOutput> {
    raster_cap(p.delta / 4.0)?;
    let mut t = Table::new(&[
        "instance", "seed", "alpha", "beta", "n_curves", "measure_e", "bound", "chain_holds", "bound_holds", "pass",
    ]);
    let mut reports = Vec::new();
    let mut failed = false;
    let mut series = Vec::new();
    let mut idx = 0u64;
    for &(a, b) in &p.pairs {
        let mut pts = Vec::new();
        for _ in 0..p.instances {
            let s = seed.wrapping_add(idx);
            let mut fp = FurstenbergParams::new(p.delta, a, b, p.k, s);
            fp.c = p.c;
            fp.check_shadings = p.check_shadings;
            let inst = furstenberg_instance(&fp)?;
            let r = furstenberg_check(&inst, p.eps)?;
            if p.bundle {
                write_bundle(&out.join("bundles").join(format!("instance_{idx}")), &inst, &r)?;
            }
            let ok = r.chain_holds && r.bound_holds;
            failed |= !ok;
            t.push(vec![
                idx.to_string(),
                s.to_string(),
                fs_(a),
                fs_(b),
                r.n_curves.to_string(),
                fs_(r.measure_e),
                fs_(r.bound),
                r.chain_holds.to_string(),
                r.bound_holds.to_string(),
                ok.to_string(),
            ]);
            pts.push((idx as f64, r.measure_e.log2() - r.bound.log2()));
            reports.push(r);
            idx += 1;
        }
        series.push(Series { name: format!("α = {a}, β = {b}"), points: pts });
    }
    Ok(RunOutput {
        table: t,
        report: json!({ "kind": "furstenberg", "rows": reports }),
        plots: vec![("furstenberg.svg".into(), svg_plot("|E| against the bound", "instance", "log2(|E| / bound)", &series))],
        files: vec![],
        failed,
    })
}

fn run_lemmas(p: &LemmasParams, seed: u64) -> Result<RunOutput> {
    let lemmas: Vec<String> = match &p.only {
        Some(o) => vec![o.clone()],
        None => p.lemmas.clone(),
    };
    let mut suites = Vec::new();
    for l in &lemmas {
        let s = match p.instance {
            Some(i) => collect_suite(l, seed, vec![case_record(l, seed, i)]),
            None => run_suite(l, p.n, seed)?,
        };
        suites.push(s);
    }
    let mut t = Table::new(&["lemma", "n", "passed", "failed", "preconditions", "errors", "min_margin", "pass"]);
    for s in &suites {
        t.push(vec![
            s.lemma.clone(),
            s.n.to_string(),
            s.passed.to_string(),
            s.failed.to_string(),
            s.preconditions.to_string(),
            s.errors.to_string(),
            fs_(s.min_margin),
            s.ok().to_string(),
        ]);
    }
    let failed = suites.iter().any(|s| !s.ok());
    let summary: Vec<serde_json::Value> = suites
        .iter()
        .map(|s| {
            json!({
                "lemma": s.lemma, "n": s.n, "passed": s.passed, "failed": s.failed,
                "preconditions": s.preconditions, "errors": s.errors, "min_margin": s.min_margin,
                "failures": s.cases.iter().filter(|c| c.repro.is_some()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let pts: Vec<(f64, f64)> = suites.iter().enumerate().map(|(i, s)| (i as f64, s.min_margin.log10())).collect();
    Ok(RunOutput {
        table: t,
        report: json!({ "kind": "lemmas", "seed": seed, "suites": summary }),
        plots: vec![("lemmas.svg".into(), svg_plot("smallest rhs/lhs per lemma", "lemma index", "log10 margin", &[Series { name: "margin".into(), points: pts }]))],
        files: vec![
            ("lemmas.json".into(), suites_to_json(&suites)?.into_bytes()),
            ("junit.xml".into(), suites_to_junit(&suites).into_bytes()),
        ],
        failed,
    })
}

/// Built-in tube-volume cases: polynomial, ball radius.
pub fn wongkew_case(name: &str) -> Option<(MPoly, f64)> {
    match name {
        "strip" => Some((MPoly { nvars: 2, terms: vec![(1.0, vec![1, 0])] }, 1.0)),
        "annulus" => Some((
            MPoly { nvars: 2, terms: vec![(1.0, vec![2, 0]), (1.0, vec![0, 2]), (-1.0, vec![0, 0])] },
            1.25,
        )),
        "sphere" => Some((
            MPoly { nvars: 3, terms: vec![(1.0, vec![2, 0, 0]), (1.0, vec![0, 2, 0]), (1.0, vec![0, 0, 2]), (-1.0, vec![0, 0, 0])] },
            1.25,
        )),
        _ => None,
    }
}

fn run_wongkew(p: &WongkewParams, seed: u64) -> Result<RunOutput> {
    let mut t = Table::new(&["case", "n", "degree", "rho", "r", "estimate", "sigma", "ci_low", "ci_high", "bound", "pass"]);
    let mut reports = Vec::new();
    let mut failed = false;
    let mut pts = Vec::new();
    for (i, c) in p.cases.iter().enumerate() {
        let (q, r) = wongkew_case(c).ok_or_else(|| cfg_err(format!("params.cases[{i}]"), "unknown case"))?;
        let center = vec![0.0; q.nvars];
        let w = wongkew_volume(&q, p.rho, r, &center, p.samples, seed.wrapping_add(i as u64), p.c)?;
        failed |= !w.report.pass;
        t.push(vec![
            c.clone(),
            q.nvars.to_string(),
            q.degree().to_string(),
            fs_(p.rho),
            fs_(r),
            fs_(w.estimate),
            fs_(w.sigma),
            fs_(w.ci_low),
            fs_(w.ci_high),
            fs_(w.report.rhs),
            w.report.pass.to_string(),
        ]);
        pts.push((i as f64, w.estimate / w.report.rhs));
        reports.push(json!({ "case": c, "result": w }));
    }
    Ok(RunOutput {
        table: t,
        report: json!({ "kind": "wongkew", "proxy": "|Q| / max(|∇Q|, floor) <= ρ", "cases": reports }),
        plots: vec![("wongkew.svg".into(), svg_plot("estimate / bound", "case", "ratio", &[Series { name: "ratio".into(), points: pts }]))],
        files: vec![],
        failed,
    })
}

/// Markdown summary of several result directories plus the warnings for
/// directories that were skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub markdown: String,
    pub warnings: Vec<String>,
}

struct Loaded {
    dir: PathBuf,
    manifest: Manifest,
    table: Table,
}

pub fn report(dirs: &[PathBuf]) -> Result<Summary> {
    if dirs.is_empty() {
        return Err(Error::Precondition("report needs at least one result directory".into()));
    }
    let mut warnings = Vec::new();
    let mut runs: Vec<Loaded> = Vec::new();
    for d in dirs {
        let mpath = d.join("manifest.json");
        let manifest: Manifest = match fs::read_to_string(&mpath) {
            Ok(s) => match serde_json::from_str(&s) {
                Ok(m) => m,
                Err(e) => {
                    warnings.push(format!("skipping {}: unreadable manifest ({e})", d.display()));
                    continue;
                }
            },
            Err(_) => {
                warnings.push(format!("skipping {}: no manifest.json", d.display()));
                continue;
            }
        };
        let table = match fs::read(d.join("results.csv")) {
            Ok(b) => Table::from_csv(&b)?,
            Err(_) => {
                warnings.push(format!("{}: results.csv missing", d.display()));
                Table::default()
            }
        };
        runs.push(Loaded { dir: d.clone(), manifest, table });
    }
    runs.sort_by(|a, b| (a.manifest.kind, &a.dir).cmp(&(b.manifest.kind, &b.dir)));
    let mut md = String::from("# Experiment report\n");
    let mut rollup: BTreeMap<Kind, (usize, usize, usize)> = BTreeMap::new();
    let mut current: Option<Kind> = None;
    for r in &runs {
        let kind = r.manifest.kind;
        if current != Some(kind) {
            let _ = write!(md, "\n## {}\n\nChecked inequality: {}\n", kind.name(), kind.anchor());
            current = Some(kind);
        }
        let pass_col = r.table.header.iter().position(|h| h == "pass");
        let (mut pass, mut fail) = (0, 0);
        if let Some(c) = pass_col {
            for row in &r.table.rows {
                match row.get(c).map(String::as_str) {
                    Some("true") => pass += 1,
                    Some("false") => fail += 1,
                    _ => {}
                }
            }
        }
        let e = rollup.entry(kind).or_default();
        e.0 += 1;
        e.1 += pass;
        e.2 += fail;
        let seed = r.manifest.seed.map_or("none".to_string(), |s| s.to_string());
        let _ = write!(
            md,
            "\n### {}\n\nseed {seed}, config {}, version {}\n\n",
            r.dir.file_name().map_or_else(|| r.dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
            &r.manifest.config_hash[..12.min(r.manifest.config_hash.len())],
            r.manifest.version
        );
        if !r.table.header.is_empty() {
            let _ = writeln!(md, "| {} |", r.table.header.join(" | "));
            let _ = writeln!(md, "|{}", "---|".repeat(r.table.header.len()));
            for row in &r.table.rows {
                let _ = writeln!(md, "| {} |", row.join(" | "));
            }
        }
        let _ = writeln!(md, "\nRows passing: {pass}, failing: {fail}");
    }
    md.push_str("\n## Roll-up\n\n| kind | runs | rows passing | rows failing |\n|---|---|---|---|\n");
    for (k, (n, p, f)) in &rollup {
        let _ = writeln!(md, "| {} | {n} | {p} | {f} |", k.name());
    }
    Ok(Summary { markdown: md, warnings })
}

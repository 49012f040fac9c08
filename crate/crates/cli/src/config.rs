//! Manifold configurations: TOML on disk, validated and parsed eagerly.

use std::collections::BTreeMap;
use std::path::Path;

use courant_core::chartfield::{Chart, Expr, Kind, Mat, TensorField};
use courant_core::genmetric::{GenMetric, MetricPair};
use courant_core::sampling::{sample_points, Sampling};
use serde::Deserialize;
use thiserror::Error;

use crate::suites::Suite;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed config: {0}")]
    Format(String),
    #[error("{path}: {message}")]
    Entry { path: String, message: String },
    #[error("unknown bundled config `{0}`")]
    UnknownBundled(String),
}

fn entry_err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Entry {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Pass,
    Fail,
}

type RawMatrix = Vec<Vec<String>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default = "default_expect")]
    expect: Expect,
    #[serde(default)]
    suites: Vec<String>,
    chart: RawChart,
    metric: RawMetric,
    #[serde(default)]
    structures: RawStructures,
    #[serde(default)]
    sampling: RawSampling,
}

fn default_expect() -> Expect {
    Expect::Pass
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    coords: Vec<String>,
    domain: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    gamma: RawMatrix,
    psi: Option<RawMatrix>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStructures {
    #[serde(rename = "F")]
    f: Option<RawMatrix>,
    #[serde(rename = "P")]
    p: Option<RawMatrix>,
    theta: Option<RawMatrix>,
    #[serde(default)]
    twist: Vec<RawTwist>,
    tau: Option<RawTau>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTwist {
    at: [String; 3],
    value: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTau {
    kind: TauKind,
    theta: Option<RawMatrix>,
    mu: Option<RawMatrix>,
    #[serde(rename = "P")]
    p: Option<RawMatrix>,
    #[serde(rename = "W")]
    w: Option<RawMatrix>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    samples: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauKind {
    /// Image graph ♭θ, form µ.
    TwoForm,
    /// Image graph ♯P, bivector W.
    Bivector,
}

#[derive(Debug, Clone)]
pub struct TauSpec {
    pub kind: TauKind,
    /// θ or P.
    pub graph: Mat,
    /// µ or W.
    pub form: Mat,
}

/// A fully parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct ManifoldConfig {
    pub name: String,
    pub description: String,
    pub expect: Expect,
    pub chart: Chart,
    pub pair: MetricPair,
    pub metric: GenMetric,
    pub f: Option<Mat>,
    pub p: Option<Mat>,
    pub theta: Option<Mat>,
    pub twist: Option<TensorField>,
    pub tau: Option<TauSpec>,
    pub suites: Vec<Suite>,
    pub sampling: Sampling,
    /// Every DSL entry with its path, in file order.
    pub entries: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symmetry {
    Any,
    Symmetric,
    Skew,
}

struct Loader<'a> {
    chart: &'a Chart,
    probe: Vec<Vec<f64>>,
    entries: Vec<(String, Expr)>,
}

impl Loader<'_> {
    fn scalar(&mut self, path: String, text: &str) -> Result<Expr, ConfigError> {
        let e = self.chart.parse(text).map_err(|e| entry_err(&path, e.to_string()))?;
        self.entries.push((path, e.clone()));
        Ok(e)
    }

    fn matrix(&mut self, path: &str, raw: &RawMatrix, sym: Symmetry) -> Result<Mat, ConfigError> {
        let m = self.chart.dim();
        if raw.len() != m {
            return Err(entry_err(path, format!("expected {m} rows, got {}", raw.len())));
        }
        let mut out = Mat::zeros(m, m);
        for (i, row) in raw.iter().enumerate() {
            if row.len() != m {
                return Err(entry_err(format!("{path}[{i}]"), format!("expected {m} entries, got {}", row.len())));
            }
            for (j, t) in row.iter().enumerate() {
                out.set(i, j, self.scalar(format!("{path}[{i}][{j}]"), t)?);
            }
        }
        let sign = match sym {
            Symmetry::Any => return Ok(out),
            Symmetry::Symmetric => 1.0,
            Symmetry::Skew => -1.0,
        };
        let word = if sign > 0.0 { "symmetric" } else { "antisymmetric" };
        for i in 0..m {
            for j in i..m {
                let d = out.get(i, j) - &out.get(j, i).scale(sign);
                for p in &self.probe {
                    let v = d.eval(p).map_err(|e| entry_err(format!("{path}[{i}][{j}]"), e.to_string()))?;
                    if v.abs() > 1e-12 {
                        return Err(entry_err(
                            format!("{path}[{i}][{j}]"),
                            format!("matrix is not {word}: entry differs from {path}[{j}][{i}] at {p:?}"),
                        ));
                    }
                }
            }
        }
        Ok(out)
    }
}

impl ManifoldConfig {
    pub fn from_toml(text: &str) -> Result<ManifoldConfig, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Format(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<ManifoldConfig, ConfigError> {
        let domain: Vec<(f64, f64)> = raw.chart.domain.iter().map(|[a, b]| (*a, *b)).collect();
        let chart = Chart::new(&raw.chart.coords, &domain).map_err(|e| entry_err("chart", e.to_string()))?;
        let m = chart.dim();
        let defaults = Sampling::default();
        let sampling = Sampling {
            samples: raw.sampling.samples.unwrap_or(defaults.samples),
            seed: raw.sampling.seed.unwrap_or(defaults.seed),
            tol: raw.sampling.tol.unwrap_or(defaults.tol),
        };
        if !(sampling.tol > 0.0) {
            return Err(entry_err("sampling.tol", "tolerance must be positive"));
        }
        let mut ld = Loader {
            chart: &chart,
            probe: sample_points(&chart, 4, 0),
            entries: Vec::new(),
        };
        let gamma = ld.matrix("metric.gamma", &raw.metric.gamma, Symmetry::Symmetric)?;
        let psi = match &raw.metric.psi {
            Some(r) => ld.matrix("metric.psi", r, Symmetry::Skew)?,
            None => Mat::zeros(m, m),
        };
        let pair = MetricPair::new(gamma, psi).map_err(|e| entry_err("metric", e.to_string()))?;
        let pts = sample_points(&chart, sampling.samples, sampling.seed);
        pair.check_positive(&pts).map_err(|e| entry_err("metric.gamma", e.to_string()))?;
        let metric = GenMetric::new(pair.clone());
        let s = &raw.structures;
        let f = s.f.as_ref().map(|r| ld.matrix("structures.F", r, Symmetry::Any)).transpose()?;
        let p = s.p.as_ref().map(|r| ld.matrix("structures.P", r, Symmetry::Skew)).transpose()?;
        let theta = s.theta.as_ref().map(|r| ld.matrix("structures.theta", r, Symmetry::Skew)).transpose()?;
        let twist = if s.twist.is_empty() {
            None
        } else {
            let mut comps: BTreeMap<[usize; 3], Expr> = BTreeMap::new();
            for (n, t) in s.twist.iter().enumerate() {
                let path = format!("structures.twist[{n}]");
                let mut idx = [0usize; 3];
                for (k, name) in t.at.iter().enumerate() {
                    idx[k] = chart
                        .coord_index(name)
                        .ok_or_else(|| entry_err(format!("{path}.at[{k}]"), format!("unknown coordinate `{name}`")))?;
                }
                let mut sorted = idx;
                sorted.sort_unstable();
                if sorted[0] == sorted[1] || sorted[1] == sorted[2] {
                    return Err(entry_err(format!("{path}.at"), "indices must be distinct"));
                }
                let parity = (0..3).flat_map(|a| (a + 1..3).map(move |b| (a, b))).filter(|&(a, b)| idx[a] > idx[b]).count();
                let v = ld.scalar(format!("{path}.value"), &t.value)?;
                let v = if parity % 2 == 1 { -v } else { v };
                if comps.insert(sorted, v).is_some() {
                    return Err(entry_err(format!("{path}.at"), "component given twice"));
                }
            }
            Some(TensorField::antisym_from_fn(Kind::ThreeForm, m, |ix| {
                comps.get(&[ix[0], ix[1], ix[2]]).cloned().unwrap_or_else(Expr::zero)
            }))
        };
        let tau = match &s.tau {
            None => None,
            Some(t) => {
                let (gname, fname, g, w) = match t.kind {
                    TauKind::TwoForm => ("theta", "mu", &t.theta, &t.mu),
                    TauKind::Bivector => ("P", "W", &t.p, &t.w),
                };
                let stray = match t.kind {
                    TauKind::TwoForm => t.p.is_some() || t.w.is_some(),
                    TauKind::Bivector => t.theta.is_some() || t.mu.is_some(),
                };
                if stray {
                    return Err(entry_err("structures.tau", "entries do not match the declared kind"));
                }
                let graph = match g {
                    Some(r) => ld.matrix(&format!("structures.tau.{gname}"), r, Symmetry::Skew)?,
                    None => Mat::zeros(m, m),
                };
                let form = w
                    .as_ref()
                    .ok_or_else(|| entry_err(format!("structures.tau.{fname}"), "missing"))
                    .and_then(|r| ld.matrix(&format!("structures.tau.{fname}"), r, Symmetry::Skew))?;
                Some(TauSpec { kind: t.kind, graph, form })
            }
        };
        let mut suites = Vec::new();
        for (n, name) in raw.suites.iter().enumerate() {
            let su: Suite = name.parse().map_err(|e: String| entry_err(format!("suites[{n}]"), e))?;
            if su == Suite::All {
                return Err(entry_err(format!("suites[{n}]"), "`all` is implied, list concrete suites"));
            }
            if !suites.contains(&su) {
                suites.push(su);
            }
        }
        let entries = ld.entries;
        let mut cfg = ManifoldConfig {
            name: raw.name,
            description: raw.description,
            expect: raw.expect,
            chart,
            pair,
            metric,
            f,
            p,
            theta,
            twist,
            tau,
            suites,
            sampling,
            entries,
        };
        if cfg.suites.is_empty() {
            cfg.suites = Suite::concrete().into_iter().filter(|s| s.applies(&cfg)).collect();
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
}

pub fn load_config(path: &Path) -> Result<ManifoldConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ManifoldConfig::from_toml(&text)
}

/// A path on disk, or the name of a bundled config.
pub fn resolve(spec: &str) -> Result<ManifoldConfig, ConfigError> {
    let p = Path::new(spec);
    if p.exists() {
        return load_config(p);
    }
    match crate::bundled::source(spec) {
        Some(text) => ManifoldConfig::from_toml(text),
        None if spec.ends_with(".toml") || spec.contains('/') => load_config(p),
        None => Err(ConfigError::UnknownBundled(spec.to_string())),
    }
}

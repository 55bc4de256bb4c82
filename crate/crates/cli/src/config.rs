//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, keys may appear once. Lists are
//! comma separated. Parameter grids are written per axis as `lo:hi:count`,
//! axes separated by commas and disjoint pieces by semicolons, for example
//! `grid = -2:-1:6, -1:1:6; 1:2:6, -1:1:6`. Reals accept `pi` forms such as
//! `pi/2` or `2pi`. Relative paths are resolved against the config file.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `name` | experiment name | file stem |
//! | `source` | `synthetic` or `mnist` | `synthetic` |
//! | `shape` | `disk`, `ellipse`, `rectangle`, `annulus` | `disk` |
//! | `center` | shape center | `0, 0` |
//! | `radius` | disk radius | `1` |
//! | `radii` | ellipse semi-axes | `1, 0.5` |
//! | `lo`, `hi` | rectangle corners | |
//! | `outer`, `inner` | annulus semi-axes | `1, 0.6` and `0.6, 0.3` |
//! | `family` | `translation`, `dilation`, `rotation`, `deformation` | |
//! | `grid` | parameter grid (translation, dilation, deformation) | |
//! | `angles` | number of uniform rotation angles | |
//! | `mode` | `pushforward` or `raster` | `pushforward` |
//! | `resolution` | raster cells, one value or two | `32` |
//! | `frame` | `xlo, ylo, xhi, yhi` | 1.5 x shape extent; `[-2,2]^2` for deformation |
//! | `images`, `labels` | IDX files (mnist) | |
//! | `per_class` | `label:count, ...` (mnist) | |
//! | `embed_dim` | one or more embedding dimensions | `2` |
//! | `method` | `wassmap`, `isomap` or `both` | `wassmap` |
//! | `isomap` | graph rules `eps:<r>` / `knn:<k>`, comma separated | `knn:8` |
//! | `largest_component` | embed the largest graph component when disconnected | `false` |
//! | `with_scale` | allow a global scale in recovery alignment | `false` |
//! | `seed` | subsampling seed | `0` |
//! | `threads` | worker threads, `0` for all cores | `0` |

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use wassmap_core::synth::{uniform_angles, uniform_grid};
use wassmap_core::{Family, Frame, GraphRule, ManifoldSpec, Mode, ShapeSpec};

use crate::error::{CliError, Result};

const KEYS: &[&str] = &[
    "name",
    "source",
    "shape",
    "center",
    "radius",
    "radii",
    "lo",
    "hi",
    "outer",
    "inner",
    "family",
    "grid",
    "angles",
    "mode",
    "resolution",
    "frame",
    "images",
    "labels",
    "per_class",
    "embed_dim",
    "method",
    "isomap",
    "largest_component",
    "with_scale",
    "seed",
    "threads",
];

const PATH_KEYS: &[&str] = &["images", "labels"];

/// Raw settings: key to (value, line number).
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    path: PathBuf,
    values: BTreeMap<String, (String, usize)>,
}

impl Settings {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| CliError::Config { path: path.to_path_buf(), line, message };
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, mut value) = (key.trim().to_string(), value.trim().to_string());
            if !KEYS.contains(&key.as_str()) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if PATH_KEYS.contains(&key.as_str()) && Path::new(&value).is_relative() {
                value = base.join(&value).to_string_lossy().into_owned();
            }
            if values.insert(key.clone(), (value, line)).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        let mut settings = Self { path: path.to_path_buf(), values };
        if !settings.values.contains_key("name") {
            let stem = path.file_stem().map_or("experiment".into(), |s| s.to_string_lossy().into_owned());
            settings.values.insert("name".into(), (stem, 0));
        }
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let io = |source| CliError::Io { path: path.to_path_buf(), source };
        let text = std::fs::read_to_string(path).map_err(io)?;
        Self::parse(&text, &std::fs::canonicalize(path).map_err(io)?)
    }

    /// Replaces (or adds) a setting, as done for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), (value.into(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    /// Canonical text form: sorted keys, no comments.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, (v, _)) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn error(&self, key: &str, message: impl Into<String>) -> CliError {
        let line = self.values.get(key).map_or(0, |(_, l)| *l);
        CliError::Config { path: self.path.clone(), line, message: format!("{key}: {}", message.into()) }
    }

    fn parsed<T>(&self, key: &str, default: Option<T>, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        match self.get(key) {
            Some(v) => parse(v).map_err(|m| self.error(key, m)),
            None => default.ok_or_else(|| self.error(key, "missing required key")),
        }
    }
}

pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().replace(' ', "");
    if let Some(at) = t.find("pi") {
        let (coef, rest) = t.split_at(at);
        let coef = coef.trim_end_matches('*');
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| format!("bad number `{s}`"))?,
        };
        let rest = &rest[2..];
        let div = match rest.strip_prefix('/') {
            Some(d) => d.parse::<f64>().map_err(|_| format!("bad number `{s}`"))?,
            None if rest.is_empty() => 1.0,
            None => return Err(format!("bad number `{s}`")),
        };
        return Ok(c * PI / div);
    }
    t.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
}

fn reals(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}

fn pair(s: &str) -> std::result::Result<[f64; 2], String> {
    match reals(s)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        other => Err(format!("expected 2 values, got {}", other.len())),
    }
}

fn unsigned(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

/// `lo:hi:count` per axis, pieces separated by `;`.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut points = Vec::new();
    for piece in s.split(';').filter(|p| !p.trim().is_empty()) {
        let mut ranges = Vec::new();
        let mut counts = Vec::new();
        for axis in piece.split(',') {
            let parts: Vec<&str> = axis.split(':').collect();
            let [lo, hi, n] = parts.as_slice() else {
                return Err(format!("axis `{}` is not lo:hi:count", axis.trim()));
            };
            ranges.push((parse_real(lo)?, parse_real(hi)?));
            counts.push(unsigned(n)?);
        }
        points.extend(uniform_grid(&ranges, &counts));
    }
    if points.is_empty() {
        return Err("grid has no points".into());
    }
    Ok(points)
}

pub fn parse_rule(s: &str) -> std::result::Result<GraphRule, String> {
    let (kind, value) = s.trim().split_once(':').ok_or_else(|| format!("rule `{s}` is not eps:<r> or knn:<k>"))?;
    match kind.trim() {
        "eps" => Ok(GraphRule::Epsilon(parse_real(value)?)),
        "knn" => Ok(GraphRule::Knn(unsigned(value)?)),
        other => Err(format!("unknown graph rule `{other}`")),
    }
}

pub fn rule_tag(rule: GraphRule) -> String {
    match rule {
        GraphRule::Epsilon(e) => format!("eps{e}"),
        GraphRule::Knn(k) => format!("knn{k}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub per_class: BTreeMap<u8, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic(ManifoldSpec),
    Mnist(MnistSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Wassmap,
    Isomap,
    Both,
}

impl Method {
    pub fn wassmap(self) -> bool {
        matches!(self, Method::Wassmap | Method::Both)
    }

    pub fn isomap(self) -> bool {
        matches!(self, Method::Isomap | Method::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: Source,
    pub embed_dims: Vec<usize>,
    pub method: Method,
    pub isomap_rules: Vec<GraphRule>,
    pub largest_component: bool,
    pub with_scale: bool,
    pub seed: u64,
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let name = s.get("name").unwrap_or("experiment").to_string();
        let source = match s.get("source").unwrap_or("synthetic") {
            "synthetic" => Source::Synthetic(manifold(s)?),
            "mnist" => Source::Mnist(MnistSource {
                images: PathBuf::from(s.parsed("images", None, |v| Ok(v.to_string()))?),
                labels: PathBuf::from(s.parsed("labels", None, |v| Ok(v.to_string()))?),
                per_class: s.parsed("per_class", None, per_class)?,
            }),
            other => return Err(s.error("source", format!("unknown source `{other}`"))),
        };
        let embed_dims = s.parsed("embed_dim", Some(vec![2]), |v| {
            let dims = v.split(',').map(unsigned).collect::<std::result::Result<Vec<_>, _>>()?;
            if dims.iter().any(|d| *d == 0) {
                return Err("dimensions must be at least 1".into());
            }
            Ok(dims)
        })?;
        let method = s.parsed("method", Some(Method::Wassmap), |v| match v {
            "wassmap" => Ok(Method::Wassmap),
            "isomap" => Ok(Method::Isomap),
            "both" => Ok(Method::Both),
            other => Err(format!("unknown method `{other}`")),
        })?;
        let isomap_rules = s.parsed("isomap", Some(vec![GraphRule::Knn(8)]), |v| v.split(',').map(parse_rule).collect())?;
        Ok(Self {
            name,
            source,
            embed_dims,
            method,
            isomap_rules,
            largest_component: s.parsed("largest_component", Some(false), boolean)?,
            with_scale: s.parsed("with_scale", Some(false), boolean)?,
            seed: s.parsed("seed", Some(0), |v| v.trim().parse::<u64>().map_err(|e| e.to_string()))?,
            threads: s.parsed("threads", Some(0), unsigned)?,
        })
    }
}

fn per_class(v: &str) -> std::result::Result<BTreeMap<u8, usize>, String> {
    let mut out = BTreeMap::new();
    for item in v.split(',') {
        let (label, count) = item.split_once(':').ok_or_else(|| format!("`{item}` is not label:count"))?;
        let label = label.trim().parse::<u8>().map_err(|_| format!("bad label `{label}`"))?;
        if out.insert(label, unsigned(count)?).is_some() {
            return Err(format!("label {label} listed twice"));
        }
    }
    Ok(out)
}

fn manifold(s: &Settings) -> Result<ManifoldSpec> {
    let center = s.parsed("center", Some([0.0, 0.0]), pair)?;
    let base = match s.get("shape").unwrap_or("disk") {
        "disk" => ShapeSpec::Disk { center, radius: s.parsed("radius", Some(1.0), parse_real)? },
        "ellipse" => ShapeSpec::Ellipse { center, radii: s.parsed("radii", Some([1.0, 0.5]), pair)? },
        "rectangle" => ShapeSpec::Rectangle { lo: s.parsed("lo", None, pair)?, hi: s.parsed("hi", None, pair)? },
        "annulus" => ShapeSpec::Annulus {
            center,
            outer: s.parsed("outer", Some([1.0, 0.6]), pair)?,
            inner: s.parsed("inner", Some([0.6, 0.3]), pair)?,
        },
        other => return Err(s.error("shape", format!("unknown shape `{other}`"))),
    };
    let family_name = s.parsed("family", None, |v| Ok(v.to_string()))?;
    let family = match family_name.as_str() {
        "translation" => Family::Translation(s.parsed("grid", None, parse_grid)?),
        "dilation" => Family::Dilation(s.parsed("grid", None, parse_grid)?),
        "rotation" => Family::Rotation(uniform_angles(s.parsed("angles", None, unsigned)?)),
        "deformation" => {
            let grid = s.parsed("grid", None, parse_grid)?;
            if let Some(bad) = grid.iter().find(|p| p.len() != 2) {
                return Err(s.error("grid", format!("deformation parameters are 2-D, got {}", bad.len())));
            }
            Family::GridDeformation(grid.iter().map(|p| [p[0], p[1]]).collect())
        }
        other => return Err(s.error("family", format!("unknown family `{other}`"))),
    };
    let mode = s.parsed("mode", Some(Mode::Pushforward), |v| match v {
        "pushforward" => Ok(Mode::Pushforward),
        "raster" => Ok(Mode::Raster),
        other => Err(format!("unknown mode `{other}`")),
    })?;
    let resolution = s.parsed("resolution", Some([32, 32]), |v| {
        let r = v.split(',').map(unsigned).collect::<std::result::Result<Vec<_>, _>>()?;
        match r.as_slice() {
            [n] => Ok([*n, *n]),
            [a, b] => Ok([*a, *b]),
            _ => Err("expected one or two values".into()),
        }
    })?;
    let default_frame = if matches!(family, Family::GridDeformation(_)) {
        Frame::square(2.0)
    } else {
        let (lo, hi) = base.bounds();
        let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let h = [(hi[0] - lo[0]) * 0.75, (hi[1] - lo[1]) * 0.75];
        Frame { lo: [c[0] - h[0], c[1] - h[1]], hi: [c[0] + h[0], c[1] + h[1]] }
    };
    let frame = s.parsed("frame", Some(default_frame), |v| match reals(v)?.as_slice() {
        [a, b, c, d] => Frame::new([*a, *b], [*c, *d]).map_err(|e| e.to_string()),
        _ => Err("expected xlo, ylo, xhi, yhi".into()),
    })?;
    Ok(ManifoldSpec { base, family, mode, resolution, frame })
}

//! Pipeline stages operating on an experiment directory.
//!
//! `generate` writes the measures and ground truth, `distances` the exact
//! `W_2^2` matrix (through a per-pair cache keyed by measure digests),
//! `embed` and `isomap` the embeddings, and `report` the recovery metrics.
//! Every later stage reads the canonical `config.txt` written by `generate`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wassmap_core::evalign::{align_to_truth, knn_separation, procrustes, AlignmentReport};
use wassmap_core::ingest::{load_idx, subsample, to_measures};
use wassmap_core::isomap::{build_graph, geodesic_squared_distances, geodesic_squared_distances_largest};
use wassmap_core::synth::base_measure;
use wassmap_core::transport::pairwise_squared_by;
use wassmap_core::{
    classical_mds, solve_w2, DiscreteMeasure, Embedding, Family, GraphRule, Mode, SquaredDistanceMatrix,
};

use crate::config::{rule_tag, ExperimentConfig, Settings, Source};
use crate::error::{CliError, Result, StageContext};
use crate::svg;

pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MEASURE_DIR: &str = "measures";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SCALED_TRUTH_FILE: &str = "truth_scaled.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const PIXELS_FILE: &str = "pixels.csv";
pub const DISTANCES_FILE: &str = "distances.csv";
pub const CACHE_FILE: &str = "distance_cache.csv";
pub const TIMINGS_FILE: &str = "timings.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

/// Describes the generated items of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub source: String,
    pub family: Option<String>,
    pub mode: Option<String>,
    pub count: usize,
    pub dim: usize,
    pub digests: Vec<String>,
    pub atom_counts: Vec<usize>,
    /// Marginal second moments of the undeformed base measure.
    pub base_marginal_moments: Option<Vec<f64>>,
    /// Checksum of the IDX input files.
    pub input_digest: Option<String>,
    pub source_indices: Option<Vec<usize>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn artifact(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Artifact { path: path.to_path_buf(), message: message.into() }
}

fn require(dir: &Path, names: &[&str]) -> Result<()> {
    let missing: Vec<String> = names.iter().filter(|n| !dir.join(n).exists()).map(|n| n.to_string()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::MissingArtifacts { dir: dir.to_path_buf(), missing })
    }
}

fn rows_to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn csv_to_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| artifact(path, format!("bad number `{v}`: {e}"))))
                .collect()
        })
        .collect()
}

fn matrix_of(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    wassmap_core::evalign::points_matrix(rows).stage("truth")
}

/// Records a stage runtime in `timings.json`.
fn record_time(dir: &Path, stage: &str, started: Instant) -> Result<()> {
    let path = dir.join(TIMINGS_FILE);
    let mut timings: BTreeMap<String, f64> =
        fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str(&t).ok()).unwrap_or_default();
    timings.insert(stage.to_string(), started.elapsed().as_secs_f64());
    write(&path, serde_json::to_string_pretty(&timings).expect("timings serialize"))
}

pub fn load_config(dir: &Path) -> Result<(Settings, ExperimentConfig)> {
    require(dir, &[CONFIG_FILE])?;
    let settings = Settings::load(&dir.join(CONFIG_FILE))?;
    let config = ExperimentConfig::from_settings(&settings)?;
    Ok((settings, config))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    require(dir, &[MANIFEST_FILE])?;
    let path = dir.join(MANIFEST_FILE);
    serde_json::from_str(&read(&path)?).map_err(|e| artifact(&path, e.to_string()))
}

/// Clears artifacts derived from a previous generation. The distance cache
/// is kept: it is keyed by content and stays valid.
fn clear_outputs(dir: &Path) -> Result<()> {
    let measures = dir.join(MEASURE_DIR);
    if measures.exists() {
        fs::remove_dir_all(&measures).map_err(io_err(&measures))?;
    }
    let fixed = [TRUTH_FILE, SCALED_TRUTH_FILE, LABELS_FILE, PIXELS_FILE, DISTANCES_FILE, TIMINGS_FILE, REPORT_JSON, REPORT_TEXT];
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let derived = [".embedding.csv", ".eigenvalues.json", ".svg", ".kept.csv", ".graph.csv", ".error.txt"]
            .iter()
            .any(|s| name.ends_with(s));
        if derived || fixed.contains(&name.as_str()) {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Writes the measure family, ground truth or labels, pixel vectors and the
/// canonical config into `dir`.
pub fn generate(settings: &Settings, dir: &Path) -> Result<Manifest> {
    let started = Instant::now();
    let config = ExperimentConfig::from_settings(settings)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    clear_outputs(dir)?;
    write(&dir.join(CONFIG_FILE), settings.to_text())?;

    let (measures, pixels, mut manifest) = match &config.source {
        Source::Synthetic(spec) => {
            let family = spec.generate().stage("generate")?;
            write(&dir.join(TRUTH_FILE), rows_to_csv(&family.parameters))?;
            let moments = base_measure(&spec.base, spec.resolution, spec.frame).ok().map(|b| b.marginal_second_moments());
            if let (Family::Dilation(thetas), Some(m)) = (&spec.family, &moments) {
                let scaled: Vec<Vec<f64>> =
                    thetas.iter().map(|t| t.iter().zip(m).map(|(t, m)| t * m.sqrt()).collect()).collect();
                write(&dir.join(SCALED_TRUTH_FILE), rows_to_csv(&scaled))?;
            }
            let pixels: Vec<Vec<f64>> = family.images.iter().map(|img| img.values().to_vec()).collect();
            let manifest = Manifest {
                name: config.name.clone(),
                source: "synthetic".into(),
                family: Some(family_name(&spec.family).into()),
                mode: Some(if spec.mode == Mode::Pushforward && !matches!(spec.family, Family::GridDeformation(_)) {
                    "pushforward".into()
                } else {
                    "raster".into()
                }),
                count: 0,
                dim: 2,
                digests: Vec::new(),
                atom_counts: Vec::new(),
                base_marginal_moments: moments,
                input_digest: None,
                source_indices: None,
            };
            (family.measures, pixels, manifest)
        }
        Source::Mnist(m) => {
            let set = load_idx(&m.images, &m.labels).stage("load")?;
            let set = subsample(&set, &m.per_class, config.seed).stage("subsample")?;
            let measures = to_measures(&set).stage("measures")?;
            let labels: String = set.labels.iter().map(|l| format!("{l}\n")).collect();
            write(&dir.join(LABELS_FILE), labels)?;
            let manifest = Manifest {
                name: config.name.clone(),
                source: "mnist".into(),
                family: None,
                mode: None,
                count: 0,
                dim: 2,
                digests: Vec::new(),
                atom_counts: Vec::new(),
                base_marginal_moments: None,
                input_digest: Some(set.digest.clone()),
                source_indices: Some(set.source_indices.clone()),
            };
            (measures, set.pixel_vectors(), manifest)
        }
    };

    let mdir = dir.join(MEASURE_DIR);
    fs::create_dir_all(&mdir).map_err(io_err(&mdir))?;
    for (i, mu) in measures.iter().enumerate() {
        write(&mdir.join(format!("{i:04}.json")), mu.to_json())?;
    }
    write(&dir.join(PIXELS_FILE), rows_to_csv(&pixels))?;
    manifest.count = measures.len();
    manifest.dim = measures.first().map_or(2, DiscreteMeasure::dim);
    manifest.digests = measures.iter().map(DiscreteMeasure::digest).collect();
    manifest.atom_counts = measures.iter().map(DiscreteMeasure::len).collect();
    write(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    record_time(dir, "generate", started)?;
    Ok(manifest)
}

fn family_name(f: &Family) -> &'static str {
    match f {
        Family::Translation(_) => "translation",
        Family::Dilation(_) => "dilation",
        Family::Rotation(_) => "rotation",
        Family::GridDeformation(_) => "deformation",
    }
}

pub fn load_measures(dir: &Path, manifest: &Manifest) -> Result<Vec<DiscreteMeasure>> {
    (0..manifest.count)
        .map(|i| {
            let path = dir.join(MEASURE_DIR).join(format!("{i:04}.json"));
            let mu = DiscreteMeasure::from_json(&read(&path)?).stage("load measures")?;
            if mu.digest() != manifest.digests[i] {
                return Err(artifact(&path, "content does not match the digest in the manifest"));
            }
            Ok(mu)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceSummary {
    pub pairs: usize,
    /// Pairs handed to the transport solver in this run.
    pub solved: usize,
    pub cached: usize,
}

/// Lines `digest_a,digest_b,value` with `digest_a <= digest_b`. Unparsable
/// lines (for example a line cut short by an interrupted run) are skipped.
fn load_cache(path: &Path) -> HashMap<(String, String), f64> {
    let Ok(text) = fs::read_to_string(path) else {
        return HashMap::new();
    };
    text.lines()
        .filter_map(|l| {
            let mut parts = l.split(',');
            let (a, b, v) = (parts.next()?, parts.next()?, parts.next()?);
            if parts.next().is_some() || a.len() != 64 || b.len() != 64 {
                return None;
            }
            Some(((a.to_string(), b.to_string()), v.parse::<f64>().ok()?))
        })
        .collect()
}

/// Computes the `W_2^2` matrix of the experiment's measures. Solved pairs are
/// appended to the cache as they finish, so an interrupted run resumes where
/// it stopped and a rerun makes no solver calls.
pub fn distances(dir: &Path) -> Result<DistanceSummary> {
    let started = Instant::now();
    let manifest = load_manifest(dir)?;
    let measures = load_measures(dir, &manifest)?;
    let cache_path = dir.join(CACHE_FILE);
    let cache = load_cache(&cache_path);
    let file = OpenOptions::new().create(true).append(true).open(&cache_path).map_err(io_err(&cache_path))?;
    let sink = Mutex::new(file);
    let solved = AtomicUsize::new(0);
    let cached = AtomicUsize::new(0);
    let digests = &manifest.digests;

    let w = pairwise_squared_by(&measures, |i, j, mu, nu| {
        let (a, b, first, second) = if digests[i] <= digests[j] {
            (&digests[i], &digests[j], mu, nu)
        } else {
            (&digests[j], &digests[i], nu, mu)
        };
        if a == b {
            cached.fetch_add(1, Ordering::Relaxed);
            return Ok(0.0);
        }
        if let Some(v) = cache.get(&(a.clone(), b.clone())) {
            cached.fetch_add(1, Ordering::Relaxed);
            return Ok(*v);
        }
        let value = solve_w2(first, second)?.cost;
        solved.fetch_add(1, Ordering::Relaxed);
        let mut f = sink.lock().expect("cache writer poisoned");
        // A failed cache write only costs a recomputation later.
        let _ = writeln!(f, "{a},{b},{value:e}");
        Ok(value)
    })
    .stage("distances")?;

    write(&dir.join(DISTANCES_FILE), w.to_csv())?;
    record_time(dir, "distances", started)?;
    let n = manifest.count;
    Ok(DistanceSummary {
        pairs: n * n.saturating_sub(1) / 2,
        solved: solved.into_inner(),
        cached: cached.into_inner(),
    })
}

fn embedding_files(dir: &Path, tag: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{tag}.embedding.csv")),
        dir.join(format!("{tag}.eigenvalues.json")),
        dir.join(format!("{tag}.svg")),
    )
}

fn read_labels(dir: &Path) -> Result<Option<Vec<u8>>> {
    let path = dir.join(LABELS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    read(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<u8>().map_err(|e| artifact(&path, e.to_string())))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Truth used for plots and recovery: the moment-scaled grid when present.
fn read_truth(dir: &Path) -> Result<Option<DMatrix<f64>>> {
    for name in [SCALED_TRUTH_FILE, TRUTH_FILE] {
        let path = dir.join(name);
        if path.exists() {
            return Ok(Some(matrix_of(&csv_to_rows(&path)?)?));
        }
    }
    Ok(None)
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn write_embedding(dir: &Path, tag: &str, title: &str, emb: &Embedding, kept: Option<&[usize]>) -> Result<()> {
    let (csv, eig, plot) = embedding_files(dir, tag);
    write(&csv, emb.to_csv())?;
    write(&eig, emb.spectrum_json())?;
    let labels = read_labels(dir)?.map(|l| match kept {
        Some(k) => k.iter().map(|&i| l[i]).collect::<Vec<u8>>(),
        None => l,
    });
    let overlay = match read_truth(dir)? {
        Some(t) if t.ncols() == emb.dim() => {
            let t = kept.map_or(t.clone(), |k| select_rows(&t, k));
            procrustes(&t, &emb.points, true).ok().map(|a| a.apply(&t))
        }
        _ => None,
    };
    write(&plot, svg::scatter(title, &emb.points, labels.as_deref(), overlay.as_ref()))
}

/// Classical MDS of the stored distance matrix for each requested dimension.
/// Returns the written tags.
pub fn embed(dir: &Path, dims: Option<&[usize]>) -> Result<Vec<String>> {
    let started = Instant::now();
    let (_, config) = load_config(dir)?;
    require(dir, &[DISTANCES_FILE])?;
    let w = SquaredDistanceMatrix::from_csv(&read(&dir.join(DISTANCES_FILE))?).stage("embed")?;
    let mut tags = Vec::new();
    for &d in dims.unwrap_or(&config.embed_dims) {
        let emb = classical_mds(&w, d).stage("embed")?;
        let tag = format!("wassmap-d{d}");
        write_embedding(dir, &tag, &format!("{}: Wassmap, d = {d}", config.name), &emb, None)?;
        tags.push(tag);
    }
    record_time(dir, "embed", started)?;
    Ok(tags)
}

/// Result of one ISOMAP run: the tag and either the embedded row count or
/// the failure message.
#[derive(Debug, Clone, PartialEq)]
pub struct IsomapOutcome {
    pub tag: String,
    pub result: std::result::Result<usize, String>,
}

/// ISOMAP on the stored pixel vectors for every rule and dimension. Failures
/// (for example a disconnected graph) are written to `<tag>.error.txt` and
/// returned rather than aborting the other runs.
pub fn isomap(dir: &Path, rules: Option<&[GraphRule]>, dims: Option<&[usize]>) -> Result<Vec<IsomapOutcome>> {
    let started = Instant::now();
    let (_, config) = load_config(dir)?;
    require(dir, &[PIXELS_FILE])?;
    let pixels = csv_to_rows(&dir.join(PIXELS_FILE))?;
    let mut outcomes = Vec::new();
    for &rule in rules.unwrap_or(&config.isomap_rules) {
        let graph = build_graph(&pixels, rule);
        let restricted = graph.as_ref().map_err(|e| e.to_string()).and_then(|g| {
            let r = if config.largest_component {
                geodesic_squared_distances_largest(g).map(|r| (r.distances, r.kept))
            } else {
                geodesic_squared_distances(g).map(|w| (w, (0..g.n).collect::<Vec<_>>()))
            };
            r.map_err(|e| e.to_string())
        });
        for &d in dims.unwrap_or(&config.embed_dims) {
            let tag = format!("isomap-{}-d{d}", rule_tag(rule));
            let error_path = dir.join(format!("{tag}.error.txt"));
            let outcome = restricted.as_ref().map_err(Clone::clone).and_then(|(w, kept)| {
                let emb = classical_mds(w, d).map_err(|e| e.to_string())?;
                Ok((emb, kept))
            });
            let result = match outcome {
                Ok((emb, kept)) => {
                    let title = format!("{}: ISOMAP {}, d = {d}", config.name, rule_tag(rule));
                    write_embedding(dir, &tag, &title, &emb, Some(kept))?;
                    let kept_csv: String = kept.iter().map(|k| format!("{k}\n")).collect();
                    write(&dir.join(format!("{tag}.kept.csv")), kept_csv)?;
                    if let Ok(g) = &graph {
                        write(&dir.join(format!("isomap-{}.graph.csv", rule_tag(rule))), g.to_edge_list())?;
                    }
                    if error_path.exists() {
                        fs::remove_file(&error_path).map_err(io_err(&error_path))?;
                    }
                    Ok(kept.len())
                }
                Err(message) => {
                    write(&error_path, format!("{message}\n"))?;
                    Err(message)
                }
            };
            outcomes.push(IsomapOutcome { tag, result });
        }
    }
    record_time(dir, "isomap", started)?;
    Ok(outcomes)
}

/// Algebraic least-squares circle through the first two columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: [f64; 2],
    pub radius: f64,
    /// Largest `| |p - c| - r |` divided by `r`.
    pub max_relative_deviation: f64,
}

pub fn fit_circle(points: &DMatrix<f64>) -> Option<CircleFit> {
    let n = points.nrows();
    if n < 3 || points.ncols() < 2 {
        return None;
    }
    // x^2 + y^2 + a x + b y + c = 0
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => points[(i, 0)],
        1 => points[(i, 1)],
        _ => 1.0,
    });
    let rhs = DMatrix::from_fn(n, 1, |i, _| -(points[(i, 0)].powi(2) + points[(i, 1)].powi(2)));
    let sol = a.svd(true, true).solve(&rhs, 1e-12).ok()?;
    let center = [-sol[0] / 2.0, -sol[1] / 2.0];
    let r2 = center[0].powi(2) + center[1].powi(2) - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    let radius = r2.sqrt();
    let max_relative_deviation = (0..n)
        .map(|i| ((points[(i, 0)] - center[0]).hypot(points[(i, 1)] - center[1]) - radius).abs() / radius)
        .fold(0.0, f64::max);
    Some(CircleFit { center, radius, max_relative_deviation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub tag: String,
    pub dim: usize,
    pub points: usize,
    pub leading_eigenvalues: Vec<f64>,
    pub discarded_top: Option<f64>,
    pub clamped_count: usize,
    /// Alignment of the embedding onto the ground truth (moment-scaled for
    /// dilation families).
    pub recovery: Option<AlignmentReport>,
    /// Scale of the best similarity taking the raw parameters onto the
    /// embedding.
    pub parameter_scale: Option<f64>,
    pub knn_separation: Option<f64>,
    pub circle_fit: Option<CircleFit>,
    /// Largest distance between members with zero deformation amplitude.
    pub identity_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub source: String,
    pub family: Option<String>,
    pub count: usize,
    pub with_scale: bool,
    pub embeddings: Vec<EmbeddingReport>,
    pub failures: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn embedding(&self, tag: &str) -> Option<&EmbeddingReport> {
        self.embeddings.iter().find(|e| e.tag == tag)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment {} ({} items, source {})", self.name, self.count, self.source);
        if let Some(f) = &self.family {
            let _ = writeln!(out, "family {f}");
        }
        for e in &self.embeddings {
            let _ = writeln!(out, "\n[{}] {} points in R^{}", e.tag, e.points, e.dim);
            let _ = writeln!(out, "  leading eigenvalues {:?}", e.leading_eigenvalues);
            if e.clamped_count > 0 {
                let _ = writeln!(out, "  clamped negative eigenvalues: {}", e.clamped_count);
            }
            if let Some(r) = &e.recovery {
                let _ = writeln!(out, "  normalized recovery error {:.3e} (rmse {:.3e})", r.normalized_error, r.rmse);
            }
            if let Some(s) = e.parameter_scale {
                let _ = writeln!(out, "  parameter scale {s:.6}");
            }
            if let Some(k) = e.knn_separation {
                let _ = writeln!(out, "  1-NN leave-one-out accuracy {k:.4}");
            }
            if let Some(c) = &e.circle_fit {
                let _ = writeln!(out, "  circle radius {:.6}, max relative deviation {:.3e}", c.radius, c.max_relative_deviation);
            }
            if let Some(s) = e.identity_spread {
                let _ = writeln!(out, "  identity-member spread {s:.3e}");
            }
        }
        for (tag, msg) in &self.failures {
            let _ = writeln!(out, "\n[{tag}] failed: {msg}");
        }
        if !self.timings.is_empty() {
            let _ = writeln!(out);
            for (stage, secs) in &self.timings {
                let _ = writeln!(out, "time {stage}: {secs:.3} s");
            }
        }
        out
    }
}

fn read_embedding(dir: &Path, tag: &str) -> Result<Embedding> {
    let (csv, eig, _) = embedding_files(dir, tag);
    Embedding::from_files(&read(&csv)?, &read(&eig)?).stage("report")
}

fn read_kept(dir: &Path, tag: &str) -> Result<Option<Vec<usize>>> {
    let path = dir.join(format!("{tag}.kept.csv"));
    if !path.exists() {
        return Ok(None);
    }
    read(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<usize>().map_err(|e| artifact(&path, e.to_string())))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Collects metrics for every embedding found in `dir` into `report.json`
/// and `report.txt`.
pub fn report(dir: &Path, with_scale: Option<bool>) -> Result<Report> {
    let mut missing = Vec::new();
    for name in [CONFIG_FILE, MANIFEST_FILE] {
        if !dir.join(name).exists() {
            missing.push(name.to_string());
        }
    }
    let mut tags: Vec<String> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_string_lossy().strip_suffix(".embedding.csv").map(str::to_string))
            .collect(),
        Err(_) => Vec::new(),
    };
    tags.sort();
    if tags.is_empty() {
        missing.push("*.embedding.csv".into());
    }
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts { dir: dir.to_path_buf(), missing });
    }
    let (_, config) = load_config(dir)?;
    let manifest = load_manifest(dir)?;
    let with_scale = with_scale.unwrap_or(config.with_scale);
    let truth = read_truth(dir)?;
    let raw_truth = match dir.join(TRUTH_FILE) {
        p if p.exists() => Some(matrix_of(&csv_to_rows(&p)?)?),
        _ => None,
    };
    let labels = read_labels(dir)?;

    let mut embeddings = Vec::new();
    for tag in &tags {
        let emb = read_embedding(dir, tag)?;
        let kept = read_kept(dir, tag)?;
        let rows: Vec<usize> = kept.clone().unwrap_or_else(|| (0..emb.len()).collect());
        if rows.len() != emb.len() || rows.iter().any(|&r| r >= manifest.count) {
            return Err(artifact(&dir.join(format!("{tag}.embedding.csv")), "row count does not match the experiment"));
        }
        let mut r = EmbeddingReport {
            tag: tag.clone(),
            dim: emb.dim(),
            points: emb.len(),
            leading_eigenvalues: emb.spectrum.iter().take(emb.dim() + 2).copied().collect(),
            discarded_top: emb.discarded_top,
            clamped_count: emb.clamped_count(),
            recovery: None,
            parameter_scale: None,
            knn_separation: None,
            circle_fit: None,
            identity_spread: None,
        };
        let family = manifest.family.as_deref();
        if let Some(t) = truth.as_ref().filter(|t| t.ncols() == emb.dim() && family != Some("rotation")) {
            let t = select_rows(t, &rows);
            let (alignment, error) = align_to_truth(&emb.points, &t, with_scale).stage("report")?;
            r.recovery = Some(AlignmentReport::new(&alignment, error));
        }
        if let Some(t) = raw_truth.as_ref().filter(|t| t.ncols() == emb.dim() && family != Some("rotation")) {
            r.parameter_scale = Some(procrustes(&select_rows(t, &rows), &emb.points, true).stage("report")?.scale);
        }
        if let Some(l) = &labels {
            let l: Vec<u8> = rows.iter().map(|&i| l[i]).collect();
            r.knn_separation = knn_separation(&emb.points, &l, 1).ok();
        }
        if family == Some("rotation") {
            r.circle_fit = fit_circle(&emb.points);
        }
        if let (Some("deformation"), Some(t)) = (family, raw_truth.as_ref()) {
            let identity: Vec<usize> = (0..rows.len()).filter(|&k| t[(rows[k], 0)] == 0.0).collect();
            let mut spread: f64 = 0.0;
            for &a in &identity {
                for &b in &identity {
                    spread = spread.max((emb.points.row(a) - emb.points.row(b)).norm());
                }
            }
            r.identity_spread = Some(spread);
        }
        embeddings.push(r);
    }

    let mut failures = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.filter_map(|e| e.ok()) {
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(tag) = name.strip_suffix(".error.txt") {
                failures.insert(tag.to_string(), read(&e.path())?.trim().to_string());
            }
        }
    }
    let timings = fs::read_to_string(dir.join(TIMINGS_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let report = Report {
        name: manifest.name.clone(),
        source: manifest.source.clone(),
        family: manifest.family.clone(),
        count: manifest.count,
        with_scale,
        embeddings,
        failures,
        timings,
    };
    write(&dir.join(REPORT_JSON), serde_json::to_string_pretty(&report).expect("report serializes"))?;
    write(&dir.join(REPORT_TEXT), report.to_text())?;
    Ok(report)
}

/// All stages for one experiment, as selected by its `method`.
pub fn run_experiment(settings: &Settings, dir: &Path) -> Result<Report> {
    let config = ExperimentConfig::from_settings(settings)?;
    generate(settings, dir)?;
    if config.method.wassmap() {
        distances(dir)?;
        embed(dir, None)?;
    }
    if config.method.isomap() {
        isomap(dir, None, None)?;
    }
    report(dir, None)
}

/// Runs one config file, or every `*.conf` file of a directory (sorted by
/// name), each into `out/<name>`. `adjust` applies command-line overrides.
pub fn run_all(configs: &Path, out: &Path, adjust: &dyn Fn(&mut Settings)) -> Result<Vec<Report>> {
    let mut paths: Vec<PathBuf> = if configs.is_dir() {
        fs::read_dir(configs)
            .map_err(io_err(configs))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "conf"))
            .collect()
    } else {
        vec![configs.to_path_buf()]
    };
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no .conf files in {}", configs.display())));
    }
    paths
        .iter()
        .map(|p| {
            let mut settings = Settings::load(p)?;
            adjust(&mut settings);
            let name = settings.get("name").unwrap_or("experiment").to_string();
            run_experiment(&settings, &out.join(name))
        })
        .collect()
}

/// Opens (creating) a file for appending; exposed for tests that simulate an
/// interrupted cache write.
pub fn append_raw(path: &Path, text: &str) -> Result<()> {
    let mut f: File = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

//! Standalone tools over saved artifacts: search around checkpoints, score
//! a policy file, draw the contour-anchor map, and chart curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::candidates::Provenance;
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::esa::{run_esa, EsaConfig};
use crate::evaluator::{EvalReport, Evaluator};
use crate::harness::run::{mean_std, smooth, BUILD_ID};
use crate::nn::{ActionMode, FlatParams};
use crate::pipeline::TrainingCurve;
use crate::seeding::{stream_rng, Stream};
use crate::viz::{contour_anchor_map, line_chart_svg, ContourMap, Series};

/// Every `*.flat` file directly inside `dir`, sorted by file name.
pub fn load_checkpoint_dir(dir: &Path) -> Result<Vec<(PathBuf, FlatParams)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "flat"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no .flat checkpoints in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| FlatParams::load(&p).map(|f| (p, f)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreManifest {
    pub seed: u64,
    pub build_id: String,
    pub config: EsaConfig,
    pub anchors: Vec<String>,
    pub candidates: Vec<ExploredCandidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploredCandidate {
    pub file: String,
    pub provenance: Provenance,
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs the particle search over the checkpoints in `anchor_dir` and writes
/// `candidate_NNN.flat` files plus `manifest.json` into `out`.
pub fn explore(anchor_dir: &Path, cfg: &EsaConfig, seed: u64, out: &Path) -> Result<ExploreManifest> {
    let loaded = load_checkpoint_dir(anchor_dir)?;
    let anchors: Vec<FlatParams> = loaded.iter().map(|(_, f)| f.clone()).collect();
    let mut rng = stream_rng(seed, Stream::Esa);
    let candidates = run_esa(&anchors, cfg, &mut rng)?;
    fs::create_dir_all(out)?;
    let mut listed = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        let file = format!("candidate_{i:03}.flat");
        c.params.save(&out.join(&file))?;
        listed.push(ExploredCandidate {
            file,
            provenance: c.provenance,
        });
    }
    let manifest = ExploreManifest {
        seed,
        build_id: BUILD_ID.to_string(),
        config: cfg.clone(),
        anchors: loaded.iter().map(|(p, _)| file_name(p)).collect(),
        candidates: listed,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Scores a saved policy (or full actor-critic) file on `episodes` seeded
/// episodes.
pub fn eval_file(path: &Path, env: EnvId, episodes: usize, seed: u64, mode: ActionMode) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let params = FlatParams::load(path)?;
    let evaluator = Evaluator::for_env(env, episodes, mode);
    let seeds = evaluator.draw_seed_set(&mut stream_rng(seed, Stream::Eval));
    let mut report = evaluator.evaluate(0, &params, &seeds)?;
    report.provenance = Some(Provenance::File { index: 0 });
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct VisualizeOptions {
    pub env: EnvId,
    pub samples: usize,
    pub episodes: usize,
    pub resolution: usize,
    pub seed: u64,
}

impl VisualizeOptions {
    pub fn new(env: EnvId) -> Self {
        Self {
            env,
            samples: 100,
            episodes: 20,
            resolution: 40,
            seed: 0,
        }
    }
}

/// Contour-anchor map around the checkpoints in `checkpoint_dir`; writes
/// `anchors.csv`, `cloud.csv`, `grid.csv` and `contour.svg` into `out`.
pub fn visualize(checkpoint_dir: &Path, opts: &VisualizeOptions, out: &Path) -> Result<ContourMap> {
    let checkpoints: Vec<FlatParams> = load_checkpoint_dir(checkpoint_dir)?
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let evaluator = Evaluator::for_env(opts.env, opts.episodes, ActionMode::Deterministic);
    let seeds = evaluator.draw_seed_set(&mut stream_rng(opts.seed, Stream::Eval));
    let mut rng = stream_rng(opts.seed, Stream::Viz);
    let map = contour_anchor_map(&checkpoints, opts.samples, &evaluator, &seeds, opts.resolution, &mut rng)?;
    write_contour_map(&map, out)?;
    Ok(map)
}

pub fn write_contour_map(map: &ContourMap, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    map.write_anchors_csv(fs::File::create(out.join("anchors.csv"))?)?;
    map.write_cloud_csv(fs::File::create(out.join("cloud.csv"))?)?;
    map.grid.write_csv(fs::File::create(out.join("grid.csv"))?)?;
    fs::write(out.join("contour.svg"), map.svg())?;
    Ok(())
}

fn collect_curves(path: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        found.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_curves(&p, found)?;
        } else if file_name(&p) == "curve.csv" {
            found.push(p);
        }
    }
    Ok(())
}

/// Series label for a curve file: the method directory of
/// `<method>/seed_<n>/curve.csv`, otherwise the file stem.
fn curve_label(path: &Path) -> String {
    let parent = path.parent();
    match parent.and_then(Path::file_name).map(|n| n.to_string_lossy()) {
        Some(seed_dir) if seed_dir.starts_with("seed_") => parent
            .and_then(Path::parent)
            .map(file_name)
            .unwrap_or_else(|| "curve".into()),
        _ => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "curve".into()),
    }
}

/// Mean ± std across curves of the smoothed training return, sampled on a
/// shared step grid covering the range every curve spans.
pub fn aggregate_curves(curves: &[TrainingCurve], window: usize, points: usize, label: &str) -> Result<Series> {
    let tracks: Vec<(Vec<u64>, Vec<f64>)> = curves
        .iter()
        .map(|c| {
            let rows: Vec<_> = c.rows.iter().filter(|r| r.event_type == crate::pipeline::EventType::Train).collect();
            let returns: Vec<f64> = rows.iter().map(|r| r.episode_return).collect();
            Ok((rows.iter().map(|r| r.env_steps).collect(), smooth(&returns, window)?))
        })
        .collect::<Result<_>>()?;
    if tracks.is_empty() || tracks.iter().any(|(s, _)| s.is_empty()) {
        return Err(Error::Empty("curve without training episodes"));
    }
    let start = tracks.iter().map(|(s, _)| s[0]).max().unwrap() as f64;
    let end = tracks.iter().map(|(s, _)| *s.last().unwrap()).min().unwrap() as f64;
    let points = points.max(2);
    let xs: Vec<f64> = if end > start {
        (0..points)
            .map(|i| start + (end - start) * i as f64 / (points - 1) as f64)
            .collect()
    } else {
        vec![start]
    };
    let (mut mean, mut std) = (Vec::with_capacity(xs.len()), Vec::with_capacity(xs.len()));
    for &x in &xs {
        let at: Vec<f64> = tracks
            .iter()
            .map(|(steps, vals)| {
                let idx = steps.partition_point(|&s| s as f64 <= x);
                vals[idx.saturating_sub(1)]
            })
            .collect();
        let (m, s) = mean_std(&at);
        mean.push(m);
        std.push(s);
    }
    Ok(Series {
        label: label.to_string(),
        x: xs,
        mean,
        std,
    })
}

/// Charts every curve found under `inputs` (files or directories), one
/// series per method with a ±1 std band across seeds.
pub fn plot(inputs: &[PathBuf], window: usize, out: &Path) -> Result<Vec<Series>> {
    let mut files = Vec::new();
    for p in inputs {
        collect_curves(p, &mut files)?;
    }
    if files.is_empty() {
        return Err(Error::InvalidArgument("no curve CSVs found".into()));
    }
    let mut groups: BTreeMap<String, Vec<TrainingCurve>> = BTreeMap::new();
    for f in &files {
        let curve = TrainingCurve::read_csv(&fs::read_to_string(f)?).map_err(|e| Error::Format {
            path: f.clone(),
            message: e.to_string(),
        })?;
        groups.entry(curve_label(f)).or_default().push(curve);
    }
    let series = groups
        .iter()
        .map(|(label, curves)| aggregate_curves(curves, window, 200, label))
        .collect::<Result<Vec<_>>>()?;
    let svg = line_chart_svg(&series, "environment steps", "episode return")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, svg)?;
    Ok(series)
}

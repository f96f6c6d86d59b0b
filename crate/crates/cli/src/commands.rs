//! Subcommand implementations. Each writes its artifacts under the
//! configured output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use geofuse::association::{write_trace, TrackedObject};
use geofuse::evaluation::{evaluate_run, MetricReport, TimingSummary};
use geofuse::optimizer::{run_pipeline, timings_csv, KeyframeMap, PipelineOutput, Variant};
use geofuse::sim::{generate_dataset, read_dataset, write_dataset, Dataset};

use crate::config::{config_error, RunConfig};

/// Per-frame association plus optimization budget.
pub const BUDGET_MS: f64 = 200.0;

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn gen(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let ds = generate_dataset(&cfg.dataset_spec(), &geofuse::geometry::ModelRegistry::default_household())?;
    let dir = cfg.dataset_dir();
    write_dataset(&ds, &dir)?;
    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &ds.scene.objects {
        let name = ds.registry.get(o.class_id).map(|m| m.name.as_str()).unwrap_or("?");
        *classes.entry(name).or_default() += 1;
    }
    let listed: Vec<String> = classes.iter().map(|(k, v)| format!("{k} {v}")).collect();
    println!(
        "scene seed {}: {} objects ({}), {} frames, {} measurements -> {}",
        cfg.seed,
        ds.scene.objects.len(),
        listed.join(", "),
        ds.frames.len(),
        ds.frames.iter().map(|f| f.measurements.len()).sum::<usize>(),
        dir.display()
    );
    Ok(ds)
}

pub fn load_dataset(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let dir = cfg.dataset_dir();
    if !dir.join("scene.json").is_file() {
        return Err(config_error(format!("no dataset at {} (run `geofuse gen` first)", dir.display())));
    }
    Ok(read_dataset(&dir)?)
}

pub fn run(cfg: &RunConfig, ds: &Dataset, variant: Variant) -> anyhow::Result<PipelineOutput> {
    let out = run_pipeline(ds, &cfg.pipeline(&ds.noise), variant)?;
    for (t, rep) in &out.stage1_reports {
        if !rep.converged {
            log::warn!("{variant}: Stage I at frame {t} stopped after {} iterations", rep.iterations);
        }
    }
    let dir = cfg.run_dir(variant);
    let maps_dir = dir.join("maps");
    if maps_dir.exists() {
        fs::remove_dir_all(&maps_dir).with_context(|| format!("clearing {}", maps_dir.display()))?;
    }
    fs::create_dir_all(&maps_dir).with_context(|| format!("creating {}", maps_dir.display()))?;
    for m in &out.maps {
        write_json(&maps_dir.join(format!("{:04}.json", m.t)), m)?;
    }
    write_json(&dir.join("tracks.json"), &out.tracks)?;
    fs::write(dir.join("timings.csv"), timings_csv(&out.maps))?;
    let trace = fs::File::create(dir.join("trace.jsonl"))?;
    write_trace(&out.trace, BufWriter::new(trace))?;
    let last = out.final_map().map(|m| m.objects.len()).unwrap_or(0);
    let t = TimingSummary::of(&out.maps);
    println!(
        "{variant}: {} keyframes, {last} objects in the final map, {:.1} ms per frame -> {}",
        out.maps.len(),
        t.mean_total_ms,
        dir.display()
    );
    Ok(out)
}

/// Reads back the outputs of `run`.
pub fn read_run(cfg: &RunConfig, variant: Variant) -> anyhow::Result<PipelineOutput> {
    let dir = cfg.run_dir(variant);
    let maps_dir = dir.join("maps");
    if !maps_dir.is_dir() {
        return Err(config_error(format!("no {variant} run at {}", dir.display())));
    }
    let mut paths: Vec<_> = fs::read_dir(&maps_dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    let maps: Vec<KeyframeMap> = paths.iter().map(|p| read_json(p)).collect::<anyhow::Result<_>>()?;
    let tracks: Vec<TrackedObject> = read_json(&dir.join("tracks.json"))?;
    Ok(PipelineOutput {
        variant,
        maps,
        trace: Vec::new(),
        tracks,
        stage1_reports: Vec::new(),
    })
}

pub fn eval(cfg: &RunConfig, ds: &Dataset, variants: &[Variant]) -> anyhow::Result<MetricReport> {
    let mut report = MetricReport::default();
    for &v in variants {
        let out = read_run(cfg, v)?;
        if out.maps.len() != ds.frames.len() {
            return Err(config_error(format!(
                "{v} run has {} keyframes but the dataset has {}",
                out.maps.len(),
                ds.frames.len()
            )));
        }
        report.variants.push(evaluate_run(ds, &out, &cfg.eval)?);
    }
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("metrics.json"), &report)?;
    fs::write(cfg.out.join("tables.csv"), report.tables_csv())?;
    fs::write(cfg.out.join("curves.csv"), report.curves_csv())?;
    print!("{}", report.tables_csv());
    Ok(report)
}

/// Variants with outputs under the run directory, in canonical order.
pub fn existing_runs(cfg: &RunConfig) -> Vec<Variant> {
    Variant::ALL.into_iter().filter(|v| cfg.run_dir(*v).join("maps").is_dir()).collect()
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub objects: usize,
    pub frames: usize,
    pub timings: TimingSummary,
    pub budget_ms: f64,
    pub within_budget: bool,
}

pub fn bench(cfg: &RunConfig) -> anyhow::Result<BenchReport> {
    let ds = if cfg.dataset_dir().join("scene.json").is_file() {
        load_dataset(cfg)?
    } else {
        generate_dataset(&cfg.dataset_spec(), &geofuse::geometry::ModelRegistry::default_household())?
    };
    let out = run_pipeline(&ds, &cfg.pipeline(&ds.noise), Variant::GeoFusion)?;
    let timings = TimingSummary::of(&out.maps);
    let report = BenchReport {
        objects: ds.scene.objects.len(),
        frames: ds.frames.len(),
        timings,
        budget_ms: BUDGET_MS,
        within_budget: timings.mean_total_ms < BUDGET_MS,
    };
    println!(
        "geofusion on {} objects / {} frames: mean {:.1} ms, p95 {:.1} ms per frame (budget {BUDGET_MS} ms)",
        report.objects, report.frames, timings.mean_total_ms, timings.p95_total_ms
    );
    if !report.within_budget {
        log::warn!("mean per-frame time exceeds the {BUDGET_MS} ms budget");
    }
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("bench.json"), &report)?;
    Ok(report)
}

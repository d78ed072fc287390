use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::{
    aggregate, export_curve_csv, export_stats_csv, export_stats_json, export_traces_csv,
    render_overlay,
};
use crate::archive::read_index;
use crate::attribution::{
    Attribution, AttributionRequest, AttributionTrace, MethodRegistry, Scheduler,
};
use crate::error::{Error, Result};
use crate::imageio::{load_image, resize_bilinear, save_image, InputImage};
use crate::vit::{ViTConfig, ViTModel};

use super::manifest::RunManifest;
use super::{BatchArgs, ExplainArgs, InspectArgs, OccludeArgs, StatsArgs};

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn write_overlay(
    model: &ViTModel,
    img: &InputImage,
    result: &Attribution,
    path: &Path,
) -> Result<()> {
    let size = model.config().image_size;
    let base = resize_bilinear(img, size, size)?;
    let map = result.importance(model.config().grid())?;
    save_image(&render_overlay(&base, &map)?, path)
}

fn attribute_image(
    manifest: &RunManifest,
    model: &ViTModel,
    method: &str,
    image: &InputImage,
    scheduler: &Scheduler,
) -> Result<Attribution> {
    let registry = MethodRegistry::with_builtins();
    registry.get(method)?.attribute(&AttributionRequest {
        model,
        image,
        target: manifest.target,
        max_iters: manifest.max_iters,
        scheduler,
    })
}

pub fn explain(args: &ExplainArgs) -> Result<()> {
    let manifest = RunManifest::resolve(&args.model, Some(&args.search))?;
    MethodRegistry::with_builtins().get(&args.method)?;
    let model = manifest.load_model()?;
    let image = load_image(&args.image)?;
    let result = attribute_image(
        &manifest,
        &model,
        &args.method,
        &image,
        &manifest.scheduler()?,
    )?;
    write_output(&result.to_json(), args.out.as_deref())?;
    if let Some(path) = &args.overlay {
        write_overlay(&model, &image, &result, path)?;
    }
    Ok(())
}

pub fn occlude(args: &OccludeArgs) -> Result<()> {
    let mut manifest = RunManifest::resolve(&args.model, None)?;
    manifest.target = args.target;
    manifest.workers = args.workers;
    let model = manifest.load_model()?;
    let image = load_image(&args.image)?;
    let method = format!("occlusion-{}", args.fill);
    let result = attribute_image(&manifest, &model, &method, &image, &manifest.scheduler()?)?;
    write_output(&result.to_json(), args.out.as_deref())?;
    if let Some(path) = &args.overlay {
        write_overlay(&model, &image, &result, path)?;
    }
    Ok(())
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

enum Outcome {
    Done {
        name: String,
        trace: AttributionTrace,
    },
    Skipped(String),
}

pub fn batch(args: &BatchArgs) -> Result<()> {
    let manifest = RunManifest::resolve(&args.model, Some(&args.search))?;
    let files = list_files(&args.dir)?;
    if files.is_empty() {
        return Err(Error::Geometry(format!(
            "no images in {}",
            args.dir.display()
        )));
    }
    let model = manifest.load_model()?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    // Nested thread pools would oversubscribe; with image-level parallelism
    // each image searches sequentially.
    let candidates = if args.jobs > 1 {
        Scheduler::new(1, manifest.wave_size)?
    } else {
        manifest.scheduler()?
    };
    let images = Scheduler::new(args.jobs.max(1), None)?;

    let mut seen = HashSet::new();
    let names: Vec<Option<String>> = files
        .iter()
        .map(|f| {
            let stem = f.file_stem()?.to_string_lossy().into_owned();
            seen.insert(stem.clone()).then_some(stem)
        })
        .collect();
    let jobs: Vec<(&PathBuf, &Option<String>)> = files.iter().zip(&names).collect();

    let outcomes = images.map(&jobs, |(path, name)| {
        let Some(name) = name else {
            return Ok(Outcome::Skipped("duplicate file stem".into()));
        };
        let run = || -> Result<AttributionTrace> {
            let image = load_image(path)?;
            match attribute_image(&manifest, &model, "token-insight", &image, &candidates)? {
                Attribution::Trace(t) => Ok(t),
                Attribution::Occlusion(_) => unreachable!("token-insight yields a trace"),
            }
        };
        Ok(match run() {
            Ok(trace) => Outcome::Done {
                name: name.clone(),
                trace,
            },
            Err(e) => Outcome::Skipped(e.to_string()),
        })
    })?;

    let mut log = manifest.describe();
    let mut written = 0;
    for (path, outcome) in files.iter().zip(outcomes) {
        let file = path.file_name().unwrap_or_default().to_string_lossy();
        match outcome {
            Outcome::Done { name, trace } => {
                let out = args.out_dir.join(format!("{name}.json"));
                trace.save(&out)?;
                written += 1;
                log.push_str(&format!(
                    "ok {file} -> {name}.json ({}, {} steps)\n",
                    trace.status,
                    trace.steps.len()
                ));
            }
            Outcome::Skipped(reason) => {
                eprintln!("skipping {file}: {reason}");
                log.push_str(&format!("skip {file}: {reason}\n"));
            }
        }
    }
    log.push_str(&format!("{written} of {} images attributed\n", files.len()));
    let log_path = args.out_dir.join("batch.log");
    std::fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
    if written == 0 {
        return Err(Error::Geometry("no image could be attributed".into()));
    }
    Ok(())
}

fn load_traces(path: &Path) -> Result<Vec<(String, AttributionTrace)>> {
    let files = if path.is_dir() {
        list_files(path)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect()
    } else {
        vec![path.to_owned()]
    };
    files
        .iter()
        .map(|f| {
            let id = f
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Ok((id, AttributionTrace::load(f)?))
        })
        .collect()
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let traces = load_traces(&args.traces)?;
    let named = || traces.iter().map(|(id, t)| (id.as_str(), t));
    let stats = aggregate(named())?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    export_traces_csv(named(), args.out.join("traces.csv"))?;
    export_stats_csv(&stats, args.out.join("stats.csv"))?;
    export_curve_csv(&stats, args.out.join("curve.csv"))?;
    export_stats_json(&stats, args.out.join("stats.json"))?;
    let t = &stats.tokens_discarded;
    println!(
        "{} traces, {} flipped; tokens discarded mean {:.3} median {} [{}..{}]",
        t.count, stats.flipped, t.mean, t.median, t.min, t.max
    );
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let index = read_index(&args.weights)?;
    let width = index.keys().map(String::len).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{:<width$}  {:<16}  {:>12}  {:>12}\n",
        "name", "shape", "offset", "nbytes"
    );
    let mut total = 0;
    for (name, e) in &index {
        let shape = format!("{:?}", e.shape);
        out.push_str(&format!(
            "{name:<width$}  {shape:<16}  {:>12}  {:>12}\n",
            e.offset, e.nbytes
        ));
        total += e.nbytes;
    }
    out.push_str(&format!("{} tensors, {} bytes\n", index.len(), total));
    write_output(&out, None)
}

pub fn methods() -> Result<()> {
    let registry = MethodRegistry::with_builtins();
    let mut out = String::from("methods:\n");
    for m in registry.iter() {
        out.push_str(&format!("  {:<16} {}\n", m.name(), m.summary()));
    }
    out.push_str("config presets:\n");
    for name in ViTConfig::preset_names() {
        let c = ViTConfig::preset(name)?;
        out.push_str(&format!(
            "  {name:<16} image {} patch {} dim {} depth {} heads {} classes {}\n",
            c.image_size, c.patch_size, c.dim, c.depth, c.heads, c.num_classes
        ));
    }
    write_output(&out, None)
}

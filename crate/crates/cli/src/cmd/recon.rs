use std::fs;
use std::path::{Path, PathBuf};

use aftnet::ctensor::{read_cxt1, write_cxt1};
use aftnet::kspace::{
    average_transients, equispaced_mask, load_mri_sample, load_mrs_subject, read_index, rss, CoilKSpace, DatasetKind,
    MaskSpec, SamplingMask, Split, DEFAULT_GLB_HZ,
};
use aftnet::metrics::{write_reports_csv, MetricsReport, RealImage};
use aftnet::models::{denoise_forward, model_forward, Domain, Model};
use aftnet::train::{eval_seed, evaluate_mrs, image_report, load_model, MriExample, ZERO_FILL};
use aftnet::{ComplexTensor, Error, Result};
use clap::Args;
use serde::Serialize;

use super::train::{latest_checkpoint, DEFAULT_REDUCTION};
use crate::config::RunConfig;
use crate::{pgm, pool, Common};

const KEYS: &[&str] = &["checkpoint", "data", "input", "out", "split", "acceleration", "mask_seed", "reduction", "glb_hz"];

pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Args, Debug)]
pub struct ReconArgs {
    /// Checkpoint directory, or a run directory (newest epoch is used).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset to reconstruct (with ground truth).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Single k-space file `[coils, H, W]` without ground truth.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `train`, `val` or `test`.
    #[arg(long)]
    split: Option<String>,
    /// Undersampling applied before reconstruction (1 = fully sampled).
    #[arg(long)]
    acceleration: Option<u32>,
    #[arg(long)]
    mask_seed: Option<u64>,
    #[arg(long)]
    reduction: Option<usize>,
    #[command(flatten)]
    common: Common,
}

/// Per-sample record written next to the images.
#[derive(Serialize)]
struct SampleRecord {
    sample_id: String,
    variant: String,
    acceleration: u32,
    mask_seed: u64,
    /// One `0`/`1` per phase-encoding column.
    mask: String,
    metrics: MetricsReport,
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(Error::Config(format!("unknown split {:?} (train, val, test)", s))),
    }
}

fn resolve_checkpoint(p: PathBuf) -> Result<PathBuf> {
    if p.join(aftnet::autodiff::MANIFEST).exists() {
        return Ok(p);
    }
    latest_checkpoint(&p)?.ok_or_else(|| Error::Config(format!("no checkpoint in {}", p.display())))
}

/// Sum over coils; its argument is the phase image.
fn coil_sum(img: &ComplexTensor<f64>) -> Vec<(f64, f64)> {
    let s = img.shape();
    let hw = s[1] * s[2];
    (0..hw)
        .map(|p| (0..s[0]).map(|c| img.get(c * hw + p)).fold((0.0, 0.0), |a, v| (a.0 + v.0, a.1 + v.1)))
        .collect()
}

/// Writes the complex output, RSS magnitude and phase images.
fn write_images(out: &Path, id: &str, img: &ComplexTensor<f64>) -> Result<RealImage> {
    write_cxt1(out.join(format!("{}.recon.cxt", id)), &img.cast::<f32>())?;
    let mag = rss(img)?;
    let px: Vec<u16> = mag.data.iter().map(|&v| pgm::quantise(v, 1.0)).collect();
    pgm::write(out.join(format!("{}.mag.pgm", id)), &px, mag.h, mag.w)?;
    let ph: Vec<u16> = coil_sum(img)
        .iter()
        .map(|&(re, im)| pgm::quantise(im.atan2(re) + std::f64::consts::PI, 2.0 * std::f64::consts::PI))
        .collect();
    pgm::write(out.join(format!("{}.phase.pgm", id)), &ph, mag.h, mag.w)?;
    Ok(mag)
}

fn record(out: &Path, rec: &SampleRecord) -> Result<()> {
    fs::write(out.join(format!("{}.json", rec.sample_id)), serde_json::to_string_pretty(rec)? + "\n")?;
    Ok(())
}

/// Reconstructs one acquisition; metrics only when the truth is known.
fn recon_one(
    model: &Model<f32>,
    out: &Path,
    id: &str,
    kspace: &ComplexTensor<f64>,
    truth: Option<&ComplexTensor<f64>>,
    mask: &SamplingMask,
    mask_seed: u64,
) -> Result<Vec<MetricsReport>> {
    let k = CoilKSpace::new(kspace.cast::<f32>())?;
    let (img, _) = model_forward(model, &k, mask)?;
    let img = img.cast::<f64>();
    if !img.all_finite() {
        return Err(Error::NonFinite(format!("reconstruction of {} contains NaN/inf", id)));
    }
    let mag = write_images(out, id, &img)?;
    let variant = model.spec.variant.label();
    let mut rows = Vec::new();
    let mut metrics = MetricsReport::new(id, variant);
    if let Some(t) = truth {
        let ex = MriExample::<f64>::new(id, kspace, t, mask.clone())?;
        metrics = image_report(id, variant, &mag, &ex.truth_rss)?;
        let zf = aftnet::kspace::zero_fill_recon(&aftnet::kspace::apply_mask(&CoilKSpace::new(kspace.clone())?, mask)?)?;
        let mut z = image_report(id, ZERO_FILL, &rss(&zf)?, &ex.truth_rss)?;
        z.acceleration = Some(mask.acceleration);
        rows.push(z);
    }
    metrics.acceleration = Some(mask.acceleration);
    metrics.part.get_or_insert_with(|| "magnitude".into());
    record(
        out,
        &SampleRecord {
            sample_id: id.to_string(),
            variant: variant.to_string(),
            acceleration: mask.acceleration,
            mask_seed,
            mask: mask.to_text(),
            metrics: metrics.clone(),
        },
    )?;
    rows.insert(0, metrics);
    Ok(rows)
}

fn run_mri(c: &RunConfig, model: &Model<f32>, out: &Path, threads: usize) -> Result<Vec<MetricsReport>> {
    let Domain::Mri { width, .. } = model.spec.domain else { unreachable!() };
    let accel: Option<u32> = c.get("acceleration")?;
    let seed_override: Option<u64> = c.get("mask_seed")?;
    if let Some(input) = c.raw("input") {
        let path = PathBuf::from(input);
        let k = read_cxt1::<f64>(&path)?;
        let seed = seed_override.unwrap_or(0);
        let mask = equispaced_mask(width, accel.unwrap_or(1), seed)?;
        let id = path.file_stem().map_or("input".into(), |s| s.to_string_lossy().split('.').next().unwrap_or("input").to_string());
        return recon_one(model, out, &id, &k, None, &mask, seed);
    }
    let data = c.data_path("data")?;
    let index = read_index(&data)?;
    if index.kind != DatasetKind::MriPhantom {
        return Err(Error::Config("MRI checkpoint needs an mri-phantom dataset".into()));
    }
    let split = parse_split(c.raw("split").unwrap_or("test"))?;
    let entries: Vec<_> = index.split(split).cloned().collect();
    let rows = pool::map(&entries, threads, |e| {
        let s = load_mri_sample(&data, e)?;
        let base = s.mask.unwrap_or(MaskSpec { acceleration: 4, seed: e.seed });
        let spec = MaskSpec {
            acceleration: accel.unwrap_or(base.acceleration),
            seed: seed_override.unwrap_or(base.seed),
        };
        recon_one(model, out, &s.id, &s.kspace, Some(&s.target), &spec.build(width)?, spec.seed)
    })?;
    Ok(rows.into_iter().flatten().collect())
}

fn run_mrs(c: &RunConfig, model: &Model<f32>, out: &Path) -> Result<Vec<MetricsReport>> {
    let data = c.data_path("data")?;
    let index = read_index(&data)?;
    if index.kind != DatasetKind::MrsFid {
        return Err(Error::Config("spectral checkpoint needs an mrs-fid dataset".into()));
    }
    let split = parse_split(c.raw("split").unwrap_or("test"))?;
    let r = c.positive("reduction", DEFAULT_REDUCTION)?;
    let subjects = index.split(split).map(|e| load_mrs_subject(&data, e)).collect::<Result<Vec<_>>>()?;
    for (i, s) in subjects.iter().enumerate() {
        for (rec, draw, tag) in [(&s.on, eval_seed(2 * i), "on"), (&s.off, eval_seed(2 * i + 1), "off")] {
            let fid = average_transients(rec, r, draw)?;
            let spec = denoise_forward(model, &fid.cast::<f32>())?;
            write_cxt1(out.join(format!("{}.{}.spectrum.cxt", s.id, tag)), &spec)?;
        }
    }
    evaluate_mrs(Some(model), &subjects, r, c.get_or("glb_hz", DEFAULT_GLB_HZ)?)
}

pub fn run(a: ReconArgs, threads: usize) -> Result<()> {
    let c = super::load(&a.common, KEYS, |c| {
        c.set_opt("checkpoint", a.checkpoint.map(|p| p.display().to_string()))?;
        c.set_opt("data", a.data.map(|p| p.display().to_string()))?;
        c.set_opt("input", a.input.map(|p| p.display().to_string()))?;
        c.set_opt("out", a.out.map(|p| p.display().to_string()))?;
        c.set_opt("split", a.split)?;
        c.set_opt("acceleration", a.acceleration)?;
        c.set_opt("mask_seed", a.mask_seed)?;
        c.set_opt("reduction", a.reduction)
    })?;
    let ck = resolve_checkpoint(c.path("checkpoint")?)?;
    let out = c.path("out")?;
    let model = load_model::<f32>(&ck)?;
    fs::create_dir_all(&out)?;
    let rows = match model.spec.domain {
        Domain::Mri { .. } => run_mri(&c, &model, &out, threads)?,
        Domain::Mrs { .. } => run_mrs(&c, &model, &out)?,
    };
    write_reports_csv(out.join(METRICS_FILE), &rows)?;
    let manifest = serde_json::json!({
        "checkpoint": ck.display().to_string(),
        "variant": model.spec.variant,
        "settings": c.to_json(),
        "samples": rows.iter().filter(|r| r.variant == model.spec.variant.label()).count(),
    });
    fs::write(out.join("recon.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("wrote {} metric rows to {}", rows.len(), out.join(METRICS_FILE).display());
    Ok(())
}

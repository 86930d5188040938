use std::fs;
use std::path::{Path, PathBuf};

use aftnet::aft::AftMode;
use aftnet::kspace::{load_mri_sample, load_mrs_subject, read_index, DatasetIndex, DatasetKind, MaskSpec, Split};
use aftnet::models::{AftStart, Model, ModelSpec, Variant};
use aftnet::train::{load_model, CurveRow, Example, MriExample, MrsExample, TrainConfig, Trainer};
use aftnet::{Error, Result};
use clap::Args;

use crate::config::RunConfig;
use crate::Common;

const KEYS: &[&str] = &[
    "data", "out", "variant", "epochs", "lr0", "lr_min", "seed", "widths", "groups", "aft_start", "aft_mode",
    "aft_lr_scale", "activation_offset", "dc", "acceleration", "reduction", "init_from", "resume", "stop_after",
];

pub const CURVE_FILE: &str = "curve.csv";
pub const RUN_FILE: &str = "run.json";
pub const DEFAULT_REDUCTION: usize = 80;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory written by `aftnet gen`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory for checkpoints and the training curve.
    #[arg(long)]
    out: Option<PathBuf>,
    /// AFT, AFTNet-I, AFTNet-K or AFTNet-KI.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    lr_min: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// UNet widths per level, e.g. `16,32,64,128`.
    #[arg(long)]
    widths: Option<String>,
    /// `exact` or `random` AFT initialisation.
    #[arg(long)]
    aft_start: Option<String>,
    /// `trainable` or `frozen`.
    #[arg(long)]
    aft_mode: Option<String>,
    /// Undersampling used for training instead of the dataset default.
    #[arg(long)]
    acceleration: Option<u32>,
    /// Spectroscopy reduction rate (transients kept = 160 / R).
    #[arg(long)]
    reduction: Option<usize>,
    /// Checkpoints whose matching parameters initialise the model (comma separated).
    #[arg(long)]
    init_from: Option<String>,
    /// Continue from the newest checkpoint in the run directory.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    common: Common,
}

fn model_spec(c: &RunConfig, index: &DatasetIndex, variant: Variant) -> Result<ModelSpec> {
    let mut spec = match index.kind {
        DatasetKind::MriPhantom => ModelSpec::mri(
            variant,
            index.param_usize("coils")?,
            index.param_usize("height")?,
            index.param_usize("width")?,
        ),
        DatasetKind::MrsFid => ModelSpec::mrs(variant, aftnet::kspace::FID_POINTS),
    };
    if let Some(w) = c.list("widths")? {
        spec.widths = w;
    }
    spec.groups = c.get_or("groups", spec.groups)?;
    spec.aft_start = c.get_or::<AftStart>("aft_start", spec.aft_start)?;
    spec.aft_mode = c.get_or::<AftMode>("aft_mode", spec.aft_mode)?;
    spec.aft_lr_scale = c.get_or("aft_lr_scale", spec.aft_lr_scale)?;
    spec.activation_offset = c.get_or("activation_offset", spec.activation_offset)?;
    spec.data_consistency = c.bool_or("dc", spec.data_consistency)?;
    spec.seed = c.get_or("seed", spec.seed)?;
    spec.validate()?;
    Ok(spec)
}

/// Checkpoint directory of `epoch` inside a run.
pub fn epoch_dir(out: &Path, epoch: usize) -> PathBuf {
    out.join(format!("epoch-{:04}", epoch))
}

/// Newest `epoch-NNNN` directory of a run, if any.
pub fn latest_checkpoint(run: &Path) -> Result<Option<PathBuf>> {
    if !run.is_dir() {
        return Ok(None);
    }
    let mut best: Option<(usize, PathBuf)> = None;
    for e in fs::read_dir(run)? {
        let e = e?;
        let name = e.file_name().to_string_lossy().to_string();
        if let Some(n) = name.strip_prefix("epoch-").and_then(|s| s.parse::<usize>().ok()) {
            if best.as_ref().map_or(true, |(b, _)| n > *b) {
                best = Some((n, e.path()));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

pub fn write_curve(path: &Path, curve: &[CurveRow]) -> Result<()> {
    let mut s = String::from("epoch,lr,train_loss,val_loss\n");
    for r in curve {
        s.push_str(&format!("{},{:e},{:e},{:e}\n", r.epoch, r.lr, r.train_loss, r.val_loss));
    }
    fs::write(path, s)?;
    Ok(())
}

fn mri_sets(dir: &Path, index: &DatasetIndex, accel: Option<u32>) -> Result<(Vec<MriExample<f32>>, Vec<MriExample<f32>>)> {
    let load = |split| -> Result<Vec<MriExample<f32>>> {
        index
            .split(split)
            .map(|e| {
                let mut s = load_mri_sample(dir, e)?;
                let seed = s.mask.map_or(e.seed, |m| m.seed);
                if let Some(a) = accel {
                    s.mask = Some(MaskSpec { acceleration: a, seed });
                }
                MriExample::from_sample(&s, MaskSpec { acceleration: 4, seed })
            })
            .collect()
    };
    Ok((load(Split::Train)?, load(Split::Val)?))
}

fn mrs_sets(dir: &Path, index: &DatasetIndex, r: usize) -> Result<(Vec<MrsExample<f32>>, Vec<MrsExample<f32>>)> {
    let load = |split| -> Result<Vec<MrsExample<f32>>> {
        let subjects = index.split(split).map(|e| load_mrs_subject(dir, e)).collect::<Result<Vec<_>>>()?;
        MrsExample::from_subjects(&subjects, r)
    };
    Ok((load(Split::Train)?, load(Split::Val)?))
}

fn fit<E: Example<f32>>(mut t: Trainer<f32>, train: &[E], val: &[E], out: &Path, stop_after: Option<usize>) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Config("dataset has no training samples".into()));
    }
    while !t.is_done() && stop_after.map_or(true, |s| t.epoch < s) {
        let row = t.run_epoch(train, val)?;
        println!(
            "epoch {:>3}  lr {:.3e}  train {:.6}  val {:.6}",
            row.epoch, row.lr, row.train_loss, row.val_loss
        );
        t.save(epoch_dir(out, t.epoch))?;
        write_curve(&out.join(CURVE_FILE), &t.curve)?;
    }
    Ok(())
}

pub fn run(a: TrainArgs) -> Result<()> {
    let c = super::load(&a.common, KEYS, |c| {
        c.set_opt("data", a.data.map(|p| p.display().to_string()))?;
        c.set_opt("out", a.out.map(|p| p.display().to_string()))?;
        c.set_opt("variant", a.variant)?;
        c.set_opt("epochs", a.epochs)?;
        c.set_opt("lr0", a.lr0)?;
        c.set_opt("lr_min", a.lr_min)?;
        c.set_opt("seed", a.seed)?;
        c.set_opt("widths", a.widths)?;
        c.set_opt("aft_start", a.aft_start)?;
        c.set_opt("aft_mode", a.aft_mode)?;
        c.set_opt("acceleration", a.acceleration)?;
        c.set_opt("reduction", a.reduction)?;
        c.set_opt("init_from", a.init_from)?;
        if a.resume {
            c.set("resume", true)?;
        }
        Ok(())
    })?;
    let data = c.data_path("data")?;
    let out = c.path("out")?;
    let index = read_index(&data)?;
    let d = TrainConfig::default();
    let tc = TrainConfig {
        epochs: c.positive("epochs", d.epochs)?,
        lr0: c.get_or("lr0", d.lr0)?,
        lr_min: c.get_or("lr_min", d.lr_min)?,
        seed: c.get_or("seed", d.seed)?,
        adam: d.adam,
    };
    tc.validate()?;
    let stop_after: Option<usize> = c.get("stop_after")?;

    let trainer = match latest_checkpoint(&out)? {
        Some(ck) if c.bool_or("resume", false)? => {
            let t = Trainer::<f32>::resume(&ck)?;
            println!("resuming {} at epoch {}", ck.display(), t.epoch);
            t
        }
        _ => {
            let variant: Variant = c.require("variant")?;
            let mut model = Model::<f32>::new(model_spec(&c, &index, variant)?)?;
            if let Some(srcs) = c.list::<String>("init_from")? {
                for src in srcs {
                    let p = PathBuf::from(&src);
                    let ck = if p.join(aftnet::autodiff::MANIFEST).exists() { p } else {
                        latest_checkpoint(&p)?.ok_or_else(|| Error::Config(format!("no checkpoint in {}", src)))?
                    };
                    let other = load_model::<f32>(&ck)?;
                    let n = model.load_matching(&other.store);
                    println!("initialised {} tensors from {}", n, ck.display());
                }
            }
            Trainer::new(model, tc)?
        }
    };
    fs::create_dir_all(&out)?;
    let run_info = serde_json::json!({
        "dataset": data.display().to_string(),
        "kind": index.kind,
        "settings": c.to_json(),
        "spec": trainer.model.spec,
        "train": trainer.config,
    });
    fs::write(out.join(RUN_FILE), serde_json::to_string_pretty(&run_info)? + "\n")?;
    match index.kind {
        DatasetKind::MriPhantom => {
            let (tr, va) = mri_sets(&data, &index, c.get("acceleration")?)?;
            fit(trainer, &tr, &va, &out, stop_after)
        }
        DatasetKind::MrsFid => {
            let (tr, va) = mrs_sets(&data, &index, c.positive("reduction", DEFAULT_REDUCTION)?)?;
            fit(trainer, &tr, &va, &out, stop_after)
        }
    }
}

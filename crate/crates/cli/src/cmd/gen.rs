use std::path::PathBuf;

use aftnet::kspace::{generate_mri, generate_mrs, DatasetKind, MriGenConfig, MrsGenConfig, DEFAULT_NOISE};
use aftnet::Result;
use clap::Args;

use crate::Common;

const KEYS: &[&str] = &["kind", "out", "samples", "val", "test", "height", "width", "coils", "acceleration", "seed", "noise"];

#[derive(Args, Debug)]
pub struct GenArgs {
    /// `mri-phantom` or `mrs-fid`.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of phantoms or subjects.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    coils: Option<usize>,
    /// Default undersampling recorded with each phantom.
    #[arg(long)]
    acceleration: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-transient noise level of the FIDs.
    #[arg(long)]
    noise: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: GenArgs, _threads: usize) -> Result<()> {
    let c = super::load(&a.common, KEYS, |c| {
        c.set_opt("kind", a.kind)?;
        c.set_opt("out", a.out.map(|p| p.display().to_string()))?;
        c.set_opt("samples", a.samples)?;
        c.set_opt("val", a.val)?;
        c.set_opt("test", a.test)?;
        c.set_opt("height", a.height)?;
        c.set_opt("width", a.width)?;
        c.set_opt("coils", a.coils)?;
        c.set_opt("acceleration", a.acceleration)?;
        c.set_opt("seed", a.seed)?;
        c.set_opt("noise", a.noise)
    })?;
    let kind: DatasetKind = c.require("kind")?;
    let out = c.data_path("out")?;
    let index = match kind {
        DatasetKind::MriPhantom => {
            let d = MriGenConfig::default();
            let cfg = MriGenConfig {
                height: c.positive("height", d.height)?,
                width: c.positive("width", d.width)?,
                coils: c.positive("coils", d.coils)?,
                samples: c.positive("samples", d.samples)?,
                val: c.get_or("val", d.val)?,
                test: c.get_or("test", d.test)?,
                acceleration: c.get_or("acceleration", d.acceleration)?,
                seed: c.get_or("seed", d.seed)?,
            };
            generate_mri(&out, &cfg)?
        }
        DatasetKind::MrsFid => {
            let d = MrsGenConfig::default();
            let cfg = MrsGenConfig {
                subjects: c.positive("samples", d.subjects)?,
                val: c.get_or("val", d.val)?,
                test: c.get_or("test", d.test)?,
                noise_sigma: c.get_or("noise", DEFAULT_NOISE)?,
                seed: c.get_or("seed", d.seed)?,
            };
            generate_mrs(&out, &cfg)?
        }
    };
    println!("wrote {} samples to {}", index.samples.len(), out.display());
    Ok(())
}

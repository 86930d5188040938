use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ctensor::{read_cxt1, write_cxt1, ComplexTensor};
use crate::error::{config_err, Error, Result};

use super::{equispaced_mask, phantom, EditState, EditedScenario, Labels, SamplingMask};

pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    MriPhantom,
    MrsFid,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mri-phantom" => Ok(Self::MriPhantom),
            "mrs-fid" => Ok(Self::MrsFid),
            other => config_err(format!("unknown dataset kind {:?}", other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Undersampling recipe; the mask itself is rebuilt with [`equispaced_mask`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub acceleration: u32,
    pub seed: u64,
}

impl MaskSpec {
    pub fn build(&self, w: usize) -> Result<SamplingMask> {
        equispaced_mask(w, self.acceleration, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub seed: u64,
    pub split: Split,
    pub files: BTreeMap<String, String>,
    pub mask: Option<MaskSpec>,
    pub labels: Labels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub kind: DatasetKind,
    pub seed: u64,
    pub params: BTreeMap<String, serde_json::Value>,
    pub samples: Vec<SampleEntry>,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn param_usize(&self, key: &str) -> Result<usize> {
        self.params
            .get(key)
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .ok_or_else(|| Error::Format(format!("dataset index lacks integer param {:?}", key)))
    }
}

pub fn write_index(dir: impl AsRef<Path>, index: &DatasetIndex) -> Result<()> {
    let text = serde_json::to_string_pretty(index)?;
    fs::write(dir.as_ref().join(INDEX_FILE), text + "\n")?;
    Ok(())
}

pub fn read_index(dir: impl AsRef<Path>) -> Result<DatasetIndex> {
    let text = fs::read_to_string(dir.as_ref().join(INDEX_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Seed of sample `i` of a dataset generated with `seed`.
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn split_of(i: usize, n: usize, n_val: usize, n_test: usize) -> Split {
    if i + n_test >= n {
        Split::Test
    } else if i + n_test + n_val >= n {
        Split::Val
    } else {
        Split::Train
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MriGenConfig {
    pub height: usize,
    pub width: usize,
    pub coils: usize,
    pub samples: usize,
    pub val: usize,
    pub test: usize,
    pub acceleration: u32,
    pub seed: u64,
}

impl Default for MriGenConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            coils: 4,
            samples: 50,
            val: 5,
            test: 5,
            acceleration: 4,
            seed: 0,
        }
    }
}

/// One fully sampled phantom as stored on disk.
#[derive(Clone, Debug)]
pub struct MriSample {
    pub id: String,
    /// `[coils, H, W]`, DC centred.
    pub kspace: ComplexTensor<f64>,
    /// Ground-truth coil images `[coils, H, W]`.
    pub target: ComplexTensor<f64>,
    pub mask: Option<MaskSpec>,
}

fn params<S: Serialize>(cfg: &S) -> Result<BTreeMap<String, serde_json::Value>> {
    match serde_json::to_value(cfg)? {
        serde_json::Value::Object(m) => Ok(m.into_iter().collect()),
        _ => Err(Error::Format("config did not serialise to an object".into())),
    }
}

pub fn generate_mri(dir: impl AsRef<Path>, cfg: &MriGenConfig) -> Result<DatasetIndex> {
    let dir = dir.as_ref();
    if cfg.val + cfg.test > cfg.samples {
        return config_err("val + test exceeds the sample count");
    }
    equispaced_mask(cfg.width, cfg.acceleration, 0)?;
    fs::create_dir_all(dir)?;
    let mut samples = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let seed = sample_seed(cfg.seed, i);
        let p = phantom(cfg.height, cfg.width, cfg.coils, seed)?;
        let id = format!("s{:04}", i);
        let mut files = BTreeMap::new();
        for (key, t) in [("kspace", &p.kspace.data), ("target", &p.coil_images)] {
            let name = format!("{}.{}.cxt", id, key);
            write_cxt1(dir.join(&name), &t.cast::<f32>())?;
            files.insert(key.to_string(), name);
        }
        samples.push(SampleEntry {
            id,
            seed,
            split: split_of(i, cfg.samples, cfg.val, cfg.test),
            files,
            mask: Some(MaskSpec {
                acceleration: cfg.acceleration,
                seed: sample_seed(seed, 1),
            }),
            labels: Labels {
                field: p.kspace.field_label.clone(),
                contrast: p.kspace.contrast_label.clone(),
            },
        });
    }
    let index = DatasetIndex {
        kind: DatasetKind::MriPhantom,
        seed: cfg.seed,
        params: params(cfg)?,
        samples,
    };
    write_index(dir, &index)?;
    Ok(index)
}

fn file<'a>(entry: &'a SampleEntry, key: &str) -> Result<&'a str> {
    entry
        .files
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("sample {} has no {:?} file", entry.id, key)))
}

pub fn load_mri_sample(dir: impl AsRef<Path>, entry: &SampleEntry) -> Result<MriSample> {
    let dir = dir.as_ref();
    Ok(MriSample {
        id: entry.id.clone(),
        kspace: read_cxt1::<f64>(dir.join(file(entry, "kspace")?))?,
        target: read_cxt1::<f64>(dir.join(file(entry, "target")?))?,
        mask: entry.mask,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MrsGenConfig {
    pub subjects: usize,
    pub val: usize,
    pub test: usize,
    /// Per-transient noise standard deviation, relative to the subject's
    /// noiseless OFF spectral peak divided by `sqrt(points)`.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for MrsGenConfig {
    fn default() -> Self {
        Self {
            subjects: 101,
            val: 10,
            test: 11,
            noise_sigma: DEFAULT_NOISE,
            seed: 0,
        }
    }
}

/// Per-transient noise level; with 2 of 160 transients averaged the raw
/// DFT difference spectrum is clearly degraded but the peaks stay visible.
pub const DEFAULT_NOISE: f64 = 0.03;

/// One subject: normalised transients and their full means, per edit state.
#[derive(Clone, Debug)]
pub struct MrsSubject {
    pub id: String,
    pub seed: u64,
    pub on: super::FidRecord,
    pub off: super::FidRecord,
    pub on_mean: ComplexTensor<f64>,
    pub off_mean: ComplexTensor<f64>,
}

impl MrsSubject {
    pub fn record(&self, state: EditState) -> &super::FidRecord {
        match state {
            EditState::On => &self.on,
            EditState::Off => &self.off,
        }
    }

    pub fn truth(&self, state: EditState) -> &ComplexTensor<f64> {
        match state {
            EditState::On => &self.on_mean,
            EditState::Off => &self.off_mean,
        }
    }
}

/// Builds a subject in memory; all signals are divided by the noiseless OFF
/// spectral peak so the ground-truth spectra have unit-scale maxima.
pub fn mrs_subject(id: String, seed: u64, noise_sigma: f64) -> MrsSubject {
    let mut sc = EditedScenario::random(0.0, seed);
    let scale = sc.scale();
    for p in sc.shared.iter_mut().chain(sc.edited.iter_mut()) {
        p.amp /= scale;
    }
    sc.noise_sigma = noise_sigma / (sc.points as f64).sqrt();
    let (on, off) = sc.synth_pair(sample_seed(seed, 7));
    let on_mean = on.mean();
    let off_mean = off.mean();
    MrsSubject {
        id,
        seed,
        on,
        off,
        on_mean,
        off_mean,
    }
}

pub fn generate_mrs(dir: impl AsRef<Path>, cfg: &MrsGenConfig) -> Result<DatasetIndex> {
    let dir = dir.as_ref();
    if cfg.val + cfg.test > cfg.subjects {
        return config_err("val + test exceeds the subject count");
    }
    if !(cfg.noise_sigma >= 0.0) {
        return config_err("noise_sigma must be non-negative");
    }
    fs::create_dir_all(dir)?;
    let mut samples = Vec::with_capacity(cfg.subjects);
    for i in 0..cfg.subjects {
        let seed = sample_seed(cfg.seed, i);
        let id = format!("m{:04}", i);
        let s = mrs_subject(id.clone(), seed, cfg.noise_sigma);
        let mut files = BTreeMap::new();
        for (key, t) in [
            ("on", &s.on.transients),
            ("off", &s.off.transients),
            ("on_mean", &s.on_mean),
            ("off_mean", &s.off_mean),
        ] {
            let name = format!("{}.{}.cxt", id, key);
            write_cxt1(dir.join(&name), &t.cast::<f32>())?;
            files.insert(key.to_string(), name);
        }
        samples.push(SampleEntry {
            id,
            seed,
            split: split_of(i, cfg.subjects, cfg.val, cfg.test),
            files,
            mask: None,
            labels: Labels {
                field: "3T".into(),
                contrast: "edited".into(),
            },
        });
    }
    let index = DatasetIndex {
        kind: DatasetKind::MrsFid,
        seed: cfg.seed,
        params: params(cfg)?,
        samples,
    };
    write_index(dir, &index)?;
    Ok(index)
}

pub fn load_mrs_subject(dir: impl AsRef<Path>, entry: &SampleEntry) -> Result<MrsSubject> {
    let dir = dir.as_ref();
    let rd = |k: &str| -> Result<ComplexTensor<f64>> { read_cxt1::<f64>(dir.join(file(entry, k)?)) };
    let rec = |t: ComplexTensor<f64>, state| super::FidRecord {
        transients: t,
        edit_state: state,
        dwell_s: super::DEFAULT_DWELL_S,
    };
    Ok(MrsSubject {
        id: entry.id.clone(),
        seed: entry.seed,
        on: rec(rd("on")?, EditState::On),
        off: rec(rd("off")?, EditState::Off),
        on_mean: rd("on_mean")?,
        off_mean: rd("off_mean")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::{kspace_to_image, average_transients};

    #[test]
    fn mri_generation_is_reproducible() {
        let cfg = MriGenConfig {
            height: 16,
            width: 16,
            coils: 2,
            samples: 3,
            val: 1,
            test: 1,
            acceleration: 4,
            seed: 5,
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ia = generate_mri(a.path(), &cfg).unwrap();
        generate_mri(b.path(), &cfg).unwrap();
        for name in ["index.json", "s0001.kspace.cxt", "s0002.target.cxt"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
        assert_eq!(read_index(a.path()).unwrap(), ia);
        assert_eq!(ia.split(Split::Train).count(), 1);
        let s = load_mri_sample(a.path(), &ia.samples[0]).unwrap();
        let img = kspace_to_image(&s.kspace).unwrap();
        let err = img.sub(&s.target).unwrap().norm() / s.target.norm();
        assert!(err < 1e-4, "{}", err);
    }

    #[test]
    fn noise_free_mrs_averages_equal_truth() {
        let s = mrs_subject("x".into(), 3, 0.0);
        let avg = average_transients(&s.on, 80, 1).unwrap();
        assert!(avg.max_abs_diff(&s.on_mean) < 1e-12);
        let peak = crate::kspace::spectrum(&s.off_mean).max_abs();
        assert!((peak - 1.0).abs() < 1e-9);
    }
}

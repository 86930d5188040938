//! Checkpoint directories: one CXT1 file per parameter (and per Adam moment)
//! plus a `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::optim::{AdamConfig, OptimState};
use crate::autodiff::params::ParamStore;
use crate::ctensor::{read_cxt1, write_cxt1};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimEntry {
    pub step: u64,
    pub config: AdamConfig,
    /// `(first moment file, second moment file)` per parameter, in order.
    pub moments: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub epoch: usize,
    pub params: Vec<ParamEntry>,
    pub optimizer: Option<OptimEntry>,
    /// Caller-defined metadata (model spec, training config, ...).
    #[serde(default)]
    pub extra: serde_json::Value,
}

fn file_stem(i: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{:04}_{}", i, clean)
}

pub fn save_checkpoint<T: Real>(
    dir: impl AsRef<Path>,
    store: &ParamStore<T>,
    optim: Option<&OptimState<T>>,
    epoch: usize,
    extra: serde_json::Value,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut params = Vec::with_capacity(store.len());
    for (i, p) in store.iter().enumerate() {
        let file = format!("{}.cxt", file_stem(i, &p.name));
        write_cxt1(dir.join(&file), p.value())?;
        params.push(ParamEntry {
            name: p.name.clone(),
            file,
            shape: p.value().shape().to_vec(),
            trainable: p.trainable,
        });
    }
    let optimizer = match optim {
        Some(st) => {
            let mdir = dir.join("adam");
            fs::create_dir_all(&mdir)?;
            let mut moments = Vec::with_capacity(st.m.len());
            for (i, p) in store.iter().enumerate() {
                let stem = file_stem(i, &p.name);
                let mf = format!("adam/{}.m.cxt", stem);
                let vf = format!("adam/{}.v.cxt", stem);
                write_cxt1(dir.join(&mf), &st.m[i])?;
                write_cxt1(dir.join(&vf), &st.v[i])?;
                moments.push((mf, vf));
            }
            Some(OptimEntry {
                step: st.step,
                config: st.config,
                moments,
            })
        }
        None => None,
    };
    let manifest = CheckpointManifest {
        epoch,
        params,
        optimizer,
        extra,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<CheckpointManifest> {
    let bytes = fs::read(dir.as_ref().join(MANIFEST))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Loads parameter values (matched by name) into `store` and, when both are
/// present, the optimizer moments into `optim`. Returns the manifest.
pub fn load_checkpoint<T: Real>(
    dir: impl AsRef<Path>,
    store: &mut ParamStore<T>,
    optim: Option<&mut OptimState<T>>,
) -> Result<CheckpointManifest> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    if manifest.params.len() != store.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} parameters, model has {}",
            manifest.params.len(),
            store.len()
        )));
    }
    for e in &manifest.params {
        let id = store
            .find(&e.name)
            .ok_or_else(|| Error::Config(format!("checkpoint parameter {} not in model", e.name)))?;
        store.set_value(id, read_cxt1(dir.join(&e.file))?)?;
        store.set_trainable(id, e.trainable);
    }
    if let (Some(st), Some(oe)) = (optim, manifest.optimizer.as_ref()) {
        st.step = oe.step;
        st.config = oe.config;
        for (i, (mf, vf)) in oe.moments.iter().enumerate() {
            let name = &manifest.params[i].name;
            let id = store.find(name).unwrap();
            st.m[id.0] = read_cxt1(dir.join(mf))?;
            st.v[id.0] = read_cxt1(dir.join(vf))?;
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::adam_step;
    use crate::ctensor::ComplexTensor;

    fn store(seed: u64) -> ParamStore<f32> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        s.add("enc/0.weight", ComplexTensor::randn(&[3, 2], &mut r));
        let b = s.add("enc/0.bias", ComplexTensor::randn(&[3], &mut r));
        s.set_trainable(b, false);
        s
    }

    #[test]
    fn roundtrip_with_optimizer() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = store(1);
        let mut st = OptimState::new(&a, AdamConfig::default());
        a.grad_mut(crate::autodiff::ParamId(0)).set(0, (1.0, -1.0));
        adam_step(&mut a, &mut st, 1e-2).unwrap();
        save_checkpoint(dir.path(), &a, Some(&st), 7, serde_json::json!({"note": 1})).unwrap();

        let mut b = store(2);
        let mut st2 = OptimState::new(&b, AdamConfig::default());
        let m = load_checkpoint(dir.path(), &mut b, Some(&mut st2)).unwrap();
        assert_eq!(m.epoch, 7);
        assert_eq!(m.extra["note"], 1);
        for (p, q) in a.iter().zip(b.iter()) {
            assert!(p.value() == q.value());
            assert_eq!(p.trainable, q.trainable);
        }
        assert_eq!(st2.step, 1);
        assert!(st2.m[0] == st.m[0] && st2.v[0] == st.v[0]);
    }

    #[test]
    fn mismatched_store_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &store(1), None, 0, serde_json::Value::Null).unwrap();
        let mut other = ParamStore::<f32>::new();
        other.add("x", ComplexTensor::zeros(&[1]));
        assert!(load_checkpoint(dir.path(), &mut other, None).is_err());
        let mut renamed = ParamStore::<f32>::new();
        renamed.add("a", ComplexTensor::zeros(&[3, 2]));
        renamed.add("b", ComplexTensor::zeros(&[3]));
        assert!(load_checkpoint(dir.path(), &mut renamed, None).is_err());
    }
}

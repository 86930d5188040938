//! Small end-to-end runs through the public API.

use aftnet::kspace::spectrum;
use aftnet::models::{denoise_forward, Model, ModelSpec, Variant};
use aftnet::train::{load_model, phantom_examples, reconstruct, save_model, TrainConfig, Trainer};
use aftnet::ComplexTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_mri(variant: Variant) -> ModelSpec {
    ModelSpec {
        widths: vec![4, 8],
        groups: 2,
        ..ModelSpec::mri(variant, 2, 16, 16)
    }
}

#[test]
fn fresh_spectral_model_is_the_plain_spectrum() {
    let spec = ModelSpec {
        widths: vec![4, 8],
        groups: 2,
        ..ModelSpec::mrs(Variant::I, 128)
    };
    let model = Model::<f64>::new(spec).unwrap();
    // Spectra within the bias offset of the trainable transform, as for
    // normalised FIDs.
    let fid = ComplexTensor::<f64>::randn(&[128], &mut ChaCha8Rng::seed_from_u64(4)).scale(0.05);
    let out = denoise_forward(&model, &fid).unwrap();
    let want = spectrum(&fid);
    assert!(out.max_abs_diff(&want) < 1e-9 * want.max_abs().max(1.0));
}

#[test]
fn training_lowers_loss_and_checkpoints_round_trip() {
    let train = phantom_examples::<f32>(3, (16, 16), 2, 4, 1).unwrap();
    let val = phantom_examples::<f32>(1, (16, 16), 2, 4, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(Model::new(small_mri(Variant::Ki)).unwrap(), cfg).unwrap();
    t.fit(&train, &val, |_, _| Ok(())).unwrap();
    assert!(t.curve.last().unwrap().train_loss < t.curve[0].train_loss);

    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &t.model).unwrap();
    let back = load_model::<f32>(dir.path()).unwrap();
    let (a, _) = reconstruct(&t.model, &val[0]).unwrap();
    let (b, _) = reconstruct(&back, &val[0]).unwrap();
    assert!(a == b);
}

#[test]
fn staged_start_reproduces_the_image_model() {
    let ex = phantom_examples::<f32>(1, (16, 16), 2, 4, 3).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(Model::new(small_mri(Variant::I)).unwrap(), cfg).unwrap();
    t.fit(&ex, &ex, |_, _| Ok(())).unwrap();
    let mut ki = Model::<f32>::new(small_mri(Variant::Ki)).unwrap();
    assert_eq!(ki.load_matching(&t.model.store), t.model.store.len());
    let (a, _) = reconstruct(&t.model, &ex[0]).unwrap();
    let (b, _) = reconstruct(&ki, &ex[0]).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-5 * a.max_abs());
}

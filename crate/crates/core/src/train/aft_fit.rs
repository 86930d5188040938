//! Regression of a randomly initialised AFT block onto the exact DFT.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::aft::{dft_oracle_1d_with, AftBlock, AftConfig, Direction, Normalization, DEFAULT_ACTIVATION_OFFSET};
use crate::autodiff::{adam_step, OptimState, ParamStore, Tape};
use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};
use crate::kspace::sample_seed;
use crate::metrics::nrmse;

use super::{CurveRow, TrainConfig};

#[derive(Clone, Debug)]
pub struct AftFitConfig {
    pub n: usize,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub direction: Direction,
    pub normalization: Normalization,
    pub activation_offset: f64,
    /// Standard deviation of the complex input entries.
    pub input_std: f64,
    /// Independent initialisations; the lowest final training loss wins.
    pub restarts: usize,
    pub train: TrainConfig,
}

impl Default for AftFitConfig {
    fn default() -> Self {
        Self {
            n: 32,
            train_pairs: 500,
            val_pairs: 100,
            direction: Direction::Forward,
            normalization: Normalization::OneOverSqrtN,
            activation_offset: DEFAULT_ACTIVATION_OFFSET,
            input_std: 1.0,
            restarts: 5,
            train: TrainConfig::default(),
        }
    }
}

pub struct AftFit {
    pub store: ParamStore<f64>,
    pub block: AftBlock,
    pub curve: Vec<CurveRow>,
    /// NRMSE of the block output against the oracle over the validation set.
    pub val_nrmse: f64,
}

/// `count` circular complex Gaussian vectors `[count, n]` with entry standard
/// deviation `std`, and their DFTs.
pub fn dft_pairs(
    n: usize,
    count: usize,
    std: f64,
    dir: Direction,
    norm: Normalization,
    seed: u64,
) -> (ComplexTensor<f64>, ComplexTensor<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std * std::f64::consts::FRAC_1_SQRT_2;
    let x = ComplexTensor::from_fn(&[count, n], |_| {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        (s * a, s * b)
    });
    let y = dft_oracle_1d_with(&x, dir, norm);
    (x, y)
}

fn row(t: &ComplexTensor<f64>, i: usize) -> ComplexTensor<f64> {
    let n = t.last_dim();
    let (re, im) = (t.re(), t.im());
    ComplexTensor::new(re[i * n..(i + 1) * n].to_vec(), im[i * n..(i + 1) * n].to_vec(), &[1, n]).expect("row")
}

fn predict(block: &AftBlock, store: &ParamStore<f64>, x: &ComplexTensor<f64>) -> Result<ComplexTensor<f64>> {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let y = block.forward(&mut tape, store, v)?;
    Ok(tape.value(y).clone())
}

fn flat(t: &ComplexTensor<f64>) -> Vec<f64> {
    t.re().iter().chain(t.im()).copied().collect()
}

struct Run {
    store: ParamStore<f64>,
    block: AftBlock,
    curve: Vec<CurveRow>,
}

fn train_once(
    cfg: &AftFitConfig,
    init_seed: u64,
    pairs: &[(ComplexTensor<f64>, Arc<ComplexTensor<f64>>)],
    val: &(ComplexTensor<f64>, Arc<ComplexTensor<f64>>),
) -> Result<Run> {
    let mut store = ParamStore::new();
    let block_cfg = AftConfig {
        activation_offset: cfg.activation_offset,
        ..AftConfig::random(cfg.n, cfg.direction).with_normalization(cfg.normalization)
    };
    let block = AftBlock::new(&mut store, "aft", block_cfg, &mut ChaCha8Rng::seed_from_u64(init_seed));
    let mut optim = OptimState::new(&store, cfg.train.adam);
    let mut curve = Vec::with_capacity(cfg.train.epochs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for e in 0..cfg.train.epochs {
        let lr = cfg.train.lr(e);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(sample_seed(init_seed, e)));
        let mut total = 0.0;
        for &i in &order {
            let mut tape = Tape::new();
            let x = tape.constant(pairs[i].0.clone());
            let y = block.forward(&mut tape, &store, x)?;
            let l = tape.mse(y, Arc::clone(&pairs[i].1))?;
            let lv = tape.value(l).re()[0];
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("AFT fit loss is {} at epoch {}", lv, e)));
            }
            total += lv;
            let g = tape.backward(l)?;
            store.zero_grad();
            tape.accumulate_param_grads(&g, &mut store);
            adam_step(&mut store, &mut optim, lr)?;
        }
        let mut t = Tape::new();
        let pvar = t.constant(predict(&block, &store, &val.0)?);
        let vl = t.mse(pvar, Arc::clone(&val.1))?;
        curve.push(CurveRow {
            epoch: e + 1,
            lr,
            train_loss: total / pairs.len() as f64,
            val_loss: t.value(vl).re()[0],
        });
    }
    Ok(Run { store, block, curve })
}

/// Trains `restarts` random-init blocks with batch-1 Adam and a cosine
/// schedule and keeps the one with the lowest final training loss.
pub fn fit_aft(cfg: &AftFitConfig) -> Result<AftFit> {
    cfg.train.validate()?;
    let seed = cfg.train.seed;
    let (xt, yt) = dft_pairs(cfg.n, cfg.train_pairs, cfg.input_std, cfg.direction, cfg.normalization, sample_seed(seed, 1));
    let (xv, yv) = dft_pairs(cfg.n, cfg.val_pairs, cfg.input_std, cfg.direction, cfg.normalization, sample_seed(seed, 2));
    let pairs: Vec<_> = (0..cfg.train_pairs)
        .map(|i| (row(&xt, i), Arc::new(row(&yt, i))))
        .collect();
    let val = (xv, Arc::new(yv));
    let mut best: Option<Run> = None;
    for r in 0..cfg.restarts.max(1) {
        let run = train_once(cfg, sample_seed(seed, 100 + r), &pairs, &val)?;
        let last = |r: &Run| r.curve.last().map_or(f64::INFINITY, |c| c.train_loss);
        if best.as_ref().map_or(true, |b| last(&run) < last(b)) {
            best = Some(run);
        }
    }
    let Run { store, block, curve } = best.expect("at least one run");
    let pv = predict(&block, &store, &val.0)?;
    let val_nrmse = nrmse(&flat(&pv), &flat(&val.1))?;
    Ok(AftFit {
        store,
        block,
        curve,
        val_nrmse,
    })
}

//! Joint contrastive training of both encoders with SGD + momentum and a
//! reduce-on-plateau learning-rate schedule.

use rand::seq::SliceRandom;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    affine_softmax, gather_neighborhood, init_params, EncoderDims, MapEncoderParams,
    ObsEncoderParams, ObsFeaturizer, Standardizer,
};
use crate::contrastive::ntxent_forward_backward;
use crate::error::{Error, Result};
use crate::sampler::{augment, AugmentConfig, DataTuple};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Representation size `C`.
    pub channels: usize,
    pub tau: f64,
    pub lr: f64,
    pub momentum: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    /// Relative improvement of the epoch loss that resets the plateau counter.
    pub plateau_threshold: f64,
    pub epochs: usize,
    /// Tuples per minibatch.
    pub batch_tuples: usize,
    /// Observations per tuple expected in the dataset.
    pub obs_per_tuple: usize,
    pub kernel_size: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            channels: 5,
            tau: 1.0,
            lr: 0.002,
            momentum: 0.9,
            plateau_factor: 0.1,
            plateau_patience: 20,
            plateau_threshold: 1e-4,
            epochs: 300,
            batch_tuples: 8,
            obs_per_tuple: 6,
            kernel_size: 3,
            bins: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels < 2 {
            return Err(Error::arg("representation size must be >= 2"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::arg("tau must be > 0"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::arg("learning rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::arg("momentum must be in [0, 1)"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::arg("plateau factor must be in (0, 1)"));
        }
        if self.batch_tuples == 0 {
            return Err(Error::arg("batch size must be >= 1"));
        }
        if self.kernel_size.is_multiple_of(2) || self.bins == 0 {
            return Err(Error::arg("kernel size must be odd and bins >= 1"));
        }
        Ok(())
    }

    pub fn dims(
        &self,
        map_channels: usize,
        obs_channels: usize,
        obs_ranges: Vec<(f64, f64)>,
    ) -> EncoderDims {
        EncoderDims {
            map_channels,
            obs_channels,
            kernel_size: self.kernel_size,
            bins: self.bins,
            obs_ranges,
        }
    }
}

/// Encoder inputs for one minibatch: a map neighbourhood per anchor and the
/// pooled features of both views of its observation, aligned by index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub anchors: Vec<Vec<f64>>,
    pub views: Vec<[Vec<f64>; 2]>,
}

/// Supplies minibatches by tuple index.
pub trait BatchSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn batch(&self, indices: &[usize], rng: &mut ChaCha8Rng) -> Result<TrainBatch>;
}

/// Fresh augmentation of in-memory tuples for every batch.
pub struct TupleSource<'a> {
    pub tuples: &'a [DataTuple],
    pub aug: AugmentConfig,
    pub kernel_size: usize,
    pub featurizer: ObsFeaturizer,
}

impl BatchSource for TupleSource<'_> {
    fn len(&self) -> usize {
        self.tuples.len()
    }

    fn batch(&self, indices: &[usize], rng: &mut ChaCha8Rng) -> Result<TrainBatch> {
        let mut anchors = Vec::new();
        let mut views = Vec::new();
        for &i in indices {
            let t = &self.tuples[i];
            anchors.extend(tuple_anchors(t, self.kernel_size));
            for o in &t.observations {
                let a = self.featurizer.features(&augment(o, &self.aug, rng)?)?;
                let b = self.featurizer.features(&augment(o, &self.aug, rng)?)?;
                views.push([a, b]);
            }
        }
        Ok(TrainBatch { anchors, views })
    }
}

fn tuple_anchors(t: &DataTuple, k: usize) -> Vec<Vec<f64>> {
    let fan_in = t.map_patch.channels() * k * k;
    t.coords
        .iter()
        .map(|p| {
            let mut nb = vec![0.0; fan_in];
            gather_neighborhood(&t.map_patch, p.u, p.v, k, &mut nb);
            nb
        })
        .collect()
}

/// Compact training set: anchor neighbourhoods plus, per observation, a fixed
/// bank of features of independently augmented views. Each batch draws two
/// distinct bank entries per observation.
///
/// Memory is independent of raster size, so large datasets can be streamed
/// through once and then trained on for many epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    pub kernel_size: usize,
    pub featurizer: ObsFeaturizer,
    anchors: Vec<Vec<Vec<f64>>>,
    banks: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FeatureBank {
    pub fn new(kernel_size: usize, featurizer: ObsFeaturizer) -> Self {
        Self {
            kernel_size,
            featurizer,
            anchors: Vec::new(),
            banks: Vec::new(),
        }
    }

    /// Adds a tuple with `bank_size` augmented views per observation.
    pub fn push(
        &mut self,
        t: &DataTuple,
        aug: &AugmentConfig,
        bank_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        if bank_size < 2 {
            return Err(Error::arg("feature bank needs at least 2 views per observation"));
        }
        self.anchors.push(tuple_anchors(t, self.kernel_size));
        let mut per = Vec::with_capacity(t.n_obs());
        for o in &t.observations {
            let bank = (0..bank_size)
                .map(|_| self.featurizer.features(&augment(o, aug, rng)?))
                .collect::<Result<Vec<_>>>()?;
            per.push(bank);
        }
        self.banks.push(per);
        Ok(())
    }
}

impl BatchSource for FeatureBank {
    fn len(&self) -> usize {
        self.anchors.len()
    }

    fn batch(&self, indices: &[usize], rng: &mut ChaCha8Rng) -> Result<TrainBatch> {
        let mut anchors = Vec::new();
        let mut views = Vec::new();
        for &i in indices {
            anchors.extend(self.anchors[i].iter().cloned());
            for bank in &self.banks[i] {
                let pick = index::sample(rng, bank.len(), 2);
                views.push([bank[pick.index(0)].clone(), bank[pick.index(1)].clone()]);
            }
        }
        Ok(TrainBatch { anchors, views })
    }
}

/// Gradients w.r.t. all encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub map_weights: Vec<f64>,
    pub map_bias: Vec<f64>,
    pub obs_weights: Vec<f64>,
    pub obs_bias: Vec<f64>,
}

/// Mean loss of a batch and, when requested, its gradient w.r.t. the
/// parameters of both encoders.
pub(crate) fn forward_backward(
    map: &MapEncoderParams,
    obs: &ObsEncoderParams,
    batch: &TrainBatch,
    tau: f64,
    want_grad: bool,
) -> (f64, Option<ParamGrads>) {
    let c = map.out_channels;
    let anchors: Vec<Vec<f64>> = batch
        .anchors
        .iter()
        .map(|x| {
            let mut x = x.clone();
            map.input_norm.apply(&mut x);
            x
        })
        .collect();
    let feats: Vec<Vec<f64>> = batch
        .views
        .iter()
        .flatten()
        .map(|f| {
            let mut f = f.clone();
            obs.feature_norm.apply(&mut f);
            f
        })
        .collect();
    let zs: Vec<Vec<f64>> = anchors
        .iter()
        .map(|x| {
            let mut z = vec![0.0; c];
            affine_softmax(&map.weights, &map.bias, x, &mut z);
            z
        })
        .collect();
    let ys: Vec<Vec<f64>> = feats
        .iter()
        .map(|f| {
            let mut y = vec![0.0; c];
            affine_softmax(&obs.weights, &obs.bias, f, &mut y);
            y
        })
        .collect();
    let za: Vec<&[f64]> = zs.iter().map(|v| v.as_slice()).collect();
    let ya: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
    if !want_grad {
        return (ntxent_forward_backward(&za, &ya, tau, None), None);
    }
    let mut gz = vec![vec![0.0; c]; zs.len()];
    let mut gy = vec![vec![0.0; c]; ys.len()];
    let loss = ntxent_forward_backward(&za, &ya, tau, Some((&mut gz, &mut gy)));

    let mut grads = ParamGrads {
        map_weights: vec![0.0; map.weights.len()],
        map_bias: vec![0.0; c],
        obs_weights: vec![0.0; obs.weights.len()],
        obs_bias: vec![0.0; c],
    };
    for ((x, z), g) in anchors.iter().zip(&zs).zip(&gz) {
        accumulate_affine(x, z, g, &mut grads.map_weights, &mut grads.map_bias);
    }
    for ((f, y), g) in feats.iter().zip(&ys).zip(&gy) {
        accumulate_affine(f, y, g, &mut grads.obs_weights, &mut grads.obs_bias);
    }
    (loss, Some(grads))
}

/// Back-propagates `dL/dp` through `p = softmax(W x + b)`.
fn accumulate_affine(x: &[f64], p: &[f64], g: &[f64], gw: &mut [f64], gb: &mut [f64]) {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    let n = x.len();
    for c in 0..p.len() {
        let dl = p[c] * (g[c] - dot);
        gb[c] += dl;
        for (w, xi) in gw[c * n..(c + 1) * n].iter_mut().zip(x) {
            *w += dl * xi;
        }
    }
}

/// Mean loss of a batch under the given encoders.
pub fn batch_loss(
    map: &MapEncoderParams,
    obs: &ObsEncoderParams,
    batch: &TrainBatch,
    tau: f64,
) -> f64 {
    forward_backward(map, obs, batch, tau, false).0
}

/// Mean loss and the analytic gradient w.r.t. all encoder parameters.
pub fn batch_loss_and_grad(
    map: &MapEncoderParams,
    obs: &ObsEncoderParams,
    batch: &TrainBatch,
    tau: f64,
) -> (f64, ParamGrads) {
    let (l, g) = forward_backward(map, obs, batch, tau, true);
    (l, g.expect("gradient requested"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub map: MapEncoderParams,
    pub obs: ObsEncoderParams,
    pub curve: Vec<EpochRecord>,
}

struct Momentum {
    velocity: Vec<Vec<f64>>,
}

impl Momentum {
    fn step(&mut self, params: [&mut Vec<f64>; 4], grads: [&Vec<f64>; 4], lr: f64, mu: f64) {
        for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = mu * *vi + gi;
                *pi -= lr * *vi;
            }
        }
    }
}

/// Per-channel map and per-feature observation standardizers fitted on one
/// pass over every tuple of `source`.
pub fn fit_standardizers(
    source: &dyn BatchSource,
    dims: &EncoderDims,
    seed: u64,
) -> Result<(Standardizer, Standardizer)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let all: Vec<usize> = (0..source.len()).collect();
    let b = source.batch(&all, &mut rng)?;
    let map = Standardizer::fit(b.anchors.iter().map(|x| x.as_slice()), dims.map_channels);
    let n_feat = dims.obs_channels * (1 + dims.bins);
    let obs = Standardizer::fit(b.views.iter().flatten().map(|f| f.as_slice()), n_feat);
    Ok((map, obs))
}

/// Fits input standardizers, initializes both encoders from `cfg.seed` and
/// trains them jointly.
pub fn train(source: &dyn BatchSource, cfg: &TrainConfig, dims: &EncoderDims) -> Result<TrainOutput> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    let (map_norm, obs_norm) = fit_standardizers(source, dims, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut map, mut obs) = init_params(cfg, dims, &mut rng)?;
    map.input_norm = map_norm;
    obs.feature_norm = obs_norm;
    train_from(source, cfg, map, obs, &mut rng)
}

/// Trains from the given initial parameters.
pub fn train_from(
    source: &dyn BatchSource,
    cfg: &TrainConfig,
    mut map: MapEncoderParams,
    mut obs: ObsEncoderParams,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutput> {
    cfg.validate()?;
    map.validate()?;
    obs.validate()?;
    if source.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    if map.out_channels != cfg.channels || obs.out_channels != cfg.channels {
        return Err(Error::arg("encoder output sizes differ from the configured C"));
    }
    let mut mom = Momentum {
        velocity: vec![
            vec![0.0; map.weights.len()],
            vec![0.0; map.bias.len()],
            vec![0.0; obs.weights.len()],
            vec![0.0; obs.bias.len()],
        ],
    };
    let mut lr = cfg.lr;
    let mut best = f64::INFINITY;
    let mut bad_epochs = 0;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..source.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_tuples) {
            let batch = source.batch(chunk, rng)?;
            let (loss, grads) = batch_loss_and_grad(&map, &obs, &batch, cfg.tau);
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("loss became {loss}"),
                });
            }
            mom.step(
                [&mut map.weights, &mut map.bias, &mut obs.weights, &mut obs.bias],
                [
                    &grads.map_weights,
                    &grads.map_bias,
                    &grads.obs_weights,
                    &grads.obs_bias,
                ],
                lr,
                cfg.momentum,
            );
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        let params_finite = map
            .weights
            .iter()
            .chain(&obs.weights)
            .all(|w| w.is_finite());
        if !mean.is_finite() || !params_finite {
            return Err(Error::Training {
                epoch,
                message: "non-finite parameters".into(),
            });
        }
        curve.push(EpochRecord {
            epoch,
            loss: mean,
            lr,
        });
        if mean < best * (1.0 - cfg.plateau_threshold) {
            best = mean;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.plateau_patience {
                lr *= cfg.plateau_factor;
                bad_epochs = 0;
            }
        }
    }
    Ok(TrainOutput { map, obs, curve })
}

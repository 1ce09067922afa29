//! Map encoder `f` (pixels-to-pixels, `k x k` affine + softmax) and
//! observation encoder `g` (pooled channel statistics + affine + softmax).

mod train;

pub use train::{
    batch_loss, batch_loss_and_grad, fit_standardizers, train, train_from, BatchSource,
    EpochRecord, FeatureBank,
    ParamGrads, TrainBatch, TrainConfig, TrainOutput, TupleSource,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{BeliefMap, Raster, SimplexVec};

/// Fixed affine input standardization `(x - mean) * inv_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            inv_std: vec![1.0; n],
        }
    }

    /// Per-slot statistics of `samples`, where element `i` of a sample
    /// belongs to slot `i % n`. Constant slots keep unit scale.
    pub fn fit<'a>(samples: impl Iterator<Item = &'a [f64]>, n: usize) -> Self {
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = vec![0usize; n];
        for s in samples {
            for (i, &x) in s.iter().enumerate() {
                sum[i % n] += x;
                sq[i % n] += x * x;
                count[i % n] += 1;
            }
        }
        let mut out = Self::identity(n);
        for i in 0..n {
            if count[i] == 0 {
                continue;
            }
            let m = sum[i] / count[i] as f64;
            let var = (sq[i] / count[i] as f64 - m * m).max(0.0);
            out.mean[i] = m;
            if var.sqrt() > 1e-12 {
                out.inv_std[i] = 1.0 / var.sqrt();
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Standardizes `x` in place; element `i` uses slot `i % len`.
    pub fn apply(&self, x: &mut [f64]) {
        let n = self.len();
        for (i, v) in x.iter_mut().enumerate() {
            *v = (*v - self.mean[i % n]) * self.inv_std[i % n];
        }
    }

    fn validate(&self, n: usize, what: &str) -> Result<()> {
        if self.mean.len() != n || self.inv_std.len() != n {
            return Err(Error::arg(format!("{what} standardizer must have {n} entries")));
        }
        if self
            .mean
            .iter()
            .chain(&self.inv_std)
            .any(|x| !x.is_finite())
            || self.inv_std.iter().any(|&s| s <= 0.0)
        {
            return Err(Error::arg(format!("{what} standardizer must be finite with positive scales")));
        }
        Ok(())
    }

    /// Weights and bias that act on raw inputs exactly as `(w, bias)` act on
    /// standardized ones.
    fn fold(&self, w: &[f64], bias: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_in = w.len() / bias.len();
        let n = self.len();
        let mut wf = w.to_vec();
        let mut bf = bias.to_vec();
        for (c, b) in bf.iter_mut().enumerate() {
            for i in 0..n_in {
                let wi = &mut wf[c * n_in + i];
                *wi *= self.inv_std[i % n];
                *b -= *wi * self.mean[i % n];
            }
        }
        (wf, bf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapEncoderParams {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// `out_channels x (in_channels * k^2)`, row-major, acting on
    /// standardized inputs.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Per input channel.
    pub input_norm: Standardizer,
}

impl MapEncoderParams {
    pub fn zeros(kernel_size: usize, in_channels: usize, out_channels: usize) -> Result<Self> {
        let p = Self {
            kernel_size,
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            bias: vec![0.0; out_channels],
            input_norm: Standardizer::identity(in_channels),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::arg(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::arg("encoder channel counts must be positive"));
        }
        if self.weights.len() != self.out_channels * self.fan_in()
            || self.bias.len() != self.out_channels
        {
            return Err(Error::arg("map encoder parameter shapes are inconsistent"));
        }
        if self.weights.iter().chain(&self.bias).any(|x| !x.is_finite()) {
            return Err(Error::arg("map encoder parameters must be finite"));
        }
        self.input_norm.validate(self.in_channels, "map input")
    }

    /// Weights and bias acting directly on raw neighbourhoods.
    pub fn folded(&self) -> (Vec<f64>, Vec<f64>) {
        self.input_norm.fold(&self.weights, &self.bias)
    }
}

/// Fixed per-channel value ranges that define the histogram bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsEncoderParams {
    pub in_channels: usize,
    pub bins: usize,
    pub out_channels: usize,
    /// `out_channels x (in_channels * (1 + bins))`, row-major, acting on
    /// standardized features.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// `(lo, hi)` per input channel; bins split this interval evenly.
    pub ranges: Vec<(f64, f64)>,
    /// Per feature.
    pub feature_norm: Standardizer,
}

impl ObsEncoderParams {
    pub fn zeros(
        in_channels: usize,
        bins: usize,
        out_channels: usize,
        ranges: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let p = Self {
            in_channels,
            bins,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * (1 + bins)],
            bias: vec![0.0; out_channels],
            ranges,
            feature_norm: Standardizer::identity(in_channels * (1 + bins)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn feature_len(&self) -> usize {
        self.in_channels * (1 + self.bins)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::arg("histogram needs at least one bin"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::arg("encoder channel counts must be positive"));
        }
        if self.weights.len() != self.out_channels * self.feature_len()
            || self.bias.len() != self.out_channels
            || self.ranges.len() != self.in_channels
        {
            return Err(Error::arg("observation encoder parameter shapes are inconsistent"));
        }
        if self
            .weights
            .iter()
            .chain(&self.bias)
            .chain(self.ranges.iter().flat_map(|(a, b)| [a, b]))
            .any(|x| !x.is_finite())
        {
            return Err(Error::arg("observation encoder parameters must be finite"));
        }
        if self.ranges.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::arg("histogram range has lo > hi"));
        }
        self.feature_norm.validate(self.feature_len(), "observation feature")
    }

    /// Weights and bias acting directly on raw features.
    pub fn folded(&self) -> (Vec<f64>, Vec<f64>) {
        self.feature_norm.fold(&self.weights, &self.bias)
    }

    pub(crate) fn featurizer(&self) -> ObsFeaturizer {
        ObsFeaturizer {
            bins: self.bins,
            ranges: self.ranges.clone(),
        }
    }
}

/// Pooled observation features: channel means then one normalized
/// histogram per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsFeaturizer {
    pub bins: usize,
    pub ranges: Vec<(f64, f64)>,
}

impl ObsFeaturizer {
    pub fn features(&self, view: &Raster) -> Result<Vec<f64>> {
        let d = self.ranges.len();
        if view.channels() != d {
            return Err(Error::arg(format!(
                "observation has {} channels, encoder expects {d}",
                view.channels()
            )));
        }
        let b = self.bins;
        let mut f = vec![0.0; d * (1 + b)];
        let mut counts = vec![0u32; d * b];
        let scales: Vec<f64> = self
            .ranges
            .iter()
            .map(|(lo, hi)| if hi > lo { b as f64 / (hi - lo) } else { 0.0 })
            .collect();
        for px in view.data().chunks_exact(d) {
            for (ch, &x) in px.iter().enumerate() {
                f[ch] += x;
                let t = (x - self.ranges[ch].0) * scales[ch];
                let bin = if t <= 0.0 { 0 } else { (t as usize).min(b - 1) };
                counts[ch * b + bin] += 1;
            }
        }
        let n = (view.height() * view.width()) as f64;
        for m in f.iter_mut().take(d) {
            *m /= n;
        }
        for (dst, &c) in f[d..].iter_mut().zip(&counts) {
            *dst = c as f64 / n;
        }
        Ok(f)
    }
}

/// Numerically stable softmax in place.
pub(crate) fn softmax_inplace(x: &mut [f64]) {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in x.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in x.iter_mut() {
        *v /= s;
    }
}

/// `out = W x + b` followed by softmax.
#[inline]
pub(crate) fn affine_softmax(w: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (c, o) in out.iter_mut().enumerate() {
        let row = &w[c * n..(c + 1) * n];
        *o = bias[c] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    softmax_inplace(out);
}

/// Edge-replicated `k x k` neighbourhood of pixel `(u, v)`, laid out as
/// `(dr * k + dc) * channels + ch`.
pub fn gather_neighborhood(patch: &Raster, u: usize, v: usize, k: usize, out: &mut [f64]) {
    let ch = patch.channels();
    let r = (k / 2) as isize;
    let (h, w) = (patch.height() as isize, patch.width() as isize);
    let mut i = 0;
    for dr in -r..=r {
        let rr = (u as isize + dr).clamp(0, h - 1) as usize;
        for dc in -r..=r {
            let cc = (v as isize + dc).clamp(0, w - 1) as usize;
            out[i..i + ch].copy_from_slice(patch.pixel(rr, cc));
            i += ch;
        }
    }
}

/// Encodes a map patch into a belief map of the same height and width.
pub fn encode_map(params: &MapEncoderParams, patch: &Raster) -> Result<BeliefMap> {
    params.validate()?;
    if patch.channels() != params.in_channels {
        return Err(Error::arg(format!(
            "map patch has {} channels, encoder expects {}",
            patch.channels(),
            params.in_channels
        )));
    }
    let (h, w, c) = (patch.height(), patch.width(), params.out_channels);
    let k = params.kernel_size;
    let mut data = vec![0.0; h * w * c];
    let mut nb = vec![0.0; params.fan_in()];
    let interior = |u: usize, v: usize| {
        let r = k / 2;
        u >= r && v >= r && u + r < h && v + r < w
    };
    let d = patch.channels();
    let raw = patch.data();
    let (wf, bf) = params.folded();
    for u in 0..h {
        for v in 0..w {
            if interior(u, v) {
                // fast path: rows of the neighbourhood are contiguous in memory
                let r = k / 2;
                let mut i = 0;
                for rr in u - r..=u + r {
                    let start = (rr * w + v - r) * d;
                    nb[i..i + k * d].copy_from_slice(&raw[start..start + k * d]);
                    i += k * d;
                }
            } else {
                gather_neighborhood(patch, u, v, k, &mut nb);
            }
            let o = (u * w + v) * c;
            affine_softmax(&wf, &bf, &nb, &mut data[o..o + c]);
        }
    }
    Ok(BeliefMap::from_parts_unchecked(h, w, c, data))
}

/// Belief of a single pixel; equals `encode_map(..)[u, v]`.
pub fn encode_map_pixel(params: &MapEncoderParams, patch: &Raster, u: usize, v: usize) -> Vec<f64> {
    let mut nb = vec![0.0; params.fan_in()];
    gather_neighborhood(patch, u, v, params.kernel_size, &mut nb);
    let mut out = vec![0.0; params.out_channels];
    let (wf, bf) = params.folded();
    affine_softmax(&wf, &bf, &nb, &mut out);
    out
}

/// Encodes one observation view into a representation of size `C`.
pub fn encode_obs(params: &ObsEncoderParams, view: &Raster) -> Result<SimplexVec> {
    params.validate()?;
    let f = params.featurizer().features(view)?;
    Ok(encode_obs_features(params, &f))
}

pub(crate) fn encode_obs_features(params: &ObsEncoderParams, f: &[f64]) -> SimplexVec {
    let mut out = vec![0.0; params.out_channels];
    let (wf, bf) = params.folded();
    affine_softmax(&wf, &bf, f, &mut out);
    SimplexVec::from_unnormalized(out).expect("softmax output is a valid simplex")
}

/// Shapes needed to initialize both encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDims {
    pub map_channels: usize,
    pub obs_channels: usize,
    pub kernel_size: usize,
    pub bins: usize,
    pub obs_ranges: Vec<(f64, f64)>,
}

/// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases and
/// identity standardizers.
pub fn init_params(
    cfg: &TrainConfig,
    dims: &EncoderDims,
    rng: &mut impl Rng,
) -> Result<(MapEncoderParams, ObsEncoderParams)> {
    let mut map = MapEncoderParams::zeros(dims.kernel_size, dims.map_channels, cfg.channels)?;
    let mut obs = ObsEncoderParams::zeros(
        dims.obs_channels,
        dims.bins,
        cfg.channels,
        dims.obs_ranges.clone(),
    )?;
    let bound = 1.0 / (map.fan_in() as f64).sqrt();
    map.weights
        .iter_mut()
        .for_each(|w| *w = rng.gen_range(-bound..bound));
    let bound = 1.0 / (obs.feature_len() as f64).sqrt();
    obs.weights
        .iter_mut()
        .for_each(|w| *w = rng.gen_range(-bound..bound));
    Ok((map, obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::WorldPose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_raster(h: usize, w: usize, d: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        Raster::new(h, w, d, data, 1.0, WorldPose::origin()).unwrap()
    }

    #[test]
    fn zero_map_params_give_uniform_beliefs() {
        let p = MapEncoderParams::zeros(3, 2, 4).unwrap();
        let bm = encode_map(&p, &random_raster(7, 5, 2, 0)).unwrap();
        assert!(bm.data().iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!((bm.height(), bm.width()), (7, 5));
    }

    #[test]
    fn bias_only_closed_form() {
        let c = 5;
        let t = 1.7;
        let mut p = MapEncoderParams::zeros(3, 1, c).unwrap();
        p.bias[0] = t;
        let bm = encode_map(&p, &random_raster(4, 4, 1, 1)).unwrap();
        let expected = t.exp() / (t.exp() + (c - 1) as f64);
        for px in bm.data().chunks_exact(c) {
            assert!((px[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn folded_standardizer_matches_explicit_standardization() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = MapEncoderParams::zeros(3, 2, 4).unwrap();
        for w in p.weights.iter_mut().chain(&mut p.bias) {
            *w = rng.gen_range(-1.0..1.0);
        }
        p.input_norm.mean = vec![0.4, -0.2];
        p.input_norm.inv_std = vec![3.0, 0.5];
        let data: Vec<f64> = (0..5 * 6 * 2).map(|_| rng.gen_range(0.0..1.0)).collect();
        let patch = Raster::new(5, 6, 2, data, 1.0, WorldPose::origin()).unwrap();
        let bm = encode_map(&p, &patch).unwrap();
        for (u, v) in [(0, 0), (2, 3), (4, 5)] {
            let mut nb = vec![0.0; p.fan_in()];
            gather_neighborhood(&patch, u, v, 3, &mut nb);
            p.input_norm.apply(&mut nb);
            let mut z = vec![0.0; 4];
            affine_softmax(&p.weights, &p.bias, &nb, &mut z);
            for (a, b) in z.iter().zip(bm.pixel(u, v)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardizer_fit_gives_zero_mean_unit_variance() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0, 0.5 * i as f64 + 1.0]).collect();
        let s = Standardizer::fit(xs.iter().map(|x| x.as_slice()), 3);
        let mut ys = xs.clone();
        ys.iter_mut().for_each(|y| s.apply(y));
        for j in [0, 2] {
            let m: f64 = ys.iter().map(|y| y[j]).sum::<f64>() / 50.0;
            let v: f64 = ys.iter().map(|y| (y[j] - m).powi(2)).sum::<f64>() / 50.0;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.inv_std[1], 1.0);
    }

    #[test]
    fn constant_patch_gives_constant_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = TrainConfig::default();
        let dims = EncoderDims {
            map_channels: 3,
            obs_channels: 3,
            kernel_size: 3,
            bins: 8,
            obs_ranges: vec![(0.0, 1.0); 3],
        };
        let (map, _) = init_params(&cfg, &dims, &mut rng).unwrap();
        let patch = Raster::new(6, 9, 3, vec![0.3; 6 * 9 * 3], 1.0, WorldPose::origin()).unwrap();
        let bm = encode_map(&map, &patch).unwrap();
        let first = bm.pixel(0, 0).to_vec();
        for u in 0..6 {
            for v in 0..9 {
                assert_eq!(bm.pixel(u, v), first.as_slice());
            }
        }
    }

    #[test]
    fn fast_and_gathered_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = MapEncoderParams::zeros(5, 2, 3).unwrap();
        p.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let patch = random_raster(9, 11, 2, 5);
        let bm = encode_map(&p, &patch).unwrap();
        for u in 0..9 {
            for v in 0..11 {
                let px = encode_map_pixel(&p, &patch, u, v);
                for (a, b) in px.iter().zip(bm.pixel(u, v)) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn output_size_matches_input_for_all_sizes() {
        let p = MapEncoderParams::zeros(3, 1, 2).unwrap();
        for h in 3..7 {
            for w in 3..7 {
                let bm = encode_map(&p, &random_raster(h, w, 1, 0)).unwrap();
                assert_eq!((bm.height(), bm.width()), (h, w));
            }
        }
    }

    #[test]
    fn channel_mismatch_errors() {
        let p = MapEncoderParams::zeros(3, 2, 2).unwrap();
        assert!(matches!(
            encode_map(&p, &random_raster(4, 4, 3, 0)),
            Err(Error::Argument(_))
        ));
        let o = ObsEncoderParams::zeros(3, 4, 2, vec![(0.0, 1.0); 3]).unwrap();
        assert!(encode_obs(&o, &random_raster(4, 4, 2, 0)).is_err());
        assert!(MapEncoderParams::zeros(2, 1, 1).is_err());
    }

    #[test]
    fn zero_obs_params_give_uniform() {
        let o = ObsEncoderParams::zeros(3, 8, 5, vec![(0.0, 1.0); 3]).unwrap();
        let y = encode_obs(&o, &random_raster(8, 8, 3, 3)).unwrap();
        assert!(y.as_slice().iter().all(|&x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn obs_encoding_is_c4_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut o = ObsEncoderParams::zeros(3, 8, 5, vec![(0.0, 1.0); 3]).unwrap();
        o.weights.iter_mut().for_each(|w| *w = rng.gen_range(-2.0..2.0));
        let view = random_raster(10, 10, 3, 9);
        let y = encode_obs(&o, &view).unwrap();
        for q in 1..4 {
            let r = encode_obs(&o, &view.rotate90(q)).unwrap();
            // only the summation order of the channel means changes
            for (a, b) in r.as_slice().iter().zip(y.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_view_follows_closed_form() {
        // A 2x2 single-channel view with values {0.1, 0.2, 0.3, 0.4} has mean
        // 0.25; adding 0.25 doubles the mean to 0.5. With two bins on [0, 1]
        // the histograms are [1, 0] and [0.5, 0.5].
        let mut o = ObsEncoderParams::zeros(1, 2, 2, vec![(0.0, 1.0)]).unwrap();
        o.weights = vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0];
        o.bias = vec![0.1, -0.2];
        let base = Raster::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4], 1.0, WorldPose::origin()).unwrap();
        let shifted =
            Raster::new(2, 2, 1, vec![0.35, 0.45, 0.55, 0.65], 1.0, WorldPose::origin()).unwrap();
        let closed = |mean: f64, h0: f64, h1: f64| {
            let l0 = 0.1 + 1.0 * mean + 2.0 * h0 - 1.0 * h1;
            let l1 = -0.2 + 0.5 * mean + 0.0 * h0 + 3.0 * h1;
            let e0 = l0.exp();
            let e1 = l1.exp();
            [e0 / (e0 + e1), e1 / (e0 + e1)]
        };
        let y = encode_obs(&o, &base).unwrap();
        let want = closed(0.25, 1.0, 0.0);
        assert!((y.as_slice()[0] - want[0]).abs() < 1e-12);
        let y = encode_obs(&o, &shifted).unwrap();
        let want = closed(0.5, 0.5, 0.5);
        assert!((y.as_slice()[0] - want[0]).abs() < 1e-12);
        assert!((y.as_slice()[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let dims = EncoderDims {
            map_channels: 4,
            obs_channels: 2,
            kernel_size: 5,
            bins: 49,
            obs_ranges: vec![(0.0, 1.0); 2],
        };
        let cfg = TrainConfig::default();
        let a = init_params(&cfg, &dims, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = init_params(&cfg, &dims, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        // map fan-in 4*25 = 100, observation fan-in 2*50 = 100
        assert!(a.0.weights.iter().chain(&a.1.weights).all(|w| w.abs() <= 0.1));
        assert!(a.0.bias.iter().chain(&a.1.bias).all(|&b| b == 0.0));
    }

    #[test]
    fn init_does_not_saturate() {
        let dims = EncoderDims {
            map_channels: 3,
            obs_channels: 3,
            kernel_size: 3,
            bins: 8,
            obs_ranges: vec![(0.0, 1.0); 3],
        };
        let cfg = TrainConfig::default();
        let c = cfg.channels as f64;
        for seed in 0..100 {
            let (map, _) = init_params(&cfg, &dims, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let bm = encode_map(&map, &random_raster(16, 16, 3, 1000 + seed)).unwrap();
            assert!(bm
                .data()
                .iter()
                .all(|&p| p >= 0.1 / c && p <= 10.0 / c));
        }
    }

    #[test]
    fn histogram_edges_and_clipping() {
        let f = ObsFeaturizer {
            bins: 4,
            ranges: vec![(0.0, 1.0)],
        };
        let view = Raster::new(
            1,
            6,
            1,
            vec![-0.5, 0.0, 0.26, 0.5, 0.99, 1.5],
            1.0,
            WorldPose::origin(),
        )
        .unwrap();
        let feats = f.features(&view).unwrap();
        let n = 6.0;
        assert_eq!(&feats[1..], &[2.0 / n, 1.0 / n, 1.0 / n, 2.0 / n]);
    }
}

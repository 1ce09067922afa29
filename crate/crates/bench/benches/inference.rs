use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use croscale_core::contrastive::{ntxent_loss, LossBatch};
use croscale_core::encoders::{encode_map, encode_obs, MapEncoderParams, ObsEncoderParams};
use croscale_core::inference::{likelihood_map, DirichletModel};
use croscale_core::{Raster, SimplexVec, WorldPose};

/// Deterministic values in [0, 1) from the golden-ratio sequence.
fn filler(n: usize, offset: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((i + offset) as f64 * 0.618_033_988_749_895).fract())
        .collect()
}

fn map_params() -> MapEncoderParams {
    let mut p = MapEncoderParams::zeros(3, 3, 5).unwrap();
    let len = p.weights.len();
    p.weights = filler(len, 7).into_iter().map(|x| x - 0.5).collect();
    p
}

fn patch(n: usize) -> Raster {
    Raster::new(n, n, 3, filler(n * n * 3, 0), 1.0, WorldPose::origin()).unwrap()
}

fn bench_encoders(c: &mut Criterion) {
    let map = map_params();
    let p = patch(512);
    c.bench_function("encode_map 512x512x3 k=3 C=5", |b| {
        b.iter(|| encode_map(black_box(&map), black_box(&p)).unwrap())
    });

    let mut obs = ObsEncoderParams::zeros(3, 8, 5, vec![(0.0, 1.0); 3]).unwrap();
    let len = obs.weights.len();
    obs.weights = filler(len, 3).into_iter().map(|x| x - 0.5).collect();
    let view = Raster::new(224, 224, 3, filler(224 * 224 * 3, 11), 4.0, WorldPose::origin()).unwrap();
    c.bench_function("encode_obs 224x224x3 bins=8 C=5", |b| {
        b.iter(|| encode_obs(black_box(&obs), black_box(&view)).unwrap())
    });
}

fn bench_likelihood(c: &mut Criterion) {
    let bm = encode_map(&map_params(), &patch(512)).unwrap();
    let y = SimplexVec::from_unnormalized(vec![0.1, 0.4, 0.2, 0.2, 0.1]).unwrap();
    let model = DirichletModel::default();
    c.bench_function("likelihood_map 512x512 C=5", |b| {
        b.iter(|| likelihood_map(black_box(&bm), black_box(&y), model).unwrap())
    });
}

fn bench_loss(c: &mut Criterion) {
    let simplex = |seed: usize| SimplexVec::from_unnormalized(filler(5, seed).iter().map(|x| x + 0.05).collect()).unwrap();
    let anchors: Vec<SimplexVec> = (0..48).map(|i| simplex(10 * i)).collect();
    let views: Vec<[SimplexVec; 2]> = (0..48).map(|i| [simplex(10 * i + 3), simplex(10 * i + 6)]).collect();
    let batch = LossBatch::new(anchors, views, 1.0).unwrap();
    c.bench_function("ntxent_loss 48 anchors", |b| b.iter(|| ntxent_loss(black_box(&batch)).unwrap()));
}

criterion_group!(benches, bench_encoders, bench_likelihood, bench_loss);
criterion_main!(benches);

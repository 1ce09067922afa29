use std::path::{Path, PathBuf};
use std::time::Instant;

use croscale_core::encoders::{
    encode_map, encode_obs, init_params, train, EncoderDims, FeatureBank, ObsFeaturizer, TrainConfig,
};
use croscale_core::filter::{evaluate_filter, simulate_trajectory, FilterConfig, WeightMode};
use croscale_core::inference::{
    belief_profile, best_theta, likelihood_map, recall_at_k, segmentation_render, tuple_recall,
    DirichletField, DirichletModel, THETA_GRID,
};
use croscale_core::io::config::trajectory_from_kv;
use croscale_core::io::dataset::read_tuple;
use croscale_core::io::{
    assign_splits, read_belief, read_params, read_raster, read_repset, write_belief, write_params,
    write_raster, write_repset, Dataset, DatasetWriter, ExperimentConfig, KeyValues, ModelParams,
    RepRecord, Split,
};
use croscale_core::sampler::{extract_obs, sample_tuple, tuple_rng};
use croscale_core::synth::generate_world;
use croscale_core::{BeliefMap, Error, PatchFrame, PixelCoord, Raster, SimplexVec, WorldPose};

use crate::error::{io_err, usage, CliResult};
use crate::output::{create, save_classes, save_gray, write_csv, write_raw_f32};
use crate::{
    Cli, Command, EncodeMapArgs, EncodeObsArgs, EvalRecallArgs, FilterArgs, FilterMode, InferArgs,
    ProfileArgs, RenderSegArgs, SampleArgs, SynthArgs, TrainArgs,
};

/// Pixel stored in representation records without a known truth location.
pub const NO_TRUTH: usize = u32::MAX as usize;

const WORLD_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const BANK_STREAM: u64 = 3;
const TRAJ_STREAM: u64 = 4;
const FILTER_STREAM: u64 = 5;

/// Independent sub-seed of `seed` (splitmix64 finalizer).
fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Sample(a) => sample(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::EncodeMap(a) => encode_map_cmd(a),
        Command::EncodeObs(a) => encode_obs_cmd(a, seed),
        Command::Infer(a) => infer(a),
        Command::Filter(a) => filter(a, seed),
        Command::EvalRecall(a) => eval_recall(a, seed),
        Command::RenderSeg(a) => render_seg(a),
        Command::Profile(a) => profile(a),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::read(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.world.seed = sub_seed(s, WORLD_STREAM);
        cfg.sample.seed = sub_seed(s, SAMPLE_STREAM);
        cfg.train.seed = sub_seed(s, TRAIN_STREAM);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn synth(a: &SynthArgs, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(Some(&a.spec), seed)?;
    let world = generate_world(&cfg.world)?;
    create_dir(&a.out)?;
    write_raster(a.out.join("map.csrr"), &world.map_raster)?;
    write_raster(a.out.join("obs.csrr"), &world.obs_raster)?;
    let (h, w) = world.terrain_dims;
    save_gray(&a.out.join("terrain.pgm"), &world.terrain, w, h)?;
    save_classes(&a.out.join("terrain.png"), &world.terrain, w, h)?;
    let hist = world.class_histogram(cfg.world.num_terrains);
    println!(
        "map {}x{}x{}, obs {}x{}x{}, class shares {}",
        world.map_raster.height(),
        world.map_raster.width(),
        world.map_raster.channels(),
        world.obs_raster.height(),
        world.obs_raster.width(),
        world.obs_raster.channels(),
        hist.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}

fn sample(a: &SampleArgs, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref(), seed)?;
    let map = read_raster(&a.map)?;
    let obs = read_raster(&a.obs)?;
    cfg.sample.validate(map.scale, obs.scale)?;
    let n_trainval = a.n_tuples.unwrap_or(cfg.dataset.n_trainval);
    let n_test = a.n_test.unwrap_or(cfg.dataset.n_test);
    let splits = assign_splits(n_trainval, n_test, cfg.dataset.val_fraction);
    let mut writer = DatasetWriter::create(&a.out)?;
    for (i, &split) in splits.iter().enumerate() {
        let t = sample_tuple(&map, &obs, &cfg.sample, &mut tuple_rng(cfg.sample.seed, i as u64))?;
        writer.push(&t, split)?;
    }
    let entries = writer.finish()?;
    let count = |s| entries.iter().filter(|e| e.split == s).count();
    println!(
        "{} tuples: {} train, {} val, {} test",
        entries.len(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

fn merge_ranges(acc: &mut Option<Vec<(f64, f64)>>, r: Vec<(f64, f64)>) -> CliResult<()> {
    match acc {
        None => *acc = Some(r),
        Some(a) if a.len() == r.len() => {
            for (x, y) in a.iter_mut().zip(r) {
                *x = (x.0.min(y.0), x.1.max(y.1));
            }
        }
        Some(a) => {
            return Err(usage(format!(
                "observations mix {} and {} channels",
                a.len(),
                r.len()
            )))
        }
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs, seed: Option<u64>) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg = load_config(a.config.as_deref(), seed)?;
    let ds = Dataset::open(&a.data)?;
    let names: Vec<String> = ds.names(Split::Train).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Dataset {
            tuple: ds.root().display().to_string(),
            message: "no train tuples".into(),
        }
        .into());
    }
    // Histogram ranges are global over all training observations; tuples are
    // streamed twice so memory stays bounded by the feature bank.
    let mut ranges = None;
    let mut map_channels = 0;
    for n in &names {
        let t = ds.load(n)?;
        map_channels = t.map_patch.channels();
        for o in &t.observations {
            merge_ranges(&mut ranges, o.channel_ranges())?;
        }
    }
    let ranges = ranges.expect("train split is non-empty");
    let featurizer = ObsFeaturizer {
        bins: cfg.train.bins,
        ranges: ranges.clone(),
    };
    let mut bank = FeatureBank::new(cfg.train.kernel_size, featurizer);
    let bank_seed = sub_seed(cfg.train.seed, BANK_STREAM);
    for (i, n) in names.iter().enumerate() {
        bank.push(&ds.load(n)?, &cfg.augment, cfg.bank_size, &mut tuple_rng(bank_seed, i as u64))?;
    }
    eprintln!("feature bank: {} tuples in {:.1?}", names.len(), t0.elapsed());
    let dims = cfg.train.dims(map_channels, ranges.len(), ranges);
    let out = train(&bank, &cfg.train, &dims)?;
    write_params(
        &a.out,
        &ModelParams {
            map: out.map,
            obs: out.obs,
        },
    )?;
    if let Some(p) = &a.curve {
        let rows: Vec<Vec<String>> = out
            .curve
            .iter()
            .map(|r| vec![r.epoch.to_string(), r.loss.to_string(), r.lr.to_string()])
            .collect();
        write_csv(p, &["epoch", "loss", "lr"], &rows)?;
    }
    if let (Some(first), Some(last)) = (out.curve.first(), out.curve.last()) {
        println!(
            "trained {} epochs in {:.1?}: loss {:.4} -> {:.4}, final lr {}",
            out.curve.len(),
            t0.elapsed(),
            first.loss,
            last.loss,
            last.lr
        );
    }
    Ok(())
}

fn encode_map_cmd(a: &EncodeMapArgs) -> CliResult<()> {
    let params = read_params(&a.params)?;
    let patch = read_raster(&a.patch)?;
    let bm = encode_map(&params.map, &patch)?;
    write_belief(&a.out, &bm)?;
    println!("belief map {}x{}x{}", bm.height(), bm.width(), bm.channels());
    Ok(())
}

fn encode_obs_cmd(a: &EncodeObsArgs, seed: Option<u64>) -> CliResult<()> {
    let params = read_params(&a.params)?;
    let encode = |o: &Raster| encode_obs(&params.obs, o);
    let records: Vec<RepRecord> = if let Some(dir) = &a.tuple {
        let t = read_tuple(dir)?;
        t.observations
            .iter()
            .zip(&t.coords)
            .map(|(o, &pixel)| Ok(RepRecord { pixel, rep: encode(o)? }))
            .collect::<CliResult<_>>()?
    } else if !a.obs.is_empty() {
        a.obs
            .iter()
            .map(|p| {
                Ok(RepRecord {
                    pixel: PixelCoord::new(NO_TRUTH, NO_TRUTH),
                    rep: encode(&read_raster(p)?)?,
                })
            })
            .collect::<CliResult<_>>()?
    } else if let (Some(src), Some(traj)) = (&a.source, &a.traj) {
        let source = read_raster(src)?;
        let spec = load_trajectory(traj, seed)?;
        let frame = a.patch.as_ref().map(|p| read_raster(p).map(|r| r.frame())).transpose()?;
        let truth = simulate_trajectory(&spec, frame.as_ref())?.truth;
        truth
            .iter()
            .map(|p| {
                let pixel = frame
                    .and_then(|f| f.nearest_pixel(p.x, p.y))
                    .unwrap_or(PixelCoord::new(NO_TRUTH, NO_TRUTH));
                Ok(RepRecord {
                    pixel,
                    rep: encode(&extract_obs(&source, p.x, p.y, a.size)?)?,
                })
            })
            .collect::<CliResult<_>>()?
    } else {
        return Err(usage("give one of --tuple, --obs or --source with --traj"));
    };
    write_repset(&a.out, &records)?;
    println!("{} representations", records.len());
    Ok(())
}

fn load_trajectory(path: &Path, seed: Option<u64>) -> CliResult<croscale_core::filter::TrajectorySpec> {
    let mut spec = trajectory_from_kv(&KeyValues::read(path)?)?;
    if let Some(s) = seed {
        spec.seed = sub_seed(s, TRAJ_STREAM);
    }
    Ok(spec)
}

fn has_truth(r: &RepRecord, bm: &BeliefMap) -> bool {
    r.pixel.u != NO_TRUTH && r.pixel.v != NO_TRUTH && bm.in_bounds(r.pixel)
}

fn infer(a: &InferArgs) -> CliResult<()> {
    let bm = read_belief(&a.belief)?;
    let recs = read_repset(&a.obs_rep)?;
    let rec = recs.get(a.index).ok_or_else(|| {
        usage(format!(
            "--index {} but the representation set has {} records",
            a.index,
            recs.len()
        ))
    })?;
    let heat = likelihood_map(&bm, &rec.rep, DirichletModel::new(a.theta)?)?;
    if let Some(p) = &a.out_heat {
        write_raw_f32(p, heat.data())?;
    }
    if let Some(p) = &a.out_png {
        save_gray(p, &heat.to_gray8(), heat.width(), heat.height())?;
    }
    let best = heat.argmax();
    println!("argmax pixel {},{}", best.u, best.v);
    if has_truth(rec, &bm) {
        for k in [1.0, 5.0] {
            println!("truth {},{} within top {k}%: {}", rec.pixel.u, rec.pixel.v, recall_at_k(&heat, rec.pixel, k)?);
        }
    }
    Ok(())
}

fn filter(a: &FilterArgs, seed: Option<u64>) -> CliResult<()> {
    let bm = read_belief(&a.belief)?;
    let spec = load_trajectory(&a.traj, seed)?;
    let frame = match &a.patch {
        Some(p) => {
            let f = read_raster(p)?.frame();
            if (f.height, f.width) != (bm.height(), bm.width()) {
                return Err(usage(format!(
                    "patch is {}x{} but the belief map is {}x{}",
                    f.height,
                    f.width,
                    bm.height(),
                    bm.width()
                )));
            }
            f
        }
        None => PatchFrame {
            pose: WorldPose::origin(),
            scale: a.scale,
            height: bm.height(),
            width: bm.width(),
        },
    };
    let reps: Vec<SimplexVec> = read_repset(&a.obs_reps)?.into_iter().map(|r| r.rep).collect();
    let cfg = FilterConfig {
        n_particles: a.particles,
        weight_mode: match a.mode {
            FilterMode::Dirichlet => WeightMode::Dirichlet { theta: a.theta },
            FilterMode::SoftmaxCosine => WeightMode::SoftmaxCosine,
        },
        seed: sub_seed(spec.seed, FILTER_STREAM),
        ..FilterConfig::default()
    };
    let ev = evaluate_filter(&bm, frame, &reps, &spec, &cfg)?;
    ev.write_tracks_csv(create(&a.out)?)?;
    if let Some(p) = &a.summary {
        ev.write_summary_csv(create(p)?)?;
    }
    println!(
        "median accumulated error: dead reckoning {:.3} m, filter {:.3} m, reduction {:.1}%",
        ev.median_dr, ev.median_pf, ev.reduction_pct
    );
    Ok(())
}

fn parse_split(s: &str) -> CliResult<Split> {
    s.parse().map_err(|_| usage(format!("unknown split {s:?}; use train, val or test")))
}

fn check_ks(ks: &[f64]) -> CliResult<()> {
    if ks.is_empty() || ks.iter().any(|&k| !(k > 0.0 && k <= 100.0)) {
        return Err(usage("--ks must be percentages in (0, 100]"));
    }
    Ok(())
}

/// Mean recall of each parameter set at each theta over a dataset split,
/// loading one tuple at a time.
fn split_recalls(
    ds: &Dataset,
    split: Split,
    models: &[&ModelParams],
    thetas: &[f64],
    ks: &[f64],
) -> CliResult<Vec<Vec<Vec<f64>>>> {
    let mut sums = vec![vec![vec![0.0; ks.len()]; thetas.len()]; models.len()];
    let mut n = 0usize;
    for t in ds.iter_split(split) {
        let t = t?;
        for (m, per_theta) in models.iter().zip(&mut sums) {
            for (&theta, acc) in thetas.iter().zip(per_theta.iter_mut()) {
                let r = tuple_recall(&m.map, &m.obs, &t, DirichletModel::new(theta)?, ks)?;
                acc.iter_mut().zip(r).for_each(|(s, x)| *s += x);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(usage(format!("split {split} is empty")));
    }
    for v in sums.iter_mut().flatten().flatten() {
        *v /= n as f64;
    }
    Ok(sums)
}

/// Untrained encoders with the shapes and histogram ranges of `p`.
fn untrained_like(p: &ModelParams, seed: u64) -> CliResult<ModelParams> {
    let cfg = TrainConfig {
        channels: p.map.out_channels,
        kernel_size: p.map.kernel_size,
        bins: p.obs.bins,
        seed,
        ..TrainConfig::default()
    };
    let dims = EncoderDims {
        map_channels: p.map.in_channels,
        obs_channels: p.obs.ranges.len(),
        kernel_size: p.map.kernel_size,
        bins: p.obs.bins,
        obs_ranges: p.obs.ranges.clone(),
    };
    let (map, obs) = init_params(&cfg, &dims, &mut tuple_rng(seed, 0))?;
    Ok(ModelParams { map, obs })
}

fn report(label: &str, theta: f64, ks: &[f64], r: &[f64]) {
    let parts: Vec<String> = ks.iter().zip(r).map(|(k, x)| format!("recall@{k}% {x:.4}")).collect();
    println!("{label} theta {theta}: {}", parts.join(", "));
}

fn export_pairs(a: &EvalRecallArgs) -> CliResult<Vec<(PathBuf, PathBuf)>> {
    if let Some(dir) = &a.exports {
        let mut beliefs: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csbm"))
            .collect();
        beliefs.sort();
        let pairs: Vec<_> = beliefs
            .into_iter()
            .map(|b| {
                let r = b.with_extension("csrv");
                (b, r)
            })
            .collect();
        if let Some((_, r)) = pairs.iter().find(|(_, r)| !r.exists()) {
            return Err(Error::Dataset {
                tuple: dir.display().to_string(),
                message: format!("missing representation file {}", r.display()),
            }
            .into());
        }
        return Ok(pairs);
    }
    if a.belief.len() != a.reps.len() {
        return Err(usage(format!(
            "{} --belief files but {} --reps files",
            a.belief.len(),
            a.reps.len()
        )));
    }
    Ok(a.belief.iter().cloned().zip(a.reps.iter().cloned()).collect())
}

fn eval_recall(a: &EvalRecallArgs, seed: Option<u64>) -> CliResult<()> {
    check_ks(&a.ks)?;
    let rows: Vec<Vec<String>>;
    if let (Some(params), Some(data)) = (&a.params, &a.data) {
        let params = read_params(params)?;
        let ds = Dataset::open(data)?;
        let split = parse_split(&a.split)?;
        let theta = if a.select_theta {
            let r = split_recalls(&ds, Split::Val, &[&params], &THETA_GRID, &a.ks)?.remove(0);
            let (theta, best) = best_theta(&THETA_GRID, &r)?;
            report("val (selected)", theta, &a.ks, &best);
            theta
        } else {
            a.theta
        };
        let baseline = if a.baseline {
            Some(untrained_like(&params, sub_seed(seed.unwrap_or(0), TRAIN_STREAM))?)
        } else {
            None
        };
        let mut models = vec![&params];
        models.extend(baseline.as_ref());
        let r = split_recalls(&ds, split, &models, &[theta], &a.ks)?;
        report(&format!("{split}"), theta, &a.ks, &r[0][0]);
        if baseline.is_some() {
            report(&format!("{split} untrained"), theta, &a.ks, &r[1][0]);
        }
        rows = a.ks.iter().zip(&r[0][0]).map(|(k, x)| vec![k.to_string(), x.to_string()]).collect();
    } else {
        let pairs = export_pairs(a)?;
        if pairs.is_empty() {
            return Err(usage("give --params with --data, --belief with --reps, or --exports"));
        }
        let model = DirichletModel::new(a.theta)?;
        let mut hits = vec![0usize; a.ks.len()];
        let (mut scored, mut skipped) = (0usize, 0usize);
        for (b, r) in &pairs {
            let bm = read_belief(b)?;
            let field = DirichletField::new(&bm, model);
            for rec in read_repset(r)? {
                if !has_truth(&rec, &bm) {
                    skipped += 1;
                    continue;
                }
                let heat = field.heat_map(&rec.rep)?;
                for (h, &k) in hits.iter_mut().zip(&a.ks) {
                    *h += recall_at_k(&heat, rec.pixel, k)? as usize;
                }
                scored += 1;
            }
        }
        if scored == 0 {
            return Err(usage("no representation carries a truth pixel"));
        }
        if skipped > 0 {
            eprintln!("skipped {skipped} representations without a truth pixel");
        }
        let r: Vec<f64> = hits.iter().map(|&h| h as f64 / scored as f64).collect();
        report(&format!("{} observations", scored), a.theta, &a.ks, &r);
        rows = a.ks.iter().zip(&r).map(|(k, x)| vec![k.to_string(), x.to_string()]).collect();
    }
    if let Some(p) = &a.out {
        write_csv(p, &["k_percent", "recall"], &rows)?;
    }
    Ok(())
}

fn render_seg(a: &RenderSegArgs) -> CliResult<()> {
    let bm = read_belief(&a.belief)?;
    let grid = segmentation_render(&bm);
    save_classes(&a.out, &grid.classes, grid.width, grid.height)
}

fn profile(a: &ProfileArgs) -> CliResult<()> {
    let bm = read_belief(&a.belief)?;
    let prof = belief_profile(&bm, a.from, a.to, a.samples)?;
    match &a.out {
        Some(p) => prof.write_csv(create(p)?)?,
        None => prof.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

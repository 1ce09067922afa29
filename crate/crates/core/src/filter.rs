//! Particle-filter localization on belief maps with simulated noisy odometry.
//!
//! Poses live in world metres; a [`PatchFrame`] places the belief map in the
//! world. Odometry is expressed as body-frame increments so that heading
//! errors bend the dead-reckoned track the way they do on a real vehicle.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::contrastive::cosine_similarity;
use crate::error::{Error, Result};
use crate::inference::{DirichletField, DirichletModel};
use crate::types::{normalize_angle, BeliefMap, PatchFrame, SimplexVec, WorldPose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: WorldPose,
    pub weight: f64,
}

/// Particles whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
}

impl ParticleSet {
    /// `n` copies of a known pose.
    pub fn at(pose: WorldPose, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("particle set must not be empty"));
        }
        let weight = 1.0 / n as f64;
        Ok(Self {
            particles: vec![Particle { pose, weight }; n],
        })
    }

    /// Normalizes the given weights.
    pub fn new(mut particles: Vec<Particle>) -> Result<Self> {
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        if particles.is_empty()
            || !(total > 0.0)
            || !total.is_finite()
            || particles.iter().any(|p| p.weight < 0.0)
        {
            return Err(Error::arg("particle weights must be >= 0 with a positive sum"));
        }
        particles.iter_mut().for_each(|p| p.weight /= total);
        Ok(Self { particles })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    /// Weighted mean position; heading from the mean unit vector.
    pub fn estimate(&self) -> WorldPose {
        let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
        for p in &self.particles {
            x += p.weight * p.pose.x;
            y += p.weight * p.pose.y;
            let (sh, ch) = p.pose.heading().sin_cos();
            s += p.weight * sh;
            c += p.weight * ch;
        }
        WorldPose::new(x, y, s.atan2(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryNoise {
    /// Metres per step on each body axis.
    pub sigma_trans: f64,
    /// Radians per step.
    pub sigma_rot: f64,
}

impl OdometryNoise {
    pub fn new(sigma_trans: f64, sigma_rot: f64) -> Result<Self> {
        let n = Self {
            sigma_trans,
            sigma_rot,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_trans >= 0.0 && self.sigma_rot >= 0.0)
            || !self.sigma_trans.is_finite()
            || !self.sigma_rot.is_finite()
        {
            return Err(Error::arg("odometry noise must be finite and >= 0"));
        }
        Ok(())
    }

    fn perturb(&self, inc: &Increment, rng: &mut impl Rng) -> Increment {
        let mut g = || -> f64 { rng.sample(StandardNormal) };
        Increment {
            forward: inc.forward + self.sigma_trans * g(),
            lateral: inc.lateral + self.sigma_trans * g(),
            rotation: inc.rotation + self.sigma_rot * g(),
        }
    }
}

/// Motion between consecutive poses in the body frame of the first one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Increment {
    pub forward: f64,
    pub lateral: f64,
    pub rotation: f64,
}

impl Increment {
    pub fn between(a: &WorldPose, b: &WorldPose) -> Self {
        let (s, c) = a.heading().sin_cos();
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        Self {
            forward: c * dx + s * dy,
            lateral: -s * dx + c * dy,
            rotation: normalize_angle(b.heading() - a.heading()),
        }
    }

    pub fn apply(&self, p: &WorldPose) -> WorldPose {
        let (s, c) = p.heading().sin_cos();
        WorldPose::new(
            p.x + c * self.forward - s * self.lateral,
            p.y + s * self.forward + c * self.lateral,
            p.heading() + self.rotation,
        )
    }
}

/// Integrates increments from a start pose; the result includes the start.
pub fn dead_reckon(start: WorldPose, increments: &[Increment]) -> Vec<WorldPose> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(start);
    let mut p = start;
    for inc in increments {
        p = inc.apply(&p);
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub start: WorldPose,
    pub end: WorldPose,
    /// Number of poses, endpoints included.
    pub steps: usize,
    pub n_sequences: usize,
    pub noise: OdometryNoise,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::arg("trajectory needs at least 2 poses"));
        }
        if self.n_sequences == 0 {
            return Err(Error::arg("trajectory needs at least one noisy sequence"));
        }
        self.noise.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub truth: Vec<WorldPose>,
    /// One noisy increment sequence (length `steps - 1`) per sequence.
    pub sequences: Vec<Vec<Increment>>,
}

/// Straight-line ground truth with linearly interpolated heading plus
/// `n_sequences` noisy odometry sequences. With a frame, both endpoints must
/// lie on the patch.
pub fn simulate_trajectory(spec: &TrajectorySpec, frame: Option<&PatchFrame>) -> Result<Trajectory> {
    spec.validate()?;
    if let Some(f) = frame {
        for p in [&spec.start, &spec.end] {
            if !f.contains(p.x, p.y) {
                return Err(Error::arg(format!(
                    "trajectory point ({:.3}, {:.3}) lies outside the patch",
                    p.x, p.y
                )));
            }
        }
    }
    let dh = normalize_angle(spec.end.heading() - spec.start.heading());
    let last = (spec.steps - 1) as f64;
    let truth: Vec<WorldPose> = (0..spec.steps)
        .map(|i| {
            let t = i as f64 / last;
            WorldPose::new(
                spec.start.x + t * (spec.end.x - spec.start.x),
                spec.start.y + t * (spec.end.y - spec.start.y),
                spec.start.heading() + t * dh,
            )
        })
        .collect();
    let clean: Vec<Increment> = truth
        .windows(2)
        .map(|w| Increment::between(&w[0], &w[1]))
        .collect();
    let sequences = (0..spec.n_sequences)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(s as u64);
            clean.iter().map(|inc| spec.noise.perturb(inc, &mut rng)).collect()
        })
        .collect();
    Ok(Trajectory { truth, sequences })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMode {
    /// Likelihood `Dirichlet(y; 1 + θ Z[u, v])`.
    Dirichlet { theta: f64 },
    /// Likelihood `exp(cos(y, Z[u, v]))`, i.e. a softmax over particles.
    SoftmaxCosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub ess_threshold: f64,
    /// Likelihood of off-map particles relative to the best particle.
    pub likelihood_floor: f64,
    pub weight_mode: WeightMode,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            ess_threshold: 0.5,
            likelihood_floor: 1e-9,
            weight_mode: WeightMode::Dirichlet {
                theta: DirichletModel::DEFAULT_THETA,
            },
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::arg("filter needs at least one particle"));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(Error::arg("ESS threshold must be in (0, 1]"));
        }
        if !(self.likelihood_floor > 0.0 && self.likelihood_floor <= 1.0) {
            return Err(Error::arg("likelihood floor must be in (0, 1]"));
        }
        if let WeightMode::Dirichlet { theta } = self.weight_mode {
            DirichletModel::new(theta)?;
        }
        Ok(())
    }
}

enum Scorer {
    Dirichlet(DirichletField),
    Cosine,
}

/// A geo-referenced belief map prepared for repeated likelihood queries.
pub struct BeliefLikelihood<'a> {
    bm: &'a BeliefMap,
    frame: PatchFrame,
    scorer: Scorer,
}

impl<'a> BeliefLikelihood<'a> {
    pub fn new(bm: &'a BeliefMap, frame: PatchFrame, mode: WeightMode) -> Result<Self> {
        if frame.height != bm.height() || frame.width != bm.width() {
            return Err(Error::arg("frame size differs from the belief map size"));
        }
        let scorer = match mode {
            WeightMode::Dirichlet { theta } => {
                Scorer::Dirichlet(DirichletField::new(bm, DirichletModel::new(theta)?))
            }
            WeightMode::SoftmaxCosine => Scorer::Cosine,
        };
        Ok(Self { bm, frame, scorer })
    }

    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }

    /// Log-likelihoods of `y` at each pose; `None` off the map.
    pub fn log_likelihoods(&self, poses: impl Iterator<Item = WorldPose>, y: &SimplexVec) -> Result<Vec<Option<f64>>> {
        if y.len() != self.bm.channels() {
            return Err(Error::arg(format!(
                "observation has {} channels, belief map has {}",
                y.len(),
                self.bm.channels()
            )));
        }
        let log_y = match &self.scorer {
            Scorer::Dirichlet(f) => f.log_obs(y)?,
            Scorer::Cosine => Vec::new(),
        };
        poses
            .map(|p| {
                let Some(px) = self.frame.nearest_pixel(p.x, p.y) else {
                    return Ok(None);
                };
                Ok(Some(match &self.scorer {
                    Scorer::Dirichlet(f) => f.logpdf_at(px.u, px.v, &log_y),
                    Scorer::Cosine => cosine_similarity(y.as_slice(), self.bm.pixel(px.u, px.v))?,
                }))
            })
            .collect()
    }
}

/// Propagate, weight, normalize and (when the ESS is low) resample.
#[allow(clippy::too_many_arguments)]
pub fn pf_step(
    particles: &mut ParticleSet,
    increment: &Increment,
    obs_rep: &SimplexVec,
    likelihood: &BeliefLikelihood,
    noise: &OdometryNoise,
    cfg: &FilterConfig,
    rng: &mut ChaCha8Rng,
    step: usize,
) -> Result<()> {
    for p in &mut particles.particles {
        p.pose = noise.perturb(increment, rng).apply(&p.pose);
    }
    let ll = likelihood.log_likelihoods(particles.particles.iter().map(|p| p.pose), obs_rep)?;
    let best = ll.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        let off_map = cfg.likelihood_floor.ln();
        for (p, l) in particles.particles.iter_mut().zip(&ll) {
            p.weight *= l.map_or(off_map, |l| l - best).exp();
        }
    }
    let total: f64 = particles.particles.iter().map(|p| p.weight).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::FilterDegenerate { step });
    }
    particles.particles.iter_mut().for_each(|p| p.weight /= total);
    if particles.ess() < cfg.ess_threshold * particles.len() as f64 {
        systematic_resample(particles, rng);
    }
    Ok(())
}

/// Ancestor indices of systematic resampling with offset `u` in `[0, 1)`.
pub fn systematic_indices(weights: &[f64], n_out: usize, u: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(n_out);
    let mut cum = weights[0];
    let mut i = 0;
    for k in 0..n_out {
        let pos = (k as f64 + u) / n_out as f64;
        while pos >= cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

/// Systematic resampling with a single uniform offset; weights become `1/N`.
pub fn systematic_resample(particles: &mut ParticleSet, rng: &mut impl Rng) {
    let n = particles.len();
    let u: f64 = rng.gen();
    let idx = systematic_indices(&particles.weights(), n, u);
    let w = 1.0 / n as f64;
    particles.particles = idx
        .into_iter()
        .map(|i| Particle {
            pose: particles.particles[i].pose,
            weight: w,
        })
        .collect();
}

/// Per-sequence tracks and accumulated errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub dead_reckoned: Vec<WorldPose>,
    pub filtered: Vec<WorldPose>,
    pub dr_error: f64,
    pub pf_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEvaluation {
    pub truth: Vec<WorldPose>,
    pub sequences: Vec<SequenceResult>,
    pub median_dr: f64,
    pub median_pf: f64,
    /// `100 (DR - PF) / DR`; zero when dead reckoning is exact up to
    /// rounding.
    pub reduction_pct: f64,
}

/// Accumulated dead-reckoning error treated as exact.
const NEGLIGIBLE_ERROR: f64 = 1e-9;

fn accumulated_error(track: &[WorldPose], truth: &[WorldPose]) -> f64 {
    track.iter().zip(truth).map(|(a, b)| a.distance(b)).sum()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the filter over every noisy sequence of `spec`, starting from the
/// known initial pose, with `obs_reps[t]` observed at truth pose `t`.
pub fn evaluate_filter(
    bm: &BeliefMap,
    frame: PatchFrame,
    obs_reps: &[SimplexVec],
    spec: &TrajectorySpec,
    cfg: &FilterConfig,
) -> Result<FilterEvaluation> {
    cfg.validate()?;
    let traj = simulate_trajectory(spec, Some(&frame))?;
    if obs_reps.len() != traj.truth.len() {
        return Err(Error::arg(format!(
            "need one observation per pose: {} poses, {} observations",
            traj.truth.len(),
            obs_reps.len()
        )));
    }
    let likelihood = BeliefLikelihood::new(bm, frame, cfg.weight_mode)?;
    let start = traj.truth[0];
    let mut sequences = Vec::with_capacity(traj.sequences.len());
    for (s, incs) in traj.sequences.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let mut set = ParticleSet::at(start, cfg.n_particles)?;
        let mut filtered = vec![start];
        for (t, inc) in incs.iter().enumerate() {
            pf_step(
                &mut set,
                inc,
                &obs_reps[t + 1],
                &likelihood,
                &spec.noise,
                cfg,
                &mut rng,
                t + 1,
            )?;
            filtered.push(set.estimate());
        }
        let dead_reckoned = dead_reckon(start, incs);
        sequences.push(SequenceResult {
            dr_error: accumulated_error(&dead_reckoned, &traj.truth),
            pf_error: accumulated_error(&filtered, &traj.truth),
            dead_reckoned,
            filtered,
        });
    }
    let median_dr = median(sequences.iter().map(|s| s.dr_error).collect());
    let median_pf = median(sequences.iter().map(|s| s.pf_error).collect());
    let reduction_pct = if median_dr > NEGLIGIBLE_ERROR {
        100.0 * (median_dr - median_pf) / median_dr
    } else {
        0.0
    };
    Ok(FilterEvaluation {
        truth: traj.truth,
        sequences,
        median_dr,
        median_pf,
        reduction_pct,
    })
}

impl FilterEvaluation {
    /// Columns `sequence_id,step,truth_x,truth_y,dr_x,dr_y,pf_x,pf_y`.
    pub fn write_tracks_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Config(format!("writing track csv: {e}"));
        w.write_record(["sequence_id", "step", "truth_x", "truth_y", "dr_x", "dr_y", "pf_x", "pf_y"])
            .map_err(err)?;
        for (s, seq) in self.sequences.iter().enumerate() {
            for (t, truth) in self.truth.iter().enumerate() {
                let (d, p) = (&seq.dead_reckoned[t], &seq.filtered[t]);
                w.write_record([
                    s.to_string(),
                    t.to_string(),
                    truth.x.to_string(),
                    truth.y.to_string(),
                    d.x.to_string(),
                    d.y.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                ])
                .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::io("track csv", e))
    }

    /// Columns `median_dr_error,median_pf_error,reduction_pct`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Config(format!("writing summary csv: {e}"));
        w.write_record(["median_dr_error", "median_pf_error", "reduction_pct"])
            .map_err(err)?;
        w.write_record([
            self.median_dr.to_string(),
            self.median_pf.to_string(),
            self.reduction_pct.to_string(),
        ])
        .map_err(err)?;
        w.flush().map_err(|e| Error::io("summary csv", e))
    }
}

//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys are dotted (`world.seed`, `train.lr`). Unknown keys are errors so
//! that typos do not silently fall back to defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::encoders::TrainConfig;
use crate::error::{Error, Result};
use crate::filter::{OdometryNoise, TrajectorySpec};
use crate::sampler::{AugmentConfig, SampleConfig};
use crate::synth::WorldSpec;
use crate::types::WorldPose;

#[derive(Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            if let Some((_, first)) = entries.insert(k.to_string(), (v.to_string(), i + 1)) {
                return Err(Error::Config(format!(
                    "line {}: key {k} already set on line {first}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let line = self.entries[key].1;
        v.parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {v:?}")))
    }

    fn set<T: FromStr>(&self, key: &str, field: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *field = v;
        }
        Ok(())
    }

    /// Keys that no lookup has asked for.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect()
    }

    pub fn reject_unused(&self) -> Result<()> {
        let unused = self.unused();
        if unused.is_empty() {
            return Ok(());
        }
        let lines: Vec<String> = unused
            .iter()
            .map(|k| format!("{k} (line {})", self.entries[k].1))
            .collect();
        Err(Error::Config(format!("unknown keys: {}", lines.join(", "))))
    }
}

/// Dataset sizes and the validation share of the train/val tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub n_trainval: usize,
    pub n_test: usize,
    pub val_fraction: f64,
}

impl Default for DatasetPlan {
    fn default() -> Self {
        Self {
            n_trainval: 1000,
            n_test: 200,
            val_fraction: 0.1,
        }
    }
}

/// Everything needed to go from a seed to trained encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub sample: SampleConfig,
    pub dataset: DatasetPlan,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    /// Augmented views cached per observation for training.
    pub bank_size: usize,
    pub theta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            sample: SampleConfig::default(),
            dataset: DatasetPlan::default(),
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            bank_size: 8,
            theta: 5.0,
        }
    }
}

fn pair<T: FromStr + Copy>(kv: &KeyValues, lo: &str, hi: &str, field: &mut (T, T)) -> Result<()> {
    kv.set(lo, &mut field.0)?;
    kv.set(hi, &mut field.1)
}

fn optional_f64(kv: &KeyValues, key: &str, field: &mut Option<f64>, none: &str) -> Result<()> {
    match kv.raw(key) {
        None => Ok(()),
        Some(v) if v == none => {
            *field = None;
            Ok(())
        }
        Some(_) => {
            *field = kv.get(key)?;
            Ok(())
        }
    }
}

impl ExperimentConfig {
    /// Defaults overridden by the given keys; unknown keys are rejected.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut c = Self::default();
        let w = &mut c.world;
        kv.set("world.seed", &mut w.seed)?;
        pair(kv, "world.size_x", "world.size_y", &mut w.world_size)?;
        kv.set("world.num_terrains", &mut w.num_terrains)?;
        kv.set("world.map_scale", &mut w.map_scale)?;
        kv.set("world.obs_scale", &mut w.obs_scale)?;
        kv.set("world.map_channels", &mut w.map_channels)?;
        kv.set("world.obs_channels", &mut w.obs_channels)?;
        kv.set("world.noise_sigma_map", &mut w.noise_sigma_map)?;
        kv.set("world.noise_sigma_obs", &mut w.noise_sigma_obs)?;
        kv.set("world.blur_radius_map", &mut w.blur_radius_map)?;
        kv.set("world.texture_period_obs", &mut w.texture_period_obs)?;
        kv.set("world.texture_amplitude_obs", &mut w.texture_amplitude_obs)?;
        kv.set("world.n_blobs", &mut w.n_blobs)?;
        pair(kv, "world.blob_sigma_min", "world.blob_sigma_max", &mut w.blob_sigma)?;

        let s = &mut c.sample;
        kv.set("sample.patch_size", &mut s.patch_size)?;
        kv.set("sample.obs_size", &mut s.obs_size)?;
        kv.set("sample.n_obs", &mut s.n_obs)?;
        kv.set("sample.margin", &mut s.margin)?;
        kv.set("sample.seed", &mut s.seed)?;
        optional_f64(kv, "sample.rotation", &mut s.rotation, "random")?;

        let d = &mut c.dataset;
        kv.set("dataset.n_trainval", &mut d.n_trainval)?;
        kv.set("dataset.n_test", &mut d.n_test)?;
        kv.set("dataset.val_fraction", &mut d.val_fraction)?;

        let a = &mut c.augment;
        kv.set("augment.c4", &mut a.enable_c4)?;
        pair(kv, "augment.brightness_min", "augment.brightness_max", &mut a.brightness)?;
        pair(kv, "augment.contrast_min", "augment.contrast_max", &mut a.contrast)?;
        pair(kv, "augment.saturation_min", "augment.saturation_max", &mut a.saturation)?;
        pair(kv, "augment.hue_min", "augment.hue_max", &mut a.hue)?;
        let mut lo = a.value_range.map(|r| r.0);
        let mut hi = a.value_range.map(|r| r.1);
        optional_f64(kv, "augment.clamp_min", &mut lo, "none")?;
        optional_f64(kv, "augment.clamp_max", &mut hi, "none")?;
        a.value_range = match (lo, hi) {
            (Some(l), Some(h)) => Some((l, h)),
            (None, None) => None,
            _ => return Err(Error::Config("augment.clamp_min and clamp_max go together".into())),
        };

        let t = &mut c.train;
        kv.set("train.channels", &mut t.channels)?;
        kv.set("train.tau", &mut t.tau)?;
        kv.set("train.lr", &mut t.lr)?;
        kv.set("train.momentum", &mut t.momentum)?;
        kv.set("train.plateau_factor", &mut t.plateau_factor)?;
        kv.set("train.plateau_patience", &mut t.plateau_patience)?;
        kv.set("train.plateau_threshold", &mut t.plateau_threshold)?;
        kv.set("train.epochs", &mut t.epochs)?;
        kv.set("train.batch_tuples", &mut t.batch_tuples)?;
        kv.set("train.kernel_size", &mut t.kernel_size)?;
        kv.set("train.bins", &mut t.bins)?;
        kv.set("train.seed", &mut t.seed)?;
        kv.set("train.bank_size", &mut c.bank_size)?;
        t.obs_per_tuple = c.sample.n_obs;

        kv.set("inference.theta", &mut c.theta)?;
        kv.reject_unused()?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KeyValues::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.sample.validate(self.world.map_scale, self.world.obs_scale)?;
        self.augment.validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.dataset.val_fraction) {
            return Err(Error::Config("dataset.val_fraction must be in [0, 1]".into()));
        }
        if self.bank_size < 2 {
            return Err(Error::Config("train.bank_size must be >= 2".into()));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::Config("inference.theta must be >= 0".into()));
        }
        Ok(())
    }

    /// Serializes every key, so the output documents the full format.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let w = &self.world;
        let s = &self.sample;
        let a = &self.augment;
        let t = &self.train;
        let d = &self.dataset;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        put("world.seed", w.seed.to_string());
        put("world.size_x", w.world_size.0.to_string());
        put("world.size_y", w.world_size.1.to_string());
        put("world.num_terrains", w.num_terrains.to_string());
        put("world.map_scale", w.map_scale.to_string());
        put("world.obs_scale", w.obs_scale.to_string());
        put("world.map_channels", w.map_channels.to_string());
        put("world.obs_channels", w.obs_channels.to_string());
        put("world.noise_sigma_map", w.noise_sigma_map.to_string());
        put("world.noise_sigma_obs", w.noise_sigma_obs.to_string());
        put("world.blur_radius_map", w.blur_radius_map.to_string());
        put("world.texture_period_obs", w.texture_period_obs.to_string());
        put("world.texture_amplitude_obs", w.texture_amplitude_obs.to_string());
        put("world.n_blobs", w.n_blobs.to_string());
        put("world.blob_sigma_min", w.blob_sigma.0.to_string());
        put("world.blob_sigma_max", w.blob_sigma.1.to_string());
        put("sample.patch_size", s.patch_size.to_string());
        put("sample.obs_size", s.obs_size.to_string());
        put("sample.n_obs", s.n_obs.to_string());
        put("sample.margin", s.margin.to_string());
        put("sample.seed", s.seed.to_string());
        put(
            "sample.rotation",
            s.rotation.map_or("random".into(), |r| r.to_string()),
        );
        put("dataset.n_trainval", d.n_trainval.to_string());
        put("dataset.n_test", d.n_test.to_string());
        put("dataset.val_fraction", d.val_fraction.to_string());
        put("augment.c4", a.enable_c4.to_string());
        put("augment.brightness_min", a.brightness.0.to_string());
        put("augment.brightness_max", a.brightness.1.to_string());
        put("augment.contrast_min", a.contrast.0.to_string());
        put("augment.contrast_max", a.contrast.1.to_string());
        put("augment.saturation_min", a.saturation.0.to_string());
        put("augment.saturation_max", a.saturation.1.to_string());
        put("augment.hue_min", a.hue.0.to_string());
        put("augment.hue_max", a.hue.1.to_string());
        put(
            "augment.clamp_min",
            a.value_range.map_or("none".into(), |r| r.0.to_string()),
        );
        put(
            "augment.clamp_max",
            a.value_range.map_or("none".into(), |r| r.1.to_string()),
        );
        put("train.channels", t.channels.to_string());
        put("train.tau", t.tau.to_string());
        put("train.lr", t.lr.to_string());
        put("train.momentum", t.momentum.to_string());
        put("train.plateau_factor", t.plateau_factor.to_string());
        put("train.plateau_patience", t.plateau_patience.to_string());
        put("train.plateau_threshold", t.plateau_threshold.to_string());
        put("train.epochs", t.epochs.to_string());
        put("train.batch_tuples", t.batch_tuples.to_string());
        put("train.kernel_size", t.kernel_size.to_string());
        put("train.bins", t.bins.to_string());
        put("train.seed", t.seed.to_string());
        put("train.bank_size", self.bank_size.to_string());
        put("inference.theta", self.theta.to_string());
        o
    }
}

/// Trajectory files: `start_x, start_y, start_heading, end_x, end_y,
/// end_heading, steps, n_sequences, sigma_trans, sigma_rot, seed`.
pub fn trajectory_from_kv(kv: &KeyValues) -> Result<TrajectorySpec> {
    let need = |k: &str| -> Result<f64> {
        kv.get(k)?
            .ok_or_else(|| Error::Config(format!("trajectory key {k} is required")))
    };
    let start = WorldPose::new(need("start_x")?, need("start_y")?, kv.get("start_heading")?.unwrap_or(0.0));
    let end = WorldPose::new(need("end_x")?, need("end_y")?, kv.get("end_heading")?.unwrap_or(start.heading()));
    let spec = TrajectorySpec {
        start,
        end,
        steps: kv.get("steps")?.unwrap_or(50),
        n_sequences: kv.get("n_sequences")?.unwrap_or(100),
        noise: OdometryNoise {
            sigma_trans: kv.get("sigma_trans")?.unwrap_or(0.5),
            sigma_rot: kv.get("sigma_rot")?.unwrap_or(0.02),
        },
        seed: kv.get("seed")?.unwrap_or(0),
    };
    kv.reject_unused()?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KeyValues::parse("# header\n a = 1 \n\nb=two # trailing\n").unwrap();
        assert_eq!(kv.get::<u32>("a").unwrap(), Some(1));
        assert_eq!(kv.raw("b"), Some("two"));
        assert_eq!(kv.get::<u32>("c").unwrap(), None);
    }

    #[test]
    fn reports_bad_lines() {
        for (text, needle) in [
            ("a = 1\nnonsense\n", "line 2"),
            ("= 3\n", "empty key"),
            ("a = 1\na = 2\n", "already set on line 1"),
        ] {
            match KeyValues::parse(text) {
                Err(Error::Config(m)) => assert!(m.contains(needle), "{m}"),
                other => panic!("expected config error, got {other:?}"),
            }
        }
        let kv = KeyValues::parse("x = abc\n").unwrap();
        assert!(kv.get::<f64>("x").is_err());
    }

    #[test]
    fn experiment_round_trips_through_text() {
        let mut c = ExperimentConfig::default();
        c.world.seed = 42;
        c.train.lr = 0.01;
        c.sample.rotation = Some(0.5);
        c.augment.value_range = Some((0.0, 1.0));
        let back = ExperimentConfig::from_kv(&KeyValues::parse(&c.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
        let d = ExperimentConfig::from_kv(&KeyValues::parse("").unwrap()).unwrap();
        assert_eq!(d, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let kv = KeyValues::parse("train.lrr = 0.1\n").unwrap();
        match ExperimentConfig::from_kv(&kv) {
            Err(Error::Config(m)) => assert!(m.contains("train.lrr (line 1)"), "{m}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_keys() {
        let kv = KeyValues::parse(
            "start_x = 10\nstart_y = 20\nend_x = 100\nend_y = 20\nsteps = 30\nsigma_rot = 0.01\n",
        )
        .unwrap();
        let t = trajectory_from_kv(&kv).unwrap();
        assert_eq!(t.steps, 30);
        assert_eq!(t.n_sequences, 100);
        assert_eq!(t.noise.sigma_rot, 0.01);
        assert!(trajectory_from_kv(&KeyValues::parse("start_x = 1\n").unwrap()).is_err());
    }
}

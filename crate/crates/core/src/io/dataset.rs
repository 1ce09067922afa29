//! On-disk dataset layout:
//!
//! ```text
//! <root>/manifest.csv            tuple,split
//! <root>/tuple_0000/map.csrr
//! <root>/tuple_0000/obs_00.csrr
//! <root>/tuple_0000/coords.csv   obs_index,u,v
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::formats::{read_raster, write_raster};
use crate::error::{Error, Result};
use crate::sampler::DataTuple;
use crate::types::PixelCoord;

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// Splits for `n_trainval + n_test` tuples in generation order: the last
/// `round(val_fraction * n_trainval)` train/val tuples are validation.
pub fn assign_splits(n_trainval: usize, n_test: usize, val_fraction: f64) -> Vec<Split> {
    let n_val = (val_fraction.clamp(0.0, 1.0) * n_trainval as f64).round() as usize;
    let mut s = vec![Split::Train; n_trainval - n_val];
    s.extend(std::iter::repeat_n(Split::Val, n_val));
    s.extend(std::iter::repeat_n(Split::Test, n_test));
    s
}

pub fn tuple_name(i: usize) -> String {
    format!("tuple_{i:04}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub tuple: String,
    pub split: Split,
}

fn dataset_err(tuple: &str, message: impl Into<String>) -> Error {
    Error::Dataset {
        tuple: tuple.to_string(),
        message: message.into(),
    }
}

pub fn write_tuple(dir: &Path, t: &DataTuple) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut map = t.map_patch.clone();
    map.geo_pose = t.patch_pose;
    write_raster(dir.join("map.csrr"), &map)?;
    for (j, o) in t.observations.iter().enumerate() {
        write_raster(dir.join(format!("obs_{j:02}.csrr")), o)?;
    }
    let path = dir.join("coords.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["obs_index", "u", "v"]).map_err(|e| csv_err(&path, e))?;
    for (j, p) in t.coords.iter().enumerate() {
        w.write_record([j.to_string(), p.u.to_string(), p.v.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

pub fn read_tuple(dir: &Path) -> Result<DataTuple> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let wrap = |e: Error| match e {
        e @ Error::Dataset { .. } => e,
        other => dataset_err(&name, other.to_string()),
    };
    let map = read_raster(dir.join("map.csrr")).map_err(wrap)?;
    let coords_path = dir.join("coords.csv");
    let mut rdr = csv::Reader::from_path(&coords_path).map_err(|e| dataset_err(&name, e.to_string()))?;
    let mut rows: Vec<(usize, PixelCoord)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| dataset_err(&name, e.to_string()))?;
        let field = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| dataset_err(&name, format!("bad coords.csv row {:?}", rec)))
        };
        rows.push((field(0)?, PixelCoord::new(field(1)?, field(2)?)));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(dataset_err(&name, "obs_index values must be 0..n without gaps"));
    }
    let mut observations = Vec::with_capacity(rows.len());
    for (j, _) in &rows {
        let p = dir.join(format!("obs_{j:02}.csrr"));
        if !p.exists() {
            return Err(dataset_err(&name, format!("missing observation file {}", p.display())));
        }
        observations.push(read_raster(&p).map_err(wrap)?);
    }
    let coords = rows.into_iter().map(|r| r.1).collect();
    DataTuple::new(map, observations, coords).map_err(wrap)
}

/// Streams tuples into a dataset directory and writes the manifest on
/// [`DatasetWriter::finish`].
pub struct DatasetWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl DatasetWriter {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            entries: Vec::new(),
        })
    }

    pub fn push(&mut self, t: &DataTuple, split: Split) -> Result<()> {
        let name = tuple_name(self.entries.len());
        write_tuple(&self.root.join(&name), t)?;
        self.entries.push(ManifestEntry { tuple: name, split });
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<ManifestEntry>> {
        write_manifest(&self.root, &self.entries)?;
        Ok(self.entries)
    }
}

pub fn write_manifest(root: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let path = root.join(MANIFEST);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["tuple", "split"]).map_err(|e| csv_err(&path, e))?;
    for e in entries {
        w.write_record([e.tuple.as_str(), &e.split.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Read access to a dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Dataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join(MANIFEST);
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| dataset_err(MANIFEST, e.to_string()))?;
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| dataset_err(MANIFEST, e.to_string()))?;
            let (Some(t), Some(s)) = (rec.get(0), rec.get(1)) else {
                return Err(dataset_err(MANIFEST, format!("bad row {rec:?}")));
            };
            entries.push(ManifestEntry {
                tuple: t.to_string(),
                split: s.trim().parse().map_err(|e: Error| dataset_err(MANIFEST, e.to_string()))?,
            });
        }
        Ok(Self { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn names(&self, split: Split) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |e| e.split == split)
            .map(|e| e.tuple.as_str())
    }

    pub fn load(&self, name: &str) -> Result<DataTuple> {
        read_tuple(&self.root.join(name))
    }

    /// Lazily loads every tuple of a split in manifest order.
    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = Result<DataTuple>> + '_ {
        self.names(split).map(move |n| self.load(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_dataset, SampleConfig};
    use crate::synth::{generate_world, WorldSpec};

    fn tuples(n: usize) -> Vec<DataTuple> {
        let spec = WorldSpec {
            world_size: (64.0, 64.0),
            obs_scale: 2.0,
            n_blobs: 10,
            ..WorldSpec::default()
        };
        let w = generate_world(&spec).unwrap();
        let cfg = SampleConfig {
            patch_size: 24,
            obs_size: 8,
            n_obs: 3,
            margin: 3,
            seed: 1,
            rotation: None,
        };
        let mut ds = sample_dataset(&w.map_raster, &w.obs_raster, &cfg, n).unwrap();
        // on-disk payloads are f32
        for t in &mut ds {
            t.map_patch = t.map_patch.map_values(|x| x as f32 as f64);
            for o in &mut t.observations {
                *o = o.map_values(|x| x as f32 as f64);
            }
        }
        ds
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tuples(3);
        let splits = [Split::Train, Split::Val, Split::Test];
        let mut w = DatasetWriter::create(dir.path()).unwrap();
        for (t, s) in ds.iter().zip(splits) {
            w.push(t, s).unwrap();
        }
        w.finish().unwrap();
        let d = Dataset::open(dir.path()).unwrap();
        assert_eq!(d.entries().len(), 3);
        assert_eq!(d.count(Split::Test), 1);
        for (i, t) in ds.iter().enumerate() {
            let back = d.load(&tuple_name(i)).unwrap();
            assert_eq!(back.coords, t.coords);
            assert_eq!(back.observations, t.observations);
            assert_eq!(back.map_patch.data(), t.map_patch.data());
            assert_eq!(back.patch_pose.x as f32, t.patch_pose.x as f32);
        }
        let test: Vec<_> = d.iter_split(Split::Test).collect::<Result<_>>().unwrap();
        assert_eq!(test[0].coords, ds[2].coords);
    }

    #[test]
    fn missing_observation_names_the_tuple() {
        let dir = tempfile::tempdir().unwrap();
        let t = &tuples(1)[0];
        let tdir = dir.path().join("tuple_0007");
        write_tuple(&tdir, t).unwrap();
        std::fs::remove_file(tdir.join("obs_01.csrr")).unwrap();
        match read_tuple(&tdir) {
            Err(Error::Dataset { tuple, message }) => {
                assert_eq!(tuple, "tuple_0007");
                assert!(message.contains("obs_01"), "{message}");
            }
            other => panic!("expected dataset error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_coordinate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = &tuples(1)[0];
        let tdir = dir.path().join("tuple_0000");
        write_tuple(&tdir, t).unwrap();
        std::fs::write(tdir.join("coords.csv"), "obs_index,u,v\n0,1,1\n1,999,2\n2,3,3\n").unwrap();
        assert!(matches!(read_tuple(&tdir), Err(Error::Dataset { .. })));
    }

    #[test]
    fn split_assignment_counts() {
        let s = assign_splits(1000, 200, 0.1);
        assert_eq!(s.iter().filter(|&&x| x == Split::Train).count(), 900);
        assert_eq!(s.iter().filter(|&&x| x == Split::Val).count(), 100);
        assert_eq!(s.iter().filter(|&&x| x == Split::Test).count(), 200);
        assert_eq!(s[899], Split::Train);
        assert_eq!(s[900], Split::Val);
        assert!("bogus".parse::<Split>().is_err());
    }
}

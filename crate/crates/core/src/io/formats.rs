//! Binary interchange formats. All integers and floats are little-endian;
//! bulk payloads are 32-bit floats, row-major and channel-last.
//!
//! | magic  | header                                                    | payload                      |
//! |--------|-----------------------------------------------------------|------------------------------|
//! | `CSRR` | version, h, w, c (u32); scale (f32); x, y, heading (f64)  | `h*w*c` f32                  |
//! | `CSBM` | version, h, w, c (u32); zero padding to 32 bytes          | `h*w*c` f32                  |
//! | `CSRV` | version, count, c (u32)                                   | `count` x (u32 u, u32 v, `c` f32) |
//! | `CSPR` | version, encoder count (u32)                              | tagged encoder sections      |

use std::path::Path;

use crate::encoders::{MapEncoderParams, ObsEncoderParams};
use crate::error::{Error, Result};
use crate::types::{BeliefMap, PixelCoord, Raster, SimplexVec, WorldPose};

pub const FORMAT_VERSION: u32 = 1;
pub const RASTER_MAGIC: [u8; 4] = *b"CSRR";
pub const BELIEF_MAGIC: [u8; 4] = *b"CSBM";
pub const REPSET_MAGIC: [u8; 4] = *b"CSRV";
pub const PARAMS_MAGIC: [u8; 4] = *b"CSPR";

pub const RASTER_HEADER_LEN: usize = 48;
pub const BELIEF_HEADER_LEN: usize = 32;
pub const REPSET_HEADER_LEN: usize = 16;

/// Per-pixel and per-record sum tolerance for f32 simplex payloads.
pub const STORED_SIMPLEX_TOL: f64 = 1e-5;

const TAG_MAP: u32 = 1;
const TAG_OBS: u32 = 2;

struct Writer(Vec<u8>);

impl Writer {
    fn with_capacity(n: usize) -> Self {
        Self(Vec::with_capacity(n))
    }

    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn u32(&mut self, x: usize) -> Result<()> {
        let x = u32::try_from(x).map_err(|_| Error::arg(format!("{x} does not fit in u32")))?;
        self.0.extend_from_slice(&x.to_le_bytes());
        Ok(())
    }

    fn f32(&mut self, x: f64) {
        self.0.extend_from_slice(&(x as f32).to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn pad_to(&mut self, n: usize) {
        self.0.resize(n, 0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.buf.len() as u64,
                format!("truncated {what}: file ends at byte {}", self.buf.len()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let m = self.take(4, "magic")?;
        if m != expected {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(m),
                    String::from_utf8_lossy(&expected)
                ),
            ));
        }
        let at = self.pos as u64;
        let v = self.u32("version")?;
        if v != FORMAT_VERSION as usize {
            return Err(Error::format(
                at,
                format!("unsupported format version {v}, this reader handles {FORMAT_VERSION}"),
            ));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn finite(&self, x: f64, at: usize, what: &str) -> Result<f64> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::format(at as u64, format!("non-finite {what}: {x}")))
        }
    }

    fn f32(&mut self, what: &str) -> Result<f64> {
        let at = self.pos;
        let b = self.take(4, what)?;
        self.finite(f32::from_le_bytes(b.try_into().unwrap()) as f64, at, what)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let at = self.pos;
        let b = self.take(8, what)?;
        self.finite(f64::from_le_bytes(b.try_into().unwrap()), at, what)
    }

    fn f32_block(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.pos;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format(start as u64, "payload too large"))?, what)?;
        bytes
            .chunks_exact(4)
            .enumerate()
            .map(|(i, b)| {
                let x = f32::from_le_bytes(b.try_into().unwrap()) as f64;
                self.finite(x, start + 4 * i, what)
            })
            .collect()
    }

    fn f64_block(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(what)).collect()
    }

    fn skip_to(&mut self, n: usize) -> Result<()> {
        self.take(n.saturating_sub(self.pos), "header padding").map(|_| ())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("{} trailing bytes after payload", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn dims_product(dims: &[usize], at: usize) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::format(at as u64, "header dimensions overflow"))
}

pub fn encode_raster(r: &Raster) -> Result<Vec<u8>> {
    let mut w = Writer::with_capacity(RASTER_HEADER_LEN + 4 * r.data().len());
    w.bytes(&RASTER_MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(r.height())?;
    w.u32(r.width())?;
    w.u32(r.channels())?;
    w.f32(r.scale);
    w.f64(r.geo_pose.x);
    w.f64(r.geo_pose.y);
    w.f64(r.geo_pose.heading());
    r.data().iter().for_each(|&x| w.f32(x));
    Ok(w.0)
}

pub fn decode_raster(buf: &[u8]) -> Result<Raster> {
    let mut r = Reader::new(buf);
    r.magic(RASTER_MAGIC)?;
    let (h, wd, c) = (r.u32("height")?, r.u32("width")?, r.u32("channels")?);
    let scale_at = r.pos;
    let scale = r.f32("scale")?;
    let pose = WorldPose::new(r.f64("pose x")?, r.f64("pose y")?, r.f64("pose heading")?);
    let n = dims_product(&[h, wd, c], 8)?;
    let data = r.f32_block(n, "raster payload")?;
    r.finish()?;
    if !(scale > 0.0) {
        return Err(Error::format(scale_at as u64, format!("scale must be > 0, got {scale}")));
    }
    Raster::new(h, wd, c, data, scale, pose).map_err(|e| Error::format(8, e.to_string()))
}

pub fn encode_belief(bm: &BeliefMap) -> Result<Vec<u8>> {
    let mut w = Writer::with_capacity(BELIEF_HEADER_LEN + 4 * bm.data().len());
    w.bytes(&BELIEF_MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(bm.height())?;
    w.u32(bm.width())?;
    w.u32(bm.channels())?;
    w.pad_to(BELIEF_HEADER_LEN);
    bm.data().iter().for_each(|&x| w.f32(x));
    Ok(w.0)
}

pub fn decode_belief(buf: &[u8]) -> Result<BeliefMap> {
    let mut r = Reader::new(buf);
    r.magic(BELIEF_MAGIC)?;
    let (h, wd, c) = (r.u32("height")?, r.u32("width")?, r.u32("channels")?);
    r.skip_to(BELIEF_HEADER_LEN)?;
    let n = dims_product(&[h, wd, c], 8)?;
    let data = r.f32_block(n, "belief payload")?;
    r.finish()?;
    if c == 0 {
        return Err(Error::format(16, "belief map has zero channels"));
    }
    if let Some(i) = data
        .chunks_exact(c)
        .position(|px| (px.iter().sum::<f64>() - 1.0).abs() > STORED_SIMPLEX_TOL)
    {
        return Err(Error::format(
            (BELIEF_HEADER_LEN + 4 * c * i) as u64,
            format!("belief pixel ({}, {}) does not sum to 1", i / wd, i % wd),
        ));
    }
    BeliefMap::with_tolerance(h, wd, c, data, STORED_SIMPLEX_TOL)
        .map_err(|e| Error::format(BELIEF_HEADER_LEN as u64, e.to_string()))
}

/// Observation representations, optionally tagged with truth pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub pixel: PixelCoord,
    pub rep: SimplexVec,
}

pub fn encode_repset(records: &[RepRecord]) -> Result<Vec<u8>> {
    let c = records.first().map_or(0, |r| r.rep.len());
    if records.iter().any(|r| r.rep.len() != c) {
        return Err(Error::arg("all representations must have the same length"));
    }
    let mut w = Writer::with_capacity(REPSET_HEADER_LEN + records.len() * (8 + 4 * c));
    w.bytes(&REPSET_MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(records.len())?;
    w.u32(c)?;
    for rec in records {
        w.u32(rec.pixel.u)?;
        w.u32(rec.pixel.v)?;
        rec.rep.as_slice().iter().for_each(|&x| w.f32(x));
    }
    Ok(w.0)
}

pub fn decode_repset(buf: &[u8]) -> Result<Vec<RepRecord>> {
    let mut r = Reader::new(buf);
    r.magic(REPSET_MAGIC)?;
    let count = r.u32("record count")?;
    let c = r.u32("channels")?;
    let mut out = Vec::with_capacity(count.min(buf.len()));
    for _ in 0..count {
        let at = r.pos;
        let pixel = PixelCoord::new(r.u32("record u")?, r.u32("record v")?);
        let vals = r.f32_block(c, "record payload")?;
        let rep = SimplexVec::checked(vals, STORED_SIMPLEX_TOL)
            .map_err(|e| Error::format(at as u64, e.to_string()))?;
        out.push(RepRecord { pixel, rep });
    }
    r.finish()?;
    Ok(out)
}

/// Both trained encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub map: MapEncoderParams,
    pub obs: ObsEncoderParams,
}

pub fn encode_params(p: &ModelParams) -> Result<Vec<u8>> {
    p.map.validate()?;
    p.obs.validate()?;
    let mut w = Writer::with_capacity(64 + 8 * (p.map.weights.len() + p.obs.weights.len()));
    w.bytes(&PARAMS_MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(2)?;

    w.u32(TAG_MAP as usize)?;
    w.u32(p.map.kernel_size)?;
    w.u32(p.map.in_channels)?;
    w.u32(p.map.out_channels)?;
    p.map.weights.iter().chain(&p.map.bias).for_each(|&x| w.f64(x));
    let n = &p.map.input_norm;
    n.mean.iter().chain(&n.inv_std).for_each(|&x| w.f64(x));

    w.u32(TAG_OBS as usize)?;
    w.u32(p.obs.in_channels)?;
    w.u32(p.obs.bins)?;
    w.u32(p.obs.out_channels)?;
    p.obs.weights.iter().chain(&p.obs.bias).for_each(|&x| w.f64(x));
    for &(lo, hi) in &p.obs.ranges {
        w.f64(lo);
        w.f64(hi);
    }
    let n = &p.obs.feature_norm;
    n.mean.iter().chain(&n.inv_std).for_each(|&x| w.f64(x));
    Ok(w.0)
}

pub fn decode_params(buf: &[u8]) -> Result<ModelParams> {
    let mut r = Reader::new(buf);
    r.magic(PARAMS_MAGIC)?;
    let count_at = r.pos;
    if r.u32("encoder count")? != 2 {
        return Err(Error::format(count_at as u64, "expected a map and an observation encoder"));
    }
    let tag_at = r.pos;
    if r.u32("encoder tag")? != TAG_MAP as usize {
        return Err(Error::format(tag_at as u64, "first section must be the map encoder"));
    }
    let dims_at = r.pos;
    let (k, d, c) = (r.u32("kernel size")?, r.u32("map channels")?, r.u32("out channels")?);
    let mut map = MapEncoderParams::zeros(k, d, c).map_err(|e| Error::format(dims_at as u64, e.to_string()))?;
    map.weights = r.f64_block(map.weights.len(), "map weights")?;
    map.bias = r.f64_block(c, "map bias")?;
    let norm_at = r.pos;
    map.input_norm.mean = r.f64_block(d, "map input means")?;
    map.input_norm.inv_std = r.f64_block(d, "map input scales")?;
    map.validate().map_err(|e| Error::format(norm_at as u64, e.to_string()))?;

    let tag_at = r.pos;
    if r.u32("encoder tag")? != TAG_OBS as usize {
        return Err(Error::format(tag_at as u64, "second section must be the observation encoder"));
    }
    let dims_at = r.pos;
    let (d, b, c) = (r.u32("obs channels")?, r.u32("bins")?, r.u32("out channels")?);
    let mut obs = ObsEncoderParams::zeros(d, b, c, vec![(0.0, 1.0); d])
        .map_err(|e| Error::format(dims_at as u64, e.to_string()))?;
    obs.weights = r.f64_block(obs.weights.len(), "obs weights")?;
    obs.bias = r.f64_block(c, "obs bias")?;
    let edges = r.f64_block(2 * d, "histogram ranges")?;
    obs.ranges = edges.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let n_feat = obs.feature_len();
    obs.feature_norm.mean = r.f64_block(n_feat, "observation feature means")?;
    obs.feature_norm.inv_std = r.f64_block(n_feat, "observation feature scales")?;
    r.finish()?;
    obs.validate().map_err(|e| Error::format(dims_at as u64, e.to_string()))?;
    Ok(ModelParams { map, obs })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    decode_raster(&read_file(path.as_ref())?)
}

pub fn write_raster(path: impl AsRef<Path>, r: &Raster) -> Result<()> {
    write_file(path.as_ref(), &encode_raster(r)?)
}

pub fn read_belief(path: impl AsRef<Path>) -> Result<BeliefMap> {
    decode_belief(&read_file(path.as_ref())?)
}

pub fn write_belief(path: impl AsRef<Path>, bm: &BeliefMap) -> Result<()> {
    write_file(path.as_ref(), &encode_belief(bm)?)
}

pub fn read_repset(path: impl AsRef<Path>) -> Result<Vec<RepRecord>> {
    decode_repset(&read_file(path.as_ref())?)
}

pub fn write_repset(path: impl AsRef<Path>, records: &[RepRecord]) -> Result<()> {
    write_file(path.as_ref(), &encode_repset(records)?)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode_params(&read_file(path.as_ref())?)
}

pub fn write_params(path: impl AsRef<Path>, p: &ModelParams) -> Result<()> {
    write_file(path.as_ref(), &encode_params(p)?)
}

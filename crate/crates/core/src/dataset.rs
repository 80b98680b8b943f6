//! Trajectory ingestion, chronological splitting and dataset files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use crate::cluster::{assemble_samples, build_clusters, compute_n_star, ClusterConfig, ClusterSample, Framework, SampleData};
use crate::codec::{Container, Decoder, Encoder, FileKind};
use crate::dictionary::Dictionary;
use crate::error::{CoreError, Result};
use crate::geom::Vec2;
use crate::qtc::ToleranceSet;

pub const DEFAULT_RATE: f64 = 15.0;

/// Contiguous frames of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    /// Unique key: the agent id, suffixed with `#k` for the k-th segment when the agent's frames have gaps.
    pub id: String,
    pub agent_id: String,
    pub start_frame: i64,
    pub positions: Vec<Vec2>,
}

impl Track {
    pub fn new(id: impl Into<String>, start_frame: i64, positions: Vec<Vec2>) -> Self {
        let id = id.into();
        Track {
            agent_id: id.clone(),
            id,
            start_frame,
            positions,
        }
    }

    pub fn end_frame(&self) -> i64 {
        self.start_frame + self.positions.len() as i64 - 1
    }

    pub fn position_at(&self, frame: i64) -> Option<Vec2> {
        let k = frame.checked_sub(self.start_frame)?;
        usize::try_from(k).ok().and_then(|k| self.positions.get(k).copied())
    }

    /// Velocity at index `k` in meters per second, from the backward
    /// difference (forward difference at the first frame).
    pub fn velocity(&self, k: usize, rate: f64) -> Vec2 {
        let p = &self.positions;
        match (k, p.len()) {
            (_, 0 | 1) => Vec2::ZERO,
            (0, _) => (p[1] - p[0]) * rate,
            _ => (p[k] - p[k - 1]) * rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticObject {
    pub id: String,
    pub position: Vec2,
}

/// Moving agents and static objects of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub rate: f64,
    pub tracks: Vec<Track>,
    pub statics: Vec<StaticObject>,
}

impl TrajectorySet {
    pub fn new(rate: f64, tracks: Vec<Track>, statics: Vec<StaticObject>) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(CoreError::data(format!("frame rate must be positive, got {rate}")));
        }
        let mut ids = HashSet::new();
        for t in &tracks {
            if t.positions.is_empty() {
                return Err(CoreError::data(format!("track {} is empty", t.id)));
            }
            if !t.positions.iter().all(|p| p.is_finite()) {
                return Err(CoreError::data(format!("track {} has non-finite positions", t.id)));
            }
            if !ids.insert(t.id.as_str()) {
                return Err(CoreError::data(format!("duplicate track id {}", t.id)));
            }
        }
        let agents: HashSet<&str> = tracks.iter().map(|t| t.agent_id.as_str()).collect();
        for s in &statics {
            if !s.position.is_finite() {
                return Err(CoreError::data(format!("object {} has a non-finite position", s.id)));
            }
            if agents.contains(s.id.as_str()) || !ids.insert(s.id.as_str()) {
                return Err(CoreError::data(format!("object id {} collides with another id", s.id)));
            }
        }
        Ok(TrajectorySet { rate, tracks, statics })
    }

    pub fn frame_range(&self) -> Option<(i64, i64)> {
        let lo = self.tracks.iter().map(|t| t.start_frame).min()?;
        let hi = self.tracks.iter().map(|t| t.end_frame()).max()?;
        Some((lo, hi))
    }
}

fn split_header(text: &str) -> Result<(f64, &str, usize)> {
    let first = text.lines().next().unwrap_or("");
    if let Some(rest) = first.trim().strip_prefix('#') {
        let rate = rest
            .trim()
            .strip_prefix("rate=")
            .ok_or_else(|| CoreError::Parse { line: 1, detail: format!("unknown header comment {first:?}") })?
            .trim()
            .parse::<f64>()
            .map_err(|e| CoreError::Parse { line: 1, detail: format!("bad rate: {e}") })?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(CoreError::Parse { line: 1, detail: format!("rate must be positive, got {rate}") });
        }
        let body = text.split_once('\n').map_or("", |(_, b)| b);
        Ok((rate, body, 1))
    } else {
        Ok((DEFAULT_RATE, text, 0))
    }
}

fn reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expect: &[&str], offset: usize) -> Result<()> {
    let h = rdr
        .headers()
        .map_err(|e| CoreError::Parse { line: offset + 1, detail: e.to_string() })?;
    let got: Vec<&str> = h.iter().collect();
    if got != expect {
        return Err(CoreError::Parse {
            line: offset + 1,
            detail: format!("expected header {:?}, found {got:?}", expect.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| CoreError::Parse { line, detail: format!("missing {name}") })?;
    raw.parse()
        .map_err(|e| CoreError::Parse { line, detail: format!("bad {name} {raw:?}: {e}") })
}

/// Parses the `frame,agent_id,x,y` format with an optional `#rate=` first line.
///
/// Gaps in an agent's frames split it into separate tracks.
pub fn parse_trajectories(text: &str) -> Result<TrajectorySet> {
    if text.trim().is_empty() {
        return Err(CoreError::Parse { line: 1, detail: "empty file".into() });
    }
    let (rate, body, offset) = split_header(text)?;
    let mut rdr = reader(body);
    check_header(&mut rdr, &["frame", "agent_id", "x", "y"], offset)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(i64, Vec2)>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CoreError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize) + offset,
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize) + offset;
        if rec.len() != 4 {
            return Err(CoreError::Parse { line, detail: format!("expected 4 fields, found {}", rec.len()) });
        }
        let frame: i64 = field(&rec, 0, "frame", line)?;
        let agent = rec[1].to_string();
        let x: f64 = field(&rec, 2, "x", line)?;
        let y: f64 = field(&rec, 3, "y", line)?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(CoreError::Parse { line, detail: "non-finite coordinate".into() });
        }
        let list = rows.entry(agent.clone()).or_insert_with(|| {
            order.push(agent.clone());
            Vec::new()
        });
        if let Some(&(last, _)) = list.last() {
            if frame <= last {
                return Err(CoreError::data(format!(
                    "agent {agent}: frame {frame} at line {line} does not follow frame {last}"
                )));
            }
        }
        list.push((frame, Vec2::new(x, y)));
    }
    if order.is_empty() {
        return Err(CoreError::Parse { line: offset + 1, detail: "no trajectory rows".into() });
    }
    let mut tracks = Vec::new();
    for agent in order {
        let list = &rows[&agent];
        let mut segments: Vec<(i64, Vec<Vec2>)> = Vec::new();
        for &(frame, p) in list {
            match segments.last_mut() {
                Some((start, ps)) if *start + ps.len() as i64 == frame => ps.push(p),
                _ => segments.push((frame, vec![p])),
            }
        }
        let split = segments.len() > 1;
        for (k, (start, positions)) in segments.into_iter().enumerate() {
            let id = if split { format!("{agent}#{k}") } else { agent.clone() };
            tracks.push(Track {
                id,
                agent_id: agent.clone(),
                start_frame: start,
                positions,
            });
        }
    }
    TrajectorySet::new(rate, tracks, Vec::new())
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectorySet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_trajectories(&text)
}

/// Parses the `object_id,x,y` format and adds the objects to `set`.
pub fn parse_static_objects(text: &str, set: TrajectorySet) -> Result<TrajectorySet> {
    if text.trim().is_empty() {
        return Err(CoreError::Parse { line: 1, detail: "empty file".into() });
    }
    let mut rdr = reader(text);
    check_header(&mut rdr, &["object_id", "x", "y"], 0)?;
    let mut statics = set.statics;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CoreError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(CoreError::Parse { line, detail: format!("expected 3 fields, found {}", rec.len()) });
        }
        statics.push(StaticObject {
            id: rec[0].to_string(),
            position: Vec2::new(field(&rec, 1, "x", line)?, field(&rec, 2, "y", line)?),
        });
    }
    TrajectorySet::new(set.rate, set.tracks, statics)
}

pub fn load_static_objects(path: impl AsRef<Path>, set: TrajectorySet) -> Result<TrajectorySet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_static_objects(&text, set)
}

/// Writes tracks in frame order; segments of one agent share its id.
pub fn write_trajectories(set: &TrajectorySet, out: &mut impl Write) -> Result<()> {
    let err = |e: std::io::Error| CoreError::data(format!("writing trajectories: {e}"));
    writeln!(out, "#rate={}", set.rate).map_err(err)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CoreError::data(format!("writing trajectories: {e}"));
    w.write_record(["frame", "agent_id", "x", "y"]).map_err(csv_err)?;
    let mut rows: BTreeMap<i64, Vec<(usize, Vec2)>> = BTreeMap::new();
    for (i, t) in set.tracks.iter().enumerate() {
        for (k, &p) in t.positions.iter().enumerate() {
            rows.entry(t.start_frame + k as i64).or_default().push((i, p));
        }
    }
    for (frame, list) in rows {
        for (i, p) in list {
            w.write_record([frame.to_string(), set.tracks[i].agent_id.clone(), p.x.to_string(), p.y.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(err)
}

pub fn write_static_objects(set: &TrajectorySet, out: &mut impl Write) -> Result<()> {
    let csv_err = |e: csv::Error| CoreError::data(format!("writing objects: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["object_id", "x", "y"]).map_err(csv_err)?;
    for s in &set.statics {
        w.write_record([s.id.clone(), s.position.x.to_string(), s.position.y.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CoreError::data(format!("writing objects: {e}")))
}

/// Options for [`make_dataset`].
#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct DatasetOptions {
    pub tolerances: ToleranceSet,
    /// Slot count to use instead of the computed n*; must not be smaller.
    pub n_star: Option<usize>,
    /// Recorded in the metadata; the chronological split does not consume it.
    pub split_seed: u64,
}


#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub framework: Framework,
    pub config: ClusterConfig,
    pub rate: f64,
    pub tolerances: ToleranceSet,
    pub n_star: usize,
    pub split_seed: u64,
    pub dictionary: Option<Dictionary>,
    /// Digest of `dictionary`, 0 for metric datasets.
    pub dictionary_digest: u64,
    pub train: Vec<ClusterSample>,
    pub validation: Vec<ClusterSample>,
    pub test: Vec<ClusterSample>,
}

/// Sizes of the validation and test blocks: a tenth each, rounded down.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = n / 10;
    (n - 2 * tenth, tenth, tenth)
}

/// Boundary closest to `target` that does not split a run of equal starts,
/// constrained to `lo..=hi`.
fn group_boundary(starts: &[i64], target: usize, lo: usize, hi: usize) -> Option<usize> {
    (lo..=hi)
        .filter(|&b| b == 0 || b == starts.len() || starts[b - 1] != starts[b])
        .min_by_key(|&b| (b.abs_diff(target), std::cmp::Reverse(b)))
}

/// Clusters, assembles and splits one scene chronologically 80/10/10.
pub fn make_dataset(
    set: &TrajectorySet,
    framework: Framework,
    config: &ClusterConfig,
    dictionary: Option<&Dictionary>,
    options: &DatasetOptions,
) -> Result<DatasetSplits> {
    let memberships = build_clusters(set, config)?;
    let computed = compute_n_star(&memberships);
    let n_star = match options.n_star {
        Some(n) if n < computed => {
            return Err(CoreError::usage(format!("requested n* {n} is below the scene's n* {computed}")))
        }
        Some(n) => n,
        None => computed,
    };
    let mut samples = assemble_samples(&memberships, set, dictionary, framework, n_star, &options.tolerances)?;
    if samples.len() < 10 {
        return Err(CoreError::usage(format!("only {} samples; at least 10 are needed to split", samples.len())));
    }
    samples.sort_by_key(|s| s.window_start);
    let starts: Vec<i64> = samples.iter().map(|s| s.window_start).collect();
    let n = samples.len();
    let (n_train, n_val, _) = split_sizes(n);
    let b1 = group_boundary(&starts, n_train, 1, n - 2)
        .ok_or_else(|| CoreError::usage("too few distinct window starts for a chronological split"))?;
    let b2 = group_boundary(&starts, n_train + n_val, b1 + 1, n - 1)
        .ok_or_else(|| CoreError::usage("too few distinct window starts for a chronological split"))?;
    let test = samples.split_off(b2);
    let validation = samples.split_off(b1);
    let dictionary = if framework.is_symbolic() { dictionary.cloned() } else { None };
    Ok(DatasetSplits {
        framework,
        config: *config,
        rate: set.rate,
        tolerances: options.tolerances,
        n_star,
        split_seed: options.split_seed,
        dictionary_digest: dictionary.as_ref().map_or(0, Dictionary::digest),
        dictionary,
        train: samples,
        validation,
        test,
    })
}

fn encode_sample(e: &mut Encoder, s: &ClusterSample) {
    e.str(&s.center).i64(s.window_start).usize(s.members.len());
    for m in &s.members {
        e.str(m);
    }
    e.usize(s.slots).usize(s.t_history).usize(s.t_future).bools(&s.mask).bools(&s.present);
    match &s.data {
        SampleData::Symbolic(v) => {
            e.u8(0).usizes(v);
        }
        SampleData::Metric { origin, center, coords } => {
            e.u8(1).f64(origin.x).f64(origin.y);
            let flat = |v: &[Vec2]| v.iter().flat_map(|p| [p.x, p.y]).collect::<Vec<f64>>();
            e.f64s(&flat(center)).f64s(&flat(coords));
        }
    }
}

fn decode_sample(d: &mut Decoder<'_>) -> Result<ClusterSample> {
    let center = d.str()?;
    let window_start = d.i64()?;
    let nm = d.usize()?;
    if nm > d.remaining() {
        return Err(CoreError::Corruption("member count exceeds data".into()));
    }
    let members = (0..nm).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
    let slots = d.usize()?;
    let t_history = d.usize()?;
    let t_future = d.usize()?;
    let mask = d.bools()?;
    let present = d.bools()?;
    let data = match d.u8()? {
        0 => SampleData::Symbolic(d.usizes()?),
        1 => {
            let origin = Vec2::new(d.f64()?, d.f64()?);
            let pts = |v: Vec<f64>| -> Result<Vec<Vec2>> {
                if !v.len().is_multiple_of(2) {
                    return Err(CoreError::Corruption("odd coordinate array".into()));
                }
                Ok(v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect())
            };
            let center = pts(d.f64s()?)?;
            let coords = pts(d.f64s()?)?;
            SampleData::Metric { origin, center, coords }
        }
        t => return Err(CoreError::Corruption(format!("unknown sample kind {t}"))),
    };
    let steps = t_history + t_future;
    let cells = slots.checked_mul(steps).ok_or_else(|| CoreError::Corruption("sample size overflow".into()))?;
    let sized = mask.len() == cells
        && present.len() == cells
        && members.len() <= slots
        && match &data {
            SampleData::Symbolic(v) => v.len() == cells,
            SampleData::Metric { center, coords, .. } => center.len() == steps && coords.len() == cells,
        };
    if !sized {
        return Err(CoreError::Corruption("sample arrays do not match their shape".into()));
    }
    Ok(ClusterSample { center, window_start, members, slots, t_history, t_future, mask, present, data })
}

impl DatasetSplits {
    pub fn all_samples(&self) -> impl Iterator<Item = &ClusterSample> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raises the slot count of every sample to `n_star`.
    pub fn pad_to(&mut self, n_star: usize) -> Result<()> {
        let imp = self.dictionary.as_ref().map(Dictionary::impossible_index);
        for s in self.train.iter_mut().chain(&mut self.validation).chain(&mut self.test) {
            s.pad_to(n_star, imp)?;
        }
        self.n_star = n_star;
        Ok(())
    }

    pub fn to_container(&self) -> Container {
        let mut cfg = Encoder::new();
        cfg.u8(self.framework.tag())
            .f64(self.config.radius)
            .usize(self.config.t_history)
            .usize(self.config.t_future)
            .usize(self.config.stride)
            .f64(self.rate)
            .f64(self.tolerances.distance)
            .f64(self.tolerances.cross)
            .f64(self.tolerances.speed)
            .f64(self.tolerances.angle)
            .usize(self.n_star)
            .u64(self.split_seed)
            .u64(self.dictionary_digest);
        let mut dict = Encoder::new();
        match &self.dictionary {
            Some(d) => {
                dict.bool(true);
                d.encode(&mut dict);
            }
            None => {
                dict.bool(false);
            }
        }
        let mut arrays = Encoder::new();
        for split in [&self.train, &self.validation, &self.test] {
            arrays.usize(split.len());
            for s in split {
                encode_sample(&mut arrays, s);
            }
        }
        let mut c = Container::new(FileKind::Dataset);
        c.push("config", cfg.finish());
        c.push("dictionary", dict.finish());
        c.push("arrays", arrays.finish());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mut d = Decoder::new(c.section("config")?);
        let tag = d.u8()?;
        let framework =
            Framework::from_tag(tag).ok_or_else(|| CoreError::Corruption(format!("unknown framework tag {tag}")))?;
        let config = ClusterConfig {
            radius: d.f64()?,
            t_history: d.usize()?,
            t_future: d.usize()?,
            stride: d.usize()?,
        };
        let rate = d.f64()?;
        let tolerances = ToleranceSet { distance: d.f64()?, cross: d.f64()?, speed: d.f64()?, angle: d.f64()? };
        let n_star = d.usize()?;
        let split_seed = d.u64()?;
        let dictionary_digest = d.u64()?;
        d.expect_end()?;

        let mut d = Decoder::new(c.section("dictionary")?);
        let dictionary = if d.bool()? { Some(Dictionary::decode(&mut d)?) } else { None };
        d.expect_end()?;
        if dictionary.as_ref().map_or(0, Dictionary::digest) != dictionary_digest {
            return Err(CoreError::Corruption("dictionary digest does not match metadata".into()));
        }

        let mut d = Decoder::new(c.section("arrays")?);
        let mut splits = Vec::with_capacity(3);
        for _ in 0..3 {
            let n = d.usize()?;
            if n > d.remaining() {
                return Err(CoreError::Corruption("sample count exceeds data".into()));
            }
            splits.push((0..n).map(|_| decode_sample(&mut d)).collect::<Result<Vec<_>>>()?);
        }
        d.expect_end()?;
        let test = splits.pop().expect("three splits");
        let validation = splits.pop().expect("three splits");
        let train = splits.pop().expect("three splits");
        Ok(DatasetSplits {
            framework,
            config,
            rate,
            tolerances,
            n_star,
            split_seed,
            dictionary,
            dictionary_digest,
            train,
            validation,
            test,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path, FileKind::Dataset)?)
    }
}

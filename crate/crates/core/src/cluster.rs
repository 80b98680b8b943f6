//! Radial clusters around each moving agent and fixed-size windowed samples.

use std::collections::BTreeSet;

use crate::dataset::TrajectorySet;
use crate::dictionary::Dictionary;
use crate::error::{CoreError, Result};
use crate::geom::Vec2;
use crate::qtc::{qtc_series, QtcVariant, QtcVector, ToleranceSet};

/// The three prediction frameworks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Framework {
    /// Predicts C1 dictionary indices.
    Qtc4,
    /// Predicts C2 dictionary indices.
    Qtc6,
    /// Predicts coordinates, converted to QTC afterwards.
    Ts,
}

impl Framework {
    pub fn qtc_variant(self) -> Option<QtcVariant> {
        match self {
            Framework::Qtc4 => Some(QtcVariant::C1),
            Framework::Qtc6 => Some(QtcVariant::C2),
            Framework::Ts => None,
        }
    }

    pub fn is_symbolic(self) -> bool {
        self != Framework::Ts
    }

    pub fn tag(self) -> u8 {
        match self {
            Framework::Qtc4 => 4,
            Framework::Qtc6 => 6,
            Framework::Ts => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            4 => Some(Framework::Qtc4),
            6 => Some(Framework::Qtc6),
            0 => Some(Framework::Ts),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Framework::Qtc4 => "qtc4",
            Framework::Qtc6 => "qtc6",
            Framework::Ts => "ts",
        }
    }
}

impl std::str::FromStr for Framework {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qtc4" => Ok(Framework::Qtc4),
            "qtc6" => Ok(Framework::Qtc6),
            "ts" => Ok(Framework::Ts),
            _ => Err(CoreError::usage(format!("unknown framework {s:?} (expected qtc4, qtc6 or ts)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Meters.
    pub radius: f64,
    pub t_history: usize,
    pub t_future: usize,
    pub stride: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            radius: 1.2,
            t_history: 10,
            t_future: 48,
            stride: 1,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(CoreError::usage(format!("radius must be positive, got {}", self.radius)));
        }
        if self.t_history < 2 || self.t_future < 1 || self.stride < 1 {
            return Err(CoreError::usage(format!(
                "need t_history >= 2, t_future >= 1, stride >= 1; got {}, {}, {}",
                self.t_history, self.t_future, self.stride
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.t_history + self.t_future
    }
}

/// A potential cluster member: a track segment or a static object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MemberRef {
    Track(usize),
    Static(usize),
}

/// Members within the radius of one center track at each of its frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterClusters {
    pub track: usize,
    pub start_frame: i64,
    pub per_frame: Vec<Vec<MemberRef>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Memberships {
    pub config: ClusterConfig,
    pub centers: Vec<CenterClusters>,
}

impl Memberships {
    /// Window start offsets (relative to the center's first frame) in sampling order.
    fn window_offsets(&self, c: &CenterClusters) -> impl Iterator<Item = usize> {
        let w = self.config.window();
        let n = c.per_frame.len();
        let last = if n >= w { Some(n - w) } else { None };
        (0..).step_by(self.config.stride).take_while(move |&o| last.is_some_and(|l| o <= l))
    }

    fn distinct_members(c: &CenterClusters, offset: usize, len: usize) -> BTreeSet<MemberRef> {
        c.per_frame[offset..offset + len].iter().flatten().copied().collect()
    }
}

fn member_position(set: &TrajectorySet, m: MemberRef, frame: i64) -> Option<Vec2> {
    match m {
        MemberRef::Track(i) => set.tracks[i].position_at(frame),
        MemberRef::Static(j) => Some(set.statics[j].position),
    }
}

fn member_id(set: &TrajectorySet, m: MemberRef) -> String {
    match m {
        MemberRef::Track(i) => set.tracks[i].id.clone(),
        MemberRef::Static(j) => set.statics[j].id.clone(),
    }
}

/// Members of each moving agent's cluster at every frame it is present.
///
/// Static objects are members only, never centers.
pub fn build_clusters(set: &TrajectorySet, config: &ClusterConfig) -> Result<Memberships> {
    config.validate()?;
    if set.tracks.is_empty() {
        return Err(CoreError::usage("trajectory set has no moving agents"));
    }
    let r2 = config.radius * config.radius;
    let within = |a: Vec2, b: Vec2| {
        let d = a - b;
        d.dot(d) <= r2
    };
    let centers = set
        .tracks
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let per_frame = (0..c.positions.len())
                .map(|k| {
                    let frame = c.start_frame + k as i64;
                    let p = c.positions[k];
                    let mut members: Vec<MemberRef> = set
                        .tracks
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != ci)
                        .filter_map(|(j, t)| {
                            t.position_at(frame).filter(|&q| within(p, q)).map(|_| MemberRef::Track(j))
                        })
                        .collect();
                    members.extend(
                        set.statics
                            .iter()
                            .enumerate()
                            .filter(|(_, s)| within(p, s.position))
                            .map(|(j, _)| MemberRef::Static(j)),
                    );
                    members
                })
                .collect();
            CenterClusters {
                track: ci,
                start_frame: c.start_frame,
                per_frame,
            }
        })
        .collect();
    Ok(Memberships {
        config: *config,
        centers,
    })
}

/// Largest number of distinct members seen in any sampling window.
pub fn compute_n_star(memberships: &Memberships) -> usize {
    let w = memberships.config.window();
    memberships
        .centers
        .iter()
        .flat_map(|c| {
            memberships
                .window_offsets(c)
                .map(move |o| Memberships::distinct_members(c, o, w).len())
        })
        .max()
        .unwrap_or(0)
}

/// Per-slot content of one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleData {
    /// Dictionary index per slot and window step.
    Symbolic(Vec<usize>),
    /// Coordinates relative to `origin`, the center's position at the last
    /// history step. `center` is the center's own relative track.
    Metric {
        origin: Vec2,
        center: Vec<Vec2>,
        coords: Vec<Vec2>,
    },
}

/// One windowed example around a center agent.
///
/// Per-slot arrays are slot-major with `t_history + t_future` steps per slot;
/// the first `t_history` steps are history, the rest are labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSample {
    pub center: String,
    pub window_start: i64,
    /// Real members in slot order; slots past `members.len()` are padding.
    pub members: Vec<String>,
    pub slots: usize,
    pub t_history: usize,
    pub t_future: usize,
    /// Member is inside the radius.
    pub mask: Vec<bool>,
    /// Member's track exists at that frame.
    pub present: Vec<bool>,
    pub data: SampleData,
}

impl ClusterSample {
    pub fn steps(&self) -> usize {
        self.t_history + self.t_future
    }

    pub fn at(&self, slot: usize, step: usize) -> usize {
        slot * self.steps() + step
    }

    pub fn indices(&self) -> Option<&[usize]> {
        match &self.data {
            SampleData::Symbolic(v) => Some(v),
            SampleData::Metric { .. } => None,
        }
    }

    pub fn history_index(&self, slot: usize, t: usize) -> Option<usize> {
        self.indices().map(|v| v[self.at(slot, t)])
    }

    pub fn label_index(&self, slot: usize, k: usize) -> Option<usize> {
        self.indices().map(|v| v[self.at(slot, self.t_history + k)])
    }

    pub fn is_metric(&self) -> bool {
        matches!(self.data, SampleData::Metric { .. })
    }

    /// Adds padding slots up to `slots`.
    pub fn pad_to(&mut self, slots: usize, impossible_index: Option<usize>) -> Result<()> {
        if slots < self.slots {
            return Err(CoreError::usage(format!("cannot shrink {} slots to {slots}", self.slots)));
        }
        let extra = (slots - self.slots) * self.steps();
        self.mask.extend(std::iter::repeat_n(false, extra));
        self.present.extend(std::iter::repeat_n(false, extra));
        match &mut self.data {
            SampleData::Symbolic(v) => {
                let imp = impossible_index.ok_or_else(|| CoreError::usage("symbolic padding needs the impossible index"))?;
                v.extend(std::iter::repeat_n(imp, extra));
            }
            SampleData::Metric { coords, .. } => coords.extend(std::iter::repeat_n(Vec2::ZERO, extra)),
        }
        self.slots = slots;
        Ok(())
    }
}

/// QTC vector between the center and one member at every window step, or
/// `None` where the member is absent, outside the radius, or coincides with
/// the center.
///
/// Vectors are computed from the window's positions alone, per run of
/// consecutive present frames.
pub fn window_pair_series(
    variant: QtcVariant,
    center: &[Vec2],
    member: &[Option<Vec2>],
    radius: f64,
    rate: f64,
    eps: &ToleranceSet,
) -> Vec<Option<QtcVector>> {
    let n = center.len().min(member.len());
    let mut out = vec![None; n];
    let mut t = 0;
    while t < n {
        if member[t].is_none() {
            t += 1;
            continue;
        }
        let start = t;
        while t < n && member[t].is_some() {
            t += 1;
        }
        let run: Vec<Vec2> = member[start..t].iter().map(|m| m.expect("inside run")).collect();
        let c = &center[start..t];
        // fall back to per-step evaluation when any step of the run is degenerate
        match qtc_series(variant, c, &run, rate, eps) {
            Ok(series) => {
                for (k, q) in series.into_iter().enumerate() {
                    out[start + k] = Some(q);
                }
            }
            Err(_) => {
                for k in 0..run.len() {
                    let lo = k.saturating_sub(1);
                    let hi = (k + 2).min(run.len());
                    if let Ok(s) = qtc_series(variant, &c[lo..hi], &run[lo..hi], rate, eps) {
                        out[start + k] = Some(s[k - lo]);
                    }
                }
            }
        }
    }
    for (t, q) in out.iter_mut().enumerate() {
        if let Some(m) = member[t] {
            if m.dist(center[t]) > radius {
                *q = None;
            }
        }
    }
    out
}

/// Assembles windowed samples for every center with at least one member.
///
/// `n_star` fixes the slot count and must be at least the largest member
/// count of any window.
#[allow(clippy::too_many_arguments)]
pub fn assemble_samples(
    memberships: &Memberships,
    set: &TrajectorySet,
    dict: Option<&Dictionary>,
    framework: Framework,
    n_star: usize,
    eps: &ToleranceSet,
) -> Result<Vec<ClusterSample>> {
    let cfg = &memberships.config;
    if let Some(variant) = framework.qtc_variant() {
        let d = dict.ok_or_else(|| CoreError::usage("symbolic frameworks need a dictionary"))?;
        if d.variant() != variant {
            return Err(CoreError::Compatibility(format!(
                "{} framework needs a {variant} dictionary, got {}",
                framework.name(),
                d.variant()
            )));
        }
    }
    let w = cfg.window();
    let mut out = Vec::new();
    for c in &memberships.centers {
        let track = &set.tracks[c.track];
        for offset in memberships.window_offsets(c) {
            let members = Memberships::distinct_members(c, offset, w);
            if members.is_empty() {
                continue;
            }
            if members.len() > n_star {
                return Err(CoreError::usage(format!(
                    "window has {} members but n* is {n_star}",
                    members.len()
                )));
            }
            let start = c.start_frame + offset as i64;
            let center_pos = &track.positions[offset..offset + w];
            let first = center_pos[0];
            let mut ordered: Vec<(f64, String, MemberRef)> = members
                .into_iter()
                .map(|m| {
                    let d = member_position(set, m, start).map_or(f64::INFINITY, |p| p.dist(first));
                    (d, member_id(set, m), m)
                })
                .collect();
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

            let mut mask = vec![false; n_star * w];
            let mut present = vec![false; n_star * w];
            let mut positions: Vec<Vec<Option<Vec2>>> = Vec::with_capacity(ordered.len());
            for (slot, (_, _, m)) in ordered.iter().enumerate() {
                let pos: Vec<Option<Vec2>> =
                    (0..w).map(|t| member_position(set, *m, start + t as i64)).collect();
                for t in 0..w {
                    if let Some(p) = pos[t] {
                        present[slot * w + t] = true;
                        mask[slot * w + t] = p.dist(center_pos[t]) <= cfg.radius;
                    }
                }
                positions.push(pos);
            }

            // QTC labels and coordinates share one local frame centered on the
            // center's last history position
            let origin = center_pos[cfg.t_history - 1];
            let center_local: Vec<Vec2> = center_pos.iter().map(|&p| p - origin).collect();
            let local: Vec<Vec<Option<Vec2>>> =
                positions.iter().map(|pos| pos.iter().map(|p| p.map(|p| p - origin)).collect()).collect();
            let data = match framework.qtc_variant() {
                Some(variant) => {
                    let d = dict.expect("checked above");
                    let imp = d.impossible_index();
                    let mut idx = vec![imp; n_star * w];
                    for (slot, pos) in local.iter().enumerate() {
                        let series = window_pair_series(variant, &center_local, pos, cfg.radius, set.rate, eps);
                        for (t, q) in series.iter().enumerate() {
                            if let Some(q) = q {
                                idx[slot * w + t] = d.index_of(q)?;
                            }
                        }
                    }
                    SampleData::Symbolic(idx)
                }
                None => {
                    let mut coords = vec![Vec2::ZERO; n_star * w];
                    for (slot, pos) in local.iter().enumerate() {
                        for (t, p) in pos.iter().enumerate() {
                            if let Some(p) = p {
                                coords[slot * w + t] = *p;
                            }
                        }
                    }
                    SampleData::Metric {
                        origin,
                        center: center_local,
                        coords,
                    }
                }
            };
            out.push(ClusterSample {
                center: track.id.clone(),
                window_start: start,
                members: ordered.into_iter().map(|(_, id, _)| id).collect(),
                slots: n_star,
                t_history: cfg.t_history,
                t_future: cfg.t_future,
                mask,
                present,
                data,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{StaticObject, Track};
    use crate::dictionary::{build_dictionary, SamplingConfig};

    fn line(id: &str, start: i64, from: Vec2, vel: Vec2, frames: usize) -> Track {
        Track::new(id, start, (0..frames).map(|k| from + vel * k as f64).collect())
    }

    fn set(tracks: Vec<Track>) -> TrajectorySet {
        TrajectorySet::new(15.0, tracks, Vec::new()).unwrap()
    }

    fn cfg(radius: f64) -> ClusterConfig {
        ClusterConfig {
            radius,
            t_history: 2,
            t_future: 1,
            stride: 1,
        }
    }

    #[test]
    fn radius_selects_members() {
        let s = set(vec![
            line("c", 0, Vec2::ZERO, Vec2::ZERO, 3),
            line("a", 0, Vec2::new(0.5, 0.0), Vec2::ZERO, 3),
            line("b", 0, Vec2::new(0.0, 1.0), Vec2::ZERO, 3),
            line("d", 0, Vec2::new(-1.5, 0.0), Vec2::ZERO, 3),
        ]);
        let m = build_clusters(&s, &cfg(1.2)).unwrap();
        assert_eq!(m.centers[0].per_frame[0], vec![MemberRef::Track(1), MemberRef::Track(2)]);
        let m = build_clusters(&s, &cfg(3.7)).unwrap();
        assert_eq!(m.centers[0].per_frame[0].len(), 3);
    }

    #[test]
    fn boundary_crossing_is_pointwise() {
        let s = set(vec![
            line("c", 0, Vec2::ZERO, Vec2::ZERO, 10),
            line("a", 0, Vec2::new(0.75, 0.0), Vec2::new(0.1, 0.0), 10),
        ]);
        let m = build_clusters(&s, &cfg(1.2)).unwrap();
        let inside: Vec<bool> = m.centers[0].per_frame.iter().map(|f| !f.is_empty()).collect();
        assert_eq!(inside, vec![true, true, true, true, true, false, false, false, false, false]);
    }

    #[test]
    fn statics_are_members_not_centers() {
        let s = TrajectorySet::new(
            15.0,
            vec![line("c", 0, Vec2::ZERO, Vec2::ZERO, 4)],
            vec![StaticObject { id: "desk".into(), position: Vec2::new(0.3, 0.4) }],
        )
        .unwrap();
        let m = build_clusters(&s, &cfg(1.2)).unwrap();
        assert_eq!(m.centers.len(), 1);
        assert!(m.centers[0].per_frame.iter().all(|f| f == &vec![MemberRef::Static(0)]));
    }

    #[test]
    fn n_star_and_window_count() {
        let mut tracks = vec![line("c", 0, Vec2::ZERO, Vec2::new(0.01, 0.0), 100)];
        tracks.push(line("a", 0, Vec2::new(0.5, 0.0), Vec2::new(0.01, 0.0), 100));
        let s = set(tracks);
        let config = ClusterConfig { radius: 1.2, t_history: 10, t_future: 48, stride: 1 };
        let m = build_clusters(&s, &config).unwrap();
        assert_eq!(compute_n_star(&m), 1);
        let dict = build_dictionary(
            QtcVariant::C1,
            &SamplingConfig { samples: 20_000, ..SamplingConfig::default() },
        )
        .unwrap()
        .dictionary;
        let samples =
            assemble_samples(&m, &s, Some(&dict), Framework::Qtc4, 1, &ToleranceSet::default()).unwrap();
        // both agents are centers
        assert_eq!(samples.len(), 2 * 43);
    }

    #[test]
    fn isolated_agent_gives_no_samples() {
        let s = set(vec![
            line("c", 0, Vec2::ZERO, Vec2::ZERO, 20),
            line("far", 0, Vec2::new(9.0, 0.0), Vec2::ZERO, 20),
        ]);
        let m = build_clusters(&s, &cfg(1.2)).unwrap();
        assert_eq!(compute_n_star(&m), 0);
        let out = assemble_samples(&m, &s, None, Framework::Ts, 0, &ToleranceSet::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn departure_and_padding() {
        // member recedes along x and leaves the 1.2 m radius at frame 5
        let s = set(vec![
            line("c", 0, Vec2::ZERO, Vec2::ZERO, 10),
            line("a", 0, Vec2::new(0.75, 0.0), Vec2::new(0.1, 0.0), 10),
            line("b", 0, Vec2::new(0.0, 0.6), Vec2::ZERO, 10),
        ]);
        let config = ClusterConfig { radius: 1.2, t_history: 3, t_future: 7, stride: 1 };
        let m = build_clusters(&s, &config).unwrap();
        let dict = build_dictionary(
            QtcVariant::C1,
            &SamplingConfig { samples: 20_000, ..SamplingConfig::default() },
        )
        .unwrap()
        .dictionary;
        let imp = dict.impossible_index();
        let out = assemble_samples(&m, &s, Some(&dict), Framework::Qtc4, 4, &ToleranceSet::default()).unwrap();
        let sample = out.iter().find(|x| x.center == "c").unwrap();
        assert_eq!(sample.members, vec!["b".to_string(), "a".to_string()]);
        let a_labels: Vec<usize> = (0..7).map(|k| sample.label_index(1, k).unwrap()).collect();
        assert!(a_labels[..2].iter().all(|&i| i != imp));
        assert!(a_labels[2..].iter().all(|&i| i == imp));
        let away = dict.index_of(&QtcVector::from_codes(QtcVariant::C1, &[0, 1, 0, 0]).unwrap()).unwrap();
        assert_eq!(a_labels[0], away);
        for slot in 2..4 {
            assert!((0..10).all(|t| !sample.mask[sample.at(slot, t)]));
            assert!((0..7).all(|k| sample.label_index(slot, k) == Some(imp)));
        }
    }

    #[test]
    fn metric_samples_are_egocentric() {
        let s = set(vec![
            line("c", 0, Vec2::new(3.0, 4.0), Vec2::new(0.05, 0.0), 12),
            line("a", 0, Vec2::new(3.5, 4.0), Vec2::new(0.05, 0.0), 12),
        ]);
        let config = ClusterConfig { radius: 1.2, t_history: 4, t_future: 3, stride: 2 };
        let m = build_clusters(&s, &config).unwrap();
        let n = compute_n_star(&m);
        let out = assemble_samples(&m, &s, None, Framework::Ts, n, &ToleranceSet::default()).unwrap();
        assert_eq!(out.len(), 2 * 3);
        for smp in &out {
            let SampleData::Metric { center, coords, .. } = &smp.data else { panic!() };
            assert_eq!(center[3], Vec2::ZERO);
            assert!((coords[3].norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_dictionary_entry_is_an_error() {
        let s = set(vec![
            line("c", 0, Vec2::ZERO, Vec2::new(0.1, 0.0), 10),
            line("a", 0, Vec2::new(1.0, 0.0), Vec2::new(-0.1, 0.0), 10),
        ]);
        let config = ClusterConfig { radius: 3.7, t_history: 3, t_future: 2, stride: 1 };
        let m = build_clusters(&s, &config).unwrap();
        let dict = Dictionary::from_vectors(QtcVariant::C1, []).unwrap();
        let err = assemble_samples(&m, &s, Some(&dict), Framework::Qtc4, 1, &ToleranceSet::default());
        assert!(matches!(err, Err(CoreError::UnknownVector(_))));
    }

    #[test]
    fn window_series_skips_absent_steps() {
        let center = vec![Vec2::ZERO; 4];
        let member = vec![None, Some(Vec2::new(1.0, 0.0)), Some(Vec2::new(0.9, 0.0)), None];
        let s = window_pair_series(QtcVariant::C1, &center, &member, 3.7, 15.0, &ToleranceSet::default());
        assert!(s[0].is_none() && s[3].is_none());
        let toward = QtcVector::from_codes(QtcVariant::C1, &[0, -1, 0, 0]).unwrap();
        assert_eq!(s[1], Some(toward));
        assert_eq!(s[2], Some(toward));
    }
}

//! Seeded synthetic crowd scenes built from piecewise constant-velocity motion.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{StaticObject, Track, TrajectorySet};
use crate::error::{CoreError, Result};
use crate::geom::Vec2;
use crate::qtc::{compute_qtc_c2, PairWindow, PointState, QtcSymbol, QtcVariant, QtcVector, ToleranceSet};

/// Minimum distance between any two agents or objects at any frame.
pub const MIN_SEPARATION: f64 = 0.05;

const PLACEMENT_TRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    /// Two agents on one line walk towards each other, stop short, and walk back.
    HeadOn,
    /// Two agents on parallel lanes shuttle in the same initial direction at different speeds.
    Overtake,
    /// Two agents on parallel lanes shuttle in opposite initial directions.
    PassBy,
    /// Agents standing still in a small circle.
    StaticGroup,
    /// Agents in single file moving as one rigid column.
    Queue,
    /// Agents walking to random waypoints with pauses.
    RandomWaypoint,
}

impl Primitive {
    pub const ALL: [Primitive; 6] = [
        Primitive::HeadOn,
        Primitive::Overtake,
        Primitive::PassBy,
        Primitive::StaticGroup,
        Primitive::Queue,
        Primitive::RandomWaypoint,
    ];

    pub fn group_size(self) -> usize {
        match self {
            Primitive::HeadOn | Primitive::Overtake | Primitive::PassBy => 2,
            Primitive::StaticGroup | Primitive::Queue => 3,
            Primitive::RandomWaypoint => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Primitive::HeadOn => "head-on",
            Primitive::Overtake => "overtake",
            Primitive::PassBy => "pass-by",
            Primitive::StaticGroup => "static-group",
            Primitive::Queue => "queue",
            Primitive::RandomWaypoint => "random-waypoint",
        }
    }
}

impl std::str::FromStr for Primitive {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CoreError::usage(format!("unknown primitive {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Relative weights used when assigning agents to primitives.
    pub mix: Vec<(Primitive, u32)>,
    pub agents: usize,
    pub duration: usize,
    pub rate: f64,
    /// Width and height of the arena `[0, w] x [0, h]`, meters.
    pub arena: Vec2,
    pub static_objects: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Every primitive, 20 agents, 5000 frames at 15 Hz.
    pub fn suite(seed: u64) -> Self {
        ScenarioSpec {
            mix: Primitive::ALL.iter().map(|&p| (p, 1)).collect(),
            agents: 20,
            duration: 5000,
            rate: 15.0,
            arena: Vec2::new(20.0, 20.0),
            static_objects: 3,
            seed,
        }
    }

    /// Random-waypoint walkers only.
    pub fn random_waypoint(seed: u64) -> Self {
        ScenarioSpec {
            mix: vec![(Primitive::RandomWaypoint, 1)],
            static_objects: 0,
            ..Self::suite(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 || self.duration < 2 {
            return Err(CoreError::usage("scenario needs at least one agent and two frames"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(CoreError::usage(format!("rate must be positive, got {}", self.rate)));
        }
        if !(self.arena.x >= 2.0 && self.arena.y >= 2.0 && self.arena.is_finite()) {
            return Err(CoreError::usage("arena must be at least 2 m on each side"));
        }
        if self.mix.is_empty() || self.mix.iter().all(|&(_, w)| w == 0) {
            return Err(CoreError::usage("primitive mix has no positive weight"));
        }
        Ok(())
    }
}

/// Fills `out` with constant-velocity steps from its last position to `to`.
fn walk(out: &mut Vec<Vec2>, to: Vec2, speed: f64, rate: f64) {
    let from = *out.last().expect("walk starts from a position");
    let dist = from.dist(to);
    let frames = ((dist * rate / speed).ceil() as usize).max(1);
    for k in 1..=frames {
        out.push(from + (to - from) * (k as f64 / frames as f64));
    }
}

fn pause(out: &mut Vec<Vec2>, frames: usize) {
    let p = *out.last().expect("pause needs a position");
    out.extend(std::iter::repeat_n(p, frames));
}

struct Generator<'a> {
    spec: &'a ScenarioSpec,
    rng: ChaCha8Rng,
    tracks: Vec<Vec<Vec2>>,
}

impl Generator<'_> {
    fn speed(&mut self) -> f64 {
        self.rng.gen_range(0.5..1.5)
    }

    fn inside(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.spec.arena.x && p.y <= self.spec.arena.y
    }

    fn clear_of_others(&self, candidate: &[Vec2]) -> bool {
        self.tracks
            .iter()
            .all(|t| t.iter().zip(candidate).all(|(a, b)| a.dist(*b) >= MIN_SEPARATION))
    }

    /// A segment of the given length fully inside the arena, with room for `lane` sideways.
    fn segment(&mut self, length: f64, lane: f64) -> Option<(Vec2, Vec2, Vec2)> {
        let a = self.spec.arena;
        for _ in 0..PLACEMENT_TRIES {
            let start = Vec2::new(self.rng.gen_range(0.0..a.x), self.rng.gen_range(0.0..a.y));
            let dir = Vec2::from_polar(1.0, self.rng.gen_range(0.0..2.0 * PI));
            let side = dir.rotate(PI / 2.0) * lane;
            let end = start + dir * length;
            if [start, end, start + side, end + side].iter().all(|&p| self.inside(p)) {
                return Some((start, end, side));
            }
        }
        None
    }

    fn lane_length(&mut self) -> f64 {
        let max = self.spec.arena.x.min(self.spec.arena.y) * 0.8;
        self.rng.gen_range(0.5 * max..max).min(10.0)
    }

    /// One agent shuttling between `a` and `b` with per-leg speeds and pauses.
    fn shuttle(&mut self, a: Vec2, b: Vec2) -> Vec<Vec2> {
        let n = self.spec.duration;
        let mut out = vec![a];
        let mut target = b;
        while out.len() < n {
            let v = self.speed();
            walk(&mut out, target, v, self.spec.rate);
            let p = self.rng.gen_range(0..20);
            pause(&mut out, p);
            target = if target == b { a } else { b };
        }
        out.truncate(n);
        out
    }

    fn head_on(&mut self) -> Option<Vec<Vec<Vec2>>> {
        let length = self.lane_length();
        let (a, b, _) = self.segment(length, 0.0)?;
        let n = self.spec.duration;
        let rate = self.spec.rate;
        let (mut r, mut h) = (vec![a], vec![b]);
        let stop_gap = 0.6;
        while r.len() < n {
            let (vr, vh) = (self.speed(), self.speed());
            let frames = (((length - stop_gap) / (vr + vh)) * rate).floor().max(1.0) as usize;
            let (dr, dh) = ((b - a) * (vr / length / rate), (a - b) * (vh / length / rate));
            for k in 1..=frames {
                r.push(a + dr * k as f64);
                h.push(b + dh * k as f64);
            }
            let p = self.rng.gen_range(0..20);
            pause(&mut r, p);
            pause(&mut h, p);
            for k in (0..frames).rev() {
                r.push(a + dr * k as f64);
                h.push(b + dh * k as f64);
            }
            let p = self.rng.gen_range(0..20);
            pause(&mut r, p);
            pause(&mut h, p);
        }
        r.truncate(n);
        h.truncate(n);
        Some(vec![r, h])
    }

    fn lanes(&mut self, opposite: bool) -> Option<Vec<Vec<Vec2>>> {
        let length = self.lane_length();
        let lane = self.rng.gen_range(0.3..0.8);
        let (a, b, side) = self.segment(length, lane)?;
        let first = self.shuttle(a, b);
        let second = if opposite {
            self.shuttle(b + side, a + side)
        } else {
            self.shuttle(a + side, b + side)
        };
        Some(vec![first, second])
    }

    fn static_group(&mut self, size: usize) -> Option<Vec<Vec<Vec2>>> {
        let radius = self.rng.gen_range(0.4..0.8);
        let (c, _, _) = self.segment(0.0, 0.0)?;
        let phase = self.rng.gen_range(0.0..2.0 * PI);
        let members: Vec<Vec2> = (0..size)
            .map(|k| c + Vec2::from_polar(radius, phase + 2.0 * PI * k as f64 / size as f64))
            .collect();
        if !members.iter().all(|&p| self.inside(p)) {
            return None;
        }
        Some(members.into_iter().map(|p| vec![p; self.spec.duration]).collect())
    }

    fn queue(&mut self, size: usize) -> Option<Vec<Vec<Vec2>>> {
        let spacing = self.rng.gen_range(0.6..1.0);
        let column = spacing * (size - 1) as f64;
        let length = self.lane_length();
        let (a, b, _) = self.segment(length + column, 0.0)?;
        let dir = (b - a) * (1.0 / (length + column));
        let lead = self.shuttle(a + dir * column, b);
        Some(
            (0..size)
                .map(|k| {
                    let back = dir * (spacing * k as f64);
                    lead.iter().map(|&p| p - back).collect()
                })
                .collect(),
        )
    }

    fn waypoint_walker(&mut self) -> Option<Vec<Vec<Vec2>>> {
        let a = self.spec.arena;
        let n = self.spec.duration;
        let mut out = Vec::with_capacity(n + 64);
        let mut placed = false;
        for _ in 0..PLACEMENT_TRIES {
            let p = Vec2::new(self.rng.gen_range(0.0..a.x), self.rng.gen_range(0.0..a.y));
            if self.tracks.iter().all(|t| t[0].dist(p) >= MIN_SEPARATION) {
                out.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
        while out.len() < n {
            let base = out.len();
            let mut accepted = false;
            for attempt in 0..PLACEMENT_TRIES {
                let mut leg = vec![out[base - 1]];
                if attempt % 4 == 3 {
                    let p = self.rng.gen_range(1..15);
                    pause(&mut leg, p);
                } else {
                    let to = Vec2::new(self.rng.gen_range(0.0..a.x), self.rng.gen_range(0.0..a.y));
                    let v = self.speed();
                    walk(&mut leg, to, v, self.spec.rate);
                    let p = self.rng.gen_range(0..30);
                    pause(&mut leg, p);
                }
                let leg = &leg[1..];
                let end = (base + leg.len()).min(n);
                let ok = self.tracks.iter().all(|t| {
                    t[base..end].iter().zip(leg).all(|(q, p)| q.dist(*p) >= MIN_SEPARATION)
                });
                if ok {
                    out.extend_from_slice(&leg[..end - base]);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return None;
            }
        }
        Some(vec![out])
    }

    fn group(&mut self, p: Primitive) -> Option<Vec<Vec<Vec2>>> {
        match p {
            Primitive::HeadOn => self.head_on(),
            Primitive::Overtake => self.lanes(false),
            Primitive::PassBy => self.lanes(true),
            Primitive::StaticGroup => self.static_group(p.group_size()),
            Primitive::Queue => self.queue(p.group_size()),
            Primitive::RandomWaypoint => self.waypoint_walker(),
        }
    }
}

/// Assigns each agent to a primitive; groups that do not fit the remaining
/// count become random-waypoint walkers.
fn allocate(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Primitive> {
    let total: u32 = spec.mix.iter().map(|&(_, w)| w).sum();
    let mut left = spec.agents;
    let mut groups = Vec::new();
    while left > 0 {
        let mut pick = rng.gen_range(0..total);
        let mut chosen = spec.mix[0].0;
        for &(p, w) in &spec.mix {
            if pick < w {
                chosen = p;
                break;
            }
            pick -= w;
        }
        if chosen.group_size() > left {
            chosen = Primitive::RandomWaypoint;
        }
        left -= chosen.group_size();
        groups.push(chosen);
    }
    groups
}

/// Generates a scene; the same spec always yields the same set.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<TrajectorySet> {
    spec.validate()?;
    let footprint = spec.agents as f64 * 0.5;
    if footprint > spec.arena.x * spec.arena.y {
        return Err(CoreError::Generation(format!(
            "{} agents do not fit a {} x {} m arena",
            spec.agents, spec.arena.x, spec.arena.y
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut groups = allocate(spec, &mut rng);
    // walkers last so they are checked against every structured group
    groups.sort_by_key(|&p| p == Primitive::RandomWaypoint);
    let mut g = Generator {
        spec,
        rng,
        tracks: Vec::new(),
    };
    let mut names = Vec::new();
    for p in groups {
        let mut placed = false;
        for _ in 0..PLACEMENT_TRIES {
            if let Some(members) = g.group(p) {
                if members.iter().all(|m| g.clear_of_others(m)) {
                    for (k, m) in members.into_iter().enumerate() {
                        names.push(format!("{}-{}-{}", p.name(), g.tracks.len(), k));
                        g.tracks.push(m);
                    }
                    placed = true;
                    break;
                }
            }
        }
        if !placed {
            return Err(CoreError::Generation(format!(
                "could not place a {} group without collisions",
                p.name()
            )));
        }
    }
    let mut statics = Vec::new();
    for k in 0..spec.static_objects {
        let mut placed = false;
        for _ in 0..PLACEMENT_TRIES {
            let p = Vec2::new(g.rng.gen_range(0.0..spec.arena.x), g.rng.gen_range(0.0..spec.arena.y));
            let clear = g.tracks.iter().all(|t| t.iter().all(|q| q.dist(p) >= MIN_SEPARATION))
                && statics.iter().all(|s: &StaticObject| s.position.dist(p) >= MIN_SEPARATION);
            if clear {
                statics.push(StaticObject { id: format!("object-{k}"), position: p });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CoreError::Generation("no free spot for a static object".into()));
        }
    }
    let tracks = names
        .into_iter()
        .zip(g.tracks)
        .map(|(id, positions)| Track::new(id, 0, positions))
        .collect();
    TrajectorySet::new(spec.rate, tracks, statics)
}

/// A closed-form pair motion along the x axis.
///
/// Agent `r` starts at `r0` and `h` at `h0`; both keep constant velocities
/// (meters per second) for `frames` frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveInstance {
    pub kind: Primitive,
    pub r0: Vec2,
    pub vr: Vec2,
    pub h0: Vec2,
    pub vh: Vec2,
    pub frames: usize,
    pub rate: f64,
}

impl PrimitiveInstance {
    /// Collinear approach from `separation` meters apart.
    pub fn head_on(separation: f64, speed_r: f64, speed_h: f64, frames: usize, rate: f64) -> Self {
        PrimitiveInstance {
            kind: Primitive::HeadOn,
            r0: Vec2::ZERO,
            vr: Vec2::new(speed_r, 0.0),
            h0: Vec2::new(separation, 0.0),
            vh: Vec2::new(-speed_h, 0.0),
            frames,
            rate,
        }
    }

    /// `r` starts `gap` meters behind `h`, whose lane is `lane` meters to `r`'s left.
    pub fn overtake(gap: f64, lane: f64, speed_rear: f64, speed_front: f64, frames: usize, rate: f64) -> Self {
        PrimitiveInstance {
            kind: Primitive::Overtake,
            r0: Vec2::ZERO,
            vr: Vec2::new(speed_rear, 0.0),
            h0: Vec2::new(gap, lane),
            vh: Vec2::new(speed_front, 0.0),
            frames,
            rate,
        }
    }

    /// Opposite directions on lanes `lane` meters apart, `gap` meters apart along the lanes.
    pub fn pass_by(gap: f64, lane: f64, speed_r: f64, speed_h: f64, frames: usize, rate: f64) -> Self {
        PrimitiveInstance {
            kind: Primitive::PassBy,
            r0: Vec2::ZERO,
            vr: Vec2::new(speed_r, 0.0),
            h0: Vec2::new(gap, lane),
            vh: Vec2::new(-speed_h, 0.0),
            frames,
            rate,
        }
    }

    pub fn static_pair(separation: f64, frames: usize, rate: f64) -> Self {
        PrimitiveInstance {
            kind: Primitive::StaticGroup,
            r0: Vec2::ZERO,
            vr: Vec2::ZERO,
            h0: Vec2::new(separation, 0.0),
            vh: Vec2::ZERO,
            frames,
            rate,
        }
    }

    /// `r` follows `h` at `spacing` meters, both at `speed`.
    pub fn queue(spacing: f64, speed: f64, frames: usize, rate: f64) -> Self {
        PrimitiveInstance {
            kind: Primitive::Queue,
            r0: Vec2::ZERO,
            vr: Vec2::new(speed, 0.0),
            h0: Vec2::new(spacing, 0.0),
            vh: Vec2::new(speed, 0.0),
            frames,
            rate,
        }
    }

    pub fn tracks(&self) -> (Vec<Vec2>, Vec<Vec2>) {
        let at = |p0: Vec2, v: Vec2| -> Vec<Vec2> {
            (0..self.frames).map(|k| p0 + v * (k as f64 / self.rate)).collect()
        };
        (at(self.r0, self.vr), at(self.h0, self.vh))
    }
}

fn sign(x: f64) -> QtcSymbol {
    QtcSymbol::from_sign(x, 0.0)
}

/// Symbol stream implied by the geometry of a closed-form instance.
///
/// Values at the frames where the longitudinal order of the agents flips
/// are those of the side the agents are leaving.
pub fn analytic_qtc(inst: &PrimitiveInstance, variant: QtcVariant) -> Result<Vec<QtcVector>> {
    use QtcSymbol::{Minus, Plus, Zero};
    let (sr, sh) = (inst.vr.norm(), inst.vh.norm());
    let q5 = sign(sr - sh);
    let lane = inst.h0.y - inst.r0.y;
    let lateral = if lane == 0.0 { Zero } else { sign(lane) };
    let mut out = Vec::with_capacity(inst.frames);
    for k in 0..inst.frames {
        let t = k as f64 / inst.rate;
        let ahead = (inst.h0.x + inst.vh.x * t) - (inst.r0.x + inst.vr.x * t);
        let before = ahead > 0.0;
        let s: [QtcSymbol; 6] = match inst.kind {
            Primitive::StaticGroup => [Zero; 6],
            Primitive::HeadOn => {
                // collinear: each moving agent closes in until the crossing, then recedes
                let toward = if before { Minus } else { Plus };
                let q1 = if sr > 0.0 { toward } else { Zero };
                let q2 = if sh > 0.0 { toward } else { Zero };
                [q1, q2, Zero, Zero, q5, Zero]
            }
            Primitive::Overtake | Primitive::Queue => {
                // same heading; the rear agent closes in while the front one recedes
                let (q1, q2) = if before { (Minus, Plus) } else { (Plus, Minus) };
                let q6 = if before { Minus } else { Plus };
                [q1, q2, lateral, lateral.flipped(), q5, q6]
            }
            Primitive::PassBy => {
                // opposite headings on parallel lanes: each agent keeps the other on the same side
                let q12 = if before { Minus } else { Plus };
                [q12, q12, lateral, lateral, q5, Zero]
            }
            Primitive::RandomWaypoint => {
                return Err(CoreError::Unsupported("random-waypoint motion has no closed form".into()))
            }
        };
        out.push(QtcVector::new(variant, &s[..variant.len()])?);
    }
    Ok(out)
}

/// Counts of `-`, `0`, `+` for each C2 symbol over all agent pairs within
/// `radius`, sampled every `step` frames.
pub fn coverage_matrix(set: &TrajectorySet, radius: f64, step: usize, eps: &ToleranceSet) -> [[usize; 3]; 6] {
    let mut counts = [[0usize; 3]; 6];
    let n = set.tracks.len();
    let state = |t: &Track, k: usize| {
        let f = t.start_frame + k as i64;
        let cur = t.positions[k];
        let prev = if k > 0 { t.positions[k - 1] } else { cur };
        (
            PointState::stationary(prev, f - 1),
            PointState::from_positions(prev, cur, set.rate, f),
            t.positions.get(k + 1).map(|&p| PointState::from_positions(cur, p, set.rate, f + 1)),
        )
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (&set.tracks[i], &set.tracks[j]);
            let mut frame = a.start_frame.max(b.start_frame) + 1;
            while frame <= a.end_frame().min(b.end_frame()) {
                let ka = (frame - a.start_frame) as usize;
                let kb = (frame - b.start_frame) as usize;
                if a.positions[ka].dist(b.positions[kb]) <= radius {
                    let (r_prev, r_cur, r_next) = state(a, ka);
                    let (h_prev, h_cur, h_next) = state(b, kb);
                    let w = PairWindow { r_prev, r_cur, r_next, h_prev, h_cur, h_next };
                    if let Ok(q) = compute_qtc_c2(&w, eps) {
                        for (row, s) in counts.iter_mut().zip(q.symbols()) {
                            row[(s.code() + 1) as usize] += 1;
                        }
                    }
                }
                frame += step as i64;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtc::qtc_series;

    fn small_spec(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            agents: 8,
            duration: 400,
            ..ScenarioSpec::suite(seed)
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        assert_eq!(generate_scenario(&small_spec(3)).unwrap(), generate_scenario(&small_spec(3)).unwrap());
        assert_ne!(generate_scenario(&small_spec(3)).unwrap(), generate_scenario(&small_spec(4)).unwrap());
    }

    #[test]
    fn full_length_tracks_inside_arena_and_apart() {
        let spec = small_spec(9);
        let s = generate_scenario(&spec).unwrap();
        assert_eq!(s.tracks.len(), 8);
        for t in &s.tracks {
            assert_eq!(t.positions.len(), 400);
            assert!(t.positions.iter().all(|p| p.is_finite()
                && (0.0..=spec.arena.x).contains(&p.x)
                && (0.0..=spec.arena.y).contains(&p.y)));
        }
        for f in 0..400 {
            for i in 0..8 {
                for j in i + 1..8 {
                    assert!(s.tracks[i].positions[f].dist(s.tracks[j].positions[f]) >= MIN_SEPARATION);
                }
            }
        }
    }

    #[test]
    fn crowded_arena_is_infeasible() {
        let spec = ScenarioSpec { agents: 200, arena: Vec2::new(2.0, 2.0), ..small_spec(1) };
        assert!(matches!(generate_scenario(&spec), Err(CoreError::Generation(_))));
    }

    #[test]
    fn head_on_closing_phase() {
        let inst = PrimitiveInstance::head_on(10.0, 1.0, 1.0, 60, 15.0);
        let q = analytic_qtc(&inst, QtcVariant::C1).unwrap();
        let expect = QtcVector::from_codes(QtcVariant::C1, &[-1, -1, 0, 0]).unwrap();
        assert!(q.iter().all(|v| *v == expect));
        let (r, h) = inst.tracks();
        assert!(r.iter().zip(&h).all(|(a, b)| a.dist(*b) > 0.6));
    }

    #[test]
    fn collinear_overtake_symbols() {
        let inst = PrimitiveInstance::overtake(3.0, 0.0, 1.4, 0.8, 40, 15.0);
        let q = analytic_qtc(&inst, QtcVariant::C2).unwrap();
        assert!(q.iter().all(|v| v.codes()[..2] == [-1, 1] && v.codes()[4] == 1));
    }

    #[test]
    fn random_waypoint_has_no_closed_form() {
        let inst = PrimitiveInstance { kind: Primitive::RandomWaypoint, ..PrimitiveInstance::static_pair(1.0, 3, 15.0) };
        assert!(matches!(analytic_qtc(&inst, QtcVariant::C1), Err(CoreError::Unsupported(_))));
    }

    #[test]
    fn analytic_agrees_with_computed_away_from_transitions() {
        let eps = ToleranceSet::default();
        let instances = [
            PrimitiveInstance::head_on(8.0, 1.0, 0.7, 60, 15.0),
            PrimitiveInstance::overtake(2.0, 0.5, 1.4, 0.8, 120, 15.0),
            PrimitiveInstance::overtake(1.5, -0.4, 1.0, 1.0, 30, 15.0),
            PrimitiveInstance::pass_by(5.0, 0.6, 1.0, 1.2, 100, 15.0),
            PrimitiveInstance::pass_by(5.0, -0.6, 1.1, 1.1, 100, 15.0),
            PrimitiveInstance::queue(0.8, 1.0, 50, 15.0),
            PrimitiveInstance::static_pair(2.0, 20, 15.0),
        ];
        for inst in instances {
            for variant in [QtcVariant::C1, QtcVariant::C2] {
                let expect = analytic_qtc(&inst, variant).unwrap();
                let (r, h) = inst.tracks();
                let got = qtc_series(variant, &r, &h, inst.rate, &eps).unwrap();
                let flips: Vec<usize> = (1..expect.len()).filter(|&k| expect[k] != expect[k - 1]).collect();
                for k in 0..expect.len() {
                    if flips.iter().any(|&f| k + 1 >= f && k <= f + 1) {
                        continue;
                    }
                    assert_eq!(got[k], expect[k], "{:?} {variant} frame {k}", inst.kind);
                }
            }
        }
    }

    #[test]
    fn primitive_names_round_trip() {
        for p in Primitive::ALL {
            assert_eq!(p.name().parse::<Primitive>().unwrap(), p);
        }
    }
}

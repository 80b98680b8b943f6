//! Double-cross qualitative trajectory calculus.
//!
//! For two agents `r` and `h` the symbols are:
//!
//! * `q1`: `r` moves towards (`-`) or away from (`+`) the current position of `h`;
//! * `q2`: the same with the roles swapped;
//! * `q3`: `h` lies to the left (`+`) or right (`-`) of `r`'s heading;
//! * `q4`: the same with the roles swapped;
//! * `q5`: `r` is slower (`-`) or faster (`+`) than `h`;
//! * `q6`: `r`'s velocity makes a smaller (`-`) or larger (`+`) absolute angle
//!   with the line towards `h` than `h`'s velocity makes with the line towards `r`.
//!
//! Any comparison that falls within the configured tolerance yields `0`.

use std::fmt;

use crate::error::{CoreError, Result};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QtcSymbol {
    Minus,
    Zero,
    Plus,
    Impossible,
}

impl QtcSymbol {
    pub const IMPOSSIBLE_CODE: i32 = 10;

    pub fn code(self) -> i32 {
        match self {
            QtcSymbol::Minus => -1,
            QtcSymbol::Zero => 0,
            QtcSymbol::Plus => 1,
            QtcSymbol::Impossible => Self::IMPOSSIBLE_CODE,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            -1 => Some(QtcSymbol::Minus),
            0 => Some(QtcSymbol::Zero),
            1 => Some(QtcSymbol::Plus),
            Self::IMPOSSIBLE_CODE => Some(QtcSymbol::Impossible),
            _ => None,
        }
    }

    /// Sign of `value` with a dead band of half-width `tol`.
    pub fn from_sign(value: f64, tol: f64) -> Self {
        if value > tol {
            QtcSymbol::Plus
        } else if value < -tol {
            QtcSymbol::Minus
        } else {
            QtcSymbol::Zero
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            QtcSymbol::Minus => QtcSymbol::Plus,
            QtcSymbol::Plus => QtcSymbol::Minus,
            s => s,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            QtcSymbol::Minus => '-',
            QtcSymbol::Zero => '0',
            QtcSymbol::Plus => '+',
            QtcSymbol::Impossible => 'x',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QtcVariant {
    C1,
    C2,
}

impl QtcVariant {
    pub fn len(self) -> usize {
        match self {
            QtcVariant::C1 => 4,
            QtcVariant::C2 => 6,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            QtcVariant::C1 => 1,
            QtcVariant::C2 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(QtcVariant::C1),
            2 => Some(QtcVariant::C2),
            _ => None,
        }
    }
}

impl fmt::Display for QtcVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QtcVariant::C1 => f.write_str("C1"),
            QtcVariant::C2 => f.write_str("C2"),
        }
    }
}

/// A C1 or C2 vector. Slots past `variant.len()` are always `Zero`, so the
/// derived ordering is lexicographic by numeric encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QtcVector {
    variant: QtcVariant,
    symbols: [QtcSymbol; 6],
}

impl QtcVector {
    pub fn new(variant: QtcVariant, symbols: &[QtcSymbol]) -> Result<Self> {
        if symbols.len() != variant.len() {
            return Err(CoreError::usage(format!(
                "{variant} vector needs {} symbols, got {}",
                variant.len(),
                symbols.len()
            )));
        }
        let impossible = symbols.iter().filter(|s| **s == QtcSymbol::Impossible).count();
        if impossible != 0 && impossible != symbols.len() {
            return Err(CoreError::usage(
                "a vector is either fully impossible or has no impossible symbol",
            ));
        }
        let mut s = [QtcSymbol::Zero; 6];
        s[..symbols.len()].copy_from_slice(symbols);
        Ok(QtcVector { variant, symbols: s })
    }

    pub fn from_codes(variant: QtcVariant, codes: &[i32]) -> Result<Self> {
        let symbols = codes
            .iter()
            .map(|&c| {
                QtcSymbol::from_code(c)
                    .ok_or_else(|| CoreError::usage(format!("invalid symbol code {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(variant, &symbols)
    }

    pub fn impossible(variant: QtcVariant) -> Self {
        let mut s = [QtcSymbol::Zero; 6];
        s[..variant.len()].fill(QtcSymbol::Impossible);
        QtcVector { variant, symbols: s }
    }

    pub fn zero(variant: QtcVariant) -> Self {
        QtcVector {
            variant,
            symbols: [QtcSymbol::Zero; 6],
        }
    }

    pub fn variant(&self) -> QtcVariant {
        self.variant
    }

    pub fn symbols(&self) -> &[QtcSymbol] {
        &self.symbols[..self.variant.len()]
    }

    pub fn codes(&self) -> Vec<i32> {
        self.symbols().iter().map(|s| s.code()).collect()
    }

    pub fn is_impossible(&self) -> bool {
        self.symbols[0] == QtcSymbol::Impossible
    }

    /// The C1 prefix of a C2 vector; C1 vectors are returned unchanged.
    pub fn to_c1(&self) -> QtcVector {
        let mut s = self.symbols;
        s[4] = QtcSymbol::Zero;
        s[5] = QtcSymbol::Zero;
        QtcVector {
            variant: QtcVariant::C1,
            symbols: s,
        }
    }

    /// The vector seen from the other agent's side.
    pub fn swapped(&self) -> QtcVector {
        let s = self.symbols;
        let symbols = match self.variant {
            QtcVariant::C1 => [s[1], s[0], s[3], s[2], s[4], s[5]],
            QtcVariant::C2 => [s[1], s[0], s[3], s[2], s[4].flipped(), s[5].flipped()],
        };
        QtcVector {
            variant: self.variant,
            symbols,
        }
    }
}

impl fmt::Display for QtcVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.symbols().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", s.as_char())?;
        }
        f.write_str(")")
    }
}

/// Dead-band half-widths for the `0` symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSet {
    /// Distance change, meters. Also the minimum heading displacement and pair separation.
    pub distance: f64,
    /// Cross product of unit vectors.
    pub cross: f64,
    /// Speed difference, meters per second.
    pub speed: f64,
    /// Angle difference, radians.
    pub angle: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            distance: 1e-3,
            cross: 1e-3,
            speed: 1e-3,
            angle: 1e-3,
        }
    }
}

impl ToleranceSet {
    pub fn validate(&self) -> Result<()> {
        let all = [self.distance, self.cross, self.speed, self.angle];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(CoreError::usage(format!("tolerances must be positive: {self:?}")))
        }
    }
}

/// Kinematic state of one agent at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub position: Vec2,
    /// Meters per second.
    pub velocity: Vec2,
    pub frame: i64,
}

impl PointState {
    /// State at `cur` with velocity from the backward difference to `prev`.
    pub fn from_positions(prev: Vec2, cur: Vec2, rate: f64, frame: i64) -> Self {
        PointState {
            position: cur,
            velocity: (cur - prev) * rate,
            frame,
        }
    }

    pub fn stationary(position: Vec2, frame: i64) -> Self {
        PointState {
            position,
            velocity: Vec2::ZERO,
            frame,
        }
    }
}

/// Previous, current and optional next states of both agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWindow {
    pub r_prev: PointState,
    pub r_cur: PointState,
    pub r_next: Option<PointState>,
    pub h_prev: PointState,
    pub h_cur: PointState,
    pub h_next: Option<PointState>,
}

impl PairWindow {
    pub fn swapped(&self) -> PairWindow {
        PairWindow {
            r_prev: self.h_prev,
            r_cur: self.h_cur,
            r_next: self.h_next,
            h_prev: self.r_prev,
            h_cur: self.r_cur,
            h_next: self.r_next,
        }
    }
}

fn towards_symbol(self_prev: Vec2, self_cur: Vec2, other_cur: Vec2, eps: &ToleranceSet) -> QtcSymbol {
    let change = self_prev.dist(other_cur) - self_cur.dist(other_cur);
    // positive change means the distance shrank, which is '-'
    QtcSymbol::from_sign(-change, eps.distance)
}

fn side_symbol(
    prev: &PointState,
    cur: &PointState,
    next: Option<&PointState>,
    other: Vec2,
    eps: &ToleranceSet,
) -> QtcSymbol {
    let heading = match next {
        Some(n) => n.position - cur.position,
        None => cur.position - prev.position,
    };
    let len = heading.norm();
    if len < eps.distance {
        return QtcSymbol::Zero;
    }
    let line = other - cur.position;
    let c = (heading * (1.0 / len)).cross(line * (1.0 / line.norm()));
    QtcSymbol::from_sign(c, eps.cross)
}

/// Absolute angle in `[0, pi]` between `velocity` and `line`; `0` for a
/// stationary agent.
fn heading_angle(velocity: Vec2, line: Vec2, eps: &ToleranceSet) -> f64 {
    if velocity.norm() <= eps.speed {
        return 0.0;
    }
    velocity.cross(line).abs().atan2(velocity.dot(line))
}

fn check_pair(w: &PairWindow, eps: &ToleranceSet) -> Result<()> {
    let d = w.r_cur.position.dist(w.h_cur.position);
    if !(d >= eps.distance) {
        return Err(CoreError::DegeneratePair { distance: d });
    }
    Ok(())
}

fn c1_symbols(w: &PairWindow, eps: &ToleranceSet) -> [QtcSymbol; 4] {
    let (r, h) = (w.r_cur.position, w.h_cur.position);
    [
        towards_symbol(w.r_prev.position, r, h, eps),
        towards_symbol(w.h_prev.position, h, r, eps),
        side_symbol(&w.r_prev, &w.r_cur, w.r_next.as_ref(), h, eps),
        side_symbol(&w.h_prev, &w.h_cur, w.h_next.as_ref(), r, eps),
    ]
}

pub fn compute_qtc_c1(w: &PairWindow, eps: &ToleranceSet) -> Result<QtcVector> {
    check_pair(w, eps)?;
    let s = c1_symbols(w, eps);
    Ok(QtcVector {
        variant: QtcVariant::C1,
        symbols: [s[0], s[1], s[2], s[3], QtcSymbol::Zero, QtcSymbol::Zero],
    })
}

pub fn compute_qtc_c2(w: &PairWindow, eps: &ToleranceSet) -> Result<QtcVector> {
    check_pair(w, eps)?;
    let s = c1_symbols(w, eps);
    let (r, h) = (w.r_cur.position, w.h_cur.position);
    let (vr, vh) = (w.r_cur.velocity, w.h_cur.velocity);
    let q5 = QtcSymbol::from_sign(vr.norm() - vh.norm(), eps.speed);
    let q6 = QtcSymbol::from_sign(
        heading_angle(vr, h - r, eps) - heading_angle(vh, r - h, eps),
        eps.angle,
    );
    Ok(QtcVector {
        variant: QtcVariant::C2,
        symbols: [s[0], s[1], s[2], s[3], q5, q6],
    })
}

pub fn compute_qtc(variant: QtcVariant, w: &PairWindow, eps: &ToleranceSet) -> Result<QtcVector> {
    match variant {
        QtcVariant::C1 => compute_qtc_c1(w, eps),
        QtcVariant::C2 => compute_qtc_c2(w, eps),
    }
}

/// L1 distance between the numeric encodings of two same-variant vectors.
pub fn conceptual_distance(a: &QtcVector, b: &QtcVector) -> Result<u32> {
    if a.variant != b.variant {
        return Err(CoreError::usage(format!(
            "cannot compare {} vector with {} vector",
            a.variant, b.variant
        )));
    }
    Ok(a
        .symbols()
        .iter()
        .zip(b.symbols())
        .map(|(x, y)| (x.code() - y.code()).unsigned_abs())
        .sum())
}

/// States at index `t` of a track sampled at `rate`.
///
/// The previous position at the first index is extrapolated backwards from
/// the next one; the next state is absent at the last index.
pub fn track_states(track: &[Vec2], t: usize, rate: f64, frame: i64) -> (PointState, PointState, Option<PointState>) {
    let cur = track[t];
    let prev = if t > 0 {
        track[t - 1]
    } else if track.len() > 1 {
        cur - (track[1] - cur)
    } else {
        cur
    };
    let prev_prev = if t > 1 { track[t - 2] } else { prev - (cur - prev) };
    let next = track.get(t + 1).map(|&n| PointState::from_positions(cur, n, rate, frame + 1));
    (
        PointState::from_positions(prev_prev, prev, rate, frame - 1),
        PointState::from_positions(prev, cur, rate, frame),
        next,
    )
}

/// QTC vector at every index of two aligned tracks.
///
/// Headings at the last index fall back to the backward displacement, so the
/// result depends only on the positions inside the slices.
pub fn qtc_series(
    variant: QtcVariant,
    r: &[Vec2],
    h: &[Vec2],
    rate: f64,
    eps: &ToleranceSet,
) -> Result<Vec<QtcVector>> {
    if r.len() != h.len() {
        return Err(CoreError::usage(format!(
            "tracks of different length: {} and {}",
            r.len(),
            h.len()
        )));
    }
    (0..r.len())
        .map(|t| {
            let (r_prev, r_cur, r_next) = track_states(r, t, rate, t as i64);
            let (h_prev, h_cur, h_next) = track_states(h, t, rate, t as i64);
            let w = PairWindow {
                r_prev,
                r_cur,
                r_next,
                h_prev,
                h_cur,
                h_next,
            };
            compute_qtc(variant, &w, eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use QtcSymbol::{Minus as M, Plus as P, Zero as Z};

    fn window(r: [(f64, f64); 3], h: [(f64, f64); 3]) -> PairWindow {
        let v = |p: (f64, f64)| Vec2::new(p.0, p.1);
        let rate = 1.0;
        PairWindow {
            r_prev: PointState::stationary(v(r[0]), 0),
            r_cur: PointState::from_positions(v(r[0]), v(r[1]), rate, 1),
            r_next: Some(PointState::from_positions(v(r[1]), v(r[2]), rate, 2)),
            h_prev: PointState::stationary(v(h[0]), 0),
            h_cur: PointState::from_positions(v(h[0]), v(h[1]), rate, 1),
            h_next: Some(PointState::from_positions(v(h[1]), v(h[2]), rate, 2)),
        }
    }

    fn vec(variant: QtcVariant, s: &[QtcSymbol]) -> QtcVector {
        QtcVector::new(variant, s).unwrap()
    }

    #[test]
    fn collinear_head_on_approach() {
        let w = window([(0., 0.), (1., 0.), (2., 0.)], [(10., 0.), (9., 0.), (8., 0.)]);
        let eps = ToleranceSet::default();
        assert_eq!(compute_qtc_c1(&w, &eps).unwrap(), vec(QtcVariant::C1, &[M, M, Z, Z]));
    }

    #[test]
    fn stationary_pair_is_all_zero() {
        let w = window([(0., 0.); 3], [(5., 0.); 3]);
        let eps = ToleranceSet::default();
        assert_eq!(compute_qtc_c1(&w, &eps).unwrap(), QtcVector::zero(QtcVariant::C1));
        assert_eq!(compute_qtc_c2(&w, &eps).unwrap(), QtcVector::zero(QtcVariant::C2));
    }

    #[test]
    fn offset_parallel_approach_puts_each_agent_on_the_others_left() {
        let w = window([(0., 0.), (1., 0.), (2., 0.)], [(10., 1.), (9., 1.), (8., 1.)]);
        let eps = ToleranceSet::default();
        assert_eq!(
            compute_qtc_c2(&w, &eps).unwrap(),
            vec(QtcVariant::C2, &[M, M, P, P, Z, Z])
        );
    }

    #[test]
    fn faster_agent_gets_plus_speed_symbol() {
        let w = window([(-2., 0.), (0., 0.), (2., 0.)], [(11., 0.), (10., 0.), (9., 0.)]);
        let q = compute_qtc_c2(&w, &ToleranceSet::default()).unwrap();
        assert_eq!(q.symbols()[4], P);
        assert_eq!(q.symbols()[5], Z);
    }

    #[test]
    fn coincident_agents_are_rejected() {
        let w = window([(0., 0.); 3], [(0., 0.), (0., 0.0005), (0., 0.)]);
        assert!(matches!(
            compute_qtc_c1(&w, &ToleranceSet::default()),
            Err(CoreError::DegeneratePair { .. })
        ));
    }

    #[test]
    fn last_frame_uses_backward_heading() {
        let mut w = window([(0., 0.), (1., 0.), (2., 0.)], [(5., 3.), (5., 3.), (5., 3.)]);
        let with_next = compute_qtc_c1(&w, &ToleranceSet::default()).unwrap();
        w.r_next = None;
        w.h_next = None;
        assert_eq!(compute_qtc_c1(&w, &ToleranceSet::default()).unwrap(), with_next);
        assert_eq!(with_next.symbols()[2], P);
    }

    #[test]
    fn distance_examples() {
        let a = vec(QtcVariant::C1, &[M, M, Z, Z]);
        let b = vec(QtcVariant::C1, &[P, P, Z, Z]);
        assert_eq!(conceptual_distance(&a, &a).unwrap(), 0);
        assert_eq!(conceptual_distance(&a, &b).unwrap(), 4);
        let zero = QtcVector::zero(QtcVariant::C1);
        assert_eq!(conceptual_distance(&zero, &QtcVector::impossible(QtcVariant::C1)).unwrap(), 40);
        let z2 = QtcVector::zero(QtcVariant::C2);
        assert_eq!(conceptual_distance(&z2, &QtcVector::impossible(QtcVariant::C2)).unwrap(), 60);
        assert!(conceptual_distance(&a, &z2).is_err());
    }

    #[test]
    fn per_symbol_distance_to_impossible() {
        let imp = QtcSymbol::Impossible.code();
        let d: Vec<i32> = [M, Z, P].iter().map(|s| (s.code() - imp).abs()).collect();
        assert_eq!(d, vec![11, 10, 9]);
    }

    #[test]
    fn mixed_impossible_vector_is_rejected() {
        let bad = [QtcSymbol::Impossible, Z, Z, Z];
        assert!(QtcVector::new(QtcVariant::C1, &bad).is_err());
        assert!(QtcVector::new(QtcVariant::C1, &[Z, Z]).is_err());
    }

    #[test]
    fn ordering_is_lexicographic_with_impossible_last() {
        let lo = vec(QtcVariant::C1, &[M, P, P, P]);
        let hi = vec(QtcVariant::C1, &[Z, M, M, M]);
        assert!(lo < hi);
        assert!(vec(QtcVariant::C1, &[P, P, P, P]) < QtcVector::impossible(QtcVariant::C1));
    }

    #[test]
    fn series_on_short_tracks() {
        let r = [Vec2::new(0., 0.), Vec2::new(0.1, 0.), Vec2::new(0.2, 0.)];
        let h = [Vec2::new(3., 0.); 3];
        let s = qtc_series(QtcVariant::C1, &r, &h, 15.0, &ToleranceSet::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|q| *q == vec(QtcVariant::C1, &[M, Z, Z, Z])));
    }
}

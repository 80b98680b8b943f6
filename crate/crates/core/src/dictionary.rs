//! Enumeration of realizable QTC vectors and the vector/class-index bijection.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{fnv1a64, Container, Decoder, Encoder, FileKind};
use crate::error::{CoreError, Result};
use crate::geom::Vec2;
use crate::qtc::{compute_qtc, PairWindow, PointState, QtcSymbol, QtcVariant, QtcVector, ToleranceSet};

/// Number of realizable vectors each variant is expected to have, excluding
/// the impossible vector.
pub fn target_realizable(variant: QtcVariant) -> usize {
    match variant {
        QtcVariant::C1 => 81,
        QtcVariant::C2 => 443,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    variant: QtcVariant,
    entries: Vec<QtcVector>,
    index: HashMap<QtcVector, usize>,
}

impl Dictionary {
    /// Builds from realizable vectors; sorts them and appends the impossible vector.
    pub fn from_vectors(variant: QtcVariant, vectors: impl IntoIterator<Item = QtcVector>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for v in vectors {
            if v.variant() != variant {
                return Err(CoreError::usage(format!("{} vector in a {variant} dictionary", v.variant())));
            }
            if !v.is_impossible() {
                set.insert(v);
            }
        }
        let mut entries: Vec<QtcVector> = set.into_iter().collect();
        entries.push(QtcVector::impossible(variant));
        let index = entries.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Ok(Dictionary { variant, entries, index })
    }

    pub fn variant(&self) -> QtcVariant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QtcVector] {
        &self.entries
    }

    pub fn impossible_index(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn index_of(&self, v: &QtcVector) -> Result<usize> {
        self.index.get(v).copied().ok_or(CoreError::UnknownVector(*v))
    }

    pub fn vector(&self, index: usize) -> Result<QtcVector> {
        self.entries.get(index).copied().ok_or(CoreError::IndexOutOfRange {
            index,
            size: self.entries.len(),
        })
    }

    pub fn contains(&self, v: &QtcVector) -> bool {
        self.index.contains_key(v)
    }

    /// Index of `v`, or of the closest entry by conceptual distance (lowest index on ties).
    pub fn nearest_index(&self, v: &QtcVector) -> usize {
        if let Some(&i) = self.index.get(v) {
            return i;
        }
        let codes = v.codes();
        let mut best = (u32::MAX, 0);
        for (i, e) in self.entries.iter().enumerate() {
            let d: u32 = e
                .codes()
                .iter()
                .zip(&codes)
                .map(|(a, b)| (a - b).unsigned_abs())
                .sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

impl Dictionary {
    pub fn encode(&self, e: &mut Encoder) {
        e.u8(self.variant.tag());
        e.usize(self.entries.len());
        for v in &self.entries {
            for c in v.codes() {
                e.u8(c as i8 as u8);
            }
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let tag = d.u8()?;
        let variant = QtcVariant::from_tag(tag)
            .ok_or_else(|| CoreError::Corruption(format!("unknown QTC variant tag {tag}")))?;
        let n = d.usize()?;
        if n == 0 || n.saturating_mul(variant.len()) > d.remaining() {
            return Err(CoreError::Corruption(format!("bad dictionary size {n}")));
        }
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let codes = (0..variant.len())
                .map(|_| d.u8().map(|b| i32::from(b as i8)))
                .collect::<Result<Vec<_>>>()?;
            entries.push(
                QtcVector::from_codes(variant, &codes).map_err(|e| CoreError::Corruption(e.to_string()))?,
            );
        }
        let imp = QtcVector::impossible(variant);
        let well_formed = entries.last() == Some(&imp)
            && entries[..n - 1].windows(2).all(|w| w[0] < w[1])
            && entries[..n - 1].iter().all(|v| !v.is_impossible());
        if !well_formed {
            return Err(CoreError::Corruption("dictionary entries out of canonical order".into()));
        }
        let index = entries.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Ok(Dictionary { variant, entries, index })
    }

    /// FNV-1a digest of the encoded dictionary; datasets and checkpoints record it.
    pub fn digest(&self) -> u64 {
        let mut e = Encoder::new();
        self.encode(&mut e);
        fnv1a64(&e.finish())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut e = Encoder::new();
        self.encode(&mut e);
        let mut c = Container::new(FileKind::Dictionary);
        c.push("dictionary", e.finish());
        c.write(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let c = Container::read(path, FileKind::Dictionary)?;
        let mut d = Decoder::new(c.section("dictionary")?);
        let dict = Self::decode(&mut d)?;
        d.expect_end()?;
        Ok(dict)
    }
}

/// Key for [`dict_lookup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LookupKey {
    Vector(QtcVector),
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LookupValue {
    Index(usize),
    Vector(QtcVector),
}

pub fn dict_lookup(dict: &Dictionary, key: LookupKey) -> Result<LookupValue> {
    match key {
        LookupKey::Vector(v) => dict.index_of(&v).map(LookupValue::Index),
        LookupKey::Index(i) => dict.vector(i).map(LookupValue::Vector),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Kinematic pair configurations drawn in the first pass; the stability
    /// pass draws the same number again from the continuing stream.
    pub samples: usize,
    pub seed: u64,
    /// Restrict every motion to the line joining the two agents.
    pub collinear_only: bool,
    pub tolerances: ToleranceSet,
    pub rate: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            samples: 400_000,
            seed: 0x5eed_d1c7,
            collinear_only: false,
            tolerances: ToleranceSet::default(),
            rate: 15.0,
        }
    }
}

/// Unrealized vectors when the enumerated count differs from the expected one.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub variant: QtcVariant,
    pub expected: usize,
    pub found: usize,
    /// Sign-domain vectors never produced by the sampler, in canonical order.
    pub unrealized: Vec<QtcVector>,
}

impl DeviationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} dictionary: {} realizable vectors enumerated, {} expected ({} impossible-free vectors in the sign domain)",
            self.variant,
            self.found,
            self.expected,
            3usize.pow(self.variant.len() as u32)
        );
        let _ = writeln!(s, "unrealized vectors ({}):", self.unrealized.len());
        for v in &self.unrealized {
            let _ = writeln!(s, "  {v}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizabilityReport {
    pub variant: QtcVariant,
    /// Realizable vectors after the first pass.
    pub count: usize,
    /// Realizable vectors after doubling the sample count.
    pub doubled_count: usize,
    pub stable: bool,
    pub samples: usize,
    pub deviation: Option<DeviationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryBuild {
    pub dictionary: Dictionary,
    pub report: RealizabilityReport,
}

/// Speed, heading angle relative to the line towards the other agent, and
/// the resulting per-frame displacement.
#[derive(Debug, Clone, Copy)]
struct Motion {
    speed: f64,
    angle: f64,
}

struct Sampler {
    rng: ChaCha8Rng,
    eps: ToleranceSet,
    rate: f64,
    collinear: bool,
}

impl Sampler {
    fn speed(&mut self) -> f64 {
        match self.rng.gen_range(0..10) {
            0 | 1 => 0.0,
            2 => self.rng.gen_range(0.0..0.05),
            _ => self.rng.gen_range(0.0..3.0),
        }
    }

    fn partner_speed(&mut self, s: f64) -> f64 {
        let band = 2.0 * self.eps.speed;
        match self.rng.gen_range(0..10) {
            0..=2 => s,
            3..=5 => (s + self.rng.gen_range(-band..band)).abs(),
            _ => self.speed(),
        }
    }

    /// Unsigned angles at which the distance change equals `-e` and `+e`.
    fn threshold_band(&self, speed: f64, sep: f64) -> (f64, f64) {
        let step = speed / self.rate;
        let edge = |e: f64| {
            let c = ((sep + e).powi(2) - sep * sep - step * step) / (2.0 * sep * step);
            c.clamp(-1.0, 1.0).acos()
        };
        let e = self.eps.distance;
        (edge(e), edge(-e))
    }

    fn angle(&mut self, speed: f64, sep: f64) -> f64 {
        if self.collinear {
            return if self.rng.gen_bool(0.5) { 0.0 } else { PI };
        }
        let magnitude = if speed <= 0.0 {
            self.rng.gen_range(0.0..PI)
        } else {
            let (lo, hi) = self.threshold_band(speed, sep);
            let w = (hi - lo).max(1e-6);
            match self.rng.gen_range(0..20) {
                0..=6 => self.rng.gen_range(0.0..=PI),
                7..=10 => self.rng.gen_range(lo - 0.1 * w..hi + 0.1 * w),
                11..=15 => {
                    let edge = if self.rng.gen_bool(0.5) { lo } else { hi };
                    edge + self.rng.gen_range(-0.002..0.002)
                }
                16 | 17 => 0.0,
                _ => PI,
            }
        };
        let magnitude = magnitude.clamp(0.0, PI);
        if self.rng.gen_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    }

    fn partner_angle(&mut self, a: f64, speed: f64, sep: f64) -> f64 {
        if self.collinear {
            return self.angle(speed, sep);
        }
        let band = 2.0 * self.eps.angle;
        let sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        match self.rng.gen_range(0..10) {
            0 | 1 => sign * a.abs(),
            2..=4 => sign * (a.abs() + self.rng.gen_range(-band..band)).clamp(0.0, PI),
            _ => self.angle(speed, sep),
        }
    }

    fn draw(&mut self) -> (f64, Motion, Motion) {
        let sep = self.rng.gen_range(0.05f64.ln()..10f64.ln()).exp();
        let sr = self.speed();
        let ar = self.angle(sr, sep);
        let joint = self.rng.gen_range(0..3);
        let (sh, ah) = if joint == 0 {
            let sh = self.speed();
            (sh, self.angle(sh, sep))
        } else {
            let sh = self.partner_speed(sr);
            (sh, self.partner_angle(ar, sh, sep))
        };
        let (r, h) = (Motion { speed: sr, angle: ar }, Motion { speed: sh, angle: ah });
        if self.rng.gen_bool(0.5) {
            (sep, r, h)
        } else {
            (sep, h, r)
        }
    }

    /// Windows for one kinematic configuration, one per pair of lateral
    /// next-frame headings (left, along the line, right) of the two agents.
    fn windows(&self, sep: f64, r: Motion, h: Motion) -> Vec<PairWindow> {
        let rc = Vec2::ZERO;
        let hc = Vec2::new(sep, 0.0);
        let vr = Vec2::from_polar(r.speed, r.angle);
        let vh = Vec2::from_polar(h.speed, PI + h.angle);
        let (rp, hp) = (rc - vr * (1.0 / self.rate), hc - vh * (1.0 / self.rate));
        let lateral: &[f64] = if self.collinear { &[0.0] } else { &[-1.0, 0.0, 1.0] };
        let step = 0.1;
        let mut out = Vec::with_capacity(lateral.len() * lateral.len());
        for &lr in lateral {
            for &lh in lateral {
                let rn = rc + Vec2::new(step, lr * step);
                let hn = hc + Vec2::new(-step, lh * step);
                out.push(PairWindow {
                    r_prev: PointState::stationary(rp, -1),
                    r_cur: PointState { position: rc, velocity: vr, frame: 0 },
                    r_next: Some(PointState::from_positions(rc, rn, self.rate, 1)),
                    h_prev: PointState::stationary(hp, -1),
                    h_cur: PointState { position: hc, velocity: vh, frame: 0 },
                    h_next: Some(PointState::from_positions(hc, hn, self.rate, 1)),
                });
            }
        }
        out
    }

    fn run(&mut self, variant: QtcVariant, samples: usize, found: &mut BTreeSet<QtcVector>) {
        for _ in 0..samples {
            let (sep, r, h) = self.draw();
            for w in self.windows(sep, r, h) {
                if let Ok(v) = compute_qtc(variant, &w, &self.eps) {
                    found.insert(v);
                }
            }
        }
    }
}

fn sign_domain(variant: QtcVariant) -> Vec<QtcVector> {
    let m = variant.len();
    let symbols = [QtcSymbol::Minus, QtcSymbol::Zero, QtcSymbol::Plus];
    (0..3usize.pow(m as u32))
        .map(|mut k| {
            let mut s = vec![QtcSymbol::Zero; m];
            for slot in s.iter_mut().rev() {
                *slot = symbols[k % 3];
                k /= 3;
            }
            QtcVector::new(variant, &s).expect("sign-domain vectors are well formed")
        })
        .collect()
}

/// Enumerates realizable vectors by seeded sampling of pair kinematics.
///
/// Sampling concentrates on the dead bands of each symbol so that vectors
/// needing several simultaneous near-ties are reached. A second pass of equal
/// size checks that the count has saturated.
pub fn build_dictionary(variant: QtcVariant, sampling: &SamplingConfig) -> Result<DictionaryBuild> {
    sampling.tolerances.validate()?;
    if sampling.samples == 0 || !(sampling.rate > 0.0) {
        return Err(CoreError::usage("sampling needs a positive sample count and rate"));
    }
    let mut sampler = Sampler {
        rng: ChaCha8Rng::seed_from_u64(sampling.seed),
        eps: sampling.tolerances,
        rate: sampling.rate,
        collinear: sampling.collinear_only,
    };
    let mut found = BTreeSet::new();
    sampler.run(variant, sampling.samples, &mut found);
    let count = found.len();
    sampler.run(variant, sampling.samples, &mut found);
    let doubled_count = found.len();

    let expected = target_realizable(variant);
    let deviation = (doubled_count != expected && !sampling.collinear_only).then(|| DeviationReport {
        variant,
        expected,
        found: doubled_count,
        unrealized: sign_domain(variant).into_iter().filter(|v| !found.contains(v)).collect(),
    });
    let dictionary = Dictionary::from_vectors(variant, found)?;
    Ok(DictionaryBuild {
        dictionary,
        report: RealizabilityReport {
            variant,
            count,
            doubled_count,
            stable: count == doubled_count,
            samples: sampling.samples,
            deviation,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: QtcVariant, collinear_only: bool) -> DictionaryBuild {
        let cfg = SamplingConfig {
            samples: 20_000,
            collinear_only,
            ..SamplingConfig::default()
        };
        build_dictionary(variant, &cfg).unwrap()
    }

    #[test]
    fn collinear_c1_has_at_most_ten_entries() {
        let b = small(QtcVariant::C1, true);
        assert!(b.dictionary.len() <= 10, "{}", b.dictionary.len());
        for v in b.dictionary.entries().iter().filter(|v| !v.is_impossible()) {
            assert_eq!(v.symbols()[2], QtcSymbol::Zero);
            assert_eq!(v.symbols()[3], QtcSymbol::Zero);
        }
    }

    #[test]
    fn lookup_round_trips_and_impossible_is_last() {
        let b = small(QtcVariant::C1, false);
        let d = &b.dictionary;
        let imp = QtcVector::impossible(QtcVariant::C1);
        assert_eq!(dict_lookup(d, LookupKey::Vector(imp)).unwrap(), LookupValue::Index(d.len() - 1));
        for i in 0..d.len() {
            let LookupValue::Vector(v) = dict_lookup(d, LookupKey::Index(i)).unwrap() else {
                panic!()
            };
            assert_eq!(dict_lookup(d, LookupKey::Vector(v)).unwrap(), LookupValue::Index(i));
        }
        assert!(matches!(
            dict_lookup(d, LookupKey::Index(d.len())),
            Err(CoreError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn absent_vector_is_a_lookup_error() {
        let d = Dictionary::from_vectors(QtcVariant::C1, [QtcVector::zero(QtcVariant::C1)]).unwrap();
        let other = QtcVector::from_codes(QtcVariant::C1, &[1, 1, 1, 1]).unwrap();
        assert!(matches!(d.index_of(&other), Err(CoreError::UnknownVector(v)) if v == other));
        assert_eq!(d.nearest_index(&other), 0);
    }

    #[test]
    fn entries_are_sorted() {
        let b = small(QtcVariant::C2, false);
        let e = b.dictionary.entries();
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn build_is_deterministic() {
        let a = small(QtcVariant::C2, false);
        let b = small(QtcVariant::C2, false);
        assert_eq!(a.dictionary.entries(), b.dictionary.entries());
    }

    #[test]
    fn save_load_round_trip() {
        let b = small(QtcVariant::C2, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.bin");
        b.dictionary.save(&path).unwrap();
        let back = Dictionary::load(&path).unwrap();
        assert_eq!(back, b.dictionary);
        assert_eq!(back.digest(), b.dictionary.digest());
    }

    #[test]
    fn sign_domain_sizes() {
        assert_eq!(sign_domain(QtcVariant::C1).len(), 81);
        assert_eq!(sign_domain(QtcVariant::C2).len(), 729);
    }
}

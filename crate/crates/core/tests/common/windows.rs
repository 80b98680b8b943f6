//! Seeded random pair windows that hit the dead bands of every symbol.

use rand::Rng;

use super::oracle::P;

pub struct RawWindow {
    pub rp: P,
    pub rc: P,
    pub rn: Option<P>,
    pub hp: P,
    pub hc: P,
    pub hn: Option<P>,
}

fn step<R: Rng>(rng: &mut R) -> P {
    match rng.gen_range(0..8) {
        0 => (0.0, 0.0),
        1 => (rng.gen_range(-2e-3..2e-3), rng.gen_range(-2e-3..2e-3)),
        _ => (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
    }
}

pub fn random_window<R: Rng>(rng: &mut R) -> RawWindow {
    let rc = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    let sep = rng.gen_range(0.0005f64.ln()..8f64.ln()).exp();
    let dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let hc = (rc.0 + sep * dir.cos(), rc.1 + sep * dir.sin());
    let dr = step(rng);
    let dh = match rng.gen_range(0..4) {
        // mirror image of r's motion through the midpoint
        0 => (-dr.0, -dr.1),
        1 => {
            let k = 1.0 + rng.gen_range(-1e-4..1e-4);
            (-dr.0 * k, -dr.1 * k)
        }
        _ => step(rng),
    };
    let rn = rng.gen_bool(0.8).then(|| {
        let s = step(rng);
        (rc.0 + s.0, rc.1 + s.1)
    });
    let hn = rng.gen_bool(0.8).then(|| {
        let s = step(rng);
        (hc.0 + s.0, hc.1 + s.1)
    });
    RawWindow {
        rp: (rc.0 - dr.0, rc.1 - dr.1),
        rc,
        rn,
        hp: (hc.0 - dh.0, hc.1 - dh.1),
        hc,
        hn,
    }
}

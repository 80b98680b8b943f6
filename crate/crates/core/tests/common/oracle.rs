//! Straight-line scalar transcription of the QTC symbol rules, sharing no
//! code with the library.

pub type P = (f64, f64);

pub struct Tol {
    pub dist: f64,
    pub cross: f64,
    pub speed: f64,
    pub angle: f64,
}

pub const TOL: Tol = Tol { dist: 1e-3, cross: 1e-3, speed: 1e-3, angle: 1e-3 };

fn sym(x: f64, t: f64) -> i32 {
    if x > t {
        1
    } else if x < -t {
        -1
    } else {
        0
    }
}

fn d(a: P, b: P) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Returns `None` when the agents coincide, else six codes (C1 is the prefix).
#[allow(clippy::too_many_arguments)]
pub fn qtc(rp: P, rc: P, rn: Option<P>, hp: P, hc: P, hn: Option<P>, rate: f64, t: &Tol) -> Option<[i32; 6]> {
    if !(d(rc, hc) >= t.dist) {
        return None;
    }
    // q1: distance from r's previous position to h, minus from the current one
    let q1 = sym(-(d(rp, hc) - d(rc, hc)), t.dist);
    let q2 = sym(-(d(hp, rc) - d(hc, rc)), t.dist);

    // q3: heading of r crossed with the direction from r to h
    let (ax, ay) = match rn {
        Some(n) => (n.0 - rc.0, n.1 - rc.1),
        None => (rc.0 - rp.0, rc.1 - rp.1),
    };
    let q3 = {
        let la = ax.hypot(ay);
        if la < t.dist {
            0
        } else {
            let (bx, by) = (hc.0 - rc.0, hc.1 - rc.1);
            let lb = bx.hypot(by);
            sym((ax * (1.0 / la)) * (by * (1.0 / lb)) - (ay * (1.0 / la)) * (bx * (1.0 / lb)), t.cross)
        }
    };
    let (cx, cy) = match hn {
        Some(n) => (n.0 - hc.0, n.1 - hc.1),
        None => (hc.0 - hp.0, hc.1 - hp.1),
    };
    let q4 = {
        let lc = cx.hypot(cy);
        if lc < t.dist {
            0
        } else {
            let (bx, by) = (rc.0 - hc.0, rc.1 - hc.1);
            let lb = bx.hypot(by);
            sym((cx * (1.0 / lc)) * (by * (1.0 / lb)) - (cy * (1.0 / lc)) * (bx * (1.0 / lb)), t.cross)
        }
    };

    let (vrx, vry) = ((rc.0 - rp.0) * rate, (rc.1 - rp.1) * rate);
    let (vhx, vhy) = ((hc.0 - hp.0) * rate, (hc.1 - hp.1) * rate);
    let sr = vrx.hypot(vry);
    let sh = vhx.hypot(vhy);
    let q5 = sym(sr - sh, t.speed);

    let th_r = if sr <= t.speed {
        0.0
    } else {
        let (lx, ly) = (hc.0 - rc.0, hc.1 - rc.1);
        (vrx * ly - vry * lx).abs().atan2(vrx * lx + vry * ly)
    };
    let th_h = if sh <= t.speed {
        0.0
    } else {
        let (lx, ly) = (rc.0 - hc.0, rc.1 - hc.1);
        (vhx * ly - vhy * lx).abs().atan2(vhx * lx + vhy * ly)
    };
    let q6 = sym(th_r - th_h, t.angle);
    Some([q1, q2, q3, q4, q5, q6])
}

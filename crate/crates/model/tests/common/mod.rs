#![allow(dead_code)]

use masi_core::{ClusterSample, Framework, SampleData, Vec2};
use masi_model::ModelConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_config(framework: Framework, dict_size: usize) -> ModelConfig {
    let mut c = ModelConfig::defaults(framework, 3, dict_size, 3);
    c.t_history = 4;
    c.hidden = 8;
    c.embed_dim = 8;
    c.batch = 2;
    c.seed = 7;
    c
}

/// Random samples with `slots` slots, the last one padding.
pub fn random_samples(
    framework: Framework,
    dict_size: usize,
    slots: usize,
    t_history: usize,
    t_future: usize,
    count: usize,
    seed: u64,
) -> Vec<ClusterSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = t_history + t_future;
    (0..count)
        .map(|i| {
            let real = slots - 1;
            let present: Vec<bool> = (0..slots * steps)
                .map(|j| j / steps < real && !(j / steps == 0 && j % steps == steps - 1))
                .collect();
            let data = if framework.is_symbolic() {
                SampleData::Symbolic(
                    present
                        .iter()
                        .map(|&p| if p { rng.gen_range(0..dict_size - 1) } else { dict_size - 1 })
                        .collect(),
                )
            } else {
                let mut walk = |scale: f64| {
                    let mut p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let v = Vec2::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)) * scale;
                    (0..steps)
                        .map(|_| {
                            p = p + v;
                            p
                        })
                        .collect::<Vec<_>>()
                };
                let center = walk(1.0);
                let mut coords = Vec::with_capacity(slots * steps);
                for k in 0..slots {
                    let w = walk(2.0);
                    coords.extend((0..steps).map(|t| if present[k * steps + t] { w[t] } else { Vec2::ZERO }));
                }
                SampleData::Metric {
                    origin: Vec2::new(3.0, -1.0),
                    center,
                    coords,
                }
            };
            ClusterSample {
                center: format!("c{i}"),
                window_start: i as i64,
                members: (0..slots - 1).map(|k| format!("m{k}")).collect(),
                slots,
                t_history,
                t_future,
                mask: present.clone(),
                present,
                data,
            }
        })
        .collect()
}

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reluopt::geometry::Hyperrectangle;
use reluopt::model::{random_network, Network};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random net: 2–3 inputs, one or two hidden layers, 1–2 outputs,
/// at most `max_relus` ReLUs.
pub fn small_net(rng: &mut ChaCha8Rng, max_relus: usize) -> Network {
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(1..=2);
    let mut dims = vec![n];
    let mut left = max_relus;
    let layers = if max_relus >= 4 {
        rng.gen_range(1..=2)
    } else {
        1
    };
    for k in 0..layers {
        let hi = if k + 1 == layers { left } else { left / 2 };
        let w = rng.gen_range(2.min(hi)..=hi.max(1));
        dims.push(w);
        left -= w;
    }
    dims.push(m);
    random_network(rng, &dims).unwrap()
}

pub fn random_box(rng: &mut ChaCha8Rng, n: usize) -> Hyperrectangle {
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.5)).collect();
    Hyperrectangle::new(
        c.iter().zip(&r).map(|(c, r)| c - r).collect(),
        c.iter().zip(&r).map(|(c, r)| c + r).collect(),
    )
    .unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn sample(rng: &mut ChaCha8Rng, b: &Hyperrectangle) -> Vec<f64> {
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..=u) })
        .collect()
}

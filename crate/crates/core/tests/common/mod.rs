//! Independent numeric oracles shared by the integration tests.
#![allow(dead_code)]

use marsim::energy::{self, ClientSpec, Configuration};
use marsim::profile::DeviceProfile;

/// Bandwidth at which the client's latency equals its bound, by bisection.
pub fn min_bandwidth(p: &DeviceProfile, spec: &ClientSpec, cfg: &Configuration) -> Option<f64> {
    let lat = |b: f64| {
        energy::latency_per_frame(p, &Configuration { b, ..*cfg })
            .unwrap()
            .total
    };
    let (mut lo, mut hi) = (1e-9, 1e9);
    if lat(hi) > spec.l_max {
        return None;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if lat(mid) > spec.l_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Euclidean projection onto `{x : sum x = total, x >= lower}`.
pub fn project_shifted_simplex(y: &[f64], lower: &[f64], total: f64) -> Vec<f64> {
    let z: Vec<f64> = y.iter().zip(lower).map(|(a, l)| a - l).collect();
    let radius = total - lower.iter().sum::<f64>();
    let mut sorted = z.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - radius) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    z.iter()
        .zip(lower)
        .map(|(v, l)| (v - theta).max(0.0) + l)
        .collect()
}

/// Independent projected-gradient solver for the bandwidth subproblem.
pub fn pg_oracle(
    p: &DeviceProfile,
    specs: &[ClientSpec],
    cfgs: &[Configuration],
    lower: &[f64],
    b_max: f64,
) -> Vec<f64> {
    let q = |b: &[f64]| -> f64 {
        (0..b.len())
            .map(|k| {
                energy::objective_term(p, &specs[k], &Configuration { b: b[k], ..cfgs[k] }).unwrap()
            })
            .sum()
    };
    let grad = |b: &[f64]| -> Vec<f64> {
        (0..b.len())
            .map(|k| {
                let h = 1e-6 * b[k];
                let at = |x: f64| {
                    energy::objective_term(p, &specs[k], &Configuration { b: x, ..cfgs[k] })
                        .unwrap()
                };
                (at(b[k] + h) - at(b[k] - h)) / (2.0 * h)
            })
            .collect()
    };
    let even = vec![b_max / specs.len() as f64; specs.len()];
    let mut b = project_shifted_simplex(&even, lower, b_max);
    let mut qb = q(&b);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = grad(&b);
        let mut accepted = false;
        while step > 1e-12 {
            let y: Vec<f64> = b.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            let cand = project_shifted_simplex(&y, lower, b_max);
            let qc = q(&cand);
            let moved: f64 = cand.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum();
            if qc <= qb - 1e-4 * moved / step {
                let done = moved.sqrt() < 1e-12 * b_max;
                b = cand;
                qb = qc;
                accepted = true;
                step *= 2.0;
                if done {
                    return b;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    b
}

//! Small helpers for scalar fields stored as flat `Vec<f64>` over the nodes
//! of a chart.

use rand::Rng;

use crate::manifold::{Backend, GridChart};

pub fn sup_norm(data: &[f64]) -> f64 {
    data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn min_value(data: &[f64]) -> f64 {
    data.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_value(data: &[f64]) -> f64 {
    data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn argmin(data: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in data.iter().enumerate() {
        if *v < data[best] {
            best = i;
        }
    }
    best
}

/// A smooth random field compatible with the chart's boundary structure:
/// trigonometric modes that are periodic on periodic axes and have vanishing
/// normal derivative on reflecting axes, so every draw satisfies the
/// discrete Neumann condition.
pub fn random_smooth_field<R: Rng>(chart: &GridChart, amplitude: f64, rng: &mut R) -> Vec<f64> {
    let nodes = chart.num_nodes();
    let mut u = vec![0.0; nodes];
    let n_modes = 3;
    match chart.backend {
        Backend::Warped { r_min, r_max, .. } => {
            let len = r_max - r_min;
            let coeffs: Vec<f64> = (0..n_modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..nodes {
                let r = chart.coords(i)[0];
                let s = (r - r_min) / len;
                let mut v = 0.0;
                for (j, c) in coeffs.iter().enumerate() {
                    v += c * ((j + 1) as f64 * std::f64::consts::PI * s).cos();
                }
                u[i] = amplitude * v;
            }
        }
        _ => {
            let axes = chart.axes();
            // A few separable cosine modes with random integer frequencies.
            let modes: Vec<(f64, Vec<usize>)> = (0..n_modes)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        (0..axes).map(|_| rng.gen_range(1..=2usize)).collect(),
                    )
                })
                .collect();
            for i in 0..nodes {
                let x = chart.coords(i);
                let mut v = 0.0;
                for (c, freq) in &modes {
                    let mut prod = *c;
                    for a in 0..axes {
                        let ext = chart.extent(a);
                        let arg = if chart.is_periodic_axis(a) {
                            2.0 * std::f64::consts::PI * freq[a] as f64 * x[a] / ext
                        } else {
                            std::f64::consts::PI * freq[a] as f64 * x[a] / ext
                        };
                        prod *= arg.cos();
                    }
                    v += prod;
                }
                u[i] = amplitude * v;
            }
        }
    }
    u
}

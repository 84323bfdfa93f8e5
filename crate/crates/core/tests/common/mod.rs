//! Enumeration oracles shared by the RBM tests and the acceptance suite.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use uwa_dbn::rbm::{
    binary_config, energy, exact_gradient, free_energy, log_partition_exact, nll_exact, prob_h_given_v, prob_v_given_h,
    RbmParams,
};
use uwa_dbn::rng::SimRng;

pub fn random_model(nv: usize, nh: usize, scale: f64, rng: &mut SimRng) -> RbmParams {
    let n = Normal::new(0.0, scale).unwrap();
    RbmParams::new(
        Array2::from_shape_simple_fn((nh, nv), || n.sample(rng)),
        Array1::from_shape_simple_fn(nv, || n.sample(rng)),
        Array1::from_shape_simple_fn(nh, || n.sample(rng)),
    )
    .unwrap()
}

/// Random sizes with `nv + nh <= max_total`.
pub fn random_sizes(max_total: usize, rng: &mut SimRng) -> (usize, usize) {
    let nv = rng.random_range(1..max_total);
    let nh = rng.random_range(1..=max_total - nv);
    (nv, nh)
}

/// `|Σ P(v, h) − 1|` over every joint configuration.
pub fn normalization_error(p: &RbmParams) -> f64 {
    let log_q = log_partition_exact(p).unwrap();
    let (nv, nh) = (p.n_visible(), p.n_hidden());
    let mut total = 0.0;
    for i in 0..1usize << nv {
        for j in 0..1usize << nh {
            let e = energy(p, &binary_config(i, nv), &binary_config(j, nh)).unwrap();
            total += (-e - log_q).exp();
        }
    }
    (total - 1.0).abs()
}

/// Worst gap between `exp(−F(v))/Q` and the enumerated `Σ_h P(v, h)`.
pub fn marginal_error(p: &RbmParams) -> f64 {
    let log_q = log_partition_exact(p).unwrap();
    let (nv, nh) = (p.n_visible(), p.n_hidden());
    let mut worst: f64 = 0.0;
    for i in 0..1usize << nv {
        let v = binary_config(i, nv);
        let from_f = (-free_energy(p, &v).unwrap() - log_q).exp();
        let summed: f64 = (0..1usize << nh)
            .map(|j| (-energy(p, &v, &binary_config(j, nh)).unwrap() - log_q).exp())
            .sum();
        worst = worst.max((from_f - summed).abs());
    }
    worst
}

fn product_prob(probs: &[f64], x: &[f64]) -> f64 {
    probs
        .iter()
        .zip(x)
        .map(|(&q, &b)| if b == 1.0 { q } else { 1.0 - q })
        .product()
}

/// Worst gap between the factorized conditionals and conditionals computed
/// from the joint, in both directions.
pub fn conditional_error(p: &RbmParams) -> f64 {
    let (nv, nh) = (p.n_visible(), p.n_hidden());
    let joint = |v: &[f64], h: &[f64]| (-energy(p, v, h).unwrap()).exp();
    let mut worst: f64 = 0.0;
    for i in 0..1usize << nv {
        let v = binary_config(i, nv);
        let ph = prob_h_given_v(p, &v).unwrap();
        let z: f64 = (0..1usize << nh).map(|j| joint(&v, &binary_config(j, nh))).sum();
        for j in 0..1usize << nh {
            let h = binary_config(j, nh);
            worst = worst.max((joint(&v, &h) / z - product_prob(&ph, &h)).abs());
        }
    }
    for j in 0..1usize << nh {
        let h = binary_config(j, nh);
        let pv = prob_v_given_h(p, &h).unwrap();
        let z: f64 = (0..1usize << nv).map(|i| joint(&binary_config(i, nv), &h)).sum();
        for i in 0..1usize << nv {
            let v = binary_config(i, nv);
            worst = worst.max((joint(&v, &h) / z - product_prob(&pv, &v)).abs());
        }
    }
    worst
}

fn with_param(p: &RbmParams, k: usize, delta: f64) -> RbmParams {
    let mut q = p.clone();
    let nw = q.w.len();
    let nb = q.b.len();
    if k < nw {
        let cols = q.w.ncols();
        q.w[[k / cols, k % cols]] += delta;
    } else if k < nw + nb {
        q.b[k - nw] += delta;
    } else {
        q.c[k - nw - nb] += delta;
    }
    q
}

/// Central finite differences of the exact NLL, flattened like
/// `RbmGradient::flatten`.
pub fn finite_difference_gradient(p: &RbmParams, data: &[Vec<f64>], eps: f64) -> Vec<f64> {
    let n = p.w.len() + p.b.len() + p.c.len();
    (0..n)
        .map(|k| {
            let up = nll_exact(&with_param(p, k, eps), data).unwrap();
            let down = nll_exact(&with_param(p, k, -eps), data).unwrap();
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `‖g − fd‖∞ / max(‖g‖∞, 1e-12)` between the exact gradient and finite
/// differences.
pub fn gradient_relative_error(p: &RbmParams, data: &[Vec<f64>]) -> f64 {
    let g = exact_gradient(p, data).unwrap().flatten();
    let fd = finite_difference_gradient(p, data, 1e-5);
    let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = g.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1e-12);
    diff / scale
}

pub fn random_data(nv: usize, m: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..nv).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect())
        .collect()
}

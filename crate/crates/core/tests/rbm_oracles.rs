mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use uwa_dbn::rbm::{
    binary_config, cd_gradient, exact_gradient, free_energy, gibbs_step, log_partition_exact, nll_exact,
    prob_h_given_v, RbmParams,
};
use uwa_dbn::rng::seeded;

#[test]
fn enumeration_identities_on_random_models() {
    let mut rng = seeded(11);
    for _ in 0..25 {
        let (nv, nh) = random_sizes(7, &mut rng);
        let p = random_model(nv, nh, 1.0, &mut rng);
        assert!(normalization_error(&p) < 1e-12);
        assert!(marginal_error(&p) < 1e-9);
        assert!(conditional_error(&p) < 1e-9);
    }
}

#[test]
fn exact_gradient_matches_finite_differences() {
    let mut rng = seeded(12);
    for _ in 0..20 {
        let (nv, nh) = random_sizes(7, &mut rng);
        let p = random_model(nv, nh, 0.5, &mut rng);
        let data = random_data(nv, 5, &mut rng);
        let err = gradient_relative_error(&p, &data);
        assert!(err < 1e-6, "{nv}x{nh}: relative error {err}");
    }
}

#[test]
fn exact_descent_lowers_nll() {
    let mut rng = seeded(13);
    let mut p = random_model(4, 3, 0.3, &mut rng);
    let data = vec![
        vec![1.0, 1.0, 0.0, 0.0],
        vec![1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 1.0],
        vec![0.0, 1.0, 1.0, 1.0],
    ];
    let mut last = nll_exact(&p, &data).unwrap();
    for _ in 0..50 {
        let g = exact_gradient(&p, &data).unwrap();
        p.w = &p.w - &(g.w * 0.1);
        p.b = &p.b - &(g.b * 0.1);
        p.c = &p.c - &(g.c * 0.1);
        let now = nll_exact(&p, &data).unwrap();
        assert!(now <= last + 1e-12, "{now} > {last}");
        last = now;
    }
}

#[test]
fn long_gibbs_chain_matches_exact_marginal() {
    let mut rng = seeded(14);
    let p = random_model(3, 2, 1.0, &mut rng);
    let log_q = log_partition_exact(&p).unwrap();
    let exact: Vec<f64> = (0..8)
        .map(|i| (-free_energy(&p, &binary_config(i, 3)).unwrap() - log_q).exp())
        .collect();
    let mut counts = [0usize; 8];
    let mut v = vec![0.0; 3];
    let steps = 1_000_000;
    for _ in 0..steps {
        v = gibbs_step(&p, &v, &mut rng).unwrap().v_next;
        let idx = v.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>();
        counts[idx] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&exact)
            .map(|(&c, &e)| (c as f64 / steps as f64 - e).abs())
            .sum::<f64>();
    assert!(tv < 0.02, "total variation {tv}");
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

#[test]
fn long_cd_chain_points_along_exact_gradient() {
    let mut rng = seeded(15);
    let mut total = 0.0;
    let models = 10;
    for _ in 0..models {
        let p = random_model(3, 2, 1.0, &mut rng);
        let data = random_data(3, 8, &mut rng);
        // many copies of the batch average out the chain noise
        let rows: Vec<f64> = data.iter().cycle().take(8 * 250).flatten().copied().collect();
        let batch = Array2::from_shape_vec((8 * 250, 3), rows).unwrap();
        let (cd, _) = cd_gradient(&p, batch.view(), 500, &mut rng).unwrap();
        // cd is an ascent direction, the exact gradient a descent one
        let ascent: Vec<f64> = exact_gradient(&p, &data)
            .unwrap()
            .flatten()
            .iter()
            .map(|g| -g)
            .collect();
        total += angle_deg(&cd.flatten(), &ascent);
    }
    let mean = total / models as f64;
    assert!(mean < 15.0, "mean angle {mean} degrees");
}

fn small_model() -> impl Strategy<Value = RbmParams> {
    (1usize..5, 1usize..4).prop_flat_map(|(nv, nh)| {
        (
            prop::collection::vec(-3.0f64..3.0, nv * nh),
            prop::collection::vec(-3.0f64..3.0, nv),
            prop::collection::vec(-3.0f64..3.0, nh),
        )
            .prop_map(move |(w, b, c)| {
                RbmParams::new(Array2::from_shape_vec((nh, nv), w).unwrap(), b.into(), c.into()).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditionals_are_probabilities(p in small_model(), idx in 0usize..16) {
        let v = binary_config(idx % (1 << p.n_visible()), p.n_visible());
        for q in prob_h_given_v(&p, &v).unwrap() {
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }

    #[test]
    fn free_energy_identity_holds(p in small_model()) {
        prop_assert!(marginal_error(&p) < 1e-9);
        prop_assert!(conditional_error(&p) < 1e-9);
    }

    #[test]
    fn nll_is_nonnegative(p in small_model()) {
        let data: Vec<Vec<f64>> = (0..1usize << p.n_visible()).map(|i| binary_config(i, p.n_visible())).collect();
        prop_assert!(nll_exact(&p, &data).unwrap() >= -1e-12);
    }
}

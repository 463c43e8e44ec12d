use proptest::prelude::*;
use thickline::band::apply_mask;
use thickline::em::equal_proportions;
use thickline::synth::{corrupt, preset, random_scene};
use thickline::{
    build_band_mask, init_params, normalize_image, run_em, run_em_bs, CorruptionSpec, EmConfig, Mixture, StopReason,
};

fn start(name: &str, offset: f64) -> (thickline::Image, Mixture, Mixture) {
    let (img, truth) = preset(name).unwrap().render().unwrap();
    let h = normalize_image(&img).unwrap();
    let angles: Vec<f64> = truth.components.iter().map(|c| c.line.theta + offset).collect();
    let init = init_params(&h, &angles, &equal_proportions(truth.len()), None).unwrap();
    (img, truth, init)
}

#[test]
fn wide_band_reproduces_algorithm_one() {
    let (img, _, init) = start("r3", 0.05);
    let h = normalize_image(&img).unwrap();
    let nu = 1e6;
    assert!(build_band_mask(&init, img.domain(), nu).is_full());

    let short = EmConfig { max_iter: 6, ..EmConfig::default() };
    let a = run_em(&h, init.clone(), &short).unwrap();
    let b = run_em_bs(&img, init.clone(), &short, nu).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.loglik_history, b.loglik_history);

    let cfg = EmConfig::default();
    let bs = run_em_bs(&img, init.clone(), &cfg, nu).unwrap();
    assert!(bs.converged());
    let em = run_em(&h, init, &EmConfig { max_iter: bs.iterations, ..cfg }).unwrap();
    assert_eq!(em.state, bs.state);
}

#[test]
fn band_fit_on_noise_is_finite_and_stops() {
    let (clean, truth, init) = start("r3", 0.05);
    let noisy = corrupt(&clean, &CorruptionSpec::new(100.0, 2.0, 7)).unwrap();
    let out = run_em_bs(&noisy, init, &EmConfig::default(), 2.0).unwrap();
    assert!(out.loglik_history.iter().all(|v| v.is_finite()));
    assert_ne!(out.stop, StopReason::NotConverged);
    assert_eq!(out.state.len(), truth.len());
    let sum: f64 = out.state.components.iter().map(|c| c.pi).sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masks_grow_with_nu(seed in 0u64..10_000, nu in 0.5..4.0f64, extra in 0.0..3.0f64) {
        let (img, truth) = random_scene(seed, 40, 3).render().unwrap();
        let small = build_band_mask(&truth, img.domain(), nu);
        let large = build_band_mask(&truth, img.domain(), nu + extra);
        prop_assert!(small.as_slice().iter().zip(large.as_slice()).all(|(&s, &l)| !s || l));
        prop_assert_eq!(small.narrow, nu < 3f64.sqrt());
    }

    #[test]
    fn masked_image_is_normalized_inside_the_band(seed in 0u64..10_000, nu in 1.8..4.0f64) {
        let (img, truth) = random_scene(seed, 40, 3).render().unwrap();
        let mask = build_band_mask(&truth, img.domain(), nu);
        let h = apply_mask(&img, &mask).unwrap();
        let total: f64 = h.values().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (i, &v) in h.values().iter().enumerate() {
            if !mask.as_slice()[i] {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}

use nalgebra::Matrix4;
use proptest::prelude::*;
use thickline::{solve_real_roots, QuarticCoeffs};

/// Eigenvalues of the monic companion matrix, as (re, im).
fn companion_roots(c: [f64; 5]) -> Vec<(f64, f64)> {
    let [a, b, cc, d, e] = c;
    #[rustfmt::skip]
    let m = Matrix4::new(
        -b / a, -cc / a, -d / a, -e / a,
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
    );
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

fn coeff() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn real_roots_match_companion_eigenvalues(
        a in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
        b in coeff(), c in coeff(), d in coeff(), e in coeff(),
    ) {
        let eig = companion_roots([a, b, c, d, e]);
        // Skip near-double roots and near-real complex pairs: both are
        // ill-conditioned and the two routes may legitimately disagree.
        prop_assume!(eig.iter().all(|&(_, im)| im.abs() < 1e-12 || im.abs() > 1e-3));
        let mut real: Vec<f64> = eig.iter().filter(|z| z.1.abs() < 1e-12).map(|z| z.0).collect();
        real.sort_by(f64::total_cmp);
        prop_assume!(real.windows(2).all(|w| w[1] - w[0] > 1e-3));

        let roots = solve_real_roots(&QuarticCoeffs::new(a, b, c, d, e)).unwrap();
        prop_assert_eq!(roots.len(), real.len(), "roots {:?} vs eigenvalues {:?}", roots, eig);
        for (r, t) in roots.iter().zip(&real) {
            prop_assert!((r - t).abs() <= 1e-7 * t.abs().max(1.0), "{} vs {}", r, t);
        }
    }

    #[test]
    fn constructed_roots_are_recovered(
        mut r in proptest::collection::vec(-50.0..50.0f64, 4),
        lead in prop_oneof![-3.0..-0.5f64, 0.5..3.0f64],
    ) {
        r.sort_by(f64::total_cmp);
        prop_assume!(r.windows(2).all(|w| w[1] - w[0] > 0.05));
        let e1 = r.iter().sum::<f64>();
        let e2 = r[0] * (r[1] + r[2] + r[3]) + r[1] * (r[2] + r[3]) + r[2] * r[3];
        let e3 = r[0] * r[1] * (r[2] + r[3]) + r[2] * r[3] * (r[0] + r[1]);
        let e4 = r.iter().product::<f64>();
        let q = QuarticCoeffs::new(lead, -lead * e1, lead * e2, -lead * e3, lead * e4);
        let got = solve_real_roots(&q).unwrap();
        prop_assert_eq!(got.len(), 4, "{:?} from {:?}", got, r);
        for (g, t) in got.iter().zip(&r) {
            prop_assert!((g - t).abs() <= 1e-6 * t.abs().max(1.0), "{} vs {}", g, t);
        }
    }

    #[test]
    fn roots_are_sorted_and_distinct(
        a in coeff(), b in coeff(), c in coeff(), d in coeff(), e in coeff(),
    ) {
        prop_assume!([a, b, c, d, e].iter().any(|v| *v != 0.0));
        let roots = solve_real_roots(&QuarticCoeffs::new(a, b, c, d, e)).unwrap();
        prop_assert!(roots.len() <= 4);
        prop_assert!(roots.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(roots.iter().all(|r| r.is_finite()));
    }
}

#[test]
fn cubic_when_leading_coefficient_vanishes() {
    // 2u³ − 4u² − 22u + 24 = 2(u − 1)(u + 3)(u − 4)
    let roots = solve_real_roots(&QuarticCoeffs::new(0.0, 2.0, -4.0, -22.0, 24.0)).unwrap();
    assert_eq!(roots.len(), 3);
    for (g, t) in roots.iter().zip([-3.0f64, 1.0, 4.0]) {
        assert!((g - t).abs() < 1e-12);
    }
}

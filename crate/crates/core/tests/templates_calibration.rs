mod common;

use posthoc_core::templates::{calibrate_pari_with_k, hommel_value_sorted, pari_pivotal, pari_template};
use posthoc_core::{
    ari_template, calibrate_notip, calibrate_pari, empirical_jer, hommel_value, learn_notip_templates,
    simes_template, PValueVector,
};
use rand::Rng;

#[test]
fn calibrated_templates_control_empirical_jer() {
    let mut rng = common::rng(21);
    for case in 0..50 {
        let m = rng.random_range(30..120);
        let b = rng.random_range(40..200);
        let alpha = [0.05, 0.1, 0.2][case % 3];
        let rho = rng.random_range(0.0..0.6);
        let null = common::random_null(&mut rng, b, m, rho);
        for delta in [0, 1, 27] {
            let cal = calibrate_pari(&null, delta, alpha).unwrap();
            let jer = empirical_jer(&cal.template, &null).unwrap();
            assert!(jer <= alpha, "case {case} delta {delta}: jer {jer} > {alpha}");
        }
        let train = common::random_null(&mut rng, b, m, rho);
        let k = rng.random_range(1..=m / 3);
        let fam = learn_notip_templates(&train, k).unwrap();
        let cal = calibrate_notip(&fam, &null, alpha).unwrap();
        assert!(empirical_jer(&cal.template, &null).unwrap() <= alpha, "case {case} notip");
    }
}

/// λ* is the floor(αB)-th smallest pivotal value: any larger λ is violated by
/// at least floor(αB) rows, while λ* itself stays within α.
#[test]
fn pari_lambda_is_order_statistic() {
    let mut rng = common::rng(22);
    for _ in 0..20 {
        let null = common::random_null(&mut rng, 100, 60, 0.3);
        let cal = calibrate_pari(&null, 1, 0.1).unwrap();
        let mut piv = cal.pivotal_values.clone();
        piv.sort_by(f64::total_cmp);
        assert_eq!(cal.lambda_star, piv[cal.k_alpha - 1]);
        assert!(empirical_jer(&cal.template, &null).unwrap() <= 0.1);
        if let Some(next) = piv.iter().copied().find(|&v| v > cal.lambda_star) {
            let t = pari_template(60, 1, next, 0.1, 60).unwrap();
            assert!(empirical_jer(&t, &null).unwrap() >= cal.k_alpha as f64 / 100.0);
        }
    }
}

/// A row violates the pARI template at λ exactly when its pivotal value is
/// below λ; checked at λ = pivotal ± 1e-12.
#[test]
fn pari_pivotal_duality() {
    let mut rng = common::rng(23);
    for _ in 0..200 {
        let m = rng.random_range(5..80);
        let delta = rng.random_range(0..m.min(30));
        let mut row = common::random_p(&mut rng, m);
        row.sort_by(f64::total_cmp);
        let piv = pari_pivotal(&row, delta, m).unwrap();
        let violated = |lambda: f64| {
            let t = pari_template(m, delta, lambda, 0.1, m).unwrap();
            row.iter().zip(t.thresholds()).any(|(p, t)| p < t)
        };
        assert!(!violated(piv - 1e-12), "violated below the pivotal value");
        assert!(violated(piv + 1e-12), "not violated above the pivotal value");
    }
}

#[test]
fn notip_calibration_is_monotone_in_alpha() {
    let mut rng = common::rng(24);
    for _ in 0..20 {
        let train = common::random_null(&mut rng, 200, 100, 0.4);
        let calib = common::random_null(&mut rng, 200, 100, 0.4);
        let fam = learn_notip_templates(&train, 10).unwrap();
        let mut prev: Option<(f64, Vec<f64>)> = None;
        for alpha in [0.01, 0.05, 0.1, 0.2, 0.3] {
            let cal = calibrate_notip(&fam, &calib, alpha).unwrap();
            let t = cal.template.thresholds().to_vec();
            if let Some((lambda, p)) = &prev {
                assert!(cal.lambda_star >= *lambda, "alpha {alpha}");
                assert!(p.iter().zip(&t).all(|(a, b)| a <= b), "alpha {alpha}");
            }
            prev = Some((cal.lambda_star, t));
        }
    }
}

#[test]
fn pari_with_truncated_k_controls_jer() {
    let mut rng = common::rng(25);
    let null = common::random_null(&mut rng, 150, 80, 0.2);
    let cal = calibrate_pari_with_k(&null, 2, 0.1, 20).unwrap();
    assert_eq!(cal.template.k(), 20);
    assert!(empirical_jer(&cal.template, &null).unwrap() <= 0.1);
}

#[test]
fn hommel_matches_double_loop_and_closed_testing() {
    let mut rng = common::rng(26);
    for _ in 0..300 {
        let m = rng.random_range(1..=12);
        let alpha = rng.random_range(0.01..0.5);
        let p = common::random_p(&mut rng, m);
        let h = hommel_value(&PValueVector::from_values(p.clone()).unwrap(), alpha).unwrap();
        assert_eq!(h, common::hommel_double_loop(&p, alpha), "{p:?}");
        assert_eq!(h, common::hommel_closed_testing(&p, alpha), "{p:?}");
    }
    for _ in 0..200 {
        let m = rng.random_range(1..=300);
        let mut p = common::random_p(&mut rng, m);
        p.sort_by(f64::total_cmp);
        assert_eq!(hommel_value_sorted(&p, 0.05).unwrap(), common::hommel_double_loop(&p, 0.05));
    }
}

#[test]
fn ari_thresholds_dominate_simes() {
    let mut rng = common::rng(27);
    for _ in 0..50 {
        let m = rng.random_range(2..200);
        let p = PValueVector::from_values(common::random_p(&mut rng, m)).unwrap();
        let ari = ari_template(&p, 0.05, m).unwrap();
        let simes = simes_template(m, 0.05, m).unwrap();
        assert!(ari.thresholds().iter().zip(simes.thresholds()).all(|(a, s)| a >= s));
    }
}

#[test]
fn template_json_round_trip() {
    let mut rng = common::rng(28);
    let null = common::random_null(&mut rng, 50, 40, 0.1);
    let t = calibrate_pari(&null, 3, 0.1).unwrap().template;
    let json = serde_json::to_string(&t).unwrap();
    let back: posthoc_core::Template = serde_json::from_str(&json).unwrap();
    assert_eq!(back, t);
}

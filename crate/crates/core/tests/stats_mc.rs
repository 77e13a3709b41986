use clt_lab::lindeberg::ArrayFamily;
use clt_lab::par;
use clt_lab::sampling::{make_rng, DistributionSpec};
use clt_lab::stats::*;
use proptest::prelude::*;

#[test]
fn genuine_normal_draws_sit_inside_the_band() {
    let mut rng = make_rng(1234, 0);
    let n = 1_000_000;
    let values: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let d = ks_distance_to_normal(&EmpiricalSample::new(values, "normal", 1234).unwrap());
    assert!(d < KS_BAND_999 / (n as f64).sqrt(), "{d}");
}

#[test]
fn normal_sums_stay_normal() {
    let r = clt_convergence_scan(&DistributionSpec::normal(1.0).unwrap(), &[1, 7], 200_000, 3).unwrap();
    for row in &r.rows {
        assert!(row.ks < KS_BAND_999 / (200_000f64).sqrt(), "{row:?}");
        assert_eq!(row.exact_ks, None);
    }
}

#[test]
fn rademacher_scan_tracks_exact_oracle() {
    let n_samples = 1_000_000;
    let r = clt_convergence_scan(&DistributionSpec::rademacher(), &[4, 16, 64], n_samples, 7).unwrap();
    let tol = 2.0 * KS_BAND_99 / (n_samples as f64).sqrt();
    for row in &r.rows {
        let exact = row.exact_ks.unwrap();
        assert!((row.ks - exact).abs() <= tol, "{row:?}");
    }
}

#[test]
fn two_point_trend_majority_over_three_seeds() {
    let d = DistributionSpec::two_point(0.1).unwrap();
    let votes = [1u64, 2, 3]
        .iter()
        .filter(|&&seed| strictly_decreasing(&clt_convergence_scan(&d, &[10, 100, 1000], 100_000, seed).unwrap()))
        .count();
    assert!(votes >= 2, "{votes}");
}

#[test]
fn scans_are_worker_independent() {
    let fam: ArrayFamily = "spike:uniform".parse().unwrap();
    let run = |w| par::with_workers(w, || family_convergence_scan(&fam, &[5, 50], 20_000, 4).unwrap());
    assert_eq!(run(1), run(8));
}

proptest! {
    #[test]
    fn ecdf_is_monotone_and_right_continuous(values in prop::collection::vec(-5.0f64..5.0, 1..60), t in -6.0f64..6.0, dt in 0.0f64..1.0) {
        let s = EmpiricalSample::new(values.clone(), "p", 0).unwrap();
        prop_assert!(empirical_cdf(&s, t) <= empirical_cdf(&s, t + dt));
        for &v in &values {
            // Right-continuous: the value at a jump equals the limit from the right.
            prop_assert_eq!(empirical_cdf(&s, v), empirical_cdf(&s, v + 1e-12));
        }
        let d = ks_distance_to_normal(&s);
        prop_assert!((0.0..=1.0).contains(&d));
        let doubled: Vec<f64> = values.iter().chain(values.iter()).copied().collect();
        prop_assert_eq!(d, ks_distance_to_normal(&EmpiricalSample::new(doubled, "p", 0).unwrap()));
    }
}

use clt_lab::exchange::*;
use clt_lab::lindeberg::TriangularRow;
use clt_lab::par;
use clt_lab::sampling::{make_rng, DistributionSpec, RngState};
use clt_lab::specfun::TransitionFn;
use clt_lab::stats::{ks_distance_to_normal, EmpiricalSample, KS_BAND_99, KS_BAND_999};
use proptest::prelude::*;

fn drop_before(x: f64, eta: f64) -> TestFn {
    TestFn::Transition(TransitionFn::drop_before(x, eta).unwrap())
}

fn hybrid_draws(chain: &ChainSpec, i: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = make_rng(seed, 0);
    (0..n).map(|_| sample_hybrid(chain, i, true, &mut rng).unwrap()).collect()
}

#[test]
fn all_normal_endpoint_is_standard_normal() {
    let chain = ChainSpec::iid(DistributionSpec::uniform(), 16, drop_before(0.0, 0.5), 2, 0).unwrap();
    let n = 1_000_000;
    let sample = EmpiricalSample::new(hybrid_draws(&chain, 0, n, 3), "Z_{16,0}", 3).unwrap();
    let d = ks_distance_to_normal(&sample);
    assert!(d < 1.5 * KS_BAND_99 / (n as f64).sqrt(), "{d}");
    assert!(d < KS_BAND_999 / (n as f64).sqrt(), "{d}");
}

#[test]
fn every_hybrid_has_unit_variance() {
    let chain = ChainSpec::iid(DistributionSpec::two_point(0.2).unwrap(), 8, drop_before(0.0, 0.5), 2, 0).unwrap();
    for i in [0, 3, 8] {
        let est = estimate_expectation(
            |rng| sample_hybrid(&chain, i, true, rng).unwrap(),
            |z| z * z,
            1_000_000,
            10 + i as u64,
        )
        .unwrap();
        assert!((est.mean - 1.0).abs() <= 4.0 * est.std_error, "i={i}: {est:?}");
    }
}

#[test]
fn expectation_examples() {
    let chain = ChainSpec::iid(DistributionSpec::rademacher(), 12, drop_before(0.0, 1.0), 2, 0).unwrap();
    let lin = estimate_expectation(|rng| sample_hybrid(&chain, 0, true, rng).unwrap(), |t| t, 200_000, 4).unwrap();
    assert!(lin.mean.abs() <= 4.0 * lin.std_error);

    let single = ChainSpec::iid(DistributionSpec::rademacher(), 1, drop_before(0.0, 1.0), 2, 0).unwrap();
    let f = drop_before(0.0, 1.0);
    let est = estimate_expectation(|rng| sample_hybrid(&single, 1, true, rng).unwrap(), |t| f.value(t), 200_000, 4)
        .unwrap();
    assert!((est.mean - 0.5).abs() <= 4.0 * est.std_error, "{est:?}");
}

#[test]
fn s_hybrid_omits_the_swapped_term() {
    // S_{n,i} has variance 1 − Var(X_i) = 1 − 1/n.
    let chain = ChainSpec::iid(DistributionSpec::rademacher(), 4, drop_before(0.0, 1.0), 2, 0).unwrap();
    let est =
        estimate_expectation(|rng| sample_hybrid(&chain, 2, false, rng).unwrap(), |z| z * z, 500_000, 8).unwrap();
    assert!((est.mean - 0.75).abs() <= 4.0 * est.std_error, "{est:?}");
}

#[test]
fn rademacher_chain_respects_bounds() {
    let chain = ChainSpec::iid(DistributionSpec::rademacher(), 64, drop_before(0.0, 0.5), 100_000, 42).unwrap();
    let r = swap_chain_scan(&chain, 0.05).unwrap();
    assert!(r.flagged.is_empty(), "{:?}", r.flagged);
    assert!(r.total_gap.abs() <= r.total_bound + 4.0 * r.total_std_error);
    assert!(r.telescoping_residual() < 1e-12);
}

#[test]
fn exponential_and_custom_rows() {
    let chain = ChainSpec::iid(DistributionSpec::exp_centered(), 16, TestFn::Cosine { omega: 2.0 }, 50_000, 1).unwrap();
    assert!(swap_chain_scan(&chain, 0.2).unwrap().passed());

    let entries = vec![
        DistributionSpec::rademacher().scaled(0.5),
        DistributionSpec::uniform().scaled(0.5),
        DistributionSpec::normal(0.5).unwrap(),
    ];
    let row = TriangularRow::new(1, entries).unwrap();
    let chain = ChainSpec::new(row, drop_before(0.2, 0.3), 50_000, 2).unwrap();
    let r = swap_chain_scan(&chain, 0.1).unwrap();
    assert!(r.passed());
    // The Normal entry swaps for an identical companion.
    assert!(r.per_swap_gaps[2].abs() <= 4.0 * r.gap_std_errors[2]);
}

#[test]
fn reports_are_bit_identical_across_workers() {
    let chain = ChainSpec::iid(DistributionSpec::two_point(0.1).unwrap(), 24, drop_before(0.0, 0.5), 30_000, 9).unwrap();
    let run = |w| par::with_workers(w, || swap_chain_scan(&chain, 0.05).unwrap());
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_ordering_is_exact(seed in any::<u64>(), x in -3.0f64..3.0, eta in 1e-4f64..2.0, n in 1usize..500) {
        let mut rng = RngState::new(seed, 0);
        let samples: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let (a, b, c) = sandwich_check(&samples, x, eta).unwrap();
        prop_assert!(a <= b && b <= c, "{} {} {}", a, b, c);
    }
}

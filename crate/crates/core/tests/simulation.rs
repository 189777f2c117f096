use faulty_polar::construction::CodeConstruction;
use faulty_polar::montecarlo::{binomial_sigma, compare_to_proxy, run_simulation, SimConfig};
use faulty_polar::{Correlation, FaultSpec, Probability};

fn prob(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

fn config(n: usize, p: f64, delta: f64, correlation: Correlation, k: usize) -> SimConfig {
    let fault = FaultSpec::unprotected(prob(delta)).with_correlation(correlation);
    let code = CodeConstruction::design(n, prob(p), fault, k).unwrap();
    SimConfig::new(code, prob(p), fault)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    for correlation in [Correlation::Shared, Correlation::IndependentTree] {
        let cfg = config(6, 0.4, 0.01, correlation, 32)
            .trials(5_000)
            .seed(3)
            .genie(true);
        let one = in_pool(1, || run_simulation(&cfg).unwrap());
        let many = in_pool(4, || run_simulation(&cfg).unwrap());
        assert_eq!(one, many);
    }
}

#[test]
fn seeds_change_the_sample() {
    let base = config(6, 0.4, 0.01, Correlation::Shared, 32).trials(5_000);
    let a = run_simulation(&base.clone().seed(1)).unwrap();
    let b = run_simulation(&base.seed(2)).unwrap();
    assert_ne!(a.frame_erasures, b.frame_erasures);
}

#[test]
fn per_bit_marginals_match_reliabilities_in_both_modes() {
    // Sharing messages across bits correlates the trees but leaves each
    // bit's own marginal unchanged.
    for correlation in [Correlation::Shared, Correlation::IndependentTree] {
        let cfg = config(5, 0.3, 0.02, correlation, 16)
            .trials(40_000)
            .seed(11)
            .genie(true);
        let out = run_simulation(&cfg).unwrap();
        let counts = out.per_bit_erasures.as_ref().unwrap();
        for (i, (&c, &z)) in counts.iter().zip(cfg.code.reliabilities()).enumerate() {
            let rate = c as f64 / out.frames as f64;
            let sigma = binomial_sigma(z, out.frames);
            assert!(
                (rate - z).abs() <= 4.5 * sigma,
                "{correlation:?} index {i}: {rate} vs {z}"
            );
        }
    }
}

#[test]
fn fer_does_not_fall_as_delta_grows() {
    let outs: Vec<_> = [0.0, 1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&d| {
            let cfg = config(7, 0.3, d, Correlation::IndependentTree, 40)
                .trials(10_000)
                .seed(5);
            run_simulation(&cfg).unwrap()
        })
        .collect();
    for w in outs.windows(2) {
        let sigma = (w[0].fer_sigma().powi(2) + w[1].fer_sigma().powi(2)).sqrt();
        assert!(
            w[1].fer >= w[0].fer - 4.0 * sigma,
            "{} then {}",
            w[0].fer,
            w[1].fer
        );
    }
    assert!(outs[3].fer > outs[0].fer);
}

#[test]
fn genie_fer_sits_between_worst_bit_and_union_bound() {
    let cfg = config(7, 0.5, 0.005, Correlation::IndependentTree, 32)
        .trials(20_000)
        .seed(8)
        .genie(true);
    let out = run_simulation(&cfg).unwrap();
    let cmp = compare_to_proxy(&out, &cfg.code);
    assert!(cmp.within_union_bound, "{cmp:?}");
    let worst = cfg
        .code
        .info_set()
        .iter()
        .map(|&i| cfg.code.reliabilities()[i])
        .fold(0.0, f64::max);
    assert!(out.fer >= worst - 3.0 * binomial_sigma(worst, out.frames));
    assert!(out.ber <= out.fer);
    assert!(out.fer_ci95.0 <= out.fer && out.fer <= out.fer_ci95.1);
}

#[test]
fn oversized_runs_are_rejected() {
    let cfg = config(4, 0.5, 0.0, Correlation::Shared, 8).trials(20_000_000);
    assert!(matches!(
        run_simulation(&cfg),
        Err(faulty_polar::Error::Resource(_))
    ));
}

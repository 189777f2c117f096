use faulty_polar::codec::{
    encode, transmit_bec, Decision, Llr, NoFaults, ScDecoder, ScriptedFaults,
};
use faulty_polar::construction::{
    design_code, evolve_all, evolve_path, expected_epsilon_closed_form,
    expected_epsilon_enumerated, index_to_path, CodeConstruction, IndexPath,
};
use faulty_polar::transfer::{mean_step, t_minus, t_minus_faulty, t_plus, t_plus_faulty};
use faulty_polar::{Correlation, FaultSpec, Probability};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prob(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

proptest! {
    #[test]
    fn faulty_maps_stay_between_delta_and_one(eps in unit(), delta in unit()) {
        for v in [t_plus_faulty(prob(eps), prob(delta)), t_minus_faulty(prob(eps), prob(delta))] {
            prop_assert!(v.get() >= delta && v.get() <= 1.0);
        }
    }

    #[test]
    fn faulty_maps_reduce_to_reliable_ones(eps in unit()) {
        let d = Probability::ZERO;
        prop_assert!((t_plus_faulty(prob(eps), d).get() - t_plus(prob(eps)).get()).abs() <= 1e-15);
        prop_assert!((t_minus_faulty(prob(eps), d).get() - t_minus(prob(eps)).get()).abs() <= 1e-15);
    }

    #[test]
    fn maps_are_monotone(a in unit(), b in unit(), delta in unit()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let d = prob(delta);
        prop_assert!(t_plus_faulty(prob(lo), d) <= t_plus_faulty(prob(hi), d));
        prop_assert!(t_minus_faulty(prob(lo), d) <= t_minus_faulty(prob(hi), d));
        // More faults never help either.
        let e = prob(a);
        let (dlo, dhi) = if a <= b { (prob(a), prob(b)) } else { (prob(b), prob(a)) };
        prop_assert!(t_plus_faulty(e, dlo) <= t_plus_faulty(e, dhi));
        prop_assert!(t_minus_faulty(e, dlo) <= t_minus_faulty(e, dhi));
    }

    #[test]
    fn check_branch_dominates_variable_branch(eps in unit(), delta in unit()) {
        prop_assert!(t_plus_faulty(prob(eps), prob(delta)) <= t_minus_faulty(prob(eps), prob(delta)));
    }

    #[test]
    fn variable_map_contracts_above_fixed_point(t in 0.001..0.999f64, delta in 0.0..0.49f64) {
        let star = delta / (1.0 - delta);
        let eps = star + (1.0 - star) * t;
        prop_assert!(t_plus_faulty(prob(eps), prob(delta)).get() < eps);
    }

    #[test]
    fn variable_map_expands_below_fixed_point(t in 0.0..0.999f64, delta in 1e-9..0.49f64) {
        let eps = delta / (1.0 - delta) * t;
        prop_assert!(t_plus_faulty(prob(eps), prob(delta)).get() > eps);
    }

    #[test]
    fn check_map_expands(eps in 0.0..0.999f64, delta in 1e-9..=1.0f64) {
        prop_assert!(t_minus_faulty(prob(eps), prob(delta)).get() > eps);
    }

    #[test]
    fn mean_step_is_submartingale(eps in unit(), delta in unit()) {
        let m = mean_step(prob(eps), prob(delta)).get();
        let avg = (t_plus_faulty(prob(eps), prob(delta)).get()
            + t_minus_faulty(prob(eps), prob(delta)).get()) / 2.0;
        prop_assert!((m - avg).abs() <= 1e-14);
        prop_assert!(m >= eps);
        if eps < 1.0 && delta > 0.0 {
            prop_assert!(m > eps);
        }
    }

    #[test]
    fn expectation_forms_agree(p in unit(), delta in unit(), steps in 0usize..=12) {
        let e = expected_epsilon_enumerated(prob(p), prob(delta), steps, 12).unwrap();
        let c = expected_epsilon_closed_form(prob(p), prob(delta), steps);
        prop_assert!((e - c).abs() <= 1e-12, "{} vs {}", e, c);
    }

    #[test]
    fn path_round_trips_and_matches_level_evolution(
        n in 0usize..=12,
        seed in any::<u64>(),
        p in unit(),
        delta in prop_oneof![Just(0.0), 0.0..0.2f64],
        faulty in 0usize..=13,
    ) {
        let len = 1usize << n;
        let index = (seed as usize) % len;
        let path = index_to_path(index, n).unwrap();
        prop_assert_eq!(path.len(), n);
        prop_assert_eq!(IndexPath::to_index(&path.steps), index);
        let fault = FaultSpec::unprotected(prob(delta)).with_unprotected_steps(faulty);
        let z = evolve_all(n, prob(p), &fault).unwrap();
        let single = evolve_path(&path, prob(p), &fault).get();
        prop_assert!((z[index] - single).abs() <= 1e-12);
    }

    #[test]
    fn designed_sets_partition_by_reliability(
        n in 1usize..=9,
        p in 0.01..0.99f64,
        delta in prop_oneof![Just(0.0), 0.0..0.1f64],
        frac in 0.01..0.99f64,
    ) {
        let len = 1usize << n;
        let k = ((frac * len as f64) as usize).clamp(1, len - 1);
        let z = evolve_all(n, prob(p), &FaultSpec::unprotected(prob(delta))).unwrap();
        let (info, frozen) = design_code(&z, k).unwrap();
        prop_assert_eq!(info.len(), k);
        prop_assert_eq!(info.len() + frozen.len(), len);
        prop_assert!(info.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(frozen.windows(2).all(|w| w[0] < w[1]));
        let worst = info.iter().map(|&i| z[i]).fold(f64::MIN, f64::max);
        let best = frozen.iter().map(|&i| z[i]).fold(f64::MAX, f64::min);
        prop_assert!(worst <= best);
    }

    #[test]
    fn encoder_is_an_involution(n in 0usize..=10, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<u8> = (0..1usize << n).map(|_| rng.random_range(0..2)).collect();
        let x = encode(&u, n).unwrap();
        prop_assert_eq!(encode(&x, n).unwrap(), u);
    }

    #[test]
    fn more_faults_never_recover_a_bit(
        n in 1usize..=5,
        seed in any::<u64>(),
        shared in any::<bool>(),
        rate in 0.02..0.3f64,
    ) {
        use rand::Rng;
        let len = 1usize << n;
        let correlation = if shared { Correlation::Shared } else { Correlation::IndependentTree };
        let fault = FaultSpec::unprotected(prob(0.1)).with_correlation(correlation);
        let code = CodeConstruction::design(n, prob(0.3), fault, len / 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![0u8; len];
        for &i in code.info_set() {
            u[i] = rng.random_range(0..2);
        }
        let y = transmit_bec(&encode(&u, n).unwrap(), prob(0.3), &mut rng);
        let calls = len * len * n;
        let fewer: Vec<bool> = (0..calls).map(|_| rng.random_bool(rate)).collect();
        let more: Vec<bool> = fewer.iter().map(|&f| f || rng.random_bool(rate)).collect();

        let mut decoder = ScDecoder::new(n);
        let a = decoder.decode(&y, &code, &fault, &mut ScriptedFaults::new(&fewer), Some(&u)).unwrap();
        let b = decoder.decode(&y, &code, &fault, &mut ScriptedFaults::new(&more), Some(&u)).unwrap();
        for (i, &bit) in u.iter().enumerate() {
            let (da, db) = (Decision::from(a.decision_llrs[i]), Decision::from(b.decision_llrs[i]));
            // Faults only erase, so a surviving decision is always correct.
            for d in [da, db] {
                if d != Decision::Erased {
                    prop_assert_eq!(d, if bit == 1 { Decision::One } else { Decision::Zero });
                }
            }
            if da == Decision::Erased {
                prop_assert_eq!(db, Decision::Erased, "index {}", i);
            }
        }
        prop_assert!(a.info_bit_erasures <= b.info_bit_erasures);
    }

    #[test]
    fn modes_agree_without_faults(n in 1usize..=8, seed in any::<u64>(), p in 0.0..=1.0f64) {
        use rand::Rng;
        let len = 1usize << n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared = FaultSpec::reliable().with_correlation(Correlation::Shared);
        let tree = FaultSpec::reliable().with_correlation(Correlation::IndependentTree);
        let code = CodeConstruction::design(n, prob(p), shared, len / 2).unwrap();
        let mut u = vec![0u8; len];
        for &i in code.info_set() {
            u[i] = rng.random_range(0..2);
        }
        let y = transmit_bec(&encode(&u, n).unwrap(), prob(p), &mut rng);
        let mut decoder = ScDecoder::new(n);
        let a = decoder.decode(&y, &code, &shared, &mut NoFaults, None).unwrap();
        let b = decoder.decode(&y, &code, &tree, &mut NoFaults, None).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn erasure_free_round_trip_at_1024() {
    use rand::Rng;
    let n = 10;
    let code = CodeConstruction::design(n, prob(0.5), FaultSpec::reliable(), 512).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut decoder = ScDecoder::new(n);
    for _ in 0..1000 {
        let mut u = vec![0u8; 1 << n];
        for &i in code.info_set() {
            u[i] = rng.random_range(0..2);
        }
        let y: Vec<Llr> = encode(&u, n)
            .unwrap()
            .into_iter()
            .map(Llr::for_bit)
            .collect();
        let out = decoder
            .decode(&y, &code, &FaultSpec::reliable(), &mut NoFaults, None)
            .unwrap();
        assert!(!out.frame_erased);
        let want: Vec<Decision> = code
            .info_set()
            .iter()
            .map(|&i| {
                if u[i] == 1 {
                    Decision::One
                } else {
                    Decision::Zero
                }
            })
            .collect();
        assert_eq!(out.u_hat, want);
    }
}

#[test]
fn exhaustive_round_trip_small_codes() {
    for n in 1..=3 {
        let len = 1usize << n;
        for k in 1..len {
            let code = CodeConstruction::design(n, prob(0.5), FaultSpec::reliable(), k).unwrap();
            let mut decoder = ScDecoder::new(n);
            for word in 0..1u32 << k {
                let mut u = vec![0u8; len];
                for (b, &i) in code.info_set().iter().enumerate() {
                    u[i] = ((word >> b) & 1) as u8;
                }
                let y: Vec<Llr> = encode(&u, n)
                    .unwrap()
                    .into_iter()
                    .map(Llr::for_bit)
                    .collect();
                let out = decoder
                    .decode(&y, &code, &FaultSpec::reliable(), &mut NoFaults, None)
                    .unwrap();
                let got: Vec<u8> = out
                    .u_hat
                    .iter()
                    .map(|d| match d {
                        Decision::Zero => 0,
                        Decision::One => 1,
                        Decision::Erased => panic!("erasure without channel erasures"),
                    })
                    .collect();
                let want: Vec<u8> = code.info_set().iter().map(|&i| u[i]).collect();
                assert_eq!(got, want, "n={n} k={k}");
            }
        }
    }
}

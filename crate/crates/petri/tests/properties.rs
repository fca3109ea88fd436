#[path = "common/random_net.rs"]
mod random_net;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_nets_conserve_tokens(seed in any::<u64>()) {
        let net = random_net::random_net(seed);
        let sim = random_net::run(&net, seed);
        prop_assert_eq!(random_net::check_conservation(&net, &sim), Ok(()));
    }

    #[test]
    fn random_nets_never_move_the_clock_backwards(seed in any::<u64>()) {
        let net = random_net::random_net(seed);
        let sim = random_net::run(&net, seed);
        prop_assert_eq!(random_net::check_monotone(&sim), Ok(()));
    }

    #[test]
    fn random_nets_are_deterministic(seed in any::<u64>()) {
        let net = random_net::random_net(seed);
        prop_assert_eq!(random_net::check_deterministic(&net, seed), Ok(()));
    }

    #[test]
    fn sampled_delays_are_non_negative(mean in -5.0f64..5.0, std in 0.01f64..3.0, seed in any::<u64>()) {
        use rand::SeedableRng;
        let d = podnet_petri::DelayDistribution::normal(mean, std);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let s = d.sample(&mut rng).seconds().unwrap();
            prop_assert!(s >= 0.0 && s.is_finite());
        }
    }
}

#[test]
fn generator_covers_timed_and_immediate_firings() {
    let mut fired = 0;
    let mut timed = 0;
    for seed in 0..200 {
        let net = random_net::random_net(seed);
        let sim = random_net::run(&net, seed);
        fired += sim.trace().len();
        timed += sim.trace().iter().filter(|e| e.time > 0.0).count();
    }
    assert!(fired > 1_000, "generator produced too little activity: {fired}");
    assert!(timed > 100, "no timed completions exercised: {timed}");
}

#[test]
fn fixed_seed_sweep() {
    for seed in 0..100 {
        random_net::check_all(seed).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

mod support;

use motifvar_core::rng::stream_rng;
use proptest::prelude::*;
use support::oracles::{conservation_check, random_stream};

fn check_stream(times: &[i64], power: &[f64]) -> usize {
    let (spans, worst) = conservation_check(times, power);
    assert!(worst < 1e-9, "relative error {worst}");
    spans
}

#[test]
fn hundred_random_streams_conserve_energy() {
    let mut spans = 0;
    for seed in 0..100 {
        let mut rng = stream_rng(seed, 0);
        let (t, p) = random_stream(&mut rng, 500);
        spans += check_stream(&t, &p);
    }
    assert!(spans >= 100);
}

proptest! {
    #[test]
    fn conservation_holds_for_arbitrary_streams(
        steps in proptest::collection::vec((1i64..2000, 0.0f64..10000.0), 2..200),
        offset in 0i64..300,
    ) {
        let mut t = 1_300_000_000 + offset;
        let mut times = Vec::new();
        let mut power = Vec::new();
        for (dt, p) in steps {
            times.push(t);
            power.push(p);
            t += dt;
        }
        check_stream(&times, &power);
    }
}

//! Desk-scale rate check: the recommendation error of both subroutines is
//! monotonically nonincreasing in the number of pulls.

use rand::Rng;
use subpop_bandits::rng;
use subpop_bandits::{SubroutineKind, SubroutineState};

/// Two-arm Bernoulli instance with means (0.5 + delta, 0.5); returns the
/// fraction of seeds on which the subroutine recommends the wrong arm after
/// `pulls` rounds.
fn error_rate(kind: SubroutineKind, delta: f64, pulls: u64, seeds: u64) -> f64 {
    let mut wrong = 0u64;
    for seed in 1..=seeds {
        let mut state = SubroutineState::new(kind, 2);
        let mut reward_rng = rng::reward_stream(seed, 0, 0);
        for _ in 0..pulls {
            let arm = state.next_arm();
            let mean = if arm == 0 { 0.5 + delta } else { 0.5 };
            let u: f64 = reward_rng.random();
            let reward = if u < mean { 1.0 } else { 0.0 };
            state.observe(arm, reward).unwrap();
        }
        if state.recommend() != 0 {
            wrong += 1;
        }
    }
    wrong as f64 / seeds as f64
}

#[test]
fn recommendation_error_nonincreasing_in_budget() {
    for kind in [SubroutineKind::UniformExplore, SubroutineKind::Ucb] {
        let rates: Vec<f64> = [100u64, 400, 1600]
            .iter()
            .map(|&t| error_rate(kind, 0.1, t, 2000))
            .collect();
        assert!(
            rates[0] >= rates[1] && rates[1] >= rates[2],
            "{kind:?}: error rates {rates:?} not monotone"
        );
        // Sanity: at T = 1600 and gap 0.1 the error is essentially resolved.
        assert!(rates[2] < 0.05, "{kind:?}: {rates:?}");
    }
}

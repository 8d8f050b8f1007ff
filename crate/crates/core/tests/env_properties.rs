use accumulator_rl::env::{self, EnvConfig, OutcomeKind};
use accumulator_rl::rng::{substream, Stream};
use proptest::prelude::*;
use rand::Rng;

/// Plays until the episode ends, guessing `guess` once step `at` is reached.
fn play(
    cfg: &EnvConfig,
    seed: u64,
    at: Option<u32>,
    guess: impl Fn(usize) -> usize,
) -> Vec<(u32, f64, bool, OutcomeKind)> {
    let mut rng = substream(seed, Stream::Env);
    let mut state = env::reset(cfg, &mut rng);
    env::draw_sample(&state, cfg, &mut rng).unwrap();
    let mode = state.hidden_mode();
    let mut trace = Vec::new();
    loop {
        let g = at.filter(|&a| state.t() >= a).map(|_| guess(mode));
        let out = env::step(&mut state, cfg, g, &mut rng).unwrap();
        trace.push((out.t, out.reward, out.terminated, out.kind));
        if out.terminated {
            return trace;
        }
    }
}

#[test]
fn correct_guess_pays_less_the_longer_it_waits() {
    let cfg = EnvConfig::default();
    for (t, expected) in [(1, 30.0), (7, 24.0), (30, 1.0)] {
        let trace = play(&cfg, 11, Some(t), |mode| mode);
        let last = trace.last().unwrap();
        assert_eq!(last.0, t);
        assert_eq!(last.3, OutcomeKind::CorrectGuess);
        assert_eq!(last.1, expected);
    }
}

#[test]
fn wrong_guess_pays_minus_thirty() {
    let cfg = EnvConfig::default();
    for t in [1, 7, 30] {
        let last = *play(&cfg, 3, Some(t), |mode| (mode + 1) % 10)
            .last()
            .unwrap();
        assert_eq!(
            (last.0, last.1, last.3),
            (t, -30.0, OutcomeKind::IncorrectGuess)
        );
    }
}

#[test]
fn waiting_pays_zero_until_timeout() {
    let cfg = EnvConfig::default();
    let trace = play(&cfg, 5, None, |m| m);
    assert_eq!(trace.len(), 30);
    assert!(trace[..29]
        .iter()
        .all(|s| s.1 == 0.0 && s.3 == OutcomeKind::NoGuess));
    assert_eq!((trace[29].1, trace[29].3), (-30.0, OutcomeKind::Timeout));
}

#[test]
fn guess_out_of_range_is_rejected() {
    let cfg = EnvConfig::default();
    let mut rng = substream(1, Stream::Env);
    let mut state = env::reset(&cfg, &mut rng);
    env::draw_sample(&state, &cfg, &mut rng).unwrap();
    assert!(env::step(&mut state, &cfg, Some(10), &mut rng).is_err());
}

#[test]
fn sample_frequencies_within_three_sigma() {
    let n = 100_000;
    for eps in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let cfg = EnvConfig::with_epsilon(eps);
        let mut rng = substream((eps * 10.0) as u64, Stream::Rollout(0));
        let mut done = [false; 10];
        while done.iter().any(|d| !d) {
            let state = env::reset(&cfg, &mut rng);
            let mode = state.hidden_mode();
            if done[mode] {
                continue;
            }
            done[mode] = true;
            let mut counts = [0usize; 10];
            for _ in 0..n {
                counts[env::draw_sample(&state, &cfg, &mut rng).unwrap()] += 1;
            }
            for (s, &c) in counts.iter().enumerate() {
                let p = if s == mode { 1.0 - eps } else { eps / 9.0 };
                let sigma = (n as f64 * p * (1.0 - p)).sqrt();
                let dev = (c as f64 - n as f64 * p).abs();
                assert!(
                    dev <= 3.0 * sigma + 1e-9,
                    "eps {eps} mode {mode} symbol {s}: {c} vs {}",
                    n as f64 * p
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_are_bounded_with_one_terminal_step(seed in any::<u64>(), eps in 0.0f64..=1.0, p_guess in 0.0f64..0.3) {
        let cfg = EnvConfig::with_epsilon(eps);
        let mut rng = substream(seed, Stream::Env);
        let mut choice = substream(seed, Stream::AgentSampling);
        let mut state = env::reset(&cfg, &mut rng);
        env::draw_sample(&state, &cfg, &mut rng).unwrap();
        let mut outcomes = Vec::new();
        loop {
            let g = (choice.random::<f64>() < p_guess).then(|| choice.random_range(0..10));
            let out = env::step(&mut state, &cfg, g, &mut rng).unwrap();
            outcomes.push(out);
            if out.terminated {
                break;
            }
        }
        prop_assert!(outcomes.len() <= cfg.t_max as usize);
        prop_assert_eq!(outcomes.iter().filter(|o| o.terminated).count(), 1);
        let (last, prefix) = outcomes.split_last().unwrap();
        prop_assert!(prefix.iter().all(|o| o.reward == 0.0));
        let allowed = match last.kind {
            OutcomeKind::CorrectGuess => last.reward == 30.0 - f64::from(last.t - 1),
            OutcomeKind::IncorrectGuess | OutcomeKind::Timeout => last.reward == -30.0,
            OutcomeKind::NoGuess => false,
        };
        prop_assert!(allowed);
        prop_assert!(env::step(&mut state, &cfg, None, &mut rng).is_err());
    }

    #[test]
    fn correct_reward_strictly_decreases_in_time(t in 1u32..30) {
        let cfg = EnvConfig::default();
        let now = play(&cfg, 9, Some(t), |m| m).last().unwrap().1;
        let later = play(&cfg, 9, Some(t + 1), |m| m).last().unwrap().1;
        prop_assert!(later < now);
    }

    #[test]
    fn same_seed_gives_identical_trace(seed in any::<u64>(), eps in 0.0f64..=1.0) {
        let cfg = EnvConfig::with_epsilon(eps);
        let trace = |seed| {
            let mut rng = substream(seed, Stream::Env);
            let mut state = env::reset(&cfg, &mut rng);
            let mut samples = vec![env::draw_sample(&state, &cfg, &mut rng).unwrap()];
            while let Some(s) = env::step(&mut state, &cfg, None, &mut rng).unwrap().sample {
                samples.push(s);
            }
            (state.hidden_mode(), samples)
        };
        prop_assert_eq!(trace(seed), trace(seed));
    }
}

#![allow(dead_code)]

use accumulator_rl::agents::{ActionSelection, Agent, AgentKind, EpisodeRecord};
use accumulator_rl::autodiff::gradcheck::{max_relative_error, numeric_gradient};
use accumulator_rl::autodiff::{ParameterStore, Tape, Var};
use accumulator_rl::env::EnvConfig;
use accumulator_rl::harness::{build_agent, ExperimentConfig};
use accumulator_rl::rng::{substream, Stream, StreamRng};
use accumulator_rl::Result;
use rand::Rng;

pub const PRIMITIVE_TOL: f64 = 1e-4;
pub const COMPOSITE_TOL: f64 = 1e-3;
pub const POINTS: usize = 100;
pub const FD_STEP: f64 = 1e-5;

/// A tape input given by value and shape.
#[derive(Clone)]
pub struct Input {
    pub value: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl Input {
    pub fn vector(value: Vec<f64>) -> Self {
        let rows = value.len();
        Self {
            value,
            rows,
            cols: 1,
        }
    }

    pub fn matrix(value: Vec<f64>, rows: usize, cols: usize) -> Self {
        Self { value, rows, cols }
    }
}

pub fn uniform(rng: &mut StreamRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values in `[-hi, -gap] ∪ [gap, hi]`, away from a kink at zero.
pub fn away_from_zero(rng: &mut StreamRng, n: usize, gap: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(gap..hi);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

type Build<'a> = &'a dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

fn projected_loss(
    tape: &mut Tape,
    inputs: &[Input],
    weights: &[f64],
    build: Build,
) -> Result<(Var, Vec<Var>)> {
    let vars = inputs
        .iter()
        .map(|i| tape.matrix(i.value.clone(), i.rows, i.cols))
        .collect::<Result<Vec<_>>>()?;
    let out = build(tape, &vars)?;
    let shape = tape.value(out).len();
    let w = tape.matrix(weights.to_vec(), shape, 1)?;
    let prod = tape.mul(out, w)?;
    Ok((tape.sum(prod)?, vars))
}

/// Relative error between the tape gradient and central differences of
/// `sum(weights * build(inputs))` with respect to every input component.
pub fn primitive_error(inputs: &[Input], weights: &[f64], build: Build) -> f64 {
    let mut tape = Tape::new();
    let (loss, vars) = projected_loss(&mut tape, inputs, weights, build).expect("forward pass");
    let grads = tape
        .backward(loss, &mut ParameterStore::new())
        .expect("backward pass");
    let analytic: Vec<f64> = vars.iter().flat_map(|&v| grads.get(v).unwrap()).collect();

    let flat: Vec<f64> = inputs.iter().flat_map(|i| i.value.clone()).collect();
    let numeric = numeric_gradient(
        |x| {
            let mut offset = 0;
            let perturbed: Vec<Input> = inputs
                .iter()
                .map(|i| {
                    let n = i.value.len();
                    let v = x[offset..offset + n].to_vec();
                    offset += n;
                    Input { value: v, ..*i }
                })
                .collect();
            let mut tape = Tape::new();
            let (loss, _) =
                projected_loss(&mut tape, &perturbed, weights, build).expect("forward pass");
            tape.scalar_value(loss)
        },
        &flat,
        FD_STEP,
    );
    max_relative_error(&analytic, &numeric)
}

/// Plays one non-learning episode with a freshly initialised agent whose
/// parameters (biases included) are jittered to a random point. Zero biases
/// would put ReLU pre-activations exactly on the kink for the all-zero input.
pub fn agent_with_episode(
    kind: AgentKind,
    seed: u64,
    epsilon: f64,
) -> (Box<dyn Agent>, EpisodeRecord) {
    let cfg = ExperimentConfig {
        agent: kind,
        epsilon,
        seed,
        sensitivity: 5.0,
        ..Default::default()
    };
    let mut agent = build_agent(&cfg).expect("agent");
    let mut jitter = substream(seed, Stream::Rollout(0));
    for p in agent.params_mut().iter_mut() {
        for v in p.value.iter_mut() {
            *v += jitter.random_range(-0.3..0.3);
        }
    }
    let env = EnvConfig::with_epsilon(epsilon);
    let mut env_rng = substream(seed, Stream::Env);
    let mut pol_rng = substream(seed, Stream::AgentSampling);
    agent
        .run_episode(
            &env,
            &mut env_rng,
            &mut pol_rng,
            false,
            ActionSelection::Sample,
        )
        .expect("episode");
    let record = agent.last_record().clone();
    (agent, record)
}

fn flat_values(store: &ParameterStore) -> Vec<f64> {
    store.iter().flat_map(|p| p.value.iter().copied()).collect()
}

fn set_values(store: &mut ParameterStore, x: &[f64]) {
    let mut k = 0;
    for p in store.iter_mut() {
        let n = p.value.len();
        p.value.copy_from_slice(&x[k..k + n]);
        k += n;
    }
}

/// Compares the agent's episode-loss gradient with central differences of the
/// same loss (detached baselines and bootstraps frozen) along a random
/// direction and at `coords` random coordinates. Returns the worst relative
/// error.
pub fn agent_gradient_error(
    agent: &dyn Agent,
    record: &EpisodeRecord,
    rng: &mut StreamRng,
    coords: usize,
) -> f64 {
    let mut store = agent.params().clone();
    store.zero_grad();
    let replay = agent.replay_loss(&store, record, None).expect("replay");
    replay
        .tape
        .backward(replay.loss, &mut store)
        .expect("backward");
    let analytic: Vec<f64> = store.iter().flat_map(|p| p.grad.iter().copied()).collect();
    let theta = flat_values(&store);
    let targets = replay.targets;

    let mut probe = store.clone();
    let mut loss_at = |x: &[f64]| {
        set_values(&mut probe, x);
        let r = agent
            .replay_loss(&probe, record, Some(&targets))
            .expect("replay");
        r.tape.scalar_value(r.loss)
    };

    let h = FD_STEP;
    let dir: Vec<f64> = {
        let d = uniform(rng, theta.len(), -1.0, 1.0);
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.into_iter().map(|v| v / n).collect()
    };
    let shifted = |s: f64| {
        theta
            .iter()
            .zip(&dir)
            .map(|(t, d)| t + s * d)
            .collect::<Vec<_>>()
    };
    let dir_numeric = (loss_at(&shifted(h)) - loss_at(&shifted(-h))) / (2.0 * h);
    let dir_analytic: f64 = analytic.iter().zip(&dir).map(|(g, d)| g * d).sum();
    let mut worst = max_relative_error(&[dir_analytic], &[dir_numeric]);

    for _ in 0..coords {
        let i = rng.random_range(0..theta.len());
        let mut x = theta.clone();
        x[i] = theta[i] + h;
        let up = loss_at(&x);
        x[i] = theta[i] - h;
        let down = loss_at(&x);
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(max_relative_error(&[analytic[i]], &[numeric]));
    }
    worst
}

use rand::{Rng, RngCore};

use super::nets::ThresholdNet;
use super::{
    argmax, check_episode_args, ActionSelection, Agent, EpisodeRecord, EpisodeResult, Replay,
};
use crate::a2c::{episode_loss, link_next_values, update_episode, A2CConfig, Targets, Transition};
use crate::accumulator::{AccumulatorState, ThresholdGrid};
use crate::autodiff::{categorical_sample, AdamState, ParameterStore, Tape};
use crate::env::{self, encode_observation, Encoding, EnvConfig};
use crate::Result;

/// Accumulator agent whose evidence is the one-hot observation itself.
///
/// Each step the threshold network reads the current observation and samples
/// a threshold bin; the observation is added to the channels and the
/// accumulator fires if any preference exceeds the sampled threshold.
pub struct ThresholdAgent {
    store: ParameterStore,
    adam: AdamState,
    a2c: A2CConfig,
    net: ThresholdNet,
    grid: ThresholdGrid,
    accumulator: AccumulatorState,
    tape: Tape,
    record: EpisodeRecord,
}

impl ThresholdAgent {
    pub fn new<R: Rng + ?Sized>(
        a2c: A2CConfig,
        grid: ThresholdGrid,
        sensitivity: f64,
        init_rng: &mut R,
    ) -> Result<Self> {
        a2c.validate()?;
        let mut store = ParameterStore::new();
        let net = ThresholdNet::new(&mut store, "threshold", 10, grid.len(), init_rng)?;
        Ok(Self {
            adam: AdamState::new(&store),
            store,
            a2c,
            net,
            grid,
            accumulator: AccumulatorState::new(10, sensitivity)?,
            tape: Tape::new(),
            record: EpisodeRecord::default(),
        })
    }

    pub fn net(&self) -> &ThresholdNet {
        &self.net
    }

    pub fn grid(&self) -> &ThresholdGrid {
        &self.grid
    }
}

impl Agent for ThresholdAgent {
    fn run_episode(
        &mut self,
        env_cfg: &EnvConfig,
        env_rng: &mut dyn RngCore,
        policy_rng: &mut dyn RngCore,
        learn: bool,
        selection: ActionSelection,
    ) -> Result<EpisodeResult> {
        check_episode_args(env_cfg, learn, selection)?;
        let mut tape = std::mem::take(&mut self.tape);
        tape.clear();
        self.record = EpisodeRecord::default();
        self.accumulator.reset();
        let bound = tape.bind(&self.store);

        let mut state = env::reset(env_cfg, env_rng);
        let mut sample = env::draw_sample(&state, env_cfg, env_rng)?;
        let mut transitions = Vec::new();
        let (step, guess, fired) = loop {
            let obs = encode_observation(sample, Encoding::Onehot10)?;
            let x = tape.constant(obs.payload.clone());
            let (probs, value) = self.net.forward(&mut tape, &bound, x)?;
            let bin = match selection {
                ActionSelection::Sample => categorical_sample(tape.value(probs), policy_rng),
                ActionSelection::Greedy => argmax(tape.value(probs)),
            };
            let (lp, ent) = tape.categorical_logprob_entropy(probs, bin)?;
            let tau = self.grid.values()[bin];

            self.accumulator.accumulate(&obs.payload)?;
            let pref = self.accumulator.preference();
            let guess = pref.decide(tau);
            let fired = guess.map(|g| (pref.rho()[g], tau));
            let step = env::step(&mut state, env_cfg, guess, env_rng)?;

            self.record.samples.push(sample);
            self.record.actions.push(bin);
            self.record.rewards.push(step.reward);
            self.record.terminal.push(step.terminated);
            transitions.push(Transition::new(
                lp,
                value,
                ent,
                step.reward,
                step.terminated,
            ));
            match step.sample {
                Some(next) => sample = next,
                None => break (step, guess, fired),
            }
        };

        let update = if learn {
            link_next_values(&tape, &mut transitions);
            Some(update_episode(
                &mut tape,
                &transitions,
                &mut self.store,
                &mut self.adam,
                &self.a2c,
            )?)
        } else {
            None
        };
        self.tape = tape;

        Ok(EpisodeResult {
            reward: step.reward,
            decision_time: step.t,
            kind: step.kind,
            hidden_mode: state.hidden_mode(),
            guess,
            fired,
            update,
        })
    }

    fn last_record(&self) -> &EpisodeRecord {
        &self.record
    }

    fn replay_loss(
        &self,
        store: &ParameterStore,
        record: &EpisodeRecord,
        targets: Option<&Targets>,
    ) -> Result<Replay> {
        let mut tape = Tape::new();
        let bound = tape.bind(store);
        let mut transitions = Vec::new();
        for (i, (&sample, &bin)) in record.samples.iter().zip(&record.actions).enumerate() {
            let obs = encode_observation(sample, Encoding::Onehot10)?;
            let x = tape.constant(obs.payload);
            let (probs, value) = self.net.forward(&mut tape, &bound, x)?;
            let (lp, ent) = tape.categorical_logprob_entropy(probs, bin)?;
            transitions.push(Transition::new(
                lp,
                value,
                ent,
                record.rewards[i],
                record.terminal[i],
            ));
        }
        link_next_values(&tape, &mut transitions);
        if let Some(t) = targets {
            t.apply(&mut transitions, 0)?;
        }
        let targets = Targets::collect(&tape, &transitions);
        let (loss, _) = episode_loss(&mut tape, &transitions, &self.a2c)?;
        Ok(Replay {
            tape,
            loss,
            targets,
        })
    }

    fn params(&self) -> &ParameterStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }
}

use rand::{Rng, RngCore};

use super::{
    argmax, check_episode_args, ActionSelection, Agent, EpisodeRecord, EpisodeResult, Replay,
};
use crate::a2c::{episode_loss, link_next_values, update_episode, A2CConfig, Targets, Transition};
use crate::autodiff::{
    categorical_sample, AdamState, Bound, Dense, ElmanCell, ParameterStore, Tape, Var,
};
use crate::env::{self, encode_observation, Encoding, EnvConfig};
use crate::Result;

/// Recurrent actor-critic with forced action selection.
///
/// binary4 → Dense(25) + ReLU → Elman(25, ReLU) → {softmax over 11 actions, value}.
/// Actions `0..10` guess a mode; action 10 is No-Op.
pub struct RnnAgent {
    store: ParameterStore,
    adam: AdamState,
    a2c: A2CConfig,
    embed: Dense,
    cell: ElmanCell,
    policy: Dense,
    value: Dense,
    tape: Tape,
    record: EpisodeRecord,
}

struct StepOut {
    hidden: Var,
    probs: Var,
    value: Var,
}

impl RnnAgent {
    pub const HIDDEN: usize = 25;
    pub const N_ACTIONS: usize = 11;
    pub const NO_OP: usize = 10;

    pub fn new<R: Rng + ?Sized>(a2c: A2CConfig, init_rng: &mut R) -> Result<Self> {
        a2c.validate()?;
        let mut store = ParameterStore::new();
        let embed = Dense::new(&mut store, "rnn.embed", 4, Self::HIDDEN, init_rng)?;
        let cell = ElmanCell::new(&mut store, "rnn.cell", Self::HIDDEN, Self::HIDDEN, init_rng)?;
        let policy = Dense::new(
            &mut store,
            "rnn.policy",
            Self::HIDDEN,
            Self::N_ACTIONS,
            init_rng,
        )?;
        let value = Dense::new(&mut store, "rnn.value", Self::HIDDEN, 1, init_rng)?;
        let adam = AdamState::new(&store);
        Ok(Self {
            store,
            adam,
            a2c,
            embed,
            cell,
            policy,
            value,
            tape: Tape::new(),
            record: EpisodeRecord::default(),
        })
    }

    pub fn policy_head(&self) -> Dense {
        self.policy
    }

    fn forward_step(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        sample: usize,
        h: Var,
    ) -> Result<StepOut> {
        let obs = encode_observation(sample, Encoding::Binary4)?;
        let x = tape.constant(obs.payload);
        let pre = self.embed.forward(tape, bound, x)?;
        let e = tape.relu(pre)?;
        let hidden = self.cell.forward(tape, bound, e, h)?;
        let logits = self.policy.forward(tape, bound, hidden)?;
        let probs = tape.softmax(logits)?;
        let value = self.value.forward(tape, bound, hidden)?;
        Ok(StepOut {
            hidden,
            probs,
            value,
        })
    }
}

impl Agent for RnnAgent {
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
        let bound = tape.bind(&self.store);

        let mut state = env::reset(env_cfg, env_rng);
        let mut sample = env::draw_sample(&state, env_cfg, env_rng)?;
        let mut h = tape.constant(vec![0.0; Self::HIDDEN]);
        let mut transitions = Vec::new();
        let outcome = loop {
            let out = self.forward_step(&mut tape, &bound, sample, h)?;
            h = out.hidden;
            let action = match selection {
                ActionSelection::Sample => categorical_sample(tape.value(out.probs), policy_rng),
                ActionSelection::Greedy => argmax(tape.value(out.probs)),
            };
            let (lp, ent) = tape.categorical_logprob_entropy(out.probs, action)?;
            let guess = (action != Self::NO_OP).then_some(action);
            let step = env::step(&mut state, env_cfg, guess, env_rng)?;

            self.record.samples.push(sample);
            self.record.actions.push(action);
            self.record.rewards.push(step.reward);
            self.record.terminal.push(step.terminated);
            transitions.push(Transition::new(
                lp,
                out.value,
                ent,
                step.reward,
                step.terminated,
            ));
            match step.sample {
                Some(next) => sample = next,
                None => break (step, guess),
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

        let (step, guess) = outcome;
        Ok(EpisodeResult {
            reward: step.reward,
            decision_time: step.t,
            kind: step.kind,
            hidden_mode: state.hidden_mode(),
            guess,
            fired: None,
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
        let mut h = tape.constant(vec![0.0; Self::HIDDEN]);
        let mut transitions = Vec::new();
        for (i, (&sample, &action)) in record.samples.iter().zip(&record.actions).enumerate() {
            let out = self.forward_step(&mut tape, &bound, sample, h)?;
            h = out.hidden;
            let (lp, ent) = tape.categorical_logprob_entropy(out.probs, action)?;
            transitions.push(Transition::new(
                lp,
                out.value,
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

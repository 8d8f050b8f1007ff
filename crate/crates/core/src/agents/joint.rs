use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::nets::{EvidenceNet, ThresholdNet};
use super::{
    argmax, check_episode_args, ActionSelection, Agent, EpisodeRecord, EpisodeResult, Replay,
};
use crate::a2c::{
    apply_update, episode_loss, link_next_values, A2CConfig, Targets, Transition, UpdateStats,
};
use crate::accumulator::{AccumulatorState, ThresholdGrid};
use crate::autodiff::{
    beta_sample, categorical_sample, AdamState, Bound, ParameterStore, Tape, Var,
};
use crate::env::{self, encode_observation, Encoding, EnvConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub lr: f64,
    pub gamma: f64,
    pub eta: f64,
    pub evidence_entropy: f64,
    pub threshold_entropy: f64,
    pub sensitivity: f64,
    pub grad_clip: Option<f64>,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            gamma: 0.95,
            eta: 1.0,
            evidence_entropy: 1.0,
            threshold_entropy: 2.0,
            sensitivity: 1.0,
            grad_clip: None,
        }
    }
}

impl JointConfig {
    fn learner(&self, beta_entropy: f64) -> A2CConfig {
        A2CConfig {
            gamma: self.gamma,
            eta: self.eta,
            beta_entropy,
            lr: self.lr,
            grad_clip: self.grad_clip,
        }
    }

    pub fn evidence_learner(&self) -> A2CConfig {
        self.learner(self.evidence_entropy)
    }

    pub fn threshold_learner(&self) -> A2CConfig {
        self.learner(self.threshold_entropy)
    }
}

/// Jointly trained evidence mapping and threshold.
///
/// Per step: the evidence network turns the binary observation into Beta
/// parameters for each of the ten channels, evidence is sampled from them and
/// accumulated with the configured sensitivity, the threshold network samples
/// a threshold bin, and the accumulator fires if a preference exceeds it.
/// Each network is an A2C learner with its own value head; both see the same
/// reward and are updated together once per episode.
pub struct JointAgent {
    store: ParameterStore,
    adam: AdamState,
    config: JointConfig,
    evidence: EvidenceNet,
    threshold: ThresholdNet,
    grid: ThresholdGrid,
    accumulator: AccumulatorState,
    tape: Tape,
    record: EpisodeRecord,
}

struct StepVars {
    evidence_lp: Var,
    evidence_ent: Var,
    evidence_value: Var,
    threshold_lp: Var,
    threshold_ent: Var,
    threshold_value: Var,
}

impl JointAgent {
    pub fn new<R: Rng + ?Sized>(
        config: JointConfig,
        grid: ThresholdGrid,
        init_rng: &mut R,
    ) -> Result<Self> {
        config.evidence_learner().validate()?;
        config.threshold_learner().validate()?;
        if grid.values()[0] < 0.5 {
            return Err(Error::InvalidConfig(
                "joint agent thresholds must be at least 0.5 so only one channel can fire".into(),
            ));
        }
        let mut store = ParameterStore::new();
        let evidence = EvidenceNet::new(&mut store, "evidence", 4, 10, init_rng)?;
        let threshold = ThresholdNet::new(&mut store, "threshold", 4, grid.len(), init_rng)?;
        Ok(Self {
            adam: AdamState::new(&store),
            store,
            accumulator: AccumulatorState::new(10, config.sensitivity)?,
            config,
            evidence,
            threshold,
            grid,
            tape: Tape::new(),
            record: EpisodeRecord::default(),
        })
    }

    pub fn evidence_net(&self) -> &EvidenceNet {
        &self.evidence
    }

    pub fn threshold_net(&self) -> &ThresholdNet {
        &self.threshold
    }

    pub fn config(&self) -> &JointConfig {
        &self.config
    }

    /// Records both networks' heads for one observation. `choose` supplies the
    /// evidence sample given (alpha, beta), and the bin given probabilities.
    fn forward_step(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        sample: usize,
        mut evidence_for: impl FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
        mut bin_for: impl FnMut(&[f64]) -> usize,
    ) -> Result<(StepVars, Vec<f64>, usize)> {
        let obs = encode_observation(sample, Encoding::Binary4)?;
        let x = tape.constant(obs.payload);

        let ev = self.evidence.forward(tape, bound, x)?;
        let kappa = evidence_for(tape.value(ev.alpha), tape.value(ev.beta))?;
        let lps = tape.beta_logprob(ev.alpha, ev.beta, &kappa)?;
        let evidence_lp = tape.sum(lps)?;
        let ents = tape.beta_entropy(ev.alpha, ev.beta)?;
        let evidence_ent = tape.sum(ents)?;

        let (probs, threshold_value) = self.threshold.forward(tape, bound, x)?;
        let bin = bin_for(tape.value(probs));
        let (threshold_lp, threshold_ent) = tape.categorical_logprob_entropy(probs, bin)?;

        Ok((
            StepVars {
                evidence_lp,
                evidence_ent,
                evidence_value: ev.value,
                threshold_lp,
                threshold_ent,
                threshold_value,
            },
            kappa,
            bin,
        ))
    }

    fn combined_loss(
        &self,
        tape: &mut Tape,
        evidence: &[Transition],
        threshold: &[Transition],
    ) -> Result<(Var, UpdateStats)> {
        let (le, se) = episode_loss(tape, evidence, &self.config.evidence_learner())?;
        let (lt, st) = episode_loss(tape, threshold, &self.config.threshold_learner())?;
        let total = tape.add(le, lt)?;
        Ok((
            total,
            UpdateStats {
                mean_loss: se.mean_loss + st.mean_loss,
                mean_advantage: 0.5 * (se.mean_advantage + st.mean_advantage),
            },
        ))
    }
}

fn split(vars: &StepVars, reward: f64, terminal: bool) -> (Transition, Transition) {
    (
        Transition::new(
            vars.evidence_lp,
            vars.evidence_value,
            vars.evidence_ent,
            reward,
            terminal,
        ),
        Transition::new(
            vars.threshold_lp,
            vars.threshold_value,
            vars.threshold_ent,
            reward,
            terminal,
        ),
    )
}

impl Agent for JointAgent {
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
        let mut evidence_tr = Vec::new();
        let mut threshold_tr = Vec::new();
        let (step, guess, fired) = loop {
            let (vars, kappa, bin) = {
                let rng = &mut *policy_rng;
                // Evidence is drawn before the threshold, both from the sampling stream.
                let draws = std::cell::RefCell::new(rng);
                self.forward_step(
                    &mut tape,
                    &bound,
                    sample,
                    |a, b| match selection {
                        ActionSelection::Sample => {
                            let mut r = draws.borrow_mut();
                            a.iter()
                                .zip(b)
                                .map(|(&a, &b)| beta_sample(a, b, &mut **r))
                                .collect()
                        }
                        ActionSelection::Greedy => {
                            Ok(a.iter().zip(b).map(|(&a, &b)| a / (a + b)).collect())
                        }
                    },
                    |p| match selection {
                        ActionSelection::Sample => categorical_sample(p, &mut **draws.borrow_mut()),
                        ActionSelection::Greedy => argmax(p),
                    },
                )?
            };
            let tau = self.grid.values()[bin];
            self.accumulator.accumulate(&kappa)?;
            let pref = self.accumulator.preference();
            let guess = pref.decide(tau);
            let fired = guess.map(|g| (pref.rho()[g], tau));
            let step = env::step(&mut state, env_cfg, guess, env_rng)?;

            self.record.samples.push(sample);
            self.record.actions.push(bin);
            self.record.evidence.push(kappa);
            self.record.rewards.push(step.reward);
            self.record.terminal.push(step.terminated);
            let (e, t) = split(&vars, step.reward, step.terminated);
            evidence_tr.push(e);
            threshold_tr.push(t);
            match step.sample {
                Some(next) => sample = next,
                None => break (step, guess, fired),
            }
        };

        let update = if learn {
            link_next_values(&tape, &mut evidence_tr);
            link_next_values(&tape, &mut threshold_tr);
            let (loss, stats) = self.combined_loss(&mut tape, &evidence_tr, &threshold_tr)?;
            apply_update(
                &tape,
                loss,
                &mut self.store,
                &mut self.adam,
                self.config.lr,
                self.config.grad_clip,
            )?;
            Some(stats)
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
        let mut evidence_tr = Vec::new();
        let mut threshold_tr = Vec::new();
        for (i, &sample) in record.samples.iter().enumerate() {
            let kappa = record.evidence[i].clone();
            let bin = record.actions[i];
            let (vars, _, _) =
                self.forward_step(&mut tape, &bound, sample, |_, _| Ok(kappa.clone()), |_| bin)?;
            let (e, t) = split(&vars, record.rewards[i], record.terminal[i]);
            evidence_tr.push(e);
            threshold_tr.push(t);
        }
        link_next_values(&tape, &mut evidence_tr);
        link_next_values(&tape, &mut threshold_tr);
        if let Some(t) = targets {
            t.apply(&mut evidence_tr, 0)?;
            t.apply(&mut threshold_tr, evidence_tr.len())?;
        }
        let mut targets = Targets::collect(&tape, &evidence_tr);
        targets.extend(Targets::collect(&tape, &threshold_tr));
        let (loss, _) = self.combined_loss(&mut tape, &evidence_tr, &threshold_tr)?;
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

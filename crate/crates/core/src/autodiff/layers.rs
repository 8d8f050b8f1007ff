//! Dense layers and the Elman recurrent cell.

use rand::Rng;

use super::params::{ParamId, ParameterStore};
use super::tape::{Bound, Tape, Var};
use crate::Result;

/// Affine map `W x + b` with `W` of shape `outputs x inputs`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            weight: store.add_weight(&format!("{name}.weight"), outputs, inputs, rng)?,
            bias: store.add_bias(&format!("{name}.bias"), outputs)?,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Var> {
        tape.linear(x, params.get(self.weight), params.get(self.bias))
    }
}

/// Elman cell with ReLU: `h' = relu(W_ih x + b_ih + W_hh h + b_hh)`.
#[derive(Debug, Clone, Copy)]
pub struct ElmanCell {
    pub input: Dense,
    pub recurrent: Dense,
}

impl ElmanCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            input: Dense::new(store, &format!("{name}.ih"), inputs, hidden, rng)?,
            recurrent: Dense::new(store, &format!("{name}.hh"), hidden, hidden, rng)?,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent.outputs
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var, h: Var) -> Result<Var> {
        let from_input = self.input.forward(tape, params, x)?;
        let from_hidden = self.recurrent.forward(tape, params, h)?;
        let pre = tape.add(from_input, from_hidden)?;
        tape.relu(pre)
    }
}

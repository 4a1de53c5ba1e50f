use std::time::Duration;

use crate::context::TaskContext;
use crate::error::{Error, Result};

/// Answers match queries for a batch of candidate indices.
pub trait Oracle {
    fn answer(&mut self, ctx: &TaskContext, pairs: &[usize]) -> Result<Vec<bool>>;
}

/// Answers from ground-truth membership, optionally after a fixed think time.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    truth: Vec<bool>,
    think_time: Duration,
}

impl SimulatedOracle {
    pub fn new(ctx: &TaskContext) -> Result<Self> {
        if ctx.truth.is_none() {
            return Err(Error::Oracle("the simulated oracle needs a ground-truth alignment".into()));
        }
        Ok(SimulatedOracle { truth: ctx.truth_mask(), think_time: Duration::ZERO })
    }

    pub fn with_think_time(mut self, think_time: Duration) -> Self {
        self.think_time = think_time;
        self
    }

    pub fn label(&self, pair: usize) -> bool {
        self.truth[pair]
    }
}

impl Oracle for SimulatedOracle {
    fn answer(&mut self, _ctx: &TaskContext, pairs: &[usize]) -> Result<Vec<bool>> {
        if !self.think_time.is_zero() {
            std::thread::sleep(self.think_time);
        }
        pairs
            .iter()
            .map(|&p| self.truth.get(p).copied().ok_or_else(|| Error::Oracle(format!("pair {p} is out of range"))))
            .collect()
    }
}

/// Replays a fixed answer function; used by tests and scripted sessions.
pub struct FnOracle<F>(pub F);

impl<F: FnMut(usize) -> Result<bool>> Oracle for FnOracle<F> {
    fn answer(&mut self, _ctx: &TaskContext, pairs: &[usize]) -> Result<Vec<bool>> {
        pairs.iter().map(|&p| (self.0)(p)).collect()
    }
}

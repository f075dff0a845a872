//! The 1-D goal chain used to compare selection policies with exact entropy.

use rand::Rng;

use super::EnvError;
use crate::entropy::{ConditionalModel, DiscretePmf};

/// Kernel offsets and weights of `q(g'|ĝ)` before boundary truncation.
const KERNEL: [(i64, f64); 5] = [(-2, 0.1), (-1, 0.2), (0, 0.4), (1, 0.2), (2, 0.1)];

/// Goals `0..=2n`; pursuing `ĝ` achieves a goal within two steps of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyChain {
    n: usize,
}

impl Default for ToyChain {
    fn default() -> Self {
        Self { n: 50 }
    }
}

impl ToyChain {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of goals, `2n + 1`.
    pub fn universe(&self) -> usize {
        2 * self.n + 1
    }

    /// The middle goal, where every trial starts.
    pub fn centre(&self) -> usize {
        self.n
    }

    /// `q(·|ĝ)`, truncated at the boundaries and renormalized.
    pub fn row(&self, behavioural: usize) -> Result<DiscretePmf, EnvError> {
        if behavioural >= self.universe() {
            return Err(EnvError::Domain(format!(
                "goal {behavioural} outside 0..={}",
                2 * self.n
            )));
        }
        let hi = self.universe() as i64;
        let weights = KERNEL.iter().filter_map(|&(off, w)| {
            let g = behavioural as i64 + off;
            (0..hi).contains(&g).then_some((g as usize, w))
        });
        DiscretePmf::from_weights(weights).map_err(|e| EnvError::Domain(e.to_string()))
    }

    /// The full conditional model, one row per goal.
    pub fn conditional(&self) -> ConditionalModel {
        let mut q = ConditionalModel::new();
        for g in 0..self.universe() {
            q.insert(g, self.row(g).expect("goal in universe"));
        }
        q
    }

    /// One achieved goal for behavioural goal `ĝ`.
    pub fn sample<R: Rng + ?Sized>(&self, behavioural: usize, rng: &mut R) -> Result<usize, EnvError> {
        Ok(self.row(behavioural)?.sample_with(rng.random::<f64>()))
    }
}

//! The toy goal-chain experiment: exact buffer entropy under four selection
//! policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::entropy::{argmax_set, argmin_set, expected_entropy_gain, ConditionalModel, CountedPmf};
use crate::envs::ToyChain;
use crate::select::Strategy;

use super::metrics::ToyRow;
use super::HarnessError;

/// Score tolerance for tie sets.
const TIE_TOL: f64 = 1e-12;

/// Policies the toy experiment supports.
pub const TOY_POLICIES: [Strategy; 4] = [
    Strategy::Achieved,
    Strategy::Diverse,
    Strategy::Mega,
    Strategy::EgOracle,
];

/// Per-iteration entropy and support size of one trial (`iterations + 1` points).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrace {
    pub entropy: Vec<f64>,
    pub support: Vec<usize>,
}

struct ToyBuffer {
    pmf: CountedPmf,
    items: Vec<usize>,
    support: Vec<usize>,
}

impl ToyBuffer {
    fn new(universe: usize, first: usize) -> Self {
        let mut b = Self {
            pmf: CountedPmf::new(universe),
            items: Vec::new(),
            support: Vec::new(),
        };
        b.add(first);
        b
    }

    fn add(&mut self, g: usize) {
        if self.pmf.count(g) == 0 {
            self.support.push(g);
        }
        self.pmf.add(g).expect("goal inside the chain");
        self.items.push(g);
    }
}

fn pick<R: Rng + ?Sized>(ties: &[usize], rng: &mut R) -> usize {
    ties[rng.random_range(0..ties.len())]
}

/// One behavioural goal for the toy buffer.
fn choose<R: Rng + ?Sized>(
    policy: Strategy,
    buf: &ToyBuffer,
    q: &ConditionalModel,
    rng: &mut R,
) -> Result<usize, HarnessError> {
    Ok(match policy {
        Strategy::Achieved => buf.items[rng.random_range(0..buf.items.len())],
        Strategy::Diverse => buf.support[rng.random_range(0..buf.support.len())],
        Strategy::Mega => {
            let mass: Vec<f64> = buf.support.iter().map(|&g| buf.pmf.count(g) as f64).collect();
            buf.support[pick(&argmin_set(&mass, 0.0), rng)]
        }
        Strategy::EgOracle => {
            let gains = buf
                .support
                .iter()
                .map(|&g| expected_entropy_gain(&buf.pmf, q, g))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            buf.support[pick(&argmax_set(&gains, TIE_TOL), rng)]
        }
        other => {
            return Err(HarnessError::Config(format!(
                "policy '{other}' is not available in the toy experiment"
            )))
        }
    })
}

/// Runs one trial from the buffer `{n}`.
pub fn toy_trial<R: Rng + ?Sized>(
    chain: &ToyChain,
    q: &ConditionalModel,
    policy: Strategy,
    iterations: usize,
    rng: &mut R,
) -> Result<ToyTrace, HarnessError> {
    let mut buf = ToyBuffer::new(chain.universe(), chain.centre());
    let mut trace = ToyTrace {
        entropy: Vec::with_capacity(iterations + 1),
        support: Vec::with_capacity(iterations + 1),
    };
    trace.entropy.push(buf.pmf.entropy());
    trace.support.push(buf.support.len());
    for _ in 0..iterations {
        let g_hat = choose(policy, &buf, q, rng)?;
        let g = chain.sample(g_hat, rng)?;
        buf.add(g);
        trace.entropy.push(buf.pmf.entropy());
        trace.support.push(buf.support.len());
    }
    Ok(trace)
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn trial_rng(seed: u64, policy: Strategy, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((policy as u64) << 32) | trial as u64);
    rng
}

/// Runs `trials` trials per policy and averages the traces.
///
/// Rows are grouped by policy (in the given order), iterations `0..=iterations`.
/// The standard deviation is over trials.
pub fn run_toy(
    n: usize,
    policies: &[Strategy],
    iterations: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ToyRow>, HarnessError> {
    if n == 0 || trials == 0 {
        return Err(HarnessError::Config("toy n and trials must be positive".into()));
    }
    if let Some(bad) = policies.iter().find(|p| !TOY_POLICIES.contains(p)) {
        return Err(HarnessError::Config(format!(
            "policy '{bad}' is not available in the toy experiment"
        )));
    }
    let chain = ToyChain::new(n);
    let q = chain.conditional();
    let mut rows = Vec::with_capacity(policies.len() * (iterations + 1));
    for &policy in policies {
        let traces = (0..trials)
            .into_par_iter()
            .map(|t| toy_trial(&chain, &q, policy, iterations, &mut trial_rng(seed, policy, t)))
            .collect::<Result<Vec<_>, _>>()?;
        for it in 0..=iterations {
            let (mean_entropy, std_entropy) = mean_std(traces.iter().map(|t| t.entropy[it]));
            let (mean_support, std_support) = mean_std(traces.iter().map(|t| t.support[it] as f64));
            rows.push(ToyRow {
                iteration: it,
                policy: policy.to_string(),
                mean_entropy,
                std_entropy,
                mean_support,
                std_support,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_row_is_a_point_mass() {
        let rows = run_toy(5, &TOY_POLICIES, 3, 4, 0).unwrap();
        assert_eq!(rows.len(), 16);
        for r in rows.iter().filter(|r| r.iteration == 0) {
            assert_eq!((r.mean_entropy, r.std_entropy, r.mean_support), (0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn maze_only_strategies_are_rejected() {
        assert!(run_toy(5, &[Strategy::MinQ], 3, 2, 0).is_err());
        assert!(run_toy(5, &[Strategy::Mega], 3, 0, 0).is_err());
    }

    #[test]
    fn trials_are_seed_deterministic() {
        let a = run_toy(10, &[Strategy::Mega, Strategy::Achieved], 50, 6, 3).unwrap();
        let b = run_toy(10, &[Strategy::Mega, Strategy::Achieved], 50, 6, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn entropy_never_exceeds_the_uniform_bound() {
        let chain = ToyChain::new(4);
        let q = chain.conditional();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = toy_trial(&chain, &q, Strategy::EgOracle, 300, &mut rng).unwrap();
        let bound = (chain.universe() as f64).ln();
        assert!(t.entropy.iter().all(|&h| h <= bound + 1e-12));
        assert_eq!(*t.support.last().unwrap(), chain.universe());
    }
}

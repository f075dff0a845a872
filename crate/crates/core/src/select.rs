//! Behavioural-goal selection: MEGA, OMEGA and the baseline strategies,
//! sharing candidate sampling and the Q-value cutoff.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::density::{DensityError, DensityModel, KL_MAX};
use crate::entropy::{expected_entropy_gain, ConditionalModel, CountedPmf, MathError};
use crate::goal::{Goal, GoalBuffer};

pub const DEFAULT_NUM_CANDIDATES: usize = 100;
pub const DEFAULT_OMEGA_BIAS: f64 = -3.0;
pub const INITIAL_CUTOFF: f64 = -3.0;
pub const CUTOFF_WINDOW: usize = 10;
pub const SUCCESS_HISTORY_LEN: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("achieved-goal buffer is empty")]
    EmptyBuffer,
    #[error("strategy needs a density model")]
    MissingDensity,
    #[error("strategy needs extra input: {0}")]
    MissingExtra(&'static str),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// The registered goal-selection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Desired,
    Achieved,
    Diverse,
    MinQ,
    GoalDisc,
    Mega,
    Omega,
    EgOracle,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Desired,
        Strategy::Achieved,
        Strategy::Diverse,
        Strategy::MinQ,
        Strategy::GoalDisc,
        Strategy::Mega,
        Strategy::Omega,
        Strategy::EgOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Desired => "desired",
            Strategy::Achieved => "achieved",
            Strategy::Diverse => "diverse",
            Strategy::MinQ => "minq",
            Strategy::GoalDisc => "goaldisc",
            Strategy::Mega => "mega",
            Strategy::Omega => "omega",
            Strategy::EgOracle => "eg-oracle",
        }
    }

    /// Whether the strategy ranks candidates by estimated density.
    pub fn needs_density(self) -> bool {
        matches!(self, Strategy::Diverse | Strategy::Mega | Strategy::Omega)
    }

    /// Whether selection filters candidates through the Q cutoff.
    pub fn uses_cutoff(self) -> bool {
        !matches!(self, Strategy::Desired | Strategy::GoalDisc | Strategy::EgOracle)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
                format!("unknown strategy '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// A candidate behavioural goal with its density and value annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<G> {
    pub goal: G,
    /// `ln p̂_ag(goal)`; NaN when no density model was supplied.
    pub log_density: f64,
    /// `V(s_0, goal)` under the current agent.
    pub q: f64,
}

/// Inputs shared by every selection strategy.
pub struct SelectContext<'a, G, R: ?Sized> {
    pub buffer: &'a GoalBuffer<G>,
    pub density: Option<&'a DensityModel>,
    /// Value of pursuing a goal from the episode's start state.
    pub q_values: &'a dyn Fn(&G) -> f64,
    pub desired_goal: G,
    pub rng: &'a mut R,
    pub num_candidates: usize,
}

/// The outcome of one selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<G> {
    pub goal: G,
    /// OMEGA's mixing weight, only for OMEGA.
    pub alpha: Option<f64>,
    /// Lowest Q among the sampled candidates, when any were sampled.
    pub min_candidate_q: Option<f64>,
}

impl<G> Selection<G> {
    fn plain(goal: G) -> Self {
        Self {
            goal,
            alpha: None,
            min_candidate_q: None,
        }
    }
}

/// Draws `num_candidates` goals uniformly (with replacement) from the buffer.
pub fn sample_candidates<G: Goal, R: Rng + ?Sized>(
    ctx: &mut SelectContext<'_, G, R>,
) -> Result<Vec<Candidate<G>>, SelectError> {
    if ctx.buffer.is_empty() {
        return Err(SelectError::EmptyBuffer);
    }
    let goals = ctx.buffer.sample_n(ctx.num_candidates.max(1), ctx.rng);
    goals
        .into_iter()
        .map(|goal| {
            let log_density = match ctx.density {
                Some(m) => m.log_density(&goal.coords())?,
                None => f64::NAN,
            };
            let q = (ctx.q_values)(&goal);
            Ok(Candidate { goal, log_density, q })
        })
        .collect()
}

fn min_q<G>(candidates: &[Candidate<G>]) -> Option<f64> {
    candidates.iter().map(|c| c.q).reduce(f64::min)
}

/// Keeps candidates with `Q ≥ cutoff`; if none survive, keeps only the one
/// with the largest Q (first on ties).
pub fn apply_cutoff<G: Clone>(candidates: &[Candidate<G>], cutoff: f64) -> Vec<Candidate<G>> {
    let kept: Vec<Candidate<G>> = candidates.iter().filter(|c| c.q >= cutoff).cloned().collect();
    if !kept.is_empty() || candidates.is_empty() {
        return kept;
    }
    let mut best = &candidates[0];
    for c in &candidates[1..] {
        if c.q > best.q {
            best = c;
        }
    }
    vec![best.clone()]
}

/// The adaptive achievability threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffState {
    cutoff: f64,
    window: VecDeque<bool>,
    window_len: usize,
    step_size: f64,
    upper_threshold: f64,
    lower_threshold: f64,
}

impl Default for CutoffState {
    fn default() -> Self {
        Self::new(INITIAL_CUTOFF)
    }
}

impl CutoffState {
    pub fn new(initial: f64) -> Self {
        Self {
            cutoff: initial,
            window: VecDeque::with_capacity(CUTOFF_WINDOW),
            window_len: CUTOFF_WINDOW,
            step_size: 1.0,
            upper_threshold: 0.7,
            lower_threshold: 0.3,
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn window(&self) -> impl Iterator<Item = bool> + '_ {
        self.window.iter().copied()
    }

    /// Fraction of intrinsic successes in the window (0 when empty).
    pub fn success_rate(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|&&s| s).count() as f64 / self.window.len() as f64
    }

    /// Records one episode's intrinsic success and adapts the cutoff once the
    /// window is full.
    ///
    /// A decrease never takes the cutoff below `min_candidate_q` (nor raises
    /// it when that minimum is already above the current cutoff).
    pub fn update(&mut self, episode_success: bool, min_candidate_q: Option<f64>) {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(episode_success);
        if self.window.len() < self.window_len {
            return;
        }
        let rate = self.success_rate();
        if rate > self.upper_threshold {
            let lowered = self.cutoff - self.step_size;
            self.cutoff = match min_candidate_q {
                Some(m) => lowered.max(m.min(self.cutoff)),
                None => lowered,
            };
        } else if rate < self.lower_threshold {
            self.cutoff += self.step_size;
        }
    }
}

/// Pure-function form of [`CutoffState::update`].
pub fn update_cutoff(
    state: &CutoffState,
    episode_success: bool,
    min_candidate_q: Option<f64>,
) -> CutoffState {
    let mut next = state.clone();
    next.update(episode_success, min_candidate_q);
    next
}

/// First index of the smallest log-density.
fn argmin_density<G>(candidates: &[Candidate<G>]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.log_density < candidates[best].log_density {
            best = i;
        }
    }
    best
}

/// MEGA: among cutoff survivors, the candidate of minimal estimated density.
pub fn select_mega<G: Goal, R: Rng + ?Sized>(
    ctx: &mut SelectContext<'_, G, R>,
    cutoff: &CutoffState,
) -> Result<Selection<G>, SelectError> {
    if ctx.density.is_none() {
        return Err(SelectError::MissingDensity);
    }
    let candidates = sample_candidates(ctx)?;
    let kept = apply_cutoff(&candidates, cutoff.cutoff());
    let best = argmin_density(&kept);
    Ok(Selection {
        goal: kept[best].goal.clone(),
        alpha: None,
        min_candidate_q: min_q(&candidates),
    })
}

/// `α = 1/max(b + KL, 1)`, and exactly 0 when the KL estimate sits at the clamp.
pub fn omega_alpha(kl_estimate: f64, b: f64) -> f64 {
    if kl_estimate >= KL_MAX {
        0.0
    } else {
        1.0 / (b + kl_estimate).max(1.0)
    }
}

/// OMEGA: the desired goal with probability α, otherwise MEGA.
pub fn select_omega<G: Goal, R: Rng + ?Sized>(
    ctx: &mut SelectContext<'_, G, R>,
    cutoff: &CutoffState,
    kl_estimate: f64,
    b: f64,
) -> Result<Selection<G>, SelectError> {
    let alpha = omega_alpha(kl_estimate, b);
    let mut out = if ctx.rng.random::<f64>() < alpha || ctx.buffer.is_empty() {
        Selection::plain(ctx.desired_goal.clone())
    } else {
        select_mega(ctx, cutoff)?
    };
    out.alpha = Some(alpha);
    Ok(out)
}

/// Ring of the most recent `(goal, achieved)` episode records with
/// Laplace-smoothed success frequencies per goal.
#[derive(Debug, Clone)]
pub struct SuccessHistory<G> {
    records: VecDeque<(G, bool)>,
    capacity: usize,
}

impl<G: PartialEq> Default for SuccessHistory<G> {
    fn default() -> Self {
        Self::with_capacity(SUCCESS_HISTORY_LEN)
    }
}

impl<G: PartialEq> SuccessHistory<G> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            records: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record, evicting the oldest when full.
    pub fn record(&mut self, goal: G, achieved: bool) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back((goal, achieved));
    }

    /// `(successes + 1) / (attempts + 2)` over the window.
    pub fn success_rate(&self, goal: &G) -> f64 {
        let (mut n, mut s) = (0usize, 0usize);
        for (g, ok) in &self.records {
            if g == goal {
                n += 1;
                s += *ok as usize;
            }
        }
        (s as f64 + 1.0) / (n as f64 + 2.0)
    }
}

/// Pure-function form of [`SuccessHistory::record`].
pub fn success_history_update<G: PartialEq + Clone>(
    history: &SuccessHistory<G>,
    behavioural_goal: G,
    achieved: bool,
) -> SuccessHistory<G> {
    let mut next = history.clone();
    next.record(behavioural_goal, achieved);
    next
}

/// Exact entropy-gain scoring: the current goal counts, the true conditional
/// and a map from goals to their ids.
pub struct EntropyOracle<'a, G> {
    pub pmf: &'a CountedPmf,
    pub conditional: &'a ConditionalModel,
    pub goal_id: fn(&G) -> usize,
}

/// Strategy-specific inputs beyond the shared context.
pub struct SelectExtras<'a, G> {
    pub success_history: Option<&'a SuccessHistory<G>>,
    pub oracle: Option<EntropyOracle<'a, G>>,
}

impl<G> Default for SelectExtras<'_, G> {
    fn default() -> Self {
        Self {
            success_history: None,
            oracle: None,
        }
    }
}

/// The non-MEGA strategies (MEGA and OMEGA are dispatched too, for convenience;
/// OMEGA then needs a KL estimate and is treated with α from `kl_estimate`).
pub fn select_baseline<G: Goal, R: Rng + ?Sized>(
    strategy: Strategy,
    ctx: &mut SelectContext<'_, G, R>,
    cutoff: &CutoffState,
    extras: &SelectExtras<'_, G>,
) -> Result<Selection<G>, SelectError> {
    match strategy {
        Strategy::Desired => Ok(Selection::plain(ctx.desired_goal.clone())),
        Strategy::Mega => select_mega(ctx, cutoff),
        Strategy::Omega => Err(SelectError::MissingExtra("KL estimate (use select_omega)")),
        Strategy::Achieved => {
            let candidates = sample_candidates(ctx)?;
            let kept = apply_cutoff(&candidates, cutoff.cutoff());
            let i = ctx.rng.random_range(0..kept.len());
            Ok(Selection {
                goal: kept[i].goal.clone(),
                alpha: None,
                min_candidate_q: min_q(&candidates),
            })
        }
        Strategy::Diverse => {
            if ctx.density.is_none() {
                return Err(SelectError::MissingDensity);
            }
            let candidates = sample_candidates(ctx)?;
            let kept = apply_cutoff(&candidates, cutoff.cutoff());
            let i = sample_inverse_density(&kept, ctx.rng);
            Ok(Selection {
                goal: kept[i].goal.clone(),
                alpha: None,
                min_candidate_q: min_q(&candidates),
            })
        }
        Strategy::MinQ => {
            let candidates = sample_candidates(ctx)?;
            let kept = apply_cutoff(&candidates, cutoff.cutoff());
            let mut best = 0;
            for (i, c) in kept.iter().enumerate().skip(1) {
                if c.q < kept[best].q {
                    best = i;
                }
            }
            Ok(Selection {
                goal: kept[best].goal.clone(),
                alpha: None,
                min_candidate_q: min_q(&candidates),
            })
        }
        Strategy::GoalDisc => {
            let history = extras
                .success_history
                .ok_or(SelectError::MissingExtra("success history"))?;
            let candidates = sample_candidates(ctx)?;
            let mut best = 0;
            let mut best_gap = f64::INFINITY;
            for (i, c) in candidates.iter().enumerate() {
                let gap = (history.success_rate(&c.goal) - 0.5).abs();
                if gap < best_gap {
                    best = i;
                    best_gap = gap;
                }
            }
            Ok(Selection {
                goal: candidates[best].goal.clone(),
                alpha: None,
                min_candidate_q: min_q(&candidates),
            })
        }
        Strategy::EgOracle => {
            let oracle = extras
                .oracle
                .as_ref()
                .ok_or(SelectError::MissingExtra("goal counts and conditional model"))?;
            let candidates = sample_candidates(ctx)?;
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, c) in candidates.iter().enumerate() {
                let score = expected_entropy_gain(oracle.pmf, oracle.conditional, (oracle.goal_id)(&c.goal))?;
                if score > best_score {
                    best = i;
                    best_score = score;
                }
            }
            Ok(Selection {
                goal: candidates[best].goal.clone(),
                alpha: None,
                min_candidate_q: min_q(&candidates),
            })
        }
    }
}

/// Normalized `1/p̂` weights of the candidates.
pub fn inverse_density_weights<G>(candidates: &[Candidate<G>]) -> Vec<f64> {
    let lo = candidates
        .iter()
        .map(|c| c.log_density)
        .fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = candidates.iter().map(|c| (lo - c.log_density).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Draws a candidate index with probability proportional to `1/p̂`.
pub fn sample_inverse_density<G, R: Rng + ?Sized>(candidates: &[Candidate<G>], rng: &mut R) -> usize {
    let w = inverse_density_weights(candidates);
    match WeightedIndex::new(&w) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..candidates.len()),
    }
}

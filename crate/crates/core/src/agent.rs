//! Goal-conditioned tabular Q-learning with ε-greedy exploration and the
//! go-exploration bonus.

use rand::Rng;

pub const DEFAULT_GAMMA: f64 = 0.98;
pub const DEFAULT_LEARNING_RATE: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_GO_BONUS: f64 = 0.1;

/// Dense `Q(s, a, g)` over integer state, action and goal ids.
#[derive(Debug, Clone)]
pub struct GoalTable {
    n_states: usize,
    n_actions: usize,
    n_goals: usize,
    gamma: f64,
    learning_rate: f64,
    values: Vec<f64>,
}

/// One (relabeled) transition in table coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Update {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub goal: usize,
    pub reward: f64,
}

impl GoalTable {
    /// All values start at 0.
    pub fn new(n_states: usize, n_actions: usize, n_goals: usize, gamma: f64, learning_rate: f64) -> Self {
        Self::with_initial_value(n_states, n_actions, n_goals, gamma, learning_rate, 0.0)
    }

    /// All values start at `initial`, clamped into `[−1/(1−γ), 0]`.
    pub fn with_initial_value(
        n_states: usize,
        n_actions: usize,
        n_goals: usize,
        gamma: f64,
        learning_rate: f64,
        initial: f64,
    ) -> Self {
        assert!(gamma > 0.0 && gamma < 1.0, "gamma must be in (0, 1)");
        assert!(
            learning_rate > 0.0 && learning_rate <= 1.0,
            "learning rate must be in (0, 1]"
        );
        assert!(n_actions > 0, "need at least one action");
        Self {
            n_states,
            n_actions,
            n_goals,
            gamma,
            learning_rate,
            values: vec![initial.clamp(-1.0 / (1.0 - gamma), 0.0); n_states * n_actions * n_goals],
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_goals(&self) -> usize {
        self.n_goals
    }

    /// Lower clip bound `−1/(1−γ)`.
    pub fn min_value(&self) -> f64 {
        -1.0 / (1.0 - self.gamma)
    }

    fn offset(&self, state: usize, goal: usize) -> usize {
        debug_assert!(state < self.n_states && goal < self.n_goals);
        (state * self.n_goals + goal) * self.n_actions
    }

    /// The action values of one `(state, goal)` slice.
    pub fn slice(&self, state: usize, goal: usize) -> &[f64] {
        let o = self.offset(state, goal);
        &self.values[o..o + self.n_actions]
    }

    pub fn slice_mut(&mut self, state: usize, goal: usize) -> &mut [f64] {
        let o = self.offset(state, goal);
        &mut self.values[o..o + self.n_actions]
    }

    pub fn value(&self, state: usize, action: usize, goal: usize) -> f64 {
        self.slice(state, goal)[action]
    }

    /// `max_a Q(s, a, g)`.
    pub fn max_value(&self, state: usize, goal: usize) -> f64 {
        self.slice(state, goal)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest action id.
    pub fn greedy(&self, state: usize, goal: usize) -> usize {
        greedy_index(self.slice(state, goal))
    }

    /// Applies clipped Q-learning updates in order.
    ///
    /// Target: `clamp(r + γ max_a' Q(s', a', g), −1/(1−γ), 0)`. There is no
    /// terminal cut: reaching a goal does not end the episode.
    pub fn optimize_batch(&mut self, batch: &[Update]) {
        let lo = self.min_value();
        for u in batch {
            let target = (u.reward + self.gamma * self.max_value(u.next_state, u.goal)).clamp(lo, 0.0);
            let lr = self.learning_rate;
            let q = &mut self.slice_mut(u.state, u.goal)[u.action];
            *q = (*q + lr * (target - *q)).clamp(lo, 0.0);
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy exploration with the per-episode go-exploration bonus.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState {
    base_epsilon: f64,
    go_bonus: f64,
    current_epsilon: f64,
    achievements: u32,
}

impl Default for ExplorationState {
    fn default() -> Self {
        Self::new(DEFAULT_EPSILON, DEFAULT_GO_BONUS)
    }
}

impl ExplorationState {
    pub fn new(base_epsilon: f64, go_bonus: f64) -> Self {
        let base_epsilon = base_epsilon.clamp(0.0, 1.0);
        Self {
            base_epsilon,
            go_bonus: go_bonus.max(0.0),
            current_epsilon: base_epsilon,
            achievements: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.current_epsilon
    }

    pub fn achievements(&self) -> u32 {
        self.achievements
    }

    /// Counts one more achievement of the behavioural goal when `achieved_now`.
    pub fn register_achievement(&mut self, achieved_now: bool) {
        if achieved_now {
            self.achievements += 1;
            self.current_epsilon =
                (self.base_epsilon + self.go_bonus * self.achievements as f64).min(1.0);
        }
    }

    /// Episode start: back to the base rate.
    pub fn reset(&mut self) {
        self.achievements = 0;
        self.current_epsilon = self.base_epsilon;
    }
}

/// ε-greedy action for `(state, goal)`.
pub fn act<R: Rng + ?Sized>(
    table: &GoalTable,
    state: usize,
    goal: usize,
    exploration: &ExplorationState,
    rng: &mut R,
) -> usize {
    if rng.random::<f64>() < exploration.epsilon() {
        rng.random_range(0..table.n_actions())
    } else {
        table.greedy(state, goal)
    }
}

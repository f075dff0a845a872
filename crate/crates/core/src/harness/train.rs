//! The train loop on the maze environments and greedy evaluation.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{act, ExplorationState, GoalTable, Update};
use crate::density::{estimate_entropy, estimate_kl, fit_kde, DensityModel, KL_MAX};
use crate::envs::{Action, Cell, GridMaze};
use crate::goal::Goal;
use crate::replay::{
    relabel_future, relabel_rfaab, store_episode, Episode, GoalBuffers, Step, TransitionStore,
};
use crate::select::{
    omega_alpha, select_baseline, select_omega, CutoffState, SelectContext, SelectExtras,
    Selection, Strategy, SuccessHistory,
};

use super::config::RunConfig;
use super::metrics::MetricRecord;
use super::HarnessError;

/// Success tolerance: goals are cells, so success is an exact match.
pub const CELL_TOLERANCE: f64 = 0.5;

/// RNG stream ids derived from the run seed.
const STREAM_EVAL: u64 = 1;
const STREAM_METRICS: u64 = 2;
const STREAM_DENSITY: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Totals of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    pub episodes: usize,
    pub transitions: usize,
    pub achieved_goals: usize,
    pub final_success: f64,
}

/// Fraction of `n_episodes` greedy episodes that visit their desired goal.
pub fn evaluate<R: Rng + ?Sized>(
    table: &GoalTable,
    maze: &GridMaze,
    n_episodes: usize,
    rng: &mut R,
) -> f64 {
    if n_episodes == 0 {
        warn!("evaluation with zero episodes; reporting success 0");
        return 0.0;
    }
    let mut successes = 0;
    for _ in 0..n_episodes {
        let (mut s, goal) = maze.reset(rng);
        let g = maze.cell_id(goal);
        for _ in 0..maze.horizon() {
            let a = table.greedy(maze.cell_id(s), g);
            s = maze.step(s, Action::ALL[a]);
            if maze.achieved_goal(s) == goal {
                successes += 1;
                break;
            }
        }
    }
    successes as f64 / n_episodes as f64
}

fn coords(c: Cell) -> [f64; 2] {
    [c.x as f64, c.y as f64]
}

fn runtime(episode: usize, step: usize, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime {
        episode,
        step,
        message: e.to_string(),
    }
}

/// `D_KL(p_dg || p̂_ag)` for a uniform desired region of unit cells.
fn desired_kl<R: Rng + ?Sized>(
    model: &DensityModel,
    region: &[Cell],
    n_samples: usize,
    rng: &mut R,
) -> Result<f64, crate::density::DensityError> {
    // uniform density 1/|region| over unit cells, expressed in normalized space
    let log_dg = model.norm_std().iter().map(|s| s.ln()).sum::<f64>() - (region.len() as f64).ln();
    estimate_kl(
        model,
        |r: &mut R| region[r.random_range(0..region.len())].coords(),
        |_| log_dg,
        n_samples,
        rng,
    )
}

/// Entropy metric: a KDE fit to the buffer, evaluated on buffer samples.
fn buffer_entropy<R: Rng + ?Sized>(
    points: &[[f64; 2]],
    config: &RunConfig,
    rng: &mut R,
) -> Result<f64, crate::density::DensityError> {
    let model = fit_kde(points, config.bandwidth, config.kernel, rng)?;
    let eval: Vec<[f64; 2]> = (0..config.entropy_samples)
        .map(|_| points[rng.random_range(0..points.len())])
        .collect();
    estimate_entropy(&model, &eval)
}

/// Runs one training job, handing every metric record to `on_record` as it is produced.
pub fn train<F>(config: &RunConfig, mut on_record: F) -> Result<TrainSummary, HarnessError>
where
    F: FnMut(&MetricRecord) -> Result<(), HarnessError>,
{
    let maze = config.validate()?;
    let n_cells = maze.num_cells();
    let mut table = GoalTable::with_initial_value(
        n_cells,
        Action::COUNT,
        n_cells,
        config.gamma,
        config.learning_rate,
        config.initial_q(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval_rng = stream(config.seed, STREAM_EVAL);
    let mut metric_rng = stream(config.seed, STREAM_METRICS);
    let mut density_rng = stream(config.seed, STREAM_DENSITY);

    let mut exploration = ExplorationState::new(config.epsilon, config.go_bonus);
    let mut cutoff = CutoffState::default();
    let mut history: SuccessHistory<Cell> = SuccessHistory::new();
    let mut store: TransitionStore<Cell, Cell> = match config.replay_capacity {
        Some(cap) => TransitionStore::with_capacity(cap),
        None => TransitionStore::new(),
    };
    let mut buffers: GoalBuffers<Cell> = GoalBuffers::default();
    let mut achieved_points: Vec<[f64; 2]> = Vec::new();

    let strategy = config.strategy;
    let total_steps = config.steps();
    let mut step = 0usize;
    let mut episode = 0usize;
    let mut kl = KL_MAX;
    let mut last_min_q: Option<f64> = None;
    let mut intrinsic_since_eval = 0usize;
    let mut episodes_since_eval = 0usize;
    let mut final_success = 0.0;
    let mut updates: Vec<Update> = Vec::with_capacity(config.batch_size);

    while step < total_steps {
        let (start, desired) = maze.reset(&mut rng);

        let density = if strategy.needs_density() && !achieved_points.is_empty() {
            let model = fit_kde(&achieved_points, config.bandwidth, config.kernel, &mut density_rng)
                .map_err(|e| runtime(episode, step, e))?;
            Some(model)
        } else {
            None
        };
        if strategy == Strategy::Omega {
            kl = match &density {
                Some(m) => desired_kl(m, maze.desired_region(), config.kl_samples, &mut density_rng)
                    .map_err(|e| runtime(episode, step, e))?,
                None => KL_MAX,
            };
        }

        let start_id = maze.cell_id(start);
        let selection = if buffers.achieved.is_empty() {
            Selection {
                goal: desired,
                alpha: None,
                min_candidate_q: None,
            }
        } else {
            let q_values = |g: &Cell| table.max_value(start_id, maze.cell_id(*g));
            let mut ctx = SelectContext {
                buffer: &buffers.achieved,
                density: density.as_ref(),
                q_values: &q_values,
                desired_goal: desired,
                rng: &mut rng,
                num_candidates: config.num_candidates,
            };
            let extras = SelectExtras {
                success_history: Some(&history),
                oracle: None,
            };
            let out = match strategy {
                Strategy::Omega => select_omega(&mut ctx, &cutoff, kl, config.omega_bias),
                s => select_baseline(s, &mut ctx, &cutoff, &extras),
            };
            out.map_err(|e| runtime(episode, step, e))?
        };
        let behavioural = selection.goal;
        let goal_id = maze.cell_id(behavioural);

        exploration.reset();
        let mut steps = Vec::with_capacity(maze.horizon());
        let mut intrinsic = false;
        let mut s = start;
        for _ in 0..maze.horizon() {
            let a = if step < config.warmup_random_steps {
                rng.random_range(0..Action::COUNT)
            } else {
                act(&table, maze.cell_id(s), goal_id, &exploration, &mut rng)
            };
            let next = maze.step(s, Action::ALL[a]);
            let achieved = maze.achieved_goal(next);
            let hit = achieved == behavioural;
            intrinsic |= hit;
            exploration.register_achievement(hit);
            steps.push(Step {
                state: s,
                action: a,
                next_state: next,
                achieved,
            });
            s = next;
            step += 1;

            if step >= config.warmup_random_steps && !store.is_empty() {
                let idx = store.sample_indices(config.batch_size, &mut rng);
                let batch = if step <= config.warmup_relabel_steps {
                    relabel_future(&store, &idx, CELL_TOLERANCE, &mut rng)
                } else {
                    relabel_rfaab(&store, &idx, config.rfaab, &buffers, CELL_TOLERANCE, &mut rng)
                };
                updates.clear();
                updates.extend(batch.iter().map(|r| Update {
                    state: maze.cell_id(r.state),
                    action: r.action,
                    next_state: maze.cell_id(r.next_state),
                    goal: maze.cell_id(r.goal),
                    reward: r.reward,
                }));
                table.optimize_batch(&updates);
            }
        }

        let ep = Episode {
            behavioural_goal: behavioural,
            desired_goal: desired,
            steps,
        };
        achieved_points.extend(ep.steps.iter().map(|st| coords(st.achieved)));
        store_episode(&ep, &mut buffers, &mut store);
        if strategy.uses_cutoff() {
            // episodes pursuing the desired goal sample no candidates; clamp
            // against the most recent candidate set instead
            last_min_q = selection.min_candidate_q.or(last_min_q);
            cutoff.update(intrinsic, last_min_q);
        }
        if strategy == Strategy::GoalDisc {
            history.record(behavioural, intrinsic);
        }
        episode += 1;
        episodes_since_eval += 1;
        intrinsic_since_eval += intrinsic as usize;

        let last = step >= total_steps;
        if episode % config.episodes_per_eval == 0 || (last && episodes_since_eval > 0) {
            let test_success = evaluate(&table, &maze, config.eval_episodes, &mut eval_rng);
            let entropy = buffer_entropy(&achieved_points, config, &mut metric_rng)
                .map_err(|e| runtime(episode, step, e))?;
            let record = MetricRecord {
                step,
                test_success,
                entropy,
                alpha: (strategy == Strategy::Omega).then(|| omega_alpha(kl, config.omega_bias)),
                intrinsic_success: intrinsic_since_eval as f64 / episodes_since_eval as f64,
                cutoff: cutoff.cutoff(),
            };
            debug!(
                "{} {} seed {}: step {step} success {test_success} entropy {entropy:.3}",
                config.env, strategy, config.seed
            );
            on_record(&record)?;
            final_success = test_success;
            intrinsic_since_eval = 0;
            episodes_since_eval = 0;
        }
    }

    Ok(TrainSummary {
        steps: step,
        episodes: episode,
        transitions: store.len(),
        achieved_goals: buffers.achieved.len(),
        final_success,
    })
}

/// Convenience: trains and collects every record.
pub fn train_collect(config: &RunConfig) -> Result<(Vec<MetricRecord>, TrainSummary), HarnessError> {
    let mut records = Vec::new();
    let summary = train(config, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok((records, summary))
}

//! Path extraction on top of the probability flows.
//!
//! [`greedy_plan`] runs the greedy loop: precompute the backward flow, instantiate
//! the start, then alternate forward step, posterior and argmax, re-instantiating
//! the forward message at the chosen state-action pair. [`sample_path`] draws from
//! the posterior instead of taking its argmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PlanError, Result};
use crate::flow::{
    backward_chain, forward_final, forward_step, min_time_from, posterior, posterior_final, MessageKind,
    MessageTensor, StateMarginal,
};
use crate::grid::{
    action_matrix, build_kernel, default_masks, Action, ActionMatrix, Cell, GridMap, TransitionKernel,
    DEFAULT_SHARPNESS, N_ACTIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// Fixed number of time slices.
    Fixed(usize),
    /// Minimum feasible horizon, searched up to `t_max` slices.
    AutoMin { t_max: usize },
}

/// What to do when the posterior vanishes at some time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullPolicy {
    Abort,
    /// Stay on the current cell with the still action.
    Wait,
    /// Draw the next state-action pair from the forward message.
    SampleForward,
}

impl NullPolicy {
    pub fn name(self) -> &'static str {
        match self {
            NullPolicy::Abort => "abort",
            NullPolicy::Wait => "wait",
            NullPolicy::SampleForward => "sample",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "abort" => Some(NullPolicy::Abort),
            "wait" => Some(NullPolicy::Wait),
            "sample" => Some(NullPolicy::SampleForward),
            _ => None,
        }
    }
}

/// A single-agent planning problem.
///
/// `start_action` is the heading held before `t = 1`; the first action is drawn
/// from its row of the action matrix, so with a uniform matrix the initial action
/// distribution is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: GridMap,
    pub start: Cell,
    pub start_action: Action,
    pub goals: Vec<(Cell, f64)>,
    pub horizon: Horizon,
    pub sharpness: f64,
    pub stiffness: f64,
    pub seed: u64,
    pub policy: NullPolicy,
    pub goal_stop: bool,
}

impl Scenario {
    /// Defaults: κ = 0.8, λ = 0, still heading, minimum-time horizon, abort policy.
    pub fn new(map: GridMap, start: Cell, goals: Vec<(Cell, f64)>) -> Result<Self> {
        let t_max = 4 * map.n_cells() + 1;
        let mut s = Scenario {
            map,
            start,
            start_action: Action::Still,
            goals,
            horizon: Horizon::AutoMin { t_max },
            sharpness: DEFAULT_SHARPNESS,
            stiffness: 0.0,
            seed: 0,
            policy: NullPolicy::Abort,
            goal_stop: true,
        };
        s.validate()?;
        let total: f64 = s.goals.iter().map(|g| g.1).sum();
        for g in &mut s.goals {
            g.1 /= total;
        }
        Ok(s)
    }

    pub fn single_goal(map: GridMap, start: Cell, goal: Cell) -> Result<Self> {
        Self::new(map, start, vec![(goal, 1.0)])
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_policy(mut self, policy: NullPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_kernel_params(mut self, sharpness: f64, stiffness: f64) -> Self {
        self.sharpness = sharpness;
        self.stiffness = stiffness;
        self
    }

    pub fn with_start_action(mut self, action: Action) -> Self {
        self.start_action = action;
        self
    }

    pub fn with_goal_stop(mut self, on: bool) -> Self {
        self.goal_stop = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.map.is_free(self.start) {
            return Err(PlanError::Parameter(format!("start {} is not a free cell", self.start)));
        }
        goal_marginal(&self.map, &self.goals)?;
        Ok(())
    }

    pub fn is_goal(&self, cell: Cell) -> bool {
        self.goals.iter().any(|g| g.0 == cell)
    }

    /// Kernel, action matrix and terminal goal distribution for this scenario.
    pub fn model(&self) -> Result<PlanModel> {
        self.validate()?;
        let kernel = build_kernel(&self.map, &default_masks(self.sharpness)?)?;
        let pa = action_matrix(self.stiffness)?;
        let goal = goal_marginal(&self.map, &self.goals)?;
        Ok(PlanModel { kernel, pa, goal })
    }

    /// Initial action distribution `π(a_1)`.
    pub fn start_actions(&self, pa: &ActionMatrix) -> [f64; N_ACTIONS] {
        pa.row(self.start_action)
    }

    /// Resolve the horizon, searching the minimum time when asked to.
    pub fn resolve_horizon(&self, model: &PlanModel) -> Result<usize> {
        match self.horizon {
            Horizon::Fixed(t) if t >= 1 => Ok(t),
            Horizon::Fixed(t) => Err(PlanError::Parameter(format!("horizon {t} must be at least 1"))),
            Horizon::AutoMin { t_max } => min_time_from(
                &model.kernel,
                &model.pa,
                self.start,
                &self.start_actions(&model.pa),
                &model.goal,
                t_max,
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanModel {
    pub kernel: TransitionKernel,
    pub pa: ActionMatrix,
    pub goal: StateMarginal,
}

/// Terminal backward message spread over weighted goal cells. Weights are
/// normalized; repeated cells accumulate.
pub fn goal_marginal(map: &GridMap, goals: &[(Cell, f64)]) -> Result<StateMarginal> {
    if goals.is_empty() {
        return Err(PlanError::InvalidGoal("at least one goal is required".into()));
    }
    let mut m = StateMarginal::zeros(map.rows(), map.cols());
    let mut total = 0.0;
    for &(cell, w) in goals {
        if !(w > 0.0) || !w.is_finite() {
            return Err(PlanError::InvalidGoal(format!("goal {cell} has non-positive weight {w}")));
        }
        if !map.is_free(cell) {
            return Err(PlanError::InvalidGoal(format!("goal {cell} is on an obstacle")));
        }
        m.set(cell, m.get(cell) + w);
        total += w;
    }
    let values = m.values().iter().map(|v| v / total).collect();
    StateMarginal::from_values(map.rows(), map.cols(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub t: usize,
    pub cell: Cell,
    pub action: Action,
}

/// A realized trajectory, one entry per time slice. The last step's action is
/// `still` since no transition follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub steps: Vec<PathStep>,
    pub reached_goal: bool,
}

impl Path {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of transitions, i.e. time slices minus one.
    pub fn transitions(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.steps.iter().map(|s| s.cell).collect()
    }

    pub fn last_cell(&self) -> Option<Cell> {
        self.steps.last().map(|s| s.cell)
    }

    /// Check connectivity, obstacle avoidance and time ordering against `map`.
    pub fn validate(&self, map: &GridMap) -> std::result::Result<(), String> {
        for (i, s) in self.steps.iter().enumerate() {
            if !map.is_free(s.cell) {
                return Err(format!("step t={} sits on blocked cell {}", s.t, s.cell));
            }
            if i > 0 {
                let prev = &self.steps[i - 1];
                if s.t != prev.t + 1 {
                    return Err(format!("time jumps from {} to {}", prev.t, s.t));
                }
                if prev.cell.chebyshev(s.cell) > 1 {
                    return Err(format!("disconnected move {} -> {} at t={}", prev.cell, s.cell, s.t));
                }
            }
        }
        Ok(())
    }
}

enum Selection<'a> {
    Argmax,
    Sample(&'a mut ChaCha8Rng),
}

impl Selection<'_> {
    fn pick(&mut self, p: &MessageTensor) -> Option<(Cell, Action)> {
        match self {
            Selection::Argmax => p.argmax(),
            Selection::Sample(rng) => sample_joint(p, rng),
        }
    }

    fn pick_cell(&mut self, p: &StateMarginal) -> Option<Cell> {
        match self {
            Selection::Argmax => p.argmax(),
            Selection::Sample(rng) => {
                let i = sample_index(p.values(), rng)?;
                Some(Cell::new(i / p.cols(), i % p.cols()))
            }
        }
    }
}

/// Index drawn proportionally to `weights`; never returns a zero-weight entry.
fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

fn sample_joint(p: &MessageTensor, rng: &mut ChaCha8Rng) -> Option<(Cell, Action)> {
    sample_index(p.values(), rng).map(|i| {
        let cell = i / N_ACTIONS;
        (Cell::new(cell / p.cols(), cell % p.cols()), Action::from_index(i % N_ACTIONS).expect("action"))
    })
}

/// Greedy path: argmax of the posterior at every step.
pub fn greedy_plan(scenario: &Scenario) -> Result<Path> {
    let model = scenario.model()?;
    let horizon = scenario.resolve_horizon(&model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    run_loop(scenario, &model, horizon, Selection::Argmax, &mut rng)
}

/// Randomized path: each state-action pair is drawn from the posterior.
/// Deterministic for a given `scenario.seed`.
pub fn sample_path(scenario: &Scenario) -> Result<Path> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    sample_path_with(scenario, &mut rng)
}

/// `count` sampled paths from one seeded stream.
pub fn sample_paths(scenario: &Scenario, count: usize) -> Result<Vec<Path>> {
    let model = scenario.model()?;
    let horizon = scenario.resolve_horizon(&model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    (0..count)
        .map(|_| {
            let mut fallback = ChaCha8Rng::seed_from_u64(rng.gen());
            let mut draw = ChaCha8Rng::seed_from_u64(rng.gen());
            run_loop(scenario, &model, horizon, Selection::Sample(&mut draw), &mut fallback)
        })
        .collect()
}

fn sample_path_with(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<Path> {
    let model = scenario.model()?;
    let horizon = scenario.resolve_horizon(&model)?;
    let mut fallback = ChaCha8Rng::seed_from_u64(rng.gen());
    run_loop(scenario, &model, horizon, Selection::Sample(rng), &mut fallback)
}

fn run_loop(
    scenario: &Scenario,
    model: &PlanModel,
    horizon: usize,
    mut select: Selection<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    let map = &scenario.map;
    let (rows, cols) = (map.rows(), map.cols());
    let start = scenario.start;

    if horizon == 1 || (scenario.goal_stop && scenario.is_goal(start)) {
        let reached = scenario.is_goal(start);
        if !reached && scenario.policy == NullPolicy::Abort {
            return Err(PlanError::NoFeasiblePath { t: 1 });
        }
        return Ok(Path { steps: vec![PathStep { t: 1, cell: start, action: Action::Still }], reached_goal: reached });
    }

    let backward = backward_chain(&model.kernel, &model.pa, &model.goal, horizon)?;
    let mut steps = Vec::with_capacity(horizon);

    // t = 1: the state is pinned, only the action is chosen
    let f1 = MessageTensor::instantiated(rows, cols, start, &scenario.start_actions(&model.pa))?;
    let p1 = posterior(&f1, &backward[0])?;
    let (mut cell, mut action) = match select.pick(&p1) {
        Some(choice) => choice,
        None => on_dead(scenario.policy, 1, start, &f1, rng)?,
    };
    steps.push(PathStep { t: 1, cell, action });

    for t in 2..horizon {
        let f = forward_step(
            &MessageTensor::delta(rows, cols, MessageKind::Forward, cell, action),
            &model.kernel,
            &model.pa,
        )?;
        let p = posterior(&f, &backward[t - 1])?;
        (cell, action) = match select.pick(&p) {
            Some(choice) => choice,
            None => on_dead(scenario.policy, t, cell, &f, rng)?,
        };
        steps.push(PathStep { t, cell, action });
        if scenario.goal_stop && scenario.is_goal(cell) {
            steps.last_mut().expect("step").action = Action::Still;
            return Ok(Path { steps, reached_goal: true });
        }
    }

    let f_final = forward_final(&MessageTensor::delta(rows, cols, MessageKind::Forward, cell, action), &model.kernel)?;
    let p_final = posterior_final(&f_final, &model.goal)?;
    let last = match select.pick_cell(&p_final) {
        Some(c) => c,
        None => match scenario.policy {
            NullPolicy::Abort => return Err(PlanError::NoFeasiblePath { t: horizon }),
            NullPolicy::Wait => cell,
            NullPolicy::SampleForward => {
                let i = sample_index(f_final.values(), rng).ok_or(PlanError::DeadFlow)?;
                Cell::new(i / cols, i % cols)
            }
        },
    };
    steps.push(PathStep { t: horizon, cell: last, action: Action::Still });
    Ok(Path { steps, reached_goal: scenario.is_goal(last) })
}

fn on_dead(
    policy: NullPolicy,
    t: usize,
    current: Cell,
    forward: &MessageTensor,
    rng: &mut ChaCha8Rng,
) -> Result<(Cell, Action)> {
    match policy {
        NullPolicy::Abort => Err(PlanError::NoFeasiblePath { t }),
        NullPolicy::Wait => Ok((current, Action::Still)),
        NullPolicy::SampleForward => sample_joint(forward, rng).ok_or(PlanError::DeadFlow),
    }
}

/// Result of advancing an agent by one greedy step from `(cell, heading)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDecision {
    pub action: Action,
    pub next: Cell,
    pub waited: bool,
}

/// One greedy step with a fresh flow of `horizon` slices: choose the action at
/// `cell` (heading `heading` held before), then the next cell.
pub(crate) fn greedy_step(
    model: &PlanModel,
    cell: Cell,
    heading: Action,
    horizon: usize,
    policy: NullPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<StepDecision> {
    let (rows, cols) = (model.kernel.rows(), model.kernel.cols());
    let wait = StepDecision { action: Action::Still, next: cell, waited: true };
    let dead = |t: usize, f: &MessageTensor, rng: &mut ChaCha8Rng| -> Result<Option<(Cell, Action)>> {
        match policy {
            NullPolicy::Abort => Err(PlanError::NoFeasiblePath { t }),
            NullPolicy::Wait => Ok(None),
            NullPolicy::SampleForward => Ok(sample_joint(f, rng)),
        }
    };
    let backward = backward_chain(&model.kernel, &model.pa, &model.goal, horizon)?;
    let f1 = MessageTensor::instantiated(rows, cols, cell, &model.pa.row(heading))?;
    let action = match posterior(&f1, &backward[0])?.argmax() {
        Some((_, a)) => a,
        None => match dead(1, &f1, rng)? {
            Some((_, a)) => a,
            None => return Ok(wait),
        },
    };
    let moved = MessageTensor::delta(rows, cols, MessageKind::Forward, cell, action);
    let next = if horizon == 2 {
        let f = forward_final(&moved, &model.kernel)?;
        match posterior_final(&f, &model.goal)?.argmax() {
            Some(c) => c,
            None => match policy {
                NullPolicy::Abort => return Err(PlanError::NoFeasiblePath { t: 2 }),
                NullPolicy::Wait => return Ok(wait),
                NullPolicy::SampleForward => {
                    let i = sample_index(f.values(), rng).ok_or(PlanError::DeadFlow)?;
                    Cell::new(i / cols, i % cols)
                }
            },
        }
    } else {
        let f = forward_step(&moved, &model.kernel, &model.pa)?;
        match posterior(&f, &backward[1])?.argmax() {
            Some((c, _)) => c,
            None => match dead(2, &f, rng)? {
                Some((c, _)) => c,
                None => return Ok(wait),
            },
        }
    };
    Ok(StepDecision { action, next, waited: false })
}

/// Log-likelihood of a path under the scenario's model:
/// `log π(s_1, a_1) + Σ_t [log p(a_t | a_{t-1}) + log p(s_t | s_{t-1}, a_{t-1})]`,
/// where the last slice contributes only its state transition. `-∞` when any
/// factor vanishes.
pub fn path_likelihood(path: &Path, scenario: &Scenario) -> Result<f64> {
    let model = scenario.model()?;
    Ok(log_likelihood(path, scenario.start, &scenario.start_actions(&model.pa), &model.kernel, &model.pa))
}

pub(crate) fn log_likelihood(
    path: &Path,
    start: Cell,
    start_actions: &[f64; N_ACTIONS],
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
) -> f64 {
    let steps = &path.steps;
    let Some(first) = steps.first() else {
        return f64::NEG_INFINITY;
    };
    if first.cell != start {
        return f64::NEG_INFINITY;
    }
    if steps.len() == 1 {
        return 0.0;
    }
    let mut ll = start_actions[first.action.index()].ln();
    for (i, w) in steps.windows(2).enumerate() {
        let (prev, cur) = (&w[0], &w[1]);
        ll += kernel.prob(prev.cell, prev.action, cur.cell).ln();
        if i + 2 < steps.len() {
            ll += pa.get(prev.action.index(), cur.action.index()).ln();
        }
    }
    ll
}

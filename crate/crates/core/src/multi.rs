//! Sequentially scheduled agents on a shared grid.
//!
//! Each agent sees every other agent as an obstacle. On its turn it rebuilds its
//! kernel on that dynamic map, recomputes a minimum-time flow from its current
//! pose and takes one greedy step. When no feasible flow exists it falls back to
//! its null-posterior policy (waiting by default). Moves are applied immediately,
//! so agents later in the round see them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PlanError, Result};
use crate::flow::min_time_from;
use crate::grid::{action_matrix, build_kernel, default_masks, Action, Cell, GridMap, DEFAULT_SHARPNESS};
use crate::planner::{goal_marginal, greedy_step, NullPolicy, Path, PathStep, PlanModel};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub id: usize,
    pub start: Cell,
    pub goals: Vec<(Cell, f64)>,
    pub sharpness: f64,
    pub stiffness: f64,
    pub policy: NullPolicy,
    /// Agents whose neighborhoods count as goals for this one.
    pub chase: Vec<usize>,
}

impl AgentSpec {
    pub fn new(id: usize, start: Cell, goal: Cell) -> Self {
        AgentSpec {
            id,
            start,
            goals: vec![(goal, 1.0)],
            sharpness: DEFAULT_SHARPNESS,
            stiffness: 0.0,
            policy: NullPolicy::Wait,
            chase: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentStatus {
    Active,
    Arrived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentPose {
    pub cell: Cell,
    /// Last action taken; seeds the next action distribution.
    pub heading: Action,
    pub status: AgentStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Agents act in the order they were given.
    Fixed,
    /// A fresh permutation every round, drawn from the simulation seed.
    Random,
}

/// What happens to agents once they reach a goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivedPolicy {
    /// They stay on the map as obstacles.
    Remain,
    /// They leave the map.
    Vanish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Global cap on time slices.
    pub t_max: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub arrived: ArrivedPolicy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { t_max: 100, schedule: Schedule::Fixed, seed: 0, arrived: ArrivedPolicy::Remain }
    }
}

/// Snapshot of all agents at global time `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub t: usize,
    pub poses: Vec<AgentPose>,
}

impl WorldState {
    pub fn initial(agents: &[AgentSpec]) -> Self {
        let poses = agents
            .iter()
            .map(|a| AgentPose {
                cell: a.start,
                heading: Action::Still,
                status: if a.goals.iter().any(|g| g.0 == a.start) { AgentStatus::Arrived } else { AgentStatus::Active },
            })
            .collect();
        WorldState { t: 1, poses }
    }

    pub fn all_arrived(&self) -> bool {
        self.poses.iter().all(|p| p.status == AgentStatus::Arrived)
    }

    fn visible(&self, i: usize, arrived: ArrivedPolicy) -> bool {
        self.poses[i].status == AgentStatus::Active || arrived == ArrivedPolicy::Remain
    }

    /// Cells occupied by visible agents, with their indices.
    pub fn occupied(&self, arrived: ArrivedPolicy) -> Vec<(usize, Cell)> {
        (0..self.poses.len()).filter(|&i| self.visible(i, arrived)).map(|i| (i, self.poses[i].cell)).collect()
    }
}

/// The map as seen by agent `agent`: static obstacles plus every other visible agent.
pub fn dynamic_map(static_map: &GridMap, world: &WorldState, agent: usize, arrived: ArrivedPolicy) -> GridMap {
    let mut map = static_map.clone();
    for (i, cell) in world.occupied(arrived) {
        if i != agent {
            map.set_obstacle(cell, true);
        }
    }
    map
}

fn validate(agents: &[AgentSpec], static_map: &GridMap) -> Result<()> {
    for (i, a) in agents.iter().enumerate() {
        if !static_map.is_free(a.start) {
            return Err(PlanError::Parameter(format!("agent {} starts on blocked cell {}", a.id, a.start)));
        }
        if agents[..i].iter().any(|b| b.start == a.start) {
            return Err(PlanError::Parameter(format!("agent {} shares its start cell", a.id)));
        }
        if a.goals.is_empty() && a.chase.is_empty() {
            return Err(PlanError::InvalidGoal(format!("agent {} has no goals", a.id)));
        }
        if !a.goals.is_empty() {
            goal_marginal(static_map, &a.goals)?;
        }
        for target in &a.chase {
            if !agents.iter().any(|b| b.id == *target && b.id != a.id) {
                return Err(PlanError::Parameter(format!("agent {} chases unknown agent {target}", a.id)));
            }
        }
    }
    Ok(())
}

fn goals_for(agents: &[AgentSpec], world: &WorldState, i: usize, map: &GridMap) -> Vec<(Cell, f64)> {
    let mut goals: Vec<(Cell, f64)> = agents[i].goals.iter().copied().filter(|g| map.is_free(g.0)).collect();
    for target in &agents[i].chase {
        let j = agents.iter().position(|b| b.id == *target).expect("validated");
        let c = world.poses[j].cell;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(n) = c.offset(dy, dx, map.rows(), map.cols()) {
                    if map.is_free(n) {
                        goals.push((n, 1.0));
                    }
                }
            }
        }
    }
    goals
}

fn arrived_at(goals: &[(Cell, f64)], cell: Cell) -> bool {
    goals.iter().any(|g| g.0 == cell)
}

/// One step of agent `i`: returns the action it took from its current cell.
fn advance(
    agents: &[AgentSpec],
    world: &mut WorldState,
    i: usize,
    static_map: &GridMap,
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Action> {
    let spec = &agents[i];
    let pose = world.poses[i];
    let map = dynamic_map(static_map, world, i, config.arrived);
    let goals = goals_for(agents, world, i, &map);
    let remaining = config.t_max.saturating_sub(world.t) + 1;

    let decision = if goals.is_empty() || remaining < 2 {
        None
    } else {
        let kernel = build_kernel(&map, &default_masks(spec.sharpness)?)?;
        let pa = action_matrix(spec.stiffness)?;
        let goal = goal_marginal(&map, &goals)?;
        match min_time_from(&kernel, &pa, pose.cell, &pa.row(pose.heading), &goal, remaining) {
            Ok(1) => None,
            Ok(horizon) => {
                let model = PlanModel { kernel, pa, goal };
                Some(greedy_step(&model, pose.cell, pose.heading, horizon, spec.policy, rng)?)
            }
            Err(PlanError::Unreachable { .. }) => None,
            Err(e) => return Err(e),
        }
    };

    let (action, next) = match decision {
        Some(d) if !d.waited => (d.action, d.next),
        _ => (Action::Still, pose.cell),
    };
    assert!(map.is_free(next), "agent {} stepped onto an occupied cell {next}", spec.id);
    let p = &mut world.poses[i];
    p.cell = next;
    p.heading = action;
    if arrived_at(&goals, next) {
        p.status = AgentStatus::Arrived;
    }
    Ok(action)
}

fn schedule_order(n: usize, config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if config.schedule == Schedule::Random {
        order.shuffle(rng);
    }
    order
}

/// Advance every active agent once, in schedule order. Returns the new state and
/// the action each agent took (`None` for agents that were already arrived).
pub fn step_world(
    world: &WorldState,
    agents: &[AgentSpec],
    static_map: &GridMap,
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(WorldState, Vec<Option<Action>>)> {
    if world.t >= config.t_max {
        return Err(PlanError::Parameter(format!("time {} already at the cap {}", world.t, config.t_max)));
    }
    let mut next = world.clone();
    let mut actions = vec![None; agents.len()];
    for i in schedule_order(agents.len(), config, rng) {
        if next.poses[i].status == AgentStatus::Active {
            actions[i] = Some(advance(agents, &mut next, i, static_map, config, rng)?);
        }
    }
    next.t += 1;
    check_safety(&next, static_map, config.arrived);
    Ok((next, actions))
}

fn check_safety(world: &WorldState, static_map: &GridMap, arrived: ArrivedPolicy) {
    let occupied = world.occupied(arrived);
    for (k, &(i, c)) in occupied.iter().enumerate() {
        assert!(static_map.is_free(c), "agent index {i} on an obstacle at {c}");
        assert!(
            occupied[..k].iter().all(|&(_, d)| d != c),
            "two agents share cell {c} at t = {}",
            world.t
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    Completed,
    TimedOut,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub status: SimStatus,
    /// One snapshot per time slice, starting with the initial state.
    pub trace: Vec<WorldState>,
    /// Per-agent trajectories, in the order the agents were given.
    pub paths: Vec<Path>,
}

impl SimOutcome {
    /// Number of still actions emitted by active agents that were not on a goal.
    pub fn wait_count(&self) -> usize {
        self.paths
            .iter()
            .flat_map(|p| p.steps.iter().take(p.steps.len().saturating_sub(1)))
            .filter(|s| s.action == Action::Still)
            .count()
    }
}

/// Run rounds until every agent has arrived or `config.t_max` slices are used.
pub fn simulate(agents: &[AgentSpec], static_map: &GridMap, config: &SimConfig) -> Result<SimOutcome> {
    validate(agents, static_map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut world = WorldState::initial(agents);
    check_safety(&world, static_map, config.arrived);
    let mut steps: Vec<Vec<PathStep>> =
        world.poses.iter().map(|p| vec![PathStep { t: 1, cell: p.cell, action: Action::Still }]).collect();
    let mut trace = vec![world.clone()];

    while !world.all_arrived() && world.t < config.t_max {
        let (next, actions) = step_world(&world, agents, static_map, config, &mut rng)?;
        for (i, action) in actions.into_iter().enumerate() {
            if let Some(a) = action {
                steps[i].last_mut().expect("step").action = a;
                steps[i].push(PathStep { t: next.t, cell: next.poses[i].cell, action: Action::Still });
            }
        }
        world = next;
        trace.push(world.clone());
    }

    let paths = steps
        .into_iter()
        .zip(&world.poses)
        .map(|(steps, pose)| Path { steps, reached_goal: pose.status == AgentStatus::Arrived })
        .collect();
    let status = if world.all_arrived() { SimStatus::Completed } else { SimStatus::TimedOut };
    Ok(SimOutcome { status, trace, paths })
}

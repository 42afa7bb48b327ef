//! Grid path planning by forward/backward probability propagation.
//!
//! Motion is a state-action Markov chain on a 2D grid. Forward messages diffuse
//! from the start, backward messages diffuse from the goals, and their product
//! gives the posterior over where the agent can be (and which way it is heading)
//! at each time step while still reaching a goal at the horizon. Obstacles and
//! the grid boundary censor the transition stencils, so probability is reflected
//! off them rather than absorbed.
//!
//! - [`grid`]: maps, the nine-action alphabet, masks and the censored kernel.
//! - [`flow`]: forward/backward/posterior recursions and minimum-time search.
//! - [`planner`]: greedy and sampled path extraction, weighted goals, likelihood.
//! - [`multi`]: sequentially scheduled agents on dynamic maps.
//! - [`oracle`]: dense, enumerative and BFS references for testing.
//! - [`scenario`], [`render`], [`cli`]: file formats, frame output, command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod flow;
pub mod grid;
pub mod multi;
pub mod oracle;
pub mod planner;
pub mod render;
pub mod scenario;

pub use error::{PlanError, Result};
pub use flow::{
    backward_step, backward_terminal, forward_final, forward_step, min_time, min_time_from, posterior, run_flows,
    FlowSet, MessageKind, MessageTensor, StateMarginal,
};
pub use grid::{action_matrix, build_kernel, default_masks, Action, ActionMatrix, Cell, GridMap, TransitionKernel};
pub use multi::{dynamic_map, simulate, step_world, AgentSpec, SimConfig, SimOutcome, SimStatus, WorldState};
pub use planner::{goal_marginal, greedy_plan, path_likelihood, sample_path, Horizon, NullPolicy, Path, Scenario};

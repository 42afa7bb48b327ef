//! Reference implementations for verification: dense matrix-chain message
//! passing, exhaustive trajectory enumeration and 8-connected BFS.
//!
//! None of this shares message-passing code with [`crate::flow`]. Transition
//! probabilities are read point-wise through [`TransitionKernel::prob`] and
//! [`ActionMatrix::get`] only. Small instances only.

#![allow(clippy::needless_range_loop)]

use std::collections::VecDeque;

use crate::error::{PlanError, Result};
use crate::grid::{Action, ActionMatrix, Cell, GridMap, TransitionKernel, N_ACTIONS};

/// Largest joint dimension the dense oracle accepts.
pub const DENSE_LIMIT: usize = 2500;

/// The state-action chain as explicit matrices over the joint index
/// `cell_index · n_A + action`.
#[derive(Debug, Clone)]
pub struct DenseChain {
    pub n_cells: usize,
    pub dim: usize,
    /// `dim × dim`, row `(s', a')`, column `(s, a)`: `p(s | s', a') · p(a | a')`.
    pub transition: Vec<f64>,
    /// `dim × n_cells`: `p(s_T | s', a')`.
    pub last: Vec<f64>,
    pub prior: Vec<f64>,
    pub terminal: Vec<f64>,
}

impl DenseChain {
    pub fn new(
        kernel: &TransitionKernel,
        pa: &ActionMatrix,
        start: Cell,
        start_actions: &[f64; N_ACTIONS],
        goal: &[f64],
    ) -> Result<Self> {
        let map = kernel.map();
        let n_cells = map.n_cells();
        let dim = n_cells * N_ACTIONS;
        if dim > DENSE_LIMIT {
            return Err(PlanError::OracleGuard(format!("joint dimension {dim} exceeds {DENSE_LIMIT}")));
        }
        if goal.len() != n_cells {
            return Err(PlanError::ShapeMismatch("goal vector length".into()));
        }
        let mut transition = vec![0.0; dim * dim];
        let mut last = vec![0.0; dim * n_cells];
        for from in 0..n_cells {
            for a_prev in Action::ALL {
                let row = from * N_ACTIONS + a_prev.index();
                for to in 0..n_cells {
                    let p = kernel.prob(map.cell(from), a_prev, map.cell(to));
                    last[row * n_cells + to] = p;
                    for a_next in 0..N_ACTIONS {
                        transition[row * dim + to * N_ACTIONS + a_next] = p * pa.get(a_prev.index(), a_next);
                    }
                }
            }
        }
        let mut prior = vec![0.0; dim];
        let total: f64 = start_actions.iter().sum();
        for a in 0..N_ACTIONS {
            prior[map.index(start) * N_ACTIONS + a] = start_actions[a] / total;
        }
        let goal_total: f64 = goal.iter().sum();
        let terminal = goal.iter().map(|g| g / goal_total).collect();
        Ok(DenseChain { n_cells, dim, transition, last, prior, terminal })
    }

    /// Row sums of the joint transition matrix (1 for free sources, 0 for obstacles).
    pub fn row_sums(&self) -> Vec<f64> {
        self.transition.chunks_exact(self.dim).map(|r| r.iter().sum()).collect()
    }
}

/// Messages computed by the dense oracle, vectors indexed like the chain.
#[derive(Debug, Clone)]
pub struct DenseFlows {
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
    pub posterior: Vec<Vec<f64>>,
    pub forward_final: Vec<f64>,
    pub posterior_final: Vec<f64>,
    /// Mass of each forward message before it was normalized, `t = 2 .. T`.
    pub forward_norms: Vec<f64>,
}

fn normalized(mut v: Vec<f64>) -> (Vec<f64>, f64) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    (v, s)
}

/// Forward by vector-matrix products, backward by matrix-vector products,
/// posteriors by normalized Hadamard products.
pub fn dense_messages(chain: &DenseChain, horizon: usize) -> Result<DenseFlows> {
    if horizon < 2 {
        return Err(PlanError::OracleGuard("horizon must be at least 2".into()));
    }
    let (dim, n) = (chain.dim, chain.n_cells);
    let mut forward = vec![normalized(chain.prior.clone()).0];
    let mut forward_norms = Vec::new();
    for _ in 2..horizon {
        let f = forward.last().expect("nonempty");
        let mut next = vec![0.0; dim];
        for (i, &fi) in f.iter().enumerate() {
            for j in 0..dim {
                next[j] += fi * chain.transition[i * dim + j];
            }
        }
        let (next, s) = normalized(next);
        forward_norms.push(s);
        forward.push(next);
    }
    let f = forward.last().expect("nonempty");
    let mut ff = vec![0.0; n];
    for (i, &fi) in f.iter().enumerate() {
        for s in 0..n {
            ff[s] += fi * chain.last[i * n + s];
        }
    }
    let (forward_final, s) = normalized(ff);
    forward_norms.push(s);

    let mut backward = Vec::with_capacity(horizon - 1);
    let mut b: Vec<f64> = (0..dim)
        .map(|i| (0..n).map(|s| chain.last[i * n + s] * chain.terminal[s]).sum())
        .collect();
    b = normalized(b).0;
    backward.push(b);
    for _ in 2..horizon {
        let next = backward.last().expect("nonempty");
        let prev: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| chain.transition[i * dim + j] * next[j]).sum())
            .collect();
        backward.push(normalized(prev).0);
    }
    backward.reverse();

    let posterior = forward
        .iter()
        .zip(&backward)
        .map(|(f, b)| normalized(f.iter().zip(b).map(|(x, y)| x * y).collect()).0)
        .collect();
    let posterior_final = normalized(forward_final.iter().zip(&chain.terminal).map(|(x, y)| x * y).collect()).0;
    Ok(DenseFlows { forward, backward, posterior, forward_final, posterior_final, forward_norms })
}

/// One trajectory from exhaustive enumeration. `actions` has one entry per
/// transition (`T − 1` of them).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cells: Vec<Cell>,
    pub actions: Vec<Action>,
    pub likelihood: f64,
}

/// Product-form likelihood of an explicit trajectory:
/// `π(s_1, a_1) · Π p(a_t | a_{t-1}) p(s_t | s_{t-1}, a_{t-1}) · p(s_T | s_{T-1}, a_{T-1})`.
pub fn trajectory_likelihood(
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
    start: Cell,
    start_actions: &[f64; N_ACTIONS],
    cells: &[Cell],
    actions: &[Action],
) -> f64 {
    assert_eq!(cells.len(), actions.len() + 1, "one action per transition");
    if cells[0] != start {
        return 0.0;
    }
    let total: f64 = start_actions.iter().sum();
    let mut l = start_actions[actions[0].index()] / total;
    for t in 1..cells.len() {
        l *= kernel.prob(cells[t - 1], actions[t - 1], cells[t]);
        if t < actions.len() {
            l *= pa.get(actions[t - 1].index(), actions[t].index());
        }
    }
    l
}

/// Every positive-likelihood trajectory of `horizon` slices from `start` that
/// ends on a cell in the support of `goal`.
pub fn enumerate_paths(
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
    start: Cell,
    start_actions: &[f64; N_ACTIONS],
    goal: &[f64],
    horizon: usize,
) -> Result<Vec<Trajectory>> {
    let map = kernel.map();
    if map.n_cells() > 9 || !(2..=4).contains(&horizon) {
        return Err(PlanError::OracleGuard(format!(
            "enumeration limited to ≤ 9 cells and 2 ≤ T ≤ 4 (got {} cells, T = {horizon})",
            map.n_cells()
        )));
    }
    let cells: Vec<Cell> = map.cells().collect();
    let mut out = Vec::new();
    let mut stack_cells = vec![start];
    let mut stack_actions = Vec::new();
    fn recurse(
        cells: &[Cell],
        goal: &[f64],
        map: &GridMap,
        horizon: usize,
        path_cells: &mut Vec<Cell>,
        path_actions: &mut Vec<Action>,
        emit: &mut dyn FnMut(&[Cell], &[Action]),
    ) {
        if path_cells.len() == horizon {
            if goal[map.index(*path_cells.last().expect("cell"))] > 0.0 {
                emit(path_cells, path_actions);
            }
            return;
        }
        for a in Action::ALL {
            for &c in cells {
                path_actions.push(a);
                path_cells.push(c);
                recurse(cells, goal, map, horizon, path_cells, path_actions, emit);
                path_cells.pop();
                path_actions.pop();
            }
        }
    }
    let mut emit = |cs: &[Cell], acts: &[Action]| {
        let l = trajectory_likelihood(kernel, pa, start, start_actions, cs, acts);
        if l > 0.0 {
            out.push(Trajectory { cells: cs.to_vec(), actions: acts.to_vec(), likelihood: l });
        }
    };
    recurse(&cells, goal, map, horizon, &mut stack_cells, &mut stack_actions, &mut emit);
    Ok(out)
}

/// Smoothing marginals from enumerated trajectories, weighted by the goal
/// distribution: joint `(cell, action)` vectors for `t = 1 .. T-1` plus the
/// final-state marginal.
pub fn enumerated_posteriors(
    trajectories: &[Trajectory],
    goal: &[f64],
    map: &GridMap,
    horizon: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dim = map.n_cells() * N_ACTIONS;
    let mut joint = vec![vec![0.0; dim]; horizon - 1];
    let mut last = vec![0.0; map.n_cells()];
    let mut z = 0.0;
    for tr in trajectories {
        let w = tr.likelihood * goal[map.index(*tr.cells.last().expect("cell"))];
        z += w;
        for t in 0..horizon - 1 {
            joint[t][map.index(tr.cells[t]) * N_ACTIONS + tr.actions[t].index()] += w;
        }
        last[map.index(tr.cells[horizon - 1])] += w;
    }
    if z > 0.0 {
        joint.iter_mut().flatten().for_each(|v| *v /= z);
        last.iter_mut().for_each(|v| *v /= z);
    }
    (joint, last)
}

/// 8-connected BFS over free cells; minimum number of moves to any goal cell.
pub fn bfs_distance(map: &GridMap, start: Cell, goals: &[Cell]) -> Option<usize> {
    if !map.is_free(start) {
        return None;
    }
    let is_goal = |c: Cell| goals.contains(&c);
    let mut dist = vec![usize::MAX; map.n_cells()];
    let mut queue = VecDeque::new();
    dist[map.index(start)] = 0;
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        let d = dist[map.index(c)];
        if is_goal(c) {
            return Some(d);
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dy, dx) == (0, 0) {
                    continue;
                }
                if let Some(n) = c.offset(dy, dx, map.rows(), map.cols()) {
                    if map.is_free(n) && dist[map.index(n)] == usize::MAX {
                        dist[map.index(n)] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    None
}

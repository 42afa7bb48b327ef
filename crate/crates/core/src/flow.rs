//! Forward/backward sum-product recursions over `rows × cols × n_A` tensors.
//!
//! Every message is renormalized to unit mass after each step. A message whose
//! mass vanishes is returned as an all-zero tensor flagged dead rather than as an
//! error, so callers can observe infeasible time steps.

use crate::error::{PlanError, Result};
use crate::grid::{Action, ActionMatrix, Cell, GridMap, TransitionKernel, N_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Forward,
    Backward,
    Posterior,
}

/// A joint state-action message at a single time step, stored row-major as
/// `(row, col, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageTensor {
    rows: usize,
    cols: usize,
    kind: MessageKind,
    values: Vec<f64>,
}

impl MessageTensor {
    pub fn zeros(rows: usize, cols: usize, kind: MessageKind) -> Self {
        MessageTensor { rows, cols, kind, values: vec![0.0; rows * cols * N_ACTIONS] }
    }

    pub fn from_values(rows: usize, cols: usize, kind: MessageKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols * N_ACTIONS {
            return Err(PlanError::ShapeMismatch(format!(
                "{} values for a {rows}×{cols}×{N_ACTIONS} tensor",
                values.len()
            )));
        }
        Ok(MessageTensor { rows, cols, kind, values })
    }

    /// Joint delta `δ(s − cell, a − action)`.
    pub fn delta(rows: usize, cols: usize, kind: MessageKind, cell: Cell, action: Action) -> Self {
        let mut t = Self::zeros(rows, cols, kind);
        let i = t.flat(cell, action);
        t.values[i] = 1.0;
        t
    }

    /// `δ(s − cell) · π(a)`, normalized.
    pub fn instantiated(rows: usize, cols: usize, cell: Cell, action_dist: &[f64; N_ACTIONS]) -> Result<Self> {
        if action_dist.iter().any(|&p| !(p >= 0.0)) {
            return Err(PlanError::Parameter("action distribution has negative entries".into()));
        }
        let total: f64 = action_dist.iter().sum();
        if !(total > 0.0) {
            return Err(PlanError::Parameter("action distribution has no mass".into()));
        }
        let mut t = Self::zeros(rows, cols, MessageKind::Forward);
        let base = (cell.row * cols + cell.col) * N_ACTIONS;
        for (a, p) in action_dist.iter().enumerate() {
            t.values[base + a] = p / total;
        }
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn flat(&self, cell: Cell, action: Action) -> usize {
        (cell.row * self.cols + cell.col) * N_ACTIONS + action.index()
    }

    pub fn get(&self, cell: Cell, action: Action) -> f64 {
        self.values[self.flat(cell, action)]
    }

    /// The action slice at one cell.
    pub fn actions_at(&self, cell: Cell) -> &[f64] {
        let base = (cell.row * self.cols + cell.col) * N_ACTIONS;
        &self.values[base..base + N_ACTIONS]
    }

    pub fn cell_mass(&self, cell: Cell) -> f64 {
        self.actions_at(cell).iter().sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// All-zero tensors mark an infeasible time step.
    pub fn is_dead(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn state_marginal(&self) -> StateMarginal {
        let values = self.values.chunks_exact(N_ACTIONS).map(|c| c.iter().sum()).collect();
        StateMarginal { rows: self.rows, cols: self.cols, values }
    }

    /// Joint argmax; ties go to the lowest `(row, col, action)` index.
    pub fn argmax(&self) -> Option<(Cell, Action)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| self.unflat(i))
    }

    pub(crate) fn unflat(&self, i: usize) -> (Cell, Action) {
        let cell = i / N_ACTIONS;
        let a = Action::from_index(i % N_ACTIONS).expect("action index");
        (Cell::new(cell / self.cols, cell % self.cols), a)
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(PlanError::ShapeMismatch(format!(
                "tensor is {}×{}, expected {rows}×{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Scale to unit mass. Returns the mass before scaling.
    fn normalize(&mut self) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total > 0.0 {
            for v in &mut self.values {
                *v /= total;
            }
        }
        total
    }
}

/// A distribution over cells only: `f(s_T)` and `b(s_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMarginal {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl StateMarginal {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        StateMarginal { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(PlanError::ShapeMismatch(format!("{} values for a {rows}×{cols} marginal", values.len())));
        }
        Ok(StateMarginal { rows, cols, values })
    }

    pub fn delta(rows: usize, cols: usize, cell: Cell) -> Self {
        let mut m = Self::zeros(rows, cols);
        m.values[cell.row * cols + cell.col] = 1.0;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.values[cell.row * self.cols + cell.col]
    }

    pub fn set(&mut self, cell: Cell, v: f64) {
        self.values[cell.row * self.cols + cell.col] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_dead(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Cells carrying positive mass, in row-major order.
    pub fn support(&self) -> Vec<Cell> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| Cell::new(i / self.cols, i % self.cols))
            .collect()
    }

    /// Ties go to the lowest row-major index.
    pub fn argmax(&self) -> Option<Cell> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| Cell::new(i / self.cols, i % self.cols))
    }

    fn normalize(&mut self) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total > 0.0 {
            for v in &mut self.values {
                *v /= total;
            }
        }
        total
    }

    fn validate_goal(&self, map: &GridMap) -> Result<()> {
        if self.rows != map.rows() || self.cols != map.cols() {
            return Err(PlanError::ShapeMismatch("goal marginal does not match the map".into()));
        }
        if self.values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(PlanError::InvalidGoal("goal weights must be finite and nonnegative".into()));
        }
        if !(self.sum() > 0.0) {
            return Err(PlanError::InvalidGoal("goal distribution has no mass".into()));
        }
        if let Some(c) = map.cells().find(|&c| map.is_obstacle(c) && self.get(c) > 0.0) {
            return Err(PlanError::InvalidGoal(format!("goal mass on obstacle cell {c}")));
        }
        Ok(())
    }
}

/// Scatter `values` through the per-action stencils: `g(s, a') = Σ_{s'} p(s | s', a') v(s', a')`.
fn scatter(kernel: &TransitionKernel, values: &[f64]) -> Vec<f64> {
    let (rows, cols) = (kernel.rows(), kernel.cols());
    let mut out = vec![0.0; values.len()];
    for ci in 0..rows * cols {
        let (r, c) = ((ci / cols) as i64, (ci % cols) as i64);
        for a in 0..N_ACTIONS {
            let v = values[ci * N_ACTIONS + a];
            if v == 0.0 {
                continue;
            }
            let st = kernel.stencil_at(ci, a);
            for (ky, row) in st.weights.iter().enumerate() {
                for (kx, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    // nonzero weights only point at in-bounds free cells
                    let ti = (r + ky as i64 - 1) as usize * cols + (c + kx as i64 - 1) as usize;
                    out[ti * N_ACTIONS + a] += w * v;
                }
            }
        }
    }
    out
}

/// Gather through the stencils: `out(s', a') = Σ_{s} p(s | s', a') v(s, a')`.
/// `value_at(cell_index, a')` supplies the operand.
fn gather(kernel: &TransitionKernel, value_at: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let (rows, cols) = (kernel.rows(), kernel.cols());
    let mut out = vec![0.0; rows * cols * N_ACTIONS];
    for ci in 0..rows * cols {
        let (r, c) = ((ci / cols) as i64, (ci % cols) as i64);
        for a in 0..N_ACTIONS {
            let st = kernel.stencil_at(ci, a);
            let mut acc = 0.0;
            for (ky, row) in st.weights.iter().enumerate() {
                for (kx, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let ti = (r + ky as i64 - 1) as usize * cols + (c + kx as i64 - 1) as usize;
                    acc += w * value_at(ti, a);
                }
            }
            out[ci * N_ACTIONS + a] = acc;
        }
    }
    out
}

/// `f(s_t, a_t) = Σ_{a'} p(a_t | a') Σ_{s'} p(s_t | s', a') f(s', a')`, normalized.
pub fn forward_step(f_prev: &MessageTensor, kernel: &TransitionKernel, pa: &ActionMatrix) -> Result<MessageTensor> {
    f_prev.check_shape(kernel.rows(), kernel.cols())?;
    if f_prev.is_dead() {
        return Err(PlanError::DeadFlow);
    }
    let moved = scatter(kernel, &f_prev.values);
    let mut out = MessageTensor::zeros(kernel.rows(), kernel.cols(), MessageKind::Forward);
    for (dst, src) in out.values.chunks_exact_mut(N_ACTIONS).zip(moved.chunks_exact(N_ACTIONS)) {
        for (prev, &g) in src.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (next, d) in dst.iter_mut().enumerate() {
                *d += pa.get(prev, next) * g;
            }
        }
    }
    if out.normalize() == 0.0 {
        return Err(PlanError::DeadFlow);
    }
    Ok(out)
}

/// `f(s_T) = Σ_{a'} Σ_{s'} p(s_T | s', a') f(s', a')`, normalized.
pub fn forward_final(f_prev: &MessageTensor, kernel: &TransitionKernel) -> Result<StateMarginal> {
    f_prev.check_shape(kernel.rows(), kernel.cols())?;
    if f_prev.is_dead() {
        return Err(PlanError::DeadFlow);
    }
    let moved = scatter(kernel, &f_prev.values);
    let values = moved.chunks_exact(N_ACTIONS).map(|c| c.iter().sum()).collect();
    let mut out = StateMarginal { rows: kernel.rows(), cols: kernel.cols(), values };
    if out.normalize() == 0.0 {
        return Err(PlanError::DeadFlow);
    }
    Ok(out)
}

/// `b(s', a') ∝ Σ_a p(a | a') Σ_s p(s | s', a') b(s, a)`, normalized.
/// An all-zero result is returned as a dead tensor.
pub fn backward_step(b_next: &MessageTensor, kernel: &TransitionKernel, pa: &ActionMatrix) -> Result<MessageTensor> {
    b_next.check_shape(kernel.rows(), kernel.cols())?;
    let (rows, cols) = (kernel.rows(), kernel.cols());
    if b_next.is_dead() {
        return Ok(MessageTensor::zeros(rows, cols, MessageKind::Backward));
    }
    // mix over the next action first: h(s, a') = Σ_a P_A[a'][a] b(s, a)
    let mut mixed = vec![0.0; b_next.values.len()];
    for (dst, src) in mixed.chunks_exact_mut(N_ACTIONS).zip(b_next.values.chunks_exact(N_ACTIONS)) {
        if src.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (prev, d) in dst.iter_mut().enumerate() {
            *d = src.iter().enumerate().map(|(next, &b)| pa.get(prev, next) * b).sum();
        }
    }
    let values = gather(kernel, |ci, a| mixed[ci * N_ACTIONS + a]);
    let mut out = MessageTensor { rows, cols, kind: MessageKind::Backward, values };
    out.normalize();
    Ok(out)
}

/// `b(s_{T-1}, a_{T-1}) ∝ Σ_{s_T} p(s_T | s_{T-1}, a_{T-1}) b(s_T)`, normalized.
///
/// The goal distribution must carry positive mass and none of it on obstacles.
pub fn backward_terminal(goal: &StateMarginal, kernel: &TransitionKernel) -> Result<MessageTensor> {
    goal.validate_goal(kernel.map())?;
    let values = gather(kernel, |ci, _| goal.values[ci]);
    let mut out = MessageTensor { rows: kernel.rows(), cols: kernel.cols(), kind: MessageKind::Backward, values };
    out.normalize();
    Ok(out)
}

/// Pointwise product of forward and backward messages, normalized. Disjoint
/// supports give a dead tensor.
pub fn posterior(f: &MessageTensor, b: &MessageTensor) -> Result<MessageTensor> {
    b.check_shape(f.rows, f.cols)?;
    let values = f.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    let mut out = MessageTensor { rows: f.rows, cols: f.cols, kind: MessageKind::Posterior, values };
    out.normalize();
    Ok(out)
}

/// Posterior over the final state: `f(s_T) · b(s_T)`, normalized.
pub fn posterior_final(f: &StateMarginal, goal: &StateMarginal) -> Result<StateMarginal> {
    if f.rows != goal.rows || f.cols != goal.cols {
        return Err(PlanError::ShapeMismatch("final marginals differ in shape".into()));
    }
    let values = f.values.iter().zip(&goal.values).map(|(x, y)| x * y).collect();
    let mut out = StateMarginal { rows: f.rows, cols: f.cols, values };
    out.normalize();
    Ok(out)
}

/// Backward messages `b_1 .. b_{T-1}` for a horizon of `horizon` slices.
/// Once a message dies, every earlier one is dead too.
pub fn backward_chain(
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
    goal: &StateMarginal,
    horizon: usize,
) -> Result<Vec<MessageTensor>> {
    if horizon < 2 {
        return Err(PlanError::Parameter(format!("horizon {horizon} must be at least 2")));
    }
    let mut chain = Vec::with_capacity(horizon - 1);
    chain.push(backward_terminal(goal, kernel)?);
    for _ in 2..horizon {
        let next = backward_step(chain.last().expect("nonempty"), kernel, pa)?;
        chain.push(next);
    }
    chain.reverse();
    Ok(chain)
}

/// Forward, backward and posterior messages over a full horizon.
///
/// Joint tensors are stored for `t = 1 .. T-1`; the last slice `t = T` only
/// carries a state, so its messages are kept as marginals.
#[derive(Debug, Clone)]
pub struct FlowSet {
    horizon: usize,
    forward: Vec<MessageTensor>,
    backward: Vec<MessageTensor>,
    posterior: Vec<MessageTensor>,
    forward_final: StateMarginal,
    goal: StateMarginal,
    posterior_final: StateMarginal,
}

impl FlowSet {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Forward message at `t ∈ 1..T`.
    pub fn forward(&self, t: usize) -> &MessageTensor {
        &self.forward[t - 1]
    }

    pub fn backward(&self, t: usize) -> &MessageTensor {
        &self.backward[t - 1]
    }

    pub fn posterior(&self, t: usize) -> &MessageTensor {
        &self.posterior[t - 1]
    }

    pub fn forward_final(&self) -> &StateMarginal {
        &self.forward_final
    }

    /// `b(s_T)`, the normalized goal distribution.
    pub fn backward_final(&self) -> &StateMarginal {
        &self.goal
    }

    pub fn posterior_final(&self) -> &StateMarginal {
        &self.posterior_final
    }

    /// True when every joint posterior carries mass.
    pub fn is_feasible(&self) -> bool {
        self.posterior.iter().all(|p| !p.is_dead()) && !self.posterior_final.is_dead()
    }

    /// Number of stored real values.
    pub fn stored_values(&self) -> usize {
        let joint: usize = [&self.forward, &self.backward, &self.posterior]
            .iter()
            .flat_map(|v| v.iter())
            .map(|m| m.values.len())
            .sum();
        joint + self.forward_final.values.len() + self.goal.values.len() + self.posterior_final.values.len()
    }
}

/// Run the full chain with `f_1 = δ(s − start) π(a)` and `b(s_T) = goal`.
pub fn run_flows(
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
    start: Cell,
    start_actions: &[f64; N_ACTIONS],
    goal: &StateMarginal,
    horizon: usize,
) -> Result<FlowSet> {
    let map = kernel.map();
    if horizon < 2 {
        return Err(PlanError::Parameter(format!("horizon {horizon} must be at least 2")));
    }
    if !map.is_free(start) {
        return Err(PlanError::Parameter(format!("start {start} is not a free cell")));
    }
    let mut goal = goal.clone();
    goal.validate_goal(map)?;
    goal.normalize();

    let mut forward = Vec::with_capacity(horizon - 1);
    forward.push(MessageTensor::instantiated(map.rows(), map.cols(), start, start_actions)?);
    for _ in 2..horizon {
        let next = forward_step(forward.last().expect("nonempty"), kernel, pa)?;
        forward.push(next);
    }
    let forward_final = forward_final(forward.last().expect("nonempty"), kernel)?;

    let backward = backward_chain(kernel, pa, &goal, horizon)?;
    let posterior = forward
        .iter()
        .zip(&backward)
        .map(|(f, b)| posterior(f, b))
        .collect::<Result<Vec<_>>>()?;
    let posterior_final = posterior_final(&forward_final, &goal)?;

    Ok(FlowSet { horizon, forward, backward, posterior, forward_final, goal, posterior_final })
}

/// Boolean support of the backward recursion, used by the minimum-time search so
/// that long horizons cannot underflow to a false zero.
struct Reachability<'a> {
    kernel: &'a TransitionKernel,
    pa: &'a ActionMatrix,
}

impl Reachability<'_> {
    fn terminal(&self, goal: &[bool]) -> Vec<bool> {
        self.gather(|ci, _| goal[ci])
    }

    fn step(&self, next: &[bool]) -> Vec<bool> {
        let mut mixed = vec![false; next.len()];
        for (dst, src) in mixed.chunks_exact_mut(N_ACTIONS).zip(next.chunks_exact(N_ACTIONS)) {
            for (prev, d) in dst.iter_mut().enumerate() {
                *d = src.iter().enumerate().any(|(a, &s)| s && self.pa.get(prev, a) > 0.0);
            }
        }
        self.gather(|ci, a| mixed[ci * N_ACTIONS + a])
    }

    fn gather(&self, at: impl Fn(usize, usize) -> bool) -> Vec<bool> {
        let (rows, cols) = (self.kernel.rows(), self.kernel.cols());
        let mut out = vec![false; rows * cols * N_ACTIONS];
        for ci in 0..rows * cols {
            let (r, c) = ((ci / cols) as i64, (ci % cols) as i64);
            for a in 0..N_ACTIONS {
                let st = self.kernel.stencil_at(ci, a);
                out[ci * N_ACTIONS + a] = st.weights.iter().enumerate().any(|(ky, row)| {
                    row.iter().enumerate().any(|(kx, &w)| {
                        w > 0.0 && at((r + ky as i64 - 1) as usize * cols + (c + kx as i64 - 1) as usize, a)
                    })
                });
            }
        }
        out
    }
}

/// Smallest horizon `T` (in time slices, start at `t = 1`) at which the
/// backward flow from `goal` has positive mass at `start`, summed over actions.
/// `T = 1` when the start already lies in the goal support.
pub fn min_time(
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
    start: Cell,
    goal: &StateMarginal,
    t_max: usize,
) -> Result<usize> {
    min_time_from(kernel, pa, start, &[1.0; N_ACTIONS], goal, t_max)
}

/// Like [`min_time`], but only actions with positive weight in `start_actions`
/// count at the start cell.
pub fn min_time_from(
    kernel: &TransitionKernel,
    pa: &ActionMatrix,
    start: Cell,
    start_actions: &[f64; N_ACTIONS],
    goal: &StateMarginal,
    t_max: usize,
) -> Result<usize> {
    let map = kernel.map();
    if !map.is_free(start) {
        return Err(PlanError::Parameter(format!("start {start} is not a free cell")));
    }
    goal.validate_goal(map)?;
    let goal_support: Vec<bool> = goal.values.iter().map(|&v| v > 0.0).collect();
    if goal_support[map.index(start)] {
        return Ok(1);
    }
    let reach = Reachability { kernel, pa };
    let base = map.index(start) * N_ACTIONS;
    let hits = |r: &[bool]| (0..N_ACTIONS).any(|a| start_actions[a] > 0.0 && r[base + a]);

    let mut current = reach.terminal(&goal_support);
    let mut horizon = 2;
    while horizon <= t_max {
        if hits(&current) {
            return Ok(horizon);
        }
        if current.iter().all(|&r| !r) {
            break;
        }
        current = reach.step(&current);
        horizon += 1;
    }
    Err(PlanError::Unreachable { t_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{action_matrix, build_kernel, default_masks};

    fn setup(ascii: &str) -> (TransitionKernel, ActionMatrix) {
        let map = GridMap::from_ascii(ascii).unwrap();
        (build_kernel(&map, &default_masks(0.8).unwrap()).unwrap(), action_matrix(0.0).unwrap())
    }

    const EMPTY5: &str = ".....\n.....\n.....\n.....\n.....";

    #[test]
    fn still_delta_stays_put() {
        let (k, pa) = setup(EMPTY5);
        let f = MessageTensor::delta(5, 5, MessageKind::Forward, Cell::new(1, 3), Action::Still);
        let out = forward_step(&f, &k, &pa).unwrap();
        assert!((out.cell_mass(Cell::new(1, 3)) - 1.0).abs() < 1e-12);
        for a in Action::ALL {
            assert!((out.get(Cell::new(1, 3), a) - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn up_delta_spreads_per_stencil() {
        let (k, pa) = setup(EMPTY5);
        let f = MessageTensor::delta(5, 5, MessageKind::Forward, Cell::new(2, 2), Action::Up);
        let out = forward_step(&f, &k, &pa).unwrap();
        let m = out.state_marginal();
        let expect = [((1, 2), 0.8), ((1, 1), 0.095), ((1, 3), 0.095), ((2, 2), 0.01)];
        for ((r, c), p) in expect {
            assert!((m.get(Cell::new(r, c)) - p).abs() < 1e-12);
            for a in Action::ALL {
                assert!((out.get(Cell::new(r, c), a) - p / 9.0).abs() < 1e-12);
            }
        }
        assert_eq!(m.support().len(), 4);
    }

    #[test]
    fn dead_forward_is_an_error() {
        let (k, pa) = setup(EMPTY5);
        let f = MessageTensor::zeros(5, 5, MessageKind::Forward);
        assert_eq!(forward_step(&f, &k, &pa), Err(PlanError::DeadFlow));
        assert_eq!(forward_final(&f, &k), Err(PlanError::DeadFlow));
    }

    #[test]
    fn backward_from_goal_covers_neighborhood() {
        let (k, pa) = setup(EMPTY5);
        let g = Cell::new(2, 2);
        let terminal = backward_terminal(&StateMarginal::delta(5, 5, g), &k).unwrap();
        let b = backward_step(&terminal, &k, &pa).unwrap();
        // b_{T-2} reaches two cells out; the terminal message itself is exactly the 3×3 block
        let support: Vec<Cell> = terminal.state_marginal().support();
        assert_eq!(support.len(), 9);
        assert!(support.iter().all(|c| c.chebyshev(g) <= 1));
        assert!((b.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_step_one_step_support_is_neighborhood() {
        let (k, pa) = setup(EMPTY5);
        let g = Cell::new(2, 2);
        let mut b = MessageTensor::zeros(5, 5, MessageKind::Backward);
        for a in 0..N_ACTIONS {
            b.values[(2 * 5 + 2) * N_ACTIONS + a] = 1.0 / 9.0;
        }
        let out = backward_step(&b, &k, &pa).unwrap();
        let support = out.state_marginal().support();
        let expect: Vec<Cell> = k.map().cells().filter(|c| c.chebyshev(g) <= 1).collect();
        assert_eq!(support, expect);
    }

    #[test]
    fn uniform_backward_stays_positive() {
        let (k, pa) = setup(EMPTY5);
        let b = MessageTensor::from_values(5, 5, MessageKind::Backward, vec![1.0; 225]).unwrap();
        let out = backward_step(&b, &k, &pa).unwrap();
        assert!(out.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn terminal_support_matches_reaching_stencils() {
        let (k, _) = setup("..#..\n.....\n.#...\n.....\n.....");
        let g = Cell::new(1, 2);
        let t = backward_terminal(&StateMarginal::delta(5, 5, g), &k).unwrap();
        for cell in k.map().cells() {
            for a in Action::ALL {
                assert_eq!(t.get(cell, a) > 0.0, k.prob(cell, a, g) > 0.0, "{cell} {a}");
            }
        }
    }

    #[test]
    fn terminal_is_linear_in_goal() {
        let (k, _) = setup(EMPTY5);
        let (g1, g2) = (Cell::new(0, 4), Cell::new(3, 1));
        let mut both = StateMarginal::zeros(5, 5);
        both.set(g1, 0.5);
        both.set(g2, 0.5);
        let tb = backward_terminal(&both, &k).unwrap();
        // linearity holds before normalization, so compare against the raw gathers
        let raw1 = gather(&k, |ci, _| if ci == k.map().index(g1) { 1.0 } else { 0.0 });
        let raw2 = gather(&k, |ci, _| if ci == k.map().index(g2) { 1.0 } else { 0.0 });
        let total: f64 = raw1.iter().chain(&raw2).sum();
        for i in 0..tb.values.len() {
            assert!((tb.values[i] - (raw1[i] + raw2[i]) / total).abs() < 1e-12);
        }
    }

    #[test]
    fn goal_on_obstacle_is_invalid() {
        let (k, _) = setup("..#\n...");
        let g = StateMarginal::delta(2, 3, Cell::new(0, 2));
        assert!(matches!(backward_terminal(&g, &k), Err(PlanError::InvalidGoal(_))));
        let z = StateMarginal::zeros(2, 3);
        assert!(matches!(backward_terminal(&z, &k), Err(PlanError::InvalidGoal(_))));
    }

    #[test]
    fn posterior_cases() {
        let f = MessageTensor::delta(3, 3, MessageKind::Forward, Cell::new(1, 1), Action::Left);
        let b = MessageTensor::from_values(3, 3, MessageKind::Backward, vec![0.3; 81]).unwrap();
        assert_eq!(posterior(&f, &b).unwrap().values(), f.values());
        let mut other = MessageTensor::zeros(3, 3, MessageKind::Backward);
        other.values[0] = 1.0;
        assert!(posterior(&f, &other).unwrap().is_dead());
        let wrong = MessageTensor::zeros(2, 3, MessageKind::Backward);
        assert!(matches!(posterior(&f, &wrong), Err(PlanError::ShapeMismatch(_))));
    }

    #[test]
    fn forward_final_of_still_delta() {
        let (k, _) = setup(EMPTY5);
        let f = MessageTensor::delta(5, 5, MessageKind::Forward, Cell::new(4, 0), Action::Still);
        let m = forward_final(&f, &k).unwrap();
        assert_eq!(m.support(), vec![Cell::new(4, 0)]);
        assert!((m.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_time_cases() {
        let (k, pa) = setup(EMPTY5);
        let g = StateMarginal::delta(5, 5, Cell::new(4, 4));
        assert_eq!(min_time(&k, &pa, Cell::new(0, 0), &g, 50), Ok(5));
        assert_eq!(min_time(&k, &pa, Cell::new(4, 4), &g, 50), Ok(1));
        assert_eq!(min_time(&k, &pa, Cell::new(0, 0), &g, 4), Err(PlanError::Unreachable { t_max: 4 }));

        let (k, pa) = setup(".....\n.###.\n.#.#.\n.###.\n.....");
        let g = StateMarginal::delta(5, 5, Cell::new(2, 2));
        assert_eq!(min_time(&k, &pa, Cell::new(0, 0), &g, 100), Err(PlanError::Unreachable { t_max: 100 }));
    }

    #[test]
    fn min_time_respects_start_actions() {
        // with full stiffness the heading never changes, so a still start never moves
        let map = GridMap::empty(5, 5).unwrap();
        let k = build_kernel(&map, &default_masks(0.8).unwrap()).unwrap();
        let pa = action_matrix(1.0).unwrap();
        let g = StateMarginal::delta(5, 5, Cell::new(0, 3));
        let mut still = [0.0; N_ACTIONS];
        still[0] = 1.0;
        assert!(min_time_from(&k, &pa, Cell::new(0, 0), &still, &g, 30).is_err());
        let mut right = [0.0; N_ACTIONS];
        right[Action::Right.index()] = 1.0;
        assert_eq!(min_time_from(&k, &pa, Cell::new(0, 0), &right, &g, 30), Ok(4));
    }

    #[test]
    fn run_flows_walled_off_is_infeasible() {
        let (k, pa) = setup("..#..\n..#..\n..#..");
        let g = StateMarginal::delta(3, 5, Cell::new(1, 4));
        let flows = run_flows(&k, &pa, Cell::new(1, 0), &[1.0; 9], &g, 8).unwrap();
        for t in 1..8 {
            assert!(flows.posterior(t).is_dead());
        }
        assert!(flows.posterior_final().is_dead());
        assert!(!flows.is_feasible());
    }

    #[test]
    fn run_flows_adjacent_two_slices() {
        let (k, pa) = setup(EMPTY5);
        let start = Cell::new(2, 2);
        let goal = Cell::new(2, 3);
        let flows = run_flows(&k, &pa, start, &[1.0; 9], &StateMarginal::delta(5, 5, goal), 2).unwrap();
        let p = flows.posterior(1);
        assert_eq!(p.state_marginal().support(), vec![start]);
        for a in Action::ALL {
            assert_eq!(p.get(start, a) > 0.0, k.prob(start, a, goal) > 0.0);
        }
        assert_eq!(flows.stored_values(), 3 * 25 * 9 + 3 * 25);
    }
}

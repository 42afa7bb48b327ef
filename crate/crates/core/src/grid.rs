//! Grids, the nine-action alphabet and the obstacle-censored transition kernel.
//!
//! Coordinates are `(row, col)` with row 0 at the top; "up" decreases the row.

use std::fmt;

use crate::error::{PlanError, Result};

/// Number of actions in the alphabet.
pub const N_ACTIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    /// Chebyshev (king-move) distance.
    pub fn chebyshev(self, other: Cell) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    /// Neighbor at displacement `(dy, dx)`, if it stays inside a `rows × cols` grid.
    pub fn offset(self, dy: i32, dx: i32, rows: usize, cols: usize) -> Option<Cell> {
        let r = self.row as i64 + dy as i64;
        let c = self.col as i64 + dx as i64;
        if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 {
            None
        } else {
            Some(Cell::new(r as usize, c as usize))
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Still = 0,
    Up = 1,
    UpRight = 2,
    Right = 3,
    DownRight = 4,
    Down = 5,
    DownLeft = 6,
    Left = 7,
    UpLeft = 8,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [
        Action::Still,
        Action::Up,
        Action::UpRight,
        Action::Right,
        Action::DownRight,
        Action::Down,
        Action::DownLeft,
        Action::Left,
        Action::UpLeft,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    /// `(dy, dx)` displacement of the intended move.
    pub fn displacement(self) -> (i32, i32) {
        match self {
            Action::Still => (0, 0),
            Action::Up => (-1, 0),
            Action::UpRight => (-1, 1),
            Action::Right => (0, 1),
            Action::DownRight => (1, 1),
            Action::Down => (1, 0),
            Action::DownLeft => (1, -1),
            Action::Left => (0, -1),
            Action::UpLeft => (-1, -1),
        }
    }

    /// The directional action whose displacement is `(dy, dx)`.
    pub fn from_displacement(dy: i32, dx: i32) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.displacement() == (dy, dx))
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Still => "still",
            Action::Up => "up",
            Action::UpRight => "up-right",
            Action::Right => "right",
            Action::DownRight => "down-right",
            Action::Down => "down",
            Action::DownLeft => "down-left",
            Action::Left => "left",
            Action::UpLeft => "up-left",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// The two directional actions adjacent to this one on the compass rose.
    fn flanks(self) -> Option<(Action, Action)> {
        let i = self.index();
        if i == 0 {
            return None;
        }
        // directional actions occupy indices 1..=8 in clockwise order
        let ccw = (i + 6) % 8 + 1;
        let cw = i % 8 + 1;
        Some((Action::ALL[ccw], Action::ALL[cw]))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rectangular obstacle map. `true` marks an obstacle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl GridMap {
    pub fn new(rows: usize, cols: usize, mask: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PlanError::Parameter("grid dimensions must be positive".into()));
        }
        if mask.len() != rows * cols {
            return Err(PlanError::Parameter(format!(
                "mask has {} cells, expected {rows}×{cols}",
                mask.len()
            )));
        }
        Ok(GridMap { rows, cols, mask })
    }

    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![false; rows * cols])
    }

    /// Build from a 0/1 matrix (1 = obstacle).
    pub fn from_binary(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut mask = Vec::with_capacity(n * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(PlanError::Parameter(format!("row {r} is ragged")));
            }
            for &w in row {
                match w {
                    0 => mask.push(false),
                    1 => mask.push(true),
                    other => {
                        return Err(PlanError::Parameter(format!("mask entry {other} is not 0 or 1")))
                    }
                }
            }
        }
        Self::new(n, m, mask)
    }

    /// Build from text rows where `#` is an obstacle and anything else is free.
    pub fn from_ascii(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let rows: Vec<Vec<u8>> = lines
            .iter()
            .map(|l| l.chars().map(|c| u8::from(c == '#')).collect())
            .collect();
        Self::from_binary(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.cols, index % self.cols)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    /// Out-of-bounds cells count as obstacles.
    pub fn is_obstacle(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.mask[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_obstacle(cell)
    }

    pub fn set_obstacle(&mut self, cell: Cell, obstacle: bool) {
        let i = self.index(cell);
        self.mask[i] = obstacle;
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_cells()).map(|i| self.cell(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| self.is_free(c))
    }
}

/// 3×3 next-state distribution centered on the current cell, indexed `[dy + 1][dx + 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilMask {
    pub weights: [[f64; 3]; 3],
}

impl StencilMask {
    pub const ZERO: StencilMask = StencilMask { weights: [[0.0; 3]; 3] };

    pub fn get(&self, dy: i32, dx: i32) -> f64 {
        self.weights[(dy + 1) as usize][(dx + 1) as usize]
    }

    pub fn set(&mut self, dy: i32, dx: i32, w: f64) {
        self.weights[(dy + 1) as usize][(dx + 1) as usize] = w;
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().flatten().filter(|&&w| w != 0.0).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().flatten().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(PlanError::Parameter("stencil weights must be finite and nonnegative".into()));
        }
        let s = self.sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(PlanError::Parameter(format!("stencil weights sum to {s}, not 1")));
        }
        Ok(())
    }
}

/// One uncensored stencil per action, indexed by `Action::index`.
pub type ActionMasks = [StencilMask; N_ACTIONS];

pub const DEFAULT_SHARPNESS: f64 = 0.8;

/// Directional masks: `κ` on the intended cell, `(1 − κ − σ)/2` on each of its
/// two flanking neighbors and `σ = 0.05·(1 − κ)` on the current cell.
/// "Still" is deterministic.
pub fn default_masks(sharpness: f64) -> Result<ActionMasks> {
    if !(sharpness > 0.0 && sharpness <= 1.0) {
        return Err(PlanError::Parameter(format!("sharpness {sharpness} outside (0, 1]")));
    }
    let stay = 0.05 * (1.0 - sharpness);
    let side = (1.0 - sharpness - stay) / 2.0;
    let mut masks = [StencilMask::ZERO; N_ACTIONS];
    masks[0].set(0, 0, 1.0);
    for action in &Action::ALL[1..] {
        let m = &mut masks[action.index()];
        let (dy, dx) = action.displacement();
        m.set(dy, dx, sharpness);
        let (l, r) = action.flanks().expect("directional action");
        let (ly, lx) = l.displacement();
        let (ry, rx) = r.displacement();
        m.set(ly, lx, side);
        m.set(ry, rx, side);
        m.set(0, 0, stay);
    }
    Ok(masks)
}

/// Row-stochastic action transition matrix `P_A[prev][next]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMatrix {
    entries: [[f64; N_ACTIONS]; N_ACTIONS],
    stiffness: f64,
}

impl ActionMatrix {
    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    pub fn get(&self, prev: usize, next: usize) -> f64 {
        self.entries[prev][next]
    }

    pub fn row(&self, prev: Action) -> [f64; N_ACTIONS] {
        self.entries[prev.index()]
    }

    pub fn entries(&self) -> &[[f64; N_ACTIONS]; N_ACTIONS] {
        &self.entries
    }
}

/// `P_A = λ·I + (1 − λ)/n_A · 1`. `λ = 0` is the uniform matrix.
pub fn action_matrix(stiffness: f64) -> Result<ActionMatrix> {
    if !(0.0..=1.0).contains(&stiffness) {
        return Err(PlanError::Parameter(format!("stiffness {stiffness} outside [0, 1]")));
    }
    let off = (1.0 - stiffness) / N_ACTIONS as f64;
    let mut entries = [[off; N_ACTIONS]; N_ACTIONS];
    for (i, row) in entries.iter_mut().enumerate() {
        row[i] += stiffness;
    }
    Ok(ActionMatrix { entries, stiffness })
}

/// Per-cell, per-action censored stencils: the plant `p(s_t | s_{t-1}, a_{t-1})`.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    map: GridMap,
    stencils: Vec<StencilMask>,
}

impl TransitionKernel {
    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn rows(&self) -> usize {
        self.map.rows
    }

    pub fn cols(&self) -> usize {
        self.map.cols
    }

    pub fn stencil(&self, cell: Cell, action: Action) -> &StencilMask {
        &self.stencils[self.map.index(cell) * N_ACTIONS + action.index()]
    }

    /// Stencil by flat cell index and action index.
    pub fn stencil_at(&self, cell_index: usize, action_index: usize) -> &StencilMask {
        &self.stencils[cell_index * N_ACTIONS + action_index]
    }

    /// `p(to | from, action)`; zero when `to` is not within one step.
    pub fn prob(&self, from: Cell, action: Action, to: Cell) -> f64 {
        if !self.map.contains(from) || !self.map.contains(to) || from.chebyshev(to) > 1 {
            return 0.0;
        }
        let dy = to.row as i32 - from.row as i32;
        let dx = to.col as i32 - from.col as i32;
        self.stencil(from, action).get(dy, dx)
    }
}

/// Censor each mask against obstacles and bounds, then renormalize what remains.
/// Obstacle cells get all-zero stencils.
pub fn build_kernel(map: &GridMap, masks: &ActionMasks) -> Result<TransitionKernel> {
    for m in masks {
        m.validate()?;
    }
    let mut stencils = Vec::with_capacity(map.n_cells() * N_ACTIONS);
    for cell in map.cells() {
        if map.is_obstacle(cell) {
            stencils.extend(std::iter::repeat_n(StencilMask::ZERO, N_ACTIONS));
            continue;
        }
        for action in Action::ALL {
            let mut st = masks[action.index()];
            let mut censored = false;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let blocked = cell
                        .offset(dy, dx, map.rows, map.cols)
                        .is_none_or(|c| map.is_obstacle(c));
                    if blocked && st.get(dy, dx) != 0.0 {
                        st.set(dy, dx, 0.0);
                        censored = true;
                    }
                }
            }
            if censored {
                let total = st.sum();
                if total <= 0.0 {
                    return Err(PlanError::KernelDegenerate { cell, action });
                }
                for w in st.weights.iter_mut().flatten() {
                    *w /= total;
                }
            }
            stencils.push(st);
        }
    }
    Ok(TransitionKernel { map: map.clone(), stencils })
}

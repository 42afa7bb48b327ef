//! Scenario text files.
//!
//! ```text
//! horizon = auto
//! kappa = 0.8
//! ---
//! S..#
//! .#..
//! ...G
//! ```
//!
//! Header lines are `key = value` and end at a `---` line; the header is
//! optional. Grid alphabet: `#` obstacle, `.` free, `S` start, `G` goal, digits
//! `1`-`9` agent starts and letters `a`-`i` the matching agent goals. A file
//! holds either a single-agent scenario (`S`/`G`) or a multi-agent world
//! (digits/letters), never both.
//!
//! | key          | value                                     | default           |
//! |--------------|-------------------------------------------|-------------------|
//! | `horizon`    | `auto` or a slice count                   | `auto`            |
//! | `tmax`       | search / simulation cap in slices         | `4·N·M + 1` / 100 |
//! | `kappa`      | mask sharpness in (0, 1]                  | 0.8               |
//! | `lambda`     | motion stiffness in [0, 1]                | 0                 |
//! | `seed`       | unsigned 64-bit integer                   | 0                 |
//! | `policy`     | `abort`, `wait` or `sample`               | abort / wait      |
//! | `schedule`   | `fixed` or `random`                       | `fixed`           |
//! | `weights`    | comma-separated goal weights              | uniform           |
//! | `goals`      | extra goal cells, `row,col; row,col`      | none              |
//! | `start_action` | heading before the first step           | `still`           |
//! | `goal_stop`  | `true` or `false`                         | `true`            |
//! | `arrived`    | `remain` or `vanish`                      | `remain`          |
//!
//! Goals are ordered row-major over the grid, followed by the `goals` header
//! entries; `weights` follows the same order.

use std::fmt::Write as _;

use thiserror::Error;

use crate::error::PlanError;
use crate::grid::{Action, Cell, GridMap, DEFAULT_SHARPNESS};
use crate::multi::{AgentSpec, ArrivedPolicy, Schedule, SimConfig};
use crate::planner::{Horizon, NullPolicy, Path, PathStep, Scenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}{}: {message}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse { line: usize, col: Option<usize>, message: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

fn perr(line: usize, col: Option<usize>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, col, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonSetting {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub horizon: Option<HorizonSetting>,
    pub tmax: Option<usize>,
    pub kappa: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub policy: Option<NullPolicy>,
    pub schedule: Option<Schedule>,
    pub weights: Option<Vec<f64>>,
    pub goals: Option<Vec<Cell>>,
    pub start_action: Option<Action>,
    pub goal_stop: Option<bool>,
    pub arrived: Option<ArrivedPolicy>,
}

/// The parsed but uninterpreted file: header plus raw grid characters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub header: Header,
    pub grid: Vec<Vec<char>>,
    /// 1-based file line of the first grid row.
    pub grid_line: usize,
}

/// A multi-agent world read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub map: GridMap,
    pub agents: Vec<AgentSpec>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Single(Scenario),
    Multi(WorldSpec),
}

fn parse_value<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| perr(line, None, format!("invalid value {v:?} for {key}")))
}

fn parse_cell(text: &str, line: usize) -> Result<Cell, ScenarioError> {
    let mut it = text.split(',').map(str::trim);
    match (it.next(), it.next(), it.next()) {
        (Some(r), Some(c), None) => Ok(Cell::new(parse_value(r, line, "goals")?, parse_value(c, line, "goals")?)),
        _ => Err(perr(line, None, format!("invalid cell {text:?}, expected row,col"))),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let lines: Vec<&str> = text.lines().collect();
        let sep = lines.iter().position(|l| l.trim() == "---");
        let mut header = Header::default();
        let grid_start = match sep {
            None => 0,
            Some(s) => {
                for (i, raw) in lines[..s].iter().enumerate() {
                    let line = i + 1;
                    let l = raw.trim();
                    if l.is_empty() {
                        continue;
                    }
                    let (k, v) = l
                        .split_once('=')
                        .ok_or_else(|| perr(line, None, "header lines must be `key = value`"))?;
                    apply_key(&mut header, k.trim(), v.trim(), line)?;
                }
                s + 1
            }
        };

        let mut grid = Vec::new();
        let mut first_line = None;
        let body: Vec<(usize, &str)> = lines[grid_start..]
            .iter()
            .enumerate()
            .map(|(i, l)| (grid_start + i + 1, l.trim_end()))
            .collect();
        let last_nonempty = body.iter().rposition(|(_, l)| !l.is_empty());
        let body = &body[..last_nonempty.map_or(0, |p| p + 1)];
        for &(line, l) in body.iter().skip_while(|(_, l)| l.is_empty()) {
            first_line.get_or_insert(line);
            let row: Vec<char> = l.chars().collect();
            for (c, ch) in row.iter().enumerate() {
                if !matches!(ch, '#' | '.' | 'S' | 'G' | '1'..='9' | 'a'..='i') {
                    return Err(perr(line, Some(c + 1), format!("unexpected character {ch:?}")));
                }
            }
            if let Some(first) = grid.first() {
                let first: &Vec<char> = first;
                if row.len() != first.len() {
                    return Err(perr(line, None, format!("ragged grid: {} columns, expected {}", row.len(), first.len())));
                }
            }
            grid.push(row);
        }
        let grid_line = first_line.ok_or_else(|| perr(lines.len().max(1), None, "empty grid"))?;
        Ok(ScenarioFile { header, grid, grid_line })
    }

    /// Canonical text form: set header keys in a fixed order, `---`, grid.
    pub fn serialize(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        if let Some(v) = h.horizon {
            match v {
                HorizonSetting::Auto => out.push_str("horizon = auto\n"),
                HorizonSetting::Fixed(t) => writeln!(out, "horizon = {t}").unwrap(),
            }
        }
        if let Some(v) = h.tmax {
            writeln!(out, "tmax = {v}").unwrap();
        }
        if let Some(v) = h.kappa {
            writeln!(out, "kappa = {v}").unwrap();
        }
        if let Some(v) = h.lambda {
            writeln!(out, "lambda = {v}").unwrap();
        }
        if let Some(v) = h.seed {
            writeln!(out, "seed = {v}").unwrap();
        }
        if let Some(v) = h.policy {
            writeln!(out, "policy = {}", v.name()).unwrap();
        }
        if let Some(v) = h.schedule {
            writeln!(out, "schedule = {}", if v == Schedule::Fixed { "fixed" } else { "random" }).unwrap();
        }
        if let Some(v) = &h.weights {
            let w: Vec<String> = v.iter().map(f64::to_string).collect();
            writeln!(out, "weights = {}", w.join(", ")).unwrap();
        }
        if let Some(v) = &h.goals {
            let g: Vec<String> = v.iter().map(|c| format!("{},{}", c.row, c.col)).collect();
            writeln!(out, "goals = {}", g.join("; ")).unwrap();
        }
        if let Some(v) = h.start_action {
            writeln!(out, "start_action = {v}").unwrap();
        }
        if let Some(v) = h.goal_stop {
            writeln!(out, "goal_stop = {v}").unwrap();
        }
        if let Some(v) = h.arrived {
            writeln!(out, "arrived = {}", if v == ArrivedPolicy::Remain { "remain" } else { "vanish" }).unwrap();
        }
        out.push_str("---\n");
        for row in &self.grid {
            out.extend(row.iter());
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    fn map(&self) -> Result<GridMap, ScenarioError> {
        let mask = self.grid.iter().flatten().map(|&c| c == '#').collect();
        Ok(GridMap::new(self.rows(), self.cols(), mask)?)
    }

    fn cells_where(&self, pred: impl Fn(char) -> bool) -> Vec<(Cell, char)> {
        let mut out = Vec::new();
        for (r, row) in self.grid.iter().enumerate() {
            for (c, &ch) in row.iter().enumerate() {
                if pred(ch) {
                    out.push((Cell::new(r, c), ch));
                }
            }
        }
        out
    }

    fn loc(&self, cell: Cell) -> (usize, Option<usize>) {
        (self.grid_line + cell.row, Some(cell.col + 1))
    }

    /// Interpret as a single-agent scenario or a multi-agent world.
    pub fn interpret(&self) -> Result<Parsed, ScenarioError> {
        let map = self.map()?;
        let h = &self.header;
        let starts = self.cells_where(|c| c == 'S');
        let agents = self.cells_where(|c| c.is_ascii_digit());
        let grid_goals = self.cells_where(|c| c == 'G');
        let agent_goals = self.cells_where(|c| c.is_ascii_lowercase());

        let mut extra = Vec::new();
        for &cell in h.goals.iter().flatten() {
            if !map.contains(cell) {
                return Err(perr(1, None, format!("goal {cell} lies outside the grid")));
            }
            if map.is_obstacle(cell) {
                let (line, col) = self.loc(cell);
                return Err(perr(line, col, "goal on obstacle"));
            }
            extra.push(cell);
        }

        if !agents.is_empty() || !agent_goals.is_empty() {
            if let Some(&(cell, _)) = starts.first().or(grid_goals.first()) {
                let (line, col) = self.loc(cell);
                return Err(perr(line, col, "'S'/'G' cannot be mixed with agent digits and letters"));
            }
            return self.interpret_multi(map, &agents, &agent_goals).map(Parsed::Multi);
        }

        let start = match starts.as_slice() {
            [] => return Err(perr(self.grid_line, None, "no start 'S' in grid")),
            [(c, _)] => *c,
            [_, (c, _), ..] => {
                let (line, col) = self.loc(*c);
                return Err(perr(line, col, "duplicate start 'S'"));
            }
        };
        let goal_cells: Vec<Cell> = grid_goals.iter().map(|g| g.0).chain(extra).collect();
        if goal_cells.is_empty() {
            return Err(perr(self.grid_line, None, "no goal 'G' in grid or header"));
        }
        let weights = match &h.weights {
            None => vec![1.0; goal_cells.len()],
            Some(w) if w.len() == goal_cells.len() => w.clone(),
            Some(w) => {
                return Err(perr(1, None, format!("{} weights given for {} goals", w.len(), goal_cells.len())));
            }
        };
        let goals = goal_cells.into_iter().zip(weights).collect();
        let mut s = Scenario::new(map, start, goals)?;
        s.horizon = match h.horizon.unwrap_or(HorizonSetting::Auto) {
            HorizonSetting::Fixed(t) => Horizon::Fixed(t),
            HorizonSetting::Auto => Horizon::AutoMin { t_max: h.tmax.unwrap_or(4 * s.map.n_cells() + 1) },
        };
        s.sharpness = h.kappa.unwrap_or(DEFAULT_SHARPNESS);
        s.stiffness = h.lambda.unwrap_or(0.0);
        s.seed = h.seed.unwrap_or(0);
        s.policy = h.policy.unwrap_or(NullPolicy::Abort);
        s.start_action = h.start_action.unwrap_or(Action::Still);
        s.goal_stop = h.goal_stop.unwrap_or(true);
        // surface bad kernel parameters at load time
        s.model()?;
        Ok(Parsed::Single(s))
    }

    fn interpret_multi(
        &self,
        map: GridMap,
        agents: &[(Cell, char)],
        goals: &[(Cell, char)],
    ) -> Result<WorldSpec, ScenarioError> {
        let h = &self.header;
        let mut specs: Vec<AgentSpec> = Vec::new();
        for &(cell, ch) in agents {
            let id = ch.to_digit(10).expect("digit") as usize;
            if specs.iter().any(|a| a.id == id) {
                let (line, col) = self.loc(cell);
                return Err(perr(line, col, format!("duplicate agent '{ch}'")));
            }
            let letter = (b'a' + (id as u8 - 1)) as char;
            let mine: Vec<(Cell, f64)> = goals.iter().filter(|g| g.1 == letter).map(|g| (g.0, 1.0)).collect();
            if mine.is_empty() {
                let (line, col) = self.loc(cell);
                return Err(perr(line, col, format!("agent '{ch}' has no goal '{letter}'")));
            }
            let mut spec = AgentSpec::new(id, cell, mine[0].0);
            spec.goals = mine;
            spec.sharpness = h.kappa.unwrap_or(DEFAULT_SHARPNESS);
            spec.stiffness = h.lambda.unwrap_or(0.0);
            spec.policy = h.policy.unwrap_or(NullPolicy::Wait);
            specs.push(spec);
        }
        for &(cell, ch) in goals {
            let id = (ch as u8 - b'a' + 1) as usize;
            if !specs.iter().any(|a| a.id == id) {
                let (line, col) = self.loc(cell);
                return Err(perr(line, col, format!("goal '{ch}' has no agent '{id}'")));
            }
        }
        specs.sort_by_key(|a| a.id);
        let config = SimConfig {
            t_max: h.tmax.unwrap_or(100),
            schedule: h.schedule.unwrap_or(Schedule::Fixed),
            seed: h.seed.unwrap_or(0),
            arrived: h.arrived.unwrap_or(ArrivedPolicy::Remain),
        };
        Ok(WorldSpec { map, agents: specs, config })
    }
}

fn apply_key(h: &mut Header, key: &str, v: &str, line: usize) -> Result<(), ScenarioError> {
    match key {
        "horizon" => {
            h.horizon = Some(if v == "auto" { HorizonSetting::Auto } else { HorizonSetting::Fixed(parse_value(v, line, key)?) })
        }
        "tmax" => h.tmax = Some(parse_value(v, line, key)?),
        "kappa" => h.kappa = Some(parse_value(v, line, key)?),
        "lambda" => h.lambda = Some(parse_value(v, line, key)?),
        "seed" => h.seed = Some(parse_value(v, line, key)?),
        "policy" => {
            h.policy = Some(NullPolicy::from_name(v).ok_or_else(|| perr(line, None, format!("unknown policy {v:?}")))?)
        }
        "schedule" => {
            h.schedule = Some(match v {
                "fixed" => Schedule::Fixed,
                "random" => Schedule::Random,
                _ => return Err(perr(line, None, format!("unknown schedule {v:?}"))),
            })
        }
        "weights" => {
            h.weights = Some(v.split(',').map(|w| parse_value(w.trim(), line, key)).collect::<Result<_, _>>()?)
        }
        "goals" => {
            h.goals = Some(
                v.split(';').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_cell(s, line)).collect::<Result<_, _>>()?,
            )
        }
        "start_action" => {
            h.start_action =
                Some(Action::from_name(v).ok_or_else(|| perr(line, None, format!("unknown action {v:?}")))?)
        }
        "goal_stop" => h.goal_stop = Some(parse_value(v, line, key)?),
        "arrived" => {
            h.arrived = Some(match v {
                "remain" => ArrivedPolicy::Remain,
                "vanish" => ArrivedPolicy::Vanish,
                _ => return Err(perr(line, None, format!("unknown arrived policy {v:?}"))),
            })
        }
        _ => return Err(perr(line, None, format!("unknown key {key:?}"))),
    }
    Ok(())
}

/// Parse and interpret scenario text.
pub fn parse_scenario(text: &str) -> Result<Parsed, ScenarioError> {
    ScenarioFile::parse(text)?.interpret()
}

/// Path as CSV with a `t,row,col,action` header line.
pub fn path_to_csv(path: &Path) -> String {
    let mut out = String::from("t,row,col,action\n");
    for s in &path.steps {
        writeln!(out, "{},{},{},{}", s.t, s.cell.row, s.cell.col, s.action).unwrap();
    }
    out
}

/// Read a path written by [`path_to_csv`]. `reached_goal` is left false.
pub fn path_from_csv(text: &str) -> Result<Path, ScenarioError> {
    let mut steps = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        if line == 1 && l.trim() == "t,row,col,action" {
            continue;
        }
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        let [t, r, c, a] = f.as_slice() else {
            return Err(perr(line, None, "expected 4 fields"));
        };
        let action = Action::from_name(a).ok_or_else(|| perr(line, Some(4), format!("unknown action {a:?}")))?;
        steps.push(PathStep {
            t: parse_value(t, line, "t")?,
            cell: Cell::new(parse_value(r, line, "row")?, parse_value(c, line, "col")?),
            action,
        });
    }
    Ok(Path { steps, reached_goal: false })
}

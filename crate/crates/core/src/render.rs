//! Frame renderers for messages, paths and multi-agent snapshots.
//!
//! ASCII legend, one character per cell:
//!
//! | glyph | meaning                                   |
//! |-------|-------------------------------------------|
//! | `#`   | obstacle                                  |
//! | ` `   | no mass                                   |
//! | `+`   | uniform action distribution               |
//! | `·`   | most probable action is still             |
//! | `^`   | up                                        |
//! | `u`   | up-right                                  |
//! | `>`   | right                                     |
//! | `n`   | down-right                                |
//! | `v`   | down                                      |
//! | `b`   | down-left                                 |
//! | `<`   | left                                      |
//! | `p`   | up-left                                   |
//!
//! Pixmap frames are binary PPM (`P6`), one pixel per cell. Free cells have blue
//! intensity proportional to the state marginal, scaled by the frame maximum;
//! obstacles are gray.

use crate::flow::{MessageTensor, StateMarginal};
use crate::grid::{Action, Cell, GridMap, N_ACTIONS};
use crate::multi::WorldState;
use crate::planner::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ascii,
    Pixmap,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Ascii => "txt",
            Format::Pixmap => "ppm",
        }
    }
}

const OBSTACLE_RGB: [u8; 3] = [128, 128, 128];

pub fn arrow(action: Action) -> char {
    match action {
        Action::Still => '·',
        Action::Up => '^',
        Action::UpRight => 'u',
        Action::Right => '>',
        Action::DownRight => 'n',
        Action::Down => 'v',
        Action::DownLeft => 'b',
        Action::Left => '<',
        Action::UpLeft => 'p',
    }
}

fn cell_glyph(actions: &[f64]) -> char {
    let total: f64 = actions.iter().sum();
    if total == 0.0 {
        return ' ';
    }
    let uniform = actions.iter().all(|&p| (p / total - 1.0 / N_ACTIONS as f64).abs() <= 1e-12);
    if uniform {
        return '+';
    }
    let mut best = 0;
    for (a, &p) in actions.iter().enumerate() {
        if p > actions[best] {
            best = a;
        }
    }
    arrow(Action::from_index(best).expect("action"))
}

fn ppm(map: &GridMap, mut pixel: impl FnMut(Cell) -> [u8; 3]) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", map.cols(), map.rows()).into_bytes();
    for cell in map.cells() {
        out.extend_from_slice(&pixel(cell));
    }
    out
}

fn blue_frame(map: &GridMap, mass: impl Fn(Cell) -> f64) -> Vec<u8> {
    let peak = map.cells().map(&mass).fold(0.0, f64::max);
    ppm(map, |cell| {
        if map.is_obstacle(cell) {
            OBSTACLE_RGB
        } else if peak > 0.0 {
            [0, 0, (255.0 * mass(cell) / peak).round() as u8]
        } else {
            [0, 0, 0]
        }
    })
}

/// Render a joint message: per-cell argmax-action arrows (ASCII) or a
/// state-marginal intensity image (pixmap).
pub fn render_frame(tensor: &MessageTensor, map: &GridMap, format: Format) -> Vec<u8> {
    match format {
        Format::Ascii => {
            let mut s = String::new();
            for r in 0..map.rows() {
                for c in 0..map.cols() {
                    let cell = Cell::new(r, c);
                    s.push(if map.is_obstacle(cell) { '#' } else { cell_glyph(tensor.actions_at(cell)) });
                }
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Pixmap => blue_frame(map, |c| tensor.cell_mass(c)),
    }
}

/// Render a state-only marginal; ASCII marks cells with mass as `o`.
pub fn render_marginal(marginal: &StateMarginal, map: &GridMap, format: Format) -> Vec<u8> {
    match format {
        Format::Ascii => {
            let mut s = String::new();
            for r in 0..map.rows() {
                for c in 0..map.cols() {
                    let cell = Cell::new(r, c);
                    s.push(if map.is_obstacle(cell) {
                        '#'
                    } else if marginal.get(cell) > 0.0 {
                        'o'
                    } else {
                        ' '
                    });
                }
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Pixmap => blue_frame(map, |c| marginal.get(c)),
    }
}

/// Map with a path overlaid: `S` start, `G` goals, `*` visited cells.
pub fn render_path(path: &Path, map: &GridMap, goals: &[Cell]) -> String {
    let mut grid: Vec<Vec<char>> =
        (0..map.rows()).map(|r| (0..map.cols()).map(|c| if map.is_obstacle(Cell::new(r, c)) { '#' } else { '.' }).collect()).collect();
    for s in &path.steps {
        grid[s.cell.row][s.cell.col] = '*';
    }
    for g in goals {
        grid[g.row][g.col] = 'G';
    }
    if let Some(first) = path.steps.first() {
        grid[first.cell.row][first.cell.col] = 'S';
    }
    grid.into_iter().map(|r| r.into_iter().chain(std::iter::once('\n')).collect::<String>()).collect()
}

/// Agents drawn by id over the static map; goal cells of active agents are
/// shown with their letter.
pub fn render_world(world: &WorldState, ids: &[usize], goals: &[Vec<Cell>], map: &GridMap, format: Format) -> Vec<u8> {
    match format {
        Format::Ascii => {
            let mut grid: Vec<Vec<char>> = (0..map.rows())
                .map(|r| (0..map.cols()).map(|c| if map.is_obstacle(Cell::new(r, c)) { '#' } else { '.' }).collect())
                .collect();
            for (i, gs) in goals.iter().enumerate() {
                for g in gs {
                    grid[g.row][g.col] = (b'a' + (ids[i] as u8).saturating_sub(1)) as char;
                }
            }
            for (i, p) in world.poses.iter().enumerate() {
                grid[p.cell.row][p.cell.col] = char::from_digit(ids[i] as u32 % 10, 10).unwrap_or('?');
            }
            grid.into_iter().flat_map(|r| r.into_iter().chain(std::iter::once('\n'))).collect::<String>().into_bytes()
        }
        Format::Pixmap => {
            const PALETTE: [[u8; 3]; 9] = [
                [31, 119, 180],
                [255, 127, 14],
                [44, 160, 44],
                [214, 39, 40],
                [148, 103, 189],
                [140, 86, 75],
                [227, 119, 194],
                [188, 189, 34],
                [23, 190, 207],
            ];
            ppm(map, |cell| {
                if map.is_obstacle(cell) {
                    return OBSTACLE_RGB;
                }
                if let Some(i) = world.poses.iter().position(|p| p.cell == cell) {
                    return PALETTE[i % PALETTE.len()];
                }
                if let Some(i) = goals.iter().position(|gs| gs.contains(&cell)) {
                    let [r, g, b] = PALETTE[i % PALETTE.len()];
                    return [r / 2 + 128, g / 2 + 128, b / 2 + 128];
                }
                [255, 255, 255]
            })
        }
    }
}

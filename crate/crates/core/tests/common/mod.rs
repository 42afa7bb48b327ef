#![allow(dead_code)]

use probflow::grid::{Cell, GridMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Map with each cell blocked independently with probability `density`.
pub fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> GridMap {
    let mask = (0..rows * cols).map(|_| rng.gen::<f64>() < density).collect();
    GridMap::new(rows, cols, mask).unwrap()
}

/// `n` distinct free cells, or `None` when the map has too few.
pub fn free_cells(rng: &mut ChaCha8Rng, map: &GridMap, n: usize) -> Option<Vec<Cell>> {
    let mut free: Vec<Cell> = map.free_cells().collect();
    if free.len() < n {
        return None;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(free.swap_remove(rng.gen_range(0..free.len())));
    }
    Some(out)
}

pub fn dense_goal(map: &GridMap, goals: &[(Cell, f64)]) -> Vec<f64> {
    let mut g = vec![0.0; map.n_cells()];
    for &(c, w) in goals {
        g[map.index(c)] += w;
    }
    g
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

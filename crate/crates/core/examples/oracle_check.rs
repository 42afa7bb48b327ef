// Cross-check the stencil engine against the dense matrix chain and against
// brute-force trajectory enumeration on a 3×3 map.

use probflow::flow::run_flows;
use probflow::grid::{action_matrix, build_kernel, default_masks, Cell, GridMap};
use probflow::oracle::{dense_messages, enumerate_paths, enumerated_posteriors, DenseChain};
use probflow::planner::goal_marginal;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let map = GridMap::from_ascii("...\n.#.\n...")?;
    let kernel = build_kernel(&map, &default_masks(0.7)?)?;
    let pa = action_matrix(0.3)?;
    let (start, goal) = (Cell::new(0, 0), Cell::new(2, 2));
    let goal_vec: Vec<f64> = map.cells().map(|c| if c == goal { 1.0 } else { 0.0 }).collect();
    let horizon = 4;

    let flows = run_flows(&kernel, &pa, start, &[1.0; 9], &goal_marginal(&map, &[(goal, 1.0)])?, horizon)?;
    let dense = dense_messages(&DenseChain::new(&kernel, &pa, start, &[1.0; 9], &goal_vec)?, horizon)?;
    let trajectories = enumerate_paths(&kernel, &pa, start, &[1.0; 9], &goal_vec, horizon)?;
    let (joint, _) = enumerated_posteriors(&trajectories, &goal_vec, &map, horizon);

    for t in 1..horizon {
        println!(
            "t = {t}: |engine - dense| = {:.1e}, |engine - enumeration| = {:.1e}",
            max_diff(flows.posterior(t).values(), &dense.posterior[t - 1]),
            max_diff(flows.posterior(t).values(), &joint[t - 1]),
        );
    }
    let best = trajectories.iter().max_by(|a, b| a.likelihood.total_cmp(&b.likelihood)).ok_or("no trajectory")?;
    println!("{} trajectories; best {:?} via {:?}", trajectories.len(), best.cells, best.actions);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Minimum horizon on the bundled maze, checked against breadth-first search.

use probflow::oracle::bfs_distance;
use probflow::scenario::{parse_scenario, Parsed};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let Parsed::Single(scenario) = parse_scenario(include_str!("../fixtures/maze15.txt"))? else {
        return Err("expected a single-agent scenario".into());
    };
    let model = scenario.model()?;
    let t_min = scenario.resolve_horizon(&model)?;
    let goals: Vec<_> = scenario.goals.iter().map(|g| g.0).collect();
    let bfs = bfs_distance(&scenario.map, scenario.start, &goals).ok_or("goal unreachable")?;

    println!("T_min = {t_min} slices, BFS = {bfs} moves");
    assert_eq!(t_min, bfs + 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

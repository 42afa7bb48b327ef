// Scenario text in, path CSV out.

use probflow::planner::greedy_plan;
use probflow::scenario::{parse_scenario, path_from_csv, path_to_csv, Parsed, ScenarioFile};

const TEXT: &str = "\
kappa = 0.9
lambda = 0.2
start_action = right
---
S...#...
.##.#.#.
....#.#.
.#....#G
";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let file = ScenarioFile::parse(TEXT)?;
    println!("canonical form:\n{}", file.serialize());

    let Parsed::Single(scenario) = parse_scenario(TEXT)? else {
        return Err("expected a single-agent scenario".into());
    };
    let path = greedy_plan(&scenario)?;
    let csv = path_to_csv(&path);
    print!("{csv}");
    assert_eq!(path_from_csv(&csv)?.cells(), path.cells());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

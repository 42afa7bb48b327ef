// Greedy planning through the maze at the minimum horizon and with slack.

use probflow::planner::{greedy_plan, path_likelihood, Horizon};
use probflow::render::render_path;
use probflow::scenario::{parse_scenario, Parsed};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let Parsed::Single(scenario) = parse_scenario(include_str!("../fixtures/maze15.txt"))? else {
        return Err("expected a single-agent scenario".into());
    };
    let goals: Vec<_> = scenario.goals.iter().map(|g| g.0).collect();
    let t_min = scenario.resolve_horizon(&scenario.model()?)?;

    for t in [t_min, t_min + 6] {
        let s = scenario.clone().with_horizon(Horizon::Fixed(t));
        let path = greedy_plan(&s)?;
        path.validate(&s.map)?;
        println!(
            "T = {t}: {} moves, reached = {}, log-likelihood {:.3}",
            path.transitions(),
            path.reached_goal,
            path_likelihood(&path, &s)?
        );
        print!("{}", render_path(&path, &s.map, &goals));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

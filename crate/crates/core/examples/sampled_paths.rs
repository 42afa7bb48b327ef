// Posterior sampling: with no slack every draw is a shortest path, with slack
// the routes spread out.

use std::collections::BTreeMap;

use probflow::planner::{sample_paths, Horizon};
use probflow::scenario::{parse_scenario, Parsed};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let Parsed::Single(scenario) = parse_scenario(include_str!("../fixtures/maze15.txt"))? else {
        return Err("expected a single-agent scenario".into());
    };
    let t_min = scenario.resolve_horizon(&scenario.model()?)?;

    for slack in [0, 12] {
        let s = scenario.clone().with_horizon(Horizon::Fixed(t_min + slack));
        let mut routes: BTreeMap<Vec<_>, usize> = BTreeMap::new();
        for p in sample_paths(&s, 20)? {
            let mut cells = p.cells();
            cells.dedup();
            *routes.entry(cells).or_default() += 1;
        }
        println!("T = T_min + {slack}: {} distinct routes over 20 draws", routes.len());
        for (route, n) in routes.iter().take(3) {
            println!("  {n:>2}x  {} cells, ends at {}", route.len(), route.last().expect("nonempty"));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Several goals at once. Greedy plans head for the nearest goal whatever the
// weights; sampling with slack shows how the weights shift the endpoints.

use probflow::grid::Cell;
use probflow::planner::{greedy_plan, sample_paths, Horizon, Scenario};
use probflow::render::render_path;
use probflow::scenario::{parse_scenario, Parsed};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let Parsed::Single(file) = parse_scenario(include_str!("../fixtures/multigoal.txt"))? else {
        return Err("expected a single-agent scenario".into());
    };
    let goals: Vec<Cell> = file.goals.iter().map(|g| g.0).collect();
    let (near, far) = (goals[0], goals[1]);
    let t_min = file.resolve_horizon(&file.model()?)?;

    let greedy = greedy_plan(&file.clone().with_horizon(Horizon::Fixed(t_min + 4)))?;
    println!("greedy, weights 0.2 / 0.8, T = {}: ends at {}", t_min + 4, greedy.last_cell().expect("nonempty"));
    print!("{}", render_path(&greedy, &file.map, &goals));

    for far_weight in [0.5, 0.8, 0.9999] {
        let s = Scenario::new(file.map.clone(), file.start, vec![(near, 1.0 - far_weight), (far, far_weight)])?
            .with_horizon(Horizon::Fixed(t_min + 4))
            .with_seed(3);
        let paths = sample_paths(&s, 200)?;
        let hits = paths.iter().filter(|p| p.last_cell() == Some(far)).count();
        println!("far goal weight {far_weight}: {hits}/200 samples end at {far}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

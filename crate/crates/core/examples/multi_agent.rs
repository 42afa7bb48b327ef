// Two agents share a one-cell gap; the second waits its turn.

use probflow::multi::simulate;
use probflow::render::{render_world, Format};
use probflow::scenario::{parse_scenario, Parsed};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let Parsed::Multi(world) = parse_scenario(include_str!("../fixtures/passage.txt"))? else {
        return Err("expected a multi-agent world".into());
    };
    let outcome = simulate(&world.agents, &world.map, &world.config)?;
    let ids: Vec<usize> = world.agents.iter().map(|a| a.id).collect();
    let goals: Vec<Vec<_>> = world.agents.iter().map(|a| a.goals.iter().map(|g| g.0).collect()).collect();

    for state in &outcome.trace {
        println!("t = {}", state.t);
        print!("{}", String::from_utf8(render_world(state, &ids, &goals, &world.map, Format::Ascii))?);
    }
    println!("{:?} after {} slices, {} waits", outcome.status, outcome.trace.len(), outcome.wait_count());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Forward diffusion from a single cell, printed as action-arrow frames.

use probflow::flow::{forward_step, MessageKind, MessageTensor};
use probflow::grid::{action_matrix, build_kernel, default_masks, Action, Cell, GridMap};
use probflow::render::{render_frame, Format};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let map = GridMap::from_ascii(
        "...........\n\
         ...........\n\
         ....###....\n\
         ...........\n\
         ...........",
    )?;
    let kernel = build_kernel(&map, &default_masks(0.8)?)?;
    let pa = action_matrix(0.5)?;

    // start heading right; stiffness 0.5 keeps the heading for a while
    let mut f = MessageTensor::delta(map.rows(), map.cols(), MessageKind::Forward, Cell::new(3, 1), Action::Right);
    for t in 1..=5 {
        println!("t = {t}  (mass {:.3})", f.sum());
        print!("{}", String::from_utf8(render_frame(&f, &map, Format::Ascii))?);
        f = forward_step(&f, &kernel, &pa)?;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

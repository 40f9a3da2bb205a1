//! Minimizes a user-supplied separable polynomial: a tilted double well
//! whose deeper side is chosen by the sign of the linear term.
//!
//! ```text
//! cargo run --release --example custom_potential -- [tilt]
//! ```

use ipa_core::ipa::{run, IpaConfig};
use ipa_core::oracle::{exhaustive_minima, flat_to_slots};
use ipa_core::potentials::PolynomialPotential;
use ipa_core::qtt::{GridSpec, ProductGrid};

fn main() -> ipa_core::Result<()> {
    let tilt: f64 = std::env::args().nth(1).map_or(-0.3, |a| a.parse().expect("tilt"));
    let text = format!(
        "# (x^2 - 1)^2 + tilt x on every axis\n\
         all: 1 {tilt} -2 0 1\n\
         # the second axis is a plain parabola around 0.5\n\
         1: 0.25 -1 1\n"
    );
    let pot = PolynomialPotential::parse(&text, 2)?;
    let grid = ProductGrid::uniform(GridSpec::new(-2.0, 2.0, 10)?, 2)?;

    let mut config = IpaConfig::for_grid(20.0, &grid);
    config.max_iterations = 400;
    let out = run(&pot, &grid, &config)?;
    let x = out.state.expectation();
    println!("converged {} after {} iterations", out.converged(), out.state.iteration);
    println!("<x> = ({:.6}, {:.6})", x[0], x[1]);

    let best = exhaustive_minima(&pot, &grid)?;
    let slots = flat_to_slots(&grid, best[0]);
    println!(
        "exhaustive minimum at ({:.6}, {:.6})",
        grid.axes()[0].coord(slots[0]),
        grid.axes()[1].coord(slots[1])
    );
    Ok(())
}

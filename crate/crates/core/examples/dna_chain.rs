//! Locates the global minimum of the 50-site DNA double-well chain.
//!
//! ```text
//! cargo run --release --example dna_chain -- [dims] [iterations]
//! ```

use ipa_core::ipa::{boltzmann_tt, iterate, IpaConfig, IpaState};
use ipa_core::potentials::DnaPotential;
use ipa_core::qtt::{GridSpec, ProductGrid};

fn main() -> ipa_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let dims: usize = args.next().map_or(50, |a| a.parse().expect("dims"));
    let iterations: usize = args.next().map_or(30, |a| a.parse().expect("iterations"));

    let grid = ProductGrid::uniform(GridSpec::new(-1.5, 2.5, 8)?, dims)?;
    let mut config = IpaConfig::for_grid(10.0, &grid);
    config.fixed_iterations = Some(iterations);

    let (u, report) = boltzmann_tt(&DnaPotential, &grid, &config)?;
    println!("U ranks (first axis): {:?}", &report.ranks[..9]);

    let (state, _) = iterate(IpaState::uniform(&grid)?, &u, &grid, &config)?;
    println!("{:>4} {:>12} {:>12} {:>5}", "k", "<x_0>", "max|<x>+1|", "rank");
    for (k, x) in state.expectation_trace.iter().enumerate() {
        let err = x.iter().map(|v| (v + 1.0).abs()).fold(0.0, f64::max);
        let rank = if k == 0 { 1 } else { state.rank_history[k - 1] };
        println!("{k:>4} {:>12.6} {err:>12.3e} {rank:>5}", x[0]);
    }
    Ok(())
}

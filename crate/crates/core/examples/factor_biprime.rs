//! Splits a product of two primes with a single amplification step.
//!
//! ```text
//! cargo run --release --example factor_biprime -- [N] [p_max]
//! ```

use ipa_core::ipa::{run, split_pair, IpaConfig};
use ipa_core::potentials::{parse_target, ModPotential, PrimeGrid};
use ipa_core::RoundingPolicy;

fn main() -> ipa_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = parse_target(&args.next().unwrap_or_else(|| "9998000099".into()))?;
    let p_max: u64 = args.next().map_or(100_003, |a| a.parse().expect("p_max"));

    let primes = PrimeGrid::new(p_max)?;
    let grid = primes.product_grid();
    let pot = ModPotential::new(n.clone(), primes.clone());
    println!("N = {n}, {} primes on 2^{} slots", primes.primes().len(), primes.depth());

    let mut config = IpaConfig::for_grid(20.0, &grid);
    config.fixed_iterations = Some(1);
    let out = run(&pot, &grid, &config)?;
    println!("Boltzmann operator: {:?}, ranks {:?}", out.boltzmann.method, out.boltzmann.ranks);

    let (lo, hi) = split_pair(&out.state.density, &grid, 0, RoundingPolicy::default())?;
    let axis = &grid.axes()[0];
    let p = primes.prime_at(axis.nearest_slot(lo[0])).expect("prime slot");
    let q = primes.prime_at(axis.nearest_slot(hi[0])).expect("prime slot");
    println!("after {} iteration: <x> = {:.6} | {:.6}", out.state.iteration, lo[0], hi[0]);
    println!("{p} x {q} = {}  (matches: {})", p as u128 * q as u128, num_bigint::BigUint::from(p) * q == n);
    Ok(())
}

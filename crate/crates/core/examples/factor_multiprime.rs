//! Finds every prime factor below `p_max` by peeling the comb of zero
//! remainders with a ramp, then recovers exponents by division.
//!
//! ```text
//! cargo run --release --example factor_multiprime -- [exponent] [p_max]
//! ```

use ipa_core::ipa::{resolve_all_minima, run, IpaConfig};
use ipa_core::potentials::{exponents, ModPotential, PrimeGrid};
use num_bigint::BigUint;

fn main() -> ipa_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let power: u32 = args.next().map_or(5, |a| a.parse().expect("exponent"));
    let p_max: u64 = args.next().map_or(128, |a| a.parse().expect("p_max"));

    let base = BigUint::from(9u32 * 11 * 17 * 23 * 41 * 53) * BigUint::from(79u32 * 101 * 109);
    let n = base.pow(power);
    println!("N = (3^2 11 17 23 41 53 79 101 109)^{power}, {} digits", n.to_string().len());

    let primes = PrimeGrid::new(p_max)?;
    let grid = primes.product_grid();
    let pot = ModPotential::new(n.clone(), primes.clone());

    let config = IpaConfig::for_grid(30.0, &grid);
    let out = run(&pot, &grid, &config)?;
    println!("comb after {} iterations", out.state.iteration);

    let report = resolve_all_minima(&out.state.density, &grid, 0.5, &config)?;
    let found: Vec<u64> = report.slots.iter().filter_map(|s| primes.prime_at(s[0])).collect();
    let (exps, rest) = exponents(&n, &found);
    println!("ramp steps {}, complete {}", report.iterations_used, report.complete);
    for ((p, e), m) in found.iter().zip(&exps).zip(&report.masses) {
        println!("  {p:>4} ^ {e:<4} mass {m:.4}");
    }
    println!("cofactor {rest}");
    Ok(())
}

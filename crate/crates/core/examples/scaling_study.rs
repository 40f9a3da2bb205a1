//! Wall time of biprime factorization as `N` grows, with `p_max` set to the
//! larger factor.
//!
//! ```text
//! cargo run --release --example scaling_study
//! ```

use std::time::Instant;

use ipa_core::ipa::{run, split_pair, IpaConfig};
use ipa_core::potentials::{ModPotential, PrimeGrid};
use ipa_core::RoundingPolicy;
use num_bigint::BigUint;

const PAIRS: [(u64, u64); 8] = [
    (29, 37),
    (149, 163),
    (401, 409),
    (1_009, 1_013),
    (4_999, 5_003),
    (10_007, 10_009),
    (49_999, 50_021),
    (99_989, 99_991),
];

fn main() -> ipa_core::Result<()> {
    println!("{:>14} {:>7} {:>6} {:>10} {:>16}", "N", "p_max", "depth", "seconds", "factors");
    for (p, q) in PAIRS {
        let n = BigUint::from(p) * q;
        let t = Instant::now();
        let primes = PrimeGrid::new(q)?;
        let grid = primes.product_grid();
        let pot = ModPotential::new(n.clone(), primes.clone());
        let mut config = IpaConfig::for_grid(20.0, &grid);
        config.fixed_iterations = Some(1);
        let out = run(&pot, &grid, &config)?;
        let (lo, hi) = split_pair(&out.state.density, &grid, 0, RoundingPolicy::default())?;
        let elapsed = t.elapsed().as_secs_f64();
        let axis = &grid.axes()[0];
        let found = (
            primes.prime_at(axis.nearest_slot(lo[0])).unwrap_or(0),
            primes.prime_at(axis.nearest_slot(hi[0])).unwrap_or(0),
        );
        println!("{n:>14} {q:>7} {:>6} {elapsed:>10.4} {:>16}", primes.depth(), format!("{} {}", found.0, found.1));
    }
    Ok(())
}

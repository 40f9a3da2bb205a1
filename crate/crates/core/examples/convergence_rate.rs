//! Iteration counts on the two-eigenvalue operator against the
//! `ceil(log(n − 1) / log(λ₁/λ₂))` estimate.
//!
//! ```text
//! cargo run --release --example convergence_rate
//! ```

use ipa_core::ipa::iteration_estimate;
use ipa_core::oracle::{first_step_reaching, two_level_max_amplitude, two_level_operator, DenseDensity};

fn main() -> ipa_core::Result<()> {
    println!("{:>6} {:>8} {:>9} {:>9} {:>14}", "n", "ratio", "observed", "estimate", "rho_max(k)");
    for n in [16usize, 256, 4096, 65536] {
        for ratio in [1.5, std::f64::consts::E, 10.0] {
            let u = two_level_operator(n, ratio)?;
            let rho0 = DenseDensity::uniform(n)?;
            let k = first_step_reaching(&u, &rho0, 0.5, 1000)?.expect("reaches one half");
            let estimate = iteration_estimate(n as u64, ratio)?;
            println!(
                "{n:>6} {ratio:>8.4} {k:>9} {estimate:>9} {:>14.10}",
                two_level_max_amplitude(n, ratio, k)
            );
        }
    }
    Ok(())
}

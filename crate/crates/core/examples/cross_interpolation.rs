//! Builds `exp(−β v(x))` for the DNA double well by cross interpolation
//! and compares it with the full table, error measured against the peak value.
//!
//! ```text
//! cargo run --release --example cross_interpolation -- [depth] [beta]
//! ```

use ipa_core::cross::{cross_interpolate, CrossConfig};
use ipa_core::potentials::DnaPotential;
use ipa_core::qtt::{unfold_index, GridSpec};

fn main() -> ipa_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let depth: usize = args.next().map_or(8, |a| a.parse().expect("depth"));
    let beta: f64 = args.next().map_or(10.0, |a| a.parse().expect("beta"));

    let grid = GridSpec::new(-1.5, 2.5, depth)?;
    let vmin = (0..grid.point_count())
        .map(|j| DnaPotential::single(grid.point(j)))
        .fold(f64::INFINITY, f64::min);
    let f = |bits: &[usize]| {
        let j = unfold_index(bits).expect("binary digits") as usize;
        (-beta * (DnaPotential::single(grid.point(j)) - vmin)).exp()
    };

    let config = CrossConfig::default();
    let (tt, report) = cross_interpolate(f, &vec![2; depth], &config)?;

    let n = grid.point_count();
    let (mut worst, mut peak) = (0.0f64, 0.0f64);
    for j in 0..n {
        let bits = ipa_core::qtt::fold_index(j as u64, depth)?;
        let exact = f(&bits);
        worst = worst.max((tt.eval(&bits)? - exact).abs());
        peak = peak.max(exact.abs());
    }
    println!("grid points        {n}");
    println!("ranks              {:?}", tt.ranks());
    println!("sweeps             {}", report.sweeps);
    println!("calls per sweep    {:?}", report.calls_per_sweep);
    println!("sweep calls total  {}", report.oracle_calls);
    println!("validation calls   {}", report.validation_calls);
    println!("converged          {}", report.converged);
    println!("max error / max    {:.3e}", worst / peak);
    Ok(())
}

//! Tensor-train arithmetic on quantics grids: sums, Hadamard products,
//! rounding, and the analytic position train.
//!
//! ```text
//! cargo run --release --example tt_algebra
//! ```

use ipa_core::qtt::{fold_index, position_tt, GridSpec};
use ipa_core::{RoundingPolicy, TensorTrain};

fn main() -> ipa_core::Result<()> {
    let grid = GridSpec::new(0.0, 1.0, 12)?;
    let x = position_tt(&grid);
    println!("x          ranks {:?}", x.ranks());

    // x² by Hadamard product has rank 4 before rounding and 3 after
    let sq = x.hadamard(&x)?;
    let sq_r = sq.round(RoundingPolicy::default());
    println!("x*x        ranks {:?}", sq.ranks());
    println!("round(x*x) ranks {:?}", sq_r.ranks());

    // 1 − 2x + x² = (1 − x)²
    let ones = TensorTrain::constant(&[2; 12], 1.0)?;
    let poly = ones.add(&x.scale(-2.0))?.add(&sq_r)?.round(RoundingPolicy::default());
    let j = 1234;
    let xj = grid.point(j);
    println!(
        "(1 - x)^2 at x = {xj:.6}: tt {:.12}, exact {:.12}",
        poly.eval(&fold_index(j as u64, 12)?)?,
        (1.0 - xj).powi(2)
    );

    let mean = x.sum() / grid.point_count() as f64;
    println!("mean of x {mean:.12}, <x, x> {:.6}", x.dot(&x)?);
    println!("storage {} numbers for {} grid points", poly.storage(), grid.point_count());
    Ok(())
}

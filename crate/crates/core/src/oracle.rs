//! Dense brute-force references for small grids.
//!
//! Everything here works on flat vectors in big-endian product order and
//! never touches tensor-train code.

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::qtt::ProductGrid;

/// Largest grid the dense references will expand.
pub const DENSE_ORACLE_CAP: usize = 1 << 22;

/// Nonnegative weights normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDensity {
    values: Vec<f64>,
}

impl DenseDensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::DegenerateDensity("entries must be finite and nonnegative".into()));
        }
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateDensity("total mass is zero".into()));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn grid_size(grid: &ProductGrid) -> Result<usize> {
    let n = grid.point_count();
    if n > DENSE_ORACLE_CAP as u128 {
        return Err(Error::SizeCap {
            size: n,
            cap: DENSE_ORACLE_CAP,
        });
    }
    Ok(n as usize)
}

/// Per-axis slots of flat big-endian index `flat`.
pub fn flat_to_slots(grid: &ProductGrid, flat: usize) -> Vec<usize> {
    let mut out = vec![0; grid.dims()];
    let mut rest = flat;
    for (i, axis) in grid.axes().iter().enumerate().rev() {
        out[i] = rest & (axis.slots() - 1);
        rest >>= axis.depth();
    }
    out
}

pub fn slots_to_flat(grid: &ProductGrid, slots: &[usize]) -> usize {
    grid.axes()
        .iter()
        .zip(slots)
        .fold(0, |acc, (axis, &s)| (acc << axis.depth()) | s)
}

/// Potential at every grid point, flat big-endian order.
pub fn dense_potential<P: Potential + ?Sized>(pot: &P, grid: &ProductGrid) -> Result<Vec<f64>> {
    let n = grid_size(grid)?;
    Ok((0..n).map(|j| pot.energy(grid, &flat_to_slots(grid, j))).collect())
}

/// Flat indices attaining the global minimum exactly.
pub fn exhaustive_minima<P: Potential + ?Sized>(pot: &P, grid: &ProductGrid) -> Result<Vec<usize>> {
    let v = dense_potential(pot, grid)?;
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((0..v.len()).filter(|&j| v[j] == min).collect())
}

/// `exp(−β (v − min v))` with values below 1e−300 flushed to zero.
pub fn dense_boltzmann(values: &[f64], beta: f64) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    values
        .iter()
        .map(|v| {
            let u = (-beta * (v - min)).exp();
            if u < 1e-300 {
                0.0
            } else {
                u
            }
        })
        .collect()
}

/// `u^k ρ₀ / ‖u^k ρ₀‖₁`, applied one factor at a time.
pub fn dense_power_iteration(u: &[f64], rho0: &DenseDensity, k: usize) -> Result<DenseDensity> {
    if u.len() != rho0.len() {
        return Err(Error::InvalidShape(format!(
            "u has {} entries, density {}",
            u.len(),
            rho0.len()
        )));
    }
    if u.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::DegenerateDensity("u must be finite and nonnegative".into()));
    }
    let mut rho = rho0.clone();
    for _ in 0..k {
        let next: Vec<f64> = u.iter().zip(&rho.values).map(|(a, b)| a * b).collect();
        rho = DenseDensity::new(next)?;
    }
    Ok(rho)
}

/// Dense iterates `ρ_1, …, ρ_k`.
pub fn dense_trajectory(u: &[f64], rho0: &DenseDensity, k: usize) -> Result<Vec<DenseDensity>> {
    let mut out = Vec::with_capacity(k);
    let mut rho = rho0.clone();
    for _ in 0..k {
        rho = dense_power_iteration(u, &rho, 1)?;
        out.push(rho.clone());
    }
    Ok(out)
}

/// Diagonal operator with one eigenvalue `1` at slot 0 and `1/ratio` elsewhere.
pub fn two_level_operator(n: usize, ratio: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidShape(format!("two-level operator needs n >= 2, got {n}")));
    }
    if !(ratio > 1.0) {
        return Err(Error::NoGap(ratio));
    }
    let mut u = vec![1.0 / ratio; n];
    u[0] = 1.0;
    Ok(u)
}

/// Closed form `1 / (1 + (n − 1) (λ₂/λ₁)^k)` for the two-level operator from a uniform start.
pub fn two_level_max_amplitude(n: usize, ratio: f64, k: usize) -> f64 {
    1.0 / (1.0 + (n as f64 - 1.0) * ratio.powi(-(k as i32)))
}

/// First `k ≤ max_k` at which the largest entry of `u^k ρ₀` normalized reaches `threshold`.
pub fn first_step_reaching(u: &[f64], rho0: &DenseDensity, threshold: f64, max_k: usize) -> Result<Option<usize>> {
    let mut rho = rho0.clone();
    if rho.max() >= threshold {
        return Ok(Some(0));
    }
    for k in 1..=max_k {
        rho = dense_power_iteration(u, &rho, 1)?;
        if rho.max() >= threshold {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteepnessBound {
    /// `1 − α Δx^{2γ} / U(x*)`.
    pub bound: f64,
    /// `λ₂ / λ₁` of the diagonal operator.
    pub lambda_ratio: f64,
    pub holds: bool,
}

/// Lower bound on the second-to-first eigenvalue ratio for a sampled `U`
/// with a local cap `U(x*) − α |x − x*|^{2γ}` around its maximum.
pub fn steepness_rate_bound(u: &[f64], spacing: f64, alpha: f64, gamma: u32) -> Result<SteepnessBound> {
    if u.len() < 2 {
        return Err(Error::InvalidShape("need at least two samples".into()));
    }
    let mut sorted: Vec<f64> = u.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let (l1, l2) = (sorted[0], sorted[1]);
    if !(l1 > 0.0) {
        return Err(Error::DegenerateDensity("largest sample must be positive".into()));
    }
    let bound = 1.0 - alpha * spacing.powi(2 * gamma as i32) / l1;
    let lambda_ratio = l2 / l1;
    Ok(SteepnessBound {
        bound,
        lambda_ratio,
        holds: lambda_ratio >= bound - 1e-15,
    })
}

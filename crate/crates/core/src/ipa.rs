//! Iterative power algorithm on quantics tensor trains.
//!
//! A density `ρ` on the product grid is repeatedly multiplied by the
//! Boltzmann operator `U = exp(−β (V − V_ref))` and renormalized. The mass
//! concentrates on the global minima of `V`, which are then read off by
//! expectation values, by splitting a two-spike comb with a step mask, or by
//! a ramp sweep that peels spikes off one at a time in index order.

use std::sync::Mutex;

use ndarray::{Array3, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cross::{cross_interpolate, flush_underflow, CrossConfig, CrossReport};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::qtt::{heaviside_tt, index_step_tt, lift_to_product, uniform_density, ProductGrid};
use crate::tt::{RoundingPolicy, TensorTrain};

/// How the Boltzmann operator is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoltzmannMethod {
    /// Multi-axis separable potentials per axis, small grids densely, everything else by cross.
    Auto,
    /// Kronecker product of one-axis crosses; needs [`Potential::axis_energy`].
    Separable,
    /// Full expansion followed by TT-SVD.
    Dense,
    /// Cross interpolation over the whole binary index.
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpaConfig {
    pub beta: f64,
    pub max_iterations: usize,
    /// Stop once no expectation coordinate moves by more than this.
    pub convergence_tolerance: f64,
    /// Run exactly this many steps instead of testing convergence.
    pub fixed_iterations: Option<usize>,
    pub rounding: RoundingPolicy,
    pub cross: CrossConfig,
    pub reference_shift_enabled: bool,
    pub boltzmann: BoltzmannMethod,
    /// Largest grid [`BoltzmannMethod::Auto`] expands densely.
    pub dense_limit: usize,
    /// Step cap for each ramp pass of [`resolve_all_minima`].
    pub ramp_max_iterations: usize,
    /// A ramp pass ends once the slot nearest the expectation holds `1 − this` of the mass.
    pub localization_tolerance: f64,
    /// [`resolve_all_minima`] stops when this fraction of the comb mass is left.
    pub mass_floor: f64,
    /// Random entries probed for negativity after every step; 0 disables the probe.
    pub nonnegativity_samples: usize,
}

impl Default for IpaConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            max_iterations: 100,
            convergence_tolerance: 1e-6,
            fixed_iterations: None,
            rounding: RoundingPolicy::default(),
            cross: CrossConfig::default(),
            reference_shift_enabled: true,
            boltzmann: BoltzmannMethod::Auto,
            dense_limit: 1 << 20,
            ramp_max_iterations: 400,
            localization_tolerance: 1e-3,
            mass_floor: 1e-6,
            nonnegativity_samples: 256,
        }
    }
}

impl IpaConfig {
    /// Defaults with the convergence tolerance scaled to `1e−6` of the widest axis.
    pub fn for_grid(beta: f64, grid: &ProductGrid) -> Self {
        let span = grid
            .axes()
            .iter()
            .map(|a| a.upper() - a.lower())
            .fold(0.0, f64::max);
        Self {
            beta,
            convergence_tolerance: 1e-6 * span,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::Config(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if self.fixed_iterations == Some(0) {
            return Err(Error::Config("fixed iteration count must be positive".into()));
        }
        if !(self.localization_tolerance > 0.0 && self.localization_tolerance < 1.0) {
            return Err(Error::Config("localization tolerance must lie in (0, 1)".into()));
        }
        if !(self.mass_floor > 0.0 && self.mass_floor < 1.0) {
            return Err(Error::Config("mass floor must lie in (0, 1)".into()));
        }
        self.cross.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoltzmannReport {
    pub method: BoltzmannMethod,
    /// Energy subtracted before exponentiation.
    pub reference: f64,
    pub ranks: Vec<usize>,
    #[serde(skip)]
    pub cross: Vec<CrossReport>,
}

const MAX_REFERENCE_RESTARTS: usize = 4;

struct MinTracker(Mutex<f64>);

impl MinTracker {
    fn new() -> Self {
        Self(Mutex::new(f64::INFINITY))
    }

    fn observe(&self, v: f64) {
        let mut m = self.0.lock().expect("poisoned");
        if v < *m {
            *m = v;
        }
    }

    fn get(&self) -> f64 {
        *self.0.lock().expect("poisoned")
    }
}

/// Cross of `exp(−β (f − ref))`, restarting with a lower reference when the
/// sweep discovers energies below it.
fn shifted_cross<F>(
    energy: F,
    modes: &[usize],
    beta: f64,
    shift: bool,
    config: &CrossConfig,
) -> Result<(TensorTrain, CrossReport, f64)>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let mut reference = if shift {
        let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed ^ 0x5eed);
        (0..config.validation_samples.max(16))
            .map(|_| {
                let idx: Vec<usize> = modes.iter().map(|&m| rng.gen_range(0..m)).collect();
                energy(&idx)
            })
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    for attempt in 0..=MAX_REFERENCE_RESTARTS {
        let seen = MinTracker::new();
        let (tt, report) = cross_interpolate(
            |idx: &[usize]| {
                let v = energy(idx);
                seen.observe(v);
                flush_underflow((-beta * (v - reference)).exp())
            },
            modes,
            config,
        )?;
        let lowest = seen.get();
        let overshoot = beta * (reference - lowest);
        if !shift || overshoot <= 1.0 || attempt == MAX_REFERENCE_RESTARTS {
            return Ok((tt, report, reference));
        }
        log::debug!("cross found energy {lowest} below reference {reference}; restarting");
        reference = lowest;
    }
    unreachable!()
}

/// Tensor train of `exp(−β (V − V_ref))` on the product grid.
pub fn boltzmann_tt<P: Potential + ?Sized>(
    potential: &P,
    grid: &ProductGrid,
    config: &IpaConfig,
) -> Result<(TensorTrain, BoltzmannReport)> {
    config.validate()?;
    let beta = config.beta;
    let separable = potential.axis_energy(grid, 0, 0).is_some();
    let method = match config.boltzmann {
        BoltzmannMethod::Auto if separable && grid.dims() > 1 => BoltzmannMethod::Separable,
        BoltzmannMethod::Auto if grid.point_count() <= config.dense_limit as u128 => {
            BoltzmannMethod::Dense
        }
        BoltzmannMethod::Auto if separable => BoltzmannMethod::Separable,
        BoltzmannMethod::Auto => BoltzmannMethod::Cross,
        BoltzmannMethod::Separable if !separable => {
            return Err(Error::Config("potential is not separable".into()))
        }
        m => m,
    };
    let (tt, reference, cross) = match method {
        BoltzmannMethod::Separable => {
            let mut trains = Vec::with_capacity(grid.dims());
            let mut reports = Vec::with_capacity(grid.dims());
            let mut reference = 0.0;
            for (dim, axis) in grid.axes().iter().enumerate() {
                let d = axis.depth();
                let energy = |bits: &[usize]| {
                    let slot = bits.iter().fold(0, |acc, &b| (acc << 1) | b);
                    potential
                        .axis_energy(grid, dim, slot)
                        .expect("separable potential")
                };
                let (tt, report, r) = shifted_cross(
                    energy,
                    &vec![2; d],
                    beta,
                    config.reference_shift_enabled,
                    &config.cross,
                )?;
                reference += r;
                trains.push(tt);
                reports.push(report);
            }
            let mut iter = trains.into_iter();
            let first = iter.next().expect("at least one axis");
            let tt = iter.fold(first, |acc, t| acc.kron(&t));
            (tt, reference, reports)
        }
        BoltzmannMethod::Dense => {
            let n = grid.point_count();
            if n > config.dense_limit.max(crate::tt::DEFAULT_DENSE_CAP) as u128 {
                return Err(Error::SizeCap {
                    size: n,
                    cap: config.dense_limit,
                });
            }
            let values: Vec<f64> = (0..n as usize)
                .map(|j| potential.energy(grid, &crate::oracle::flat_to_slots(grid, j)))
                .collect();
            if let Some(j) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: grid.bits(&crate::oracle::flat_to_slots(grid, j)),
                    value: values[j],
                });
            }
            let reference = if config.reference_shift_enabled {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            } else {
                0.0
            };
            let u: Vec<f64> = values
                .iter()
                .map(|v| flush_underflow((-beta * (v - reference)).exp()))
                .collect();
            let table = ArrayD::from_shape_vec(IxDyn(&grid.mode_sizes()), u).expect("shape");
            (TensorTrain::from_dense(&table, config.rounding)?, reference, Vec::new())
        }
        BoltzmannMethod::Cross | BoltzmannMethod::Auto => {
            let energy = |bits: &[usize]| potential.energy(grid, &grid.slots(bits));
            let (tt, report, reference) = shifted_cross(
                energy,
                &grid.mode_sizes(),
                beta,
                config.reference_shift_enabled,
                &config.cross,
            )?;
            (tt, reference, vec![report])
        }
    };
    let report = BoltzmannReport {
        method,
        reference,
        ranks: tt.ranks(),
        cross,
    };
    Ok((tt, report))
}

/// Rank-1 ramp operator `exp(−β̃ J)` over the big-endian product index `J`.
///
/// The slope is capped so that `β̃ J` stays below 700 on the whole grid.
pub fn ramp_tt(grid: &ProductGrid, ramp_beta: f64) -> Result<(TensorTrain, f64)> {
    if !(ramp_beta > 0.0) || !ramp_beta.is_finite() {
        return Err(Error::Config(format!("ramp beta must be positive, got {ramp_beta}")));
    }
    let n = grid.total_depth();
    let span = 2f64.powi(n as i32) - 1.0;
    let slope = ramp_beta.min(700.0 / span);
    let cores = (0..n)
        .map(|k| {
            let w = 2f64.powi((n - 1 - k) as i32);
            Array3::from_shape_vec((1, 2, 1), vec![1.0, (-slope * w).exp()]).expect("shape")
        })
        .collect();
    Ok((TensorTrain::from_cores(cores)?, slope))
}

/// Density iterate with its history.
#[derive(Debug, Clone)]
pub struct IpaState {
    pub density: TensorTrain,
    pub iteration: usize,
    /// `η_k = ‖U ρ_{k−1}‖₁` before rounding.
    pub eta_history: Vec<f64>,
    /// Expectation of every axis, starting with the initial density.
    pub expectation_trace: Vec<Vec<f64>>,
    /// Largest bond rank after each step.
    pub rank_history: Vec<usize>,
}

impl IpaState {
    /// Starts from `density` scaled to unit mass.
    pub fn new(density: TensorTrain, grid: &ProductGrid) -> Result<Self> {
        let mass = density.l1_norm_nonneg()?;
        if !(mass > 0.0) {
            return Err(Error::DegenerateDensity(format!("initial mass {mass}")));
        }
        let density = density.scale(1.0 / mass);
        let x0 = expectation_position(&density, grid)?;
        Ok(Self {
            density,
            iteration: 0,
            eta_history: Vec::new(),
            expectation_trace: vec![x0],
            rank_history: Vec::new(),
        })
    }

    pub fn uniform(grid: &ProductGrid) -> Result<Self> {
        Self::new(uniform_density(grid), grid)
    }

    pub fn expectation(&self) -> &[f64] {
        self.expectation_trace.last().expect("trace starts non-empty")
    }
}

/// One amplification step `ρ ← round(U ρ) / mass`.
pub fn ipa_step(state: &IpaState, u: &TensorTrain, config: &IpaConfig) -> Result<IpaState> {
    let product = u.hadamard(&state.density)?;
    let eta = product.l1_norm_nonneg()?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::DegenerateDensity(format!(
            "normalization η = {eta} at step {}",
            state.iteration + 1
        )));
    }
    let rounded = product.scale(1.0 / eta).round(config.rounding);
    let mass = rounded.sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::DegenerateDensity(format!("mass {mass} after rounding")));
    }
    let density = rounded.scale(1.0 / mass);
    if config.nonnegativity_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.cross.random_seed ^ state.iteration as u64);
        let lowest = density.sampled_min(config.nonnegativity_samples, &mut rng);
        if lowest < -1e-9 {
            log::warn!("step {}: sampled density entry {lowest:e}", state.iteration + 1);
        }
    }
    let mut next = state.clone();
    next.rank_history.push(density.max_rank());
    next.density = density;
    next.iteration += 1;
    next.eta_history.push(eta);
    Ok(next)
}

/// Expectation of every axis coordinate.
pub fn expectation_position(density: &TensorTrain, grid: &ProductGrid) -> Result<Vec<f64>> {
    let mass = density.sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::DegenerateDensity(format!("density mass {mass}")));
    }
    (0..grid.dims())
        .map(|dim| {
            let pos = lift_to_product(&grid.axes()[dim].position_tt(), dim, grid)?;
            Ok(density.dot(&pos)? / mass)
        })
        .collect()
}

fn expectation_with(density: &TensorTrain, positions: &[TensorTrain]) -> Result<Vec<f64>> {
    let mass = density.sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::DegenerateDensity(format!("density mass {mass}")));
    }
    positions.iter().map(|p| Ok(density.dot(p)? / mass)).collect()
}

fn lifted_positions(grid: &ProductGrid) -> Result<Vec<TensorTrain>> {
    (0..grid.dims())
        .map(|dim| lift_to_product(&grid.axes()[dim].position_tt(), dim, grid))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    FixedCount,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct IpaRun {
    pub state: IpaState,
    pub stop: StopReason,
    pub boltzmann: BoltzmannReport,
}

impl IpaRun {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::IterationCap
    }
}

/// Iterates from `state` with a prebuilt operator until the stop rule fires.
pub fn iterate(
    mut state: IpaState,
    u: &TensorTrain,
    grid: &ProductGrid,
    config: &IpaConfig,
) -> Result<(IpaState, StopReason)> {
    config.validate()?;
    let positions = lifted_positions(grid)?;
    let limit = config.fixed_iterations.unwrap_or(config.max_iterations);
    loop {
        state = ipa_step(&state, u, config)?;
        let x = expectation_with(&state.density, &positions)?;
        let prev = state.expectation();
        let change = x
            .iter()
            .zip(prev)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        state.expectation_trace.push(x);
        log::debug!(
            "step {} eta {:e} change {:e} rank {}",
            state.iteration,
            state.eta_history.last().copied().unwrap_or(0.0),
            change,
            state.density.max_rank()
        );
        if config.fixed_iterations.is_some() {
            if state.iteration >= limit {
                return Ok((state, StopReason::FixedCount));
            }
        } else if change < config.convergence_tolerance {
            return Ok((state, StopReason::Tolerance));
        }
        if state.iteration >= limit {
            return Ok((state, StopReason::IterationCap));
        }
    }
}

/// Builds `U` and iterates from the uniform density.
pub fn run<P: Potential + ?Sized>(potential: &P, grid: &ProductGrid, config: &IpaConfig) -> Result<IpaRun> {
    let (u, boltzmann) = boltzmann_tt(potential, grid, config)?;
    let state = IpaState::uniform(grid)?;
    let (state, stop) = iterate(state, &u, grid, config)?;
    Ok(IpaRun {
        state,
        stop,
        boltzmann,
    })
}

fn masked(density: &TensorTrain, mask: &TensorTrain, policy: RoundingPolicy) -> Result<(TensorTrain, f64)> {
    let part = density.hadamard(mask)?.round(policy);
    let mass = part.sum();
    Ok((part, mass))
}

/// Splits a two-spike comb at its mean along `dim` and returns both halves'
/// expectations, lower first.
pub fn split_pair(
    density: &TensorTrain,
    grid: &ProductGrid,
    dim: usize,
    policy: RoundingPolicy,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mean = expectation_position(density, grid)?;
    let total = density.sum();
    let upper_mask = heaviside_tt(grid, dim, mean[dim])?;
    let ones = TensorTrain::constant(&grid.mode_sizes(), 1.0)?;
    let lower_mask = ones.add(&upper_mask.scale(-1.0))?.round(RoundingPolicy::exact());
    let (upper, m_upper) = masked(density, &upper_mask, policy)?;
    let (lower, m_lower) = masked(density, &lower_mask, policy)?;
    for (side, m) in [("lower", m_lower), ("upper", m_upper)] {
        if !(m / total >= 1e-9) {
            return Err(Error::NotDegenerate(format!(
                "{side} side of x = {} carries mass {m:e}",
                mean[dim]
            )));
        }
    }
    Ok((
        expectation_position(&lower, grid)?,
        expectation_position(&upper, grid)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaReport {
    /// Coordinates of every resolved minimum, ascending in product index order.
    pub positions: Vec<Vec<f64>>,
    pub slots: Vec<Vec<usize>>,
    /// Fraction of the comb mass removed with each minimum.
    pub masses: Vec<f64>,
    /// Ramp steps summed over all passes.
    pub iterations_used: usize,
    /// Effective ramp slope after the underflow cap.
    pub ramp_slope: f64,
    /// False when a ramp pass hit its step cap before localizing.
    pub complete: bool,
}

fn nearest_slots(grid: &ProductGrid, x: &[f64]) -> Vec<usize> {
    grid.axes()
        .iter()
        .zip(x)
        .map(|(a, &c)| a.nearest_slot(c))
        .collect()
}

/// Peels the spikes of a comb off one at a time, lowest product index first.
pub fn resolve_all_minima(
    density: &TensorTrain,
    grid: &ProductGrid,
    ramp_beta: f64,
    config: &IpaConfig,
) -> Result<MinimaReport> {
    config.validate()?;
    let (ramp, slope) = ramp_tt(grid, ramp_beta)?;
    let positions_tt = lifted_positions(grid)?;
    let total = density.l1_norm_nonneg()?;
    if !(total > 0.0) {
        return Err(Error::DegenerateDensity(format!("comb mass {total}")));
    }
    let mut remaining = density.scale(1.0 / total);
    let mut operator = ramp.clone();
    let mut remaining_mass = 1.0;
    let mut report = MinimaReport {
        positions: Vec::new(),
        slots: Vec::new(),
        masses: Vec::new(),
        iterations_used: 0,
        ramp_slope: slope,
        complete: true,
    };
    let max_spikes = usize::try_from(grid.point_count()).unwrap_or(usize::MAX);
    while remaining_mass >= config.mass_floor && report.positions.len() < max_spikes {
        let mut state = IpaState {
            density: remaining.clone(),
            iteration: 0,
            eta_history: Vec::new(),
            expectation_trace: vec![expectation_with(&remaining, &positions_tt)?],
            rank_history: Vec::new(),
        };
        let mut localized = false;
        let mut snapped = nearest_slots(grid, state.expectation());
        for _ in 0..config.ramp_max_iterations {
            state = ipa_step(&state, &operator, config)?;
            let x = expectation_with(&state.density, &positions_tt)?;
            snapped = nearest_slots(grid, &x);
            let change = x
                .iter()
                .zip(state.expectation())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            state.expectation_trace.push(x);
            let local = state.density.eval(&grid.bits(&snapped))? / state.density.sum();
            if local >= 1.0 - config.localization_tolerance {
                localized = true;
                break;
            }
            if change < config.convergence_tolerance && local > 0.5 {
                localized = true;
                break;
            }
        }
        report.iterations_used += state.iteration;
        if !localized {
            log::warn!("ramp pass {} did not localize", report.positions.len() + 1);
            report.complete = false;
        }
        let coords: Vec<f64> = snapped
            .iter()
            .zip(grid.axes())
            .map(|(&s, a)| a.coord(s))
            .collect();
        if report.slots.last().is_some_and(|last| {
            crate::oracle::slots_to_flat(grid, last) >= crate::oracle::slots_to_flat(grid, &snapped)
        }) {
            // the ramp landed behind the mask; nothing left to resolve
            report.complete = false;
            break;
        }
        let mask = index_step_tt(grid, &snapped)?;
        let (after, m_after) = masked(&remaining, &mask, config.rounding)?;
        let kept = m_after.clamp(0.0, 1.0);
        report.positions.push(coords);
        report.slots.push(snapped);
        report.masses.push(remaining_mass * (1.0 - kept));
        remaining_mass *= kept;
        if !localized || !(m_after > 0.0) || remaining_mass < config.mass_floor {
            break;
        }
        remaining = after.scale(1.0 / m_after);
        operator = ramp.hadamard(&mask)?.round(RoundingPolicy::exact());
    }
    Ok(report)
}

/// Smallest `k ≥ 1` with `k ≥ log(n − 1) / log(λ₁/λ₂)`.
pub fn iteration_estimate(n: u64, lambda_ratio: f64) -> Result<usize> {
    if !(lambda_ratio > 1.0) {
        return Err(Error::NoGap(lambda_ratio));
    }
    if n < 2 {
        return Err(Error::InvalidShape(format!("need at least two grid points, got {n}")));
    }
    let k = ((n - 1) as f64).ln() / lambda_ratio.ln();
    Ok((k.ceil() as usize).max(1))
}

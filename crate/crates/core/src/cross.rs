//! Adaptive cross interpolation of black-box tensors.
//!
//! The train is built from fibers of the target function through nested
//! index sets. Each half-sweep evaluates the fiber through one core, compresses
//! it with a truncated SVD and selects interpolation pivots with [`maxvol`].
//! Ranks grow through a few random "kick" indices per bond and through
//! enrichment with the worst validation points.

use std::collections::{HashMap, HashSet};

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tt::{multi_indices, TensorTrain};

/// Dominance slack of [`maxvol`]: every entry of `A · A[I]^{-1}` is at most `1 + δ`.
pub const MAXVOL_TOLERANCE: f64 = 0.05;

/// Values of Boltzmann-type oracles below this threshold are flushed to zero.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossConfig {
    /// Relative accuracy target, measured against the largest sampled magnitude.
    pub target_tolerance: f64,
    pub max_rank: usize,
    /// Full (left-right plus right-left) sweeps.
    pub max_sweeps: usize,
    pub validation_samples: usize,
    pub random_seed: u64,
    /// Random extra indices offered at every bond and half-sweep.
    pub rank_kick: usize,
}

impl Default for CrossConfig {
    fn default() -> Self {
        Self {
            target_tolerance: 1e-10,
            max_rank: 64,
            max_sweeps: 12,
            validation_samples: 256,
            random_seed: 0,
            rank_kick: 2,
        }
    }
}

impl CrossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_tolerance > 0.0) || !self.target_tolerance.is_finite() {
            return Err(Error::Config(format!(
                "cross tolerance must be positive, got {}",
                self.target_tolerance
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        if self.max_rank == 0 {
            return Err(Error::Config("cross max_rank must be positive".into()));
        }
        if self.validation_samples == 0 {
            return Err(Error::Config("validation_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossReport {
    /// Distinct oracle evaluations made while sweeping.
    pub oracle_calls: usize,
    /// Distinct new evaluations in each full sweep.
    pub calls_per_sweep: Vec<usize>,
    /// Oracle evaluations spent on validation.
    pub validation_calls: usize,
    pub sweeps: usize,
    /// `max |approx − f| / max |f|` over the validation set.
    pub validation_error: f64,
    /// True when the validation set was the whole index domain.
    pub exhaustive_validation: bool,
    pub ranks: Vec<usize>,
    pub converged: bool,
    pub warning: Option<String>,
}

/// Row indices of a dominant `r × r` submatrix of the `n × r` matrix `a`.
pub fn maxvol(a: ArrayView2<f64>) -> Result<Vec<usize>> {
    maxvol_with(a, MAXVOL_TOLERANCE, 200)
}

pub fn maxvol_with(a: ArrayView2<f64>, delta: f64, max_iters: usize) -> Result<Vec<usize>> {
    let (n, r) = a.dim();
    if n < r {
        return Err(Error::InvalidShape(format!(
            "maxvol needs rows >= columns, got {n} x {r}"
        )));
    }
    if r == 0 {
        return Ok(Vec::new());
    }
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::DegeneratePivot("matrix is zero or non-finite".into()));
    }

    // Greedy start: Gaussian elimination with row pivoting.
    let mut work = a.to_owned();
    let mut chosen = vec![false; n];
    let mut pivots = Vec::with_capacity(r);
    for k in 0..r {
        let (best, val) = (0..n)
            .filter(|&i| !chosen[i])
            .map(|i| (i, work[[i, k]].abs()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= 1e-12 * scale {
            return Err(Error::DegeneratePivot(format!(
                "column {k} is numerically dependent (pivot {val:e})"
            )));
        }
        chosen[best] = true;
        pivots.push(best);
        let pivot_row = work.row(best).to_owned();
        let p = pivot_row[k];
        for i in 0..n {
            if chosen[i] {
                continue;
            }
            let factor = work[[i, k]] / p;
            if factor != 0.0 {
                for c in k..r {
                    work[[i, c]] -= factor * pivot_row[c];
                }
            }
        }
    }

    for _ in 0..max_iters {
        let sub = a.select(ndarray::Axis(0), &pivots);
        let inv = linalg::inverse(sub.view())
            .ok_or_else(|| Error::DegeneratePivot("pivot submatrix is singular".into()))?;
        let b = a.dot(&inv);
        let mut best = (0, 0, 0.0_f64);
        for ((i, j), &v) in b.indexed_iter() {
            if v.abs() > best.2 {
                best = (i, j, v.abs());
            }
        }
        if best.2 <= 1.0 + delta {
            break;
        }
        pivots[best.1] = best.0;
    }
    Ok(pivots)
}

struct Sampler<'a, F> {
    f: &'a F,
    cache: HashMap<Vec<usize>, f64>,
    calls: usize,
}

impl<'a, F> Sampler<'a, F>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn new(f: &'a F) -> Self {
        Self {
            f,
            cache: HashMap::new(),
            calls: 0,
        }
    }

    fn eval_batch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        let mut missing: Vec<&Vec<usize>> = Vec::new();
        let mut seen = HashSet::new();
        for idx in indices {
            if !self.cache.contains_key(idx) && seen.insert(idx) {
                missing.push(idx);
            }
        }
        let f = self.f;
        let fresh: Vec<(Vec<usize>, f64)> = missing
            .par_iter()
            .map(|idx| ((*idx).clone(), f(idx)))
            .collect();
        for (idx, v) in fresh {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: idx, value: v });
            }
            self.calls += 1;
            self.cache.insert(idx, v);
        }
        Ok(indices.iter().map(|idx| self.cache[idx]).collect())
    }
}

struct CrossState {
    modes: Vec<usize>,
    left: Vec<Vec<Vec<usize>>>,
    right: Vec<Vec<Vec<usize>>>,
}

impl CrossState {
    fn new(modes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let d = modes.len();
        let seed: Vec<usize> = modes.iter().map(|&m| rng.gen_range(0..m)).collect();
        let left = (0..=d).map(|j| vec![seed[..j].to_vec()]).collect();
        let right = (0..=d).map(|j| vec![seed[j..].to_vec()]).collect();
        Self {
            modes: modes.to_vec(),
            left,
            right,
        }
    }

    fn random_prefix(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.modes[..len].iter().map(|&m| rng.gen_range(0..m)).collect()
    }

    fn random_suffix(&self, start: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.modes[start..].iter().map(|&m| rng.gen_range(0..m)).collect()
    }

    fn enrich(&mut self, index: &[usize]) {
        let d = self.modes.len();
        for j in 1..d {
            let prefix = index[..j].to_vec();
            if !self.left[j].contains(&prefix) {
                self.left[j].push(prefix);
            }
            let suffix = index[j..].to_vec();
            if !self.right[j].contains(&suffix) {
                self.right[j].push(suffix);
            }
        }
    }
}

fn push_unique(set: &mut Vec<Vec<usize>>, item: Vec<usize>) {
    if !set.contains(&item) {
        set.push(item);
    }
}

fn join(a: &[usize], i: usize, b: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(a.len() + 1 + b.len());
    v.extend_from_slice(a);
    v.push(i);
    v.extend_from_slice(b);
    v
}

/// Orthonormal basis of the leading column space of `c`, truncated at
/// `tol · ‖c‖_F / sqrt(d)` and `max_rank`.
fn leading_basis(c: &Array2<f64>, tol: f64, d: usize, max_rank: usize) -> Array2<f64> {
    let (u, sv, _) = linalg::svd(c.view());
    let norm = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
    let delta = tol * norm / (d as f64).sqrt();
    let r = linalg::truncation_rank(&sv, delta, Some(max_rank));
    u.slice(s![.., ..r]).to_owned()
}

fn interpolating_factor(basis: &Array2<f64>) -> Result<(Array2<f64>, Vec<usize>)> {
    let pivots = maxvol(basis.view())?;
    let sub = basis.select(ndarray::Axis(0), &pivots);
    let inv = linalg::inverse(sub.view())
        .ok_or_else(|| Error::DegeneratePivot("pivot block is singular".into()))?;
    Ok((basis.dot(&inv), pivots))
}

fn sweep_left_to_right<F>(
    state: &mut CrossState,
    sampler: &mut Sampler<'_, F>,
    config: &CrossConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TensorTrain>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let d = state.modes.len();
    let mut cores = Vec::with_capacity(d);
    for j in 0..d {
        let m = state.modes[j];
        let rows = &state.left[j];
        let r_left = rows.len();
        if j == d - 1 {
            let idx: Vec<Vec<usize>> = rows
                .iter()
                .flat_map(|p| (0..m).map(move |i| join(p, i, &[])))
                .collect();
            let vals = sampler.eval_batch(&idx)?;
            cores.push(Array3::from_shape_vec((r_left, m, 1), vals).expect("shape"));
            break;
        }
        let mut cols = state.right[j + 1].clone();
        for _ in 0..config.rank_kick {
            push_unique(&mut cols, state.random_suffix(j + 1, rng));
        }
        let cols_ref = &cols;
        let idx: Vec<Vec<usize>> = rows
            .iter()
            .flat_map(|p| (0..m).flat_map(move |i| cols_iter(p, i, cols_ref)))
            .collect();
        let vals = sampler.eval_batch(&idx)?;
        let c = Array2::from_shape_vec((r_left * m, cols.len()), vals).expect("shape");
        let basis = leading_basis(&c, config.target_tolerance, d, config.max_rank);
        let (factor, pivots) = interpolating_factor(&basis)?;
        let r = pivots.len();
        let next_left: Vec<Vec<usize>> = pivots
            .iter()
            .map(|&p| join(&rows[p / m], p % m, &[]))
            .collect();
        cores.push(factor.into_shape_with_order((r_left, m, r)).expect("shape"));
        state.left[j + 1] = next_left;
    }
    TensorTrain::from_cores(cores)
}

fn cols_iter<'a>(
    prefix: &'a [usize],
    i: usize,
    cols: &'a [Vec<usize>],
) -> impl Iterator<Item = Vec<usize>> + 'a {
    cols.iter().map(move |suffix| join(prefix, i, suffix))
}

fn sweep_right_to_left<F>(
    state: &mut CrossState,
    sampler: &mut Sampler<'_, F>,
    config: &CrossConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TensorTrain>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let d = state.modes.len();
    let mut cores: Vec<Array3<f64>> = Vec::with_capacity(d);
    for j in (0..d).rev() {
        let m = state.modes[j];
        let suffixes = state.right[j + 1].clone();
        let r_right = suffixes.len();
        let mut rows = state.left[j].clone();
        if j == 0 {
            let idx: Vec<Vec<usize>> = (0..m)
                .flat_map(|i| suffixes.iter().map(move |sfx| join(&[], i, sfx)))
                .collect();
            let vals = sampler.eval_batch(&idx)?;
            cores.push(Array3::from_shape_vec((1, m, r_right), vals).expect("shape"));
            break;
        }
        for _ in 0..config.rank_kick {
            push_unique(&mut rows, state.random_prefix(j, rng));
        }
        // transposed fiber: (i, beta) x alpha
        let idx: Vec<Vec<usize>> = (0..m)
            .flat_map(|i| {
                let rows = &rows;
                suffixes
                    .iter()
                    .flat_map(move |sfx| rows.iter().map(move |p| join(p, i, sfx)))
            })
            .collect();
        let vals = sampler.eval_batch(&idx)?;
        let ct = Array2::from_shape_vec((m * r_right, rows.len()), vals).expect("shape");
        let basis = leading_basis(&ct, config.target_tolerance, d, config.max_rank);
        let (factor, pivots) = interpolating_factor(&basis)?;
        let r = pivots.len();
        let next_right: Vec<Vec<usize>> = pivots
            .iter()
            .map(|&p| join(&[], p / r_right, &suffixes[p % r_right]))
            .collect();
        let core = Array3::from_shape_fn((r, m, r_right), |(a, i, b)| factor[[i * r_right + b, a]]);
        cores.push(core);
        state.right[j] = next_right;
    }
    cores.reverse();
    TensorTrain::from_cores(cores)
}

fn sample_indices(modes: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..count)
        .map(|_| modes.iter().map(|&m| rng.gen_range(0..m)).collect())
        .collect()
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let scale = new.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let diff = new
        .iter()
        .zip(old)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Builds a tensor train from point evaluations of `f` over the index
/// domain `mode_sizes`.
pub fn cross_interpolate<F>(
    f: F,
    mode_sizes: &[usize],
    config: &CrossConfig,
) -> Result<(TensorTrain, CrossReport)>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    config.validate()?;
    if mode_sizes.is_empty() || mode_sizes.contains(&0) {
        return Err(Error::InvalidShape(format!(
            "cross needs nonempty positive modes, got {mode_sizes:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
    let mut sampler = Sampler::new(&f);
    let mut state = CrossState::new(mode_sizes, &mut rng);

    let total: u128 = mode_sizes.iter().map(|&m| m as u128).product();
    let exhaustive = total <= config.validation_samples as u128;
    let probe = sample_indices(mode_sizes, config.validation_samples.min(64), &mut rng);
    let validation: Vec<Vec<usize>> = if exhaustive {
        multi_indices(mode_sizes).collect()
    } else {
        sample_indices(mode_sizes, config.validation_samples, &mut rng)
    };

    let mut calls_per_sweep = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    let mut tt = None;
    let mut converged = false;
    let mut sweeps = 0;
    let mut validation_error = f64::INFINITY;
    let mut validation_calls = 0;
    let tol = config.target_tolerance;

    while sweeps < config.max_sweeps {
        let before = sampler.calls;
        let forward = sweep_left_to_right(&mut state, &mut sampler, config, &mut rng)?;
        let forward_probe: Vec<f64> = probe.iter().map(|i| forward.eval_unchecked(i)).collect();
        let backward = if mode_sizes.len() > 1 {
            sweep_right_to_left(&mut state, &mut sampler, config, &mut rng)?
        } else {
            forward.clone()
        };
        sweeps += 1;
        calls_per_sweep.push(sampler.calls - before);
        let values: Vec<f64> = probe.iter().map(|i| backward.eval_unchecked(i)).collect();
        let mut stable = relative_change(&values, &forward_probe) <= tol;
        if let Some(prev) = &previous {
            stable &= relative_change(&values, prev) <= tol;
        }
        previous = Some(values);
        if mode_sizes.len() == 1 {
            stable = true;
        }
        if stable {
            let before_validation = sampler.calls;
            let truth = sampler.eval_batch(&validation)?;
            validation_calls += sampler.calls - before_validation;
            let approx: Vec<f64> = validation.iter().map(|i| backward.eval_unchecked(i)).collect();
            validation_error = relative_change(&approx, &truth).min(relative_error(&approx, &truth));
            if validation_error <= 10.0 * tol {
                converged = true;
                tt = Some(backward);
                break;
            }
            // enrich the index sets with the worst points and keep sweeping
            let mut worst: Vec<(usize, f64)> = approx
                .iter()
                .zip(&truth)
                .map(|(a, t)| (a - t).abs())
                .enumerate()
                .collect();
            worst.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            for &(k, _) in worst.iter().take(config.rank_kick.max(1)) {
                state.enrich(&validation[k]);
            }
        }
        tt = Some(backward);
    }

    let tt = tt.expect("at least one sweep");
    if !converged {
        let before_validation = sampler.calls;
        let truth = sampler.eval_batch(&validation)?;
        validation_calls += sampler.calls - before_validation;
        let approx: Vec<f64> = validation.iter().map(|i| tt.eval_unchecked(i)).collect();
        validation_error = relative_error(&approx, &truth);
    }
    let warning = if validation_error > 10.0 * tol {
        Some(format!(
            "cross stopped after {sweeps} sweeps with validation error {validation_error:e} (target {tol:e}, max rank {})",
            config.max_rank
        ))
    } else {
        None
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let report = CrossReport {
        oracle_calls: sampler.calls - validation_calls,
        calls_per_sweep,
        validation_calls,
        sweeps,
        validation_error,
        exhaustive_validation: exhaustive,
        ranks: tt.ranks(),
        converged: warning.is_none(),
        warning,
    };
    Ok((tt, report))
}

/// `max |approx − truth| / max |truth|`.
fn relative_error(approx: &[f64], truth: &[f64]) -> f64 {
    let scale = truth.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let diff = approx
        .iter()
        .zip(truth)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Cross approximation of `g ∘ tt`.
pub fn elementwise_map<G>(
    tt: &TensorTrain,
    g: G,
    config: &CrossConfig,
) -> Result<(TensorTrain, CrossReport)>
where
    G: Fn(f64) -> f64 + Sync,
{
    cross_interpolate(|idx: &[usize]| g(tt.eval_unchecked(idx)), &tt.mode_sizes(), config)
}

/// Flushes values below [`UNDERFLOW_FLOOR`] to zero.
pub fn flush_underflow(x: f64) -> f64 {
    if x.abs() < UNDERFLOW_FLOOR {
        0.0
    } else {
        x
    }
}

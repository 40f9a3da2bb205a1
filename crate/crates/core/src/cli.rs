//! Command-line front end shared by the `ipa` binary and the tests.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ipa::{
    boltzmann_tt, iterate, resolve_all_minima, split_pair, BoltzmannReport, IpaConfig, IpaState, StopReason,
};
use crate::potentials::{exponents, parse_target, DnaPotential, ModPotential, PolynomialPotential, Potential, PrimeGrid};
use crate::qtt::{GridSpec, ProductGrid};
use crate::tt::RoundingPolicy;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

/// Stopping tolerance on `⟨x⟩` used by the DNA workload unless overridden.
pub const DNA_CONVERGENCE_TOLERANCE: f64 = 3.4e-5;

/// Largest default `p_max`; bigger sieves must be requested explicitly.
pub const DEFAULT_P_MAX_CAP: u64 = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Workload {
    Dna,
    Factor,
    Custom,
}

/// Global optimization by the iterative power algorithm on quantics tensor trains.
#[derive(Debug, Clone, Parser)]
#[command(name = "ipa", version)]
pub struct Args {
    #[arg(long, value_enum)]
    pub workload: Workload,
    /// Integer to factor (decimal, any length).
    #[arg(long = "N", value_name = "N")]
    pub n: Option<String>,
    /// Largest prime on the factor grid [default: isqrt(N)].
    #[arg(long = "p-max")]
    pub p_max: Option<u64>,
    /// Inverse temperature [default: dna 10, factor 30, biprime 20, custom 10].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "ramp-beta", default_value_t = 0.5)]
    pub ramp_beta: f64,
    /// Quantics depth per dimension.
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    /// Number of physical dimensions [default: 50 for dna, 1 for custom].
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub domain: Option<Vec<f64>>,
    /// Relative rounding tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-rank", default_value_t = 64)]
    pub max_rank: usize,
    #[arg(long = "max-iters", default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON result path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV trace path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Factor a product of two primes with one step and a step-mask split.
    #[arg(long)]
    pub biprime: bool,
    /// Stop once no expectation coordinate moves by more than this.
    #[arg(long = "conv-tol")]
    pub conv_tol: Option<f64>,
    /// Polynomial coefficient file for the custom workload.
    #[arg(long = "potential-file")]
    pub potential_file: Option<PathBuf>,
    /// Writes `log(1 + V)` over the grid as CSV.
    #[arg(long = "dump-potential")]
    pub dump_potential: Option<PathBuf>,
    /// Adds per-phase wall-clock seconds to the JSON result.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Grid {
        spec: GridSpec,
        dims: usize,
    },
    Primes {
        n: BigUint,
        p_max: u64,
        biprime: bool,
    },
}

/// Validated run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub workload: Workload,
    pub target: Target,
    pub ipa: IpaConfig,
    pub ramp_beta: f64,
    pub potential_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub dump_potential: Option<PathBuf>,
    pub timing: bool,
    pub random_seed: u64,
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self> {
        let beta = args.beta.unwrap_or(match (args.workload, args.biprime) {
            (Workload::Factor, true) => 20.0,
            (Workload::Factor, false) => 30.0,
            _ => 10.0,
        });
        if args.biprime && args.workload != Workload::Factor {
            return Err(Error::Config("--biprime only applies to the factor workload".into()));
        }
        if !(args.ramp_beta > 0.0) || !args.ramp_beta.is_finite() {
            return Err(Error::Config(format!("ramp beta must be positive, got {}", args.ramp_beta)));
        }
        let target = match args.workload {
            Workload::Factor => {
                let text = args
                    .n
                    .as_deref()
                    .ok_or_else(|| Error::Config("the factor workload needs --N".into()))?;
                let n = parse_target(text)?;
                let p_max = match args.p_max {
                    Some(p) => p,
                    None => default_p_max(&n)?,
                };
                if p_max < 2 {
                    return Err(Error::Config(format!("p_max must be at least 2, got {p_max}")));
                }
                Target::Primes {
                    n,
                    p_max,
                    biprime: args.biprime,
                }
            }
            Workload::Dna | Workload::Custom => {
                let (a, b) = match args.domain.as_deref() {
                    Some([a, b]) => (*a, *b),
                    Some(_) => return Err(Error::Config("--domain takes two values".into())),
                    None if args.workload == Workload::Dna => (-1.5, 2.5),
                    None => return Err(Error::Config("the custom workload needs --domain".into())),
                };
                let dims = args.dims.unwrap_or(if args.workload == Workload::Dna { 50 } else { 1 });
                if dims == 0 {
                    return Err(Error::Config("dims must be positive".into()));
                }
                if args.workload == Workload::Custom && args.potential_file.is_none() {
                    return Err(Error::Config("the custom workload needs --potential-file".into()));
                }
                Target::Grid {
                    spec: GridSpec::new(a, b, args.depth)?,
                    dims,
                }
            }
        };
        let mut ipa = IpaConfig {
            beta,
            max_iterations: args.max_iters,
            rounding: RoundingPolicy::new(args.tol, Some(args.max_rank))?,
            ..IpaConfig::default()
        };
        ipa.cross.max_rank = args.max_rank;
        ipa.cross.random_seed = args.seed;
        ipa.convergence_tolerance = match (args.conv_tol, &target) {
            (Some(t), _) => t,
            (None, Target::Grid { .. }) if args.workload == Workload::Dna => DNA_CONVERGENCE_TOLERANCE,
            (None, Target::Grid { spec, .. }) => 1e-6 * (spec.upper() - spec.lower()),
            (None, Target::Primes { .. }) => 1e-6,
        };
        if let Target::Primes { biprime: true, .. } = target {
            ipa.fixed_iterations = Some(1);
        }
        ipa.validate()?;
        Ok(Self {
            workload: args.workload,
            target,
            ipa,
            ramp_beta: args.ramp_beta,
            potential_file: args.potential_file.clone(),
            out: args.out.clone(),
            trace: args.trace.clone(),
            dump_potential: args.dump_potential.clone(),
            timing: args.timing,
            random_seed: args.seed,
        })
    }

    fn grid(&self) -> Result<ProductGrid> {
        match &self.target {
            Target::Grid { spec, dims } => ProductGrid::uniform(*spec, *dims),
            Target::Primes { .. } => Err(Error::Config("factor runs use a prime grid".into())),
        }
    }
}

fn default_p_max(n: &BigUint) -> Result<u64> {
    let root = n.sqrt();
    match u64::try_from(&root) {
        Ok(r) if r <= DEFAULT_P_MAX_CAP => Ok(r.max(2)),
        _ => Err(Error::Config(format!(
            "isqrt(N) exceeds {DEFAULT_P_MAX_CAP}; pass --p-max"
        ))),
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub cross: f64,
    pub iterations: f64,
    pub measurement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub workload: Workload,
    pub dims: usize,
    pub depth: usize,
    pub domain: [f64; 2],
    pub beta: f64,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    /// Final expectation per dimension.
    pub minima: Vec<f64>,
    /// Grid point nearest each expectation.
    pub nearest_grid_point: Vec<f64>,
    pub expectation_trace: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub max_rank: usize,
    pub boltzmann: BoltzmannReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorStatus {
    Factored,
    /// Factors found but `N` is not fully accounted for.
    Partial,
    NoMinimaAtZero,
    Unconverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorResult {
    pub workload: Workload,
    #[serde(rename = "N")]
    pub n: String,
    pub p_max: u64,
    pub mode: &'static str,
    pub beta: f64,
    pub ramp_beta: Option<f64>,
    pub status: FactorStatus,
    pub converged: bool,
    /// Primes read off the minima, ascending.
    pub factors: Vec<u64>,
    pub exponents: Vec<u32>,
    /// Part of `N` not divisible by any reported factor.
    pub cofactor: String,
    /// True when the cofactor exceeds one but has no prime factor up to `p_max`
    /// and is below `p_max²`, so it is itself prime.
    pub cofactor_is_prime: bool,
    pub iterations: usize,
    pub ramp_iterations: usize,
    pub minimal_remainder: Option<f64>,
    pub minimal_remainder_primes: Vec<u64>,
    pub boltzmann: BoltzmannReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Per-iteration records of a run.
pub fn trace_csv(state: &IpaState) -> String {
    let dims = state.expectation_trace.first().map_or(0, Vec::len);
    let mut out = String::from("iteration,eta");
    for i in 0..dims {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",max_rank\n");
    for k in 0..state.eta_history.len() {
        let _ = write!(out, "{},{:e}", k + 1, state.eta_history[k]);
        for x in &state.expectation_trace[k + 1] {
            let _ = write!(out, ",{x:.17e}");
        }
        let _ = writeln!(out, ",{}", state.rank_history[k]);
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::from)
}

fn emit<T: Serialize>(config: &RunConfig, result: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(result)?;
    json.push('\n');
    match &config.out {
        Some(path) => write_file(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn grid_potential(config: &RunConfig, dims: usize) -> Result<Box<dyn Potential>> {
    match config.workload {
        Workload::Dna => Ok(Box::new(DnaPotential)),
        Workload::Custom => {
            let path = config
                .potential_file
                .as_ref()
                .ok_or_else(|| Error::Config("missing potential file".into()))?;
            let text = std::fs::read_to_string(path)?;
            Ok(Box::new(PolynomialPotential::parse(&text, dims)?))
        }
        Workload::Factor => Err(Error::Config("factor is not a grid workload".into())),
    }
}

fn dump_grid_potential(path: &Path, pot: &dyn Potential, grid: &ProductGrid) -> Result<()> {
    // one axis at a time; the other coordinates sit at the lower bound
    let mut out = String::from("dim,slot,x,log1p_v\n");
    for dim in 0..grid.dims() {
        let axis = &grid.axes()[dim];
        for slot in 0..axis.slots() {
            let v = pot.axis_energy(grid, dim, slot).unwrap_or_else(|| {
                let mut slots = vec![0; grid.dims()];
                slots[dim] = slot;
                pot.energy(grid, &slots)
            });
            let _ = writeln!(out, "{dim},{slot},{:.17e},{:.17e}", axis.coord(slot), v.ln_1p());
        }
    }
    write_file(path, &out)
}

/// The DNA or custom workload without any output.
pub fn grid_run(config: &RunConfig) -> Result<GridResult> {
    let grid = config.grid()?;
    let Target::Grid { spec, dims } = config.target else {
        unreachable!("grid() succeeded")
    };
    let pot = grid_potential(config, dims)?;
    if let Some(path) = &config.dump_potential {
        dump_grid_potential(path, pot.as_ref(), &grid)?;
    }
    let t0 = Instant::now();
    let (u, boltzmann) = boltzmann_tt(pot.as_ref(), &grid, &config.ipa)?;
    let t1 = Instant::now();
    let (state, stop) = iterate(IpaState::uniform(&grid)?, &u, &grid, &config.ipa)?;
    let t2 = Instant::now();
    let minima = state.expectation().to_vec();
    let nearest = grid
        .axes()
        .iter()
        .zip(&minima)
        .map(|(a, &x)| a.coord(a.nearest_slot(x)))
        .collect();
    let t3 = Instant::now();
    if let Some(path) = &config.trace {
        write_file(path, &trace_csv(&state))?;
    }
    Ok(GridResult {
        workload: config.workload,
        dims,
        depth: spec.depth(),
        domain: [spec.lower(), spec.upper()],
        beta: config.ipa.beta,
        converged: stop != StopReason::IterationCap,
        stop,
        iterations: state.iteration,
        minima,
        nearest_grid_point: nearest,
        expectation_trace: state.expectation_trace.clone(),
        eta: state.eta_history.clone(),
        max_rank: state.density.max_rank(),
        boltzmann,
        timing: config.timing.then(|| Timing {
            cross: (t1 - t0).as_secs_f64(),
            iterations: (t2 - t1).as_secs_f64(),
            measurement: (t3 - t2).as_secs_f64(),
        }),
    })
}

/// Runs the DNA or custom workload.
pub fn cmd_grid(config: &RunConfig) -> Result<i32> {
    let result = grid_run(config)?;
    emit(config, &result)?;
    Ok(if result.converged { EXIT_CONVERGED } else { EXIT_UNCONVERGED })
}

pub fn cmd_dna(config: &RunConfig) -> Result<i32> {
    cmd_grid(config)
}

pub fn cmd_custom(config: &RunConfig) -> Result<i32> {
    cmd_grid(config)
}

/// Factors `N` and reports the primes found on the grid.
pub fn cmd_factor(config: &RunConfig) -> Result<i32> {
    let result = factor(config)?;
    let ok = matches!(result.status, FactorStatus::Factored);
    emit(config, &result)?;
    Ok(if ok { EXIT_CONVERGED } else { EXIT_UNCONVERGED })
}

/// The factor workload without any output.
pub fn factor(config: &RunConfig) -> Result<FactorResult> {
    let Target::Primes { n, p_max, biprime } = &config.target else {
        return Err(Error::Config("factor needs --N".into()));
    };
    let t0 = Instant::now();
    let primes = PrimeGrid::new(*p_max)?;
    let grid = primes.product_grid();
    let pot = ModPotential::new(n.clone(), primes.clone());
    if let Some(path) = &config.dump_potential {
        let mut out = String::from("slot,p,log1p_v\n");
        for slot in 0..primes.slots() {
            let p = grid.axes()[0].coord(slot);
            let _ = writeln!(out, "{slot},{p},{:.17e}", pot.value(slot).ln_1p());
        }
        write_file(path, &out)?;
    }
    let (u, boltzmann) = boltzmann_tt(&pot, &grid, &config.ipa)?;
    let t1 = Instant::now();
    let (state, stop) = iterate(IpaState::uniform(&grid)?, &u, &grid, &config.ipa)?;
    let t2 = Instant::now();
    if let Some(path) = &config.trace {
        write_file(path, &trace_csv(&state))?;
    }
    let snap = |x: f64| -> Option<u64> {
        let slot = grid.axes()[0].nearest_slot(x);
        primes.prime_at(slot)
    };
    let mut ramp_iterations = 0;
    let mut complete = stop != StopReason::IterationCap;
    let mut candidates: Vec<u64> = if *biprime {
        match split_pair(&state.density, &grid, 0, config.ipa.rounding) {
            Ok((lo, hi)) => [lo[0], hi[0]].into_iter().filter_map(snap).collect(),
            Err(Error::NotDegenerate(msg)) => {
                log::warn!("no two-spike comb ({msg}); reading a single minimum");
                snap(state.expectation()[0]).into_iter().collect()
            }
            Err(e) => return Err(e),
        }
    } else {
        let report = resolve_all_minima(&state.density, &grid, config.ramp_beta, &config.ipa)?;
        ramp_iterations = report.iterations_used;
        complete &= report.complete;
        report.slots.iter().filter_map(|s| primes.prime_at(s[0])).collect()
    };
    candidates.sort_unstable();
    candidates.dedup();
    let t3 = Instant::now();

    let (min_rem, min_primes) = pot.minimal_remainder_primes();
    let factors: Vec<u64> = candidates
        .iter()
        .copied()
        .filter(|&p| pot.value(primes.slot_of(p).expect("on grid")) == 0.0)
        .collect();
    let (exps, cofactor) = exponents(n, &factors);
    let p_sq = BigUint::from(*p_max) * BigUint::from(*p_max);
    let cofactor_is_prime = complete && !factors.is_empty() && cofactor > BigUint::one() && cofactor < p_sq;
    let status = if factors.is_empty() && min_rem > 0.0 {
        FactorStatus::NoMinimaAtZero
    } else if !complete {
        FactorStatus::Unconverged
    } else if cofactor.is_one() || cofactor_is_prime {
        FactorStatus::Factored
    } else {
        FactorStatus::Partial
    };
    let no_zero = matches!(status, FactorStatus::NoMinimaAtZero);
    Ok(FactorResult {
        workload: Workload::Factor,
        n: n.to_string(),
        p_max: *p_max,
        mode: if *biprime { "biprime" } else { "general" },
        beta: config.ipa.beta,
        ramp_beta: (!*biprime).then_some(config.ramp_beta),
        status,
        converged: complete,
        factors,
        exponents: exps,
        cofactor: cofactor.to_string(),
        cofactor_is_prime,
        iterations: state.iteration,
        ramp_iterations,
        minimal_remainder: no_zero.then_some(min_rem),
        minimal_remainder_primes: if no_zero { min_primes } else { Vec::new() },
        boltzmann,
        timing: config.timing.then(|| Timing {
            cross: (t1 - t0).as_secs_f64(),
            iterations: (t2 - t1).as_secs_f64(),
            measurement: (t3 - t2).as_secs_f64(),
        }),
    })
}

pub fn dispatch(config: &RunConfig) -> Result<i32> {
    match config.workload {
        Workload::Dna => cmd_dna(config),
        Workload::Factor => cmd_factor(config),
        Workload::Custom => cmd_custom(config),
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_CONVERGED };
        }
    };
    let config = match RunConfig::from_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match dispatch(&config) {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::Parse { .. } | Error::Io(_))) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_UNCONVERGED
        }
    }
}

//! Potential energy surfaces evaluated on product grids.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qtt::{Axis, ProductGrid};

/// Energy oracle over grid slots.
pub trait Potential: Sync {
    /// Energy at per-axis slots.
    fn energy(&self, grid: &ProductGrid, slots: &[usize]) -> f64;

    /// One-axis term for potentials of the form `Σ_i v_i(x_i)`, `None` otherwise.
    fn axis_energy(&self, _grid: &ProductGrid, _dim: usize, _slot: usize) -> Option<f64> {
        None
    }
}

/// Quartic double well `v(x) = 0.429x − 1.126x² − 0.143x³ + 0.563x⁴` (eV), summed over axes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DnaPotential;

impl DnaPotential {
    pub const COEFFICIENTS: [f64; 5] = [0.0, 0.429, -1.126, -0.143, 0.563];

    pub fn single(x: f64) -> f64 {
        horner(&Self::COEFFICIENTS, x)
    }
}

impl Potential for DnaPotential {
    fn energy(&self, grid: &ProductGrid, slots: &[usize]) -> f64 {
        slots
            .iter()
            .zip(grid.axes())
            .map(|(&s, a)| Self::single(a.coord(s)))
            .sum()
    }

    fn axis_energy(&self, grid: &ProductGrid, dim: usize, slot: usize) -> Option<f64> {
        Some(Self::single(grid.axes()[dim].coord(slot)))
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Separable polynomial `Σ_i Σ_k c_{ik} x_i^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    coefficients: Vec<Vec<f64>>,
}

impl PolynomialPotential {
    pub fn new(coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Config("polynomial potential needs at least one dimension".into()));
        }
        if coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("polynomial coefficients must be finite".into()));
        }
        Ok(Self { coefficients })
    }

    /// Same polynomial on every one of `dims` axes.
    pub fn shared(coefficients: Vec<f64>, dims: usize) -> Result<Self> {
        Self::new(vec![coefficients; dims])
    }

    /// Parses lines `all: c0 c1 ...` or `<dim>: c0 c1 ...`; `#` starts a comment.
    /// Coefficients are listed in increasing power.
    pub fn parse(text: &str, dims: usize) -> Result<Self> {
        let mut shared: Option<Vec<f64>> = None;
        let mut per_dim: Vec<Option<Vec<f64>>> = vec![None; dims];
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| err("expected `<dim|all>: c0 c1 ...`".into()))?;
            let coeffs = rest
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(format!("invalid coefficient `{tok}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if coeffs.is_empty() {
                return Err(err("no coefficients".into()));
            }
            match key.trim() {
                "all" => shared = Some(coeffs),
                k => {
                    let dim: usize = k
                        .parse()
                        .map_err(|_| err(format!("invalid dimension `{k}`")))?;
                    if dim >= dims {
                        return Err(err(format!("dimension {dim} out of range for {dims} dims")));
                    }
                    per_dim[dim] = Some(coeffs);
                }
            }
        }
        let coefficients = per_dim
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.or_else(|| shared.clone()).ok_or_else(|| Error::Parse {
                    line: 0,
                    message: format!("no polynomial given for dimension {i}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coefficients)
    }

    pub fn dims(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn axis_value(&self, dim: usize, x: f64) -> f64 {
        horner(&self.coefficients[dim], x)
    }
}

impl Potential for PolynomialPotential {
    fn energy(&self, grid: &ProductGrid, slots: &[usize]) -> f64 {
        slots
            .iter()
            .zip(grid.axes())
            .enumerate()
            .map(|(i, (&s, a))| self.axis_value(i, a.coord(s)))
            .sum()
    }

    fn axis_energy(&self, grid: &ProductGrid, dim: usize, slot: usize) -> Option<f64> {
        Some(self.axis_value(dim, grid.axes()[dim].coord(slot)))
    }
}

/// Primes up to `limit`, ascending.
pub fn sieve_primes(limit: u64) -> Result<Vec<u64>> {
    if limit < 2 {
        return Err(Error::EmptyDomain(format!("no primes below {limit}")));
    }
    let n = usize::try_from(limit).map_err(|_| Error::Config("sieve limit too large".into()))?;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    Ok(primes)
}

/// Primes `2..=p_max` on `2^depth` slots; trailing slots are padding.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimeGrid {
    p_max: u64,
    primes: Vec<u64>,
    depth: usize,
}

impl PrimeGrid {
    pub fn new(p_max: u64) -> Result<Self> {
        let primes = sieve_primes(p_max)?;
        let depth = (usize::BITS - (primes.len() - 1).leading_zeros()).max(1) as usize;
        Ok(Self { p_max, primes, depth })
    }

    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn slots(&self) -> usize {
        1 << self.depth
    }

    pub fn pad_value(&self) -> f64 {
        self.p_max as f64
    }

    pub fn prime_at(&self, slot: usize) -> Option<u64> {
        self.primes.get(slot).copied()
    }

    pub fn slot_of(&self, prime: u64) -> Option<usize> {
        self.primes.binary_search(&prime).ok()
    }

    /// Axis whose coordinates are the primes, continued past `p_max` on padded slots.
    pub fn axis(&self) -> Axis {
        let mut coords: Vec<f64> = self.primes.iter().map(|&p| p as f64).collect();
        let pad = self.slots() - coords.len();
        coords.extend((1..=pad).map(|k| (self.p_max + k as u64) as f64));
        Axis::tabulated(coords).expect("primes are increasing")
    }

    pub fn product_grid(&self) -> ProductGrid {
        ProductGrid::new(vec![self.axis()]).expect("one axis")
    }
}

/// `V(p) = N mod p` over a prime grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModPotential {
    target: BigUint,
    grid: PrimeGrid,
    values: Vec<f64>,
}

impl ModPotential {
    pub fn new(target: BigUint, grid: PrimeGrid) -> Self {
        let pad = grid.pad_value();
        let values = (0..grid.slots())
            .into_par_iter()
            .map(|s| match grid.prime_at(s) {
                Some(p) => (&target % p).to_f64().expect("remainder fits"),
                None => pad,
            })
            .collect();
        Self { target, grid, values }
    }

    pub fn target(&self) -> &BigUint {
        &self.target
    }

    pub fn grid(&self) -> &PrimeGrid {
        &self.grid
    }

    pub fn value(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Primes on the grid that divide `N`.
    pub fn minima(&self) -> Vec<u64> {
        self.grid
            .primes()
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v == 0.0)
            .map(|(&p, _)| p)
            .collect()
    }

    /// Primes attaining the smallest remainder.
    pub fn minimal_remainder_primes(&self) -> (f64, Vec<u64>) {
        let n = self.grid.primes().len();
        let min = self.values[..n].iter().cloned().fold(f64::INFINITY, f64::min);
        let primes = self.grid.primes()[..n]
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v == min)
            .map(|(&p, _)| p)
            .collect();
        (min, primes)
    }
}

impl Potential for ModPotential {
    fn energy(&self, _grid: &ProductGrid, slots: &[usize]) -> f64 {
        self.values[slots[0]]
    }

    fn axis_energy(&self, _grid: &ProductGrid, _dim: usize, slot: usize) -> Option<f64> {
        Some(self.values[slot])
    }
}

pub fn minima_of_mod(pot: &ModPotential) -> Vec<u64> {
    pot.minima()
}

/// Multiplicity of each prime in `n`, and the cofactor left after dividing them out.
pub fn exponents(n: &BigUint, primes: &[u64]) -> (Vec<u32>, BigUint) {
    let mut rest = n.clone();
    let mut out = Vec::with_capacity(primes.len());
    for &p in primes {
        let mut e = 0;
        if p >= 2 {
            let big = BigUint::from(p);
            while !rest.is_zero() && (&rest % &big).is_zero() {
                rest /= &big;
                e += 1;
            }
        }
        out.push(e);
    }
    (out, rest)
}

/// Linear ramp `slope · J` over the big-endian flat index `J` of the product grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampPotential {
    pub slope: f64,
}

impl Potential for RampPotential {
    fn energy(&self, grid: &ProductGrid, slots: &[usize]) -> f64 {
        let j = grid
            .bits(slots)
            .iter()
            .fold(0.0, |acc: f64, &b| acc * 2.0 + b as f64);
        self.slope * j
    }
}

/// Parses a decimal integer of any length.
pub fn parse_target(text: &str) -> Result<BigUint> {
    let t = text.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Config(format!("N must be a decimal integer, got `{text}`")));
    }
    let n = BigUint::parse_bytes(t.as_bytes(), 10)
        .ok_or_else(|| Error::Config(format!("invalid integer `{text}`")))?;
    if n < BigUint::from(2u32) {
        return Err(Error::Config("N must be at least 2".into()));
    }
    Ok(n)
}

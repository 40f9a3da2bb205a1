//! Tensor trains over real 64-bit cores.
//!
//! A tensor train represents an order-d array as a chain of order-3 cores
//! `G_j` of shape `(r_{j-1}, m_j, r_j)` with `r_0 = r_d = 1`:
//!
//! ```text
//! T(i_1, ..., i_d) = G_1[i_1] G_2[i_2] ... G_d[i_d]
//! ```
//!
//! where each `G_j[i_j]` is an `r_{j-1} x r_j` matrix. Values are immutable
//! after construction; every operation returns a new train.

use ndarray::{s, Array2, Array3, ArrayD, IxDyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Default cap on the number of entries `to_dense` will materialize.
pub const DEFAULT_DENSE_CAP: usize = 1 << 22;

/// Truncation rule for [`TensorTrain::round`] and [`TensorTrain::from_dense`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingPolicy {
    /// Bound on `‖result − input‖_F / ‖input‖_F`.
    pub relative_tolerance: f64,
    /// Cap on every internal rank; `None` is unbounded.
    pub max_rank: Option<usize>,
}

impl Default for RoundingPolicy {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            max_rank: Some(64),
        }
    }
}

impl RoundingPolicy {
    pub fn new(relative_tolerance: f64, max_rank: Option<usize>) -> Result<Self> {
        if !(relative_tolerance >= 0.0) || !relative_tolerance.is_finite() {
            return Err(Error::Config(format!(
                "rounding tolerance must be finite and nonnegative, got {relative_tolerance}"
            )));
        }
        if max_rank == Some(0) {
            return Err(Error::Config("max_rank must be positive".into()));
        }
        Ok(Self {
            relative_tolerance,
            max_rank,
        })
    }

    /// No truncation beyond floating-point rank detection.
    pub fn exact() -> Self {
        Self {
            relative_tolerance: 0.0,
            max_rank: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Array3<f64>>,
}

impl TensorTrain {
    /// Assembles a train from cores, checking the rank chain.
    pub fn from_cores(cores: Vec<Array3<f64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidShape("a tensor train needs at least one core".into()));
        }
        if cores[0].dim().0 != 1 || cores[cores.len() - 1].dim().2 != 1 {
            return Err(Error::InvalidShape("boundary ranks must be 1".into()));
        }
        for (j, core) in cores.iter().enumerate() {
            if core.dim().1 == 0 {
                return Err(Error::InvalidShape(format!("core {j} has an empty mode")));
            }
            if core.dim().0 == 0 || core.dim().2 == 0 {
                return Err(Error::InvalidShape(format!("core {j} has a zero rank")));
            }
        }
        for j in 1..cores.len() {
            if cores[j - 1].dim().2 != cores[j].dim().0 {
                return Err(Error::InvalidShape(format!(
                    "rank mismatch between cores {} and {j}: {} vs {}",
                    j - 1,
                    cores[j - 1].dim().2,
                    cores[j].dim().0
                )));
            }
        }
        Ok(Self { cores })
    }

    /// Rank-1 train equal to `value` everywhere.
    pub fn constant(mode_sizes: &[usize], value: f64) -> Result<Self> {
        check_modes(mode_sizes)?;
        let d = mode_sizes.len();
        let per_core = value.abs().powf(1.0 / d as f64);
        let cores = mode_sizes
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                let v = if j == 0 { per_core.copysign(value) } else { per_core };
                Array3::from_elem((1, m, 1), v)
            })
            .collect();
        Ok(Self { cores })
    }

    /// Rank-1 train `v_1(i_1) v_2(i_2) ... v_d(i_d)`.
    pub fn rank_one(factors: &[Vec<f64>]) -> Result<Self> {
        let modes: Vec<usize> = factors.iter().map(|f| f.len()).collect();
        check_modes(&modes)?;
        let cores = factors
            .iter()
            .map(|f| Array3::from_shape_vec((1, f.len(), 1), f.clone()).expect("shape"))
            .collect();
        Ok(Self { cores })
    }

    /// Random train with the given internal ranks; entries uniform in [-1, 1].
    pub fn random<R: Rng>(mode_sizes: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        check_modes(mode_sizes)?;
        if ranks.len() + 1 != mode_sizes.len() {
            return Err(Error::InvalidShape(format!(
                "{} modes need {} internal ranks, got {}",
                mode_sizes.len(),
                mode_sizes.len() - 1,
                ranks.len()
            )));
        }
        let mut bonds = vec![1];
        bonds.extend_from_slice(ranks);
        bonds.push(1);
        let cores = mode_sizes
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                Array3::from_shape_fn((bonds[j], m, bonds[j + 1]), |_| rng.gen_range(-1.0..=1.0))
            })
            .collect();
        Self::from_cores(cores)
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Array3<f64>> {
        self.cores
    }

    /// Number of cores.
    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    /// Internal ranks `r_1 .. r_{d-1}`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.dim().2)
            .collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Total number of stored core entries.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    /// Number of entries of the represented array.
    pub fn dense_size(&self) -> u128 {
        self.cores.iter().map(|c| c.dim().1 as u128).product()
    }

    pub fn eval(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.cores.len() {
            return Err(Error::Index(format!(
                "index has {} entries, train has {} modes",
                index.len(),
                self.cores.len()
            )));
        }
        for (j, (&i, core)) in index.iter().zip(&self.cores).enumerate() {
            if i >= core.dim().1 {
                return Err(Error::Index(format!(
                    "index {i} out of range for mode {j} of size {}",
                    core.dim().1
                )));
            }
        }
        Ok(self.eval_unchecked(index))
    }

    pub(crate) fn eval_unchecked(&self, index: &[usize]) -> f64 {
        let mut v = vec![1.0];
        for (core, &i) in self.cores.iter().zip(index) {
            let (r0, _, r1) = core.dim();
            let mut next = vec![0.0; r1];
            for (a, &va) in v.iter().enumerate().take(r0) {
                if va == 0.0 {
                    continue;
                }
                for (k, nk) in next.iter_mut().enumerate() {
                    *nk += va * core[[a, i, k]];
                }
            }
            v = next;
        }
        v[0]
    }

    /// TT-SVD of a dense table.
    pub fn from_dense(table: &ArrayD<f64>, policy: RoundingPolicy) -> Result<Self> {
        let modes: Vec<usize> = table.shape().to_vec();
        check_modes(&modes)?;
        let d = modes.len();
        let values: Vec<f64> = table.iter().copied().collect();
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        let delta = if d > 1 {
            policy.relative_tolerance * norm / ((d - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut cores = Vec::with_capacity(d);
        let mut rank = 1;
        let mut rest: usize = values.len();
        let mut carry = Array2::from_shape_vec((1, rest), values).expect("shape");
        for &m in &modes[..d - 1] {
            rest /= m;
            let unfolded = Array2::from_shape_vec((rank * m, rest), carry.iter().copied().collect())
                .expect("shape");
            let (u, sv, vt) = linalg::svd(unfolded.view());
            let r = linalg::truncation_rank(&sv, delta, policy.max_rank);
            let core = u.slice(s![.., ..r]).to_owned();
            cores.push(core.into_shape_with_order((rank, m, r)).expect("shape"));
            let mut next = vt.slice(s![..r, ..]).to_owned();
            for (k, mut row) in next.rows_mut().into_iter().enumerate() {
                row *= sv[k];
            }
            carry = next;
            rank = r;
        }
        let last = Array3::from_shape_vec((rank, modes[d - 1], 1), carry.iter().copied().collect())
            .expect("shape");
        cores.push(last);
        Self::from_cores(cores)
    }

    pub fn to_dense(&self) -> Result<ArrayD<f64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<ArrayD<f64>> {
        let size = self.dense_size();
        if size > cap as u128 {
            return Err(Error::SizeCap { size, cap });
        }
        let mut acc = Array2::from_elem((1, 1), 1.0);
        for core in &self.cores {
            let (r0, m, r1) = core.dim();
            let right = Array2::from_shape_vec((r0, m * r1), core.iter().copied().collect())
                .expect("shape");
            let prod = acc.dot(&right);
            let rows = prod.nrows() * m;
            acc = Array2::from_shape_vec((rows, r1), prod.iter().copied().collect()).expect("shape");
        }
        let flat: Vec<f64> = acc.iter().copied().collect();
        Ok(ArrayD::from_shape_vec(IxDyn(&self.mode_sizes()), flat).expect("shape"))
    }

    /// Elementwise product. Ranks multiply.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_modes(other)?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let (ra0, m, ra1) = a.dim();
                let (rb0, _, rb1) = b.dim();
                Array3::from_shape_fn((ra0 * rb0, m, ra1 * rb1), |(l, i, r)| {
                    a[[l / rb0, i, r / rb1]] * b[[l % rb0, i, r % rb1]]
                })
            })
            .collect();
        Ok(Self { cores })
    }

    /// Elementwise sum. Ranks add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_modes(other)?;
        let d = self.cores.len();
        if d == 1 {
            return Ok(Self {
                cores: vec![&self.cores[0] + &other.cores[0]],
            });
        }
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .enumerate()
            .map(|(j, (a, b))| {
                let (ra0, m, ra1) = a.dim();
                let (rb0, _, rb1) = b.dim();
                if j == 0 {
                    let mut c = Array3::zeros((1, m, ra1 + rb1));
                    c.slice_mut(s![.., .., ..ra1]).assign(a);
                    c.slice_mut(s![.., .., ra1..]).assign(b);
                    c
                } else if j == d - 1 {
                    let mut c = Array3::zeros((ra0 + rb0, m, 1));
                    c.slice_mut(s![..ra0, .., ..]).assign(a);
                    c.slice_mut(s![ra0.., .., ..]).assign(b);
                    c
                } else {
                    let mut c = Array3::zeros((ra0 + rb0, m, ra1 + rb1));
                    c.slice_mut(s![..ra0, .., ..ra1]).assign(a);
                    c.slice_mut(s![ra0.., .., ra1..]).assign(b);
                    c
                }
            })
            .collect();
        Ok(Self { cores })
    }

    /// Multiplies every entry by `factor`. The magnitude is spread evenly
    /// over the cores and the sign goes on the first core.
    pub fn scale(&self, factor: f64) -> Self {
        let d = self.cores.len();
        let per_core = factor.abs().powf(1.0 / d as f64);
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let f = if j == 0 { per_core.copysign(factor) } else { per_core };
                c * f
            })
            .collect();
        Self { cores }
    }

    /// Kronecker product over disjoint modes: `(self ⊗ other)(i, j) = self(i) other(j)`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut cores = self.cores.clone();
        cores.extend(other.cores.iter().cloned());
        Self { cores }
    }

    /// Signed sum of all entries.
    pub fn sum(&self) -> f64 {
        let mut v = vec![1.0];
        for core in &self.cores {
            let (r0, m, r1) = core.dim();
            let mut next = vec![0.0; r1];
            for a in 0..r0 {
                for i in 0..m {
                    for (k, nk) in next.iter_mut().enumerate() {
                        *nk += v[a] * core[[a, i, k]];
                    }
                }
            }
            v = next;
        }
        v[0]
    }

    /// L1 norm of a train whose entries are known to be nonnegative.
    pub fn l1_norm_nonneg(&self) -> Result<f64> {
        let total = self.sum();
        if !total.is_finite() {
            return Err(Error::NumericalOverflow(format!(
                "mass contraction produced {total}"
            )));
        }
        Ok(total)
    }

    /// `Σ_i self(i) other(i)`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_modes(other)?;
        let mut acc = Array2::from_elem((1, 1), 1.0);
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (_, m, ra1) = a.dim();
            let rb1 = b.dim().2;
            let mut next = Array2::zeros((ra1, rb1));
            for i in 0..m {
                let ai = a.slice(s![.., i, ..]);
                let bi = b.slice(s![.., i, ..]);
                next += &ai.t().dot(&acc).dot(&bi);
            }
            acc = next;
        }
        Ok(acc[[0, 0]])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).map(|x| x.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Rank truncation: left-to-right QR orthogonalization, then right-to-left
    /// truncated SVD with per-bond threshold `tol ‖T‖ / sqrt(d − 1)`.
    pub fn round(&self, policy: RoundingPolicy) -> Self {
        let d = self.cores.len();
        if d == 1 {
            return self.clone();
        }
        let mut cores = self.cores.clone();
        for j in 0..d - 1 {
            let (r0, m, r1) = cores[j].dim();
            let unfolded = Array2::from_shape_vec((r0 * m, r1), cores[j].iter().copied().collect())
                .expect("shape");
            let (q, r) = linalg::qr_thin(unfolded.view());
            let k = q.ncols();
            cores[j] = q.into_shape_with_order((r0, m, k)).expect("shape");
            let (_, m1, r2) = cores[j + 1].dim();
            let next = Array2::from_shape_vec((r1, m1 * r2), cores[j + 1].iter().copied().collect())
                .expect("shape");
            let merged = r.dot(&next);
            cores[j + 1] = merged.into_shape_with_order((k, m1, r2)).expect("shape");
        }
        let norm = cores[d - 1].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            if norm == 0.0 {
                return Self::constant(&self.mode_sizes(), 0.0).expect("valid modes");
            }
            return self.clone();
        }
        let delta = policy.relative_tolerance * norm / ((d - 1) as f64).sqrt();
        for j in (1..d).rev() {
            let (r0, m, r1) = cores[j].dim();
            let unfolded = Array2::from_shape_vec((r0, m * r1), cores[j].iter().copied().collect())
                .expect("shape");
            let (u, sv, vt) = linalg::svd(unfolded.view());
            let rank = linalg::truncation_rank(&sv, delta, policy.max_rank);
            cores[j] = vt
                .slice(s![..rank, ..])
                .to_owned()
                .into_shape_with_order((rank, m, r1))
                .expect("shape");
            let mut us = u.slice(s![.., ..rank]).to_owned();
            for (k, mut col) in us.columns_mut().into_iter().enumerate() {
                col *= sv[k];
            }
            let (p0, pm, _) = cores[j - 1].dim();
            let prev = Array2::from_shape_vec((p0 * pm, r0), cores[j - 1].iter().copied().collect())
                .expect("shape");
            cores[j - 1] = prev
                .dot(&us)
                .into_shape_with_order((p0, pm, rank))
                .expect("shape");
        }
        Self { cores }
    }

    /// Smallest value over `samples` uniformly drawn indices.
    pub fn sampled_min<R: Rng>(&self, samples: usize, rng: &mut R) -> f64 {
        let modes = self.mode_sizes();
        let mut index = vec![0; modes.len()];
        let mut lowest = f64::INFINITY;
        for _ in 0..samples {
            for (slot, &m) in index.iter_mut().zip(&modes) {
                *slot = rng.gen_range(0..m);
            }
            lowest = lowest.min(self.eval_unchecked(&index));
        }
        lowest
    }

    fn check_same_modes(&self, other: &Self) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::InvalidShape(format!(
                "mode sizes differ: {:?} vs {:?}",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }
}

fn check_modes(mode_sizes: &[usize]) -> Result<()> {
    if mode_sizes.is_empty() {
        return Err(Error::InvalidShape("mode_sizes is empty".into()));
    }
    if let Some(j) = mode_sizes.iter().position(|&m| m == 0) {
        return Err(Error::InvalidShape(format!("mode {j} has size 0")));
    }
    Ok(())
}

/// Iterates over all multi-indices of `mode_sizes` in row-major order.
pub fn multi_indices(mode_sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = mode_sizes.iter().product();
    (0..total).map(move |mut flat| {
        let mut index = vec![0; mode_sizes.len()];
        for (slot, &m) in index.iter_mut().zip(mode_sizes).rev() {
            *slot = flat % m;
            flat /= m;
        }
        index
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_force(tt: &TensorTrain, index: &[usize]) -> f64 {
        // explicit sum over all auxiliary indices
        let ranks: Vec<usize> = std::iter::once(1)
            .chain(tt.ranks())
            .chain(std::iter::once(1))
            .collect();
        let d = tt.len();
        let bonds: Vec<usize> = ranks[1..d].to_vec();
        let mut total = 0.0;
        for alphas in multi_indices(&bonds) {
            let mut term = 1.0;
            for j in 0..d {
                let left = if j == 0 { 0 } else { alphas[j - 1] };
                let right = if j == d - 1 { 0 } else { alphas[j] };
                term *= tt.cores()[j][[left, index[j], right]];
            }
            total += term;
        }
        total
    }

    #[test]
    fn constant_evaluates_everywhere() {
        let tt = TensorTrain::constant(&[2, 2, 2], 1.0).unwrap();
        for idx in multi_indices(&[2, 2, 2]) {
            assert_eq!(tt.eval(&idx).unwrap(), 1.0);
        }
        let zero = TensorTrain::constant(&[2], 0.0).unwrap();
        assert_eq!(zero.eval(&[0]).unwrap(), 0.0);
        assert_eq!(zero.eval(&[1]).unwrap(), 0.0);
        let quarter = TensorTrain::constant(&[2, 2], 0.25).unwrap();
        assert!((quarter.sum() - 1.0).abs() < 1e-15);
        assert!(matches!(
            TensorTrain::constant(&[], 1.0),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn eval_constant_and_bounds() {
        let tt = TensorTrain::constant(&[2, 2], 3.0).unwrap();
        assert!((tt.eval(&[1, 0]).unwrap() - 3.0).abs() < 1e-15);
        assert!(matches!(tt.eval(&[2, 0]), Err(Error::Index(_))));
        assert!(matches!(tt.eval(&[0]), Err(Error::Index(_))));
    }

    #[test]
    fn eval_matches_brute_force_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tt = TensorTrain::random(&[2, 2, 2], &[2, 2], &mut rng).unwrap();
        let dense = tt.to_dense().unwrap();
        for idx in multi_indices(&[2, 2, 2]) {
            let expect = brute_force(&tt, &idx);
            assert!((tt.eval(&idx).unwrap() - expect).abs() < 1e-14);
            assert!((dense[IxDyn(&idx)] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn from_dense_small_exact() {
        let table = array![[1.0, 2.0], [3.0, 4.0]].into_dyn();
        let tt = TensorTrain::from_dense(&table, RoundingPolicy::exact()).unwrap();
        for idx in multi_indices(&[2, 2]) {
            assert!((tt.eval(&idx).unwrap() - table[IxDyn(&idx)]).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_table_has_unit_ranks() {
        let g = [1.0, -2.0, 0.5];
        let h = [3.0, 1.0, 4.0, -1.0];
        let table = ArrayD::from_shape_fn(IxDyn(&[3, 4]), |ix| g[ix[0]] * h[ix[1]]);
        let tt = TensorTrain::from_dense(&table, RoundingPolicy::new(1e-12, None).unwrap()).unwrap();
        assert_eq!(tt.ranks(), vec![1]);
    }

    #[test]
    fn to_dense_refuses_over_cap() {
        let tt = TensorTrain::constant(&[2; 10], 1.0).unwrap();
        assert!(matches!(tt.to_dense_capped(512), Err(Error::SizeCap { .. })));
        let ones = TensorTrain::constant(&[2, 2], 1.0).unwrap().to_dense().unwrap();
        assert!(ones.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn hadamard_identity_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = TensorTrain::random(&[2, 3, 2], &[2, 3], &mut rng).unwrap();
        let one = TensorTrain::constant(&[2, 3, 2], 1.0).unwrap();
        let prod = one.hadamard(&b).unwrap();
        for idx in multi_indices(&[2, 3, 2]) {
            assert!((prod.eval(&idx).unwrap() - b.eval(&idx).unwrap()).abs() < 1e-14);
        }
        let two = TensorTrain::constant(&[2, 2], 2.0).unwrap();
        let four = two.hadamard(&two).unwrap();
        for idx in multi_indices(&[2, 2]) {
            assert!((four.eval(&idx).unwrap() - 4.0).abs() < 1e-14);
        }
        let other = TensorTrain::constant(&[2, 3], 1.0).unwrap();
        assert!(matches!(two.hadamard(&other), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn l1_norm_of_uniform_and_delta() {
        let tt = TensorTrain::constant(&[2, 2, 2], 0.125).unwrap();
        assert!((tt.l1_norm_nonneg().unwrap() - 1.0).abs() < 1e-15);
        let mut table = ArrayD::zeros(IxDyn(&[2, 2, 2]));
        table[IxDyn(&[1, 0, 1])] = 1.0;
        let delta = TensorTrain::from_dense(&table, RoundingPolicy::exact()).unwrap();
        assert!((delta.l1_norm_nonneg().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inner_products() {
        let uniform = TensorTrain::constant(&[2, 2, 2], 0.125).unwrap();
        assert!((uniform.dot(&uniform).unwrap() - 0.125).abs() < 1e-15);
        let mut a = ArrayD::zeros(IxDyn(&[2, 2]));
        let mut b = ArrayD::zeros(IxDyn(&[2, 2]));
        a[IxDyn(&[0, 0])] = 1.0;
        a[IxDyn(&[1, 1])] = 2.0;
        b[IxDyn(&[0, 1])] = 5.0;
        b[IxDyn(&[1, 0])] = -1.0;
        let ta = TensorTrain::from_dense(&a, RoundingPolicy::exact()).unwrap();
        let tb = TensorTrain::from_dense(&b, RoundingPolicy::exact()).unwrap();
        assert!(ta.dot(&tb).unwrap().abs() < 1e-14);
    }

    #[test]
    fn add_is_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for modes in [vec![3], vec![2, 2, 2]] {
            let ranks = vec![2; modes.len() - 1];
            let a = TensorTrain::random(&modes, &ranks, &mut rng).unwrap();
            let b = TensorTrain::random(&modes, &ranks, &mut rng).unwrap();
            let c = a.add(&b).unwrap();
            for idx in multi_indices(&modes) {
                let expect = a.eval(&idx).unwrap() + b.eval(&idx).unwrap();
                assert!((c.eval(&idx).unwrap() - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scale_behaviour() {
        let uniform = TensorTrain::constant(&[2, 2, 2], 0.125).unwrap();
        assert!((uniform.scale(2.0).sum() - 2.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tt = TensorTrain::random(&[2, 2, 2, 2], &[2, 3, 2], &mut rng).unwrap();
        let same = tt.scale(1.0);
        for idx in multi_indices(&[2, 2, 2, 2]) {
            assert!((same.eval(&idx).unwrap() - tt.eval(&idx).unwrap()).abs() < 1e-14);
        }
        let neg = tt.scale(-3.0);
        for idx in multi_indices(&[2, 2, 2, 2]) {
            assert!((neg.eval(&idx).unwrap() + 3.0 * tt.eval(&idx).unwrap()).abs() < 1e-13);
        }
        let positive = TensorTrain::random(&[2, 2, 2], &[2, 2], &mut rng)
            .unwrap()
            .hadamard(&TensorTrain::random(&[2, 2, 2], &[2, 2], &mut rng).unwrap())
            .unwrap();
        let sq = positive.hadamard(&positive).unwrap();
        let normalized = sq.scale(1.0 / sq.l1_norm_nonneg().unwrap());
        assert!((normalized.l1_norm_nonneg().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_rank_one_is_unchanged() {
        let tt = TensorTrain::rank_one(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.25]]).unwrap();
        let r = tt.round(RoundingPolicy::default());
        assert_eq!(r.ranks(), vec![1, 1]);
        for idx in multi_indices(&[2, 2, 2]) {
            assert!((r.eval(&idx).unwrap() - tt.eval(&idx).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn round_of_square_is_compact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = TensorTrain::random(&[2, 2, 2, 2], &[2, 2, 2], &mut rng).unwrap();
        let sq = a.hadamard(&a).unwrap();
        assert_eq!(sq.max_rank(), 4);
        let r = sq.round(RoundingPolicy::new(1e-12, None).unwrap());
        assert!(r.max_rank() <= 4);
        for idx in multi_indices(&[2, 2, 2, 2]) {
            assert!((r.eval(&idx).unwrap() - sq.eval(&idx).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn round_to_rank_one_matches_dense_svd() {
        // 2 x 2 case: the best rank-1 approximation is the leading SVD term
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = TensorTrain::random(&[3, 3], &[2], &mut rng).unwrap();
        let dense = a.to_dense().unwrap();
        let m = Array2::from_shape_fn((3, 3), |(i, j)| dense[IxDyn(&[i, j])]);
        // leading singular value by power iteration on m^T m
        let g = m.t().dot(&m);
        let mut v = ndarray::Array1::from_elem(3, 1.0);
        for _ in 0..500 {
            let w = g.dot(&v);
            v = &w / w.dot(&w).sqrt();
        }
        let sigma1_sq = v.dot(&g.dot(&v));
        let best_err = (m.iter().map(|x| x * x).sum::<f64>() - sigma1_sq).max(0.0).sqrt();
        let r = a.round(RoundingPolicy::new(0.0, Some(1)).unwrap());
        assert_eq!(r.ranks(), vec![1]);
        let rd = r.to_dense().unwrap();
        let err = rd
            .iter()
            .zip(dense.iter())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((err - best_err).abs() < 1e-7, "{err} vs {best_err}");
    }

    #[test]
    fn rounding_zero_train() {
        let z = TensorTrain::constant(&[2, 2, 2], 0.0).unwrap();
        let r = z.round(RoundingPolicy::default());
        assert_eq!(r.sum(), 0.0);
    }

    #[test]
    fn from_cores_rejects_broken_chain() {
        let a = Array3::zeros((1, 2, 2));
        let b = Array3::zeros((3, 2, 1));
        assert!(matches!(
            TensorTrain::from_cores(vec![a, b]),
            Err(Error::InvalidShape(_))
        ));
        assert!(TensorTrain::from_cores(vec![]).is_err());
    }
}

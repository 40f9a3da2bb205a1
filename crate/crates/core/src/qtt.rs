//! Quantics folding of grids into binary index space.
//!
//! A grid of `2^d` points is addressed by `d` binary digits, most significant
//! first. A [`ProductGrid`] concatenates the digit strings of its axes, axis 0
//! first, so the whole product index reads as one big-endian integer.

use ndarray::{Array3, ArrayD, IxDyn};

use crate::error::{Error, Result};
use crate::tt::{RoundingPolicy, TensorTrain};

/// Uniform grid of `2^depth` points on `[lower, upper]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lower: f64,
    upper: f64,
    depth: usize,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, depth: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
            return Err(Error::Config(format!(
                "grid needs finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        if depth == 0 || depth > 62 {
            return Err(Error::Config(format!("quantics depth must be in 1..=62, got {depth}")));
        }
        Ok(Self { lower, upper, depth })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn point_count(&self) -> usize {
        1 << self.depth
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.point_count() - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        if j + 1 == self.point_count() {
            self.upper
        } else {
            self.lower + j as f64 * self.spacing()
        }
    }

    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.lower) / self.spacing()).round();
        j.clamp(0.0, (self.point_count() - 1) as f64) as usize
    }
}

/// One physical dimension of a product grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Uniform(GridSpec),
    /// Arbitrary strictly increasing coordinates on `2^depth` slots.
    Tabulated { coords: Vec<f64>, depth: usize },
}

impl Axis {
    pub fn tabulated(coords: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidShape(format!(
                "tabulated axis needs a power-of-two length >= 2, got {n}"
            )));
        }
        if coords.windows(2).any(|w| !(w[1] > w[0])) || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("tabulated coordinates must be finite and strictly increasing".into()));
        }
        Ok(Axis::Tabulated {
            depth: n.trailing_zeros() as usize,
            coords,
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            Axis::Uniform(g) => g.depth(),
            Axis::Tabulated { depth, .. } => *depth,
        }
    }

    pub fn slots(&self) -> usize {
        1 << self.depth()
    }

    pub fn coord(&self, slot: usize) -> f64 {
        match self {
            Axis::Uniform(g) => g.point(slot),
            Axis::Tabulated { coords, .. } => coords[slot],
        }
    }

    pub fn lower(&self) -> f64 {
        self.coord(0)
    }

    pub fn upper(&self) -> f64 {
        self.coord(self.slots() - 1)
    }

    pub fn nearest_slot(&self, x: f64) -> usize {
        match self {
            Axis::Uniform(g) => g.nearest_index(x),
            Axis::Tabulated { coords, .. } => {
                let k = coords.partition_point(|&c| c < x);
                if k == 0 {
                    0
                } else if k == coords.len() {
                    k - 1
                } else if (coords[k] - x).abs() < (x - coords[k - 1]).abs() {
                    k
                } else {
                    k - 1
                }
            }
        }
    }

    /// Largest slot with coordinate `<= threshold`.
    pub fn last_slot_at_or_below(&self, threshold: f64) -> Option<usize> {
        match self {
            Axis::Uniform(g) => {
                if threshold < g.lower() {
                    None
                } else if threshold >= g.upper() {
                    Some(g.point_count() - 1)
                } else {
                    let mut j = ((threshold - g.lower()) / g.spacing()).floor() as usize;
                    j = j.min(g.point_count() - 1);
                    while j + 1 < g.point_count() && g.point(j + 1) <= threshold {
                        j += 1;
                    }
                    while j > 0 && g.point(j) > threshold {
                        j -= 1;
                    }
                    (g.point(j) <= threshold).then_some(j)
                }
            }
            Axis::Tabulated { coords, .. } => {
                let k = coords.partition_point(|&c| c <= threshold);
                k.checked_sub(1)
            }
        }
    }

    /// Coordinate of every slot as a quantics tensor train.
    pub fn position_tt(&self) -> TensorTrain {
        match self {
            Axis::Uniform(g) => position_tt(g),
            Axis::Tabulated { coords, depth } => {
                let table = ArrayD::from_shape_vec(IxDyn(&vec![2; *depth]), coords.clone())
                    .expect("power-of-two length");
                TensorTrain::from_dense(&table, RoundingPolicy::new(1e-14, None).expect("valid"))
                    .expect("non-empty table")
            }
        }
    }
}

/// Cartesian product of axes, folded into `Σ depth_i` binary modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductGrid {
    axes: Vec<Axis>,
}

impl ProductGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidShape("product grid needs at least one axis".into()));
        }
        Ok(Self { axes })
    }

    pub fn uniform(spec: GridSpec, dims: usize) -> Result<Self> {
        Self::new(vec![Axis::Uniform(spec); dims])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, dim: usize) -> Result<&Axis> {
        self.axes.get(dim).ok_or_else(|| {
            Error::Index(format!("dimension {dim} out of range for {} axes", self.axes.len()))
        })
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn total_depth(&self) -> usize {
        self.axes.iter().map(Axis::depth).sum()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        vec![2; self.total_depth()]
    }

    /// Number of grid points, saturating at `u128::MAX`.
    pub fn point_count(&self) -> u128 {
        let n = self.total_depth();
        if n >= 128 {
            u128::MAX
        } else {
            1u128 << n
        }
    }

    /// First binary mode belonging to axis `dim`.
    pub fn offset(&self, dim: usize) -> usize {
        self.axes[..dim].iter().map(Axis::depth).sum()
    }

    /// Per-axis slots of a binary product index.
    pub fn slots(&self, bits: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.axes.len());
        let mut pos = 0;
        for axis in &self.axes {
            let d = axis.depth();
            out.push(bits[pos..pos + d].iter().fold(0, |acc, &b| (acc << 1) | b));
            pos += d;
        }
        out
    }

    /// Binary product index of per-axis slots.
    pub fn bits(&self, slots: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total_depth());
        for (axis, &slot) in self.axes.iter().zip(slots) {
            let d = axis.depth();
            out.extend((0..d).map(|k| (slot >> (d - 1 - k)) & 1));
        }
        out
    }

    pub fn coords(&self, bits: &[usize]) -> Vec<f64> {
        self.slots(bits)
            .iter()
            .zip(&self.axes)
            .map(|(&s, a)| a.coord(s))
            .collect()
    }
}

/// Big-endian binary digits of `flat`.
pub fn fold_index(flat: u64, depth: usize) -> Result<Vec<usize>> {
    if depth == 0 || depth > 63 || flat >> depth != 0 {
        return Err(Error::Index(format!("{flat} does not fit in {depth} binary digits")));
    }
    Ok((0..depth).map(|k| ((flat >> (depth - 1 - k)) & 1) as usize).collect())
}

pub fn unfold_index(digits: &[usize]) -> Result<u64> {
    if digits.len() > 63 || digits.iter().any(|&b| b > 1) {
        return Err(Error::Index(format!("not a binary index of at most 63 digits: {digits:?}")));
    }
    Ok(digits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
}

/// Grid coordinates as a rank-2 QTT.
pub fn position_tt(grid: &GridSpec) -> TensorTrain {
    let d = grid.depth();
    let h = grid.spacing();
    let a = grid.lower();
    let weight = |k: usize| h * (1u64 << (d - 1 - k)) as f64;
    if d == 1 {
        let core = Array3::from_shape_vec((1, 2, 1), vec![a, grid.upper()]).expect("shape");
        return TensorTrain::from_cores(vec![core]).expect("valid");
    }
    let mut cores = Vec::with_capacity(d);
    let mut first = Array3::zeros((1, 2, 2));
    for b in 0..2 {
        first[[0, b, 0]] = 1.0;
        first[[0, b, 1]] = a + weight(0) * b as f64;
    }
    cores.push(first);
    for k in 1..d - 1 {
        let mut core = Array3::zeros((2, 2, 2));
        for b in 0..2 {
            core[[0, b, 0]] = 1.0;
            core[[0, b, 1]] = weight(k) * b as f64;
            core[[1, b, 1]] = 1.0;
        }
        cores.push(core);
    }
    let mut last = Array3::zeros((2, 2, 1));
    for b in 0..2 {
        last[[0, b, 0]] = weight(d - 1) * b as f64;
        last[[1, b, 0]] = 1.0;
    }
    cores.push(last);
    TensorTrain::from_cores(cores).expect("valid")
}

/// Embeds a one-axis train into the product grid, constant along other axes.
pub fn lift_to_product(tt: &TensorTrain, dim: usize, product: &ProductGrid) -> Result<TensorTrain> {
    let axis = product.axis(dim)?;
    if tt.mode_sizes() != vec![2; axis.depth()] {
        return Err(Error::InvalidShape(format!(
            "train modes {:?} do not match axis {dim} of depth {}",
            tt.mode_sizes(),
            axis.depth()
        )));
    }
    let mut cores = Vec::with_capacity(product.total_depth());
    for (i, a) in product.axes().iter().enumerate() {
        if i == dim {
            cores.extend(tt.cores().iter().cloned());
        } else {
            cores.extend((0..a.depth()).map(|_| Array3::ones((1, 2, 1))));
        }
    }
    TensorTrain::from_cores(cores)
}

/// Normalized uniform density, rank 1.
pub fn uniform_density(product: &ProductGrid) -> TensorTrain {
    let n = product.total_depth();
    let core = Array3::from_elem((1, 2, 1), 0.5);
    TensorTrain::from_cores(vec![core; n]).expect("valid")
}

/// Step function `Θ(J > t)` over a big-endian binary index `J`, rank 2.
pub fn comparator_tt(threshold_bits: &[usize]) -> Result<TensorTrain> {
    let n = threshold_bits.len();
    if n == 0 || threshold_bits.iter().any(|&b| b > 1) {
        return Err(Error::Index(format!("invalid threshold digits {threshold_bits:?}")));
    }
    // state 0: equal so far, state 1: already greater
    let transition = |t: usize| {
        let mut core = Array3::zeros((2, 2, 2));
        for b in 0..2 {
            if b == t {
                core[[0, b, 0]] = 1.0;
            }
            if b > t {
                core[[0, b, 1]] = 1.0;
            }
            core[[1, b, 1]] = 1.0;
        }
        core
    };
    let mut cores = Vec::with_capacity(n);
    for (k, &t) in threshold_bits.iter().enumerate() {
        let mut core = transition(t);
        if k == 0 {
            core = core.slice(ndarray::s![0..1, .., ..]).to_owned();
        }
        if k + 1 == n {
            core = core.slice(ndarray::s![.., .., 1..2]).to_owned();
        }
        cores.push(core);
    }
    TensorTrain::from_cores(cores)
}

/// Mask equal to 1 where the coordinate on axis `dim` exceeds `threshold`, else 0.
pub fn heaviside_tt(product: &ProductGrid, dim: usize, threshold: f64) -> Result<TensorTrain> {
    let axis = product.axis(dim)?;
    let d = axis.depth();
    let one_axis = match axis.last_slot_at_or_below(threshold) {
        None => TensorTrain::constant(&vec![2; d], 1.0)?,
        Some(t) if t + 1 == axis.slots() => TensorTrain::constant(&vec![2; d], 0.0)?,
        Some(t) => comparator_tt(&fold_index(t as u64, d)?)?,
    };
    lift_to_product(&one_axis, dim, product)
}

/// Mask equal to 1 on product indices strictly after `slots` in big-endian order.
pub fn index_step_tt(product: &ProductGrid, slots: &[usize]) -> Result<TensorTrain> {
    if slots.len() != product.dims() {
        return Err(Error::Index(format!(
            "expected {} slots, got {}",
            product.dims(),
            slots.len()
        )));
    }
    for (axis, &s) in product.axes().iter().zip(slots) {
        if s >= axis.slots() {
            return Err(Error::Index(format!("slot {s} out of range")));
        }
    }
    comparator_tt(&product.bits(slots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::multi_indices;

    #[test]
    fn fold_examples() {
        assert_eq!(fold_index(0, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(fold_index(5, 3).unwrap(), vec![1, 0, 1]);
        assert!(fold_index(8, 3).is_err());
        for j in 0..256 {
            assert_eq!(unfold_index(&fold_index(j, 8).unwrap()).unwrap(), j);
        }
    }

    #[test]
    fn position_matches_formula() {
        let g = GridSpec::new(-1.5, 2.5, 8).unwrap();
        let tt = position_tt(&g);
        assert!(tt.max_rank() <= 2);
        for j in 0..256u64 {
            let x = tt.eval(&fold_index(j, 8).unwrap()).unwrap();
            assert!((x - (-1.5 + j as f64 * g.spacing())).abs() <= 1e-12 * 4.0);
        }
        let g1 = GridSpec::new(0.0, 1.0, 1).unwrap();
        let t1 = position_tt(&g1);
        assert_eq!(t1.eval(&[0]).unwrap(), 0.0);
        assert_eq!(t1.eval(&[1]).unwrap(), 1.0);
    }

    #[test]
    fn lift_is_constant_elsewhere() {
        let g = GridSpec::new(0.0, 7.0, 3).unwrap();
        let p = ProductGrid::uniform(g, 2).unwrap();
        let lifted = lift_to_product(&position_tt(&g), 0, &p).unwrap();
        for bits in multi_indices(&p.mode_sizes()) {
            let s = p.slots(&bits);
            assert!((lifted.eval(&bits).unwrap() - s[0] as f64).abs() < 1e-12);
        }
        assert!(lift_to_product(&position_tt(&g), 2, &p).is_err());
    }

    #[test]
    fn uniform_mass_is_one() {
        let g = GridSpec::new(0.0, 1.0, 8).unwrap();
        let p = ProductGrid::uniform(g, 50).unwrap();
        let rho = uniform_density(&p);
        assert!((rho.l1_norm_nonneg().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rho.max_rank(), 1);
    }

    #[test]
    fn heaviside_cases() {
        let g = GridSpec::new(0.0, 7.0, 3).unwrap();
        let p = ProductGrid::uniform(g, 1).unwrap();
        let below = heaviside_tt(&p, 0, -1.0).unwrap();
        let mid = heaviside_tt(&p, 0, 3.5).unwrap();
        let above = heaviside_tt(&p, 0, 7.0).unwrap();
        assert!((below.sum() - 8.0).abs() < 1e-12);
        assert!((mid.sum() - 4.0).abs() < 1e-12);
        assert!(above.sum().abs() < 1e-12);
        for j in 0..8u64 {
            let bits = fold_index(j, 3).unwrap();
            assert_eq!(mid.eval(&bits).unwrap(), if j > 3 { 1.0 } else { 0.0 });
        }
        // exact grid point is not strictly above itself
        let at = heaviside_tt(&p, 0, 3.0).unwrap();
        assert_eq!(at.eval(&fold_index(3, 3).unwrap()).unwrap(), 0.0);
        assert!(mid.max_rank() <= 2);
    }

    #[test]
    fn tabulated_axis_lookup() {
        let a = Axis::tabulated(vec![2.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(a.nearest_slot(4.1), 2);
        assert_eq!(a.nearest_slot(3.9), 1);
        assert_eq!(a.last_slot_at_or_below(4.9), Some(1));
        assert_eq!(a.last_slot_at_or_below(1.0), None);
        let tt = a.position_tt();
        for (j, c) in [2.0, 3.0, 5.0, 7.0].iter().enumerate() {
            assert!((tt.eval(&fold_index(j as u64, 2).unwrap()).unwrap() - c).abs() < 1e-12);
        }
        assert!(Axis::tabulated(vec![1.0, 1.0]).is_err());
        assert!(Axis::tabulated(vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn index_step_over_product() {
        let g = GridSpec::new(0.0, 3.0, 2).unwrap();
        let p = ProductGrid::uniform(g, 2).unwrap();
        let step = index_step_tt(&p, &[1, 2]).unwrap();
        for bits in multi_indices(&p.mode_sizes()) {
            let s = p.slots(&bits);
            let j = s[0] * 4 + s[1];
            assert_eq!(step.eval(&bits).unwrap(), if j > 6 { 1.0 } else { 0.0 });
        }
    }
}

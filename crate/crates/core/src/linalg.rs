//! Dense factorizations on `ndarray` storage, backed by LAPACK.

use ndarray::{s, Array2, ArrayView2};
use ndarray_linalg::QR;

// LAPACK wrappers mishandle some column-major inputs
fn standard(a: ArrayView2<f64>) -> Array2<f64> {
    a.as_standard_layout().into_owned()
}

/// Thin QR: `a = q r` with `q` of shape (m, k), `r` of shape (k, n), k = min(m, n).
pub(crate) fn qr_thin(a: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    let k = m.min(n);
    let (q, r) = standard(a).qr().expect("qr of finite matrix");
    (standard(q.slice(s![.., ..k])), standard(r.slice(s![..k, ..])))
}

/// Thin SVD with singular values in descending order.
///
/// Householder QR of the tall orientation, then one-sided Jacobi on the
/// square triangular factor.
pub(crate) fn svd(a: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    if m < n {
        let (u, sv, vt) = svd(a.t());
        return (standard(vt.t()), sv, standard(u.t()));
    }
    if n == 0 {
        return (Array2::zeros((m, 0)), Vec::new(), Array2::zeros((0, n)));
    }
    let (q, r) = qr_thin(a);
    let (ur, sv, v) = jacobi_svd(r);
    (standard(q.dot(&ur).view()), sv, standard(v.t()))
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi on the columns of a square matrix: `a = u diag(s) vᵀ`.
/// Columns of `u` belonging to zero singular values are zero.
fn jacobi_svd(a: Array2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let n = a.ncols();
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if !(scale > 0.0) {
        return (Array2::zeros(a.dim()), vec![0.0; n], Array2::eye(n));
    }
    let mut w = a.mapv(|x| x / scale).reversed_axes().as_standard_layout().into_owned();
    let mut v = Array2::<f64>::eye(n);
    let rows = w.ncols();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    let (x, y) = (w[[p, k]], w[[q, k]]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let (x, y) = (w[[p, k]], w[[q, k]]);
                    w[[p, k]] = c * x - s * y;
                    w[[q, k]] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[[p, k]], v[[q, k]]);
                    v[[p, k]] = c * x - s * y;
                    v[[q, k]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = w.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = Array2::zeros((rows, n));
    let mut vv = Array2::zeros((n, n));
    let mut sv = Vec::with_capacity(n);
    for (col, &i) in order.iter().enumerate() {
        let sigma = norms[i];
        if sigma > 0.0 {
            u.column_mut(col).assign(&w.row(i).mapv(|x| x / sigma));
        }
        vv.column_mut(col).assign(&v.row(i));
        sv.push(sigma * scale);
    }
    (u, sv, vv)
}

/// Smallest rank whose discarded tail has Euclidean norm at most `delta`,
/// clamped to `[1, max_rank]`.
pub(crate) fn truncation_rank(s: &[f64], delta: f64, max_rank: Option<usize>) -> usize {
    let mut tail = 0.0;
    let mut rank = s.len();
    for (k, sv) in s.iter().enumerate().rev() {
        tail += sv * sv;
        if tail.sqrt() > delta {
            break;
        }
        rank = k;
    }
    let rank = rank.max(1).min(s.len().max(1));
    match max_rank {
        Some(cap) => rank.min(cap.max(1)),
        None => rank,
    }
}

/// Gauss-Jordan with partial pivoting; `None` when a pivot collapses.
pub(crate) fn inverse(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "inverse needs a square matrix");
    let mut m = standard(a);
    let mut inv = Array2::<f64>::eye(n);
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let floor = scale * 1e-14;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs()))?;
        if m[[p, c]].abs() <= floor {
            return None;
        }
        if p != c {
            for k in 0..n {
                m.swap([p, k], [c, k]);
                inv.swap([p, k], [c, k]);
            }
        }
        let d = m[[c, c]];
        m.row_mut(c).mapv_inplace(|x| x / d);
        inv.row_mut(c).mapv_inplace(|x| x / d);
        for r in 0..n {
            if r == c {
                continue;
            }
            let f = m[[r, c]];
            if f != 0.0 {
                for k in 0..n {
                    m[[r, k]] -= f * m[[c, k]];
                    inv[[r, k]] -= f * inv[[c, k]];
                }
            }
        }
    }
    inv.iter().all(|x| x.is_finite()).then_some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn check_svd(a: &Array2<f64>, tol: f64) {
        let (u, s, vt) = svd(a.view());
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let sd = Array2::from_diag(&ndarray::Array1::from(s));
        let back = u.dot(&sd).dot(&vt);
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < tol);
        }
    }

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        check_svd(&array![[1.0, 2.0, 0.5], [3.0, -1.0, 4.0]], 1e-12);
        check_svd(&array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]], 1e-12);
        check_svd(&array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]].t().to_owned(), 1e-12);
    }

    #[test]
    fn tiny_magnitudes_keep_relative_accuracy() {
        let a = array![[1.0, 2.0, 0.5, 0.0], [3.0, -1.0, 4.0, 1.0], [0.5, 0.5, 0.5, 2.0], [1.0, 0.0, 0.0, 1e-17]];
        let tiny = &a * 1e-28;
        check_svd(&tiny, 1e-12 * 1e-28);
        let (q, r) = qr_thin(tiny.view());
        for (x, y) in q.dot(&r).iter().zip(tiny.iter()) {
            assert!((x - y).abs() < 1e-12 * 1e-28);
        }
    }

    #[test]
    fn qr_shapes() {
        let wide = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let (q, r) = qr_thin(wide.view());
        assert_eq!(q.dim(), (2, 2));
        assert_eq!(r.dim(), (2, 3));
        for (x, y) in q.dot(&r).iter().zip(wide.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let tall = wide.t().to_owned();
        let (q, r) = qr_thin(tall.view());
        assert_eq!(q.dim(), (3, 2));
        assert_eq!(r.dim(), (2, 2));
        for (x, y) in q.dot(&r).iter().zip(tall.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_keeps_at_least_one() {
        assert_eq!(truncation_rank(&[1.0, 1e-3, 1e-9], 1e-2, None), 1);
        assert_eq!(truncation_rank(&[1.0, 1e-3, 1e-9], 1e-6, None), 2);
        assert_eq!(truncation_rank(&[1.0, 1e-3, 1e-9], 0.0, None), 3);
        assert_eq!(truncation_rank(&[1.0, 1e-3, 1e-9], 0.0, Some(2)), 2);
        assert_eq!(truncation_rank(&[0.0, 0.0], 0.0, None), 1);
    }

    #[test]
    fn column_major_inputs() {
        use ndarray::ShapeBuilder;
        let a = Array2::from_shape_fn((5, 3).f(), |(i, j)| ((i * 3 + j) as f64).sin() + if i == j { 2.0 } else { 0.0 });
        check_svd(&a, 1e-12);
        let (q, r) = qr_thin(a.view());
        for (x, y) in q.dot(&r).iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let sq = Array2::from_shape_fn((4, 4).f(), |(i, j)| (i as f64 + 1.0).powi(j as i32) + i as f64);
        let inv = inverse(sq.view()).unwrap();
        let eye = sq.dot(&inv);
        for ((i, j), v) in eye.indexed_iter() {
            assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_inverse_is_none() {
        assert!(inverse(array![[1.0, 2.0], [2.0, 4.0]].view()).is_none());
        let inv = inverse(array![[2.0, 0.0], [0.0, 4.0]].view()).unwrap();
        assert_eq!(inv, array![[0.5, 0.0], [0.0, 0.25]]);
    }

    #[test]
    fn factorizations_at_larger_shapes() {
        for &(m, n) in &[(2, 8192), (4, 4096), (64, 256), (256, 64), (80, 80), (158, 64), (7, 3)] {
            let a = Array2::from_shape_fn((m, n), |(i, j)| ((i * 131 + j * 17) as f64 * 0.37).sin() + (i as f64) * 1e-3);
            check_svd(&a, 1e-10);
            let (q, r) = qr_thin(a.view());
            let back = q.dot(&r);
            for (x, y) in back.iter().zip(a.iter()) {
                assert!((x - y).abs() < 1e-10, "qr {m}x{n}");
            }
        }
    }
}

//! Small dense real linear algebra: Householder QR, least squares,
//! one-sided Jacobi SVD (rank oracle), polynomial fitting.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

/// Householder QR of an m x n matrix (m >= n): returns (Q, R) with Q m x m
/// orthogonal and R m x n upper triangular.
pub fn qr(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    let mut r = a.clone();
    let mut q = Array2::<f64>::eye(m);
    for k in 0..n.min(m.saturating_sub(1)) {
        let mut norm = 0.0;
        for i in k..m {
            norm += r[(i, k)] * r[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; m];
        v[k] = r[(k, k)] - alpha;
        for i in k + 1..m {
            v[i] = r[(i, k)];
        }
        let vtv: f64 = v[k..].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        // R <- (I - 2 v v^T / v^T v) R
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * r[(i, j)]).sum();
            let f = 2.0 * dot / vtv;
            for i in k..m {
                r[(i, j)] -= f * v[i];
            }
        }
        // Q <- Q (I - 2 v v^T / v^T v)
        for i in 0..m {
            let dot: f64 = (k..m).map(|j| q[(i, j)] * v[j]).sum();
            let f = 2.0 * dot / vtv;
            for j in k..m {
                q[(i, j)] -= f * v[j];
            }
        }
    }
    for j in 0..n {
        for i in j + 1..m {
            r[(i, j)] = 0.0;
        }
    }
    (q, r)
}

/// Householder QR with greedy column pivoting: A P = Q R, the pivot at
/// each step being the column with the largest trailing norm, so |R_kk| is
/// nonincreasing and thresholding the diagonal reveals numerical rank.
/// Returns (Q, R, perm) with perm[k] the original index of pivot column k.
pub fn qr_pivoted(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let (m, n) = a.dim();
    let mut r = a.clone();
    let mut q = Array2::<f64>::eye(m);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n.min(m) {
        let pivot = (k..n)
            .max_by(|&a, &b| {
                let na: f64 = (k..m).map(|i| r[(i, a)] * r[(i, a)]).sum();
                let nb: f64 = (k..m).map(|i| r[(i, b)] * r[(i, b)]).sum();
                na.partial_cmp(&nb).unwrap()
            })
            .unwrap();
        if pivot != k {
            for i in 0..m {
                let t = r[(i, k)];
                r[(i, k)] = r[(i, pivot)];
                r[(i, pivot)] = t;
            }
            perm.swap(k, pivot);
        }
        if k == m - 1 {
            break;
        }
        let mut norm = 0.0;
        for i in k..m {
            norm += r[(i, k)] * r[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            break;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; m];
        v[k] = r[(k, k)] - alpha;
        for i in k + 1..m {
            v[i] = r[(i, k)];
        }
        let vtv: f64 = v[k..].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * r[(i, j)]).sum();
            let f = 2.0 * dot / vtv;
            for i in k..m {
                r[(i, j)] -= f * v[i];
            }
        }
        for i in 0..m {
            let dot: f64 = (k..m).map(|j| q[(i, j)] * v[j]).sum();
            let f = 2.0 * dot / vtv;
            for j in k..m {
                q[(i, j)] -= f * v[j];
            }
        }
    }
    for j in 0..n {
        for i in j + 1..m {
            r[(i, j)] = 0.0;
        }
    }
    (q, r, perm)
}

/// Least-squares solution of A x = b via QR; errors on rank deficiency
/// relative to `rcond`.
pub fn lstsq(a: &Array2<f64>, b: &Array1<f64>, rcond: f64) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(Error::InvalidArgument("lstsq dimension mismatch".into()));
    }
    let (q, r) = qr(a);
    let mut rhs = Array1::<f64>::zeros(n);
    for j in 0..n {
        rhs[j] = (0..m).map(|i| q[(i, j)] * b[i]).sum();
    }
    let dmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        if r[(i, i)].abs() <= rcond * dmax {
            return Err(Error::IllConditioned(format!(
                "pivot {:.3e} below rcond*max ({:.3e})",
                r[(i, i)].abs(),
                rcond * dmax
            )));
        }
        x[i] = s / r[(i, i)];
    }
    Ok(x)
}

/// Singular values by one-sided Jacobi (descending). Used as an
/// independent rank oracle against QR-diagonal pruning.
pub fn singular_values(a: &Array2<f64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let mut u = a.clone();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    app += u[(i, p)] * u[(i, p)];
                    aqq += u[(i, q)] * u[(i, q)];
                    apq += u[(i, p)] * u[(i, q)];
                }
                if apq.abs() <= 1e-30 || apq.abs() <= 1e-16 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..m {
                    let uip = u[(i, p)];
                    let uiq = u[(i, q)];
                    u[(i, p)] = c * uip - s * uiq;
                    u[(i, q)] = s * uip + c * uiq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Least-squares polynomial fit; returns coefficients lowest power first.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::InvalidArgument(format!(
            "polyfit degree {degree} needs more than {degree} points, got {}",
            x.len()
        )));
    }
    let m = x.len();
    let n = degree + 1;
    let mut a = Array2::<f64>::zeros((m, n));
    for i in 0..m {
        let mut p = 1.0;
        for j in 0..n {
            a[(i, j)] = p;
            p *= x[i];
        }
    }
    let b = Array1::from_vec(y.to_vec());
    Ok(lstsq(&a, &b, 1e-13)?.to_vec())
}

/// Coefficient of determination for a fitted curve.
pub fn r_squared(y: &[f64], y_fit: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y
        .iter()
        .zip(y_fit)
        .map(|(v, f)| (v - f) * (v - f))
        .sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn qr_reconstructs_matrix() {
        let a = array![
            [2.0, -1.0, 0.5],
            [1.0, 3.0, -2.0],
            [0.0, 1.0, 1.0],
            [4.0, 0.5, 0.1]
        ];
        let (q, r) = qr(&a);
        let qr_prod = q.dot(&r);
        for (x, y) in a.iter().zip(qr_prod.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let qtq = q.t().dot(&q);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pivoted_qr_sorts_rank_onto_the_diagonal() {
        // Rank-2 matrix with the dependent column first: unpivoted QR puts
        // a tiny R entry in the middle of the diagonal, pivoting pushes it
        // to the end so a prefix cut recovers the rank.
        let c1 = [1.0, 2.0, -1.0, 0.5];
        let c2 = [0.5, -1.0, 2.0, 1.0];
        let mut a = Array2::<f64>::zeros((4, 3));
        for i in 0..4 {
            a[(i, 0)] = 2.0 * c1[i] + 3.0 * c2[i];
            a[(i, 1)] = c1[i];
            a[(i, 2)] = c2[i];
        }
        let (q, r, perm) = qr_pivoted(&a);
        // Reconstruction: Q R must equal A with its columns permuted.
        let qr_prod = q.dot(&r);
        for i in 0..4 {
            for (k, &p) in perm.iter().enumerate() {
                assert!((qr_prod[(i, k)] - a[(i, p)]).abs() < 1e-12);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((q.t().dot(&q)[(i, j)] - expect).abs() < 1e-12);
            }
        }
        // Diagonal magnitudes never increase and the rank shows as a prefix.
        assert!(r[(0, 0)].abs() >= r[(1, 1)].abs());
        assert!(r[(1, 1)].abs() >= r[(2, 2)].abs());
        assert!(r[(1, 1)].abs() > 1e-10);
        assert!(r[(2, 2)].abs() < 1e-12);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = array![[1.0, 2.0], [3.0, 1.0], [0.5, -1.0]];
        let x_true = array![2.0, -3.0];
        let b = a.dot(&x_true);
        let x = lstsq(&a, &b, 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn svd_matches_known_rank() {
        // Rank-2 3-column matrix: third column = sum of first two.
        let mut a = Array2::<f64>::zeros((6, 3));
        for i in 0..6 {
            a[(i, 0)] = (i as f64 + 1.0).sin();
            a[(i, 1)] = (i as f64 * 0.7).cos();
            a[(i, 2)] = a[(i, 0)] + a[(i, 1)];
        }
        let sv = singular_values(&a);
        assert!(sv[0] > 1e-8);
        assert!(sv[1] > 1e-8);
        assert!(sv[2] < 1e-12 * sv[0]);
    }

    #[test]
    fn polyfit_exact_on_cubic() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.5 * v.powi(3)).collect();
        let c = polyfit(&x, &y, 3).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10);
        assert!((c[1] + 2.0).abs() < 1e-10);
        assert!(c[2].abs() < 1e-10);
        assert!((c[3] - 0.5).abs() < 1e-10);
    }
}

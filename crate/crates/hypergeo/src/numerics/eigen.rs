//! Dense complex Hermitian eigensolver (cyclic Jacobi with complex
//! rotations). Dimensions here are tiny (2..32), where Jacobi is accurate
//! to machine precision, needs no external BLAS/LAPACK, and is fully
//! deterministic. Eigenvalues ascend; eigenvectors are the columns of the
//! returned matrix with phases as produced by the rotations (callers apply
//! their own gauge).

use crate::error::{Error, Result};
use crate::numerics::C64;
use ndarray::{Array1, Array2};

pub fn frobenius(h: &Array2<C64>) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_deviation(h: &Array2<C64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let d = (h[(i, j)] - h[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized
/// (H + H^dag)/2 before iterating; callers should have checked Hermiticity
/// against their own tolerance already.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::InvalidArgument(format!(
            "eigh needs a square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    let mut a = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = 0.5 * (h[(i, j)] + h[(j, i)].conj());
        }
    }
    let mut v = Array2::<C64>::eye(n);
    let scale = frobenius(&a).max(1e-300);

    for _sweep in 0..80 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Zeroing condition: c s (aqq - app) + (c^2 - s^2) r = 0,
                // i.e. t^2 + 2 tau t - 1 = 0 with the stable smaller root.
                let tau = (app - aqq) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U embeds [[c, -s e^{i phi}], [s e^{-i phi}, c]] at (p, q);
                // A <- U^dag A U, V <- V U.
                let u_pp = C64::new(c, 0.0);
                let u_pq = -s * phase;
                let u_qp = s * phase.conj();
                let u_qq = C64::new(c, 0.0);
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let mut energies = Array1::<f64>::zeros(n);
    let mut states = Array2::<C64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        energies[col] = a[(src, src)].re;
        for row in 0..n {
            states[(row, col)] = v[(row, src)];
        }
    }
    Ok((energies, states))
}

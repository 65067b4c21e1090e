//! Small dense linear algebra needed by the homography estimator.

use crate::scalar::Scalar;

/// Right singular vectors of a row-major `rows x cols` matrix, by one-sided
/// (Hestenes) Jacobi rotations.
///
/// Returns `(singular_values, vectors)` with singular values in descending
/// order; `vectors[k]` is the right singular vector paired with
/// `singular_values[k]`. Works for `rows < cols` as well, in which case the
/// trailing singular values are zero and their vectors span the null space.
pub fn right_singular_vectors<T: Scalar>(a: &[T], rows: usize, cols: usize) -> (Vec<T>, Vec<Vec<T>>) {
    assert_eq!(a.len(), rows * cols);
    // column-major working copies
    let mut u: Vec<Vec<T>> = (0..cols)
        .map(|c| (0..rows).map(|r| a[r * cols + c]).collect())
        .collect();
    let mut v: Vec<Vec<T>> = (0..cols)
        .map(|c| (0..cols).map(|r| if r == c { T::one() } else { T::zero() }).collect())
        .collect();

    let eps = T::epsilon();
    // Columns this small are numerically zero; rotating them only churns
    // rounding noise and stalls convergence.
    let frob2 = a.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let negligible = eps * eps * frob2;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for r in 0..rows {
                    alpha = alpha + u[p][r] * u[p][r];
                    beta = beta + u[q][r] * u[q][r];
                    gamma = gamma + u[p][r] * u[q][r];
                }
                if gamma == T::zero()
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= eps * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = u
        .iter()
        .map(|col| col.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| norms[i]).collect();
    let vectors = order.iter().map(|&i| v[i].clone()).collect();
    (values, vectors)
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*xp, *xq);
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

pub type Mat3<T> = [[T; 3]; 3];

pub fn mat3_mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

pub fn mat3_det<T: Scalar>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse via the adjugate; `None` when the determinant vanishes.
pub fn mat3_inverse<T: Scalar>(m: &Mat3<T>) -> Option<Mat3<T>> {
    let det = mat3_det(m);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = adj[i][j] / det;
        }
    }
    Some(out)
}

//! Small dense linear-algebra kernels: Hermitian eigendecomposition by
//! cyclic Jacobi rotations and an orthonormal complement via a Householder
//! reflector.

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// Off-diagonal Frobenius tolerance, relative to ‖A‖_F.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Returns `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with cyclic Jacobi sweeps.
///
/// The input is symmetrized first; anti-Hermitian residue is discarded.
pub fn hermitian_eigen(matrix: &CMatrix) -> Result<HermitianEigen> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
        });
    }
    let mut a = hermitian_part(matrix);
    let mut v = CMatrix::identity(n, n);
    let scale = a.norm();
    let target = JACOBI_TOLERANCE * scale.max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                residual: off_diagonal_norm(&a),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                rotate(&mut a, &mut v, p, q, apq, mag);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

/// One unitary rotation G zeroing a[p,q]: A ← G^H A G, V ← V G.
///
/// G = D·P with D removing the phase of a[p,q] and P the real Jacobi
/// rotation of the resulting symmetric 2x2 block.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, apq: C64, mag: f64) {
    let n = a.nrows();
    let phase = apq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let conj_phase = phase.conj();
    let g_pp = C64::new(c, 0.0);
    let g_qp = conj_phase * (-s);
    let g_pq = C64::new(s, 0.0);
    let g_qq = conj_phase * c;

    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * g_pp + aiq * g_qp;
        a[(i, q)] = aip * g_pq + aiq * g_qq;
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * g_pp + viq * g_qp;
        v[(i, q)] = vip * g_pq + viq * g_qq;
    }
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = g_pp.conj() * apj + g_qp.conj() * aqj;
        a[(q, j)] = g_pq.conj() * apj + g_qq.conj() * aqj;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

/// Orthonormal basis (N x (N-1)) of the orthogonal complement of `x`,
/// i.e. of the null space of `x^H`.
pub fn orthonormal_complement(x: &CVector) -> Result<CMatrix> {
    let n = x.len();
    let norm = x.norm();
    if n < 2 || norm <= 1e-300 {
        return Err(Error::DegenerateGeometry(
            "cannot build a complement of a zero or scalar vector".into(),
        ));
    }
    let u = x.unscale(norm);
    // Householder H = I - 2ww^H/(w^H w) with H e1 = phase·u; H is unitary and
    // Hermitian, so columns 2..N span u's complement.
    let phase = if u[0].norm() > 0.0 {
        u[0] / u[0].norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut w = u.clone();
    w[0] += phase;
    let wn2 = w.norm_squared();
    let h = CMatrix::identity(n, n) - (&w * w.adjoint()).scale(2.0 / wn2);
    Ok(h.columns(1, n - 1).into_owned())
}

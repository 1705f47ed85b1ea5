//! Dense linear-algebra helpers on top of `faer`.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;

pub type RMat = Mat<f64>;
pub type CMat = Mat<c64>;

pub fn gaussian_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    Mat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = gaussian_complex(d, d, rng);
    let qr = g.qr();
    let r = qr.R();
    let mut q = qr.compute_Q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { c64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random unit vector as a `d × 1` matrix.
pub fn haar_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let mut v = gaussian_complex(d, 1, rng);
    let n = v.norm_l2();
    for i in 0..d {
        v[(i, 0)] /= n;
    }
    v
}

/// `Σ_{c ∈ cols} u_c u_c†`.
pub fn column_projector(u: &CMat, cols: std::ops::Range<usize>) -> CMat {
    let d = u.nrows();
    let block = u.submatrix(0, cols.start, d, cols.len());
    block * block.adjoint()
}

pub fn complex_identity(d: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Real symmetric matrix from the Gaussian orthogonal ensemble.
pub fn goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMat {
    let mut g = RMat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let x: f64 = rng.sample(StandardNormal);
            let v = if i == j { x * std::f64::consts::SQRT_2 } else { x };
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub fn frobenius(a: &RMat) -> f64 {
    a.norm_l2()
}

/// Copies the upper triangle onto the lower one.
pub fn symmetrize_upper(a: &mut RMat) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            a[(j, i)] = a[(i, j)];
        }
    }
}

/// Copies the lower triangle onto the upper one.
pub fn symmetrize_lower(a: &mut RMat) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            a[(i, j)] = a[(j, i)];
        }
    }
}

/// `(A + Aᵀ)/2`.
pub fn symmetric_part(a: &RMat) -> RMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: &RMat) -> (Vec<f64>, RMat) {
    let e = a.self_adjoint_eigen(Side::Lower).expect("symmetric eigendecomposition converges");
    let vals: Vec<f64> = (0..a.nrows()).map(|i| e.S()[i]).collect();
    (vals, e.U().to_owned())
}

pub fn sym_eigenvalues(a: &RMat) -> Vec<f64> {
    let mut v = a.self_adjoint_eigenvalues(Side::Lower).expect("symmetric eigenvalues converge");
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(a: &RMat) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigenvalues(a)[0]
}

/// Singular values in descending order.
pub fn singular_values(a: &RMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s = a.singular_values().expect("svd converges");
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `max(rows, cols) · σ_max · 2⁻⁴⁰`.
pub fn numerical_rank(a: &RMat) -> usize {
    let s = singular_values(a);
    rank_from_singular_values(&s, a.nrows().max(a.ncols()))
}

pub fn rank_from_singular_values(s: &[f64], max_dim: usize) -> usize {
    let Some(&top) = s.first() else { return 0 };
    let tol = max_dim as f64 * top * (-40f64).exp2();
    s.iter().filter(|&&x| x > tol).count()
}

/// Orthogonal polar factor `U Vᵀ` of a square matrix.
pub fn polar(a: &RMat) -> RMat {
    let svd = a.svd().expect("svd converges");
    svd.U() * svd.V().transpose()
}

/// Least-squares solution of `A x = b` for a tall full-column-rank `A`.
pub fn lstsq(a: &RMat, b: &[f64]) -> Vec<f64> {
    use faer::linalg::solvers::SolveLstsq;
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.qr().solve_lstsq(&rhs);
    (0..a.ncols()).map(|i| x[(i, 0)]).collect()
}

/// Inverse of a symmetric positive definite matrix, `None` if not SPD.
pub fn spd_inverse(a: &RMat) -> Option<RMat> {
    let llt = a.llt(Side::Lower).ok()?;
    let mut inv = RMat::identity(a.nrows(), a.ncols());
    llt.solve_in_place(&mut inv);
    Some(symmetric_part(&inv))
}

pub fn transpose(a: &RMat) -> RMat {
    a.transpose().to_owned()
}

//! See-saw lower bounds for random access codes: alternate between optimal
//! pure states for fixed bases and monotone polar updates of each basis.
//! Every iterate is an explicit realization, so its value is achievable.

use faer::{Mat, Side};
use symnv::linalg::{haar_unitary, CMat};
use symnv::rng::engine_rng;

fn digits(mut x: usize, n: usize, d: usize) -> Vec<usize> {
    let mut v = vec![0; n];
    for k in (0..n).rev() {
        v[k] = x % d;
        x /= d;
    }
    v
}

fn top_eigen(h: &CMat) -> (f64, CMat) {
    let e = h.self_adjoint_eigen(Side::Lower).expect("hermitian eigendecomposition converges");
    let last = h.nrows() - 1;
    (e.S()[last].re, e.U().col(last).to_owned().as_mat().to_owned())
}

/// `|u_b⟩⟨u_b|` for column `b` of `basis`.
fn rank_one(basis: &CMat, b: usize) -> CMat {
    let u = basis.col(b);
    Mat::from_fn(basis.nrows(), basis.nrows(), |i, j| u[i] * u[j].conj())
}

/// Average success probability of the best realization found from `starts`
/// random bases, each refined for `sweeps` rounds.
pub fn rac_lower_bound(n: usize, d: usize, starts: usize, sweeps: usize, seed: u64) -> f64 {
    let states = d.pow(n as u32);
    let labels: Vec<Vec<usize>> = (0..states).map(|x| digits(x, n, d)).collect();
    let norm = 1.0 / (n * states) as f64;
    let mut rng = engine_rng(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..starts {
        let mut bases: Vec<CMat> = (0..n).map(|_| haar_unitary(d, &mut rng)).collect();
        let mut value = 0.0;
        for _ in 0..sweeps {
            let proj: Vec<Vec<CMat>> = bases.iter().map(|u| (0..d).map(|b| rank_one(u, b)).collect()).collect();
            let mut rhos = Vec::with_capacity(states);
            value = 0.0;
            for x in &labels {
                let mut h = CMat::zeros(d, d);
                for (y, &b) in x.iter().enumerate() {
                    h += &proj[y][b];
                }
                let (lam, v) = top_eigen(&h);
                value += lam * norm;
                rhos.push(&v * v.adjoint());
            }
            for (y, basis) in bases.iter_mut().enumerate() {
                let mut cols = CMat::zeros(d, d);
                for b in 0..d {
                    let mut a = CMat::zeros(d, d);
                    for (x, rho) in labels.iter().zip(&rhos) {
                        if x[y] == b {
                            a += rho;
                        }
                    }
                    let v = &a * basis.col(b);
                    for i in 0..d {
                        cols[(i, b)] = v[i];
                    }
                }
                let svd = cols.svd().expect("svd converges");
                *basis = svd.U() * svd.V().adjoint();
            }
        }
        best = best.max(value);
    }
    best
}


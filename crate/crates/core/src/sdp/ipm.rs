//! Infeasible primal-dual interior-point method (HKM direction, Mehrotra
//! predictor-corrector) on a product of PSD cones.
//!
//! Before iterating, the data is restricted to the complement of the common
//! kernel of `E₀, E_1, ..`, and the `E_ℓ` are replaced by an orthonormal basis
//! of their span. Both steps leave the optimal value unchanged.

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Accum, Par, Side};
use serde::{Deserialize, Serialize};

use super::{inner, SdpError, SdpProblem, SdpSolution, SolveStatus};
use crate::linalg::{sym_eigen, sym_eigenvalues, RMat};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    pub max_block: usize,
    pub max_constraints: usize,
    /// Directions whose joint extent over all data matrices is below this
    /// fraction of the largest are treated as common kernel.
    pub kernel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-9, gap_tol: 1e-8, max_iterations: 150, max_block: 500, max_constraints: 5000, kernel_tol: 1e-10 }
    }
}

type Blocks = Vec<RMat>;

fn lower_inverse(l: &RMat) -> RMat {
    let mut inv = RMat::identity(l.nrows(), l.ncols());
    solve_lower_triangular_in_place(l.as_ref(), inv.as_mut(), Par::Seq);
    inv
}

fn chol_lower(a: &RMat) -> Option<RMat> {
    a.llt(Side::Lower).ok().map(|c| c.L().to_owned())
}

fn sym(a: &RMat) -> RMat {
    crate::linalg::symmetric_part(a)
}

fn svec_len(dims: &[usize]) -> usize {
    dims.iter().map(|k| k * (k + 1) / 2).sum()
}

fn svec(blocks: &[RMat], out: &mut [f64]) {
    let mut p = 0;
    for b in blocks {
        for j in 0..b.ncols() {
            for i in 0..=j {
                out[p] = if i == j { b[(i, j)] } else { b[(i, j)] * std::f64::consts::SQRT_2 };
                p += 1;
            }
        }
    }
}

fn smat(v: &[f64], dims: &[usize]) -> Blocks {
    let mut p = 0;
    dims.iter()
        .map(|&k| {
            let mut m = RMat::zeros(k, k);
            for j in 0..k {
                for i in 0..=j {
                    let x = if i == j { v[p] } else { v[p] / std::f64::consts::SQRT_2 };
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                    p += 1;
                }
            }
            m
        })
        .collect()
}

fn blocks_inner(a: &[RMat], b: &[RMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| inner(x, y)).sum()
}

fn blocks_norm(a: &[RMat]) -> f64 {
    blocks_inner(a, a).sqrt()
}

/// Basis of the complement of the common kernel of `mats`, per block.
fn range_basis(p: &SdpProblem, tol: f64) -> Vec<RMat> {
    p.block_dims
        .iter()
        .enumerate()
        .map(|(bi, &n)| {
            let mut t = RMat::zeros(n, n);
            for e in std::iter::once(&p.e0).chain(&p.e) {
                let b = &e.blocks[bi];
                t += b * b;
            }
            let (vals, vecs) = sym_eigen(&t);
            let top = vals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
            let keep: Vec<usize> = (0..n).filter(|&i| vals[i].max(0.0).sqrt() > tol * top && top > 0.0).collect();
            RMat::from_fn(n, keep.len(), |i, j| vecs[(i, keep[j])])
        })
        .collect()
}

struct Conic {
    dims: Vec<usize>,
    c: Blocks,
    a: Vec<Blocks>,
    b: Vec<f64>,
}

struct ConicResult {
    y: Vec<f64>,
    primal: f64,
    dual: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
    iterations: usize,
    status: SolveStatus,
}

/// Solves `max b·y + b₀ s.t. E₀ + Σ y_ℓ E_ℓ ⪰ 0`.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    p.check()?;
    if let Some(&size) = p.block_dims.iter().find(|&&d| d > opts.max_block) {
        return Err(SdpError::BlockTooLarge { size, cap: opts.max_block });
    }
    if p.m() > opts.max_constraints {
        return Err(SdpError::TooManyConstraints { count: p.m(), cap: opts.max_constraints });
    }
    let m = p.m();
    let q = range_basis(p, opts.kernel_tol);
    let dims: Vec<usize> = q.iter().map(RMat::ncols).collect();
    let reduce = |bv: &crate::blockdiag::BlockVector| -> Blocks { bv.blocks.iter().zip(&q).map(|(e, qb)| sym(&(qb.transpose() * e * qb))).collect() };
    let e0 = reduce(&p.e0);
    let len = svec_len(&dims);

    // Orthonormal basis of span{E_ℓ}: S = U Σ Vᵀ, coordinates u = Σ Vᵀ y.
    let mut smat_cols = RMat::zeros(len, m);
    for (l, e) in p.e.iter().enumerate() {
        let mut v = vec![0.0; len];
        svec(&reduce(e), &mut v);
        for (i, x) in v.into_iter().enumerate() {
            smat_cols[(i, l)] = x;
        }
    }
    let (u_basis, sigma, v_basis) = if m > 0 && len > 0 {
        let svd = smat_cols.thin_svd().expect("svd converges");
        let s: Vec<f64> = (0..m.min(len)).map(|i| svd.S()[i]).collect();
        (svd.U().to_owned(), s, svd.V().to_owned())
    } else {
        (RMat::zeros(len, 0), Vec::new(), RMat::zeros(m, 0))
    };
    let smax = sigma.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > 1e-12 * smax).collect();
    let k = keep.len();
    // b' = Σ⁻¹ Vᵀ b on the kept directions; the rest of b must vanish.
    let bnorm = p.b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut b_proj = vec![0.0; m];
    let mut b_red = vec![0.0; k];
    for (kk, &i) in keep.iter().enumerate() {
        let c: f64 = (0..m).map(|l| v_basis[(l, i)] * p.b[l]).sum();
        b_red[kk] = c / sigma[i];
        for l in 0..m {
            b_proj[l] += v_basis[(l, i)] * c;
        }
    }
    let b_perp = p.b.iter().zip(&b_proj).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    let reduced_dims = dims.clone();
    if b_perp > 1e-8 * bnorm.max(1.0) {
        return Ok(SdpSolution {
            y: vec![0.0; m],
            objective: f64::INFINITY,
            dual_objective: f64::INFINITY,
            duality_gap: f64::NAN,
            primal_infeasibility: f64::NAN,
            dual_infeasibility: f64::NAN,
            status: SolveStatus::Unbounded,
            iterations: 0,
            reduced_dims,
        });
    }
    let basis_mats: Vec<Blocks> = keep.iter().map(|&i| smat(&(0..len).map(|r| u_basis[(r, i)]).collect::<Vec<_>>(), &dims)).collect();
    // E₀' = E₀ − Σ α_k Q_k.
    let alpha: Vec<f64> = basis_mats.iter().map(|qk| blocks_inner(&e0, qk)).collect();
    let mut c = e0.clone();
    for (qk, &al) in basis_mats.iter().zip(&alpha) {
        for (cb, qb) in c.iter_mut().zip(qk) {
            *cb -= qb * faer::Scale(al);
        }
    }
    let shift: f64 = b_red.iter().zip(&alpha).map(|(b, a)| b * a).sum();
    let c_scale = blocks_norm(&c).max(1e-300);
    let b_scale = b_red.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let conic = Conic {
        dims: dims.clone(),
        c: c.iter().map(|x| x * faer::Scale(1.0 / c_scale)).collect(),
        a: basis_mats.iter().map(|qk| qk.iter().map(|x| -x).collect()).collect(),
        b: b_red.iter().map(|x| x / b_scale).collect(),
    };
    let res = if k == 0 { trivial(&conic) } else { hkm(&conic, opts) };
    // w = c_s·w̃, u = w − α, y = V Σ⁻¹ u.
    let mut y = vec![0.0; m];
    for (kk, &i) in keep.iter().enumerate() {
        let u = c_scale * res.y[kk] - alpha[kk];
        for (l, yl) in y.iter_mut().enumerate() {
            *yl += v_basis[(l, i)] * u / sigma[i];
        }
    }
    let scale = c_scale * b_scale;
    let objective = p.b0 + p.b.iter().zip(&y).map(|(b, v)| b * v).sum::<f64>();
    let dual_objective = p.b0 - shift + scale * res.primal;
    Ok(SdpSolution {
        y,
        objective,
        dual_objective,
        duality_gap: scale * (res.primal - res.dual),
        primal_infeasibility: res.dinf,
        dual_infeasibility: res.pinf,
        status: res.status,
        iterations: res.iterations,
        reduced_dims,
    })
}

/// No free variables: feasible iff `C ⪰ 0`.
fn trivial(p: &Conic) -> ConicResult {
    let lmin = p.c.iter().map(|b| sym_eigenvalues(b).first().copied().unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
    let status = if lmin >= -1e-12 { SolveStatus::Optimal } else { SolveStatus::Infeasible };
    ConicResult { y: Vec::new(), primal: 0.0, dual: 0.0, pinf: 0.0, dinf: lmin.min(0.0).abs(), gap: 0.0, iterations: 0, status }
}

/// Largest `α` with `X + α Δ ⪰ 0` (∞ if unrestricted).
fn max_step(x_chol_inv: &[RMat], delta: &[RMat]) -> f64 {
    let mut lmin = f64::INFINITY;
    for (li, d) in x_chol_inv.iter().zip(delta) {
        if d.nrows() == 0 {
            continue;
        }
        let s = sym(&(li * d * li.transpose()));
        lmin = lmin.min(sym_eigenvalues(&s)[0]);
    }
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Iterations without a new best iterate before giving up.
const STALL_ITERATIONS: usize = 10;

fn hkm(p: &Conic, opts: &SolverOptions) -> ConicResult {
    let m = p.b.len();
    let ntot: usize = p.dims.iter().sum();
    let nf = ntot.max(1) as f64;
    let cnorm = blocks_norm(&p.c);
    let bnorm = p.b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let xi = (10.0f64).max(nf.sqrt()).max(p.b.iter().fold(0.0f64, |a, b| a.max((1.0 + b.abs()) / 2.0)));
    let eta = (10.0f64).max(nf.sqrt()).max(1.0 + cnorm);
    let ident = |s: f64| -> Blocks { p.dims.iter().map(|&k| RMat::identity(k, k) * faer::Scale(s)).collect() };
    let mut x = ident(xi);
    let mut z = ident(eta);
    let mut y = vec![0.0; m];
    // Column `i` is `svec(A_i)`, so `A(M) = Aᵀ svec(M)` and `Σ yᵢ Aᵢ = smat(A y)`.
    let svlen = svec_len(&p.dims);
    let mut stacked = RMat::zeros(svlen, m);
    let mut buf = vec![0.0; svlen];
    for (i, ai) in p.a.iter().enumerate() {
        svec(ai, &mut buf);
        for (r, v) in buf.iter().enumerate() {
            stacked[(r, i)] = *v;
        }
    }
    // `⟨Aᵢ, M⟩ = ⟨Aᵢ, sym(M)⟩` since every `Aᵢ` is symmetric.
    let wlen: usize = p.dims.iter().map(|k| k * k).sum();
    let a_of = |mat: &[RMat]| -> Vec<f64> {
        let mut v = vec![0.0; svlen];
        svec(&mat.iter().map(sym).collect::<Vec<_>>(), &mut v);
        let out = stacked.transpose() * RMat::from_fn(svlen, 1, |r, _| v[r]);
        (0..m).map(|i| out[(i, 0)]).collect()
    };
    let combine = |coef: &[f64]| -> Blocks {
        let out = &stacked * RMat::from_fn(m, 1, |i, _| coef[i]);
        smat(&(0..svlen).map(|r| out[(r, 0)]).collect::<Vec<_>>(), &p.dims)
    };
    let mut last = ConicResult { y: y.clone(), primal: f64::NAN, dual: f64::NAN, pinf: f64::INFINITY, dinf: f64::INFINITY, gap: f64::INFINITY, iterations: 0, status: SolveStatus::NumericalFailure };
    let mut best: Option<ConicResult> = None;
    let mut best_it = 0;

    for it in 0..=opts.max_iterations {
        // Residuals.
        let rd: Blocks = p.c.iter().zip(&z).zip(&combine(&y)).map(|((c, zb), ay)| c - zb - ay).collect();
        let ax = a_of(&x);
        let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
        let dinf = blocks_norm(&rd) / (1.0 + cnorm);
        let primal = blocks_inner(&p.c, &x);
        let dual: f64 = p.b.iter().zip(&y).map(|(b, v)| b * v).sum();
        let gap = (primal - dual).abs() / (1.0 + primal.abs() + dual.abs());
        let mu = blocks_inner(&x, &z) / nf;
        last = ConicResult { y: y.clone(), primal, dual, pinf, dinf, gap, iterations: it, status: SolveStatus::NumericalFailure };
        let worst = pinf.max(dinf).max(gap);
        if best.as_ref().is_none_or(|b| worst < b.pinf.max(b.dinf).max(b.gap)) {
            best = Some(ConicResult { y: y.clone(), status: SolveStatus::NumericalFailure, ..last });
            best_it = it;
        }
        if pinf < opts.feasibility_tol && dinf < opts.feasibility_tol && gap < opts.gap_tol {
            last.status = SolveStatus::Optimal;
            return last;
        }
        // Farkas-type rays: a huge `y` along which `b·y` grows while `Z` stays
        // feasible, or a huge `X` with `A(X) ≈ 0` and `⟨C, X⟩ < 0`.
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ynorm > 1e12 && dinf < 1e-6 && dual > 1e-8 * ynorm {
            last.status = SolveStatus::Unbounded;
            return last;
        }
        let xnorm = blocks_norm(&x);
        if xnorm > 1e12 && primal < -1e-8 * xnorm {
            last.status = SolveStatus::Infeasible;
            return last;
        }
        // Past the attainable accuracy the iterates drift; keep the best one.
        if xnorm > 1e14 || it > best_it + STALL_ITERATIONS {
            break;
        }
        if it == opts.max_iterations {
            break;
        }

        // Factorizations.
        let Some(lx): Option<Vec<RMat>> = x.iter().map(chol_lower).collect() else { break };
        let Some(lz): Option<Vec<RMat>> = z.iter().map(chol_lower).collect() else { break };
        let lx_inv: Vec<RMat> = lx.iter().map(lower_inverse).collect();
        let lz_inv: Vec<RMat> = lz.iter().map(lower_inverse).collect();
        let zinv: Blocks = lz_inv.iter().map(|l| sym(&(l.transpose() * l))).collect();

        // Schur complement M_ij = ⟨A_i, X A_j Z⁻¹⟩ = ⟨Lₓᵀ A_i R, Lₓᵀ A_j R⟩ with Z⁻¹ = R Rᵀ.
        let mut w = RMat::zeros(wlen, m);
        for (i, ai) in p.a.iter().enumerate() {
            let mut off = 0;
            for (bi, a) in ai.iter().enumerate() {
                let k = p.dims[bi];
                if k == 0 {
                    continue;
                }
                let wi = lx[bi].transpose() * a * lz_inv[bi].transpose();
                for col in 0..k {
                    w.as_mut().col_mut(i).subrows_mut(off + col * k, k).copy_from(wi.col(col));
                }
                off += k * k;
            }
        }
        let mut schur = RMat::zeros(m, m);
        matmul(schur.as_mut(), BlockStructure::TriangularLower, Accum::Replace, w.transpose(), BlockStructure::Rectangular, &w, BlockStructure::Rectangular, 1.0, Par::Seq);
        crate::linalg::symmetrize_lower(&mut schur);
        let factor = {
            let mut f = schur.llt(Side::Lower).ok();
            let mut reg = 1e-14 * (0..m).map(|i| schur[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
            while f.is_none() && reg < 1e-2 {
                let shifted = &schur + RMat::identity(m, m) * faer::Scale(reg);
                f = shifted.llt(Side::Lower).ok();
                reg *= 100.0;
            }
            f
        };
        let Some(factor) = factor else { break };
        let solve_m = |rhs: &[f64]| -> Vec<f64> {
            let mut r = RMat::from_fn(m, 1, |i, _| rhs[i]);
            factor.solve_in_place(&mut r);
            (0..m).map(|i| r[(i, 0)]).collect()
        };
        let dz_of = |dy: &[f64]| -> Blocks { rd.iter().zip(&combine(dy)).map(|(r, a)| r - a).collect() };
        let g: Blocks = x.iter().zip(&rd).zip(&zinv).map(|((xb, r), zi)| xb * r * zi).collect();
        let a_g = a_of(&g);

        // Predictor.
        let rhs: Vec<f64> = (0..m).map(|i| p.b[i] + a_g[i]).collect();
        let dy_a = solve_m(&rhs);
        let dz_a = dz_of(&dy_a);
        let dx_a: Blocks = x.iter().zip(&dz_a).zip(&zinv).map(|((xb, dz), zi)| -(xb + sym(&(xb * dz * zi)))).collect();
        let ap = max_step(&lx_inv, &dx_a).min(1.0);
        let ad = max_step(&lz_inv, &dz_a).min(1.0);
        let xa: Blocks = x.iter().zip(&dx_a).map(|(a, d)| a + d * faer::Scale(ap)).collect();
        let za: Blocks = z.iter().zip(&dz_a).map(|(a, d)| a + d * faer::Scale(ad)).collect();
        let mu_aff = blocks_inner(&xa, &za) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let h: Blocks = dx_a.iter().zip(&dz_a).zip(&zinv).map(|((dx, dz), zi)| dx * dz * zi).collect();
        let a_h = a_of(&h);
        let a_zinv = a_of(&zinv);
        let rhs: Vec<f64> = (0..m).map(|i| p.b[i] - sigma * mu * a_zinv[i] + a_g[i] + a_h[i]).collect();
        let dy = solve_m(&rhs);
        let dz = dz_of(&dy);
        let dx: Blocks = x
            .iter()
            .zip(&dz)
            .zip(&zinv)
            .zip(&h)
            .map(|(((xb, dzb), zi), hb)| zi * faer::Scale(sigma * mu) - xb - sym(&(xb * dzb * zi)) - sym(hb))
            .collect();
        let gamma = 0.95;
        let ap = (gamma * max_step(&lx_inv, &dx)).min(1.0);
        let ad = (gamma * max_step(&lz_inv, &dz)).min(1.0);
        for (xb, d) in x.iter_mut().zip(&dx) {
            *xb += d * faer::Scale(ap);
            *xb = sym(xb);
        }
        for (zb, d) in z.iter_mut().zip(&dz) {
            *zb += d * faer::Scale(ad);
            *zb = sym(zb);
        }
        for (yi, d) in y.iter_mut().zip(&dy) {
            *yi += ad * d;
        }
    }
    let mut out = best.unwrap_or(last);
    let worst = out.pinf.max(out.dinf).max(out.gap);
    out.status = if worst < 1e-6 { SolveStatus::NearOptimal } else { SolveStatus::NumericalFailure };
    out
}

//! Numerical isotypic and irreducible decompositions of the monomial
//! representation, block extraction, and direct block sampling.
//!
//! An [`IrrepBasis`] orders the columns of each real-type component copy-major:
//! column `offset + i·d + k` is basis vector `k` of copy `i`. In that basis an
//! invariant matrix restricted to the component equals `L ⊗ 𝟙_d`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{goe, polar, sym_eigen, RMat};
use crate::reynolds::Symmetrizer;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("spectrum could not be separated into isotypic components after {0} attempts")]
    IllSeparated(usize),
    #[error("component at offset {0} is not of real type; direct block sampling needs real-type irreps")]
    NonRealComponent(usize),
    #[error("block residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("malformed basis: {0}")]
    Malformed(String),
}

/// Symmetric diagonal blocks `L^r`.
#[derive(Clone, Debug)]
pub struct BlockVector {
    pub blocks: Vec<RMat>,
}

impl BlockVector {
    pub fn single(m: RMat) -> Self {
        Self { blocks: vec![m] }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(RMat::nrows).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub offset: usize,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct IsotypicBasis {
    pub u: RMat,
    pub components: Vec<Component>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrrepBlock {
    pub offset: usize,
    /// Irrep dimension `d_r`; 1 for components kept at isotypic granularity.
    pub dim: usize,
    /// Multiplicity `m_r`, the size of the block `L^r`.
    pub multiplicity: usize,
    /// `false` when the `L ⊗ 𝟙` form could not be established.
    pub real_type: bool,
}

#[derive(Clone, Debug)]
pub struct IrrepBasis {
    pub u: RMat,
    pub irreps: Vec<IrrepBlock>,
}

const CLUSTER_GAP: f64 = 1e-6;
const LEAKAGE_TOL: f64 = 1e-8;
const FORM_TOL: f64 = 1e-7;
const ATTEMPTS: usize = 6;

/// `ℛ(G)` for a GOE matrix `G`.
pub fn sample_invariant<R: Rng + ?Sized>(sym: &Symmetrizer, rng: &mut R) -> RMat {
    sym.apply(&goe(sym.dim(), rng))
}

/// Groups of consecutive sorted eigenvalues separated by relative gaps.
fn clusters(vals: &[f64]) -> Vec<std::ops::Range<usize>> {
    if vals.is_empty() {
        return Vec::new();
    }
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..vals.len() {
        if vals[i] - vals[i - 1] > CLUSTER_GAP * scale {
            out.push(start..i);
            start = i;
        }
    }
    out.push(start..vals.len());
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn columns(m: &RMat, cols: &[usize]) -> RMat {
    RMat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

fn sub_block(m: &RMat, r: std::ops::Range<usize>, c: std::ops::Range<usize>) -> RMat {
    m.submatrix(r.start, c.start, r.len(), c.len()).to_owned()
}

/// Largest off-component block norm of `Uᵀ Λ U`, relative to `‖Λ‖`.
pub fn leakage(u: &RMat, components: &[Component], lambda: &RMat) -> f64 {
    let c = u.transpose() * lambda * u;
    let mut worst: f64 = 0.0;
    for a in components {
        for b in components {
            if a.offset == b.offset {
                continue;
            }
            let blk = c.submatrix(a.offset, b.offset, a.dim, b.dim);
            worst = worst.max(blk.norm_l2());
        }
    }
    worst / lambda.norm_l2().max(f64::MIN_POSITIVE)
}

fn try_isotypic<R: Rng + ?Sized>(sym: &Symmetrizer, rng: &mut R) -> Option<IsotypicBasis> {
    let n = sym.dim();
    let l1 = sample_invariant(sym, rng);
    let (vals, t) = sym_eigen(&l1);
    let cl = clusters(&vals);
    let l2 = sample_invariant(sym, rng);
    let b = t.transpose() * &l2 * &t;
    let thr = LEAKAGE_TOL * l2.norm_l2();
    let k = cl.len();
    let mut parent: Vec<usize> = (0..k).collect();
    for i in 0..k {
        for j in i + 1..k {
            let blk = b.submatrix(cl[i].start, cl[j].start, cl[i].len(), cl[j].len());
            if blk.norm_l2() > thr {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; k];
    for i in 0..k {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    // Within a component every eigenvalue cluster has the irrep dimension.
    for g in &groups {
        let s = cl[g[0]].len();
        if g.iter().any(|&c| cl[c].len() != s) {
            return None;
        }
    }
    let mut comps: Vec<(usize, Vec<usize>)> = groups
        .iter()
        .map(|g| {
            let cols: Vec<usize> = g.iter().flat_map(|&c| cl[c].clone()).collect();
            (cols.len(), cols)
        })
        .collect();
    comps.sort_by(|a, b| a.0.cmp(&b.0).then(a.1[0].cmp(&b.1[0])));
    let order: Vec<usize> = comps.iter().flat_map(|c| c.1.iter().copied()).collect();
    let u = columns(&t, &order);
    let mut components = Vec::new();
    let mut off = 0;
    for (dim, _) in &comps {
        components.push(Component { offset: off, dim: *dim });
        off += dim;
    }
    debug_assert_eq!(off, n);
    let l3 = sample_invariant(sym, rng);
    if leakage(&u, &components, &l3) > LEAKAGE_TOL {
        return None;
    }
    Some(IsotypicBasis { u, components })
}

/// Isotypic decomposition from the spectrum of one invariant sample, with
/// eigenspaces merged through the off-blocks of a second sample.
pub fn isotypic<R: Rng + ?Sized>(sym: &Symmetrizer, rng: &mut R) -> Result<IsotypicBasis, BlockError> {
    let n = sym.dim();
    if sym.is_trivial() {
        return Ok(IsotypicBasis { u: RMat::identity(n, n), components: vec![Component { offset: 0, dim: n }] });
    }
    for _ in 0..ATTEMPTS {
        if let Some(b) = try_isotypic(sym, rng) {
            return Ok(b);
        }
    }
    Err(BlockError::IllSeparated(ATTEMPTS))
}

/// Copy-major irrep basis of one component, or `None` if the `L ⊗ 𝟙` form fails.
fn refine_component<R: Rng + ?Sized>(sym: &Symmetrizer, v: &RMat, rng: &mut R) -> Option<(RMat, usize)> {
    let w = v.ncols();
    let restrict = |l: &RMat| -> RMat { v.transpose() * l * v };
    let a = restrict(&sample_invariant(sym, rng));
    let (vals, p) = sym_eigen(&a);
    let cl = clusters(&vals);
    let d = cl[0].len();
    if cl.iter().any(|c| c.len() != d) || w % d != 0 {
        return None;
    }
    let m = w / d;
    let b = restrict(&sample_invariant(sym, rng));
    let p1 = sub_block(&p, 0..w, cl[0].clone());
    let mut q = RMat::zeros(w, w);
    for (i, c) in cl.iter().enumerate() {
        let pi = sub_block(&p, 0..w, c.clone());
        let qi = if i == 0 {
            pi
        } else {
            let b1i = p1.transpose() * &b * &pi;
            if b1i.norm_l2() < 1e-9 * b.norm_l2() {
                return None;
            }
            &pi * polar(&b1i).transpose()
        };
        for k in 0..d {
            for r in 0..w {
                q[(r, i * d + k)] = qi[(r, k)];
            }
        }
    }
    let basis = v * &q;
    let c = {
        let l = sample_invariant(sym, rng);
        basis.transpose() * &l * &basis
    };
    let (_, res) = average_blocks(&c, d, m);
    if res > FORM_TOL * c.norm_l2().max(f64::MIN_POSITIVE) {
        return None;
    }
    Some((basis, d))
}

/// `L_ij = d⁻¹ Σ_k C[i d + k, j d + k]` and the residual `‖C − L ⊗ 𝟙‖_F`.
fn average_blocks(c: &RMat, d: usize, m: usize) -> (RMat, f64) {
    let mut l = RMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let s: f64 = (0..d).map(|k| c[(i * d + k, j * d + k)]).sum();
            l[(i, j)] = s / d as f64;
        }
    }
    let mut res = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k1 in 0..d {
                for k2 in 0..d {
                    let target = if k1 == k2 { l[(i, j)] } else { 0.0 };
                    res += (c[(i * d + k1, j * d + k2)] - target).powi(2);
                }
            }
        }
    }
    (l, res.sqrt())
}

/// Refines each isotypic component into `m_r` copies of a `d_r`-dimensional
/// real irrep; components failing verification stay at isotypic granularity.
pub fn irreps<R: Rng + ?Sized>(sym: &Symmetrizer, iso: &IsotypicBasis, rng: &mut R) -> IrrepBasis {
    let n = iso.u.nrows();
    let mut u = RMat::zeros(n, n);
    let mut irreps = Vec::new();
    for comp in &iso.components {
        let v = sub_block(&iso.u, 0..n, comp.offset..comp.offset + comp.dim);
        let refined = (0..ATTEMPTS).find_map(|_| refine_component(sym, &v, rng));
        let (basis, block) = match refined {
            Some((b, d)) => (b, IrrepBlock { offset: comp.offset, dim: d, multiplicity: comp.dim / d, real_type: true }),
            None => (v, IrrepBlock { offset: comp.offset, dim: 1, multiplicity: comp.dim, real_type: false }),
        };
        for j in 0..comp.dim {
            for i in 0..n {
                u[(i, comp.offset + j)] = basis[(i, j)];
            }
        }
        irreps.push(block);
    }
    IrrepBasis { u, irreps }
}

impl IrrepBasis {
    /// Treats each isotypic component as a single block.
    pub fn from_isotypic(iso: &IsotypicBasis) -> Self {
        let irreps = iso.components.iter().map(|c| IrrepBlock { offset: c.offset, dim: 1, multiplicity: c.dim, real_type: false }).collect();
        Self { u: iso.u.clone(), irreps }
    }

    /// Block sizes `m_r`.
    pub fn block_dims(&self) -> Vec<usize> {
        self.irreps.iter().map(|b| b.multiplicity).collect()
    }

    /// Multiplicity weights `d_r` of each block.
    pub fn weights(&self) -> Vec<usize> {
        self.irreps.iter().map(|b| b.dim).collect()
    }

    pub fn all_real(&self) -> bool {
        self.irreps.iter().all(|b| b.real_type)
    }

    fn columns_of(&self, b: &IrrepBlock) -> RMat {
        sub_block(&self.u, 0..self.u.nrows(), b.offset..b.offset + b.dim * b.multiplicity)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.u.nrows();
        let data: Vec<f64> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| self.u[(i, j)]).collect();
        serde_json::json!({ "n": n, "u_column_major": data, "irreps": self.irreps })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, BlockError> {
        let n = v["n"].as_u64().ok_or_else(|| BlockError::Malformed("missing n".into()))? as usize;
        let data: Vec<f64> = serde_json::from_value(v["u_column_major"].clone()).map_err(|e| BlockError::Malformed(e.to_string()))?;
        let irreps: Vec<IrrepBlock> = serde_json::from_value(v["irreps"].clone()).map_err(|e| BlockError::Malformed(e.to_string()))?;
        if data.len() != n * n {
            return Err(BlockError::Malformed("matrix size".into()));
        }
        Ok(Self { u: RMat::from_fn(n, n, |i, j| data[j * n + i]), irreps })
    }
}

/// Blocks `L^r` of a symmetrized matrix.
pub fn extract_blocks(basis: &IrrepBasis, gamma: &RMat) -> BlockVector {
    let mut blocks = Vec::with_capacity(basis.irreps.len());
    for b in &basis.irreps {
        let w = basis.columns_of(b);
        let x = gamma * &w;
        let (d, m) = (b.dim, b.multiplicity);
        let mut l = RMat::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                let mut s = 0.0;
                for k in 0..d {
                    let (ci, cj) = (i * d + k, j * d + k);
                    for r in 0..w.nrows() {
                        s += w[(r, ci)] * x[(r, cj)];
                    }
                }
                let v = s / d as f64;
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
        }
        blocks.push(l);
    }
    BlockVector { blocks }
}

/// Blocks together with the largest relative `‖Γ̃^r − L^r ⊗ 𝟙‖` residual.
pub fn extract_blocks_checked(basis: &IrrepBasis, gamma: &RMat) -> (BlockVector, f64) {
    let mut worst: f64 = 0.0;
    let scale = gamma.norm_l2().max(f64::MIN_POSITIVE);
    for b in &basis.irreps {
        let w = basis.columns_of(b);
        let c = w.transpose() * gamma * &w;
        let (_, res) = average_blocks(&c, b.dim, b.multiplicity);
        worst = worst.max(res / scale);
    }
    (extract_blocks(basis, gamma), worst)
}

/// Blocks computed from the stacked vectors `A` (with `Γ = AᵀA`) without
/// forming `Γ`: `ω = A U`, `L^r_ij = d⁻¹ Σ_k ω_{ik}·ω_{jk}`.
pub fn sample_block_direct(basis: &IrrepBasis, stacked: &RMat) -> Result<BlockVector, BlockError> {
    if let Some(b) = basis.irreps.iter().find(|b| !b.real_type && b.multiplicity > 1) {
        return Err(BlockError::NonRealComponent(b.offset));
    }
    let mut blocks = Vec::with_capacity(basis.irreps.len());
    for b in &basis.irreps {
        let w = basis.columns_of(b);
        let omega = stacked * &w;
        let (d, m) = (b.dim, b.multiplicity);
        let mut l = RMat::zeros(m, m);
        for k in 0..d {
            let cols: Vec<usize> = (0..m).map(|i| i * d + k).collect();
            let ok = columns(&omega, &cols);
            let g = ok.transpose() * &ok;
            for j in 0..m {
                for i in 0..m {
                    l[(i, j)] += g[(i, j)];
                }
            }
        }
        let mut l = RMat::from_fn(m, m, |i, j| l[(i, j)] / d as f64);
        crate::linalg::symmetrize_upper(&mut l);
        blocks.push(l);
    }
    Ok(BlockVector { blocks })
}

/// Number of inner products the direct path evaluates.
pub fn direct_inner_products(basis: &IrrepBasis) -> usize {
    basis.irreps.iter().map(|b| b.multiplicity * (b.multiplicity + 1) / 2 * b.dim).sum()
}

/// Dense `⊕_r L^r ⊗ 𝟙_{d_r}` in the irrep basis coordinates.
pub fn expand_blocks(basis: &IrrepBasis, bv: &BlockVector) -> RMat {
    let n = basis.u.nrows();
    let mut out = RMat::zeros(n, n);
    for (b, l) in basis.irreps.iter().zip(&bv.blocks) {
        for i in 0..b.multiplicity {
            for j in 0..b.multiplicity {
                for k in 0..b.dim {
                    out[(b.offset + i * b.dim + k, b.offset + j * b.dim + k)] = l[(i, j)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permgroup::Permutation;
    use crate::rng::engine_rng;

    /// Cyclic shift on 4 points plus reflection: dihedral group of order 8.
    fn dihedral4() -> Symmetrizer {
        let mut els = Vec::new();
        for r in 0..4 {
            for flip in [false, true] {
                let v: Vec<(usize, bool)> = (0..4).map(|i| (if flip { (4 + r - i) % 4 } else { (i + r) % 4 }, false)).collect();
                els.push(Permutation::signed(&v).unwrap());
            }
        }
        Symmetrizer::naive(4, &els)
    }

    #[test]
    fn trivial_group_single_component() {
        let mut rng = engine_rng(1);
        let iso = isotypic(&Symmetrizer::trivial(5), &mut rng).unwrap();
        assert_eq!(iso.components, vec![Component { offset: 0, dim: 5 }]);
    }

    #[test]
    fn dihedral_square_decomposition() {
        // Permutation rep of D4 on the square's vertices: 1 + 1' + 2.
        let sym = dihedral4();
        let mut rng = engine_rng(7);
        let iso = isotypic(&sym, &mut rng).unwrap();
        let dims: Vec<usize> = iso.components.iter().map(|c| c.dim).collect();
        assert_eq!(dims, vec![1, 1, 2]);
        let ir = irreps(&sym, &iso, &mut rng);
        assert!(ir.all_real());
        assert_eq!(ir.block_dims(), vec![1, 1, 1]);
        assert_eq!(ir.weights(), vec![1, 1, 2]);
        let g = sample_invariant(&sym, &mut rng);
        let (bv, res) = extract_blocks_checked(&ir, &g);
        assert!(res < 1e-10);
        let mut e1 = crate::linalg::sym_eigenvalues(&g);
        let mut e2 = crate::linalg::sym_eigenvalues(&expand_blocks(&ir, &bv));
        e1.sort_by(f64::total_cmp);
        e2.sort_by(f64::total_cmp);
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_maps_to_identity_blocks() {
        let sym = dihedral4();
        let mut rng = engine_rng(9);
        let iso = isotypic(&sym, &mut rng).unwrap();
        let ir = irreps(&sym, &iso, &mut rng);
        let bv = extract_blocks(&ir, &RMat::identity(4, 4));
        for b in &bv.blocks {
            assert!((b - RMat::identity(b.nrows(), b.nrows())).norm_l2() < 1e-12);
        }
    }
}

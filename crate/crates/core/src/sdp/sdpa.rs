//! Sparse SDPA (`.dat-s`) interchange.
//!
//! The file encodes `min c·x  s.t.  Σ F_i x_i − F₀ ⪰ 0` with `F₀ = −E₀`,
//! `F_i = E_i`, `c = −b`, so the bound equals `b₀ − (SDPA optimum)`. The
//! offset `b₀` is carried in a header comment.

use std::fmt::Write as _;
use std::io::Write;

use super::{SdpError, SdpProblem};
use crate::blockdiag::BlockVector;
use crate::linalg::RMat;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the problem; identical inputs give identical bytes.
pub fn emit_sdpa(p: &SdpProblem) -> Result<String, SdpError> {
    p.check()?;
    let mut s = String::new();
    let _ = writeln!(s, "\"maximize b.y + b0 s.t. E0 + sum_i y_i E_i >= 0; stored as F0 = -E0, F_i = E_i, c = -b; bound = b0 - optimum");
    let _ = writeln!(s, "\"b0 = {}", num(p.b0));
    let _ = writeln!(s, "{}", p.m());
    let _ = writeln!(s, "{}", p.block_dims.len());
    let _ = writeln!(s, "{}", p.block_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "));
    let c: Vec<String> = p.b.iter().map(|&b| num(-b)).collect();
    let _ = writeln!(s, "{}", if c.is_empty() { "0".to_string() } else { c.join(" ") });
    let write_matrix = |s: &mut String, matno: usize, bv: &BlockVector, sign: f64| {
        for (blk, m) in bv.blocks.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    let v = sign * m[(i, j)];
                    if v != 0.0 {
                        let _ = writeln!(s, "{} {} {} {} {}", matno, blk + 1, i + 1, j + 1, num(v));
                    }
                }
            }
        }
    };
    write_matrix(&mut s, 0, &p.e0, -1.0);
    for (k, e) in p.e.iter().enumerate() {
        write_matrix(&mut s, k + 1, e, 1.0);
    }
    Ok(s)
}

pub fn write_sdpa(p: &SdpProblem, path: &std::path::Path) -> Result<(), SdpError> {
    let text = emit_sdpa(p)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Parses a file written by [`emit_sdpa`] (or any sparse SDPA file without
/// diagonal blocks; `b₀` defaults to 0 when the header comment is absent).
pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let err = |line: usize, message: &str| SdpError::Parse { line, message: message.into() };
    let mut b0 = 0.0;
    let mut body: Vec<(usize, &str)> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('"').or_else(|| line.strip_prefix('*')) {
            if let Some(v) = rest.trim().strip_prefix("b0 = ") {
                b0 = v.trim().parse().map_err(|_| err(no + 1, "bad b0"))?;
            }
            continue;
        }
        if !line.is_empty() {
            body.push((no + 1, line));
        }
    }
    let mut it = body.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| err(0, &format!("missing {what}")));
    let strip = |l: &str| l.replace([',', '{', '}', '(', ')'], " ");
    let (ln, l) = next("m")?;
    let m: usize = strip(l).split_whitespace().next().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad m"))?;
    let (ln, l) = next("block count")?;
    let nb: usize = strip(l).split_whitespace().next().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad block count"))?;
    let (ln, l) = next("block sizes")?;
    let dims: Vec<i64> = strip(l).split_whitespace().take(nb).map(|t| t.parse().map_err(|_| err(ln, "bad block size"))).collect::<Result<_, _>>()?;
    if dims.len() != nb || dims.iter().any(|&d| d <= 0) {
        return Err(err(ln, "diagonal (negative) or missing blocks are not supported"));
    }
    let block_dims: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
    let (ln, l) = next("objective")?;
    let c: Vec<f64> = strip(l).split_whitespace().take(m).map(|t| t.parse().map_err(|_| err(ln, "bad objective entry"))).collect::<Result<_, _>>()?;
    if c.len() != m {
        return Err(err(ln, "objective vector too short"));
    }
    let empty = || BlockVector { blocks: block_dims.iter().map(|&d| RMat::zeros(d, d)).collect() };
    let mut mats: Vec<BlockVector> = (0..=m).map(|_| empty()).collect();
    for (ln, l) in it {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 5 {
            return Err(err(ln, "entry needs five fields"));
        }
        let idx: Vec<usize> = t[..4].iter().map(|x| x.parse().map_err(|_| err(ln, "bad index"))).collect::<Result<_, _>>()?;
        let v: f64 = t[4].parse().map_err(|_| err(ln, "bad value"))?;
        let (matno, blk, i, j) = (idx[0], idx[1], idx[2], idx[3]);
        if matno > m || blk == 0 || blk > nb || i == 0 || j == 0 || i > block_dims[blk - 1] || j > block_dims[blk - 1] {
            return Err(err(ln, "index out of range"));
        }
        let mtx = &mut mats[matno].blocks[blk - 1];
        mtx[(i - 1, j - 1)] = v;
        mtx[(j - 1, i - 1)] = v;
    }
    let mut mats = mats.into_iter();
    let f0 = mats.next().expect("F0 present");
    let e0 = BlockVector { blocks: f0.blocks.into_iter().map(|b| -b).collect() };
    Ok(SdpProblem { b0, b: c.iter().map(|v| -v).collect(), e0, e: mats.collect(), block_dims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::engine_rng;
    use proptest::prelude::*;

    #[test]
    fn empty_problem_has_one_block() {
        let p = SdpProblem { b0: 0.0, b: vec![], e0: BlockVector::single(RMat::identity(2, 2)), e: vec![], block_dims: vec![2] };
        let text = emit_sdpa(&p).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('"')).collect();
        assert_eq!(&lines[..4], &["0", "1", "2", "0"]);
        assert_eq!(lines.len(), 6);
    }

    proptest! {
        #[test]
        fn roundtrip_is_exact(seed in 0u64..1000, m in 0usize..4, b0 in -10.0f64..10.0) {
            let mut rng = engine_rng(seed);
            let dims = vec![1, 3, 2];
            let rand_bv = |rng: &mut crate::rng::EngineRng| BlockVector { blocks: dims.iter().map(|&d| crate::linalg::goe(d, rng)).collect() };
            let e0 = rand_bv(&mut rng);
            let e: Vec<BlockVector> = (0..m).map(|_| rand_bv(&mut rng)).collect();
            let b: Vec<f64> = e.iter().map(|x| x.blocks[1][(0, 1)] * 1e-7).collect();
            let p = SdpProblem { b0, b, e0, e, block_dims: dims.clone() };
            let q = parse_sdpa(&emit_sdpa(&p).unwrap()).unwrap();
            prop_assert_eq!(q.b0, p.b0);
            prop_assert_eq!(&q.b, &p.b);
            for (x, y) in std::iter::once(&q.e0).chain(&q.e).zip(std::iter::once(&p.e0).chain(&p.e)) {
                for (bx, by) in x.blocks.iter().zip(&y.blocks) {
                    prop_assert!(bx == by);
                }
            }
            prop_assert_eq!(emit_sdpa(&q).unwrap(), emit_sdpa(&p).unwrap());
        }
    }
}

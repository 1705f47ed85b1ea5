//! Block-diagonal affine SDPs `max b·y + b₀  s.t.  E₀ + Σ y_ℓ E_ℓ ⪰ 0`.

mod ipm;
mod sdpa;

pub use ipm::{solve, SolverOptions};
pub use sdpa::{emit_sdpa, parse_sdpa, write_sdpa};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockdiag::BlockVector;
use crate::linalg::RMat;
use crate::sampler::SampleBasis;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("block of size {size} exceeds the cap {cap}")]
    BlockTooLarge { size: usize, cap: usize },
    #[error("{count} constraints exceed the cap {cap}")]
    TooManyConstraints { count: usize, cap: usize },
    #[error("inconsistent block structure: {0}")]
    Shape(String),
    #[error("SDPA parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub b0: f64,
    pub b: Vec<f64>,
    pub e0: BlockVector,
    pub e: Vec<BlockVector>,
    pub block_dims: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped with residuals and gap below `10⁻⁶` but above the requested tolerances.
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub y: Vec<f64>,
    /// `b·y + b₀` at the returned point.
    pub objective: f64,
    /// Value of the conic dual at the returned point, an upper bound when it is feasible.
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Block sizes after removing the common kernel of the data.
    pub reduced_dims: Vec<usize>,
}

impl SdpProblem {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// `E₀ + Σ y_ℓ E_ℓ`.
    pub fn evaluate(&self, y: &[f64]) -> BlockVector {
        let mut out = self.e0.clone();
        for (yl, el) in y.iter().zip(&self.e) {
            for (o, b) in out.blocks.iter_mut().zip(&el.blocks) {
                *o += b * faer::Scale(*yl);
            }
        }
        out
    }

    fn check(&self) -> Result<(), SdpError> {
        let dims = self.e0.dims();
        if dims != self.block_dims || self.e.iter().any(|e| e.dims() != dims) || self.e.len() != self.b.len() {
            return Err(SdpError::Shape("all matrices must share block_dims and b must have one entry per E_ℓ".into()));
        }
        Ok(())
    }
}

/// `E₀ = Γ¹`, `E_ℓ = Γ^{ℓ+1} − Γ¹`, `b₀ = p¹`, `b_ℓ = p^{ℓ+1} − p¹`, over the
/// first `rank` samples of the basis.
pub fn assemble(basis: &SampleBasis) -> SdpProblem {
    let r = basis.rank;
    let first = &basis.samples[0];
    let block_dims = first.dims();
    let e = (1..r)
        .map(|l| BlockVector { blocks: basis.samples[l].blocks.iter().zip(&first.blocks).map(|(a, b)| a - b).collect() })
        .collect();
    let b = (1..r).map(|l| basis.objectives[l] - basis.objectives[0]).collect();
    SdpProblem { b0: basis.objectives[0], b, e0: first.clone(), e, block_dims }
}

pub(crate) fn inner(a: &RMat, b: &RMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> BlockVector {
        BlockVector::single(RMat::from_fn(1, 1, |_, _| v))
    }

    #[test]
    fn assemble_differences() {
        let basis = SampleBasis {
            samples: vec![scalar(1.0), scalar(3.0), scalar(0.0)],
            objectives: vec![0.5, 1.5, 0.0],
            weights: vec![1],
            rank: 2,
            drawn: 3,
        };
        let p = assemble(&basis);
        assert_eq!(p.m(), 1);
        assert_eq!(p.b, vec![1.0]);
        assert_eq!(p.e[0].blocks[0][(0, 0)], 2.0);
        assert_eq!(p.evaluate(&[0.5]).blocks[0][(0, 0)], 2.0);
    }
}
